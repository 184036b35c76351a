#pragma once

// Free group of rank d on the symmetric alphabet {a_1, a_1^-1, ..., a_d, a_d^-1}
// and symmetric step distributions on the alphabet plus the identity.
//
// Letters are encoded as 0..2d-1 with generator i at 2i and its inverse at
// 2i+1, so inverse(a) == a ^ 1.

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mfbrw/error.hpp"

namespace mfbrw {

using Letter = std::uint8_t;

constexpr Letter inverse(Letter a) noexcept { return static_cast<Letter>(a ^ 1U); }
constexpr Letter generator_letter(int i) noexcept { return static_cast<Letter>(2 * i); }

class Alphabet {
 public:
  explicit Alphabet(int rank) : rank_(rank) {
    if (rank < 2 || rank > 64) {
      throw Error(Errc::invalid_argument, "free group rank must lie in [2, 64], got " + std::to_string(rank));
    }
  }

  int rank() const noexcept { return rank_; }
  int size() const noexcept { return 2 * rank_; }

  bool operator==(const Alphabet&) const = default;

  /// Lowercase for generators, uppercase for inverses: a, A, b, B, ...
  char symbol(Letter a) const {
    const char base = static_cast<char>('a' + (a >> 1));
    return (a & 1U) ? static_cast<char>(base - 'a' + 'A') : base;
  }

  Letter parse(char c) const {
    int i = -1;
    bool inv = false;
    if (c >= 'a' && c <= 'z') {
      i = c - 'a';
    } else if (c >= 'A' && c <= 'Z') {
      i = c - 'A';
      inv = true;
    }
    if (i < 0 || i >= rank_) {
      throw Error(Errc::invalid_argument, std::string("letter '") + c + "' is outside the alphabet of rank " +
                                              std::to_string(rank_));
    }
    return static_cast<Letter>(2 * i + (inv ? 1 : 0));
  }

 private:
  int rank_;
};

/// A reduced word: no letter is adjacent to its inverse.
class ReducedWord {
 public:
  explicit ReducedWord(int rank) : alphabet_(rank) {}

  /// Reduces an arbitrary letter sequence.
  ReducedWord(int rank, std::initializer_list<Letter> letters) : alphabet_(rank) {
    for (Letter a : letters) push_right(a);
  }

  static ReducedWord from_letters(int rank, const std::vector<Letter>& letters) {
    ReducedWord w(rank);
    for (Letter a : letters) w.push_right(a);
    return w;
  }

  /// Parses "abA" style strings (uppercase = inverse) and reduces.
  static ReducedWord parse(int rank, std::string_view text) {
    ReducedWord w(rank);
    for (char c : text) {
      if (c == ' ' || c == '.') continue;
      w.push_right(w.alphabet_.parse(c));
    }
    return w;
  }

  int rank() const noexcept { return alphabet_.rank(); }
  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t length() const noexcept { return letters_.size(); }
  bool empty() const noexcept { return letters_.empty(); }
  const std::vector<Letter>& letters() const noexcept { return letters_; }
  Letter last() const { return letters_.back(); }

  /// Right multiplication by a single letter; cancels against the last letter.
  void push_right(Letter a) {
    if (a >= alphabet_.size()) {
      throw Error(Errc::invalid_argument, "letter index " + std::to_string(a) + " outside alphabet");
    }
    if (!letters_.empty() && letters_.back() == inverse(a)) {
      letters_.pop_back();
    } else {
      letters_.push_back(a);
    }
  }

  ReducedWord inverse_word() const {
    ReducedWord w(rank());
    w.letters_.reserve(letters_.size());
    for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) w.letters_.push_back(inverse(*it));
    return w;
  }

  std::string to_string() const {
    if (letters_.empty()) return "e";
    std::string out;
    out.reserve(letters_.size());
    for (Letter a : letters_) out.push_back(alphabet_.symbol(a));
    return out;
  }

  bool operator==(const ReducedWord& o) const { return alphabet_ == o.alphabet_ && letters_ == o.letters_; }

 private:
  Alphabet alphabet_;
  std::vector<Letter> letters_;
};

inline ReducedWord multiply(const ReducedWord& x, const ReducedWord& y) {
  if (x.rank() != y.rank()) {
    throw Error(Errc::rank_mismatch,
                "cannot multiply words of rank " + std::to_string(x.rank()) + " and " + std::to_string(y.rank()));
  }
  ReducedWord out = x;
  for (Letter a : y.letters()) out.push_right(a);
  return out;
}

/// Occurrence vector Xi(x): counts[a] = number of occurrences of letter a.
struct LetterCounts {
  std::vector<std::uint32_t> counts;
  std::uint64_t total = 0;

  /// xi(n, x) = Xi(x) / n.
  std::vector<double> normalized(double n) const {
    std::vector<double> out(counts.size());
    for (std::size_t a = 0; a < counts.size(); ++a) out[a] = counts[a] / n;
    return out;
  }
};

inline LetterCounts letter_counts(const ReducedWord& x) {
  LetterCounts c;
  c.counts.assign(static_cast<std::size_t>(x.alphabet().size()), 0U);
  for (Letter a : x.letters()) ++c.counts[a];
  c.total = x.length();
  return c;
}

/// #F_m = 2d (2d-1)^(m-1) for m >= 1, as a double (exact below 2^53).
inline double sphere_size(int rank, int m) {
  if (m == 0) return 1.0;
  return 2.0 * rank * std::pow(2.0 * rank - 1.0, m - 1);
}

inline constexpr double kDefaultSphereCap = 5.0e7;

/// Visits every reduced word of length m exactly once, in lexicographic
/// letter order.
inline void enumerate_sphere(int rank, int m, const std::function<void(const ReducedWord&)>& visit,
                             double cap = kDefaultSphereCap) {
  if (m < 0) throw Error(Errc::invalid_argument, "sphere radius must be nonnegative");
  const double size = sphere_size(rank, m);
  if (size > cap) {
    std::ostringstream msg;
    msg << "sphere of radius " << m << " in rank " << rank << " has " << size << " words, above cap " << cap;
    throw Error(Errc::resource_limit, msg.str());
  }
  const Alphabet alphabet(rank);
  ReducedWord word(rank);
  std::vector<Letter> stack;
  std::vector<Letter> letters;
  letters.reserve(static_cast<std::size_t>(m));
  std::function<void(int)> rec = [&](int depth) {
    if (depth == m) {
      visit(ReducedWord::from_letters(rank, letters));
      return;
    }
    for (int a = 0; a < alphabet.size(); ++a) {
      const auto letter = static_cast<Letter>(a);
      if (!letters.empty() && letters.back() == inverse(letter)) continue;
      letters.push_back(letter);
      rec(depth + 1);
      letters.pop_back();
    }
  };
  rec(0);
}

/// Symmetric probability weights mu on the 2d letters plus the identity.
class StepDistribution {
 public:
  /// Generator weights are mirrored to inverses.
  static StepDistribution from_generators(int rank, double mu_e, const std::vector<double>& generator_weights) {
    if (static_cast<int>(generator_weights.size()) != rank) {
      throw Error(Errc::invalid_argument, "expected " + std::to_string(rank) + " generator weights, got " +
                                              std::to_string(generator_weights.size()));
    }
    std::vector<double> w(2 * static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) w[2 * i] = w[2 * i + 1] = generator_weights[i];
    return StepDistribution(rank, mu_e, std::move(w));
  }

  /// Full per-letter weights (length 2d); symmetry is checked, not imposed.
  static StepDistribution from_letters(int rank, double mu_e, std::vector<double> letter_weights) {
    if (static_cast<int>(letter_weights.size()) != 2 * rank) {
      throw Error(Errc::invalid_argument, "expected " + std::to_string(2 * rank) + " letter weights, got " +
                                              std::to_string(letter_weights.size()));
    }
    return StepDistribution(rank, mu_e, std::move(letter_weights));
  }

  static StepDistribution isotropic(int rank, double mu_e = 0.0) {
    return from_generators(rank, mu_e, std::vector<double>(rank, (1.0 - mu_e) / (2.0 * rank)));
  }

  int rank() const noexcept { return alphabet_.rank(); }
  int alphabet_size() const noexcept { return alphabet_.size(); }
  const Alphabet& alphabet() const noexcept { return alphabet_; }
  double identity_weight() const noexcept { return mu_e_; }
  double weight(Letter a) const { return weights_.at(a); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  bool is_isotropic(double tol = 1e-14) const {
    for (double w : weights_) {
      if (std::abs(w - weights_[0]) > tol * weights_[0]) return false;
    }
    return true;
  }

  /// Stable 64-bit fingerprint of the parameters (FNV-1a over the raw bits).
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    const int r = rank();
    mix(&r, sizeof r);
    mix(&mu_e_, sizeof mu_e_);
    for (double w : weights_) mix(&w, sizeof w);
    return h;
  }

  bool operator==(const StepDistribution& o) const = default;

 private:
  StepDistribution(int rank, double mu_e, std::vector<double> weights)
      : alphabet_(rank), mu_e_(mu_e), weights_(std::move(weights)) {
    if (!(mu_e_ >= 0.0 && mu_e_ < 1.0)) {
      throw Error(Errc::invalid_argument, "identity weight mu_e must lie in [0, 1), got " + std::to_string(mu_e_));
    }
    double total = mu_e_;
    for (std::size_t a = 0; a < weights_.size(); ++a) {
      if (!(weights_[a] > 0.0) || !std::isfinite(weights_[a])) {
        throw Error(Errc::invalid_argument, "positivity violated: mu(" + std::string(1, alphabet_.symbol(
                                                                              static_cast<Letter>(a))) +
                                                ") = " + std::to_string(weights_[a]) + " must be > 0");
      }
      total += weights_[a];
    }
    for (std::size_t a = 0; a < weights_.size(); a += 2) {
      if (std::abs(weights_[a] - weights_[a + 1]) > 1e-12) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "symmetry violated: mu(" << alphabet_.symbol(static_cast<Letter>(a)) << ") = " << weights_[a]
            << " but mu(" << alphabet_.symbol(static_cast<Letter>(a + 1)) << ") = " << weights_[a + 1];
        throw Error(Errc::invalid_argument, msg.str());
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "normalization violated: weights sum to " << total << ", expected 1";
      throw Error(Errc::invalid_argument, msg.str());
    }
  }

  Alphabet alphabet_;
  double mu_e_;
  std::vector<double> weights_;
};

}  // namespace mfbrw
