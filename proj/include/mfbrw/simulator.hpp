#pragma once

// Monte Carlo branching random walks on the free group.
//
// Randomness is counter based: every tree node owns a 64-bit key, a child's
// key is a hash of (parent key, child index), and a node's step and
// offspring count are hashes of its own key. Samples therefore do not
// depend on traversal order, which lets the breadth-first arena and the
// depth-first streaming path agree bit for bit, and makes replicate results
// independent of the worker count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mfbrw/error.hpp"
#include "mfbrw/group.hpp"
#include "mfbrw/parallel.hpp"

namespace mfbrw {

inline constexpr std::size_t kDefaultNodeCap = 50'000'000;
inline constexpr std::uint8_t kIdentityStep = 0xFF;

/// Node cap; MFBRW_NODE_CAP overrides the default.
inline std::size_t node_cap() {
  if (const char* env = std::getenv("MFBRW_NODE_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw Error(Errc::config, std::string("MFBRW_NODE_CAP must be a positive integer, got '") + env + "'");
  }
  return kDefaultNodeCap;
}

// ---- counter-based randomness ------------------------------------------------

namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// splitmix64 finalizer.
inline constexpr std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t replicate_key(std::uint64_t seed, std::uint64_t replicate) {
  return mix(mix(seed + kGolden) + (replicate + 1) * kGolden);
}
inline constexpr std::uint64_t child_key(std::uint64_t parent, std::uint64_t index) {
  return mix(parent + (index + 1) * kGolden);
}
// A node key is already a hash output, so it doubles as the step draw.
inline constexpr std::uint64_t step_draw(std::uint64_t key) { return key; }
inline constexpr std::uint64_t offspring_draw(std::uint64_t key) { return mix(key ^ 0x14057B7EF767814FULL); }

/// Uniform in [0, 1) from the top 53 bits.
inline double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Sequential stream for samplers that need many draws from one key.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  std::uint64_t next() { return mix(key_ + (++counter_) * kGolden); }
  double uniform() { return unit(next()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Walker alias table over 64-bit draws. The high word of draw * n picks a
/// column, the low word is the uniform used against the column threshold.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] / total * static_cast<double>(n);
    threshold_.assign(n, std::numeric_limits<std::uint64_t>::max());
    alias_.resize(n);
    std::iota(alias_.begin(), alias_.end(), std::uint32_t{0});
    std::vector<std::size_t> small;
    std::vector<std::size_t> large;
    for (std::size_t i = 0; i < n; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      const std::size_t l = large.back();
      small.pop_back();
      threshold_[s] = to_threshold(scaled[s]);
      alias_[s] = static_cast<std::uint32_t>(l);
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (std::size_t i : small) threshold_[i] = std::numeric_limits<std::uint64_t>::max();
  }

  std::size_t operator()(std::uint64_t draw) const {
    const unsigned __int128 wide = static_cast<unsigned __int128>(draw) * threshold_.size();
    const auto column = static_cast<std::size_t>(wide >> 64);
    const auto u = static_cast<std::uint64_t>(wide);
    const std::size_t other = alias_[column];
    const std::size_t take = -static_cast<std::size_t>(u >= threshold_[column]);
    return column ^ ((column ^ other) & take);
  }

 private:
  static std::uint64_t to_threshold(double p) {
    if (p <= 0.0) return 0;
    const long double t = static_cast<long double>(p) * 18446744073709551616.0L;
    return t >= 18446744073709551615.0L ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(t);
  }

  std::vector<std::uint64_t> threshold_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace rng

// ---- offspring law -----------------------------------------------------------

class OffspringDistribution {
 public:
  /// Weights over k = 1..K (no extinction).
  static OffspringDistribution custom(std::vector<double> weights) { return OffspringDistribution(std::move(weights)); }

  static OffspringDistribution deterministic(int k) {
    if (k < 2) throw Error(Errc::invalid_argument, "deterministic offspring needs k >= 2 for mean > 1");
    std::vector<double> w(static_cast<std::size_t>(k), 0.0);
    w.back() = 1.0;
    return OffspringDistribution(std::move(w));
  }

  /// 1 + Bernoulli(r - 1), mean r in (1, 2].
  static OffspringDistribution binary(double r) {
    if (!(r > 1.0 && r <= 2.0)) throw Error(Errc::invalid_argument, "binary offspring needs mean in (1, 2]");
    return OffspringDistribution({2.0 - r, r - 1.0});
  }

  /// 1 + Binomial(m, p).
  static OffspringDistribution one_plus_binomial(int m, double p) {
    if (m < 1 || !(p > 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "binomial offspring needs m >= 1, p in (0, 1]");
    std::vector<double> w(static_cast<std::size_t>(m) + 1);
    for (int j = 0; j <= m; ++j) {
      w[j] = std::exp(std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0) +
                      (j == 0 ? 0.0 : j * std::log(p)) + (j == m ? 0.0 : (m - j) * std::log1p(-p)));
    }
    return OffspringDistribution(std::move(w));
  }

  /// P(k) proportional to (1 - p)^(k-1) on k = 1..K.
  static OffspringDistribution truncated_geometric(double p, int K) {
    if (K < 2 || !(p > 0.0 && p < 1.0)) throw Error(Errc::invalid_argument, "truncated geometric needs K >= 2, p in (0, 1)");
    std::vector<double> w(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) w[k - 1] = std::pow(1.0 - p, k - 1);
    const double t = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= t;
    return OffspringDistribution(std::move(w));
  }

  const std::vector<double>& weights() const noexcept { return w_; }
  int max_children() const noexcept { return static_cast<int>(w_.size()); }
  double mean() const noexcept { return mean_; }
  bool is_deterministic() const noexcept { return fixed_ > 0; }

  int sample(std::uint64_t draw) const { return fixed_ > 0 ? fixed_ : static_cast<int>(table_(draw)) + 1; }

 private:
  explicit OffspringDistribution(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw Error(Errc::invalid_argument, "offspring law needs at least one weight");
    double total = 0.0;
    mean_ = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (!(w_[k] >= 0.0)) throw Error(Errc::invalid_argument, "offspring weights must be nonnegative");
      total += w_[k];
      mean_ += (k + 1.0) * w_[k];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(Errc::invalid_argument, "offspring weights sum to " + std::to_string(total) + ", expected 1");
    }
    if (!(mean_ > 1.0)) throw Error(Errc::invalid_argument, "offspring mean must exceed 1, got " + std::to_string(mean_));
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (w_[k] == 1.0) fixed_ = static_cast<int>(k) + 1;
    }
    table_ = rng::Categorical(w_);
  }

  std::vector<double> w_;
  double mean_ = 0.0;
  int fixed_ = 0;
  rng::Categorical table_;
};

// ---- word trie ---------------------------------------------------------------

/// Reduced words as nodes of a growing trie; equal group elements share a node.
class WordTrie {
 public:
  explicit WordTrie(int rank) : k_(2 * rank) { clear(); }

  void clear() {
    parent_.assign(1, 0);
    last_.assign(1, kIdentityStep);
    length_.assign(1, 0);
    child_.assign(static_cast<std::size_t>(k_), 0);
  }

  static constexpr std::uint32_t root() { return 0; }
  std::size_t size() const noexcept { return parent_.size(); }
  std::uint32_t length(std::uint32_t t) const { return length_[t]; }
  std::uint8_t last(std::uint32_t t) const { return last_[t]; }
  std::uint32_t parent(std::uint32_t t) const { return parent_[t]; }

  std::uint32_t step(std::uint32_t t, std::uint8_t b) {
    if (b == kIdentityStep) return t;
    if (t != 0 && b == (last_[t] ^ 1U)) return parent_[t];
    std::uint32_t& c = child_[static_cast<std::size_t>(t) * k_ + b];
    if (c == 0) {
      const auto id = static_cast<std::uint32_t>(parent_.size());
      parent_.push_back(t);
      last_.push_back(b);
      length_.push_back(length_[t] + 1);
      child_.resize(child_.size() + static_cast<std::size_t>(k_), 0);
      // child_ may have reallocated; write through the index.
      child_[static_cast<std::size_t>(t) * k_ + b] = id;
      return id;
    }
    return c;
  }

  ReducedWord word(std::uint32_t t, int rank) const {
    std::vector<Letter> rev;
    for (; t != 0; t = parent_[t]) rev.push_back(last_[t]);
    return ReducedWord::from_letters(rank, std::vector<Letter>(rev.rbegin(), rev.rend()));
  }

 private:
  int k_;
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> last_;
  std::vector<std::uint32_t> length_;
  std::vector<std::uint32_t> child_;
};

// ---- arena -------------------------------------------------------------------

/// Step sampler over {e} + letters, drawing from a node key.
class StepSampler {
 public:
  explicit StepSampler(const StepDistribution& mu) {
    std::vector<double> w{mu.identity_weight()};
    for (double x : mu.weights()) w.push_back(x);
    table_ = rng::Categorical(w);
  }
  std::uint8_t operator()(std::uint64_t key) const {
    const std::size_t i = table_(rng::step_draw(key));
    return i == 0 ? kIdentityStep : static_cast<std::uint8_t>(i - 1);
  }

 private:
  rng::Categorical table_;
};

struct BrwArena {
  int rank = 2;
  int depth = 0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::vector<std::size_t> level_offset;  // level k occupies [level_offset[k], level_offset[k+1])
  std::vector<std::uint32_t> parent;
  std::vector<std::uint8_t> step;         // letter, or kIdentityStep
  std::vector<std::uint32_t> first_child;
  std::vector<std::uint32_t> child_count;
  std::vector<std::uint32_t> word;        // trie node of V(u)
  std::vector<std::uint64_t> key;
  WordTrie trie{2};

  std::size_t size() const noexcept { return parent.size(); }
  std::size_t level_size(int k) const { return level_offset.at(k + 1) - level_offset.at(k); }
  std::uint32_t word_length(std::size_t i) const { return trie.length(word[i]); }
};

namespace detail {

inline void check_population(const OffspringDistribution& p, int n, std::size_t cap) {
  double expected = 0.0;
  double level = 1.0;
  for (int k = 0; k <= n; ++k, level *= p.mean()) expected += level;
  if (expected > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "expected population " << expected << " through depth " << n << " exceeds the node cap " << cap
        << " (raise MFBRW_NODE_CAP)";
    throw Error(Errc::resource_limit, msg.str());
  }
}

}  // namespace detail

/// Grows the tree breadth first to depth n.
inline BrwArena run_brw(const StepDistribution& mu, const OffspringDistribution& p, int n, std::uint64_t seed,
                        std::uint64_t replicate = 0, std::size_t cap = node_cap()) {
  if (n < 0) throw Error(Errc::invalid_argument, "depth must be nonnegative");
  detail::check_population(p, n, cap);
  const StepSampler sample_step(mu);
  BrwArena a;
  a.rank = mu.rank();
  a.depth = n;
  a.seed = seed;
  a.replicate = replicate;
  a.trie = WordTrie(mu.rank());
  a.level_offset = {0, 1};
  a.parent.push_back(0);
  a.step.push_back(kIdentityStep);
  a.word.push_back(WordTrie::root());
  a.key.push_back(rng::replicate_key(seed, replicate));
  for (int k = 0; k < n; ++k) {
    const std::size_t begin = a.level_offset[k];
    const std::size_t end = a.level_offset[k + 1];
    std::size_t total = a.size();
    for (std::size_t i = begin; i < end; ++i) total += static_cast<std::size_t>(p.sample(rng::offspring_draw(a.key[i])));
    if (total > cap) {
      std::ostringstream msg;
      msg << "node cap " << cap << " reached while growing depth " << k + 1 << " of " << n << " (complete through depth "
          << k << ", " << a.size() << " nodes)";
      throw Error(Errc::resource_limit, msg.str());
    }
    for (std::size_t i = begin; i < end; ++i) {
      const int c = p.sample(rng::offspring_draw(a.key[i]));
      a.first_child.push_back(static_cast<std::uint32_t>(a.size()));
      a.child_count.push_back(static_cast<std::uint32_t>(c));
      for (int j = 0; j < c; ++j) {
        const std::uint64_t key = rng::child_key(a.key[i], static_cast<std::uint64_t>(j));
        const std::uint8_t s = sample_step(key);
        a.parent.push_back(static_cast<std::uint32_t>(i));
        a.step.push_back(s);
        a.word.push_back(a.trie.step(a.word[i], s));
        a.key.push_back(key);
      }
    }
    a.level_offset.push_back(a.size());
  }
  // Leaves carry no children.
  a.first_child.resize(a.size(), 0);
  a.child_count.resize(a.size(), 0);
  return a;
}

// ---- level statistics -------------------------------------------------------------

struct LevelSetStats {
  int n = 0;
  std::uint64_t replicate = 0;
  std::uint64_t population = 0;          // |T_n|
  std::vector<std::uint64_t> N;          // N_{n,m}, m = 0..n
  std::vector<std::uint64_t> NF;         // distinct elements per sphere (empty if not tracked)
  std::uint64_t max_multiplicity = 0;    // max_x N_{n,x} (0 if not tracked)

  double log_rate(int m) const { return N[m] == 0 ? -std::numeric_limits<double>::infinity() : std::log(double(N[m])) / n; }
  bool operator==(const LevelSetStats&) const = default;
};

namespace detail {

inline LevelSetStats stats_from_words(int n, std::uint64_t replicate, std::vector<std::uint32_t> words,
                                      const WordTrie& trie) {
  LevelSetStats s;
  s.n = n;
  s.replicate = replicate;
  s.population = words.size();
  s.N.assign(static_cast<std::size_t>(n) + 1, 0);
  s.NF.assign(static_cast<std::size_t>(n) + 1, 0);
  std::sort(words.begin(), words.end());
  for (std::size_t i = 0; i < words.size();) {
    std::size_t j = i;
    while (j < words.size() && words[j] == words[i]) ++j;
    const std::uint32_t m = trie.length(words[i]);
    s.N[m] += j - i;
    s.NF[m] += 1;
    s.max_multiplicity = std::max<std::uint64_t>(s.max_multiplicity, j - i);
    i = j;
  }
  return s;
}

}  // namespace detail

inline LevelSetStats level_stats(const BrwArena& a, int n) {
  if (n < 0 || n > a.depth) throw Error(Errc::invalid_argument, "arena does not reach depth " + std::to_string(n));
  std::vector<std::uint32_t> words(a.word.begin() + static_cast<std::ptrdiff_t>(a.level_offset[n]),
                                   a.word.begin() + static_cast<std::ptrdiff_t>(a.level_offset[n + 1]));
  return detail::stats_from_words(n, a.replicate, std::move(words), a.trie);
}

inline std::uint64_t max_multiplicity(const BrwArena& a, int n) { return level_stats(a, n).max_multiplicity; }

namespace detail {

/// Depth-first walk over the tree with a letter stack; only word lengths at
/// depth n are recorded. A push saves the slot it overwrites and restores it
/// on the way back, so ancestors that popped keep their words intact.
class LengthDfs {
 public:
  LengthDfs(const StepDistribution& mu, const OffspringDistribution& p, int n, std::size_t cap)
      : step_(mu), p_(p), n_(n), cap_(cap), letters_(static_cast<std::size_t>(n) + 2, 0),
        counts_(static_cast<std::size_t>(n) + 1, 0) {}

  void run(std::uint64_t root_key) {
    if (n_ == 0) {
      counts_[0] = 1;
      return;
    }
    if (p_.is_deterministic()) {
      // Population is known in advance; skip the offspring draws.
      std::size_t total = 1;
      std::size_t level = 1;
      for (int k = 0; k < n_; ++k) {
        level *= static_cast<std::size_t>(p_.max_children());
        total += level;
        if (total > cap_) throw Error(Errc::resource_limit, "node cap reached in streaming generation");
      }
      visit<true>(root_key, 0, 0);
    } else {
      visit<false>(root_key, 0, 0);
    }
  }
  std::vector<std::uint64_t>& counts() { return counts_; }

 private:
  template <bool Fixed>
  void visit(std::uint64_t key, int depth, std::uint32_t len) {
    int c;
    if constexpr (Fixed) {
      c = p_.max_children();
    } else {
      c = p_.sample(rng::offspring_draw(key));
      if ((visited_ += static_cast<std::size_t>(c)) > cap_) {
        throw Error(Errc::resource_limit, "node cap reached in streaming generation");
      }
    }
    if (depth + 1 == n_) {
      const std::uint8_t back = len > 0 ? static_cast<std::uint8_t>(letters_[len - 1] ^ 1U) : kIdentityStep;
      for (int j = 0; j < c; ++j) {
        const std::uint8_t s = step_(rng::child_key(key, static_cast<std::uint64_t>(j)));
        const std::uint32_t l = s == kIdentityStep ? len : (s == back ? len - 1 : len + 1);
        ++counts_[l];
      }
      return;
    }
    // Branch-free update: the three outcomes are equally unpredictable.
    const std::uint8_t top = len > 0 ? letters_[len - 1] : kIdentityStep;
    if (depth + 2 == n_) {
      // Last two levels inline, carrying only the top letter.
      const std::uint8_t below = len > 1 ? letters_[len - 2] : kIdentityStep;
      for (int j = 0; j < c; ++j) {
        const std::uint64_t k = rng::child_key(key, static_cast<std::uint64_t>(j));
        const std::uint8_t s = step_(k);
        const bool moved = s != kIdentityStep;
        const bool pop = moved & (top == (s ^ 1U));
        const bool push = moved & !pop;
        const std::uint32_t l = len + static_cast<std::uint32_t>(push) - static_cast<std::uint32_t>(pop);
        const std::uint8_t back = static_cast<std::uint8_t>((push ? s : (pop ? below : top)) ^ 1U);
        int c2;
        if constexpr (Fixed) {
          c2 = c;
        } else {
          c2 = p_.sample(rng::offspring_draw(k));
          if ((visited_ += static_cast<std::size_t>(c2)) > cap_) {
            throw Error(Errc::resource_limit, "node cap reached in streaming generation");
          }
        }
        for (int i = 0; i < c2; ++i) {
          const std::uint8_t t = step_(rng::child_key(k, static_cast<std::uint64_t>(i)));
          const std::uint32_t m = t == kIdentityStep ? l : (t == back ? l - 1 : l + 1);
          ++counts_[m];
        }
      }
      return;
    }
    for (int j = 0; j < c; ++j) {
      const std::uint64_t k = rng::child_key(key, static_cast<std::uint64_t>(j));
      const std::uint8_t s = step_(k);
      const bool moved = s != kIdentityStep;
      const bool pop = moved & (top == (s ^ 1U));
      const bool push = moved & !pop;
      const std::uint8_t saved = letters_[len];
      letters_[len] = push ? s : saved;
      visit<Fixed>(k, depth + 1, len + static_cast<std::uint32_t>(push) - static_cast<std::uint32_t>(pop));
      letters_[len] = saved;
    }
  }

  StepSampler step_;
  const OffspringDistribution& p_;
  int n_;
  std::size_t cap_;
  std::size_t visited_ = 1;
  std::vector<std::uint8_t> letters_;
  std::vector<std::uint64_t> counts_;
};

/// Depth-first walk carrying trie nodes; collects the depth-n words.
class TrieDfs {
 public:
  TrieDfs(const StepDistribution& mu, const OffspringDistribution& p, int n, std::size_t cap)
      : step_(mu), p_(p), n_(n), cap_(cap), trie_(mu.rank()) {}

  void run(std::uint64_t root_key) {
    if (n_ == 0) {
      leaves_.push_back(WordTrie::root());
      return;
    }
    visit(root_key, 0, WordTrie::root());
  }
  std::vector<std::uint32_t>& leaves() { return leaves_; }
  const WordTrie& trie() const { return trie_; }

 private:
  void visit(std::uint64_t key, int depth, std::uint32_t node) {
    const int c = p_.sample(rng::offspring_draw(key));
    if ((visited_ += static_cast<std::size_t>(c)) > cap_) {
      throw Error(Errc::resource_limit, "node cap reached in streaming generation");
    }
    for (int j = 0; j < c; ++j) {
      const std::uint64_t k = rng::child_key(key, static_cast<std::uint64_t>(j));
      const std::uint32_t child = trie_.step(node, step_(k));
      if (depth + 1 == n_) {
        leaves_.push_back(child);
      } else {
        visit(k, depth + 1, child);
      }
    }
  }

  StepSampler step_;
  const OffspringDistribution& p_;
  int n_;
  std::size_t cap_;
  std::size_t visited_ = 1;
  WordTrie trie_;
  std::vector<std::uint32_t> leaves_;
};

}  // namespace detail

/// Depth-first generation of the same tree the arena builds, holding one
/// root-to-leaf path. With `distinct` a trie is kept for N^F and the maximal
/// multiplicity; without it only word lengths are tracked, which is several
/// times cheaper.
inline LevelSetStats stream_level_stats(const StepDistribution& mu, const OffspringDistribution& p, int n,
                                        std::uint64_t seed, std::uint64_t replicate = 0, bool distinct = true,
                                        std::size_t cap = node_cap()) {
  if (n < 0) throw Error(Errc::invalid_argument, "depth must be nonnegative");
  detail::check_population(p, n, cap);
  const std::uint64_t root = rng::replicate_key(seed, replicate);
  if (distinct) {
    detail::TrieDfs dfs(mu, p, n, cap);
    dfs.run(root);
    return detail::stats_from_words(n, replicate, std::move(dfs.leaves()), dfs.trie());
  }
  detail::LengthDfs dfs(mu, p, n, cap);
  dfs.run(root);
  LevelSetStats s;
  s.n = n;
  s.replicate = replicate;
  s.N = std::move(dfs.counts());
  s.population = std::accumulate(s.N.begin(), s.N.end(), std::uint64_t{0});
  return s;
}

// ---- replicates --------------------------------------------------------------

/// Level statistics for replicates 0..reps-1, merged in replicate order.
inline std::vector<LevelSetStats> replicate_level_stats(const StepDistribution& mu, const OffspringDistribution& p,
                                                        int n, std::uint64_t seed, std::size_t reps, int threads,
                                                        bool distinct = true, std::size_t cap = node_cap()) {
  std::vector<LevelSetStats> out(reps);
  parallel_for(reps, threads, [&](std::size_t i) {
    out[i] = stream_level_stats(mu, p, n, seed, static_cast<std::uint64_t>(i), distinct, cap);
  });
  return out;
}

// ---- rays --------------------------------------------------------------------

/// |V(t_n)| / n along `count` rays, each picking a uniform child at every level.
inline std::vector<double> ray_speeds(const BrwArena& a, std::size_t count, std::uint64_t seed) {
  if (a.depth < 1) throw Error(Errc::invalid_argument, "ray speeds need an arena of depth >= 1");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    rng::Stream stream(rng::replicate_key(seed ^ 0xA0761D6478BD642FULL, i));
    std::size_t v = 0;
    for (int k = 0; k < a.depth; ++k) {
      const std::uint32_t c = a.child_count[v];
      const auto pick = static_cast<std::uint32_t>(stream.uniform() * c);
      v = a.first_child[v] + std::min(pick, c - 1);
    }
    out[i] = static_cast<double>(a.word_length(v)) / a.depth;
  }
  return out;
}

struct Histogram {
  std::vector<double> edges;  // bins [edges[i], edges[i+1]), last bin closed
  std::vector<std::uint64_t> counts;
};

inline Histogram histogram(const std::vector<double>& x, int bins, double lo = 0.0, double hi = 1.0) {
  if (bins < 1 || !(hi > lo)) throw Error(Errc::invalid_argument, "histogram needs bins >= 1 and hi > lo");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * i / bins);
  for (double v : x) {
    if (v < lo || v > hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
    ++h.counts[b];
  }
  return h;
}

// ---- plain walk --------------------------------------------------------------

/// reps independent samples of |Z_n|; sample i uses its own counter stream.
inline std::vector<std::uint32_t> rw_sample_lengths(const StepDistribution& mu, int n, std::size_t reps,
                                                    std::uint64_t seed, int threads = 1) {
  if (n < 0) throw Error(Errc::invalid_argument, "step count must be nonnegative");
  const StepSampler sample_step(mu);
  std::vector<std::uint32_t> out(reps);
  const std::size_t chunk = 1024;
  const std::size_t chunks = (reps + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<std::uint8_t> word(static_cast<std::size_t>(n) + 1);
    for (std::size_t i = c * chunk; i < std::min(reps, (c + 1) * chunk); ++i) {
      const std::uint64_t key = rng::replicate_key(seed, i);
      std::uint32_t len = 0;
      for (int t = 0; t < n; ++t) {
        const std::uint8_t s = sample_step(rng::child_key(key, static_cast<std::uint64_t>(t)));
        if (s == kIdentityStep) continue;
        if (len > 0 && word[len - 1] == (s ^ 1U)) {
          --len;
        } else {
          word[len++] = s;
        }
      }
      out[i] = len;
    }
  });
  return out;
}

}  // namespace mfbrw
