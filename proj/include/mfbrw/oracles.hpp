#pragma once

// Exact desk-scale computations used to validate the analytic layer:
// forward recursion of the walk on a ball of the tree, the law of |Z_n|,
// bridge profiles of |Z_k| given |Z_n|, transfer-matrix partition
// functions over spheres, and counts of reduced words by letter content.
//
// For isotropic mu, |Z_n| is itself a birth-death chain and everything runs
// on that chain in log space. For general mu the pair (length, last letter)
// is not Markov once backtracking is allowed, so those paths fall back to
// the full ball recursion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mfbrw/error.hpp"
#include "mfbrw/group.hpp"

namespace mfbrw {

inline constexpr std::size_t kDefaultBallCap = 10'000'000;  // d = 2, L = 14 fits
inline constexpr std::size_t kWordCountStateCap = 50'000'000;

/// Ball node cap; MFBRW_BALL_CAP overrides the default.
inline std::size_t ball_cap() {
  if (const char* env = std::getenv("MFBRW_BALL_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw Error(Errc::config, std::string("MFBRW_BALL_CAP must be a positive integer, got '") + env + "'");
  }
  return kDefaultBallCap;
}

namespace detail {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

/// Implicit trie over the reduced words of length <= L. Words of length m
/// occupy [offset(m), offset(m+1)); a child's local index is
/// parent_local * (2d-1) + choice, where choice enumerates the letters that
/// do not cancel the parent's last letter.
class BallIndex {
 public:
  BallIndex(int rank, int radius, std::size_t cap) : rank_(rank), radius_(radius) {
    if (radius < 0) throw Error(Errc::invalid_argument, "ball radius must be nonnegative");
    const int k = 2 * rank;
    offset_.assign(static_cast<std::size_t>(radius) + 2, 0);
    double total = 1.0;
    std::size_t sz = 1;
    for (int m = 0; m <= radius; ++m) {
      if (m > 0) {
        total += sphere_size(rank, m);
        sz = m == 1 ? static_cast<std::size_t>(k) : sz * static_cast<std::size_t>(k - 1);
      }
      if (total > static_cast<double>(cap)) {
        std::ostringstream msg;
        msg << "ball of radius " << radius << " at rank " << rank << " has more than " << cap
            << " words (raise MFBRW_BALL_CAP)";
        throw Error(Errc::resource_limit, msg.str());
      }
      offset_[m + 1] = offset_[m] + sz;
    }
    last_.assign(size(), 0);
    parent_.assign(size(), 0);
    length_.assign(size(), 0);
    for (int m = 1; m <= radius; ++m) {
      for (std::size_t i = offset_[m]; i < offset_[m + 1]; ++i) {
        const std::size_t local = i - offset_[m];
        length_[i] = static_cast<std::uint8_t>(m);
        if (m == 1) {
          last_[i] = static_cast<Letter>(local);
          parent_[i] = 0;
        } else {
          const std::size_t p = offset_[m - 1] + local / (k - 1);
          const int choice = static_cast<int>(local % (k - 1));
          const int forbidden = inverse(last_[p]);
          last_[i] = static_cast<Letter>(choice < forbidden ? choice : choice + 1);
          parent_[i] = static_cast<std::uint32_t>(p);
        }
      }
    }
  }

  int rank() const noexcept { return rank_; }
  int radius() const noexcept { return radius_; }
  std::size_t size() const noexcept { return offset_.back(); }
  std::size_t offset(int m) const { return offset_.at(m); }
  int length(std::size_t i) const { return length_[i]; }
  Letter last(std::size_t i) const { return last_[i]; }
  std::size_t parent(std::size_t i) const { return parent_[i]; }

  /// Neighbor reached by letter b, or npos when it leaves the ball.
  std::size_t step(std::size_t i, Letter b) const {
    const int m = length_[i];
    if (m == 0) return radius_ == 0 ? npos : offset_[1] + b;
    const Letter a = last_[i];
    if (b == inverse(a)) return parent_[i];
    if (m == radius_) return npos;
    const int inv = inverse(a);
    const std::size_t choice = static_cast<std::size_t>(b < inv ? b : b - 1);
    return offset_[m + 1] + (i - offset_[m]) * static_cast<std::size_t>(2 * rank_ - 1) + choice;
  }

  std::size_t index_of(const ReducedWord& x) const {
    if (x.rank() != rank_) throw Error(Errc::rank_mismatch, "word rank differs from ball rank");
    if (static_cast<int>(x.length()) > radius_) throw Error(Errc::invalid_argument, "word lies outside the ball");
    std::size_t i = 0;
    for (Letter a : x.letters()) i = step(i, a);
    return i;
  }

  ReducedWord word_at(std::size_t i) const {
    std::vector<Letter> rev;
    while (length_[i] > 0) {
      rev.push_back(last_[i]);
      i = parent_[i];
    }
    return ReducedWord::from_letters(rank_, std::vector<Letter>(rev.rbegin(), rev.rend()));
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  int rank_;
  int radius_;
  std::vector<std::size_t> offset_;
  std::vector<Letter> last_;
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> length_;
};

/// One step of the walk on the ball: out = in * P, escaping mass added to
/// `escaped`. Only nodes up to `reach` can carry mass.
inline void ball_step(const BallIndex& ball, const StepDistribution& mu, const std::vector<double>& in,
                      std::vector<double>& out, double& escaped, int reach) {
  std::fill(out.begin(), out.end(), 0.0);
  const double stay = mu.identity_weight();
  const auto& w = mu.weights();
  const std::size_t end = ball.offset(std::min(reach, ball.radius()) + 1);
  for (std::size_t i = 0; i < end; ++i) {
    const double p = in[i];
    if (p == 0.0) continue;
    out[i] += p * stay;
    for (int b = 0; b < static_cast<int>(w.size()); ++b) {
      const std::size_t j = ball.step(i, static_cast<Letter>(b));
      if (j == BallIndex::npos) {
        escaped += p * w[b];
      } else {
        out[j] += p * w[b];
      }
    }
  }
}

/// |Z_n| for isotropic mu as a birth-death chain, in log space.
class RadialChain {
 public:
  explicit RadialChain(const StepDistribution& mu) {
    if (!mu.is_isotropic()) throw Error(Errc::invalid_argument, "the radial chain needs an isotropic step law");
    const double k = mu.alphabet_size();
    const double move = 1.0 - mu.identity_weight();
    hold_ = std::log(mu.identity_weight());
    up0_ = std::log(move);
    up_ = std::log(move * (k - 1.0) / k);
    down_ = std::log(move / k);
  }

  /// log P(next = j) given log masses at the current step (size n+1).
  void forward(const std::vector<double>& in, std::vector<double>& out, int reach) const {
    const int top = static_cast<int>(in.size()) - 1;
    for (int j = 0; j <= std::min(reach + 1, top); ++j) {
      double v = in[j] + hold_;
      if (j >= 1) v = log_add(v, in[j - 1] + (j - 1 == 0 ? up0_ : up_));
      if (j + 1 <= top && j + 1 <= reach) v = log_add(v, in[j + 1] + down_);
      out[j] = v;
    }
    for (int j = std::min(reach + 1, top) + 1; j <= top; ++j) out[j] = kLogZero;
  }

  /// h(j) = log E[g(next) | now = j].
  void backward(const std::vector<double>& in, std::vector<double>& out) const {
    const int top = static_cast<int>(in.size()) - 1;
    for (int j = 0; j <= top; ++j) {
      double v = in[j] + hold_;
      if (j + 1 <= top) v = log_add(v, in[j + 1] + (j == 0 ? up0_ : up_));
      if (j >= 1) v = log_add(v, in[j - 1] + down_);
      out[j] = v;
    }
  }

 private:
  double hold_;
  double up0_;
  double up_;
  double down_;
};

}  // namespace detail

// ---- ball recursion ---------------------------------------------------------

struct BallTable {
  int rank = 2;
  int radius = 0;
  int steps = 0;
  int exact_radius = 0;    // p_n(e, x) is exact for |x| <= exact_radius
  std::vector<double> prob;  // p_n(e, x) indexed by the ball trie
  double overflow = 0.0;     // mass that has left the ball

  std::shared_ptr<const detail::BallIndex> trie;

  std::size_t index_of(const ReducedWord& x) const { return trie->index_of(x); }
  ReducedWord word_at(std::size_t i) const { return trie->word_at(i); }
  double at(const ReducedWord& x) const { return prob[index_of(x)]; }

  /// P(|Z_n| = m) for m <= radius.
  std::vector<double> sphere_mass() const {
    std::vector<double> out(static_cast<std::size_t>(radius) + 1, 0.0);
    std::size_t i = 0;
    for (int m = 0; m <= radius; ++m) {
      const std::size_t end = i + static_cast<std::size_t>(sphere_size(rank, m));
      for (; i < end; ++i) out[m] += prob[i];
    }
    return out;
  }
};

/// Exact p_n(e, x) for |x| <= L by forward recursion, L <= n.
inline BallTable ball_dp(const StepDistribution& mu, int n, int L, std::size_t cap = ball_cap()) {
  if (n < 0) throw Error(Errc::invalid_argument, "step count must be nonnegative");
  if (L < 0 || L > n) throw Error(Errc::invalid_argument, "ball radius must satisfy 0 <= L <= n");
  auto index = std::make_shared<detail::BallIndex>(mu.rank(), L, cap);
  BallTable t;
  t.rank = mu.rank();
  t.radius = L;
  t.steps = n;
  t.exact_radius = std::min(L, 2 * L + 1 - n);
  std::vector<double> cur(index->size(), 0.0);
  std::vector<double> next(index->size(), 0.0);
  cur[0] = 1.0;
  for (int k = 0; k < n; ++k) {
    detail::ball_step(*index, mu, cur, next, t.overflow, k);
    cur.swap(next);
  }
  t.prob = std::move(cur);
  t.trie = std::move(index);
  return t;
}

// ---- length law -------------------------------------------------------------

struct LengthDistribution {
  int n = 0;
  std::vector<double> log_p;  // log P(|Z_n| = m), m = 0..n
  std::vector<double> p;

  double at(int m) const { return m < 0 || m > n ? 0.0 : p[m]; }
  double log_at(int m) const { return m < 0 || m > n ? detail::kLogZero : log_p[m]; }
};

namespace detail {

inline LengthDistribution finish_length(int n, std::vector<double> log_p) {
  LengthDistribution d;
  d.n = n;
  d.p.resize(log_p.size());
  for (std::size_t m = 0; m < log_p.size(); ++m) d.p[m] = std::exp(log_p[m]);
  d.log_p = std::move(log_p);
  return d;
}

inline void check_steps(int n) {
  if (n < 0) throw Error(Errc::invalid_argument, "step count must be nonnegative");
  if (n > 100000) throw Error(Errc::resource_limit, "length law limited to n <= 100000, got " + std::to_string(n));
}

}  // namespace detail

/// Exact law of |Z_n|. Isotropic mu uses the radial chain (O(n^2)); other
/// mu run the ball recursion with L = n.
inline LengthDistribution length_distribution(const StepDistribution& mu, int n) {
  detail::check_steps(n);
  if (mu.is_isotropic()) {
    const detail::RadialChain chain(mu);
    std::vector<double> cur(static_cast<std::size_t>(n) + 1, detail::kLogZero);
    std::vector<double> next(cur.size());
    cur[0] = 0.0;
    for (int k = 0; k < n; ++k) {
      chain.forward(cur, next, k);
      cur.swap(next);
    }
    return detail::finish_length(n, std::move(cur));
  }
  const auto ball = ball_dp(mu, n, n);
  const auto mass = ball.sphere_mass();
  std::vector<double> lp(mass.size());
  for (std::size_t m = 0; m < mass.size(); ++m) lp[m] = std::log(mass[m]);
  return detail::finish_length(n, std::move(lp));
}

// ---- bridge profile ---------------------------------------------------------

struct ConditionalProfile {
  int n = 0;
  int l = 0;
  double log_endpoint = 0.0;     // log P(|Z_n| = l)
  std::vector<double> prob;      // P(|Z_k| = j | |Z_n| = l), row k, column j
  std::vector<double> deltas;
  std::vector<double> exceedance;  // P(exists k: ||Z_k| - k l / n| > delta n | |Z_n| = l)

  double at(int k, int j) const { return prob[static_cast<std::size_t>(k) * (n + 1) + j]; }
  std::vector<double> mean_length() const {
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 0; k <= n; ++k) {
      for (int j = 0; j <= n; ++j) out[k] += j * at(k, j);
    }
    return out;
  }
};

namespace detail {

inline bool in_tube(int k, int j, int n, int l, double delta) {
  return std::abs(j - static_cast<double>(k) * l / n) <= delta * n;
}

inline void check_bridge(int n, int l) {
  check_steps(n);
  if (n < 1 || l < 0 || l > n) throw Error(Errc::invalid_argument, "bridge needs n >= 1 and 0 <= l <= n");
}

inline Error zero_endpoint(int n, int l) {
  return Error(Errc::infeasible, "cannot condition on |Z_" + std::to_string(n) + "| = " + std::to_string(l) +
                                     ", which has probability zero");
}

/// log of (P(exit and |Z_n| = l), P(|Z_n| = l)) on the radial chain.
inline std::pair<double, double> radial_exceedance(const RadialChain& chain, int n, int l, double delta) {
  std::vector<double> inside(static_cast<std::size_t>(n) + 1, kLogZero);
  std::vector<double> out(inside.size(), kLogZero);
  std::vector<double> a(inside.size());
  std::vector<double> b(inside.size());
  inside[0] = 0.0;
  for (int k = 0; k < n; ++k) {
    chain.forward(inside, a, k);
    chain.forward(out, b, k);
    for (int j = 0; j <= n; ++j) {
      if (!in_tube(k + 1, j, n, l, delta)) {
        b[j] = log_add(b[j], a[j]);
        a[j] = kLogZero;
      }
    }
    inside.swap(a);
    out.swap(b);
  }
  return {out[l], log_add(out[l], inside[l])};
}

inline std::pair<double, double> ball_exceedance(const BallIndex& ball, const StepDistribution& mu, int n, int l,
                                                 double delta) {
  std::vector<double> inside(ball.size(), 0.0);
  std::vector<double> out(ball.size(), 0.0);
  std::vector<double> a(ball.size());
  std::vector<double> b(ball.size());
  inside[0] = 1.0;
  double lost = 0.0;
  for (int k = 0; k < n; ++k) {
    ball_step(ball, mu, inside, a, lost, k);
    ball_step(ball, mu, out, b, lost, k);
    for (std::size_t i = 0; i < ball.size(); ++i) {
      if (a[i] != 0.0 && !in_tube(k + 1, ball.length(i), n, l, delta)) {
        b[i] += a[i];
        a[i] = 0.0;
      }
    }
    inside.swap(a);
    out.swap(b);
  }
  double e = 0.0;
  double t = 0.0;
  for (std::size_t i = ball.offset(l); i < ball.offset(l + 1); ++i) {
    e += out[i];
    t += out[i] + inside[i];
  }
  return {std::log(e), std::log(t)};
}

}  // namespace detail

/// Exact P(exists k <= n: ||Z_k| - k l / n| > delta n | |Z_n| = l).
inline double exceedance_probability(const StepDistribution& mu, int n, int l, double delta) {
  detail::check_bridge(n, l);
  std::pair<double, double> r;
  if (mu.is_isotropic()) {
    r = detail::radial_exceedance(detail::RadialChain(mu), n, l, delta);
  } else {
    const detail::BallIndex ball(mu.rank(), n, ball_cap());
    r = detail::ball_exceedance(ball, mu, n, l, delta);
  }
  if (r.second == detail::kLogZero) throw detail::zero_endpoint(n, l);
  return r.first == detail::kLogZero ? 0.0 : std::exp(r.first - r.second);
}

/// Forward-backward marginals of |Z_k| along the bridge |Z_0| = 0, |Z_n| = l.
inline ConditionalProfile conditional_profile(const StepDistribution& mu, int n, int l,
                                              const std::vector<double>& deltas = {0.1, 0.2, 0.3}) {
  detail::check_bridge(n, l);
  ConditionalProfile c;
  c.n = n;
  c.l = l;
  c.deltas = deltas;
  const std::size_t w = static_cast<std::size_t>(n) + 1;
  c.prob.assign(w * w, 0.0);
  if (mu.is_isotropic()) {
    const detail::RadialChain chain(mu);
    std::vector<std::vector<double>> fwd(w, std::vector<double>(w, detail::kLogZero));
    fwd[0][0] = 0.0;
    for (int k = 0; k < n; ++k) chain.forward(fwd[k], fwd[k + 1], k);
    c.log_endpoint = fwd[n][l];
    if (c.log_endpoint == detail::kLogZero) throw detail::zero_endpoint(n, l);
    std::vector<double> back(w, detail::kLogZero);
    std::vector<double> tmp(w);
    back[l] = 0.0;
    for (int k = n; k >= 0; --k) {
      for (int j = 0; j <= n; ++j) c.prob[k * w + j] = std::exp(fwd[k][j] + back[j] - c.log_endpoint);
      if (k > 0) {
        chain.backward(back, tmp);
        back.swap(tmp);
      }
    }
    for (double d : deltas) c.exceedance.push_back(exceedance_probability(mu, n, l, d));
    return c;
  }
  // General mu: the walk is symmetric, so the backward kernel equals the forward one.
  const detail::BallIndex ball(mu.rank(), n, ball_cap());
  std::vector<std::vector<double>> fwd(w, std::vector<double>(ball.size(), 0.0));
  double lost = 0.0;
  fwd[0][0] = 1.0;
  for (int k = 0; k < n; ++k) detail::ball_step(ball, mu, fwd[k], fwd[k + 1], lost, k);
  double end = 0.0;
  for (std::size_t i = ball.offset(l); i < ball.offset(l + 1); ++i) end += fwd[n][i];
  if (end == 0.0) throw detail::zero_endpoint(n, l);
  c.log_endpoint = std::log(end);
  std::vector<double> back(ball.size(), 0.0);
  std::vector<double> tmp(ball.size());
  for (std::size_t i = ball.offset(l); i < ball.offset(l + 1); ++i) back[i] = 1.0;
  for (int k = n; k >= 0; --k) {
    for (std::size_t i = 0; i < ball.size(); ++i) c.prob[k * w + ball.length(i)] += fwd[k][i] * back[i] / end;
    if (k > 0) {
      detail::ball_step(ball, mu, back, tmp, lost, n);
      back.swap(tmp);
    }
  }
  for (double d : deltas) c.exceedance.push_back(exceedance_probability(mu, n, l, d));
  return c;
}

// ---- partition function -----------------------------------------------------

/// ln sum over reduced words x of length n of exp(beta sum_a lambda_a Xi_a(x)),
/// by propagating the last-letter vector through the non-backtracking
/// transfer matrix with per-step renormalization.
inline double log_partition_function(const std::vector<double>& lambda, double beta, int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "partition function needs n >= 1");
  if (lambda.size() < 4 || lambda.size() % 2 != 0) {
    throw Error(Errc::invalid_argument, "weight vector must have 2d >= 4 entries");
  }
  const std::size_t k = lambda.size();
  std::vector<double> weight(k);
  double shift = detail::kLogZero;
  for (std::size_t a = 0; a < k; ++a) shift = std::max(shift, beta * lambda[a]);
  for (std::size_t a = 0; a < k; ++a) weight[a] = std::exp(beta * lambda[a] - shift);
  std::vector<double> v = weight;
  std::vector<double> next(k);
  double log_scale = shift;
  for (int step = 1; step < n; ++step) {
    double total = 0.0;
    for (double x : v) total += x;
    for (std::size_t b = 0; b < k; ++b) next[b] = weight[b] * (total - v[b ^ 1U]);
    double norm = 0.0;
    for (double x : next) norm = std::max(norm, x);
    for (std::size_t b = 0; b < k; ++b) v[b] = next[b] / norm;
    log_scale += shift + std::log(norm);
  }
  double total = 0.0;
  for (double x : v) total += x;
  return log_scale + std::log(total);
}

// ---- word counts ------------------------------------------------------------

struct WordCount {
  std::uint64_t exact = 0;  // valid when !overflow
  bool overflow = false;
  long double value = 0.0L;
  double log_value = detail::kLogZero;
};

/// Number of reduced words whose letter-count vector is `counts`.
inline WordCount count_words_by_counts(int rank, const std::vector<unsigned>& counts) {
  const std::size_t k = static_cast<std::size_t>(2 * rank);
  if (rank < 2 || counts.size() != k) {
    throw Error(Errc::invalid_argument, "letter-count vector must have 2d entries with d >= 2");
  }
  double states = static_cast<double>(k);
  for (unsigned c : counts) states *= c + 1.0;
  if (states > static_cast<double>(kWordCountStateCap)) {
    throw Error(Errc::resource_limit, "word-count state space exceeds " + std::to_string(kWordCountStateCap));
  }
  // Mixed-radix index of the remaining counts; memo[state * k + last].
  std::vector<std::size_t> radix(k, 1);
  for (std::size_t a = 1; a < k; ++a) radix[a] = radix[a - 1] * (counts[a - 1] + 1);
  const std::size_t n_states = radix[k - 1] * (counts[k - 1] + 1);
  struct Cell {
    std::uint64_t exact = 0;
    long double value = 0.0L;
    bool overflow = false;
    bool done = false;
  };
  std::vector<Cell> memo(n_states * k);
  std::vector<unsigned> rem = counts;
  // Words built from `rem` whose first letter is not the inverse of `last`.
  std::function<Cell(std::size_t, std::size_t)> count = [&](std::size_t state, std::size_t last) -> Cell {
    if (state == 0) return Cell{1, 1.0L, false, true};
    Cell& m = memo[state * k + last];
    if (m.done) return m;
    Cell acc;
    for (std::size_t b = 0; b < k; ++b) {
      if (rem[b] == 0 || b == (last ^ 1U)) continue;
      --rem[b];
      const Cell sub = count(state - radix[b], b);
      ++rem[b];
      acc.value += sub.value;
      acc.overflow = acc.overflow || sub.overflow || __builtin_add_overflow(acc.exact, sub.exact, &acc.exact);
    }
    acc.done = true;
    memo[state * k + last] = acc;
    return acc;
  };
  std::size_t start = 0;
  for (std::size_t a = 0; a < k; ++a) start += radix[a] * counts[a];
  Cell total;
  if (start == 0) {
    total = Cell{1, 1.0L, false, true};
  } else {
    for (std::size_t b = 0; b < k; ++b) {
      if (counts[b] == 0) continue;
      --rem[b];
      const Cell sub = count(start - radix[b], b);
      ++rem[b];
      total.value += sub.value;
      total.overflow = total.overflow || sub.overflow || __builtin_add_overflow(total.exact, sub.exact, &total.exact);
    }
  }
  WordCount out;
  out.exact = total.overflow ? 0 : total.exact;
  out.overflow = total.overflow;
  out.value = total.value;
  out.log_value = total.value > 0.0L ? static_cast<double>(std::log(total.value)) : detail::kLogZero;
  return out;
}

// ---- many-to-one ------------------------------------------------------------

struct LevelExpectation {
  double value = 0.0;      // r^n P(|Z_n| = m)
  double log_value = 0.0;
};

/// E N_{n,m} = r^n P(|Z_n| = m).
inline LevelExpectation expected_level_count(const StepDistribution& mu, double r, int n, int m) {
  if (!(r > 0.0)) throw Error(Errc::invalid_argument, "mean offspring must be positive");
  const auto law = length_distribution(mu, n);
  LevelExpectation e;
  e.log_value = n * std::log(r) + law.log_at(m);
  e.value = std::exp(e.log_value);
  return e;
}

inline std::vector<double> expected_level_counts(const StepDistribution& mu, double r, int n) {
  const auto law = length_distribution(mu, n);
  std::vector<double> out(law.p.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = std::exp(n * std::log(r) + law.log_p[m]);
  return out;
}

}  // namespace mfbrw
