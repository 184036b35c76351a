#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mfbrw/group.hpp"

namespace testing_support {

/// Random symmetric step law with generator weights drawn from [0.2, 1].
inline mfbrw::StepDistribution random_symmetric(int rank, unsigned seed, double mu_e = 0.0) {
  std::mt19937_64 rng(seed * 7919ULL + 17);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> g(rank);
  double total = 0.0;
  for (auto& x : g) total += (x = u(rng));
  for (auto& x : g) x *= (1.0 - mu_e) / (2.0 * total);
  return mfbrw::StepDistribution::from_generators(rank, mu_e, g);
}

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Monte Carlo probability that the walk ever visits `target`; paths are
/// abandoned once they are `horizon` letters away from the identity.
inline Estimate hit_probability(const mfbrw::StepDistribution& mu, const mfbrw::ReducedWord& target, long walks,
                                std::size_t horizon, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> cdf;
  double acc = mu.identity_weight();
  cdf.push_back(acc);
  for (double w : mu.weights()) cdf.push_back(acc += w);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long hits = 0;
  std::vector<mfbrw::Letter> word;
  for (long i = 0; i < walks; ++i) {
    word.clear();
    while (word.size() < horizon) {
      const double x = u(rng) * acc;
      std::size_t k = 0;
      while (k + 1 < cdf.size() && x >= cdf[k]) ++k;
      if (k > 0) {
        const auto a = static_cast<mfbrw::Letter>(k - 1);
        if (!word.empty() && word.back() == mfbrw::inverse(a)) {
          word.pop_back();
        } else {
          word.push_back(a);
        }
      }
      if (word == target.letters()) {
        ++hits;
        break;
      }
    }
  }
  const double p = static_cast<double>(hits) / walks;
  return {p, std::sqrt(p * (1 - p) / walks)};
}

}  // namespace testing_support
