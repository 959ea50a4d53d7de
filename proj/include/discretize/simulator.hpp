#pragma once

#include <optional>
#include <vector>

#include "discretize/core.hpp"

namespace discretize {

/// 1/2, 1/4, ..., 1/2^(k-1), 1/2^(k-1).
std::vector<double> halving_prior(std::size_t k);

/// Class y_i ~ prior; features x_ik ~ Normal(1[k = y_i], sigma^2).
struct GaussianSimConfig {
  std::size_t k = 6;
  std::vector<double> prior = halving_prior(6);
  double sigma = 0.5;  // standard deviation of every feature
  std::size_t n = 5000;
  Seed seed = 0;
};

/// Mixture of perfectly confident rows (one-hot on class z = 0, truth z)
/// and uninformative rows (uniform posterior, truth uniform); the latter
/// appear with probability c.
struct WorstCaseConfig {
  std::size_t k = 2;
  double c = 0.5;
  std::size_t n = 10000;
  Seed seed = 0;
};

struct SyntheticDataset {
  ProbabilityMatrix probs;  // exact Bayes posterior
  GroundTruth truth;
  std::vector<double> features;  // n x k, Gaussian datasets only
  std::optional<GaussianSimConfig> gaussian;
  std::optional<WorstCaseConfig> worst_case;
};

/// Posterior prior(y) exp(x_y / sigma^2) / sum_z prior(z) exp(x_z / sigma^2),
/// evaluated with max subtraction. Writes into `out`.
void gaussian_posterior(std::span<const double> x, std::span<const double> prior, double sigma,
                        std::span<double> out);

SyntheticDataset simulate_gaussian(const GaussianSimConfig& cfg);
SyntheticDataset simulate_worst_case(const WorstCaseConfig& cfg);

/// The class the worst-case construction concentrates on.
inline constexpr ClassIndex kWorstCaseClass = 0;

namespace serial {
SyntheticDataset simulate_gaussian(const GaussianSimConfig& cfg);
SyntheticDataset simulate_worst_case(const WorstCaseConfig& cfg);
}  // namespace serial

}  // namespace discretize
