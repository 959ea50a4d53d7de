#include "discretize/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "discretize/rng.hpp"

namespace discretize {
namespace {

void check_prior(const std::vector<double>& prior, std::size_t k) {
  if (k < 2) throw std::invalid_argument("simulator needs k >= 2");
  if (prior.size() != k) throw std::invalid_argument("prior length must equal k");
  double s = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw std::invalid_argument("prior entries must be >= 0");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("prior must sum to 1");
}

ClassIndex draw_class(std::span<const double> prior, double u) {
  double cumulative = 0.0;
  ClassIndex last = 0;
  for (std::size_t y = 0; y < prior.size(); ++y) {
    if (prior[y] <= 0.0) continue;
    cumulative += prior[y];
    last = static_cast<ClassIndex>(y);
    if (u < cumulative) return last;
  }
  return last;
}

template <bool Parallel, class Body>
void for_rows(std::size_t n, Body body) {
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
      body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

template <bool Parallel>
SyntheticDataset gaussian_impl(const GaussianSimConfig& cfg) {
  check_prior(cfg.prior, cfg.k);
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma))
    throw std::invalid_argument("sigma must be positive");
  if (cfg.n < 1) throw std::invalid_argument("n must be >= 1");
  const std::size_t k = cfg.k;
  std::vector<double> features(cfg.n * k);
  std::vector<double> post(cfg.n * k);
  std::vector<ClassIndex> truth(cfg.n);
  for_rows<Parallel>(cfg.n, [&](std::size_t i) {
    RowStream truth_stream(cfg.seed, i, StreamTag::SimTruth);
    const ClassIndex y = draw_class(cfg.prior, truth_stream.uniform());
    truth[i] = y;
    RowStream noise(cfg.seed, i, StreamTag::SimFeatures);
    std::span<double> x(features.data() + i * k, k);
    for (std::size_t c = 0; c < k; ++c)
      x[c] = (static_cast<ClassIndex>(c) == y ? 1.0 : 0.0) + cfg.sigma * noise.normal();
    gaussian_posterior(x, cfg.prior, cfg.sigma, std::span<double>(post.data() + i * k, k));
  });
  SyntheticDataset out;
  out.probs = ProbabilityMatrix(cfg.n, k, std::move(post));
  out.truth = GroundTruth(std::move(truth));
  out.features = std::move(features);
  out.gaussian = cfg;
  return out;
}

template <bool Parallel>
SyntheticDataset worst_case_impl(const WorstCaseConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("simulator needs k >= 2");
  if (!(cfg.c >= 0.0 && cfg.c <= 1.0)) throw std::invalid_argument("c must lie in [0, 1]");
  if (cfg.n < 1) throw std::invalid_argument("n must be >= 1");
  const std::size_t k = cfg.k;
  std::vector<double> post(cfg.n * k, 0.0);
  std::vector<ClassIndex> truth(cfg.n);
  const double uniform_mass = 1.0 / static_cast<double>(k);
  for_rows<Parallel>(cfg.n, [&](std::size_t i) {
    RowStream stream(cfg.seed, i, StreamTag::WorstCase);
    double* row = post.data() + i * k;
    if (stream.uniform() < cfg.c) {
      std::fill(row, row + k, uniform_mass);
      const auto y = static_cast<std::size_t>(stream.uniform() * static_cast<double>(k));
      truth[i] = static_cast<ClassIndex>(std::min(y, k - 1));
    } else {
      row[kWorstCaseClass] = 1.0;
      truth[i] = kWorstCaseClass;
    }
  });
  SyntheticDataset out;
  out.probs = ProbabilityMatrix(cfg.n, k, std::move(post));
  out.truth = GroundTruth(std::move(truth));
  out.worst_case = cfg;
  return out;
}

}  // namespace

std::vector<double> halving_prior(std::size_t k) {
  if (k < 2) throw std::invalid_argument("halving_prior needs k >= 2");
  std::vector<double> p(k);
  double mass = 1.0;
  for (std::size_t y = 0; y + 1 < k; ++y) p[y] = (mass /= 2.0);
  p[k - 1] = p[k - 2];
  return p;
}

void gaussian_posterior(std::span<const double> x, std::span<const double> prior, double sigma,
                        std::span<double> out) {
  const double inv_var = 1.0 / (sigma * sigma);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < x.size(); ++y) {
    out[y] = prior[y] > 0.0 ? std::log(prior[y]) + x[y] * inv_var
                            : -std::numeric_limits<double>::infinity();
    top = std::max(top, out[y]);
  }
  double total = 0.0;
  for (auto& v : out) total += (v = std::exp(v - top));
  for (auto& v : out) v /= total;
}

SyntheticDataset simulate_gaussian(const GaussianSimConfig& cfg) { return gaussian_impl<true>(cfg); }
SyntheticDataset simulate_worst_case(const WorstCaseConfig& cfg) {
  return worst_case_impl<true>(cfg);
}

namespace serial {
SyntheticDataset simulate_gaussian(const GaussianSimConfig& cfg) {
  return gaussian_impl<false>(cfg);
}
SyntheticDataset simulate_worst_case(const WorstCaseConfig& cfg) {
  return worst_case_impl<false>(cfg);
}
}  // namespace serial

}  // namespace discretize
