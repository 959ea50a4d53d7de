#include "discretize/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "discretize/parallel.hpp"

namespace discretize {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

// Guards against drift in the last ulp so the weights pass the reference check.
std::vector<double> normalized(std::vector<double> w) {
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
  return w;
}

}  // namespace

ReferenceDistribution aggregate_posterior(const ProbabilityMatrix& probs) {
  const std::size_t k = probs.classes();
  auto sums = parallel::chunked_sum(probs.rows(), k, [&](std::size_t i, double* acc) {
    auto r = probs.row(i);
    for (std::size_t y = 0; y < k; ++y) acc[y] += r[y];
  });
  for (double& s : sums) s /= static_cast<double>(probs.rows());
  return ReferenceDistribution(normalized(std::move(sums)), ReferenceSource::AggregatePosterior);
}

ReferenceDistribution truth_marginal(const GroundTruth& truth, std::size_t k) {
  if (truth.size() == 0) throw std::invalid_argument("truth_marginal: empty ground truth");
  truth.validate(k);
  std::vector<double> w(k, 0.0);
  for (ClassIndex y : truth.labels) w[static_cast<std::size_t>(y)] += 1.0;
  for (double& v : w) v /= static_cast<double>(truth.size());
  return ReferenceDistribution(normalized(std::move(w)), ReferenceSource::GroundTruthMarginal);
}

std::vector<double> marginal_distribution(const LabelAssignment& assign, std::size_t k) {
  if (assign.size() == 0) throw std::invalid_argument("marginal_distribution: empty assignment");
  std::vector<std::size_t> counts(k, 0);
  for (ClassIndex y : assign.labels) {
    if (y == kUncoded)
      throw std::invalid_argument("marginal_distribution: assignment contains Uncoded rows");
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw std::invalid_argument("marginal_distribution: label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  std::vector<double> out(k);
  for (std::size_t y = 0; y < k; ++y)
    out[y] = static_cast<double>(counts[y]) / static_cast<double>(assign.size());
  return out;
}

std::vector<double> bias_vector(const LabelAssignment& assign, const ReferenceDistribution& ref) {
  auto marg = marginal_distribution(assign, ref.classes());
  for (std::size_t y = 0; y < marg.size(); ++y) marg[y] -= ref[y];
  return marg;
}

double bias(const LabelAssignment& assign, const ReferenceDistribution& ref, ClassIndex y) {
  return bias_vector(assign, ref).at(static_cast<std::size_t>(y));
}

double fidelity(const LabelAssignment& assign, const ReferenceDistribution& ref) {
  double f = 0.0;
  for (double b : bias_vector(assign, ref)) f -= std::abs(b);
  return f;
}

AccuracyResult accuracy(const LabelAssignment& assign, const GroundTruth& truth) {
  require_same_length(assign.size(), truth.size(), "accuracy");
  std::size_t labeled = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign.labels[i] == kUncoded) continue;
    ++labeled;
    if (assign.labels[i] == truth.labels[i]) ++correct;
  }
  AccuracyResult out;
  if (assign.size() > 0) out.coverage = static_cast<double>(labeled) / static_cast<double>(assign.size());
  if (labeled > 0) out.accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
  return out;
}

double mae(const ProbabilityMatrix& probs, const GroundTruth& truth) {
  require_same_length(probs.rows(), truth.size(), "mae");
  truth.validate(probs.classes());
  auto total = parallel::chunked_sum(probs.rows(), 1, [&](std::size_t i, double* acc) {
    acc[0] += 1.0 - probs(i, static_cast<std::size_t>(truth.labels[i]));
  });
  return total[0] / static_cast<double>(probs.rows());
}

double mean_assigned_score(const ProbabilityMatrix& probs, const LabelAssignment& assign) {
  require_same_length(probs.rows(), assign.size(), "mean_assigned_score");
  double s = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign.labels[i] == kUncoded)
      throw std::invalid_argument("mean_assigned_score: assignment contains Uncoded rows");
    s += probs(i, static_cast<std::size_t>(assign.labels[i]));
  }
  return s / static_cast<double>(assign.size());
}

std::vector<CalibrationBin> calibration_curve(const ProbabilityMatrix& probs,
                                              const GroundTruth& truth, ClassIndex y,
                                              std::size_t n_bins) {
  if (n_bins < 1) throw std::invalid_argument("calibration_curve: n_bins must be >= 1");
  require_same_length(probs.rows(), truth.size(), "calibration_curve");
  const auto cls = static_cast<std::size_t>(y);
  if (y < 0 || cls >= probs.classes()) throw std::invalid_argument("calibration_curve: bad class");

  std::vector<double> pred_sum(n_bins, 0.0);
  std::vector<std::size_t> hits(n_bins, 0);
  std::vector<CalibrationBin> bins(n_bins);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const double q = probs(i, cls);
    auto b = static_cast<std::size_t>(q * static_cast<double>(n_bins));
    b = std::min(b, n_bins - 1);
    pred_sum[b] += q;
    ++bins[b].count;
    if (truth.labels[i] == y) ++hits[b];
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].bin_center = (static_cast<double>(b) + 0.5) / static_cast<double>(n_bins);
    if (bins[b].count > 0) {
      const auto c = static_cast<double>(bins[b].count);
      bins[b].mean_predicted = pred_sum[b] / c;
      bins[b].empirical_frequency = static_cast<double>(hits[b]) / c;
    }
  }
  return bins;
}

MetricsReport evaluate(const LabelAssignment& assign, const ReferenceDistribution& ref,
                       const GroundTruth* truth, const ProbabilityMatrix* probs) {
  MetricsReport report;
  const auto labeled = assign.labeled_subset();
  report.coverage = assign.size() == 0
                        ? 0.0
                        : static_cast<double>(labeled.size()) / static_cast<double>(assign.size());
  if (labeled.size() > 0) {
    report.per_class_bias = bias_vector(labeled, ref);
    for (double b : report.per_class_bias) report.fidelity -= std::abs(b);
  } else {
    report.per_class_bias.assign(ref.classes(), 0.0);
    for (std::size_t y = 0; y < ref.classes(); ++y) report.per_class_bias[y] = -ref[y];
    report.fidelity = -1.0;
  }
  if (truth != nullptr) {
    auto acc = accuracy(assign, *truth);
    report.accuracy = acc.accuracy;
    if (probs != nullptr) report.mae = mae(*probs, *truth);
  }
  return report;
}

namespace serial {

ReferenceDistribution aggregate_posterior(const ProbabilityMatrix& probs) {
  std::vector<double> sums(probs.classes(), 0.0);
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (std::size_t y = 0; y < probs.classes(); ++y) sums[y] += probs(i, y);
  for (double& s : sums) s /= static_cast<double>(probs.rows());
  return ReferenceDistribution(normalized(std::move(sums)), ReferenceSource::AggregatePosterior);
}

double mae(const ProbabilityMatrix& probs, const GroundTruth& truth) {
  require_same_length(probs.rows(), truth.size(), "mae");
  truth.validate(probs.classes());
  double s = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i)
    s += 1.0 - probs(i, static_cast<std::size_t>(truth.labels[i]));
  return s / static_cast<double>(probs.rows());
}

}  // namespace serial
}  // namespace discretize
