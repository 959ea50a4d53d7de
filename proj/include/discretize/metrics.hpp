#pragma once

#include <optional>
#include <vector>

#include "discretize/core.hpp"

namespace discretize {

/// Column means of the probability matrix: the label distribution a
/// continuous decision would produce.
ReferenceDistribution aggregate_posterior(const ProbabilityMatrix& probs);

/// Empirical class distribution of true labels.
ReferenceDistribution truth_marginal(const GroundTruth& truth, std::size_t k);

/// Fraction of rows carrying each label. Throws std::invalid_argument if the
/// assignment contains Uncoded rows; filter with labeled_subset() first.
std::vector<double> marginal_distribution(const LabelAssignment& assign, std::size_t k);

/// marginal(y) - ref(y). Same Uncoded contract as marginal_distribution.
double bias(const LabelAssignment& assign, const ReferenceDistribution& ref, ClassIndex y);
std::vector<double> bias_vector(const LabelAssignment& assign, const ReferenceDistribution& ref);

/// -sum_y |bias(y)|, in [-2, 0].
double fidelity(const LabelAssignment& assign, const ReferenceDistribution& ref);

struct AccuracyResult {
  std::optional<double> accuracy;  // absent when no row is labeled
  double coverage = 0.0;
};

/// Accuracy over labeled rows and the labeled fraction.
AccuracyResult accuracy(const LabelAssignment& assign, const GroundTruth& truth);

/// Sample mean of 1 - q(true class).
double mae(const ProbabilityMatrix& probs, const GroundTruth& truth);

/// Mean of q(label_i, x_i): the score term of the joint objective.
double mean_assigned_score(const ProbabilityMatrix& probs, const LabelAssignment& assign);

struct CalibrationBin {
  double bin_center = 0.0;
  double mean_predicted = 0.0;                // 0 for empty bins
  std::optional<double> empirical_frequency;  // absent for empty bins
  std::size_t count = 0;
};

/// Reliability curve for class y over n_bins equal-width bins of [0, 1];
/// q = 1 falls in the last bin.
std::vector<CalibrationBin> calibration_curve(const ProbabilityMatrix& probs,
                                              const GroundTruth& truth, ClassIndex y,
                                              std::size_t n_bins);

/// Full report: bias and fidelity use the labeled rows only, accuracy is
/// computed iff truth is given, MAE iff both truth and probs are given.
MetricsReport evaluate(const LabelAssignment& assign, const ReferenceDistribution& ref,
                       const GroundTruth* truth = nullptr,
                       const ProbabilityMatrix* probs = nullptr);

namespace serial {
// Straight-loop references for the chunked parallel kernels.
ReferenceDistribution aggregate_posterior(const ProbabilityMatrix& probs);
double mae(const ProbabilityMatrix& probs, const GroundTruth& truth);
}  // namespace serial

}  // namespace discretize
