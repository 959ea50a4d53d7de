#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "discretize/core.hpp"
#include "discretize/joint.hpp"

namespace discretize {

/// Linear scores s = W q + b over the K probabilities of a row; the label is
/// the score argmax.
struct LinearLabeler {
  std::size_t classes = 0;
  std::vector<double> weights;  // classes x classes, row c scores class c
  std::vector<double> biases;

  /// Text form: K on the first line, then K weight rows, then the biases.
  void save(std::ostream& os) const;
  static LinearLabeler load(std::istream& is);
  void save_file(const std::string& path) const;
  static LinearLabeler load_file(const std::string& path);
};

struct TrainConfig {
  std::size_t batch_size = 10000;
  std::size_t epochs = 500;
  double learning_rate = 1.0;
  Seed seed = 0;
};

struct FitResult {
  LinearLabeler model;
  /// Fraction of training rows where the model reproduces its target.
  double agreement = 0.0;
  /// Targets held a single class; the model is the constant labeler.
  bool degenerate = false;
};

/// Multinomial logistic regression by full-batch gradient descent on mean
/// cross-entropy, started from a small seeded perturbation of zero.
FitResult fit_labeler(const ProbabilityMatrix& probs, const LabelAssignment& targets,
                      const TrainConfig& cfg);

/// Score argmax per row, equal scores resolved by `ties`.
LabelAssignment apply_labeler(const LinearLabeler& model, const ProbabilityMatrix& probs,
                              const TieOrder& ties);

struct HeuristicResult {
  LabelAssignment labels;
  FitResult fit;
  std::size_t training_rows = 0;
};

/// Solves the first batch exactly (matching, or the gamma program when
/// `gamma` is set), fits a labeler to it, and labels the remaining rows with
/// the labeler. Training rows keep their exact labels.
HeuristicResult data_driven_rule(const ProbabilityMatrix& probs, const TrainConfig& cfg,
                                 const TieOrder& ties, std::optional<double> gamma = {},
                                 const std::optional<ReferenceDistribution>& reference = {});

namespace serial {
LabelAssignment apply_labeler(const LinearLabeler& model, const ProbabilityMatrix& probs,
                              const TieOrder& ties);
}  // namespace serial

}  // namespace discretize
