#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace discretize {

/// Dense class index in [0, K).
using ClassIndex = std::int32_t;

/// Reserved label value for rows a rule declined to label.
inline constexpr ClassIndex kUncoded = -1;

/// Literal used for abstentions in CSV files; never a valid class name.
inline constexpr const char* kUncodedLiteral = "UNCODED";

using Seed = std::uint64_t;

// Error hierarchy. The CLI maps each kind onto its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class InfeasibleReference : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// N x K row-major matrix of class probabilities; every row is a point on
/// the simplex (sums to 1 within 1e-9).
class ProbabilityMatrix {
 public:
  /// Row sums inside [1 - kIngestTolerance, 1 + kIngestTolerance] are
  /// renormalized; anything further off is rejected.
  static constexpr double kIngestTolerance = 1e-6;
  static constexpr double kSumTolerance = 1e-9;

  ProbabilityMatrix() = default;

  /// Validates and renormalizes. Throws SchemaError naming the offending row.
  ProbabilityMatrix(std::size_t n_rows, std::size_t n_classes, std::vector<double> values,
                    std::vector<std::string> class_names = {});

  static ProbabilityMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                     std::vector<std::string> class_names = {});

  std::size_t rows() const { return n_rows_; }
  std::size_t classes() const { return n_classes_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_classes_, n_classes_};
  }
  double operator()(std::size_t i, std::size_t y) const { return values_[i * n_classes_ + y]; }

  std::span<const double> values() const { return values_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Number of rows whose sum differed from 1 by more than kSumTolerance
  /// before renormalization.
  std::size_t renormalized_rows() const { return renormalized_rows_; }

  /// Rows [begin, end) as a new matrix (class names preserved).
  ProbabilityMatrix slice(std::size_t begin, std::size_t end) const;
  ProbabilityMatrix select(std::span<const std::size_t> row_ids) const;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<double> values_;
  std::vector<std::string> class_names_;
  std::size_t renormalized_rows_ = 0;
};

/// Discrete decisions for every row of a matrix, plus provenance.
struct LabelAssignment {
  std::vector<ClassIndex> labels;
  std::string rule_id;
  std::optional<Seed> seed;

  std::size_t size() const { return labels.size(); }
  bool has_uncoded() const;
  std::size_t labeled_count() const;

  /// The labeled rows only, in original order.
  LabelAssignment labeled_subset() const;
};

enum class ReferenceSource { AggregatePosterior, GroundTruthMarginal, Uniform, Custom };

const char* to_string(ReferenceSource source);

/// Target marginal over classes.
class ReferenceDistribution {
 public:
  ReferenceDistribution() = default;
  /// Throws InfeasibleReference unless weights are >= 0 and sum to 1 within 1e-9.
  ReferenceDistribution(std::vector<double> weights, ReferenceSource source);

  static ReferenceDistribution uniform(std::size_t k);

  std::size_t classes() const { return weights_.size(); }
  double operator[](std::size_t y) const { return weights_[y]; }
  const std::vector<double>& weights() const { return weights_; }
  ReferenceSource source() const { return source_; }

 private:
  std::vector<double> weights_;
  ReferenceSource source_ = ReferenceSource::Custom;
};

/// True labels; never Uncoded.
struct GroundTruth {
  std::vector<ClassIndex> labels;

  GroundTruth() = default;
  explicit GroundTruth(std::vector<ClassIndex> values) : labels(std::move(values)) {}

  std::size_t size() const { return labels.size(); }
  /// Throws SchemaError if any label falls outside [0, k).
  void validate(std::size_t k) const;
};

/// Priority among classes for breaking exact ties; earlier wins.
class TieOrder {
 public:
  TieOrder() = default;
  /// Throws std::invalid_argument unless `order` is a permutation of 0..K-1.
  explicit TieOrder(std::vector<ClassIndex> order);

  static TieOrder identity(std::size_t k);

  std::size_t classes() const { return order_.size(); }
  const std::vector<ClassIndex>& order() const { return order_; }
  /// Position of class y in the order (0 = highest priority).
  std::size_t rank(ClassIndex y) const { return rank_[static_cast<std::size_t>(y)]; }
  bool prefers(ClassIndex a, ClassIndex b) const { return rank(a) < rank(b); }

 private:
  std::vector<ClassIndex> order_;
  std::vector<std::size_t> rank_;
};

/// Row-to-group mapping for conditional references. Empty means "no groups".
struct GroupKeys {
  std::vector<std::string> groups;

  bool empty() const { return groups.empty(); }
  std::size_t size() const { return groups.size(); }
};

/// Accuracy/distributional summary of one assignment.
struct MetricsReport {
  std::optional<double> accuracy;  // over labeled rows only
  double coverage = 1.0;
  std::vector<double> per_class_bias;
  double fidelity = 0.0;
  std::optional<double> mae;
};

}  // namespace discretize
