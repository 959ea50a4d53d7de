#include "discretize/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace discretize {

ProbabilityMatrix::ProbabilityMatrix(std::size_t n_rows, std::size_t n_classes,
                                     std::vector<double> values,
                                     std::vector<std::string> class_names)
    : n_rows_(n_rows),
      n_classes_(n_classes),
      values_(std::move(values)),
      class_names_(std::move(class_names)) {
  if (n_classes_ < 2) throw SchemaError("probability matrix needs at least 2 classes");
  if (n_rows_ < 1) throw SchemaError("probability matrix needs at least 1 row");
  if (values_.size() != n_rows_ * n_classes_)
    throw SchemaError("probability matrix has " + std::to_string(values_.size()) +
                      " values, expected " + std::to_string(n_rows_ * n_classes_));
  if (class_names_.empty()) {
    for (std::size_t y = 0; y < n_classes_; ++y) class_names_.push_back("c" + std::to_string(y));
  } else if (class_names_.size() != n_classes_) {
    throw SchemaError("class name count does not match class count");
  }
  for (const auto& name : class_names_) {
    if (name == kUncodedLiteral) throw SchemaError("UNCODED is reserved and cannot name a class");
  }

  for (std::size_t i = 0; i < n_rows_; ++i) {
    double* row = values_.data() + i * n_classes_;
    double sum = 0.0;
    for (std::size_t y = 0; y < n_classes_; ++y) {
      if (!std::isfinite(row[y]) || row[y] < 0.0 || row[y] > 1.0 + kIngestTolerance) {
        std::ostringstream msg;
        msg << "row " << i << ": probability " << row[y] << " outside [0,1]";
        throw SchemaError(msg.str());
      }
      sum += row[y];
    }
    if (std::abs(sum - 1.0) > kIngestTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "row " << i << ": probabilities sum to " << sum;
      throw SchemaError(msg.str());
    }
    if (std::abs(sum - 1.0) > kSumTolerance) ++renormalized_rows_;
    if (sum != 1.0) {
      for (std::size_t y = 0; y < n_classes_; ++y) row[y] = std::min(row[y] / sum, 1.0);
    }
  }
}

ProbabilityMatrix ProbabilityMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                               std::vector<std::string> class_names) {
  if (rows.empty()) throw SchemaError("probability matrix needs at least 1 row");
  const std::size_t k = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != k) throw SchemaError("row " + std::to_string(i) + ": ragged row");
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return ProbabilityMatrix(rows.size(), k, std::move(flat), std::move(class_names));
}

ProbabilityMatrix ProbabilityMatrix::slice(std::size_t begin, std::size_t end) const {
  std::vector<double> part(values_.begin() + static_cast<std::ptrdiff_t>(begin * n_classes_),
                           values_.begin() + static_cast<std::ptrdiff_t>(end * n_classes_));
  return ProbabilityMatrix(end - begin, n_classes_, std::move(part), class_names_);
}

ProbabilityMatrix ProbabilityMatrix::select(std::span<const std::size_t> row_ids) const {
  std::vector<double> part;
  part.reserve(row_ids.size() * n_classes_);
  for (std::size_t i : row_ids) {
    auto r = row(i);
    part.insert(part.end(), r.begin(), r.end());
  }
  return ProbabilityMatrix(row_ids.size(), n_classes_, std::move(part), class_names_);
}

bool LabelAssignment::has_uncoded() const {
  return std::find(labels.begin(), labels.end(), kUncoded) != labels.end();
}

std::size_t LabelAssignment::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](ClassIndex y) { return y != kUncoded; }));
}

LabelAssignment LabelAssignment::labeled_subset() const {
  LabelAssignment out{{}, rule_id, seed};
  out.labels.reserve(labels.size());
  for (ClassIndex y : labels)
    if (y != kUncoded) out.labels.push_back(y);
  return out;
}

const char* to_string(ReferenceSource source) {
  switch (source) {
    case ReferenceSource::AggregatePosterior: return "aggregate_posterior";
    case ReferenceSource::GroundTruthMarginal: return "ground_truth_marginal";
    case ReferenceSource::Uniform: return "uniform";
    case ReferenceSource::Custom: return "custom";
  }
  return "unknown";
}

ReferenceDistribution::ReferenceDistribution(std::vector<double> weights, ReferenceSource source)
    : weights_(std::move(weights)), source_(source) {
  if (weights_.size() < 2) throw InfeasibleReference("reference needs at least 2 classes");
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw InfeasibleReference("reference weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > ProbabilityMatrix::kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "reference weights sum to " << sum << ", expected 1";
    throw InfeasibleReference(msg.str());
  }
}

ReferenceDistribution ReferenceDistribution::uniform(std::size_t k) {
  return ReferenceDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)),
                               ReferenceSource::Uniform);
}

void GroundTruth::validate(std::size_t k) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw SchemaError("row " + std::to_string(i) + ": true label out of range");
  }
}

TieOrder::TieOrder(std::vector<ClassIndex> order) : order_(std::move(order)) {
  rank_.assign(order_.size(), order_.size());
  for (std::size_t pos = 0; pos < order_.size(); ++pos) {
    const ClassIndex y = order_[pos];
    if (y < 0 || static_cast<std::size_t>(y) >= order_.size() ||
        rank_[static_cast<std::size_t>(y)] != order_.size())
      throw std::invalid_argument("tie order must be a permutation of 0..K-1");
    rank_[static_cast<std::size_t>(y)] = pos;
  }
}

TieOrder TieOrder::identity(std::size_t k) {
  std::vector<ClassIndex> order(k);
  std::iota(order.begin(), order.end(), 0);
  return TieOrder(std::move(order));
}

}  // namespace discretize
