#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discretize/core.hpp"

namespace discretize {

/// Exact integer arithmetic for objective values; products of two 1e9-scaled
/// quantities summed over many rows overflow 64 bits.
using WideInt = __int128;

/// Fixed-point scale applied to probabilities, gamma, and N * p_ref.
inline constexpr std::int64_t kCostScale = 1'000'000'000;

/// Integer label counts per class, summing to N.
struct TargetCounts {
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
};

/// Largest-remainder apportionment of n * ref. Equal remainders are resolved
/// in `ties` order.
TargetCounts target_counts(const ReferenceDistribution& ref, std::size_t n, const TieOrder& ties);
TargetCounts target_counts(const ReferenceDistribution& ref, std::size_t n);

/// One class's fidelity penalty F(n) = weight * |n * unit - target|, convex
/// in the class count n.
struct ConvexTerm {
  WideInt weight = 0;
  WideInt unit = 1;
  WideInt target = 0;

  WideInt value(std::int64_t n) const;
  /// F(n) - F(n - 1): cost of the n-th unit on the source -> class arcs.
  WideInt marginal(std::int64_t n) const;
};

/// Min-cost flow instance: source -> class (N unit arcs per class carrying the
/// convex marginals) -> row (cost -score) -> sink (capacity 1). Stored in
/// compact form; arcs are implicit in `score` and `fidelity`.
struct FlowNetwork {
  std::size_t rows = 0;
  std::size_t classes = 0;
  std::vector<WideInt> score;  // rows x classes, higher is better
  std::vector<ConvexTerm> fidelity;

  WideInt score_at(std::size_t i, std::size_t y) const { return score[i * classes + y]; }
  /// sum_i score(i, labels_i) - sum_y F_y(n_y).
  WideInt objective(std::span<const ClassIndex> labels) const;
};

/// The gamma-weighted program with every real quantity rounded onto the
/// 1e9 grid. Its integer objective, scaled by N * 1e18, is
///   score_weight * sum_i score(i, label_i) - fidelity_weight * sum_y |n_y * 1e9 - target_y|.
struct ScaledProblem {
  std::size_t rows = 0;
  std::size_t classes = 0;
  std::vector<std::int64_t> score;  // round(q * 1e9)
  std::int64_t score_weight = 0;    // round(gamma * 1e9)
  std::int64_t fidelity_weight = 0; // 1e9 - score_weight
  std::vector<std::int64_t> target; // round(N * ref_y * 1e9)

  FlowNetwork network() const;
};

ScaledProblem quantize(const ProbabilityMatrix& probs, const ReferenceDistribution& ref,
                       double gamma);

/// Exact minimizer of the network's cost (maximizer of its objective). Among
/// optimal assignments returns the lexicographically smallest label sequence,
/// comparing labels by their rank in `ties`.
std::vector<ClassIndex> solve_flow(const FlowNetwork& net, const TieOrder& ties);

/// Maximizes sum_i q(label_i) subject to exactly counts[y] rows per class.
/// Throws InfeasibleReference if the counts do not sum to N.
LabelAssignment match_to_reference(const ProbabilityMatrix& probs, const TargetCounts& counts,
                                   const TieOrder& ties);
LabelAssignment match_to_reference(const ProbabilityMatrix& probs, const TargetCounts& counts);

/// Exact maximizer of gamma * mean score + (1 - gamma) * fidelity(ref).
LabelAssignment solve_gamma_program(const ProbabilityMatrix& probs,
                                    const ReferenceDistribution& ref, double gamma,
                                    const TieOrder& ties);
LabelAssignment solve_gamma_program(const ProbabilityMatrix& probs,
                                    const ReferenceDistribution& ref, double gamma);

/// Matching within each group. Groups absent from `refs` use their own
/// aggregate posterior when `default_to_group_aggregate`, otherwise throw
/// InfeasibleReference.
LabelAssignment conditional_match(const ProbabilityMatrix& probs, const GroupKeys& groups,
                                  const std::map<std::string, ReferenceDistribution>& refs,
                                  bool default_to_group_aggregate, const TieOrder& ties);

/// Where the reference of a batch comes from.
struct ReferencePlan {
  /// Explicit reference for every batch; absent means aggregate posterior.
  std::optional<ReferenceDistribution> fixed;
  /// Aggregate posterior of each batch (true) or of the whole input/group.
  bool per_batch = true;
  /// Per-group explicit references, consulted before `fixed`.
  std::map<std::string, ReferenceDistribution> per_group;
};

struct JointConfig {
  std::optional<double> gamma;  // absent selects matching
  std::size_t batch_size = 10000;
  ReferencePlan reference;
};

/// Splits rows into near-equal contiguous batches (within groups when given),
/// solves each batch exactly, and stitches the labels back in row order.
/// Batches are solved concurrently.
LabelAssignment solve_joint(const ProbabilityMatrix& probs, const JointConfig& config,
                            const TieOrder& ties, const GroupKeys* groups = nullptr);

namespace serial {
LabelAssignment solve_joint(const ProbabilityMatrix& probs, const JointConfig& config,
                            const TieOrder& ties, const GroupKeys* groups = nullptr);
}  // namespace serial

/// Row ranges [begin, end) of near-equal batches covering n rows.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size);

}  // namespace discretize
