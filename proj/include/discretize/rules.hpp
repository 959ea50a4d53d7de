#pragma once

#include "discretize/core.hpp"

namespace discretize {

/// Descending aggregate-posterior mass, ties by class index.
TieOrder default_tie_order(const ProbabilityMatrix& probs);

/// Highest-probability class per row; equal maxima go to the class that
/// comes first in `ties`.
LabelAssignment argmax_rule(const ProbabilityMatrix& probs, const TieOrder& ties);

/// Argmax where the maximum is at least t, Uncoded otherwise. t in (0, 1].
LabelAssignment threshold_rule(const ProbabilityMatrix& probs, double t, const TieOrder& ties);

/// Row i draws y with probability q(y, x_i) from the stream keyed (seed, i).
LabelAssignment thompson_rule(const ProbabilityMatrix& probs, Seed seed);

/// Thompson sampling restricted to the k most probable classes of each row,
/// renormalized. k = 1 reproduces argmax; k = K reproduces thompson_rule
/// label for label.
LabelAssignment topk_rule(const ProbabilityMatrix& probs, std::size_t k, Seed seed,
                          const TieOrder& ties);

/// Single-row kernels shared with the joint solver and the labeler.
ClassIndex argmax_row(std::span<const double> row, const TieOrder& ties);

/// Samples among classes whose bit is set in `mask`, using uniform u in [0, 1).
/// Cumulative mass is accumulated in class-index order.
ClassIndex sample_masked(std::span<const double> row, std::uint64_t mask, double u);

namespace serial {
LabelAssignment argmax_rule(const ProbabilityMatrix& probs, const TieOrder& ties);
LabelAssignment threshold_rule(const ProbabilityMatrix& probs, double t, const TieOrder& ties);
LabelAssignment thompson_rule(const ProbabilityMatrix& probs, Seed seed);
LabelAssignment topk_rule(const ProbabilityMatrix& probs, std::size_t k, Seed seed,
                          const TieOrder& ties);
}  // namespace serial

}  // namespace discretize
