#include "discretize/rules.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "discretize/metrics.hpp"
#include "discretize/rng.hpp"

namespace discretize {
namespace {

std::string format_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_ties(const ProbabilityMatrix& probs, const TieOrder& ties) {
  if (ties.classes() != probs.classes())
    throw std::invalid_argument("tie order size does not match class count");
}

std::uint64_t top_k_mask(std::span<const double> row, std::size_t k, const TieOrder& ties) {
  // Walk classes in tie order and keep the k largest; a stable pick on
  // (probability desc, rank asc).
  std::uint64_t mask = 0;
  for (std::size_t picked = 0; picked < k; ++picked) {
    ClassIndex best = kUncoded;
    for (ClassIndex y : ties.order()) {
      if (mask & (std::uint64_t{1} << y)) continue;
      if (best == kUncoded || row[static_cast<std::size_t>(y)] > row[static_cast<std::size_t>(best)])
        best = y;
    }
    mask |= std::uint64_t{1} << best;
  }
  return mask;
}

std::uint64_t full_mask(std::size_t k) {
  return k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
}

// Every public rule is a per-row kernel; Parallel selects the OpenMP loop.
template <bool Parallel, class Kernel>
LabelAssignment label_rows(std::size_t n, const char* rule_id, Kernel kernel) {
  LabelAssignment out;
  out.rule_id = rule_id;
  out.labels.resize(n);
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
      out.labels[static_cast<std::size_t>(i)] = kernel(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) out.labels[i] = kernel(i);
  }
  return out;
}

template <bool Parallel>
LabelAssignment argmax_impl(const ProbabilityMatrix& probs, const TieOrder& ties) {
  check_ties(probs, ties);
  return label_rows<Parallel>(probs.rows(), "argmax",
                              [&](std::size_t i) { return argmax_row(probs.row(i), ties); });
}

template <bool Parallel>
LabelAssignment threshold_impl(const ProbabilityMatrix& probs, double t, const TieOrder& ties) {
  check_ties(probs, ties);
  if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("threshold must lie in (0, 1]");
  auto out = label_rows<Parallel>(probs.rows(), "threshold", [&](std::size_t i) {
    auto row = probs.row(i);
    const ClassIndex y = argmax_row(row, ties);
    return row[static_cast<std::size_t>(y)] >= t ? y : kUncoded;
  });
  out.rule_id = "threshold:" + format_param(t);
  return out;
}

template <bool Parallel>
LabelAssignment thompson_impl(const ProbabilityMatrix& probs, Seed seed) {
  const std::uint64_t all = full_mask(probs.classes());
  auto out = label_rows<Parallel>(probs.rows(), "thompson", [&](std::size_t i) {
    RowStream stream(seed, i, StreamTag::Thompson);
    return sample_masked(probs.row(i), all, stream.uniform());
  });
  out.seed = seed;
  return out;
}

template <bool Parallel>
LabelAssignment topk_impl(const ProbabilityMatrix& probs, std::size_t k, Seed seed,
                          const TieOrder& ties) {
  check_ties(probs, ties);
  if (k < 1 || k > probs.classes()) throw std::invalid_argument("top-k needs 1 <= k <= K");
  if (probs.classes() > 64) throw std::invalid_argument("top-k supports at most 64 classes");
  // Same stream as Thompson so that k = K is label-identical.
  auto out = label_rows<Parallel>(probs.rows(), "topk", [&](std::size_t i) {
    RowStream stream(seed, i, StreamTag::Thompson);
    auto row = probs.row(i);
    return sample_masked(row, top_k_mask(row, k, ties), stream.uniform());
  });
  out.rule_id = "topk:" + std::to_string(k);
  out.seed = seed;
  return out;
}

}  // namespace

TieOrder default_tie_order(const ProbabilityMatrix& probs) {
  const auto agg = aggregate_posterior(probs);
  std::vector<ClassIndex> order(probs.classes());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ClassIndex a, ClassIndex b) {
    return agg[static_cast<std::size_t>(a)] > agg[static_cast<std::size_t>(b)];
  });
  return TieOrder(std::move(order));
}

ClassIndex argmax_row(std::span<const double> row, const TieOrder& ties) {
  ClassIndex best = ties.order().front();
  for (ClassIndex y : ties.order()) {
    if (row[static_cast<std::size_t>(y)] > row[static_cast<std::size_t>(best)]) best = y;
  }
  return best;
}

ClassIndex sample_masked(std::span<const double> row, std::uint64_t mask, double u) {
  double mass = 0.0;
  ClassIndex last = kUncoded;
  for (std::size_t y = 0; y < row.size(); ++y) {
    if (mask & (std::uint64_t{1} << y)) {
      mass += row[y];
      if (row[y] > 0.0 || last == kUncoded) last = static_cast<ClassIndex>(y);
    }
  }
  if (!(mass > 0.0)) {
    // All selected classes carry zero mass; fall back to the first of them.
    for (std::size_t y = 0; y < row.size(); ++y)
      if (mask & (std::uint64_t{1} << y)) return static_cast<ClassIndex>(y);
  }
  const double target = u * mass;
  double cumulative = 0.0;
  for (std::size_t y = 0; y < row.size(); ++y) {
    if (!(mask & (std::uint64_t{1} << y)) || row[y] <= 0.0) continue;
    cumulative += row[y];
    if (target < cumulative) return static_cast<ClassIndex>(y);
  }
  return last;
}

LabelAssignment argmax_rule(const ProbabilityMatrix& probs, const TieOrder& ties) {
  return argmax_impl<true>(probs, ties);
}
LabelAssignment threshold_rule(const ProbabilityMatrix& probs, double t, const TieOrder& ties) {
  return threshold_impl<true>(probs, t, ties);
}
LabelAssignment thompson_rule(const ProbabilityMatrix& probs, Seed seed) {
  return thompson_impl<true>(probs, seed);
}
LabelAssignment topk_rule(const ProbabilityMatrix& probs, std::size_t k, Seed seed,
                          const TieOrder& ties) {
  return topk_impl<true>(probs, k, seed, ties);
}

namespace serial {
LabelAssignment argmax_rule(const ProbabilityMatrix& probs, const TieOrder& ties) {
  return argmax_impl<false>(probs, ties);
}
LabelAssignment threshold_rule(const ProbabilityMatrix& probs, double t, const TieOrder& ties) {
  return threshold_impl<false>(probs, t, ties);
}
LabelAssignment thompson_rule(const ProbabilityMatrix& probs, Seed seed) {
  return thompson_impl<false>(probs, seed);
}
LabelAssignment topk_rule(const ProbabilityMatrix& probs, std::size_t k, Seed seed,
                          const TieOrder& ties) {
  return topk_impl<false>(probs, k, seed, ties);
}
}  // namespace serial

}  // namespace discretize
