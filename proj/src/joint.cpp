#include "discretize/joint.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include "discretize/metrics.hpp"

namespace discretize {
namespace {

std::int64_t scale(double v) { return std::llround(v * static_cast<double>(kCostScale)); }

std::string gamma_rule_id(double gamma) {
  std::ostringstream os;
  os << "gamma:" << gamma;
  return os.str();
}

void check_ties(std::size_t k, const TieOrder& ties) {
  if (ties.classes() != k) throw std::invalid_argument("tie order size does not match class count");
}

LabelAssignment solve_batch(const ProbabilityMatrix& sub, const ReferenceDistribution& ref,
                            const std::optional<double>& gamma, const TieOrder& ties) {
  if (gamma) return solve_gamma_program(sub, ref, *gamma, ties);
  return match_to_reference(sub, target_counts(ref, sub.rows(), ties), ties);
}

struct Partition {
  std::string group;
  std::vector<std::size_t> rows;
};

std::vector<Partition> partition_rows(std::size_t n, const GroupKeys* groups) {
  std::vector<Partition> parts;
  if (groups == nullptr || groups->empty()) {
    Partition all;
    all.rows.resize(n);
    std::iota(all.rows.begin(), all.rows.end(), std::size_t{0});
    parts.push_back(std::move(all));
    return parts;
  }
  if (groups->size() != n) throw SchemaError("group column length does not match row count");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.try_emplace(groups->groups[i], parts.size());
    if (inserted) parts.push_back({groups->groups[i], {}});
    parts[it->second].rows.push_back(i);
  }
  return parts;
}

template <bool Parallel>
LabelAssignment solve_joint_impl(const ProbabilityMatrix& probs, const JointConfig& config,
                                 const TieOrder& ties, const GroupKeys* groups) {
  check_ties(probs.classes(), ties);
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.gamma && !(*config.gamma >= 0.0 && *config.gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1]");

  const auto parts = partition_rows(probs.rows(), groups);

  struct Task {
    std::size_t part;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Task> tasks;
  std::vector<std::optional<ReferenceDistribution>> part_ref(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    if (auto it = config.reference.per_group.find(part.group); it != config.reference.per_group.end())
      part_ref[p] = it->second;
    else if (config.reference.fixed)
      part_ref[p] = config.reference.fixed;
    else if (!config.reference.per_batch)
      part_ref[p] = aggregate_posterior(probs.select(part.rows));
    if (part_ref[p] && part_ref[p]->classes() != probs.classes())
      throw InfeasibleReference("reference has " + std::to_string(part_ref[p]->classes()) +
                                " classes, data has " + std::to_string(probs.classes()));
    for (auto [b, e] : batch_ranges(part.rows.size(), config.batch_size)) tasks.push_back({p, b, e});
  }

  LabelAssignment out;
  out.labels.assign(probs.rows(), kUncoded);
  out.rule_id = config.gamma ? gamma_rule_id(*config.gamma) : "match";
  std::vector<std::exception_ptr> errors(tasks.size());

  auto run_task = [&](std::size_t t) {
    try {
      const Task& task = tasks[t];
      const auto& part = parts[task.part];
      std::span<const std::size_t> ids(part.rows.data() + task.begin, task.end - task.begin);
      const auto sub = probs.select(ids);
      const auto ref = part_ref[task.part] ? *part_ref[task.part] : aggregate_posterior(sub);
      const auto labels = solve_batch(sub, ref, config.gamma, ties);
      for (std::size_t j = 0; j < ids.size(); ++j) out.labels[ids[j]] = labels.labels[j];
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.size()); ++t)
      run_task(static_cast<std::size_t>(t));
  } else {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

std::int64_t TargetCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

TargetCounts target_counts(const ReferenceDistribution& ref, std::size_t n, const TieOrder& ties) {
  if (n < 1) throw std::invalid_argument("target_counts: n must be >= 1");
  check_ties(ref.classes(), ties);
  const std::size_t k = ref.classes();
  // Quotas on the same 1e9 grid as the solver, so remainders compare exactly.
  TargetCounts out;
  out.counts.resize(k);
  std::vector<std::int64_t> remainder(k);
  std::int64_t assigned = 0;
  for (std::size_t y = 0; y < k; ++y) {
    const auto quota = static_cast<std::int64_t>(
        std::llround(static_cast<long double>(n) * ref[y] * static_cast<long double>(kCostScale)));
    out.counts[y] = quota / kCostScale;
    remainder[y] = quota % kCostScale;
    assigned += out.counts[y];
  }
  std::vector<ClassIndex> order = ties.order();
  std::stable_sort(order.begin(), order.end(), [&](ClassIndex a, ClassIndex b) {
    return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
  });
  auto left = static_cast<std::int64_t>(n) - assigned;
  for (std::size_t j = 0; left > 0; j = (j + 1) % k, --left) ++out.counts[static_cast<std::size_t>(order[j])];
  // Rounding can overshoot by a unit when quotas round up; take it back from
  // the smallest remainders.
  for (std::size_t j = k; left < 0; ++left) {
    j = (j == 0 ? k : j) - 1;
    auto& c = out.counts[static_cast<std::size_t>(order[j])];
    if (c > 0) --c;
    else ++left;
  }
  return out;
}

TargetCounts target_counts(const ReferenceDistribution& ref, std::size_t n) {
  return target_counts(ref, n, TieOrder::identity(ref.classes()));
}

ScaledProblem quantize(const ProbabilityMatrix& probs, const ReferenceDistribution& ref,
                       double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (ref.classes() != probs.classes())
    throw InfeasibleReference("reference has " + std::to_string(ref.classes()) +
                              " classes, data has " + std::to_string(probs.classes()));
  ScaledProblem p;
  p.rows = probs.rows();
  p.classes = probs.classes();
  p.score.resize(p.rows * p.classes);
  for (std::size_t j = 0; j < p.score.size(); ++j) p.score[j] = scale(probs.values()[j]);
  p.score_weight = scale(gamma);
  p.fidelity_weight = kCostScale - p.score_weight;
  p.target.resize(p.classes);
  for (std::size_t y = 0; y < p.classes; ++y)
    p.target[y] = static_cast<std::int64_t>(std::llround(
        static_cast<long double>(p.rows) * ref[y] * static_cast<long double>(kCostScale)));
  return p;
}

FlowNetwork ScaledProblem::network() const {
  FlowNetwork net;
  net.rows = rows;
  net.classes = classes;
  net.score.resize(score.size());
  for (std::size_t j = 0; j < score.size(); ++j)
    net.score[j] = static_cast<WideInt>(score_weight) * score[j];
  net.fidelity.resize(classes);
  for (std::size_t y = 0; y < classes; ++y)
    net.fidelity[y] = {static_cast<WideInt>(fidelity_weight), static_cast<WideInt>(kCostScale),
                       static_cast<WideInt>(target[y])};
  return net;
}

LabelAssignment match_to_reference(const ProbabilityMatrix& probs, const TargetCounts& counts,
                                   const TieOrder& ties) {
  check_ties(probs.classes(), ties);
  if (counts.counts.size() != probs.classes())
    throw InfeasibleReference("target counts have the wrong number of classes");
  if (counts.total() != static_cast<std::int64_t>(probs.rows()) ||
      std::any_of(counts.counts.begin(), counts.counts.end(), [](std::int64_t c) { return c < 0; }))
    throw InfeasibleReference("target counts must be nonnegative and sum to " +
                              std::to_string(probs.rows()));

  FlowNetwork net;
  net.rows = probs.rows();
  net.classes = probs.classes();
  net.score.resize(net.rows * net.classes);
  for (std::size_t j = 0; j < net.score.size(); ++j) net.score[j] = scale(probs.values()[j]);
  // Any count violation costs at least 2 * penalty, more than the whole
  // score range, so the optimum meets the counts exactly.
  const WideInt penalty = static_cast<WideInt>(net.rows) * kCostScale + 1;
  net.fidelity.resize(net.classes);
  for (std::size_t y = 0; y < net.classes; ++y) net.fidelity[y] = {penalty, 1, counts.counts[y]};

  LabelAssignment out;
  out.labels = solve_flow(net, ties);
  out.rule_id = "match";
  return out;
}

LabelAssignment match_to_reference(const ProbabilityMatrix& probs, const TargetCounts& counts) {
  return match_to_reference(probs, counts, TieOrder::identity(probs.classes()));
}

LabelAssignment solve_gamma_program(const ProbabilityMatrix& probs,
                                    const ReferenceDistribution& ref, double gamma,
                                    const TieOrder& ties) {
  check_ties(probs.classes(), ties);
  const auto scaled = quantize(probs, ref, gamma);
  LabelAssignment out;
  out.labels = solve_flow(scaled.network(), ties);
  out.rule_id = gamma_rule_id(gamma);
  return out;
}

LabelAssignment solve_gamma_program(const ProbabilityMatrix& probs,
                                    const ReferenceDistribution& ref, double gamma) {
  return solve_gamma_program(probs, ref, gamma, TieOrder::identity(probs.classes()));
}

LabelAssignment conditional_match(const ProbabilityMatrix& probs, const GroupKeys& groups,
                                  const std::map<std::string, ReferenceDistribution>& refs,
                                  bool default_to_group_aggregate, const TieOrder& ties) {
  if (groups.size() != probs.rows()) throw SchemaError("every row needs a group");
  if (!default_to_group_aggregate) {
    for (const auto& g : groups.groups)
      if (!refs.contains(g)) throw InfeasibleReference("no reference for group '" + g + "'");
  }
  JointConfig config;
  config.batch_size = probs.rows();
  config.reference.per_batch = true;
  config.reference.per_group = refs;
  auto out = solve_joint(probs, config, ties, &groups);
  out.rule_id = "match:group";
  return out;
}

LabelAssignment solve_joint(const ProbabilityMatrix& probs, const JointConfig& config,
                            const TieOrder& ties, const GroupKeys* groups) {
  return solve_joint_impl<true>(probs, config, ties, groups);
}

namespace serial {
LabelAssignment solve_joint(const ProbabilityMatrix& probs, const JointConfig& config,
                            const TieOrder& ties, const GroupKeys* groups) {
  return solve_joint_impl<false>(probs, config, ties, groups);
}
}  // namespace serial

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 0) return out;
  const std::size_t batches = (n + batch_size - 1) / batch_size;
  const std::size_t base = n / batches;
  const std::size_t extra = n % batches;
  std::size_t begin = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    out.emplace_back(begin, begin + len);
    begin += len;
  }
  return out;
}

}  // namespace discretize
