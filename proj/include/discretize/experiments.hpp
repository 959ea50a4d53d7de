#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "discretize/core.hpp"
#include "discretize/csv_io.hpp"
#include "discretize/rule_spec.hpp"
#include "discretize/simulator.hpp"

namespace discretize {

/// Metrics of one rule on one dataset.
struct RuleOutcome {
  std::string rule_id;
  std::optional<double> gamma;  // set for points of the gamma grid
  std::size_t replicate = 0;
  double mean_score = 0.0;      // mean q(label) over labeled rows
  MetricsReport vs_aggregate;   // accuracy/coverage/MAE filled when truth is known
  std::optional<MetricsReport> vs_truth;
};

/// Applies every rule to one dataset. Reference for the joint rules is the
/// context's plan (aggregate posterior unless overridden).
std::vector<RuleOutcome> run_rule_comparison(const ProbabilityMatrix& probs,
                                             const GroundTruth* truth,
                                             const std::vector<RuleSpec>& rules,
                                             const RuleContext& ctx, std::size_t replicate = 0);

/// 0.80, 0.81, ..., 0.99.
std::vector<double> default_gamma_grid();

struct SweepConfig {
  std::vector<double> gammas = default_gamma_grid();
  std::size_t replicates = 100;
  GaussianSimConfig sim;  // sim.seed is ignored; replicate r uses mix_seed(seed, r)
  std::vector<RuleSpec> rules;
  Seed seed = 0;
  std::size_t batch_size = 10000;
};

/// Mean and standard error over replicates of one (rule, gamma) point.
struct SummaryPoint {
  std::string rule_id;
  std::optional<double> gamma;
  std::size_t count = 0;
  double accuracy = 0.0, accuracy_se = 0.0;
  double coverage = 0.0;
  double mean_score = 0.0;
  double fidelity_aggregate = 0.0, fidelity_aggregate_se = 0.0;
  double fidelity_truth = 0.0, fidelity_truth_se = 0.0;
};

struct SweepResult {
  std::vector<RuleOutcome> outcomes;  // replicate-major, rules then gammas
  std::vector<SummaryPoint> rules;    // independent and matching rules
  std::vector<SummaryPoint> frontier; // one per gamma, ascending
  double mean_mae = 0.0;
  /// Sorted by gamma, accuracy never drops and fidelity never rises by more
  /// than one standard error.
  bool frontier_monotone = true;
};

/// Replicates run concurrently; the result depends only on the config.
SweepResult pareto_sweep(const SweepConfig& cfg);

struct InformationPoint {
  double sigma = 0.0;
  std::size_t replicates = 0;
  double mae = 0.0, mae_se = 0.0;
  std::vector<double> bias, bias_se;  // argmax bias against the truth marginal
  std::vector<double> bias_aggregate; // argmax bias against the aggregate posterior
  /// Per replicate: MAE and per-class argmax bias against the truth marginal.
  std::vector<double> replicate_mae;
  std::vector<std::vector<double>> replicate_bias;
};

/// Argmax bias and MAE of the Gaussian simulator across noise levels.
std::vector<InformationPoint> bias_vs_information(const std::vector<double>& sigmas,
                                                  const GaussianSimConfig& base,
                                                  std::size_t replicates, Seed seed);

/// Long format, one line per outcome.
CsvTable outcomes_table(const std::vector<RuleOutcome>& outcomes,
                        const std::vector<std::string>& class_names);
nlohmann::ordered_json sweep_summary_json(const SweepConfig& cfg, const SweepResult& result);
CsvTable information_table(const std::vector<InformationPoint>& points);

/// Sample mean and standard error (n - 1 denominator; 0 for one value).
std::pair<double, double> mean_and_se(const std::vector<double>& values);

}  // namespace discretize
