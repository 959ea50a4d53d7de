#include "discretize/experiments.hpp"

#include <cmath>
#include <exception>
#include <map>

#include "discretize/metrics.hpp"
#include "discretize/rng.hpp"
#include "discretize/rules.hpp"

namespace discretize {
namespace {

double labeled_mean_score(const ProbabilityMatrix& probs, const LabelAssignment& a) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.labels[i] == kUncoded) continue;
    s += probs(i, static_cast<std::size_t>(a.labels[i]));
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

RuleOutcome measure(const ProbabilityMatrix& probs, const GroundTruth* truth,
                    const ReferenceDistribution& agg, const std::optional<ReferenceDistribution>& tm,
                    const LabelAssignment& labels, std::size_t replicate) {
  RuleOutcome o;
  o.rule_id = labels.rule_id;
  o.replicate = replicate;
  o.mean_score = labeled_mean_score(probs, labels);
  o.vs_aggregate = evaluate(labels, agg, truth, &probs);
  if (tm) o.vs_truth = evaluate(labels, *tm, truth, &probs);
  return o;
}

template <class Body>
void run_replicates(std::size_t n, Body body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
    try {
      body(static_cast<std::size_t>(r));
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SummaryPoint summarize(const std::vector<const RuleOutcome*>& rows) {
  SummaryPoint p;
  p.rule_id = rows.front()->rule_id;
  p.gamma = rows.front()->gamma;
  p.count = rows.size();
  std::vector<double> acc, cov, score, fa, ft;
  for (const auto* o : rows) {
    if (o->vs_aggregate.accuracy) acc.push_back(*o->vs_aggregate.accuracy);
    cov.push_back(o->vs_aggregate.coverage);
    score.push_back(o->mean_score);
    fa.push_back(o->vs_aggregate.fidelity);
    if (o->vs_truth) ft.push_back(o->vs_truth->fidelity);
  }
  std::tie(p.accuracy, p.accuracy_se) = mean_and_se(acc);
  p.coverage = mean_and_se(cov).first;
  p.mean_score = mean_and_se(score).first;
  std::tie(p.fidelity_aggregate, p.fidelity_aggregate_se) = mean_and_se(fa);
  std::tie(p.fidelity_truth, p.fidelity_truth_se) = mean_and_se(ft);
  return p;
}

nlohmann::ordered_json point_json(const SummaryPoint& p) {
  nlohmann::ordered_json j;
  j["rule"] = p.rule_id;
  if (p.gamma) j["gamma"] = *p.gamma;
  j["replicates"] = p.count;
  j["accuracy"] = p.accuracy;
  j["accuracy_se"] = p.accuracy_se;
  j["coverage"] = p.coverage;
  j["mean_score"] = p.mean_score;
  j["fidelity_aggregate"] = p.fidelity_aggregate;
  j["fidelity_aggregate_se"] = p.fidelity_aggregate_se;
  j["fidelity_truth"] = p.fidelity_truth;
  j["fidelity_truth_se"] = p.fidelity_truth_se;
  return j;
}

}  // namespace

std::pair<double, double> mean_and_se(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<RuleOutcome> run_rule_comparison(const ProbabilityMatrix& probs,
                                             const GroundTruth* truth,
                                             const std::vector<RuleSpec>& rules,
                                             const RuleContext& ctx, std::size_t replicate) {
  const auto agg = aggregate_posterior(probs);
  std::optional<ReferenceDistribution> tm;
  if (truth) tm = truth_marginal(*truth, probs.classes());
  std::vector<RuleOutcome> out;
  out.reserve(rules.size());
  for (const auto& rule : rules) {
    auto run = run_rule(rule, probs, ctx);
    auto o = measure(probs, truth, agg, tm, run.labels, replicate);
    if (rule.kind == RuleKind::Gamma) o.gamma = rule.value;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 80; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

SweepResult pareto_sweep(const SweepConfig& cfg) {
  if (cfg.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  for (std::size_t j = 1; j < cfg.gammas.size(); ++j)
    if (!(cfg.gammas[j - 1] < cfg.gammas[j]))
      throw std::invalid_argument("gammas must be sorted ascending without repeats");
  for (double g : cfg.gammas)
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");

  std::vector<RuleSpec> all = cfg.rules;
  for (double g : cfg.gammas) {
    RuleSpec r;
    r.kind = RuleKind::Gamma;
    r.value = g;
    all.push_back(r);
  }
  const std::size_t per = all.size();
  std::vector<RuleOutcome> outcomes(cfg.replicates * per);
  std::vector<double> maes(cfg.replicates);

  run_replicates(cfg.replicates, [&](std::size_t r) {
    GaussianSimConfig sim = cfg.sim;
    sim.seed = mix_seed(cfg.seed, r);
    const auto data = serial::simulate_gaussian(sim);
    RuleContext ctx;
    ctx.ties = default_tie_order(data.probs);
    ctx.seed = sim.seed;
    ctx.joint.batch_size = cfg.batch_size;
    ctx.train.batch_size = cfg.batch_size;
    auto rows = run_rule_comparison(data.probs, &data.truth, all, ctx, r);
    for (std::size_t j = 0; j < per; ++j) outcomes[r * per + j] = std::move(rows[j]);
    maes[r] = serial::mae(data.probs, data.truth);
  });

  SweepResult result;
  result.mean_mae = mean_and_se(maes).first;
  for (std::size_t j = 0; j < per; ++j) {
    std::vector<const RuleOutcome*> rows;
    for (std::size_t r = 0; r < cfg.replicates; ++r) rows.push_back(&outcomes[r * per + j]);
    auto p = summarize(rows);
    (j < cfg.rules.size() ? result.rules : result.frontier).push_back(std::move(p));
  }
  for (std::size_t j = 1; j < result.frontier.size(); ++j) {
    const auto& a = result.frontier[j - 1];
    const auto& b = result.frontier[j];
    if (b.accuracy < a.accuracy - std::max(a.accuracy_se, b.accuracy_se) ||
        b.fidelity_aggregate >
            a.fidelity_aggregate + std::max(a.fidelity_aggregate_se, b.fidelity_aggregate_se))
      result.frontier_monotone = false;
  }
  result.outcomes = std::move(outcomes);
  return result;
}

std::vector<InformationPoint> bias_vs_information(const std::vector<double>& sigmas,
                                                  const GaussianSimConfig& base,
                                                  std::size_t replicates, Seed seed) {
  if (sigmas.empty()) throw std::invalid_argument("need at least one sigma");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  const std::size_t k = base.k;
  std::vector<InformationPoint> out(sigmas.size());
  std::vector<std::vector<double>> bias_agg(sigmas.size() * replicates);
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    out[s].sigma = sigmas[s];
    out[s].replicates = replicates;
    out[s].replicate_mae.resize(replicates);
    out[s].replicate_bias.resize(replicates);
  }
  run_replicates(sigmas.size() * replicates, [&](std::size_t t) {
    const std::size_t s = t / replicates;
    const std::size_t r = t % replicates;
    GaussianSimConfig sim = base;
    sim.sigma = sigmas[s];
    sim.seed = mix_seed(mix_seed(seed, s), r);
    const auto data = serial::simulate_gaussian(sim);
    const auto labels = serial::argmax_rule(data.probs, default_tie_order(data.probs));
    out[s].replicate_mae[r] = serial::mae(data.probs, data.truth);
    out[s].replicate_bias[r] = bias_vector(labels, truth_marginal(data.truth, k));
    bias_agg[t] = bias_vector(labels, serial::aggregate_posterior(data.probs));
  });
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    auto& p = out[s];
    std::tie(p.mae, p.mae_se) = mean_and_se(p.replicate_mae);
    p.bias.resize(k);
    p.bias_se.resize(k);
    p.bias_aggregate.resize(k);
    for (std::size_t y = 0; y < k; ++y) {
      std::vector<double> b, ba;
      for (std::size_t r = 0; r < replicates; ++r) {
        b.push_back(p.replicate_bias[r][y]);
        ba.push_back(bias_agg[s * replicates + r][y]);
      }
      std::tie(p.bias[y], p.bias_se[y]) = mean_and_se(b);
      p.bias_aggregate[y] = mean_and_se(ba).first;
    }
  }
  return out;
}

CsvTable outcomes_table(const std::vector<RuleOutcome>& outcomes,
                        const std::vector<std::string>& class_names) {
  CsvTable t;
  t.header = {"rule", "gamma", "replicate", "accuracy", "coverage", "mean_score", "mae",
              "fidelity_aggregate", "fidelity_truth"};
  for (const auto& c : class_names) t.header.push_back("bias_aggregate_" + c);
  for (const auto& c : class_names) t.header.push_back("bias_truth_" + c);
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& o : outcomes) {
    std::vector<std::string> row{o.rule_id,
                                 opt(o.gamma),
                                 std::to_string(o.replicate),
                                 opt(o.vs_aggregate.accuracy),
                                 format_double(o.vs_aggregate.coverage),
                                 format_double(o.mean_score),
                                 opt(o.vs_aggregate.mae),
                                 format_double(o.vs_aggregate.fidelity),
                                 o.vs_truth ? format_double(o.vs_truth->fidelity) : ""};
    for (double b : o.vs_aggregate.per_class_bias) row.push_back(format_double(b));
    for (std::size_t y = 0; y < class_names.size(); ++y)
      row.push_back(o.vs_truth ? format_double(o.vs_truth->per_class_bias[y]) : "");
    t.rows.push_back(std::move(row));
  }
  return t;
}

nlohmann::ordered_json sweep_summary_json(const SweepConfig& cfg, const SweepResult& result) {
  nlohmann::ordered_json j;
  auto& c = j["config"];
  c["seed"] = cfg.seed;
  c["replicates"] = cfg.replicates;
  c["n"] = cfg.sim.n;
  c["k"] = cfg.sim.k;
  c["sigma"] = cfg.sim.sigma;
  c["prior"] = cfg.sim.prior;
  c["gammas"] = cfg.gammas;
  c["batch_size"] = cfg.batch_size;
  auto& names = c["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : cfg.rules) names.push_back(r.id());
  j["mean_mae"] = result.mean_mae;
  j["rules"] = nlohmann::ordered_json::array();
  for (const auto& p : result.rules) j["rules"].push_back(point_json(p));
  j["frontier"] = nlohmann::ordered_json::array();
  for (const auto& p : result.frontier) j["frontier"].push_back(point_json(p));
  j["frontier_monotone"] = result.frontier_monotone;
  return j;
}

CsvTable information_table(const std::vector<InformationPoint>& points) {
  CsvTable t;
  t.header = {"sigma", "replicates", "mae", "mae_se", "class", "bias", "bias_se", "bias_aggregate"};
  for (const auto& p : points)
    for (std::size_t y = 0; y < p.bias.size(); ++y)
      t.rows.push_back({format_double(p.sigma), std::to_string(p.replicates), format_double(p.mae),
                        format_double(p.mae_se), std::to_string(y), format_double(p.bias[y]),
                        format_double(p.bias_se[y]), format_double(p.bias_aggregate[y])});
  return t;
}

}  // namespace discretize
