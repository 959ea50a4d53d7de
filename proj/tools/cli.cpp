#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "discretize/experiments.hpp"
#include "discretize/metrics.hpp"
#include "discretize/parallel.hpp"
#include "discretize/rule_spec.hpp"
#include "discretize/rules.hpp"
#include "discretize/simulator.hpp"

namespace discretize::cli {
namespace {

std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto end = std::min(text.find(',', begin), text.size());
    const auto item = text.substr(begin, end - begin);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": '" + item + "' is not a number");
    out.push_back(v);
    begin = end + 1;
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  os.flush();
  if (!os) throw IoError("failed writing " + path);
}

void emit_json(const nlohmann::ordered_json& j, const std::string& path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") out << text;
  else write_text_file(path, text);
}

void emit_csv(const CsvTable& t, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") write_csv(out, t);
  else write_csv_file(path, t);
}

void warn_renormalized(const ProbabilityMatrix& probs, std::ostream& err) {
  if (probs.renormalized_rows() > 0)
    err << "warning: renormalized " << probs.renormalized_rows()
        << " row(s) whose probabilities summed to 1 +/- more than 1e-9\n";
}

nlohmann::ordered_json vec(const std::vector<double>& v) { return nlohmann::ordered_json(v); }

TieOrder tie_order_from(const std::string& text, const ProbabilityMatrix& probs) {
  if (text.empty()) return default_tie_order(probs);
  const auto& names = probs.class_names();
  std::vector<ClassIndex> order;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto end = std::min(text.find(',', begin), text.size());
    const auto item = text.substr(begin, end - begin);
    auto it = std::find(names.begin(), names.end(), item);
    if (it == names.end()) throw std::invalid_argument("--tie-order: unknown class '" + item + "'");
    order.push_back(static_cast<ClassIndex>(it - names.begin()));
    begin = end + 1;
  }
  return TieOrder(std::move(order));
}

std::optional<ReferenceDistribution> explicit_reference(const ReferenceSpec& spec, std::size_t k) {
  switch (spec.kind) {
    case ReferenceSpec::Kind::Uniform: return ReferenceDistribution::uniform(k);
    case ReferenceSpec::Kind::Custom:
      if (spec.weights.size() != k)
        throw InfeasibleReference("custom reference has " + std::to_string(spec.weights.size()) +
                                  " weights, data has " + std::to_string(k) + " classes");
      return ReferenceDistribution(spec.weights, ReferenceSource::Custom);
    default: return std::nullopt;
  }
}

// ---- discretize -----------------------------------------------------------

struct DiscretizeOptions {
  std::string input;
  std::string rules;
  std::string reference = "aggregate";
  Seed seed = 0;
  std::size_t batch_size = 10000;
  bool group = false;
  bool global_reference = false;
  std::string tie_order;
  std::string output;
  std::string metrics;
  std::string save_model;
};

int cmd_discretize(const DiscretizeOptions& o, std::ostream& out, std::ostream& err) {
  const auto rules = parse_rule_list(o.rules);
  {
    std::set<std::string> ids;
    for (const auto& r : rules)
      if (!ids.insert(r.id()).second) throw std::invalid_argument("rule '" + r.id() + "' given twice");
  }
  if (o.batch_size < 1) throw std::invalid_argument("--batch-size must be >= 1");
  const auto ref_spec = parse_reference(o.reference);

  auto data = read_input_file(o.input);
  warn_renormalized(data.probs, err);
  const auto& probs = data.probs;
  const std::size_t k = probs.classes();

  RuleContext ctx;
  ctx.ties = tie_order_from(o.tie_order, probs);
  ctx.seed = o.seed;
  ctx.joint.batch_size = o.batch_size;
  ctx.joint.reference.per_batch = !o.global_reference;
  ctx.train.batch_size = o.batch_size;
  const bool by_group = o.group || ref_spec.kind == ReferenceSpec::Kind::AggregateGroup;
  if (by_group) {
    if (!data.groups) throw SchemaError("line 1: grouping requested but there is no group column");
    ctx.groups = &*data.groups;
  }
  switch (ref_spec.kind) {
    case ReferenceSpec::Kind::Truth:
      if (!data.truth)
        throw InfeasibleReference("reference 'truth' needs a true_label column");
      ctx.joint.reference.fixed = truth_marginal(*data.truth, k);
      break;
    case ReferenceSpec::Kind::Uniform:
    case ReferenceSpec::Kind::Custom:
      ctx.joint.reference.fixed = explicit_reference(ref_spec, k);
      break;
    default: break;
  }

  std::vector<LabelAssignment> labels;
  for (const auto& rule : rules) {
    auto run = run_rule(rule, probs, ctx);
    if (run.fit) {
      err << "heuristic: training agreement " << format_double(run.fit->agreement) << " on "
          << std::min(o.batch_size, probs.rows()) << " rows"
          << (run.fit->degenerate ? " (single target class, constant labeler)" : "") << "\n";
      if (!o.save_model.empty()) run.fit->model.save_file(o.save_model);
    }
    labels.push_back(std::move(run.labels));
  }

  CsvTable table = data.table;
  for (const auto& a : labels) {
    const std::string col = kLabelPrefix + a.rule_id;
    if (table.column(col)) throw SchemaError("line 1: input already has a column '" + col + "'");
    table.header.push_back(col);
    for (std::size_t i = 0; i < a.size(); ++i)
      table.rows[i].push_back(label_text(a.labels[i], probs.class_names()));
  }
  emit_csv(table, o.output, out);
  if (!o.metrics.empty()) {
    const auto explicit_ref = explicit_reference(ref_spec, k);
    emit_json(metrics_json(data, labels, explicit_ref), o.metrics, out);
  }
  return kOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateOptions {
  std::string input;
  std::string reference = "aggregate";
  std::string metrics;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  const auto ref_spec = parse_reference(o.reference);
  const auto data = read_input_file(o.input);
  warn_renormalized(data.probs, err);
  const auto labels = decode_label_columns(data.table, data.probs.class_names());
  if (labels.empty()) throw SchemaError("line 1: no label_<rule> columns to evaluate");
  emit_json(metrics_json(data, labels, explicit_reference(ref_spec, data.probs.classes())),
            o.metrics, out);
  return kOk;
}

// ---- simulate -------------------------------------------------------------

struct SimulateOptions {
  std::string kind = "gaussian";
  std::size_t k = 6;
  double sigma = 0.5;
  std::size_t n = 5000;
  std::string prior;
  double c = 0.5;
  Seed seed = 0;
  std::string output;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream&) {
  SyntheticDataset data;
  if (o.kind == "gaussian") {
    GaussianSimConfig cfg;
    cfg.k = o.k;
    cfg.prior = o.prior.empty() ? halving_prior(o.k) : parse_number_list(o.prior, "--prior");
    cfg.sigma = o.sigma;
    cfg.n = o.n;
    cfg.seed = o.seed;
    data = simulate_gaussian(cfg);
  } else {
    if (!o.prior.empty()) throw std::invalid_argument("--prior applies to the gaussian kind only");
    WorstCaseConfig cfg;
    cfg.k = o.k;
    cfg.c = o.c;
    cfg.n = o.n;
    cfg.seed = o.seed;
    data = simulate_worst_case(cfg);
  }
  emit_csv(probabilities_table(data.probs, &data.truth), o.output, out);
  return kOk;
}

// ---- sweep ----------------------------------------------------------------

struct SweepOptions {
  std::string rules;
  std::string gammas;
  std::size_t replicates = 100;
  std::size_t n = 5000;
  std::size_t k = 6;
  double sigma = 0.5;
  std::string prior;
  Seed seed = 0;
  std::size_t batch_size = 10000;
  std::string output;
  std::string summary;
};

int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream&) {
  SweepConfig cfg;
  cfg.rules = parse_rule_list(o.rules);
  if (!o.gammas.empty()) cfg.gammas = parse_number_list(o.gammas, "--gammas");
  cfg.replicates = o.replicates;
  cfg.sim.n = o.n;
  cfg.sim.k = o.k;
  cfg.sim.sigma = o.sigma;
  cfg.sim.prior = o.prior.empty() ? halving_prior(o.k) : parse_number_list(o.prior, "--prior");
  cfg.seed = o.seed;
  cfg.batch_size = o.batch_size;
  const auto result = pareto_sweep(cfg);
  std::vector<std::string> names;
  for (std::size_t y = 0; y < cfg.sim.k; ++y) names.push_back("c" + std::to_string(y));
  emit_csv(outcomes_table(result.outcomes, names), o.output, out);
  if (!o.summary.empty()) emit_json(sweep_summary_json(cfg, result), o.summary, out);
  return kOk;
}

// ---- bias-curve -----------------------------------------------------------

struct BiasCurveOptions {
  std::string sigmas = "0.1,0.25,0.5,1,2,5";
  std::size_t replicates = 20;
  std::size_t n = 5000;
  std::size_t k = 6;
  std::string prior;
  Seed seed = 0;
  std::string output;
};

int cmd_bias_curve(const BiasCurveOptions& o, std::ostream& out, std::ostream&) {
  GaussianSimConfig base;
  base.k = o.k;
  base.n = o.n;
  base.prior = o.prior.empty() ? halving_prior(o.k) : parse_number_list(o.prior, "--prior");
  const auto points =
      bias_vs_information(parse_number_list(o.sigmas, "--sigmas"), base, o.replicates, o.seed);
  emit_csv(information_table(points), o.output, out);
  return kOk;
}

}  // namespace

ReferenceSpec parse_reference(const std::string& text) {
  ReferenceSpec r;
  if (text == "aggregate") r.kind = ReferenceSpec::Kind::Aggregate;
  else if (text == "aggregate:group") r.kind = ReferenceSpec::Kind::AggregateGroup;
  else if (text == "truth") r.kind = ReferenceSpec::Kind::Truth;
  else if (text == "uniform") r.kind = ReferenceSpec::Kind::Uniform;
  else if (text.rfind("custom:", 0) == 0) {
    r.kind = ReferenceSpec::Kind::Custom;
    r.weights = parse_number_list(text.substr(7), "--reference");
  } else {
    throw std::invalid_argument("unknown reference '" + text +
                                "' (aggregate, aggregate:group, truth, uniform, custom:w1,w2,...)");
  }
  return r;
}

nlohmann::ordered_json metrics_json(const InputData& data,
                                    const std::vector<LabelAssignment>& labels,
                                    const std::optional<ReferenceDistribution>& explicit_ref) {
  const auto& probs = data.probs;
  const std::size_t k = probs.classes();
  const auto agg = aggregate_posterior(probs);
  const GroundTruth* truth = data.truth ? &*data.truth : nullptr;
  std::optional<ReferenceDistribution> tm;
  if (truth) tm = truth_marginal(*truth, k);

  nlohmann::ordered_json j;
  j["n_rows"] = probs.rows();
  j["classes"] = probs.class_names();
  j["aggregate_posterior"] = vec(agg.weights());
  if (tm) {
    j["truth_marginal"] = vec(tm->weights());
    j["mae"] = mae(probs, *truth);
  }
  if (explicit_ref) j["reference"] = vec(explicit_ref->weights());
  auto& rules = j["rules"] = nlohmann::ordered_json::object();
  for (const auto& a : labels) {
    auto& r = rules[a.rule_id];
    const auto vs_agg = evaluate(a, agg, truth, &probs);
    r["labeled_rows"] = a.labeled_count();
    r["coverage"] = vs_agg.coverage;
    if (truth) r["accuracy"] = vs_agg.accuracy ? nlohmann::ordered_json(*vs_agg.accuracy) : nullptr;
    r["bias_vs_aggregate"] = vec(vs_agg.per_class_bias);
    r["fidelity_vs_aggregate"] = vs_agg.fidelity;
    if (tm) {
      const auto vs_truth = evaluate(a, *tm);
      r["bias_vs_truth"] = vec(vs_truth.per_class_bias);
      r["fidelity_vs_truth"] = vs_truth.fidelity;
    }
    if (explicit_ref) {
      const auto vs_ref = evaluate(a, *explicit_ref);
      r["bias_vs_reference"] = vec(vs_ref.per_class_bias);
      r["fidelity_vs_reference"] = vs_ref.fidelity;
    }
  }
  return j;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turn class-probability predictions into discrete labels."};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (results do not depend on it)")
      ->check(CLI::NonNegativeNumber);

  DiscretizeOptions d;
  auto* disc = app.add_subcommand("discretize", "Label a probability CSV with one or more rules");
  disc->add_option("-i,--input", d.input, "CSV with prob_<class> columns")->required();
  disc->add_option("-r,--rules", d.rules,
                   "Comma list: argmax, threshold:T, thompson, topk:K, match, gamma:G, "
                   "heuristic, labeler:FILE")
      ->required();
  disc->add_option("--reference", d.reference,
                   "aggregate | aggregate:group | truth | uniform | custom:w1,w2,...")
      ->capture_default_str();
  disc->add_option("--seed", d.seed, "Seed for sampling rules and labeler init")->capture_default_str();
  disc->add_option("--batch-size", d.batch_size, "Rows per exact solve")->capture_default_str();
  disc->add_flag("--group", d.group, "Solve joint rules within each value of the group column");
  disc->add_flag("--global-reference", d.global_reference,
                 "Aggregate-posterior targets from the whole input (or group), not each batch");
  disc->add_option("--tie-order", d.tie_order,
                   "Class names, highest priority first (default: by aggregate posterior)");
  disc->add_option("-o,--output", d.output, "Labeled CSV path ('-' for stdout)")->required();
  disc->add_option("-m,--metrics", d.metrics, "Metrics JSON path");
  disc->add_option("--save-model", d.save_model, "Where the heuristic rule saves its labeler");

  EvaluateOptions e;
  auto* eval = app.add_subcommand("evaluate", "Recompute metrics for a labeled CSV");
  eval->add_option("-i,--input", e.input, "CSV with prob_<class> and label_<rule> columns")
      ->required();
  eval->add_option("--reference", e.reference, "Same grammar as discretize")->capture_default_str();
  eval->add_option("-m,--metrics", e.metrics, "Metrics JSON path ('-' for stdout)")->required();

  SimulateOptions s;
  auto* sim = app.add_subcommand("simulate", "Write a synthetic probability CSV with true labels");
  sim->add_option("--kind", s.kind, "gaussian | worst-case")
      ->check(CLI::IsMember({"gaussian", "worst-case"}))
      ->capture_default_str();
  sim->add_option("--k", s.k, "Number of classes")->check(CLI::Range(2, 64))->capture_default_str();
  sim->add_option("--sigma", s.sigma, "Feature noise standard deviation")->capture_default_str();
  sim->add_option("--n", s.n, "Rows")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--prior", s.prior, "Class prior w1,...,wK (default halving)");
  sim->add_option("--c", s.c, "Uninformative-row mass (worst-case)")->capture_default_str();
  sim->add_option("--seed", s.seed)->capture_default_str();
  sim->add_option("-o,--output", s.output, "CSV path ('-' for stdout)")->required();

  SweepOptions w;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo accuracy/fidelity frontier");
  sweep->add_option("-r,--rules", w.rules, "Independent/joint rules to compare")->required();
  sweep->add_option("--gammas", w.gammas, "Comma list (default 0.80..0.99 by 0.01)");
  sweep->add_option("--replicates", w.replicates)->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--n", w.n, "Rows per replicate")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--k", w.k)->check(CLI::Range(2, 64))->capture_default_str();
  sweep->add_option("--sigma", w.sigma)->capture_default_str();
  sweep->add_option("--prior", w.prior, "Class prior w1,...,wK (default halving)");
  sweep->add_option("--seed", w.seed)->capture_default_str();
  sweep->add_option("--batch-size", w.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("-o,--output", w.output, "Per-replicate CSV ('-' for stdout)")->required();
  sweep->add_option("--summary", w.summary, "Summary JSON path");

  BiasCurveOptions b;
  auto* curve = app.add_subcommand("bias-curve", "Argmax bias and MAE across noise levels");
  curve->add_option("--sigmas", b.sigmas)->capture_default_str();
  curve->add_option("--replicates", b.replicates)->check(CLI::PositiveNumber)->capture_default_str();
  curve->add_option("--n", b.n)->check(CLI::PositiveNumber)->capture_default_str();
  curve->add_option("--k", b.k)->check(CLI::Range(2, 64))->capture_default_str();
  curve->add_option("--prior", b.prior);
  curve->add_option("--seed", b.seed)->capture_default_str();
  curve->add_option("-o,--output", b.output, "CSV path ('-' for stdout)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const int saved_threads = parallel::max_threads();
  if (threads > 0) parallel::set_threads(threads);
  int code = kOk;
  try {
    if (*disc) code = cmd_discretize(d, out, err);
    else if (*eval) code = cmd_evaluate(e, out, err);
    else if (*sim) code = cmd_simulate(s, out, err);
    else if (*sweep) code = cmd_sweep(w, out, err);
    else if (*curve) code = cmd_bias_curve(b, out, err);
  } catch (const SchemaError& ex) {
    err << "schema error: " << ex.what() << "\n";
    code = kSchema;
  } catch (const InfeasibleReference& ex) {
    err << "infeasible reference: " << ex.what() << "\n";
    code = kInfeasible;
  } catch (const IoError& ex) {
    err << "i/o error: " << ex.what() << "\n";
    code = kIo;
  } catch (const std::invalid_argument& ex) {
    err << "usage error: " << ex.what() << "\n";
    code = kUsage;
  }
  parallel::set_threads(saved_threads);
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"discretize"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace discretize::cli
