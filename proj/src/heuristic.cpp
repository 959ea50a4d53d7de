#include "discretize/heuristic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "discretize/metrics.hpp"
#include "discretize/rng.hpp"

namespace discretize {
namespace {

void scores(const LinearLabeler& m, std::span<const double> x, std::span<double> out) {
  const std::size_t k = m.classes;
  for (std::size_t c = 0; c < k; ++c) {
    double s = m.biases[c];
    for (std::size_t j = 0; j < k; ++j) s += m.weights[c * k + j] * x[j];
    out[c] = s;
  }
}

ClassIndex predict(const LinearLabeler& m, std::span<const double> x, const TieOrder& ties,
                   std::span<double> buf) {
  scores(m, x, buf);
  ClassIndex best = ties.order().front();
  for (ClassIndex y : ties.order())
    if (buf[static_cast<std::size_t>(y)] > buf[static_cast<std::size_t>(best)]) best = y;
  return best;
}

template <bool Parallel>
LabelAssignment apply_impl(const LinearLabeler& model, const ProbabilityMatrix& probs,
                           const TieOrder& ties) {
  if (model.classes != probs.classes() || ties.classes() != probs.classes())
    throw std::invalid_argument("labeler has " + std::to_string(model.classes) +
                                " classes, data has " + std::to_string(probs.classes()));
  LabelAssignment out;
  out.rule_id = "labeler";
  out.labels.resize(probs.rows());
  const std::size_t k = probs.classes();
  if constexpr (Parallel) {
#pragma omp parallel
    {
      std::vector<double> buf(k);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(probs.rows()); ++i)
        out.labels[static_cast<std::size_t>(i)] =
            predict(model, probs.row(static_cast<std::size_t>(i)), ties, buf);
    }
  } else {
    std::vector<double> buf(k);
    for (std::size_t i = 0; i < probs.rows(); ++i)
      out.labels[i] = predict(model, probs.row(i), ties, buf);
  }
  return out;
}

void check_finite(const LinearLabeler& m) {
  for (double v : m.weights)
    if (!std::isfinite(v)) throw SchemaError("labeler weights must be finite");
  for (double v : m.biases)
    if (!std::isfinite(v)) throw SchemaError("labeler biases must be finite");
}

}  // namespace

void LinearLabeler::save(std::ostream& os) const {
  os << classes << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < classes; ++j) os << (j ? " " : "") << weights[c * classes + j];
    os << '\n';
  }
  for (std::size_t c = 0; c < classes; ++c) os << (c ? " " : "") << biases[c];
  os << '\n';
}

LinearLabeler LinearLabeler::load(std::istream& is) {
  LinearLabeler m;
  long long k = 0;
  if (!(is >> k) || k < 2 || k > 4096) throw SchemaError("labeler file: bad class count");
  m.classes = static_cast<std::size_t>(k);
  m.weights.resize(m.classes * m.classes);
  m.biases.resize(m.classes);
  for (auto& v : m.weights)
    if (!(is >> v)) throw SchemaError("labeler file: truncated weights");
  for (auto& v : m.biases)
    if (!(is >> v)) throw SchemaError("labeler file: truncated biases");
  std::string extra;
  if (is >> extra) throw SchemaError("labeler file: trailing content");
  check_finite(m);
  return m;
}

void LinearLabeler::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  save(os);
  if (!os) throw IoError("failed writing " + path);
}

LinearLabeler LinearLabeler::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return load(is);
}

FitResult fit_labeler(const ProbabilityMatrix& probs, const LabelAssignment& targets,
                      const TrainConfig& cfg) {
  if (targets.size() != probs.rows() || probs.rows() == 0)
    throw std::invalid_argument("fit_labeler: targets must cover a nonempty batch");
  if (targets.has_uncoded()) throw std::invalid_argument("fit_labeler: targets contain Uncoded");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("fit_labeler: epochs and learning rate must be positive");
  const std::size_t n = probs.rows();
  const std::size_t k = probs.classes();

  FitResult out;
  out.model.classes = k;
  out.model.weights.assign(k * k, 0.0);
  out.model.biases.assign(k, 0.0);

  const ClassIndex first = targets.labels.front();
  if (std::all_of(targets.labels.begin(), targets.labels.end(),
                  [&](ClassIndex y) { return y == first; })) {
    out.degenerate = true;
    out.model.biases[static_cast<std::size_t>(first)] = 1.0;
    out.agreement = 1.0;
    return out;
  }

  RowStream init(cfg.seed, 0, StreamTag::LabelerInit);
  for (auto& w : out.model.weights) w = 0.01 * (init.uniform() - 0.5);

  auto& w = out.model.weights;
  auto& b = out.model.biases;
  std::vector<double> gw(k * k), gb(k), p(k);
  const double step = cfg.learning_rate / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = probs.row(i);
      scores(out.model, x, p);
      const double top = *std::max_element(p.begin(), p.end());
      double total = 0.0;
      for (auto& v : p) total += (v = std::exp(v - top));
      const auto y = static_cast<std::size_t>(targets.labels[i]);
      for (std::size_t c = 0; c < k; ++c) {
        const double g = p[c] / total - (c == y ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < k; ++j) gw[c * k + j] += g * x[j];
      }
    }
    for (std::size_t j = 0; j < k * k; ++j) w[j] -= step * gw[j];
    for (std::size_t c = 0; c < k; ++c) b[c] -= step * gb[c];
  }

  const auto fitted = serial::apply_labeler(out.model, probs, TieOrder::identity(k));
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) same += fitted.labels[i] == targets.labels[i];
  out.agreement = static_cast<double>(same) / static_cast<double>(n);
  return out;
}

LabelAssignment apply_labeler(const LinearLabeler& model, const ProbabilityMatrix& probs,
                              const TieOrder& ties) {
  return apply_impl<true>(model, probs, ties);
}

namespace serial {
LabelAssignment apply_labeler(const LinearLabeler& model, const ProbabilityMatrix& probs,
                              const TieOrder& ties) {
  return apply_impl<false>(model, probs, ties);
}
}  // namespace serial

HeuristicResult data_driven_rule(const ProbabilityMatrix& probs, const TrainConfig& cfg,
                                 const TieOrder& ties, std::optional<double> gamma,
                                 const std::optional<ReferenceDistribution>& reference) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  HeuristicResult out;
  out.training_rows = std::min(cfg.batch_size, probs.rows());
  const auto batch = probs.slice(0, out.training_rows);
  const auto ref = reference ? *reference : aggregate_posterior(batch);
  const auto exact = gamma ? solve_gamma_program(batch, ref, *gamma, ties)
                           : match_to_reference(batch, target_counts(ref, batch.rows(), ties), ties);
  out.fit = fit_labeler(batch, exact, cfg);
  out.labels = apply_labeler(out.fit.model, probs, ties);
  std::copy(exact.labels.begin(), exact.labels.end(), out.labels.labels.begin());
  out.labels.rule_id = "heuristic";
  out.labels.seed = cfg.seed;
  return out;
}

}  // namespace discretize
