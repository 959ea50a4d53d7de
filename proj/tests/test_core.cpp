#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "discretize/csv_io.hpp"
#include "discretize/metrics.hpp"
#include "discretize/rng.hpp"
#include "discretize/rules.hpp"
#include "discretize/simulator.hpp"
#include "oracle.hpp"

using namespace discretize;

namespace {

LabelAssignment labels_of(std::vector<ClassIndex> v) {
  LabelAssignment a;
  a.labels = std::move(v);
  return a;
}

ReferenceDistribution ref_of(std::vector<double> w) {
  return ReferenceDistribution(std::move(w), ReferenceSource::Custom);
}

}  // namespace

TEST_CASE("probability matrix ingestion") {
  const auto m = ProbabilityMatrix::from_rows({{0.6, 0.4}, {0.2, 0.8}});
  CHECK(m.rows() == 2);
  CHECK(m.classes() == 2);
  CHECK(m.class_names() == std::vector<std::string>{"c0", "c1"});
  CHECK(m.renormalized_rows() == 0);

  // Within 1e-6: renormalized and counted.
  const auto r = ProbabilityMatrix::from_rows({{0.5, 0.5000005}});
  CHECK(r.renormalized_rows() == 1);
  CHECK(std::abs(r(0, 0) + r(0, 1) - 1.0) < 1e-12);

  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{0.5, 0.51}}), SchemaError);
  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{1.2, -0.2}}), SchemaError);
  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{1.0}}), SchemaError);
  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{NAN, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{0.5, 0.5}}, {"a", "UNCODED"}), SchemaError);
  CHECK_THROWS_AS(ProbabilityMatrix::from_rows({{0.5, 0.5}, {1.0}}), SchemaError);

  const std::vector<std::size_t> ids{1};
  CHECK(m.select(ids)(0, 1) == 0.8);
  CHECK(m.slice(1, 2)(0, 0) == 0.2);
}

TEST_CASE("reference, tie order, and truth validation") {
  CHECK_THROWS_AS(ref_of({0.5, 0.6}), InfeasibleReference);
  CHECK_THROWS_AS(ref_of({1.5, -0.5}), InfeasibleReference);
  CHECK(ReferenceDistribution::uniform(4)[2] == 0.25);
  CHECK_THROWS(TieOrder({0, 0}));
  CHECK_THROWS(TieOrder({0, 2}));
  const TieOrder t({2, 0, 1});
  CHECK(t.rank(2) == 0);
  CHECK(t.prefers(0, 1));
  CHECK_THROWS_AS(GroundTruth({0, 3}).validate(3), SchemaError);
}

TEST_CASE("aggregate posterior") {
  const auto agg = aggregate_posterior(ProbabilityMatrix::from_rows({{0.6, 0.4}, {0.2, 0.8}}));
  CHECK(agg[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(agg[1] == doctest::Approx(0.6).epsilon(1e-15));
  const auto one = aggregate_posterior(ProbabilityMatrix::from_rows({{1, 0}, {1, 0}}));
  CHECK(one.weights() == std::vector<double>{1, 0});

  // Bayes posteriors are consistent: column means track the prior.
  GaussianSimConfig cfg;
  cfg.n = 1000;
  cfg.seed = 5;
  const auto data = simulate_gaussian(cfg);
  const auto a = aggregate_posterior(data.probs);
  for (std::size_t y = 0; y < 6; ++y) {
    const double p = cfg.prior[y];
    CHECK(std::abs(a[y] - p) <= 3 * std::sqrt(p * (1 - p) / 1000));
  }
}

TEST_CASE("aggregate posterior of one-hot rows is the argmax marginal") {
  std::mt19937_64 gen(1);
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) {
    const std::size_t y = gen() % 3;
    for (std::size_t c = 0; c < 3; ++c) v.push_back(c == y ? 1.0 : 0.0);
  }
  const ProbabilityMatrix m(100, 3, v);
  const auto am = argmax_rule(m, TieOrder::identity(3));
  CHECK(aggregate_posterior(m).weights() == marginal_distribution(am, 3));
}

TEST_CASE("marginal, bias, fidelity") {
  CHECK(marginal_distribution(labels_of({0, 0, 0, 1}), 2) == std::vector<double>{0.75, 0.25});
  CHECK(marginal_distribution(labels_of({1, 1}), 3) == std::vector<double>{0, 1, 0});
  CHECK_THROWS(marginal_distribution(labels_of({0, kUncoded}), 2));

  const auto half = ref_of({0.5, 0.5});
  const auto a = labels_of({0, 0, 0, 1});
  CHECK(bias(a, half, 0) == 0.25);
  CHECK(bias(a, half, 1) == -0.25);
  CHECK(fidelity(a, half) == -0.5);
  CHECK(fidelity(labels_of({0, 1, 1, 0}), half) == 0.0);
  CHECK_THROWS(bias(labels_of({kUncoded, 0}), half, 0));

  // No-information labels under the halving prior.
  const auto prior = ref_of(halving_prior(6));
  const auto all_zero = labels_of(std::vector<ClassIndex>(64, 0));
  CHECK(bias(all_zero, prior, 0) == 0.5);
  CHECK(fidelity(all_zero, prior) == -1.0);

  std::mt19937_64 gen(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + gen() % 5;
    std::vector<ClassIndex> v(1 + gen() % 30);
    for (auto& y : v) y = static_cast<ClassIndex>(gen() % k);
    const auto ref = oracle::random_reference(gen, k);
    const auto b = bias_vector(labels_of(v), ref);
    double sum = 0.0, l1 = 0.0;
    for (double x : b) sum += x, l1 += std::abs(x);
    CHECK(std::abs(sum) <= 1e-12);
    CHECK(std::abs(fidelity(labels_of(v), ref) + l1) <= 1e-12);
    CHECK(fidelity(labels_of(v), ref) <= 0.0);
  }
}

TEST_CASE("accuracy and coverage") {
  auto r = accuracy(labels_of({0, 1}), GroundTruth({0, 1}));
  CHECK(*r.accuracy == 1.0);
  CHECK(r.coverage == 1.0);
  r = accuracy(labels_of({0, kUncoded}), GroundTruth({1, 1}));
  CHECK(*r.accuracy == 0.0);
  CHECK(r.coverage == 0.5);
  r = accuracy(labels_of({kUncoded}), GroundTruth({1}));
  CHECK(!r.accuracy);
  CHECK_THROWS(accuracy(labels_of({0}), GroundTruth({0, 1})));
}

TEST_CASE("Thompson accuracy tracks the expected sampling accuracy") {
  GaussianSimConfig cfg;
  cfg.seed = 17;
  const auto data = simulate_gaussian(cfg);
  const auto a = thompson_rule(data.probs, 99);
  double expected = 0.0;
  for (std::size_t i = 0; i < data.probs.rows(); ++i)
    for (double q : data.probs.row(i)) expected += q * q;
  expected /= static_cast<double>(cfg.n);
  const double se = std::sqrt(expected * (1 - expected) / static_cast<double>(cfg.n));
  CHECK(std::abs(*accuracy(a, data.truth).accuracy - expected) <= 3 * se);
}

TEST_CASE("MAE") {
  const auto onehot = ProbabilityMatrix::from_rows({{1, 0}, {0, 1}, {1, 0}});
  CHECK(mae(onehot, GroundTruth({0, 1, 0})) == 0.0);
  CHECK(mae(onehot, GroundTruth({1, 1, 0})) == doctest::Approx(1.0 / 3));
  CHECK_THROWS(mae(onehot, GroundTruth({0})));

  // Prior-valued rows with truth from the prior: MAE -> 1 - sum p^2.
  const std::vector<double> p{0.5, 0.3, 0.2};
  const std::size_t n = 200000;
  std::vector<double> v;
  std::vector<ClassIndex> truth;
  std::mt19937_64 gen(4);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  for (std::size_t i = 0; i < n; ++i) {
    v.insert(v.end(), p.begin(), p.end());
    truth.push_back(draw(gen));
  }
  const ProbabilityMatrix m(n, 3, v);
  CHECK(std::abs(mae(m, GroundTruth(truth)) - (1 - 0.38)) < 0.005);

  // Row order does not matter.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<ClassIndex> t2(n);
  for (std::size_t i = 0; i < n; ++i) t2[i] = truth[perm[i]];
  CHECK(mae(m.select(perm), GroundTruth(t2)) == doctest::Approx(mae(m, GroundTruth(truth))).epsilon(1e-12));
}

TEST_CASE("calibration curve") {
  const auto onehot = ProbabilityMatrix::from_rows({{1, 0}, {0, 1}, {1, 0}});
  const auto bins = calibration_curve(onehot, GroundTruth({0, 1, 0}), 0, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[0].count == 1);
  CHECK(*bins[0].empirical_frequency == 0.0);
  CHECK(bins[9].count == 2);
  CHECK(*bins[9].empirical_frequency == 1.0);
  for (std::size_t b = 1; b < 9; ++b) {
    CHECK(bins[b].count == 0);
    CHECK(!bins[b].empirical_frequency);
  }
  CHECK(bins[0].bin_center == doctest::Approx(0.05));
  CHECK_THROWS(calibration_curve(onehot, GroundTruth({0, 1, 0}), 0, 0));

  // Constant prior rows: one bin, frequency near the prior.
  std::vector<double> v;
  std::vector<ClassIndex> truth;
  std::mt19937_64 gen(6);
  for (int i = 0; i < 20000; ++i) {
    v.push_back(0.7);
    v.push_back(0.3);
    truth.push_back(std::uniform_real_distribution<double>(0, 1)(gen) < 0.7 ? 0 : 1);
  }
  const auto c = calibration_curve(ProbabilityMatrix(20000, 2, v), GroundTruth(truth), 0, 10);
  std::size_t nonempty = 0;
  for (const auto& b : c) nonempty += b.count > 0;
  CHECK(nonempty == 1);
  CHECK(c[7].count == 20000);
  CHECK(std::abs(*c[7].empirical_frequency - 0.7) < 0.02);
}

TEST_CASE("Bayes posteriors pass the binomial calibration check") {
  std::size_t cells = 0, passed = 0;
  for (Seed s = 0; s < 20; ++s) {
    GaussianSimConfig cfg;
    cfg.n = 20000;
    cfg.seed = s;
    const auto data = simulate_gaussian(cfg);
    for (ClassIndex y = 0; y < 6; ++y) {
      for (const auto& b : calibration_curve(data.probs, data.truth, y, 10)) {
        if (b.count == 0) continue;
        ++cells;
        const double p = b.mean_predicted;
        passed += std::abs(*b.empirical_frequency - p) <= 3 * std::sqrt(p * (1 - p) / b.count) + 1e-12;
      }
    }
  }
  CHECK(static_cast<double>(passed) >= 0.95 * static_cast<double>(cells));
}

TEST_CASE("evaluate bundles metrics") {
  const auto probs = ProbabilityMatrix::from_rows({{0.9, 0.1}, {0.4, 0.6}});
  const GroundTruth truth({0, 0});
  const auto r = evaluate(labels_of({0, kUncoded}), ref_of({0.5, 0.5}), &truth, &probs);
  CHECK(r.coverage == 0.5);
  CHECK(*r.accuracy == 1.0);
  CHECK(r.per_class_bias == std::vector<double>{0.5, -0.5});
  CHECK(r.fidelity == -1.0);
  CHECK(*r.mae == doctest::Approx(0.35));
  const auto none = evaluate(labels_of({kUncoded, kUncoded}), ref_of({0.5, 0.5}));
  CHECK(none.coverage == 0.0);
  CHECK(none.fidelity == -1.0);
}

TEST_CASE("chunked reductions do not depend on the thread count") {
  std::mt19937_64 gen(9);
  const auto m = oracle::random_matrix(gen, 50000, 5, false);
  std::vector<ClassIndex> t(50000);
  for (auto& y : t) y = static_cast<ClassIndex>(gen() % 5);
  omp_set_num_threads(4);
  const auto par = aggregate_posterior(m).weights();
  const double par_mae = mae(m, GroundTruth(t));
  omp_set_num_threads(1);
  CHECK(par == aggregate_posterior(m).weights());
  CHECK(par_mae == mae(m, GroundTruth(t)));
  for (std::size_t y = 0; y < 5; ++y)
    CHECK(par[y] == doctest::Approx(serial::aggregate_posterior(m)[y]).epsilon(1e-12));
  CHECK(par_mae == doctest::Approx(serial::mae(m, GroundTruth(t))).epsilon(1e-12));
}

TEST_CASE("Philox4x32-10 known answers") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                             {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                             {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("row streams") {
  RowStream a(7, 3, StreamTag::Thompson), b(7, 3, StreamTag::Thompson);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  RowStream c(7, 3, StreamTag::TopK), d(7, 4, StreamTag::Thompson), e(8, 3, StreamTag::Thompson);
  RowStream f(7, 3, StreamTag::Thompson);
  const double u = f.uniform();
  CHECK(c.uniform() != u);
  CHECK(d.uniform() != u);
  CHECK(e.uniform() != u);

  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  RowStream g(1, 0, StreamTag::SimFeatures);
  for (int i = 0; i < n; ++i) {
    const double z = g.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.01);
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
}

TEST_CASE("CSV parsing") {
  std::istringstream in("a,\"b,c\",d\r\n1,\"x \"\"q\"\"\",3\n\n4,5,6");
  const auto t = parse_csv(in);
  CHECK(t.header == std::vector<std::string>{"a", "b,c", "d"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x \"q\"");
  CHECK(t.rows[1][2] == "6");
  std::ostringstream out;
  write_csv(out, t);
  CHECK(out.str() == "a,\"b,c\",d\n1,\"x \"\"q\"\"\",3\n4,5,6\n");

  std::istringstream ragged("a,b\n1,2\n3\n");
  try {
    parse_csv(ragged);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream open_quote("a\n\"x\n");
  CHECK_THROWS_AS(parse_csv(open_quote), SchemaError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_csv(empty), SchemaError);
}

TEST_CASE("input schema decoding") {
  auto decode = [](const std::string& s) {
    std::istringstream in(s);
    return decode_input(parse_csv(in));
  };
  const auto d = decode("id,prob_x,prob_y,true_label,group\n7,0.25,0.75,y,g1\n8,1,0,x,g2\n");
  CHECK(d.probs.class_names() == std::vector<std::string>{"x", "y"});
  CHECK(d.truth->labels == std::vector<ClassIndex>{1, 0});
  CHECK(d.groups->groups == std::vector<std::string>{"g1", "g2"});

  auto line_of = [&](const std::string& s) {
    try {
      decode(s);
    } catch (const SchemaError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(line_of("prob_a\n1\n").find("at least two") != std::string::npos);
  CHECK(line_of("prob_a,prob_b\n0.5,0.5\n0.5,0.6\n").rfind("line 3", 0) == 0);
  CHECK(line_of("prob_a,prob_b\n0.5,zz\n").rfind("line 2", 0) == 0);
  CHECK(line_of("prob_a,prob_b,true_label\n0.5,0.5,c\n").rfind("line 2", 0) == 0);
  CHECK(line_of("prob_a,prob_UNCODED\n0.5,0.5\n").find("reserved") != std::string::npos);
  CHECK(line_of("prob_a,prob_a\n0.5,0.5\n").find("duplicate") != std::string::npos);
  CHECK(line_of("prob_a,prob_b\n").find("no data") != std::string::npos);

  const auto labeled = decode("prob_a,prob_b,label_argmax,label_t\n0.5,0.5,a,UNCODED\n");
  const auto cols = decode_label_columns(labeled.table, labeled.probs.class_names());
  REQUIRE(cols.size() == 2);
  CHECK(cols[0].rule_id == "argmax");
  CHECK(cols[1].labels == std::vector<ClassIndex>{kUncoded});
}

TEST_CASE("doubles round-trip through text") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen);
    CHECK(std::stod(format_double(v)) == v);
  }
}
