// Wall-clock comparison of the OpenMP kernels against their serial versions.
// Usage: bench_kernels [rows] [repeats]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "discretize/heuristic.hpp"
#include "discretize/joint.hpp"
#include "discretize/metrics.hpp"
#include "discretize/rules.hpp"
#include "discretize/simulator.hpp"

using namespace discretize;

namespace {

double best_ms(std::size_t repeats, const std::function<void()>& body) {
  double best = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

// Keeps results observable so the calls are not optimized away.
volatile std::size_t g_sink = 0;

}  // namespace

int main(int argc, char** argv) {
  const std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
  const std::size_t repeats = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 5;

  GaussianSimConfig sim;
  sim.n = rows;
  sim.seed = 1;
  const auto data = simulate_gaussian(sim);
  const auto ties = default_tie_order(data.probs);
  JointConfig joint;
  joint.batch_size = 10000;

  GaussianSimConfig small = sim;
  small.n = 10000;
  const auto train = simulate_gaussian(small);
  const auto model =
      fit_labeler(train.probs, argmax_rule(train.probs, ties), TrainConfig{.epochs = 100}).model;

  struct Kernel {
    std::string name;
    std::function<void()> serial, parallel;
  };
  const std::vector<Kernel> kernels{
      {"simulate_gaussian", [&] { g_sink = serial::simulate_gaussian(sim).truth.labels.size(); },
       [&] { g_sink = simulate_gaussian(sim).truth.labels.size(); }},
      {"aggregate_posterior", [&] { g_sink = serial::aggregate_posterior(data.probs).classes(); },
       [&] { g_sink = aggregate_posterior(data.probs).classes(); }},
      {"mae", [&] { g_sink = static_cast<std::size_t>(serial::mae(data.probs, data.truth) * 1e6); },
       [&] { g_sink = static_cast<std::size_t>(mae(data.probs, data.truth) * 1e6); }},
      {"argmax_rule", [&] { g_sink = serial::argmax_rule(data.probs, ties).size(); },
       [&] { g_sink = argmax_rule(data.probs, ties).size(); }},
      {"thompson_rule", [&] { g_sink = serial::thompson_rule(data.probs, 3).size(); },
       [&] { g_sink = thompson_rule(data.probs, 3).size(); }},
      {"topk_rule(2)", [&] { g_sink = serial::topk_rule(data.probs, 2, 3, ties).size(); },
       [&] { g_sink = topk_rule(data.probs, 2, 3, ties).size(); }},
      {"apply_labeler", [&] { g_sink = serial::apply_labeler(model, data.probs, ties).size(); },
       [&] { g_sink = apply_labeler(model, data.probs, ties).size(); }},
      {"solve_joint(match)", [&] { g_sink = serial::solve_joint(data.probs, joint, ties).size(); },
       [&] { g_sink = solve_joint(data.probs, joint, ties).size(); }},
  };

  std::printf("rows=%zu repeats=%zu threads=%d\n", rows, repeats, omp_get_max_threads());
  std::printf("%-22s %12s %12s %8s\n", "kernel", "serial_ms", "openmp_ms", "speedup");
  for (const auto& k : kernels) {
    const double s = best_ms(repeats, k.serial);
    const double p = best_ms(repeats, k.parallel);
    std::printf("%-22s %12.2f %12.2f %8.2f\n", k.name.c_str(), s, p, s / p);
  }
  return 0;
}
