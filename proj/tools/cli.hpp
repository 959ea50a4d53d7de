#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "discretize/core.hpp"
#include "discretize/csv_io.hpp"

namespace discretize::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kSchema = 2,
  kInfeasible = 3,
  kIo = 4,
};

/// Runs `discretize <subcommand> ...`; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A parsed --reference value.
struct ReferenceSpec {
  enum class Kind { Aggregate, AggregateGroup, Truth, Uniform, Custom } kind = Kind::Aggregate;
  std::vector<double> weights;  // Custom only
};

/// aggregate | aggregate:group | truth | uniform | custom:w1,w2,...
ReferenceSpec parse_reference(const std::string& text);

/// Metrics document shared by `discretize` and `evaluate`: it depends only
/// on the probabilities, truth, labels, and explicit reference, so
/// re-evaluating a labeled file reproduces it.
nlohmann::ordered_json metrics_json(const InputData& data,
                                    const std::vector<LabelAssignment>& labels,
                                    const std::optional<ReferenceDistribution>& explicit_reference);

}  // namespace discretize::cli
