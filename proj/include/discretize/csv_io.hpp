#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "discretize/core.hpp"

namespace discretize {

/// Raw CSV contents: header plus string cells, every row as wide as the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, if present.
  std::optional<std::size_t> column(const std::string& name) const;
};

/// Comma-delimited, double-quote escaping, '\n' or "\r\n" line ends.
/// Throws SchemaError with a 1-based line number on malformed input.
CsvTable parse_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

/// Writes with '\n' line ends, quoting only cells that need it.
void write_csv(std::ostream& os, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

inline constexpr const char* kProbPrefix = "prob_";
inline constexpr const char* kLabelPrefix = "label_";
inline constexpr const char* kTruthColumn = "true_label";
inline constexpr const char* kGroupColumn = "group";

/// A probability file decoded against the input schema.
struct InputData {
  CsvTable table;
  ProbabilityMatrix probs;
  std::optional<GroundTruth> truth;
  std::optional<GroupKeys> groups;
};

/// Decodes `prob_<class>` columns (at least two), optional `true_label` and
/// `group`. Other columns are carried along untouched.
InputData decode_input(CsvTable table);
InputData read_input_file(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Label text for a class index (class name, or UNCODED).
std::string label_text(ClassIndex y, const std::vector<std::string>& class_names);

/// Parses `label_<rule>` columns back into assignments, in column order.
std::vector<LabelAssignment> decode_label_columns(const CsvTable& table,
                                                  const std::vector<std::string>& class_names);

/// Table in the input schema: prob_<name> columns then true_label.
CsvTable probabilities_table(const ProbabilityMatrix& probs, const GroundTruth* truth);

}  // namespace discretize
