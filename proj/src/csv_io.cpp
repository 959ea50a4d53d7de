#include "discretize/csv_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace discretize {
namespace {

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

double parse_probability(const std::string& cell, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (begin == end || ec != std::errc() || ptr != end)
    throw SchemaError(line_prefix(line) + "column " + column + ": '" + cell + "' is not a number");
  return v;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  return std::nullopt;
}

CsvTable parse_csv(std::istream& is) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_line;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool after_quote = false;
  std::size_t line = 1;
  std::size_t start_line = 1;
  char ch = 0;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
      record_line.push_back(start_line);
    }
    record.clear();
    start_line = line;
  };

  while (is.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (is.peek() == '"') {
          is.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      ++line;
      end_record();
    } else if (ch == '\r') {
      if (is.peek() != '\n') throw SchemaError(line_prefix(line) + "stray carriage return");
    } else if (ch == '"') {
      if (field_started || after_quote)
        throw SchemaError(line_prefix(line) + "quote inside an unquoted field");
      in_quotes = true;
      field_started = true;
    } else {
      if (after_quote) throw SchemaError(line_prefix(line) + "text after a closing quote");
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw SchemaError(line_prefix(start_line) + "unterminated quoted field");
  if (field_started || !record.empty() || !field.empty()) end_record();

  CsvTable table;
  if (records.empty()) throw SchemaError("line 1: missing header");
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw SchemaError(line_prefix(record_line[r]) + "expected " +
                        std::to_string(table.header.size()) + " fields, found " +
                        std::to_string(records[r].size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return parse_csv(is);
}

void write_csv(std::ostream& os, const CsvTable& table) {
  auto cell = [&](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
      os << s;
      return;
    }
    os << '"';
    for (char c : s) {
      if (c == '"') os << '"';
      os << c;
    }
    os << '"';
  };
  auto row = [&](const std::vector<std::string>& r) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) os << ',';
      cell(r[j]);
    }
    os << '\n';
  };
  row(table.header);
  for (const auto& r : table.rows) row(r);
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_csv(os, table);
  os.flush();
  if (!os) throw IoError("failed writing " + path);
}

InputData decode_input(CsvTable table) {
  std::vector<std::size_t> prob_cols;
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const auto& h = table.header[j];
    if (!starts_with(h, kProbPrefix)) continue;
    std::string name = h.substr(std::char_traits<char>::length(kProbPrefix));
    if (name.empty()) throw SchemaError("line 1: column '" + h + "' has an empty class name");
    if (name == kUncodedLiteral)
      throw SchemaError("line 1: class name UNCODED is reserved");
    if (!seen.emplace(name, j).second)
      throw SchemaError("line 1: duplicate class column '" + h + "'");
    prob_cols.push_back(j);
    names.push_back(std::move(name));
  }
  if (prob_cols.size() < 2)
    throw SchemaError("line 1: need at least two prob_<class> columns, found " +
                      std::to_string(prob_cols.size()));
  if (table.rows.empty()) throw SchemaError("line 2: no data rows");

  const std::size_t n = table.rows.size();
  const std::size_t k = prob_cols.size();
  std::vector<double> values(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c)
      values[i * k + c] = parse_probability(table.rows[i][prob_cols[c]], i + 2,
                                            table.header[prob_cols[c]]);

  InputData out;
  try {
    out.probs = ProbabilityMatrix(n, k, std::move(values), names);
  } catch (const SchemaError& e) {
    // Matrix errors name a 0-based row; report the file line instead.
    std::string msg = e.what();
    if (starts_with(msg, "row ")) {
      std::size_t row = 0;
      std::size_t pos = 4;
      while (pos < msg.size() && std::isdigit(static_cast<unsigned char>(msg[pos])))
        row = row * 10 + static_cast<std::size_t>(msg[pos++] - '0');
      msg = line_prefix(row + 2) + msg.substr(pos + (pos < msg.size() && msg[pos] == ':' ? 2 : 0));
    }
    throw SchemaError(msg);
  }

  if (auto col = table.column(kTruthColumn)) {
    std::unordered_map<std::string, ClassIndex> index;
    for (std::size_t c = 0; c < k; ++c) index.emplace(names[c], static_cast<ClassIndex>(c));
    std::vector<ClassIndex> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = table.rows[i][*col];
      auto it = index.find(v);
      if (it == index.end())
        throw SchemaError(line_prefix(i + 2) + "true_label '" + v + "' is not a class");
      truth[i] = it->second;
    }
    out.truth = GroundTruth(std::move(truth));
  }
  if (auto col = table.column(kGroupColumn)) {
    GroupKeys g;
    g.groups.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (table.rows[i][*col].empty())
        throw SchemaError(line_prefix(i + 2) + "empty group value");
      g.groups.push_back(table.rows[i][*col]);
    }
    out.groups = std::move(g);
  }
  out.table = std::move(table);
  return out;
}

InputData read_input_file(const std::string& path) { return decode_input(read_csv_file(path)); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string label_text(ClassIndex y, const std::vector<std::string>& class_names) {
  return y == kUncoded ? std::string(kUncodedLiteral) : class_names[static_cast<std::size_t>(y)];
}

std::vector<LabelAssignment> decode_label_columns(const CsvTable& table,
                                                  const std::vector<std::string>& class_names) {
  std::unordered_map<std::string, ClassIndex> index;
  for (std::size_t c = 0; c < class_names.size(); ++c)
    index.emplace(class_names[c], static_cast<ClassIndex>(c));
  std::vector<LabelAssignment> out;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (!starts_with(table.header[j], kLabelPrefix)) continue;
    LabelAssignment a;
    a.rule_id = table.header[j].substr(std::char_traits<char>::length(kLabelPrefix));
    a.labels.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& v = table.rows[i][j];
      if (v == kUncodedLiteral) {
        a.labels.push_back(kUncoded);
        continue;
      }
      auto it = index.find(v);
      if (it == index.end())
        throw SchemaError(line_prefix(i + 2) + table.header[j] + " '" + v + "' is not a class");
      a.labels.push_back(it->second);
    }
    for (const auto& prev : out)
      if (prev.rule_id == a.rule_id)
        throw SchemaError("line 1: duplicate column '" + table.header[j] + "'");
    out.push_back(std::move(a));
  }
  return out;
}

CsvTable probabilities_table(const ProbabilityMatrix& probs, const GroundTruth* truth) {
  CsvTable t;
  for (const auto& name : probs.class_names()) t.header.push_back(kProbPrefix + name);
  if (truth) t.header.push_back(kTruthColumn);
  t.rows.resize(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto& r = t.rows[i];
    r.reserve(t.header.size());
    for (double v : probs.row(i)) r.push_back(format_double(v));
    if (truth) r.push_back(label_text(truth->labels[i], probs.class_names()));
  }
  return t;
}

}  // namespace discretize
