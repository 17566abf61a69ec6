#include "fedsec/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedsec/errors.hpp"

namespace fedsec {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view field) {
  field = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("not a number: '" + std::string(field) + "'");
  }
  return value;
}

long long parse_int(std::string_view field) {
  field = trim(field);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("not an integer: '" + std::string(field) + "'");
  }
  return value;
}

Dataset<double> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError("dataset CSV header must end with a `label` column");
  }
  const auto n_features = header.size() - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    for (std::size_t f = 0; f < n_features; ++f) values.push_back(parse_double(fields[f]));
    labels.push_back(static_cast<int>(parse_int(fields.back())));
  }
  Dataset<double> out;
  const auto rows = static_cast<Eigen::Index>(labels.size());
  out.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, static_cast<Eigen::Index>(n_features));
  out.labels = Eigen::Map<Eigen::VectorXi>(labels.data(), rows);
  return out;
}

Dataset<double> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset<double>& data,
                       const std::vector<std::string>& feature_names) {
  for (Eigen::Index c = 0; c < data.dim(); ++c) {
    if (static_cast<std::size_t>(c) < feature_names.size()) {
      out << feature_names[static_cast<std::size_t>(c)];
    } else {
      out << 'f' << c;
    }
    out << ',';
  }
  out << "label\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << format_number(data.features(r, c)) << ',';
    out << data.labels(r) << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset<double>& data,
                       const std::vector<std::string>& feature_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset_csv(out, data, feature_names);
}

std::vector<Candidate> read_candidates_csv(std::istream& in) {
  std::vector<Candidate> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    if (line_no == 1 && fields[0] == "arrival_index") continue;
    Candidate c;
    c.arrival_index = static_cast<int>(parse_int(fields[0]));
    c.client_id = fields[1];
    c.probe_accuracy = parse_double(fields[2]);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace fedsec
