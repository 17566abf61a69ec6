#pragma once

// CSV helpers shared by the command-line tools.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fedsec/dataset.hpp"
#include "fedsec/selection_policies.hpp"

namespace fedsec {

// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_number(double value);

std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

// Header row, feature columns, final column `label`.
Dataset<double> read_dataset_csv(const std::filesystem::path& path);
Dataset<double> read_dataset_csv(std::istream& in);
void write_dataset_csv(std::ostream& out, const Dataset<double>& data,
                       const std::vector<std::string>& feature_names = {});
void write_dataset_csv(const std::filesystem::path& path, const Dataset<double>& data,
                       const std::vector<std::string>& feature_names = {});

// Lines `arrival_index,client_id,probe_accuracy`; an optional header row is
// skipped.
std::vector<Candidate> read_candidates_csv(std::istream& in);

}  // namespace fedsec
