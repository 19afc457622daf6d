#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "donorspin/sequences.hpp"

namespace donorspin {

// Delimited text tables: `#` comment lines, one header row, numeric rows.
// Column names carry their unit as a suffix (`tau_s`, `energy_J`, `field_T`,
// `rate_per_s`, `frequency_Hz`); a fixed set of dimensionless names
// (p_up, p_down, amplitude, ...) needs none.
struct Column {
  std::string name;
  std::string unit;  // "1" for dimensionless
  std::vector<double> values;
};

struct DataTable {
  std::vector<std::string> comments;  // without the leading '#'
  std::vector<Column> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().values.size(); }
  bool has(std::string_view name) const;
  const Column& column(std::string_view name) const;  // ValidationError if absent
  void add(std::string name, std::vector<double> values);
};

// Unit of a column name, or ValidationError naming the column.
std::string column_unit(std::string_view name);

// Shortest text that parses back to the same double.
std::string format_double(double v);

std::string format_table(const DataTable& t);
// Comma or tab separated. `source` prefixes line-numbered error messages.
DataTable parse_table(std::string_view text, std::string_view source = "<input>");

DataTable read_table(const std::filesystem::path& path);  // IoError if unreadable
void write_table(const std::filesystem::path& path, const DataTable& t);  // IoError

DataTable trace_to_table(const ExperimentTrace& trace);
// First column is the abscissa; p_up is required, p_down / p_up_stderr /
// photon_counts are optional.
ExperimentTrace table_to_trace(const DataTable& t, std::string experiment = {});
ExperimentTrace ingest_trace(const std::filesystem::path& path);

// Writes `content` to `path` through a temporary file and a rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace donorspin
