#include "donorspin/trace_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "donorspin/errors.hpp"

namespace donorspin {

namespace {

struct Suffix {
  std::string_view suffix;
  std::string_view unit;
};

constexpr std::array kSuffixes{
    Suffix{"_rad_per_s", "rad/s"}, Suffix{"_per_s", "s^-1"}, Suffix{"_Hz", "Hz"},
    Suffix{"_s", "s"},             Suffix{"_J", "J"},        Suffix{"_T", "T"},
    Suffix{"_rad", "rad"},
};

constexpr std::array<std::string_view, 11> kDimensionless{
    "p_up",      "p_down",          "p_up_stderr", "p_down_stderr", "photon_counts",
    "amplitude", "amplitude_stderr", "fidelity",   "phase",         "value",
    "max_p_up",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) return out;
    pos = next + 1;
  }
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

}  // namespace

bool DataTable::has(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return true;
  }
  return false;
}

const Column& DataTable::column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw ValidationError(std::string(name), "no such column");
}

void DataTable::add(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != rows()) {
    throw ValidationError(name, "column length differs from the table");
  }
  std::string unit = column_unit(name);
  columns.push_back({std::move(name), std::move(unit), std::move(values)});
}

std::string column_unit(std::string_view name) {
  for (auto d : kDimensionless) {
    if (name == d) return "1";
  }
  for (const auto& s : kSuffixes) {
    if (name.size() > s.suffix.size() && name.ends_with(s.suffix)) return std::string(s.unit);
  }
  throw ValidationError(std::string(name),
                        "column has no unit suffix (_s, _J, _T, _Hz, _per_s, _rad_per_s, _rad)");
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return std::string(buf.data(), ptr);
}

std::string format_table(const DataTable& t) {
  std::string out;
  for (const auto& c : t.comments) out += "#" + c + "\n";
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    if (j) out += ',';
    out += t.columns[j].name;
  }
  out += '\n';
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      if (j) out += ',';
      out += format_double(t.columns[j].values[i]);
    }
    out += '\n';
  }
  return out;
}

DataTable parse_table(std::string_view text, std::string_view source) {
  DataTable t;
  IssueCollector issues;
  std::size_t line_no = 0;
  bool have_header = false;
  char sep = ',';
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() == '#') {
      if (!have_header) t.comments.emplace_back(line.substr(1));
      continue;
    }
    if (trim(line).empty()) continue;
    if (!have_header) {
      sep = line.find(',') == std::string_view::npos && line.find('\t') != std::string_view::npos ? '\t' : ',';
      for (auto name : split(line, sep)) {
        if (name.empty()) {
          issues.add(where(source, line_no), "empty column name");
          continue;
        }
        try {
          t.columns.push_back({std::string(name), column_unit(name), {}});
        } catch (const ValidationError& e) {
          for (const auto& i : e.issues()) issues.add(where(source, line_no) + " column '" + i.key + "'", i.message);
        }
      }
      issues.throw_if_any();
      have_header = true;
      continue;
    }
    const auto fields = split(line, sep);
    if (fields.size() != t.columns.size()) {
      issues.add(where(source, line_no), "expected " + std::to_string(t.columns.size()) +
                                             " fields, found " + std::to_string(fields.size()));
      continue;
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      const auto f = fields[j];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        issues.add(where(source, line_no),
                   "column '" + t.columns[j].name + "': not a finite number '" + std::string(f) + "'");
        v = 0.0;
      }
      t.columns[j].values.push_back(v);
    }
  }
  if (!have_header) issues.add(std::string(source), "no header row");
  issues.throw_if_any();
  return t;
}

DataTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str(), path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  const auto tmp = std::filesystem::path(path.string() + ".part");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

void write_table(const std::filesystem::path& path, const DataTable& t) {
  write_text_file(path, format_table(t));
}

DataTable trace_to_table(const ExperimentTrace& trace) {
  trace.validate();
  DataTable t;
  t.comments.push_back(" experiment: " + trace.experiment);
  t.add(trace.abscissa_name, trace.abscissa);
  t.add("p_up", trace.p_up);
  t.add("p_down", trace.p_down);
  t.add("p_up_stderr", trace.p_up_stderr.empty() ? std::vector<double>(trace.size(), 0.0)
                                                   : trace.p_up_stderr);
  if (!trace.photon_counts.empty()) t.add("photon_counts", trace.photon_counts);
  return t;
}

ExperimentTrace table_to_trace(const DataTable& t, std::string experiment) {
  if (t.columns.empty()) throw ValidationError("table", "no columns");
  if (t.columns.front().unit == "1") {
    throw ValidationError(t.columns.front().name, "first column must be a unit-suffixed abscissa");
  }
  ExperimentTrace tr;
  tr.experiment = std::move(experiment);
  if (tr.experiment.empty()) {
    for (const auto& c : t.comments) {
      const auto s = trim(c);
      if (s.starts_with("experiment:")) tr.experiment = std::string(trim(s.substr(11)));
    }
  }
  tr.abscissa_name = t.columns.front().name;
  tr.abscissa = t.columns.front().values;
  tr.p_up = t.column("p_up").values;
  tr.p_down = t.has("p_down") ? t.column("p_down").values : std::vector<double>(t.rows(), 0.0);
  if (t.has("p_up_stderr")) tr.p_up_stderr = t.column("p_up_stderr").values;
  if (t.has("photon_counts")) tr.photon_counts = t.column("photon_counts").values;
  tr.validate();
  return tr;
}

ExperimentTrace ingest_trace(const std::filesystem::path& path) {
  return table_to_trace(read_table(path));
}

}  // namespace donorspin
