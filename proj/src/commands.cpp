#include "donorspin/commands.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "donorspin/errors.hpp"
#include "donorspin/trace_io.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void note(const CommandOptions& opt, const std::string& msg) {
  if (opt.log) *opt.log << msg << '\n';
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Staging directory renamed into place by commit(); removed otherwise.
class RunDir {
 public:
  RunDir(const fs::path& base, std::string name) : base_(base), name_(std::move(name)) {
    std::error_code ec;
    fs::create_directories(base_, ec);
    if (ec) throw IoError("cannot create output directory " + base_.string() + ": " + ec.message());
    staging_ = base_ / (".staging-" + name_ + "-" + std::to_string(::getpid()));
    fs::remove_all(staging_, ec);
    fs::create_directory(staging_, ec);
    if (ec) throw IoError("cannot create " + staging_.string() + ": " + ec.message());
  }
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;
  ~RunDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& path() const { return staging_; }

  fs::path commit() {
    fs::path target = base_ / name_;
    for (int i = 1; fs::exists(target); ++i) target = base_ / (name_ + "-" + std::to_string(i));
    std::error_code ec;
    fs::rename(staging_, target, ec);
    if (ec) throw IoError("cannot move results to " + target.string() + ": " + ec.message());
    committed_ = true;
    return target;
  }

 private:
  fs::path base_;
  std::string name_;
  fs::path staging_;
  bool committed_ = false;
};

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

fs::path output_base(const CommandOptions& opt, const RunConfig& c) { return opt.out ? *opt.out : c.output_dir; }

std::string run_name(std::string_view command, const RunConfig& c) {
  return utc_stamp() + "-" + std::string(command) + "-" + c.hash();
}

json meta_document(std::string_view command, const RunConfig& c) {
  return {{"command", command},
          {"seed", c.seed},
          {"config_hash", c.hash()},
          {"config", c.resolved},
          {"material", material_to_json(c.material)},
          {"setup", c.setup.to_json()}};
}

std::vector<double> amplitudes(const std::vector<FringeWindow>& w) {
  std::vector<double> out;
  for (const auto& x : w) out.push_back(x.amplitude);
  return out;
}

DataTable windows_table(const std::vector<FringeWindow>& windows, const std::string& experiment) {
  DataTable t;
  t.comments.push_back(" experiment: " + experiment);
  std::vector<double> c, a, e, p;
  for (const auto& w : windows) {
    c.push_back(w.center);
    a.push_back(w.amplitude);
    e.push_back(w.amplitude_error);
    p.push_back(w.phase);
  }
  t.add("center_s", c);
  t.add("amplitude", a);
  t.add("amplitude_stderr", e);
  t.add("phase_rad", p);
  return t;
}

json envelope_fit(const std::vector<FringeWindow>& windows, const std::string& model,
                  std::string_view key) {
  if (model.empty() || windows.size() < 3) return nullptr;
  std::vector<double> x;
  for (const auto& w : windows) x.push_back(w.center);
  const auto y = amplitudes(windows);
  const FitResult f = fit_curve(CurveModel::guess(parse_model_kind(model), x, y), x, y);
  json j = f.to_json();
  j[std::string(key)] = f.value("decay_time");
  j[std::string(key) + "_error"] = f.uncertainty("decay_time");
  return j;
}

// Sweep axis column: the leaf key with the unit suffix of its dimension, in SI.
std::pair<std::string, std::vector<double>> axis_column(const std::string& axis, const std::string& unit,
                                                        const std::vector<std::string>& values) {
  std::vector<double> si;
  if (unit.empty()) {
    for (const auto& v : values) si.push_back(std::stod(v));
    return {"value", si};
  }
  struct Candidate {
    Dimension dim;
    const char* suffix;
  };
  static constexpr Candidate kCandidates[]{
      {Dimension::time, "_s"},       {Dimension::field, "_T"},  {Dimension::angular_frequency, "_rad_per_s"},
      {Dimension::rate, "_per_s"},   {Dimension::energy, "_J"}, {Dimension::angle, "_rad"},
  };
  const std::string leaf = axis.substr(axis.rfind('.') + 1);
  for (const auto& c : kCandidates) {
    try {
      si.clear();
      for (const auto& v : values) si.push_back(parse_quantity(v + " " + unit, c.dim, axis));
      return {leaf + c.suffix, si};
    } catch (const ValidationError&) {
    }
  }
  throw ValidationError(axis, "unit '" + unit + "' has no column suffix");
}

bool is_decay(ModelKind k) {
  return k == ModelKind::exp_decay || k == ModelKind::gaussian_decay || k == ModelKind::cubed_exp_decay;
}

// Start from the plateau at the largest abscissa and the 1/e point above it.
void free_decay_offset(CurveModel& m, std::span<const double> x, std::span<const double> y) {
  const auto lo = static_cast<std::size_t>(std::min_element(x.begin(), x.end()) - x.begin());
  const auto hi = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
  const double offset = y[hi];
  const double amp = y[lo] - offset;
  double decay = 0.5 * (x[hi] - x[lo]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (amp != 0.0 && (y[i] - offset) / amp <= std::exp(-1.0) && x[i] > 0.0) decay = std::min(decay, x[i]);
  }
  m.parameter("amplitude").initial = amp;
  if (decay > 0.0) m.parameter("decay_time").initial = decay;
  m.parameter("offset").initial = offset;
  m.parameter("offset").fixed = false;
}

}  // namespace

json resolve_document(const CommandOptions& opt) {
  json doc = load_config_document(opt.config);
  IssueCollector issues;
  for (const auto& s : opt.overrides) {
    try {
      apply_override(doc, s);
    } catch (const ValidationError& e) {
      for (const auto& i : e.issues()) issues.add(i.key, i.message);
    }
  }
  issues.throw_if_any();
  if (opt.seed) doc["seed"] = *opt.seed;
  if (opt.jobs) doc["jobs"] = *opt.jobs;
  return doc;
}

json simulate_into(const RunConfig& c, const fs::path& dir) {
  const ExperimentKind kind = c.experiment.value();
  const std::string name(to_string(kind));
  const ExperimentSetup& s = c.setup;
  const auto bath = c.bath_model();
  json results = json::object();
  json summary = json::object();
  ExperimentTrace trace;

  switch (kind) {
    case ExperimentKind::rabi: {
      trace = run_rabi_sweep(s, c.rabi_energies, bath, c.bath.ensemble);
      std::size_t best = 0;
      for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace.p_up[i] > trace.p_up[best]) best = i;
      }
      summary["max_p_up"] = trace.p_up[best];
      summary["energy_at_max_J"] = trace.abscissa[best];
      break;
    }
    case ExperimentKind::ramsey: {
      const DelayScan scan{c.scan.centers, c.scan.step, c.scan.points};
      const RamseyResult r = run_ramsey(s, scan, c.scan.pulse_energy, bath, c.bath.ensemble);
      trace = r.trace;
      write_table(dir / "ramsey_windows.csv", windows_table(r.windows, name));
      // free-frequency fit on the first window when it spans two periods
      const std::size_t n = static_cast<std::size_t>(c.scan.points);
      if (c.scan.step * (c.scan.points - 1) >= 2.0 * 2.0 * M_PI / s.omega_e()) {
        const std::span<const double> x(trace.abscissa.data(), n), y(trace.p_up.data(), n);
        const FringeFit f = fit_fringe(x, y, std::nullopt, s.omega_e());
        summary["fringe_frequency_Hz"] = f.frequency / (2 * M_PI);
        summary["fringe_frequency_error_Hz"] = f.frequency_error / (2 * M_PI);
        results["fringe_fit"] = {{"frequency_Hz", f.frequency / (2 * M_PI)},
                                 {"frequency_error_Hz", f.frequency_error / (2 * M_PI)},
                                 {"amplitude", f.amplitude},
                                 {"amplitude_error", f.amplitude_error},
                                 {"phase_rad", f.phase},
                                 {"offset", f.offset}};
      }
      results["larmor_frequency_Hz"] = s.omega_e() / (2 * M_PI);
      const json env = envelope_fit(r.windows, c.scan.envelope_model, "t2_star_s");
      if (!env.is_null()) {
        results["envelope_fit"] = env;
        summary["t2_star_s"] = env["t2_star_s"];
        summary["t2_star_error_s"] = env["t2_star_s_error"];
      }
      break;
    }
    case ExperimentKind::echo: {
      const EchoScan scan{c.scan.centers, c.scan.step, c.scan.points};
      const EchoResult r = run_echo(s, scan, c.scan.pulse_energy, bath, c.bath.ensemble);
      trace = r.trace;
      write_table(dir / "echo_windows.csv", windows_table(r.windows, name));
      const json env = envelope_fit(r.windows, c.scan.envelope_model, "t2_s");
      if (!env.is_null()) {
        results["envelope_fit"] = env;
        summary["t2_s"] = env["t2_s"];
        summary["t2_error_s"] = env["t2_s_error"];
      }
      break;
    }
    case ExperimentKind::t1: {
      const T1Result r = run_t1_recovery(s, c.t1_waits);
      trace = r.trace;
      results["fit"] = r.fit.to_json();
      summary["t1_s"] = r.t1;
      summary["t1_error_s"] = r.t1_error;
      break;
    }
    case ExperimentKind::pump: {
      const PumpResult p = optical_pump(scramble(DensityMatrix()), s, s.pump.rabi, s.pump.duration);
      DataTable t;
      t.comments.push_back(" experiment: pump");
      t.add("time_s", p.curve_time);
      t.add("photon_rate_per_s", p.photon_rate);
      write_table(dir / "pump_trace.csv", t);
      summary["fidelity"] = p.fidelity;
      results["summary"] = summary;
      return results;
    }
  }
  write_table(dir / (name + "_trace.csv"), trace_to_table(trace));
  results["summary"] = summary;
  results["trace_metadata"] = trace.metadata;
  return results;
}

fs::path cmd_simulate(const CommandOptions& opt) {
  const RunConfig c = parse_run_config(resolve_document(opt));
  const std::string name(to_string(*c.experiment));
  note(opt, "simulate: " + name + " (config " + c.hash() + ", seed " + std::to_string(c.seed) + ")");
  RunDir dir(output_base(opt, c), run_name("simulate", c));
  write_json(dir.path() / "config.json", c.resolved);
  json meta = meta_document("simulate", c);
  meta["results"] = simulate_into(c, dir.path());
  write_json(dir.path() / (name + "_meta.json"), meta);
  return dir.commit();
}

fs::path cmd_estimate(const CommandOptions& opt) {
  const RunConfig c = parse_run_config(resolve_document(opt), false);
  if (c.estimate.theta2.empty()) throw ValidationError("estimate.theta2", "need at least one angle");
  note(opt, "estimate: config " + c.hash());
  RunDir dir(output_base(opt, c), run_name("estimate", c));
  write_json(dir.path() / "config.json", c.resolved);
  DecoherenceBudget base = decoherence_budget(c.material, c.estimate.theta2.front(), c.estimate.lattice,
                                              c.estimate.variant);
  base.t2_star = t2_star_theory(c.material, {c.estimate.dispersion});
  json budgets = json::array();
  std::string table;
  for (double theta : c.estimate.theta2) {
    DecoherenceBudget b = base;
    b.id = t2_instantaneous_diffusion(c.material, theta, c.estimate.variant);
    budgets.push_back(b.to_json());
    table += b.to_table() + "\n";
  }
  json report = {{"budgets", budgets},
                 {"bath", bath_summary(make_bath(c.material, {c.estimate.dispersion}))},
                 {"config_hash", c.hash()},
                 {"seed", c.seed}};
  write_json(dir.path() / "estimate_report.json", report);
  write_text_file(dir.path() / "estimate_report.txt", table);
  json meta = meta_document("estimate", c);
  write_json(dir.path() / "estimate_meta.json", meta);
  return dir.commit();
}

fs::path cmd_fit(const CommandOptions& opt) {
  const RunConfig c = parse_run_config(resolve_document(opt), false);
  if (opt.data.empty()) throw ValidationError("data", "no data file given");
  std::vector<DataTable> tables;
  json files = json::array();
  for (const auto& p : opt.data) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read data file " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    tables.push_back(parse_table(ss.str(), p.string()));
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
    files.push_back({{"path", fs::absolute(p).string()}, {"fnv1a64", hash}});
  }

  json report;
  if (c.fit.model == "simultaneous") {
    if (tables.size() != 2) {
      throw ValidationError("data", "simultaneous fit needs two files: rabi trace and fringe amplitudes");
    }
    auto sigma_of = [](const DataTable& t, const std::string& col) {
      return t.has(col) ? t.column(col).values : std::vector<double>{};
    };
    const RabiData rabi{tables[0].column("energy_J").values, tables[0].column("p_up").values,
                        sigma_of(tables[0], "p_up_stderr")};
    const FringeAmplitudeData fringe{tables[1].column("energy_J").values, tables[1].column("amplitude").values,
                                     sigma_of(tables[1], "amplitude_stderr")};
    report = simultaneous_fit_rabi_fringe(rabi, fringe, c.fit.simultaneous).to_json();
  } else {
    if (tables.size() != 1) throw ValidationError("data", "expected exactly one data file");
    const DataTable& t = tables.front();
    if (t.columns.empty() || t.columns.front().unit == "1") {
      throw ValidationError("data", "first column must be a unit-suffixed abscissa");
    }
    std::string ordinate = c.fit.ordinate;
    if (ordinate == "auto") ordinate = t.has("amplitude") ? "amplitude" : "p_up";
    const auto& x = t.columns.front().values;
    const auto& y = t.column(ordinate).values;
    std::vector<double> sigma;
    if (t.has(ordinate + "_stderr")) {
      sigma = t.column(ordinate + "_stderr").values;
      for (double s : sigma) {
        if (!(s > 0.0)) {
          sigma.clear();
          break;
        }
      }
    }
    std::vector<std::string> names = opt.compare.empty() ? c.fit.compare : opt.compare;
    const bool free_offset = c.fit.offset == "free" || (c.fit.offset == "auto" && ordinate == "p_up");
    auto fit_one = [&](ModelKind kind) {
      CurveModel model = CurveModel::guess(kind, x, y);
      if (free_offset && is_decay(kind)) free_decay_offset(model, x, y);
      return fit_curve(model, x, y, sigma);
    };
    FitResult f;
    if (names.empty()) {
      f = fit_one(parse_model_kind(c.fit.model));
    } else {
      std::map<std::string, double> norms;
      std::optional<FitResult> best;
      for (const auto& n : names) {
        FitResult r = fit_one(parse_model_kind(n));
        norms[r.model] = r.residual_norm;
        if (!best || r.residual_norm < best->residual_norm) best = std::move(r);
      }
      f = std::move(*best);
      f.model_comparison = norms;
    }
    report = f.to_json();
    report["abscissa"] = t.columns.front().name;
    report["ordinate"] = ordinate;
    report["weighted"] = !sigma.empty();
  }
  report["data_files"] = files;
  report["config_hash"] = c.hash();
  report["seed"] = c.seed;
  note(opt, "fit: " + report.value("model", std::string()) + ", converged " +
                (report.value("converged", false) ? "yes" : "no"));

  RunDir dir(output_base(opt, c), run_name("fit", c));
  write_json(dir.path() / "config.json", c.resolved);
  write_json(dir.path() / "fit_report.json", report);
  json meta = meta_document("fit", c);
  meta["data_files"] = files;
  write_json(dir.path() / "fit_meta.json", meta);
  return dir.commit();
}

fs::path cmd_sweep(const CommandOptions& opt) {
  if (opt.axis.empty()) throw ValidationError("axis", "no sweep axis given");
  if (opt.values.empty()) throw ValidationError("values", "no sweep values given");
  const json doc = resolve_document(opt);
  // the axis must be numeric in the merged document
  const RunConfig base = parse_run_config(doc);
  const json* current = find_key(base.resolved, opt.axis);
  std::string unit;
  bool numeric = current && current->is_number();
  if (current && current->is_string()) {
    const std::string s = current->get<std::string>();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    numeric = ec == std::errc();
    if (numeric) {
      unit = std::string(ptr, s.data() + s.size());
      while (!unit.empty() && unit.front() == ' ') unit.erase(0, 1);
    }
  }
  if (!numeric) throw ValidationError(opt.axis, "sweep axis must name a numeric config key");
  std::vector<double> values;
  for (const auto& v : opt.values) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
      throw ValidationError("values", "'" + v + "' is not a number");
    }
    values.push_back(x);
  }

  // all configurations validate before anything runs
  std::vector<RunConfig> configs;
  IssueCollector issues;
  for (std::size_t i = 0; i < values.size(); ++i) {
    json d = doc;
    json value = current->is_number() ? json(values[i]) : json(opt.values[i] + " " + unit);
    apply_override(d, opt.axis + "=" + value.dump());
    try {
      configs.push_back(parse_run_config(d));
    } catch (const ValidationError& e) {
      for (const auto& is : e.issues()) issues.add(opt.values[i] + ": " + is.key, is.message);
    }
  }
  issues.throw_if_any();

  json sweep_doc = base.resolved;
  sweep_doc["sweep"] = {{"axis", opt.axis}, {"values", values}, {"unit", unit}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(sweep_doc.dump())));
  const std::string name(to_string(*base.experiment));
  RunDir dir(output_base(opt, base), utc_stamp() + "-sweep-" + hash);
  write_json(dir.path() / "sweep.json", sweep_doc);

  std::vector<json> summaries;
  json runs = json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunConfig& c = configs[i];
    char sub[64];
    std::snprintf(sub, sizeof sub, "%03zu_%s", i, opt.values[i].c_str());
    const fs::path run = dir.path() / sub;
    fs::create_directory(run);
    note(opt, "sweep " + opt.axis + " = " + opt.values[i]);
    write_json(run / "config.json", c.resolved);
    json meta = meta_document("simulate", c);
    meta["results"] = simulate_into(c, run);
    write_json(run / (name + "_meta.json"), meta);
    summaries.push_back(meta["results"]["summary"]);
    runs.push_back({{"value", values[i]}, {"directory", sub}, {"config_hash", c.hash()}});
  }

  // summary table: one row per value, the union of numeric summary columns
  DataTable table;
  table.comments.push_back(" sweep of " + opt.axis + (unit.empty() ? "" : " in " + unit) + ", experiment " + name);
  const auto [axis_col, axis_si] = axis_column(opt.axis, unit, opt.values);
  table.add(axis_col, axis_si);
  json power_laws = json::object();
  for (auto it = summaries.front().begin(); it != summaries.front().end(); ++it) {
    std::vector<double> col;
    for (const auto& s : summaries) {
      col.push_back(s.contains(it.key()) && s.at(it.key()).is_number() ? s.at(it.key()).get<double>() : NAN);
    }
    try {
      table.add(it.key(), col);
    } catch (const ValidationError&) {
      continue;
    }
    bool positive = values.size() >= 2;
    for (std::size_t i = 0; i < col.size(); ++i) positive = positive && col[i] > 0.0 && axis_si[i] > 0.0;
    if (positive) {
      const PowerLawFit p = fit_power_law_loglog(axis_si, col);
      power_laws[it.key()] = {{"exponent", p.exponent},
                              {"exponent_error", p.exponent_error},
                              {"amplitude", p.amplitude}};
    }
  }
  write_table(dir.path() / "sweep_summary.csv", table);
  write_json(dir.path() / "sweep_summary.json",
             {{"axis", opt.axis}, {"unit", unit}, {"values", values}, {"runs", runs},
              {"summaries", summaries}, {"power_laws", power_laws}});
  return dir.commit();
}

CommandResult run_command(std::string_view command, const CommandOptions& opt) {
  CommandResult r;
  auto fail = [&](int code, const std::string& msg) {
    r.exit_code = code;
    r.message = msg;
    note(opt, "error: " + msg);
  };
  try {
    if (command == "simulate") {
      r.run_dir = cmd_simulate(opt);
    } else if (command == "estimate") {
      r.run_dir = cmd_estimate(opt);
    } else if (command == "fit") {
      r.run_dir = cmd_fit(opt);
    } else if (command == "sweep") {
      r.run_dir = cmd_sweep(opt);
    } else {
      throw ValidationError("command", "unknown command '" + std::string(command) +
                                           "'; valid: simulate, estimate, fit, sweep");
    }
    r.message = r.run_dir.string();
  } catch (const ValidationError& e) {
    fail(kExitValidation, e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(kExitValidation, e.what());
  } catch (const NumericalError& e) {
    fail(kExitNumerical, e.what());
  } catch (const IoError& e) {
    fail(kExitIo, e.what());
  } catch (const fs::filesystem_error& e) {
    fail(kExitIo, e.what());
  } catch (const std::exception& e) {
    fail(kExitInternal, e.what());
  }
  return r;
}

}  // namespace donorspin
