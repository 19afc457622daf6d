#include "donorspin/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "donorspin/errors.hpp"
#include "donorspin/lindblad.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json experiment_defaults(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::rabi:
      return {{"energies", nullptr}, {"energy_start", "0 pJ"}, {"energy_stop", "120 pJ"}, {"points", 25}};
    case ExperimentKind::ramsey:
      return {{"pulse_angle", "0.5 pi"}, {"pulse_energy", nullptr}, {"centers", {"30 ps"}},
              {"step", nullptr}, {"points", 16}, {"envelope_model", "gaussian"}};
    case ExperimentKind::echo:
      return {{"pulse_angle", "0.5 pi"}, {"pulse_energy", nullptr},
              {"tau1", {"5 us", "10 us", "20 us", "30 us"}}, {"step", nullptr}, {"points", 16},
              {"envelope_model", "exp"}};
    case ExperimentKind::t1:
      return {{"waits", nullptr}, {"wait_stop", "0.5 s"}, {"points", 24}};
    case ExperimentKind::pump:
      return json::object();
  }
  return json::object();
}

std::optional<ExperimentKind> parse_kind(std::string_view s) {
  if (s == "rabi") return ExperimentKind::rabi;
  if (s == "ramsey") return ExperimentKind::ramsey;
  if (s == "echo") return ExperimentKind::echo;
  if (s == "t1") return ExperimentKind::t1;
  if (s == "pump") return ExperimentKind::pump;
  return std::nullopt;
}

// Flags keys of `user` that `defaults` does not know.
void check_keys(const json& user, const json& defaults, const std::string& prefix, IssueCollector& issues) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) {
      issues.add(key, "unknown key");
      continue;
    }
    const json& d = defaults.at(it.key());
    if (d.is_object() && !d.empty()) {
      if (!it->is_object()) {
        issues.add(key, "must be an object");
      } else {
        check_keys(*it, d, key, issues);
      }
    }
  }
}

class Reader {
 public:
  Reader(const json& doc, IssueCollector& issues) : doc_(doc), issues_(issues) {}

  const json* get(std::string_view key) const {
    const json* v = find_key(doc_, key);
    return v && !v->is_null() ? v : nullptr;
  }

  double quantity(std::string_view key, Dimension dim) {
    const json* v = get(key);
    if (!v) {
      issues_.add(std::string(key), "missing");
      return kNaN;
    }
    return quantity_of(*v, key, dim);
  }

  double quantity_of(const json& v, std::string_view key, Dimension dim) {
    try {
      if (v.is_string()) return parse_quantity(v.get<std::string>(), dim, key);
      if (v.is_number()) {
        if (dim == Dimension::dimensionless) return v.get<double>();
        issues_.add(std::string(key), "needs a unit, e.g. \"" + v.dump() + " " +
                                          example_unit(dim) + "\"");
        return kNaN;
      }
      issues_.add(std::string(key), "expected a quantity string");
    } catch (const ValidationError& e) {
      for (const auto& i : e.issues()) issues_.add(i.key, i.message);
    }
    return kNaN;
  }

  std::optional<double> optional_quantity(std::string_view key, Dimension dim) {
    if (!get(key)) return std::nullopt;
    return quantity(key, dim);
  }

  std::vector<double> quantity_list(std::string_view key, Dimension dim) {
    std::vector<double> out;
    const json* v = get(key);
    if (!v) return out;
    if (!v->is_array()) {
      issues_.add(std::string(key), "expected a list");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(quantity_of((*v)[i], std::string(key) + "[" + std::to_string(i) + "]", dim));
    }
    return out;
  }

  double number(std::string_view key) {
    const json* v = get(key);
    if (!v || !v->is_number()) {
      issues_.add(std::string(key), "expected a number");
      return kNaN;
    }
    return v->get<double>();
  }

  long integer(std::string_view key) {
    const json* v = get(key);
    if (!v || !v->is_number_integer()) {
      issues_.add(std::string(key), "expected an integer");
      return 0;
    }
    return v->get<long>();
  }

  bool boolean(std::string_view key) {
    const json* v = get(key);
    if (!v || !v->is_boolean()) {
      issues_.add(std::string(key), "expected true or false");
      return false;
    }
    return v->get<bool>();
  }

  std::string string(std::string_view key) {
    const json* v = get(key);
    if (!v || !v->is_string()) {
      issues_.add(std::string(key), "expected a string");
      return {};
    }
    return v->get<std::string>();
  }

  std::string choice(std::string_view key, std::initializer_list<std::string_view> options) {
    const std::string s = string(key);
    std::string list;
    for (auto o : options) {
      if (s == o) return s;
      list += (list.empty() ? "" : ", ") + std::string(o);
    }
    if (!s.empty()) issues_.add(std::string(key), "'" + s + "' is not one of: " + list);
    return std::string(*options.begin());
  }

  Eigen::Vector3d vector3(std::string_view key) {
    const json* v = get(key);
    if (!v || !v->is_array() || v->size() != 3) {
      issues_.add(std::string(key), "expected three numbers");
      return Eigen::Vector3d::UnitX();
    }
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
      if (!(*v)[i].is_number()) {
        issues_.add(std::string(key), "expected three numbers");
        return Eigen::Vector3d::UnitX();
      }
      out(i) = (*v)[i].get<double>();
    }
    return out;
  }

 private:
  static std::string example_unit(Dimension d) {
    switch (d) {
      case Dimension::time: return "s";
      case Dimension::field: return "T";
      case Dimension::angular_frequency: return "Hz";
      case Dimension::rate: return "s^-1";
      case Dimension::energy: return "J";
      case Dimension::angle: return "rad";
      case Dimension::length: return "m";
      case Dimension::time_per_radian: return "s/rad";
      case Dimension::calibration: return "rad^2/s/J";
      default: return "<unit>";
    }
  }

  const json& doc_;
  IssueCollector& issues_;
};

template <class Fn>
void collect(IssueCollector& issues, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    for (const auto& i : e.issues()) issues.add(i.key, i.message);
  }
}

DispersionMethod parse_dispersion(Reader& r, std::string_view key) {
  return r.choice(key, {"continuum", "lattice_sum"}) == "lattice_sum" ? DispersionMethod::lattice_sum
                                                                        : DispersionMethod::continuum;
}

std::vector<double> linear_range(double a, double b, long n) {
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1));
  return out;
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::rabi: return "rabi";
    case ExperimentKind::ramsey: return "ramsey";
    case ExperimentKind::echo: return "echo";
    case ExperimentKind::t1: return "t1";
    case ExperimentKind::pump: return "pump";
  }
  return "?";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(resolved.dump())));
  return buf;
}

std::optional<BathModel> RunConfig::bath_model() const {
  if (!bath.enabled) return std::nullopt;
  if (bath.model == "gaussian") return gaussian_bath(bath.t2_star, material.g_electron);
  return make_bath(material, {bath.dispersion});
}

json default_config_document() {
  return {
      {"material", "zno-natural"},
      {"field", {{"magnitude", "5 T"}, {"orientation", {1, 0, 0}}}},
      {"seed", 1},
      {"jobs", 0},
      {"output_dir", "runs"},
      {"pulse",
       {{"shape", "gaussian"},
        {"duration", "1.9 ps"},
        {"detuning", "3.57 THz"},
        {"pi_energy", "40 pJ"},
        {"calibration_k", nullptr},
        {"coupling_weights", {1, 1, 1, 1}}}},
      {"dissipators",
       {{"radiative_lifetime", "1 ns"},
        {"branching", {{0.5, 0.5}, {0.5, 0.5}}},
        {"t1",
         {{"reference_t1", "0.1 s"}, {"reference_field", "2.25 T"}, {"exponent", 3.5}, {"rate", nullptr}}},
        {"ground_dephasing_rate", "0 s^-1"},
        {"beta1", 0},
        {"beta2", "0 s/rad"},
        {"injected", {{"kind", "none"}, {"decay_time", "50 us"}, {"origin", "0 s"}}}}},
      {"integrator",
       {{"method", "adaptive_rk"},
        {"rel_tol", 1e-9},
        {"abs_tol", 1e-11},
        {"max_step", nullptr},
        {"min_step", "1e-24 s"}}},
      {"pump",
       {{"enabled", true}, {"rabi", "10 MHz"}, {"duration", "10 us"}, {"settle", "20 ns"}, {"curve_points", 200}}},
      {"readout", {{"mode", "population"}, {"duration", "20 ns"}, {"rabi", "100 MHz"}}},
      {"angle_spread", {{"relative_sigma", 0}, {"nodes", 7}}},
      {"bath",
       {{"enabled", false},
        {"model", "material"},
        {"t2_star", "17 ns"},
        {"dispersion", "continuum"},
        {"samples", 1000},
        {"exact_pulse_maps", false}}},
      {"experiment", json::object()},
      {"fit",
       {{"model", "exp"},
        {"compare", json::array()},
        {"ordinate", "auto"},
        {"offset", "auto"},
        {"simultaneous",
         {{"k_initial", nullptr},
          {"beta1_initial", 0.02},
          {"beta2_initial", "5e-15 s/rad"},
          {"fringe_delay", "40 ps"},
          {"fringe_points", 8},
          {"fringe_weight", 1}}}}},
      {"estimate",
       {{"theta2", {"0.2 pi", "0.5 pi"}},
        {"variant", "paper_consistent"},
        {"powder_average", false},
        {"cutoff", "10 nm"},
        {"monte_carlo", false},
        {"mc_samples", 200},
        {"dispersion", "continuum"}}},
  };
}

json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), std::string("not valid JSON: ") + e.what());
  }
}

const json* find_key(const json& doc, std::string_view dotted) {
  const json* cur = &doc;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const std::size_t dot = std::min(dotted.find('.', pos), dotted.size());
    const std::string part(dotted.substr(pos, dot - pos));
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &cur->at(part);
    pos = dot + 1;
  }
  return cur;
}

void apply_override(json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError(std::string(assignment), "override must look like key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* cur = &doc;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ValidationError(key, "empty key component");
    if (!cur->is_object()) throw ValidationError(key, "parent is not an object");
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    cur = &(*cur)[part];
    if (cur->is_null()) *cur = json::object();
    pos = dot + 1;
  }
}

RunConfig parse_run_config(const json& user, bool require_experiment) {
  if (!user.is_object()) throw ValidationError("config", "top level must be an object");
  IssueCollector issues;
  const json defaults = default_config_document();
  check_keys(user, defaults, "", issues);

  RunConfig c;
  // experiment: exactly one known section, merged over its own defaults
  json experiment = json::object();
  std::optional<ExperimentKind> kind;
  if (user.contains("experiment")) {
    const json& e = user.at("experiment");
    if (!e.is_object()) {
      issues.add("experiment", "must be an object with one of: " + std::string(kExperimentNames));
    } else {
      if (e.size() > 1) issues.add("experiment", "exactly one experiment section allowed, found " + std::to_string(e.size()));
      for (auto it = e.begin(); it != e.end(); ++it) {
        const auto k = parse_kind(it.key());
        if (!k) {
          issues.add("experiment." + it.key(),
                     "unknown experiment; valid options: " + std::string(kExperimentNames));
          continue;
        }
        if (!it->is_object()) {
          issues.add("experiment." + it.key(), "must be an object");
          continue;
        }
        const json d = experiment_defaults(*k);
        check_keys(*it, d, "experiment." + it.key(), issues);
        json merged = d;
        merged.merge_patch(*it);
        experiment[it.key()] = merged;
        if (!kind) kind = k;
      }
    }
  }
  if (!kind && require_experiment && (!user.contains("experiment") || user.at("experiment").empty())) {
    issues.add("experiment", "missing; give one of: " + std::string(kExperimentNames));
  }

  json doc = defaults;
  json patch = user;
  patch.erase("experiment");
  doc.merge_patch(patch);
  doc["experiment"] = experiment;
  c.resolved = doc;
  c.experiment = kind;

  Reader r(doc, issues);
  collect(issues, [&] { c.material = load_material_profile(r.string("material")); });
  const double field = r.quantity("field.magnitude", Dimension::field);
  collect(issues, [&] {
    const FieldConfig fc(field >= 0.0 ? field : 0.0, r.vector3("field.orientation"));
    c.field_orientation = fc.orientation();
  });
  const long seed = r.integer("seed");
  if (seed < 0) issues.add("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(std::max(0L, seed));
  const long jobs = r.integer("jobs");
  if (jobs < 0) issues.add("jobs", "must be >= 0 (0: hardware concurrency)");
  c.output_dir = r.string("output_dir");

  ExperimentSetup& s = c.setup;
  s.g_electron = c.material.g_electron;
  s.g_hole = c.material.g_hole;
  s.field = field;
  s.jobs = static_cast<int>(std::max(0L, jobs));
  const std::string shape = r.choice("pulse.shape", {"gaussian", "sech2", "rectangular"});
  s.shape = shape == "sech2" ? PulseShape::sech2 : shape == "rectangular" ? PulseShape::rectangular : PulseShape::gaussian;
  s.pulse_duration = r.quantity("pulse.duration", Dimension::time);
  s.detuning = r.quantity("pulse.detuning", Dimension::angular_frequency);
  if (const json* w = r.get("pulse.coupling_weights")) {
    if (!w->is_array() || w->size() != 4) {
      issues.add("pulse.coupling_weights", "expected four entries (number or [re, im])");
    } else {
      for (std::size_t i = 0; i < 4; ++i) {
        const json& e = (*w)[i];
        if (e.is_number()) {
          s.coupling_weights[i] = e.get<double>();
        } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
          s.coupling_weights[i] = {e[0].get<double>(), e[1].get<double>()};
        } else {
          issues.add("pulse.coupling_weights[" + std::to_string(i) + "]", "expected a number or [re, im]");
        }
      }
    }
  }

  DissipatorSet& d = s.dissipators;
  const double lifetime = r.quantity("dissipators.radiative_lifetime", Dimension::time);
  if (!(lifetime > 0.0)) {
    issues.add("dissipators.radiative_lifetime", "must be > 0");
  } else {
    d.radiative_rate = 1.0 / lifetime;
  }
  if (const json* b = r.get("dissipators.branching")) {
    bool ok = b->is_array() && b->size() == 2;
    for (std::size_t e = 0; ok && e < 2; ++e) {
      ok = (*b)[e].is_array() && (*b)[e].size() == 2 && (*b)[e][0].is_number() && (*b)[e][1].is_number();
      if (ok) d.branching[e] = {(*b)[e][0].get<double>(), (*b)[e][1].get<double>()};
    }
    if (!ok) issues.add("dissipators.branching", "expected [[a, b], [c, d]]");
  }
  if (const auto rate = r.optional_quantity("dissipators.t1.rate", Dimension::rate)) {
    d.t1_rate = *rate;
  } else {
    collect(issues, [&] {
      d.t1_rate = t1_rate_model(field, r.quantity("dissipators.t1.reference_t1", Dimension::time),
                                r.quantity("dissipators.t1.reference_field", Dimension::field),
                                r.number("dissipators.t1.exponent"));
    });
  }
  d.ground_dephasing_rate = r.quantity("dissipators.ground_dephasing_rate", Dimension::rate);
  d.beta1 = r.number("dissipators.beta1");
  d.beta2 = r.quantity("dissipators.beta2", Dimension::time_per_radian);
  const std::string inj = r.choice("dissipators.injected.kind", {"none", "exp", "exponential", "cubed_exp", "cubed_exponential"});
  d.injected.kind = inj == "none" ? InjectedDephasing::Kind::none
                    : (inj == "exp" || inj == "exponential") ? InjectedDephasing::Kind::exponential
                                                             : InjectedDephasing::Kind::cubed_exponential;
  if (d.injected.kind != InjectedDephasing::Kind::none) {
    d.injected.decay_time = r.quantity("dissipators.injected.decay_time", Dimension::time);
    d.injected.origin = r.quantity("dissipators.injected.origin", Dimension::time);
  }

  IntegratorConfig& ic = s.integrator;
  ic.method = r.choice("integrator.method", {"adaptive_rk", "matrix_exponential"}) == "matrix_exponential"
                  ? IntegratorMethod::matrix_exponential
                  : IntegratorMethod::adaptive_rk;
  ic.rel_tol = r.number("integrator.rel_tol");
  ic.abs_tol = r.number("integrator.abs_tol");
  if (const auto ms = r.optional_quantity("integrator.max_step", Dimension::time)) ic.max_step = *ms;
  ic.min_step = r.quantity("integrator.min_step", Dimension::time);

  s.pump.enabled = r.boolean("pump.enabled");
  s.pump.rabi = r.quantity("pump.rabi", Dimension::angular_frequency);
  s.pump.duration = r.quantity("pump.duration", Dimension::time);
  s.pump.settle = r.quantity("pump.settle", Dimension::time);
  s.pump.curve_points = static_cast<int>(r.integer("pump.curve_points"));
  s.readout = r.choice("readout.mode", {"population", "photon_counts"}) == "photon_counts"
                  ? ReadoutMode::photon_counts
                  : ReadoutMode::population;
  s.readout_duration = r.quantity("readout.duration", Dimension::time);
  s.readout_rabi = r.quantity("readout.rabi", Dimension::angular_frequency);
  s.angle_spread.relative_sigma = r.number("angle_spread.relative_sigma");
  s.angle_spread.nodes = static_cast<int>(r.integer("angle_spread.nodes"));

  // calibration: explicit k, else the pi energy in the far-detuned estimate
  if (const auto k = r.optional_quantity("pulse.calibration_k", Dimension::calibration)) {
    s.calibration_k = *k;
  } else {
    const double pi_energy = r.quantity("pulse.pi_energy", Dimension::energy);
    if (issues.empty()) collect(issues, [&] { s.calibration_k = calibration_for_angle(s, pi_energy, kPi); });
  }
  if (issues.empty()) collect(issues, [&] { s.validate(); });

  BathSection& b = c.bath;
  b.enabled = r.boolean("bath.enabled");
  b.model = r.choice("bath.model", {"material", "gaussian"});
  b.t2_star = r.quantity("bath.t2_star", Dimension::time);
  if (b.model == "gaussian" && !(b.t2_star > 0.0)) issues.add("bath.t2_star", "must be > 0");
  b.dispersion = parse_dispersion(r, "bath.dispersion");
  b.ensemble.samples = r.integer("bath.samples");
  if (b.ensemble.samples < 1) issues.add("bath.samples", "must be >= 1");
  b.ensemble.seed = c.seed;
  b.ensemble.exact_pulse_maps = r.boolean("bath.exact_pulse_maps");
  if (!b.enabled) b.ensemble.samples = 1;

  // experiment section
  if (kind) {
    const std::string base = "experiment." + std::string(to_string(*kind));
    auto key = [&](std::string_view k) { return base + "." + std::string(k); };
    switch (*kind) {
      case ExperimentKind::rabi: {
        if (r.get(key("energies"))) {
          c.rabi_energies = r.quantity_list(key("energies"), Dimension::energy);
        } else {
          const long n = r.integer(key("points"));
          if (n < 1) issues.add(key("points"), "must be >= 1");
          c.rabi_energies = linear_range(r.quantity(key("energy_start"), Dimension::energy),
                                         r.quantity(key("energy_stop"), Dimension::energy), std::max(1L, n));
        }
        if (c.rabi_energies.empty()) issues.add(key("energies"), "need at least one energy");
        for (double e : c.rabi_energies) {
          if (!(e >= 0.0)) {
            issues.add(key("energies"), "energies must be >= 0");
            break;
          }
        }
        break;
      }
      case ExperimentKind::ramsey:
      case ExperimentKind::echo: {
        ScanSection& sc = c.scan;
        const bool ramsey = *kind == ExperimentKind::ramsey;
        sc.centers = r.quantity_list(key(ramsey ? "centers" : "tau1"), Dimension::time);
        if (sc.centers.empty()) issues.add(key(ramsey ? "centers" : "tau1"), "need at least one value");
        sc.points = static_cast<int>(r.integer(key("points")));
        sc.envelope_model = r.choice(key("envelope_model"), {"gaussian", "exp", "cubed_exp", "none"});
        if (sc.envelope_model == "none") sc.envelope_model.clear();
        if (issues.empty()) {
          if (const auto e = r.optional_quantity(key("pulse_energy"), Dimension::energy)) {
            sc.pulse_energy = *e;
          } else {
            const double angle = r.quantity(key("pulse_angle"), Dimension::angle);
            collect(issues, [&] { sc.pulse_energy = energy_for_angle(s, angle); });
          }
          if (const auto st = r.optional_quantity(key("step"), Dimension::time)) {
            sc.step = *st;
          } else {
            sc.step = 2.0 * kPi / s.omega_e() / 8.0;
          }
          collect(issues, [&] { check_fringe_sampling(s, sc.step); });
        }
        break;
      }
      case ExperimentKind::t1: {
        if (r.get(key("waits"))) {
          c.t1_waits = r.quantity_list(key("waits"), Dimension::time);
        } else {
          const long n = r.integer(key("points"));
          if (n < 2) issues.add(key("points"), "must be >= 2");
          c.t1_waits = linear_range(0.0, r.quantity(key("wait_stop"), Dimension::time), std::max(2L, n));
        }
        break;
      }
      case ExperimentKind::pump:
        break;
    }
  }

  FitSection& f = c.fit;
  f.model = r.string("fit.model");
  if (f.model != "simultaneous") collect(issues, [&] { parse_model_kind(f.model); });
  if (const json* cmp = r.get("fit.compare")) {
    if (!cmp->is_array()) {
      issues.add("fit.compare", "expected a list of model names");
    } else {
      for (const auto& m : *cmp) {
        if (!m.is_string()) {
          issues.add("fit.compare", "expected a list of model names");
          continue;
        }
        f.compare.push_back(m.get<std::string>());
        collect(issues, [&] { parse_model_kind(f.compare.back()); });
      }
    }
  }
  f.ordinate = r.string("fit.ordinate");
  f.offset = r.choice("fit.offset", {"auto", "fixed", "free"});
  SimultaneousFitSpec& sf = f.simultaneous;
  sf.setup = s;
  if (const auto k0 = r.optional_quantity("fit.simultaneous.k_initial", Dimension::calibration)) sf.k_initial = *k0;
  sf.beta1_initial = r.number("fit.simultaneous.beta1_initial");
  sf.beta2_initial = r.quantity("fit.simultaneous.beta2_initial", Dimension::time_per_radian);
  sf.fringe_delay = r.quantity("fit.simultaneous.fringe_delay", Dimension::time);
  sf.fringe_points = static_cast<int>(r.integer("fit.simultaneous.fringe_points"));
  sf.fringe_weight = r.number("fit.simultaneous.fringe_weight");

  EstimateSection& es = c.estimate;
  es.theta2 = r.quantity_list("estimate.theta2", Dimension::angle);
  for (double t : es.theta2) {
    if (!(t >= 0.0 && t <= kPi)) {
      issues.add("estimate.theta2", "angles must lie in [0, pi]");
      break;
    }
  }
  es.variant = r.choice("estimate.variant", {"paper_consistent", "as_printed"}) == "as_printed"
                   ? IdVariant::as_printed
                   : IdVariant::paper_consistent;
  es.lattice.field_direction = c.field_orientation;
  es.lattice.powder_average = r.boolean("estimate.powder_average");
  es.lattice.cutoff = r.quantity("estimate.cutoff", Dimension::length);
  es.lattice.monte_carlo = r.boolean("estimate.monte_carlo");
  es.lattice.mc_samples = r.integer("estimate.mc_samples");
  es.lattice.seed = c.seed;
  es.lattice.jobs = s.jobs;
  es.dispersion = parse_dispersion(r, "estimate.dispersion");

  issues.throw_if_any();
  return c;
}

}  // namespace donorspin
