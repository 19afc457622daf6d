#include "donorspin/sequences.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <memory>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "donorspin/errors.hpp"
#include "donorspin/parallel.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPopulationSlack = 1e-6;

using Vec16 = Eigen::Matrix<Complex, 16, 1>;

DissipatorSet without_injected(DissipatorSet d) {
  d.injected = InjectedDephasing{};
  return d;
}

Matrix4c thermal() {
  Matrix4c m = Matrix4c::Zero();
  m(kDown, kDown) = 0.5;
  m(kUp, kUp) = 0.5;
  return m;
}

// Frame of a laser resonant with |up> <-> |trion down>.
LevelScheme pump_scheme(const LevelScheme& control) {
  return {control.omega_e, control.omega_h, control.omega_e};
}

// Re-expresses rho from the frame with level energies `from` to the one with
// `to` at time t. Only optical coherences pick up a phase.
Matrix4c change_frame(const Matrix4c& rho, const Eigen::Vector4d& from, const Eigen::Vector4d& to,
                      double t) {
  const Eigen::Vector4d shift = to - from;
  Matrix4c out = rho;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      const double phase = shift(i) - shift(j);
      if (phase != 0.0) out(i, j) *= std::exp(Complex(0.0, -phase * t));
    }
  }
  return out;
}

// Injected dephasing integral I applied as a pure coherence decay: the ground
// coherence by exp(-I), optical coherences by exp(-I/4).
void apply_injected(Matrix4c& rho, double integral) {
  if (integral == 0.0) return;
  const double ground = std::exp(-integral);
  const double optical = std::exp(-0.25 * integral);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      if (i == j) continue;
      const bool gi = i < 2, gj = j < 2;
      if (gi && gj) {
        rho(i, j) *= ground;
      } else if (gi != gj) {
        rho(i, j) *= optical;
      }
    }
  }
}

struct SpreadNode {
  double scale = 1.0;
  double weight = 1.0;
};

// Probabilists' Gauss-Hermite rule by Golub-Welsch.
std::vector<SpreadNode> spread_nodes(const AngleSpread& spread) {
  if (!spread.enabled()) return {SpreadNode{}};
  const int n = spread.nodes;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  std::vector<SpreadNode> out;
  for (int i = 0; i < n; ++i) {
    const double v = es.eigenvectors()(0, i);
    out.push_back({std::max(0.0, 1.0 + spread.relative_sigma * es.eigenvalues()(i)), v * v});
  }
  return out;
}

struct PulseWindow {
  double before = 0.0;  // window start relative to arrival (negative)
  double after = 0.0;
};

PulseWindow window_of(const ExperimentSetup& s) {
  const PulseSpec p = s.pulse(0.0, 0.0);
  return {p.window_start(), p.window_end()};
}

// Populations and photon counts read at the end of a protocol.
class Readout {
 public:
  Readout(const ExperimentSetup& s) : mode_(s.readout), gamma_(s.dissipators.radiative_rate) {
    if (mode_ != ReadoutMode::photon_counts) return;
    const LevelScheme control = s.levels();
    const LevelScheme pump = pump_scheme(control);
    control_energies_ = control.energies();
    pump_energies_ = pump.energies();
    const DissipatorSet d = without_injected(s.dissipators);
    const Matrix4c h = hamiltonian_matrix(pump, s.coupling_weights, s.readout_rabi);
    // Top-right block of exp([[L, I], [0, 0]] T) is the integral of exp(L t) over [0, T].
    Eigen::Matrix<Complex, 32, 32> aug = Eigen::Matrix<Complex, 32, 32>::Zero();
    aug.topLeftCorner<16, 16>() = liouvillian(h, d, s.readout_rabi) * s.readout_duration;
    aug.topRightCorner<16, 16>() = Superoperator::Identity() * s.readout_duration;
    const Eigen::Matrix<Complex, 32, 32> e = aug.exp();
    const Superoperator integral = e.topRightCorner<16, 16>();
    functional_ = gamma_ * (integral.row(kTrionDown + 4 * kTrionDown) +
                            integral.row(kTrionUp + 4 * kTrionUp));
  }

  void record(const Matrix4c& rho, double t, SampleOutcome& out) const {
    out.p_up.push_back(rho(kUp, kUp).real());
    out.p_down.push_back(rho(kDown, kDown).real());
    if (mode_ == ReadoutMode::photon_counts) {
      const Matrix4c in_pump = change_frame(rho, control_energies_, pump_energies_, t);
      const Vec16 v = Eigen::Map<const Vec16>(in_pump.data());
      out.photon_counts.push_back((functional_ * v)(0).real());
    }
  }

 private:
  ReadoutMode mode_;
  double gamma_;
  Eigen::Vector4d control_energies_ = Eigen::Vector4d::Zero();
  Eigen::Vector4d pump_energies_ = Eigen::Vector4d::Zero();
  Eigen::Matrix<Complex, 1, 16> functional_ = Eigen::Matrix<Complex, 1, 16>::Zero();
};

// Pulse maps per angle-spread node as functions of the bath shift. The map
// varies on the scale of the inverse pulse window (~1e11 rad/s) while bath
// shifts are ~1e8 rad/s, so quadratic interpolation through 0 and +-span is
// accurate to ~(shift x window)^3.
class MapTable {
 public:
  // direct: no maps at all, each isolated pulse is propagated on the state.
  // Cheaper when every pulse is applied only once.
  MapTable(const ExperimentSetup& s, double energy, double span, bool exact, bool direct = false)
      : s_(s),
        energy_(energy),
        span_(span),
        exact_(exact),
        direct_(direct),
        nodes_(spread_nodes(s.angle_spread)) {
    if (exact_ || direct_) return;
    for (const auto& node : nodes_) {
      const double e = energy * node.scale;
      centre_.push_back(exact_map(0.0, e));
      if (span_ > 0.0) {
        plus_.push_back(exact_map(span_, e));
        minus_.push_back(exact_map(-span_, e));
      }
    }
  }

  const std::vector<SpreadNode>& nodes() const { return nodes_; }

  std::vector<Superoperator> at(double shift) const {
    std::vector<Superoperator> out;
    if (direct_) return out;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      if (exact_) {
        out.push_back(exact_map(shift, energy_ * nodes_[n].scale));
      } else if (span_ == 0.0 || shift == 0.0) {
        out.push_back(centre_[n]);
      } else {
        const double u = shift / span_;
        out.push_back(centre_[n] + (0.5 * u) * (plus_[n] - minus_[n]) +
                      (0.5 * u * u) * (plus_[n] - 2.0 * centre_[n] + minus_[n]));
      }
    }
    return out;
  }

 private:
  Superoperator exact_map(double shift, double energy) const {
    const Segment seg = pulse_segment(s_.levels(shift), s_.pulse(energy, 0.0), s_.calibration_k);
    return segment_propagator(std::span(&seg, 1), without_injected(s_.dissipators), s_.integrator);
  }

  const ExperimentSetup& s_;
  double energy_;
  double span_;
  bool exact_;
  bool direct_;
  std::vector<SpreadNode> nodes_;
  std::vector<Superoperator> centre_, plus_, minus_;
};

double max_shift(const std::optional<BathModel>& bath, const EnsembleOptions& ens) {
  if (!bath) return 0.0;
  double m = 0.0;
  for (const auto& x : sample_overhauser(*bath, ens.seed, ens.samples)) {
    m = std::max(m, std::abs(x.detuning));
  }
  return m;
}

// Pulse trains at a fixed bath shift. Isolated pulses apply the map of their
// angle-spread node; overlapping windows are merged and integrated directly.
// The injected channel acts between consecutive arrivals.
class PulseTrain {
 public:
  PulseTrain(const ExperimentSetup& s, const MapTable& table, double zeeman_shift, double energy)
      : s_(s),
        levels_(s.levels(zeeman_shift)),
        d0_(without_injected(s.dissipators)),
        window_(window_of(s)),
        energy_(energy),
        nodes_(table.nodes()),
        maps_(table.at(zeeman_shift)) {}

  std::size_t node_count() const { return nodes_.size(); }
  double weight(std::size_t node) const { return nodes_[node].weight; }

  // rho0 is the state at the first window start; returns the state at the
  // end of the last window, whose time is written to `end_time`.
  Matrix4c run(const Matrix4c& rho0, std::span<const double> arrivals, std::size_t node,
               double& end_time) const {
    Matrix4c rho = rho0;
    const Eigen::Vector4d energies = levels_.energies();
    const auto& injected = s_.dissipators.injected;
    std::size_t k = 0;
    double clock = arrivals.front() + window_.before;
    double anchor = arrivals.front();
    while (k < arrivals.size()) {
      std::size_t last = k;
      while (last + 1 < arrivals.size() &&
             arrivals[last + 1] + window_.before < arrivals[last] + window_.after) {
        ++last;
      }
      const double start = arrivals[k] + window_.before;
      if (start > clock) rho = propagate_free(rho, energies, d0_, clock, start);
      apply_injected(rho, injected.integral(anchor, arrivals[k]));
      anchor = arrivals[k];
      if (last == k && !maps_.empty()) {
        rho = apply_map(maps_[node], rho);
      } else {
        std::vector<PulseSpec> pulses;
        for (std::size_t i = k; i <= last; ++i) {
          pulses.push_back(s_.pulse(energy_ * nodes_[node].scale, arrivals[i]));
        }
        const Segment seg = merged_pulse_segment(levels_, pulses, s_.calibration_k);
        rho = propagate(rho, std::span(&seg, 1), d0_, s_.integrator);
      }
      clock = arrivals[last] + window_.after;
      k = last + 1;
    }
    apply_injected(rho, injected.integral(anchor, clock));
    end_time = clock;
    return rho;
  }

 private:
  const ExperimentSetup& s_;
  LevelScheme levels_;
  DissipatorSet d0_;
  PulseWindow window_;
  double energy_;
  std::vector<SpreadNode> nodes_;
  std::vector<Superoperator> maps_;
};

// Angle-spread average of the readout after the given pulse train.
void record_train(const PulseTrain& train, const Readout& readout, const Matrix4c& rho0,
                  std::span<const double> arrivals, SampleOutcome& out) {
  double up = 0.0, down = 0.0, counts = 0.0;
  bool has_counts = false;
  for (std::size_t n = 0; n < train.node_count(); ++n) {
    double end = 0.0;
    const Matrix4c rho = train.run(rho0, arrivals, n, end);
    SampleOutcome one;
    readout.record(rho, end, one);
    up += train.weight(n) * one.p_up[0];
    down += train.weight(n) * one.p_down[0];
    if (!one.photon_counts.empty()) {
      counts += train.weight(n) * one.photon_counts[0];
      has_counts = true;
    }
  }
  out.p_up.push_back(up);
  out.p_down.push_back(down);
  if (has_counts) out.photon_counts.push_back(counts);
}

std::vector<FringeWindow> fit_windows(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> centers, int points, double omega) {
  std::vector<FringeWindow> out;
  for (std::size_t w = 0; w < centers.size(); ++w) {
    const auto xs = x.subspan(w * static_cast<std::size_t>(points), static_cast<std::size_t>(points));
    const auto ys = y.subspan(w * static_cast<std::size_t>(points), static_cast<std::size_t>(points));
    const FringeFit f = fit_fringe(xs, ys, omega);
    out.push_back({centers[w], f.amplitude, f.amplitude_error, f.phase});
  }
  return out;
}

nlohmann::json ensemble_json(const std::optional<BathModel>& bath, const EnsembleOptions& ens) {
  nlohmann::json j{{"samples", bath ? ens.samples : 1}, {"seed", ens.seed}};
  if (bath) j["bath"] = bath_summary(*bath);
  return j;
}

void fill_trace(ExperimentTrace& t, const EnsembleAverage& avg) {
  t.p_up = avg.mean.p_up;
  t.p_down = avg.mean.p_down;
  t.p_up_stderr = avg.p_up_stderr;
  t.photon_counts = avg.mean.photon_counts;
}

}  // namespace

std::string_view to_string(ReadoutMode m) {
  return m == ReadoutMode::population ? "population" : "photon_counts";
}

double ExperimentSetup::omega_e() const { return zeeman_splitting(g_electron, field); }

LevelScheme ExperimentSetup::levels(double zeeman_shift) const {
  LevelScheme l = levels_at_field(g_electron, g_hole, field, detuning);
  l.omega_e += zeeman_shift;
  return l;
}

PulseSpec ExperimentSetup::pulse(double energy, double arrival_time) const {
  PulseSpec p;
  p.shape = shape;
  p.duration = pulse_duration;
  p.energy = energy;
  p.arrival_time = arrival_time;
  p.detuning = detuning;
  p.coupling_weights = coupling_weights;
  return p;
}

void ExperimentSetup::validate() const {
  IssueCollector issues;
  auto merge = [&](auto&& check) {
    try {
      check();
    } catch (const ValidationError& e) {
      for (const auto& i : e.issues()) issues.add(i.key, i.message);
    }
  };
  if (!(field > 0.0) || !std::isfinite(field)) issues.add("field", "must be > 0 T");
  if (!std::isfinite(g_electron) || !(g_electron > 0.0)) issues.add("g_electron", "must be > 0");
  if (!std::isfinite(g_hole) || g_hole < 0.0) issues.add("g_hole", "must be >= 0");
  if (!(detuning > 0.0) || !std::isfinite(detuning)) {
    issues.add("pulse.detuning", "must be > 0 (red detuning)");
  }
  if (!(calibration_k > 0.0) || !std::isfinite(calibration_k)) {
    issues.add("pulse.calibration_k", "must be > 0");
  }
  if (!(pulse_duration > 0.0)) issues.add("pulse.duration", "must be > 0");
  if (pump.rabi < 0.0) issues.add("pump.rabi", "must be >= 0");
  if (pump.duration < 0.0) issues.add("pump.duration", "must be >= 0");
  if (pump.settle < 0.0) issues.add("pump.settle", "must be >= 0");
  if (pump.curve_points < 2) issues.add("pump.curve_points", "must be >= 2");
  if (readout == ReadoutMode::photon_counts && !(readout_duration > 0.0)) {
    issues.add("readout.duration", "must be > 0 for photon-count readout");
  }
  if (readout_rabi < 0.0) issues.add("readout.rabi", "must be >= 0");
  if (angle_spread.relative_sigma < 0.0) issues.add("angle_spread.relative_sigma", "must be >= 0");
  if (angle_spread.nodes < 1 || angle_spread.nodes > 40) {
    issues.add("angle_spread.nodes", "must lie in [1, 40]");
  }
  if (jobs < 0) issues.add("jobs", "must be >= 0");
  merge([&] { dissipators.validate(); });
  merge([&] { integrator.validate(); });
  issues.throw_if_any();
}

nlohmann::json ExperimentSetup::to_json() const {
  auto shape_name = [](PulseShape p) {
    switch (p) {
      case PulseShape::gaussian: return "gaussian";
      case PulseShape::sech2: return "sech2";
      case PulseShape::rectangular: return "rectangular";
    }
    return "gaussian";
  };
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : coupling_weights) weights.push_back({w.real(), w.imag()});
  const auto& d = dissipators;
  nlohmann::json injected{{"kind", d.injected.kind == InjectedDephasing::Kind::none ? "none"
                                   : d.injected.kind == InjectedDephasing::Kind::exponential
                                       ? "exponential"
                                       : "cubed_exponential"}};
  if (d.injected.kind != InjectedDephasing::Kind::none) {
    injected["decay_time_s"] = d.injected.decay_time;
    injected["origin_s"] = d.injected.origin;
  }
  return {
      {"g_electron", g_electron},
      {"g_hole", g_hole},
      {"field_T", field},
      {"omega_e_rad_s", omega_e()},
      {"pulse",
       {{"shape", shape_name(shape)},
        {"duration_s", pulse_duration},
        {"detuning_rad_s", detuning},
        {"calibration_k", calibration_k},
        {"coupling_weights", weights}}},
      {"dissipators",
       {{"radiative_rate_s-1", d.radiative_rate},
        {"branching", {{d.branching[0][0], d.branching[0][1]}, {d.branching[1][0], d.branching[1][1]}}},
        {"t1_rate_s-1", d.t1_rate},
        {"ground_dephasing_rate_s-1", d.ground_dephasing_rate},
        {"beta1", d.beta1},
        {"beta2_s_rad-1", d.beta2},
        {"injected", injected}}},
      {"integrator",
       {{"method", integrator.method == IntegratorMethod::adaptive_rk ? "adaptive_rk"
                                                                       : "matrix_exponential"},
        {"rel_tol", integrator.rel_tol},
        {"abs_tol", integrator.abs_tol}}},
      {"pump",
       {{"enabled", pump.enabled},
        {"rabi_rad_s", pump.rabi},
        {"duration_s", pump.duration},
        {"settle_s", pump.settle}}},
      {"readout",
       {{"mode", to_string(readout)},
        {"duration_s", readout_duration},
        {"rabi_rad_s", readout_rabi}}},
      {"angle_spread",
       {{"relative_sigma", angle_spread.relative_sigma}, {"nodes", angle_spread.nodes}}},
  };
}

ExperimentSetup default_setup(const MaterialParams& m, double field) {
  ExperimentSetup s;
  s.g_electron = m.g_electron;
  s.g_hole = m.g_hole;
  s.field = field;
  s.dissipators.radiative_rate = 1e9;
  s.dissipators.t1_rate = t1_rate_model(field);
  s.calibration_k = calibration_for_angle(s, 40e-12, kPi);
  return s;
}

namespace {

double far_detuned_factor(const ExperimentSetup& s) {
  const LevelScheme l = s.levels();
  return 0.5 * (1.0 / l.detuning + 1.0 / (l.detuning + l.omega_h));
}

}  // namespace

double calibration_for_angle(const ExperimentSetup& s, double energy, double angle) {
  if (!(energy > 0.0)) throw ValidationError("energy", "must be > 0");
  return angle / (energy * far_detuned_factor(s));
}

double energy_for_angle(const ExperimentSetup& s, double angle) {
  if (!(s.calibration_k > 0.0)) throw ValidationError("pulse.calibration_k", "must be > 0");
  return angle / (s.calibration_k * far_detuned_factor(s));
}

DensityMatrix scramble(const DensityMatrix&) { return DensityMatrix(thermal()); }

PumpResult optical_pump(const DensityMatrix& rho0, const ExperimentSetup& s, double rabi,
                        double duration) {
  const LevelScheme pump = pump_scheme(s.levels());
  const DissipatorSet d = without_injected(s.dissipators);
  const int n = std::max(s.pump.curve_points, 2);
  const double dt = duration / (n - 1);
  const Matrix4c h = hamiltonian_matrix(pump, s.coupling_weights, rabi);
  const Superoperator step = (liouvillian(h, d, rabi) * dt).exp();

  PumpResult out;
  Vec16 v = Eigen::Map<const Vec16>(rho0.matrix().data());
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      v = step * v;
      // scaling and squaring of a stiff generator leaks ~1e-10 of trace per step
      v /= (v(0) + v(5) + v(10) + v(15)).real();
    }
    const double excited = (v(kTrionDown + 4 * kTrionDown) + v(kTrionUp + 4 * kTrionUp)).real();
    out.curve_time.push_back(i * dt);
    out.photon_rate.push_back(d.radiative_rate * excited);
  }
  Matrix4c rho = Eigen::Map<const Matrix4c>(v.data());
  rho = 0.5 * (rho + rho.adjoint()).eval();
  require_physical(rho, duration);
  out.state = DensityMatrix(rho);
  out.fidelity = out.state.population(kDown);
  return out;
}

DensityMatrix prepared_state(const ExperimentSetup& s) {
  if (!s.pump.enabled) return DensityMatrix(thermal());
  const PumpResult p = optical_pump(DensityMatrix(thermal()), s, s.pump.rabi, s.pump.duration);
  const LevelScheme control = s.levels();
  const Matrix4c in_control =
      change_frame(p.state.matrix(), pump_scheme(control).energies(), control.energies(),
                   -s.pump.settle);
  return DensityMatrix(propagate_free(in_control, control.energies(),
                                      without_injected(s.dissipators), -s.pump.settle, 0.0));
}

void ExperimentTrace::validate() const {
  IssueCollector issues;
  const std::size_t n = abscissa.size();
  if (p_up.size() != n || p_down.size() != n) issues.add("trace", "column lengths differ");
  if (!p_up_stderr.empty() && p_up_stderr.size() != n) issues.add("trace", "stderr length differs");
  issues.throw_if_any();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = p_up[i], d = p_down[i];
    if (!(u >= -kPopulationSlack && u <= 1.0 + kPopulationSlack && d >= -kPopulationSlack &&
          d <= 1.0 + kPopulationSlack && u + d <= 1.0 + kPopulationSlack)) {
      std::ostringstream msg;
      msg << experiment << " trace point " << i << " has p_up " << u << ", p_down " << d;
      throw NumericalError(msg.str());
    }
  }
}

EnsembleAverage ensemble_average(
    const std::function<SampleOutcome(const OverhauserSample&)>& kernel,
    const std::optional<BathModel>& bath, const EnsembleOptions& opt, int jobs) {
  if (opt.samples < 1) throw ValidationError("bath.samples", "must be >= 1");
  const std::vector<OverhauserSample> samples =
      bath ? sample_overhauser(*bath, opt.seed, opt.samples)
           : std::vector<OverhauserSample>{OverhauserSample{}};
  const long n = static_cast<long>(samples.size());
  std::vector<SampleOutcome> outcomes(samples.size());
  parallel_for(n, jobs, [&](long i) { outcomes[static_cast<std::size_t>(i)] = kernel(samples[static_cast<std::size_t>(i)]); });

  EnsembleAverage avg;
  const std::size_t points = outcomes.front().p_up.size();
  avg.mean.p_up.assign(points, 0.0);
  avg.mean.p_down.assign(points, 0.0);
  avg.mean.photon_counts.assign(outcomes.front().photon_counts.size(), 0.0);
  for (const auto& o : outcomes) {
    for (std::size_t k = 0; k < points; ++k) {
      avg.mean.p_up[k] += o.p_up[k];
      avg.mean.p_down[k] += o.p_down[k];
    }
    for (std::size_t k = 0; k < o.photon_counts.size(); ++k) avg.mean.photon_counts[k] += o.photon_counts[k];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : avg.mean.p_up) v *= inv;
  for (auto& v : avg.mean.p_down) v *= inv;
  for (auto& v : avg.mean.photon_counts) v *= inv;
  avg.p_up_stderr.assign(points, 0.0);
  if (n > 1) {
    for (std::size_t k = 0; k < points; ++k) {
      double var = 0.0;
      for (const auto& o : outcomes) var += std::pow(o.p_up[k] - avg.mean.p_up[k], 2);
      avg.p_up_stderr[k] = std::sqrt(var / static_cast<double>(n - 1) * inv);
    }
  }
  return avg;
}

ExperimentTrace run_rabi_sweep(const ExperimentSetup& s, std::span<const double> energies,
                               const std::optional<BathModel>& bath, const EnsembleOptions& ens) {
  s.validate();
  if (energies.empty()) throw ValidationError("rabi.energies", "need at least one energy");
  for (double e : energies) {
    if (!(e >= 0.0)) throw ValidationError("rabi.energies", "energies must be >= 0");
  }
  const Matrix4c rho0 = prepared_state(s).matrix();
  const Readout readout(s);
  const bool many = bath && ens.samples > 1;
  const double span = max_shift(bath, ens);
  std::vector<std::unique_ptr<MapTable>> tables(energies.size());
  parallel_for(static_cast<long>(energies.size()), s.jobs, [&](long i) {
    tables[static_cast<std::size_t>(i)] = std::make_unique<MapTable>(
        s, energies[static_cast<std::size_t>(i)], span, ens.exact_pulse_maps, !many);
  });
  auto kernel = [&](const OverhauserSample& sample) {
    std::vector<SampleOutcome> per(energies.size());
    parallel_for(static_cast<long>(energies.size()), many ? 1 : s.jobs, [&](long i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const PulseTrain train(s, *tables[k], sample.detuning, energies[k]);
      const double arrival = 0.0;
      record_train(train, readout, rho0, std::span(&arrival, 1), per[static_cast<std::size_t>(i)]);
    });
    SampleOutcome out;
    for (const auto& p : per) {
      out.p_up.push_back(p.p_up[0]);
      out.p_down.push_back(p.p_down[0]);
      if (!p.photon_counts.empty()) out.photon_counts.push_back(p.photon_counts[0]);
    }
    return out;
  };
  const EnsembleAverage avg = ensemble_average(kernel, bath, ens, many ? s.jobs : 1);
  ExperimentTrace t;
  t.experiment = "rabi";
  t.abscissa_name = "energy_J";
  t.abscissa.assign(energies.begin(), energies.end());
  fill_trace(t, avg);
  t.metadata = {{"setup", s.to_json()}, {"ensemble", ensemble_json(bath, ens)}};
  t.validate();
  return t;
}

std::vector<double> DelayScan::delays() const {
  std::vector<double> out;
  for (double c : centers) {
    for (int k = 0; k < points; ++k) out.push_back(c + k * step);
  }
  return out;
}

void check_fringe_sampling(const ExperimentSetup& s, double step) {
  const double max_step = 2.0 * kPi / s.omega_e() / 8.0;
  if (!(step > 0.0) || step > max_step * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "delay step " << step << " s aliases the Larmor precession; use a step <= "
        << max_step << " s (one eighth of the period at " << s.field << " T)";
    throw ValidationError("scan.step", msg.str());
  }
}

namespace {

void check_scan_points(int points) {
  if (points < 4) throw ValidationError("scan.points", "need >= 4 points per window");
}

}  // namespace

RamseyResult run_ramsey(const ExperimentSetup& s, const DelayScan& scan, double pulse_energy,
                        const std::optional<BathModel>& bath, const EnsembleOptions& ens) {
  s.validate();
  check_fringe_sampling(s, scan.step);
  check_scan_points(scan.points);
  if (scan.centers.empty()) throw ValidationError("scan.centers", "need at least one window");
  const std::vector<double> taus = scan.delays();
  for (double t : taus) {
    if (t < 0.0) throw ValidationError("scan.centers", "delays must be >= 0");
  }
  const Matrix4c rho0 = prepared_state(s).matrix();
  const Readout readout(s);
  const bool many = bath && ens.samples > 1;
  const MapTable table(s, pulse_energy, max_shift(bath, ens), ens.exact_pulse_maps);
  auto kernel = [&](const OverhauserSample& sample) {
    const PulseTrain train(s, table, sample.detuning, pulse_energy);
    std::vector<SampleOutcome> per(taus.size());
    parallel_for(static_cast<long>(taus.size()), many ? 1 : s.jobs, [&](long i) {
      const double arrivals[2] = {0.0, taus[static_cast<std::size_t>(i)]};
      record_train(train, readout, rho0, arrivals, per[static_cast<std::size_t>(i)]);
    });
    SampleOutcome out;
    for (const auto& p : per) {
      out.p_up.push_back(p.p_up[0]);
      out.p_down.push_back(p.p_down[0]);
      if (!p.photon_counts.empty()) out.photon_counts.push_back(p.photon_counts[0]);
    }
    return out;
  };
  const EnsembleAverage avg = ensemble_average(kernel, bath, ens, many ? s.jobs : 1);
  RamseyResult r;
  r.trace.experiment = "ramsey";
  r.trace.abscissa_name = "tau_s";
  r.trace.abscissa = taus;
  fill_trace(r.trace, avg);
  r.trace.metadata = {{"setup", s.to_json()},
                      {"ensemble", ensemble_json(bath, ens)},
                      {"pulse_energy_J", pulse_energy}};
  r.trace.validate();
  r.windows = fit_windows(r.trace.abscissa, r.trace.p_up, scan.centers, scan.points, s.omega_e());
  return r;
}

EchoResult run_echo(const ExperimentSetup& s, const EchoScan& scan, double pulse_energy,
                    const std::optional<BathModel>& bath, const EnsembleOptions& ens) {
  s.validate();
  check_fringe_sampling(s, scan.step);
  check_scan_points(scan.points);
  if (scan.tau1.empty()) throw ValidationError("echo.tau1", "need at least one tau1");
  std::vector<double> offsets;
  for (int k = 0; k < scan.points; ++k) offsets.push_back((k - scan.points / 2) * scan.step);
  for (double t1 : scan.tau1) {
    if (!(t1 + offsets.front() > 0.0) || !(t1 > 0.0)) {
      throw ValidationError("echo.tau1", "tau1 must exceed half the scan width");
    }
  }
  const Matrix4c rho0 = prepared_state(s).matrix();
  const Readout readout(s);
  const bool many = bath && ens.samples > 1;
  const std::size_t m = offsets.size();
  const MapTable table(s, pulse_energy, max_shift(bath, ens), ens.exact_pulse_maps);
  auto kernel = [&](const OverhauserSample& sample) {
    const PulseTrain train(s, table, sample.detuning, pulse_energy);
    std::vector<SampleOutcome> per(scan.tau1.size() * m);
    parallel_for(static_cast<long>(per.size()), many ? 1 : s.jobs, [&](long i) {
      const std::size_t w = static_cast<std::size_t>(i) / m;
      const double t1 = scan.tau1[w];
      const double arrivals[3] = {0.0, t1, 2.0 * t1 + offsets[static_cast<std::size_t>(i) % m]};
      record_train(train, readout, rho0, arrivals, per[static_cast<std::size_t>(i)]);
    });
    SampleOutcome out;
    for (const auto& p : per) {
      out.p_up.push_back(p.p_up[0]);
      out.p_down.push_back(p.p_down[0]);
      if (!p.photon_counts.empty()) out.photon_counts.push_back(p.photon_counts[0]);
    }
    return out;
  };
  const EnsembleAverage avg = ensemble_average(kernel, bath, ens, many ? s.jobs : 1);
  EchoResult r;
  r.trace.experiment = "echo";
  r.trace.abscissa_name = "tau_total_s";
  for (double t1 : scan.tau1) {
    for (double o : offsets) r.trace.abscissa.push_back(2.0 * t1 + o);
  }
  fill_trace(r.trace, avg);
  r.trace.metadata = {{"setup", s.to_json()},
                      {"ensemble", ensemble_json(bath, ens)},
                      {"pulse_energy_J", pulse_energy},
                      {"tau1_s", scan.tau1}};
  r.trace.validate();
  std::vector<double> centers;
  for (double t1 : scan.tau1) centers.push_back(2.0 * t1);
  r.windows = fit_windows(r.trace.abscissa, r.trace.p_up, centers, scan.points, s.omega_e());
  return r;
}

T1Result run_t1_recovery(const ExperimentSetup& s, std::span<const double> waits) {
  s.validate();
  if (waits.size() < 4) throw ValidationError("t1.waits", "need at least 4 wait values");
  for (double w : waits) {
    if (!(w >= 0.0)) throw ValidationError("t1.waits", "waits must be >= 0");
  }
  const Matrix4c rho0 = prepared_state(s).matrix();
  const Eigen::Vector4d energies = s.levels().energies();
  const DissipatorSet d = without_injected(s.dissipators);
  T1Result r;
  r.trace.experiment = "t1";
  r.trace.abscissa_name = "wait_s";
  for (double w : waits) {
    const Matrix4c rho = propagate_free(rho0, energies, d, 0.0, w);
    r.trace.abscissa.push_back(w);
    r.trace.p_up.push_back(rho(kUp, kUp).real());
    r.trace.p_down.push_back(rho(kDown, kDown).real());
  }
  r.trace.p_up_stderr.assign(waits.size(), 0.0);
  r.trace.metadata = {{"setup", s.to_json()}};
  r.trace.validate();

  CurveModel model = CurveModel::make(ModelKind::exp_decay);
  const auto& x = r.trace.abscissa;
  const auto& y = r.trace.p_up;
  const auto lo = std::min_element(x.begin(), x.end()) - x.begin();
  const auto hi = std::max_element(x.begin(), x.end()) - x.begin();
  const double offset = y[static_cast<std::size_t>(hi)];
  const double amp = y[static_cast<std::size_t>(lo)] - offset;
  double decay = 0.5 * (x[static_cast<std::size_t>(hi)] - x[static_cast<std::size_t>(lo)]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (amp != 0.0 && (y[i] - offset) / amp <= std::exp(-1.0) && x[i] > 0.0) {
      decay = std::min(decay, x[i]);
    }
  }
  model.parameter("amplitude").initial = amp;
  model.parameter("decay_time").initial = decay > 0.0 ? decay : 1.0;
  model.parameter("offset").initial = offset;
  model.parameter("offset").fixed = false;
  r.fit = fit_curve(model, x, y);
  r.t1 = r.fit.value("decay_time");
  r.t1_error = r.fit.uncertainty("decay_time");
  return r;
}

double four_level_rotation_angle(const ExperimentSetup& s, double energy) {
  const Segment seg = pulse_segment(s.levels(), s.pulse(energy, 0.0), s.calibration_k);
  const Matrix4c rho =
      propagate(DensityMatrix::pure(kDown).matrix(), std::span(&seg, 1), DissipatorSet{}, s.integrator);
  return 2.0 * std::asin(std::sqrt(std::clamp(rho(kUp, kUp).real(), 0.0, 1.0)));
}

void SequenceSpec::validate() const {
  IssueCollector issues;
  if (bath_samples < 1) issues.add("sequence.bath_samples", "must be >= 1");
  if (steps.empty()) issues.add("sequence.steps", "need at least one step");
  double last_arrival = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string key = "sequence.steps[" + std::to_string(i) + "]";
    std::visit(
        [&](const auto& st) {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, PumpStep>) {
            if (st.duration < 0.0 || st.rabi < 0.0) issues.add(key, "pump duration and rabi must be >= 0");
          } else if constexpr (std::is_same_v<T, WaitStep>) {
            if (st.duration < 0.0) issues.add(key, "wait duration must be >= 0");
          } else if constexpr (std::is_same_v<T, ReadoutStep>) {
            if (st.duration < 0.0 || st.rabi < 0.0) issues.add(key, "readout duration and rabi must be >= 0");
          } else if constexpr (std::is_same_v<T, ControlStep>) {
            if (st.pulse.arrival_time < last_arrival) {
              issues.add(key, "control pulses must be in chronological order");
            }
            last_arrival = st.pulse.arrival_time;
            if (!(st.pulse.duration > 0.0) || st.pulse.energy < 0.0) {
              issues.add(key, "pulse needs duration > 0 and energy >= 0");
            }
          }
        },
        steps[i]);
  }
  issues.throw_if_any();
}

std::vector<ReadoutValue> run_sequence(const ExperimentSetup& s, const SequenceSpec& spec,
                                       double zeeman_shift) {
  s.validate();
  spec.validate();
  const LevelScheme control = s.levels(zeeman_shift);
  const LevelScheme pump = pump_scheme(control);
  const DissipatorSet& d = s.dissipators;
  Matrix4c rho = thermal();
  double clock = spec.start_time;
  std::vector<ReadoutValue> out;

  auto drive = [&](double rabi, double duration, std::vector<double>* sample_times) {
    Matrix4c in_pump = change_frame(rho, control.energies(), pump.energies(), clock);
    const Segment seg = cw_segment(pump, s.coupling_weights, rabi, clock, duration);
    const Trajectory tr = evolve(DensityMatrix(in_pump), std::span(&seg, 1), d, s.integrator,
                                 sample_times ? *sample_times : std::vector<double>{});
    clock += duration;
    rho = change_frame(tr.final_state.matrix(), pump.energies(), control.energies(), clock);
    return tr;
  };

  std::size_t i = 0;
  while (i < spec.steps.size()) {
    const SequenceStep& step = spec.steps[i];
    if (const auto* p = std::get_if<PumpStep>(&step)) {
      drive(p->rabi, p->duration, nullptr);
      ++i;
    } else if (std::holds_alternative<ScrambleStep>(step)) {
      rho = thermal();
      ++i;
    } else if (const auto* w = std::get_if<WaitStep>(&step)) {
      rho = propagate_free(rho, control.energies(), d, clock, clock + w->duration);
      clock += w->duration;
      ++i;
    } else if (const auto* r = std::get_if<ReadoutStep>(&step)) {
      ReadoutValue v;
      v.time = clock;
      v.p_up = rho(kUp, kUp).real();
      v.p_down = rho(kDown, kDown).real();
      if (r->duration > 0.0) {
        const int n = 401;
        std::vector<double> times;
        for (int k = 0; k < n; ++k) times.push_back(clock + r->duration * k / (n - 1));
        const Trajectory tr = drive(r->rabi, r->duration, &times);
        double acc = 0.0;
        for (std::size_t k = 1; k < tr.samples.size(); ++k) {
          auto exc = [&](std::size_t j) {
            return (tr.samples[j].rho(kTrionDown, kTrionDown) + tr.samples[j].rho(kTrionUp, kTrionUp)).real();
          };
          acc += 0.5 * (exc(k) + exc(k - 1)) * (tr.samples[k].time - tr.samples[k - 1].time);
        }
        v.photon_counts = d.radiative_rate * acc;
      }
      out.push_back(v);
      ++i;
    } else {
      // Collect control pulses whose windows overlap into one segment.
      std::vector<PulseSpec> pulses{std::get<ControlStep>(step).pulse};
      double end = pulses.back().window_end();
      std::size_t j = i + 1;
      while (j < spec.steps.size()) {
        const auto* c = std::get_if<ControlStep>(&spec.steps[j]);
        if (!c || c->pulse.window_start() >= end) break;
        pulses.push_back(c->pulse);
        end = std::max(end, c->pulse.window_end());
        ++j;
      }
      const double start = pulses.front().window_start();
      if (start < clock - 1e-18) {
        throw ValidationError("sequence.steps[" + std::to_string(i) + "]",
                              "pulse window starts before the end of the previous step");
      }
      rho = propagate_free(rho, control.energies(), d, clock, start);
      const Segment seg = pulses.size() == 1
                              ? pulse_segment(control, pulses.front(), s.calibration_k)
                              : merged_pulse_segment(control, pulses, s.calibration_k);
      rho = evolve(DensityMatrix(rho), std::span(&seg, 1), d, s.integrator).final_state.matrix();
      clock = seg.end();
      i = j;
    }
  }
  return out;
}

std::vector<ReadoutValue> run_sequence_ensemble(const ExperimentSetup& s,
                                                const SequenceSpec& spec,
                                                const std::optional<BathModel>& bath) {
  spec.validate();
  const std::vector<OverhauserSample> samples =
      bath ? sample_overhauser(*bath, spec.seed, spec.bath_samples)
           : std::vector<OverhauserSample>{OverhauserSample{}};
  std::vector<std::vector<ReadoutValue>> runs(samples.size());
  parallel_for(static_cast<long>(samples.size()), s.jobs, [&](long k) {
    runs[static_cast<std::size_t>(k)] = run_sequence(s, spec, samples[static_cast<std::size_t>(k)].detuning);
  });
  std::vector<ReadoutValue> mean = runs.front();
  for (std::size_t k = 1; k < runs.size(); ++k) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean[i].p_up += runs[k][i].p_up;
      mean[i].p_down += runs[k][i].p_down;
      mean[i].photon_counts += runs[k][i].photon_counts;
    }
  }
  const double inv = 1.0 / static_cast<double>(runs.size());
  for (auto& v : mean) {
    v.p_up *= inv;
    v.p_down *= inv;
    v.photon_counts *= inv;
  }
  return mean;
}

}  // namespace donorspin
