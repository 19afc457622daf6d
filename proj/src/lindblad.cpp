#include "donorspin/lindblad.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include "donorspin/errors.hpp"

namespace donorspin {

namespace {
constexpr Complex kI(0.0, 1.0);
}

DensityMatrix::DensityMatrix() : m_(Matrix4c::Zero()) { m_(kDown, kDown) = 1.0; }

DensityMatrix DensityMatrix::pure(Level level) {
  Matrix4c m = Matrix4c::Zero();
  m(level, level) = 1.0;
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::from_populations(const Eigen::Vector4d& p) {
  Matrix4c m = Matrix4c::Zero();
  for (int i = 0; i < 4; ++i) m(i, i) = p(i);
  return DensityMatrix(m);
}

Eigen::Vector4d DensityMatrix::populations() const { return m_.diagonal().real(); }

StateDiagnostics diagnose(const Matrix4c& rho) {
  StateDiagnostics s;
  s.trace_error = std::abs(rho.trace() - 1.0);
  s.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const Matrix4c herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(herm, Eigen::EigenvaluesOnly);
  s.min_eigenvalue = es.eigenvalues().minCoeff();
  s.purity = (rho * rho).trace().real();
  return s;
}

void require_physical(const Matrix4c& rho, double time) {
  const auto s = diagnose(rho);
  if (s.min_eigenvalue < -kPositivityTolerance || s.trace_error > kTraceTolerance ||
      s.hermiticity_error > kHermiticityTolerance || !std::isfinite(s.purity)) {
    throw NumericalError("density matrix left the physical set at t = " + std::to_string(time) +
                         " s (min eigenvalue " + std::to_string(s.min_eigenvalue) +
                         ", trace error " + std::to_string(s.trace_error) +
                         ", hermiticity error " + std::to_string(s.hermiticity_error) + ")");
  }
}

double InjectedDephasing::rate(double t) const {
  const double x = t - origin;
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::exponential: return x >= 0.0 ? 1.0 / decay_time : 0.0;
    case Kind::cubed_exponential:
      return x >= 0.0 ? 3.0 * x * x / (decay_time * decay_time * decay_time) : 0.0;
  }
  return 0.0;
}

double InjectedDephasing::integral(double a, double b) const {
  const double xa = std::max(a - origin, 0.0);
  const double xb = std::max(b - origin, 0.0);
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::exponential: return (xb - xa) / decay_time;
    case Kind::cubed_exponential: {
      const double ua = xa / decay_time;
      const double ub = xb / decay_time;
      return ub * ub * ub - ua * ua * ua;
    }
  }
  return 0.0;
}

void DissipatorSet::validate() const {
  IssueCollector issues;
  if (!(radiative_rate >= 0.0)) issues.add("radiative_rate", "must be >= 0");
  if (!(t1_rate >= 0.0)) issues.add("t1_rate", "must be >= 0");
  if (!(ground_dephasing_rate >= 0.0)) issues.add("ground_dephasing_rate", "must be >= 0");
  if (!(beta1 >= 0.0)) issues.add("beta1", "must be >= 0");
  if (!(beta2 >= 0.0)) issues.add("beta2", "must be >= 0");
  for (int e = 0; e < 2; ++e) {
    const auto& row = branching[e];
    if (row[0] < 0.0 || row[0] > 1.0 || row[1] < 0.0 || row[1] > 1.0 ||
        std::abs(row[0] + row[1] - 1.0) > 1e-12) {
      issues.add("branching[" + std::to_string(e) + "]", "weights must lie in [0,1] and sum to 1");
    }
  }
  if (injected.kind != InjectedDephasing::Kind::none && !(injected.decay_time > 0.0)) {
    issues.add("injected.decay_time", "must be > 0");
  }
  issues.throw_if_any();
}

void IntegratorConfig::validate() const {
  IssueCollector issues;
  if (!(rel_tol > 0.0 && rel_tol <= 1e-3)) issues.add("rel_tol", "must lie in (0, 1e-3]");
  if (!(abs_tol > 0.0 && abs_tol <= 1e-3)) issues.add("abs_tol", "must lie in (0, 1e-3]");
  if (!(min_step > 0.0)) issues.add("min_step", "must be > 0");
  if (!(min_step <= max_step)) issues.add("min_step", "must not exceed max_step");
  issues.throw_if_any();
}

Matrix4c apply_dissipator(const Matrix4c& rho, const DissipatorSet& d, double excited_dephasing,
                          double ground_dephasing) {
  const double gamma = d.radiative_rate;
  const double half_t1 = 0.5 * d.t1_rate;
  const std::array<double, 4> loss{half_t1, half_t1, gamma, gamma};
  Matrix4c out;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      double kappa = 0.5 * (loss[i] + loss[j]);
      if (i != j) {
        const bool gi = i < 2;
        const bool gj = j < 2;
        if (gi && gj) {
          kappa += ground_dephasing;
        } else if (gi != gj) {
          kappa += 0.25 * ground_dephasing + excited_dephasing;
        }
      }
      out(i, j) = -kappa * rho(i, j);
    }
  }
  const Complex p_tx = rho(kTrionDown, kTrionDown);
  const Complex p_ux = rho(kTrionUp, kTrionUp);
  out(kDown, kDown) += half_t1 * rho(kUp, kUp) +
                       gamma * (d.branching[0][0] * p_tx + d.branching[1][0] * p_ux);
  out(kUp, kUp) += half_t1 * rho(kDown, kDown) +
                   gamma * (d.branching[0][1] * p_tx + d.branching[1][1] * p_ux);
  return out;
}

Matrix4c lindblad_rhs(const Matrix4c& rho, const Matrix4c& h, const DissipatorSet& d,
                      double instant_rabi, double t) {
  Matrix4c out = -kI * (h * rho - rho * h);
  out += apply_dissipator(rho, d, d.excited_dephasing(instant_rabi),
                          d.ground_dephasing_rate + d.injected.rate(t));
  return out;
}

Superoperator liouvillian(const Matrix4c& h, const DissipatorSet& d, double instant_rabi,
                          double t) {
  Superoperator l;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      Matrix4c e = Matrix4c::Zero();
      e(i, j) = 1.0;
      const Matrix4c col = lindblad_rhs(e, h, d, instant_rabi, t);
      l.col(i + 4 * j) = Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(col.data());
    }
  }
  return l;
}

Matrix4c apply_map(const Superoperator& map, const Matrix4c& rho) {
  Matrix4c out;
  Eigen::Map<Eigen::Matrix<Complex, 16, 1>>(out.data()) =
      map * Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(rho.data());
  return out;
}

namespace {

// Integral over [0, t] of exp(-a (t - s)) exp(-b s) ds.
double exp_convolution(double a, double b, double t) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double diff = hi - lo;
  if (diff * t < 1e-300 || diff == 0.0) return t * std::exp(-lo * t);
  return std::exp(-lo * t) * (-std::expm1(-diff * t)) / diff;
}

}  // namespace

Matrix4c propagate_free(const Matrix4c& rho, const Eigen::Vector4d& energies,
                        const DissipatorSet& d, double t0, double t1) {
  const double dt = t1 - t0;
  if (dt == 0.0) return rho;
  const double gamma = d.radiative_rate;
  const double half_t1 = 0.5 * d.t1_rate;
  const std::array<double, 4> loss{half_t1, half_t1, gamma, gamma};
  const double injected = d.injected.integral(t0, t1);
  const double gd = d.ground_dephasing_rate;

  Matrix4c out;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      if (i == j) continue;
      double decay = 0.5 * (loss[i] + loss[j]) * dt;
      const bool gi = i < 2;
      const bool gj = j < 2;
      if (gi && gj) {
        decay += gd * dt + injected;
      } else if (gi != gj) {
        decay += 0.25 * (gd * dt + injected);
      }
      const double phase = -(energies(i) - energies(j)) * dt;
      out(i, j) = rho(i, j) * std::exp(Complex(-decay, phase));
    }
  }

  // Populations: excited states decay at gamma, the ground difference relaxes
  // at t1_rate while being fed by the branching imbalance.
  const Complex p_tx = rho(kTrionDown, kTrionDown);
  const Complex p_ux = rho(kTrionUp, kTrionUp);
  const double excited_decay = std::exp(-gamma * dt);
  const double excited_lost = -std::expm1(-gamma * dt);
  const Complex ground_sum =
      rho(kDown, kDown) + rho(kUp, kUp) + (p_tx + p_ux) * excited_lost;
  const double conv = exp_convolution(d.t1_rate, gamma, dt);
  const Complex feed = gamma * ((d.branching[0][0] - d.branching[0][1]) * p_tx +
                                (d.branching[1][0] - d.branching[1][1]) * p_ux);
  const Complex ground_diff =
      (rho(kDown, kDown) - rho(kUp, kUp)) * std::exp(-d.t1_rate * dt) + feed * conv;
  out(kDown, kDown) = 0.5 * (ground_sum + ground_diff);
  out(kUp, kUp) = 0.5 * (ground_sum - ground_diff);
  out(kTrionDown, kTrionDown) = p_tx * excited_decay;
  out(kTrionUp, kTrionUp) = p_ux * excited_decay;
  return out;
}

Segment free_segment(const Eigen::Vector4d& energies, double start, double duration) {
  Segment s;
  s.start = start;
  s.duration = duration;
  s.energies = energies;
  return s;
}

Segment free_segment(const LevelScheme& levels, double start, double duration) {
  return free_segment(levels.energies(), start, duration);
}

namespace {

Matrix4c coupling_matrix(const CouplingWeights& w, double rabi) {
  LevelScheme zero;
  return hamiltonian_matrix(zero, w, rabi);
}

}  // namespace

Segment pulse_segment(const LevelScheme& levels, const PulseSpec& pulse, double calibration_k) {
  Segment s;
  s.start = pulse.window_start();
  s.duration = pulse.window_end() - pulse.window_start();
  s.energies = levels.energies();
  s.rabi = [pulse, calibration_k](double t) { return envelope_value(pulse, calibration_k, t); };
  s.coupling = [pulse, calibration_k](double t) {
    return coupling_matrix(pulse.coupling_weights, envelope_value(pulse, calibration_k, t));
  };
  s.max_step = pulse.duration / 50.0;
  return s;
}

Segment merged_pulse_segment(const LevelScheme& levels, std::vector<PulseSpec> pulses,
                             double calibration_k) {
  if (pulses.empty()) throw ValidationError("pulses", "need at least one pulse");
  double lo = pulses.front().window_start();
  double hi = pulses.front().window_end();
  double shortest = pulses.front().duration;
  for (const auto& p : pulses) {
    lo = std::min(lo, p.window_start());
    hi = std::max(hi, p.window_end());
    shortest = std::min(shortest, p.duration);
  }
  auto rabi = [pulses, calibration_k](double t) {
    double sq = 0.0;
    for (const auto& p : pulses) {
      const double r = envelope_value(p, calibration_k, t);
      sq += r * r;
    }
    return std::sqrt(sq);
  };
  Segment s;
  s.start = lo;
  s.duration = hi - lo;
  s.energies = levels.energies();
  s.rabi = rabi;
  const CouplingWeights w = pulses.front().coupling_weights;
  s.coupling = [rabi, w](double t) { return coupling_matrix(w, rabi(t)); };
  s.max_step = shortest / 50.0;
  return s;
}

Segment cw_segment(const LevelScheme& levels, const CouplingWeights& weights, double rabi,
                   double start, double duration) {
  Segment s;
  s.start = start;
  s.duration = duration;
  s.energies = levels.energies();
  const Matrix4c c = coupling_matrix(weights, rabi);
  s.coupling = [c](double) { return c; };
  s.rabi = [rabi](double) { return rabi; };
  s.time_independent = true;
  return s;
}

Segment constant_segment(const Matrix4c& h, double start, double duration, double rabi) {
  Segment s;
  s.start = start;
  s.duration = duration;
  s.energies = h.diagonal().real();
  Matrix4c off = h;
  off.diagonal().setZero();
  s.coupling = [off](double) { return off; };
  s.rabi = [rabi](double) { return rabi; };
  return s;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                 e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

// Interaction picture relative to diag(energies), anchored at t_ref.
class InteractionRhs {
 public:
  InteractionRhs(const Segment& seg, const DissipatorSet& d, double t_ref)
      : seg_(seg), d_(d), t_ref_(t_ref) {}

  Matrix4c operator()(double t, const Matrix4c& rho_i) const {
    const double tau = t - t_ref_;
    Eigen::Matrix<Complex, 4, 1> ph;
    for (int k = 0; k < 4; ++k) ph(k) = std::exp(Complex(0.0, seg_.energies(k) * tau));
    Matrix4c v = seg_.coupling(t);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) v(i, j) *= ph(i) * std::conj(ph(j));
    }
    const double rabi = seg_.rabi ? seg_.rabi(t) : 0.0;
    Matrix4c out = -kI * (v * rho_i - rho_i * v);
    out += apply_dissipator(rho_i, d_, d_.excited_dephasing(rabi),
                            d_.ground_dephasing_rate + d_.injected.rate(t));
    return out;
  }

  Matrix4c to_interaction(const Matrix4c& rho, double t) const { return rotate(rho, t, +1.0); }
  Matrix4c from_interaction(const Matrix4c& rho_i, double t) const {
    return rotate(rho_i, t, -1.0);
  }

 private:
  Matrix4c rotate(const Matrix4c& m, double t, double sign) const {
    const double tau = t - t_ref_;
    Matrix4c out;
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        out(i, j) =
            m(i, j) * std::exp(Complex(0.0, sign * (seg_.energies(i) - seg_.energies(j)) * tau));
      }
    }
    return out;
  }

  const Segment& seg_;
  const DissipatorSet& d_;
  double t_ref_;
};

double error_norm(const Matrix4c& err, const Matrix4c& y0, const Matrix4c& y1,
                  const IntegratorConfig& cfg) {
  double worst = 0.0;
  for (int k = 0; k < 16; ++k) {
    const double scale =
        cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0.data()[k]), std::abs(y1.data()[k]));
    worst = std::max(worst, std::abs(err.data()[k]) / scale);
  }
  return worst;
}

struct Stepper {
  const DissipatorSet& d;
  const IntegratorConfig& cfg;
  long steps = 0;
  double step_hint = 0.0;

  double segment_max_step(const Segment& seg) const {
    double h = cfg.max_step;
    if (seg.max_step > 0.0) h = std::min(h, seg.max_step);
    return h;
  }

  // Advances rho from t0 to t1 within `seg` (lab rotating frame in and out).
  void advance(Matrix4c& rho, const Segment& seg, double t0, double t1) {
    if (t1 <= t0) return;
    if (seg.is_free()) {
      rho = propagate_free(rho, seg.energies, d, t0, t1);
      ++steps;
      return;
    }
    if (seg.time_independent) {
      const double tm = 0.5 * (t0 + t1);
      Matrix4c h = seg.coupling(tm);
      for (int k = 0; k < 4; ++k) h(k, k) += seg.energies(k);
      const double rabi = seg.rabi ? seg.rabi(tm) : 0.0;
      const Superoperator gen = liouvillian(h, d, rabi, tm) * (t1 - t0);
      rho = apply_map(gen.exp(), rho);
      ++steps;
      return;
    }
    if (cfg.method == IntegratorMethod::matrix_exponential) {
      advance_exponential(rho, seg, t0, t1);
    } else {
      advance_rk(rho, seg, t0, t1);
    }
  }

  void advance_exponential(Matrix4c& rho, const Segment& seg, double t0, double t1) {
    double hmax = segment_max_step(seg);
    if (!std::isfinite(hmax)) hmax = seg.duration / 200.0;
    const long n = std::max<long>(1, static_cast<long>(std::ceil((t1 - t0) / hmax - 1e-9)));
    const double h = (t1 - t0) / static_cast<double>(n);
    for (long k = 0; k < n; ++k) {
      const double tm = t0 + (static_cast<double>(k) + 0.5) * h;
      Matrix4c ham = seg.coupling(tm);
      for (int q = 0; q < 4; ++q) ham(q, q) += seg.energies(q);
      const double rabi = seg.rabi ? seg.rabi(tm) : 0.0;
      const Superoperator gen = liouvillian(ham, d, rabi, tm) * h;
      rho = apply_map(gen.exp(), rho);
      ++steps;
    }
  }

  void advance_rk(Matrix4c& rho, const Segment& seg, double t0, double t1) {
    const InteractionRhs f(seg, d, t0);
    const double hmax = segment_max_step(seg);
    Matrix4c y = rho;  // interaction picture coincides with the lab frame at t0
    double t = t0;
    double h = step_hint > 0.0 ? std::min(step_hint, hmax) : std::min(hmax, (t1 - t0) / 16.0);
    Matrix4c k1 = f(t, y);
    while (t < t1) {
      const double remaining = t1 - t;
      bool last = false;
      if (h >= remaining) {
        h = remaining;
        last = true;
      }
      if (h < cfg.min_step && !last) {
        throw IntegrationError("step size underflow in adaptive integrator", t);
      }
      const Matrix4c k2 = f(t + c2 * h, y + h * (a21 * k1));
      const Matrix4c k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      const Matrix4c k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const Matrix4c k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const double t_new = last ? t1 : t + h;
      const Matrix4c k6 =
          f(t_new, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Matrix4c y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Matrix4c k7 = f(t_new, y_new);
      const Matrix4c err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double en = error_norm(err, y, y_new, cfg);
      if (!std::isfinite(en)) {
        throw IntegrationError("non-finite state in adaptive integrator", t);
      }
      if (en <= 1.0) {
        t = t_new;
        y = y_new;
        k1 = k7;
        ++steps;
        const double grow = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
        if (!last) step_hint = h;
        h = std::min(h * grow, hmax);
      } else {
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      }
    }
    rho = f.from_interaction(y, t1);
  }
};

void check_tiling(std::span<const Segment> segments) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.duration >= 0.0) || !std::isfinite(s.duration)) {
      throw ValidationError("segments[" + std::to_string(i) + "]", "duration must be >= 0");
    }
    if (i > 0) {
      const double prev_end = segments[i - 1].end();
      const double tol = 1e-9 * std::max({std::abs(segments[i - 1].duration), s.duration,
                                          1e-3 * std::abs(prev_end)});
      if (std::abs(s.start - prev_end) > tol) {
        throw ValidationError("segments[" + std::to_string(i) + "]",
                              "segments must tile the time span without gaps or overlap");
      }
    }
  }
}

}  // namespace

Trajectory evolve(const DensityMatrix& rho0, std::span<const Segment> segments,
                  const DissipatorSet& d, const IntegratorConfig& cfg,
                  std::span<const double> sample_times) {
  d.validate();
  cfg.validate();
  check_tiling(segments);
  if (!std::is_sorted(sample_times.begin(), sample_times.end())) {
    throw ValidationError("sample_times", "must be sorted");
  }
  Trajectory traj;
  Matrix4c rho = rho0.matrix();
  require_physical(rho, segments.empty() ? 0.0 : segments.front().start);
  if (segments.empty()) {
    traj.final_state = DensityMatrix(rho);
    return traj;
  }
  Stepper stepper{d, cfg};
  const double t_begin = segments.front().start;
  std::size_t next_sample = 0;
  while (next_sample < sample_times.size() && sample_times[next_sample] < t_begin) ++next_sample;
  while (next_sample < sample_times.size() && sample_times[next_sample] == t_begin) {
    traj.samples.push_back(TrajectorySample{t_begin, rho});
    ++next_sample;
  }
  for (const auto& seg : segments) {
    double t = seg.start;
    while (next_sample < sample_times.size() && sample_times[next_sample] <= seg.end()) {
      const double ts = sample_times[next_sample];
      stepper.advance(rho, seg, t, ts);
      t = ts;
      require_physical(rho, t);
      traj.samples.push_back(TrajectorySample{ts, rho});
      ++next_sample;
    }
    stepper.advance(rho, seg, t, seg.end());
    require_physical(rho, seg.end());
  }
  traj.final_state = DensityMatrix(rho);
  traj.final_time = segments.back().end();
  traj.steps = stepper.steps;
  return traj;
}

Matrix4c propagate(const Matrix4c& rho, std::span<const Segment> segments, const DissipatorSet& d,
                   const IntegratorConfig& cfg) {
  check_tiling(segments);
  Stepper stepper{d, cfg};
  Matrix4c out = rho;
  for (const auto& seg : segments) stepper.advance(out, seg, seg.start, seg.end());
  return out;
}

Superoperator segment_propagator(std::span<const Segment> segments, const DissipatorSet& d,
                                 const IntegratorConfig& cfg) {
  // The map preserves Hermiticity, so the image of E_ji is the adjoint of the
  // image of E_ij: ten propagations instead of sixteen.
  Superoperator map;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i <= j; ++i) {
      Matrix4c e = Matrix4c::Zero();
      e(i, j) = 1.0;
      const Matrix4c out = propagate(e, segments, d, cfg);
      map.col(i + 4 * j) = Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(out.data());
      if (i != j) {
        const Matrix4c adj = out.adjoint();
        map.col(j + 4 * i) = Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(adj.data());
      }
    }
  }
  return map;
}

double t1_rate_model(double field, double reference_t1, double reference_field,
                     double exponent) {
  IssueCollector issues;
  if (!(field > 0.0)) issues.add("field", "must be > 0 T");
  if (!(reference_t1 > 0.0)) issues.add("reference_t1", "must be > 0");
  if (!(reference_field > 0.0)) issues.add("reference_field", "must be > 0");
  issues.throw_if_any();
  return std::pow(field / reference_field, exponent) / reference_t1;
}

}  // namespace donorspin
