#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "donorspin/errors.hpp"
#include "donorspin/sequences.hpp"

using namespace donorspin;

namespace {

constexpr double kPi = std::numbers::pi;

const MaterialParams& zno() {
  static const MaterialParams m = load_material_profile("zno-natural");
  return m;
}

ExperimentSetup setup_at(double field) {
  ExperimentSetup s = default_setup(zno(), field);
  s.jobs = 1;
  return s;
}

double larmor_period(const ExperimentSetup& s) { return 2 * kPi / s.omega_e(); }

// Two-level oracle: H = [[0, -W/2], [-W/2, w_e]] with W(t) the adiabatically
// eliminated Rabi frequency, RK4 on the state vector. Returns the angle.
double two_level_angle(const ExperimentSetup& s, double energy) {
  const PulseSpec p = s.pulse(energy, 0.0);
  const LevelScheme l = s.levels();
  const double a = p.window_start(), b = p.window_end();
  const int n = 20000;
  const double h = (b - a) / n;
  using C = std::complex<double>;
  auto rhs = [&](double t, const std::array<C, 2>& psi) {
    const double r = envelope_value(p, s.calibration_k, t);
    const double w = 0.5 * r * r * (1.0 / l.detuning + 1.0 / (l.detuning + l.omega_h));
    const C i(0.0, 1.0);
    return std::array<C, 2>{-i * (-0.5 * w * psi[1]), -i * (-0.5 * w * psi[0] + l.omega_e * psi[1])};
  };
  std::array<C, 2> psi{1.0, 0.0};
  for (int k = 0; k < n; ++k) {
    const double t = a + k * h;
    auto add = [](const std::array<C, 2>& x, const std::array<C, 2>& y, double f) {
      return std::array<C, 2>{x[0] + f * y[0], x[1] + f * y[1]};
    };
    const auto k1 = rhs(t, psi);
    const auto k2 = rhs(t + h / 2, add(psi, k1, h / 2));
    const auto k3 = rhs(t + h / 2, add(psi, k2, h / 2));
    const auto k4 = rhs(t + h, add(psi, k3, h));
    for (int j = 0; j < 2; ++j) psi[j] += h / 6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return 2 * std::asin(std::min(1.0, std::abs(psi[1])));
}

}  // namespace

TEST_CASE("scramble gives the thermal mixture") {
  Matrix4c m = Matrix4c::Zero();
  m(0, 0) = 0.2;
  m(1, 1) = 0.3;
  m(2, 2) = 0.5;
  m(0, 1) = m(1, 0) = 0.1;
  const DensityMatrix once = scramble(DensityMatrix(m));
  CHECK(once.population(kDown) == 0.5);
  CHECK(once.population(kUp) == 0.5);
  CHECK(std::abs(once.matrix()(0, 1)) == 0.0);
  CHECK((scramble(once).matrix() - once.matrix()).norm() == 0.0);
  CHECK_NOTHROW(require_physical(once.matrix(), 0.0));
}

TEST_CASE("optical pumping") {
  ExperimentSetup s = setup_at(5.0);
  SUBCASE("zero drive leaves the state alone") {
    s.dissipators.t1_rate = 0.0;
    const DensityMatrix th = scramble(DensityMatrix());
    const auto r = optical_pump(th, s, 0.0, 10e-6);
    CHECK((r.state.matrix() - th.matrix()).norm() < 1e-12);
    for (double v : r.photon_rate) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.curve_time.size() == 200);
  }
  SUBCASE("without relaxation a long pump is limited only by off-resonant excitation") {
    s.dissipators.t1_rate = 0.0;
    const auto r = optical_pump(scramble(DensityMatrix()), s, s.pump.rabi, 50e-6);
    // |down> is driven a detuning w_e away: steady leak ~ Gamma^2 / (4 w_e^2)
    const double g = s.dissipators.radiative_rate;
    const double leak = g * g / (4 * s.omega_e() * s.omega_e());
    CHECK(1 - r.fidelity < 10 * leak);
    CHECK(1 - r.fidelity > 0.1 * leak);
  }
  SUBCASE("defaults reach 95% in 10 us") {
    const auto r = optical_pump(scramble(DensityMatrix()), s, s.pump.rabi, 10e-6);
    CHECK(r.fidelity >= 0.95);
    // the photoluminescence transient decays as the bright state empties
    CHECK(r.photon_rate.front() < r.photon_rate[5]);
    CHECK(r.photon_rate.back() < 1e-3 * r.photon_rate[5]);
  }
}

TEST_CASE("rabi sweep") {
  ExperimentSetup s = setup_at(5.0);
  SUBCASE("energy 0 reads the residual pump infidelity") {
    const double e0 = 0.0;
    const auto t = run_rabi_sweep(s, std::span(&e0, 1));
    const auto pump = optical_pump(scramble(DensityMatrix()), s, s.pump.rabi, s.pump.duration);
    CHECK(t.p_up[0] == doctest::Approx(pump.state.population(kUp)).epsilon(1e-3));
    CHECK(t.p_up[0] < 1e-3);
  }
  SUBCASE("ideal far-detuned limit follows the two-level rotation") {
    s.field = 1.0;
    // adiabatic elimination needs peak Omega_R << detuning, so stay at angles
    // up to pi with a large detuning
    s.detuning = 400.0 / s.pulse_duration;
    s.calibration_k = calibration_for_angle(s, 40e-12, kPi);
    std::vector<double> energies;
    for (int k = 0; k <= 8; ++k) energies.push_back(k * 5e-12);
    const auto t = run_rabi_sweep(s, energies);
    const double p0 = t.p_up[0];
    double max_up = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const double theta = two_level_angle(s, energies[i]);
      const double expect = p0 + (1 - 2 * p0) * std::pow(std::sin(theta / 2), 2);
      CHECK(std::abs(t.p_up[i] - expect) < 0.02);
      max_up = std::max(max_up, t.p_up[i]);
    }
    CHECK(max_up > 0.95);
  }
  SUBCASE("excited-state dephasing saturates the transfer") {
    s.dissipators.beta1 = 0.05;
    s.dissipators.beta2 = 1e-14;
    std::vector<double> energies;
    for (int k = 1; k <= 8; ++k) energies.push_back(k * 15e-12);
    const auto t = run_rabi_sweep(s, energies);
    CHECK(*std::max_element(t.p_up.begin(), t.p_up.end()) < 0.9);
    CHECK_NOTHROW(t.validate());
  }
}

TEST_CASE("far-detuned rotation angle matches the effective two-level model") {
  ExperimentSetup s = setup_at(5.0);
  s.detuning = 40.0 / s.pulse_duration;
  s.calibration_k = 1.0;
  s.calibration_k = calibration_for_angle(s, 1e-12, 0.3);
  const double four = four_level_rotation_angle(s, 1e-12);
  const double two = two_level_angle(s, 1e-12);
  CHECK(std::abs(four - two) / two < 0.02);
}

TEST_CASE("ramsey fringes") {
  ExperimentSetup s = setup_at(5.0);
  const double energy = energy_for_angle(s, kPi / 2);
  SUBCASE("frequency equals the Larmor frequency at several fields") {
    for (double field : {1.0, 3.0, 5.0, 7.0}) {
      ExperimentSetup f = setup_at(field);
      DelayScan scan{{30e-12}, larmor_period(f) / 10, 40};
      const auto r = run_ramsey(f, scan, energy);
      const auto fit = fit_fringe(r.trace.abscissa, r.trace.p_up, std::nullopt, f.omega_e());
      CHECK(std::abs(fit.frequency - f.omega_e()) <= std::max(3 * fit.frequency_error, 1e-7 * f.omega_e()));
    }
  }
  SUBCASE("coincident pulses act as one pulse of twice the energy") {
    DelayScan scan{{0.0}, larmor_period(s) / 8, 4};
    const auto r = run_ramsey(s, scan, energy);
    const double doubled = 2 * energy;
    const auto single = run_rabi_sweep(s, std::span(&doubled, 1));
    CHECK(r.trace.p_up[0] == doctest::Approx(single.p_up[0]).epsilon(1e-6));
  }
  SUBCASE("coarse delay steps are rejected with the allowed step") {
    DelayScan scan{{100e-12}, larmor_period(s) / 4, 16};
    try {
      run_ramsey(s, scan, energy);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("use a step <=") != std::string::npos);
    }
  }
  SUBCASE("fast path agrees with the generic timeline runner") {
    // the fast path applies an injected channel between arrivals only, so it
    // may differ by about (pulse window / injected time) of the coherence
    for (double injected : {0.0, 2e-9}) {
      ExperimentSetup f = s;
      if (injected > 0) f.dissipators.injected = {InjectedDephasing::Kind::exponential, injected, 0.0};
      DelayScan scan{{40e-12, 1e-9}, larmor_period(f) / 8, 4};
      const auto fast = run_ramsey(f, scan, energy);
      const PulseSpec probe = f.pulse(energy, 0.0);
      const double lead = f.pump.duration + f.pump.settle - probe.window_start();
      const double tol = injected > 0 ? 5 * (probe.window_end() - probe.window_start()) / injected : 1e-6;
      for (std::size_t i = 0; i < fast.trace.size(); ++i) {
        SequenceSpec seq;
        seq.start_time = -lead;
        seq.steps = {ScrambleStep{}, PumpStep{f.pump.duration, f.pump.rabi},
                     ControlStep{f.pulse(energy, 0.0)},
                     ControlStep{f.pulse(energy, fast.trace.abscissa[i])}, ReadoutStep{}};
        const auto out = run_sequence(f, seq);
        REQUIRE(out.size() == 1);
        CHECK(std::abs(out[0].p_up - fast.trace.p_up[i]) < tol);
      }
    }
  }
  SUBCASE("interpolated pulse maps match exact per-sample maps") {
    const BathModel bath = gaussian_bath(17e-9, s.g_electron);
    DelayScan scan{{1e-9, 10e-9}, larmor_period(s) / 8, 8};
    EnsembleOptions fast{12, 3, false}, exact{12, 3, true};
    const auto a = run_ramsey(s, scan, energy, bath, fast);
    const auto b = run_ramsey(s, scan, energy, bath, exact);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(std::abs(a.trace.p_up[i] - b.trace.p_up[i]) < 1e-7);
    }
  }
}

TEST_CASE("ensemble averaging") {
  const BathModel bath = gaussian_bath(17e-9, 1.97);
  const std::vector<double> times{0.0, 5e-9, 10e-9, 20e-9};
  auto kernel = [&](const OverhauserSample& x) {
    SampleOutcome o;
    for (double t : times) {
      o.p_up.push_back(std::cos(x.detuning * t));
      o.p_down.push_back(0.0);
    }
    return o;
  };
  SUBCASE("gaussian bath reproduces the analytic envelope") {
    const auto avg = ensemble_average(kernel, bath, {20000, 11}, 1);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(std::abs(avg.mean.p_up[i] - bath.envelope(times[i])) <= 3 * avg.p_up_stderr[i] + 1e-12);
    }
  }
  SUBCASE("single sample of an empty bath is a plain run") {
    const auto one = ensemble_average(kernel, empty_bath(1.97), {1, 5}, 1);
    const auto none = ensemble_average(kernel, std::nullopt, {1, 5}, 1);
    CHECK(one.mean.p_up == none.mean.p_up);
    CHECK(one.p_up_stderr == std::vector<double>(times.size(), 0.0));
  }
  SUBCASE("mean does not depend on sample order or worker count") {
    const auto samples = sample_overhauser(bath, 9, 500);
    const auto a = ensemble_average(kernel, bath, {500, 9}, 1);
    const auto b = ensemble_average(kernel, bath, {500, 9}, 4);
    CHECK(a.mean.p_up == b.mean.p_up);
    double reversed = 0.0;
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) reversed += std::cos(it->detuning * times[2]);
    CHECK(a.mean.p_up[2] == doctest::Approx(reversed / 500).epsilon(1e-12));
  }
}

TEST_CASE("three-pulse echo") {
  ExperimentSetup s = setup_at(5.0);
  const double energy = energy_for_angle(s, kPi / 2);
  EchoScan scan{{5e-6, 15e-6, 30e-6}, larmor_period(s) / 8, 16};
  SUBCASE("static bath refocuses, independent of its width") {
    std::vector<double> amps;
    for (double t2s : {10e-9, 17e-9, 30e-9}) {
      const auto r = run_echo(s, scan, energy, gaussian_bath(t2s, s.g_electron), {4000, 21});
      for (const auto& w : r.windows) amps.push_back(w.amplitude);
    }
    const double mean = std::accumulate(amps.begin(), amps.end(), 0.0) / amps.size();
    // a 50 us-scale decay would move these by > 25%; Monte Carlo scatter is ~2%
    for (double a : amps) CHECK(std::abs(a - mean) < 0.06 * mean);
  }
  SUBCASE("injected exponential channel is recovered") {
    s.dissipators.injected = {InjectedDephasing::Kind::exponential, 50e-6, 0.0};
    EchoScan wide{{5e-6, 10e-6, 20e-6, 30e-6, 45e-6, 60e-6}, larmor_period(s) / 8, 16};
    const auto r = run_echo(s, wide, energy, gaussian_bath(17e-9, s.g_electron), {20000, 5});
    std::vector<double> x, y;
    for (const auto& w : r.windows) {
      x.push_back(w.center);
      y.push_back(w.amplitude);
    }
    const auto fit = fit_curve(CurveModel::guess(ModelKind::exp_decay, x, y), x, y);
    CHECK(fit.value("decay_time") == doctest::Approx(50e-6).epsilon(0.05));
  }
  SUBCASE("injected cubed channel prefers the cubed model") {
    s.dissipators.injected = {InjectedDephasing::Kind::cubed_exponential, 50e-6, 0.0};
    EchoScan wide{{5e-6, 10e-6, 15e-6, 20e-6, 25e-6, 30e-6, 40e-6}, larmor_period(s) / 8, 16};
    const auto r = run_echo(s, wide, energy, gaussian_bath(17e-9, s.g_electron), {20000, 6});
    std::vector<double> x, y;
    for (const auto& w : r.windows) {
      x.push_back(w.center);
      y.push_back(w.amplitude);
    }
    const std::vector<ModelKind> kinds{ModelKind::exp_decay, ModelKind::cubed_exp_decay};
    const auto best = compare_models(kinds, x, y);
    CHECK(best.model == "cubed_exp_decay");
    CHECK(best.model_comparison.at("cubed_exp_decay") < best.model_comparison.at("exp_decay"));
  }
}

TEST_CASE("T1 recovery") {
  std::vector<double> waits;
  for (int k = 0; k < 24; ++k) waits.push_back(k * 0.02);
  const ExperimentSetup s = setup_at(2.25);
  const auto r = run_t1_recovery(s, waits);
  const auto pump = optical_pump(scramble(DensityMatrix()), s, s.pump.rabi, s.pump.duration);
  CHECK(r.trace.p_up[0] == doctest::Approx(pump.state.population(kUp)).epsilon(1e-3));
  CHECK(r.t1 == doctest::Approx(0.1).epsilon(0.05));

  const ExperimentSetup s2 = setup_at(4.5);
  std::vector<double> short_waits;
  for (double w : waits) short_waits.push_back(w * std::pow(2.0, -3.5));
  const auto r2 = run_t1_recovery(s2, short_waits);
  CHECK(r.t1 / r2.t1 == doctest::Approx(std::pow(2.0, 3.5)).epsilon(1e-3));
}

TEST_CASE("photon-count readout tracks the upper population") {
  ExperimentSetup s = setup_at(5.0);
  s.readout = ReadoutMode::photon_counts;
  const std::vector<double> energies{0.0, energy_for_angle(s, kPi / 2), energy_for_angle(s, kPi)};
  const auto t = run_rabi_sweep(s, energies);
  REQUIRE(t.photon_counts.size() == 3);
  CHECK(t.photon_counts[0] < t.photon_counts[1]);
  CHECK(t.photon_counts[1] < t.photon_counts[2]);
  // counts per unit upper population are set by the readout drive alone
  const double per0 = (t.photon_counts[2] - t.photon_counts[0]) / (t.p_up[2] - t.p_up[0]);
  const double per1 = (t.photon_counts[1] - t.photon_counts[0]) / (t.p_up[1] - t.p_up[0]);
  CHECK(per0 == doctest::Approx(per1).epsilon(1e-3));
}

TEST_CASE("angle spread washes out the rabi contrast") {
  ExperimentSetup s = setup_at(1.0);
  const double e = energy_for_angle(s, kPi);
  const auto sharp = run_rabi_sweep(s, std::span(&e, 1));
  s.angle_spread.relative_sigma = 0.3;
  const auto spread = run_rabi_sweep(s, std::span(&e, 1));
  CHECK(spread.p_up[0] < sharp.p_up[0] - 0.05);
}

TEST_CASE("setup validation lists every problem") {
  ExperimentSetup s = setup_at(5.0);
  s.field = -1;
  s.calibration_k = 0;
  s.dissipators.radiative_rate = -1;
  try {
    s.validate();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() >= 3);
  }
  SequenceSpec bad;
  bad.bath_samples = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
