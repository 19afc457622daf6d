#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <vector>

#include "donorspin/errors.hpp"
#include "donorspin/hamiltonian.hpp"
#include "donorspin/lindblad.hpp"
#include "donorspin/units.hpp"

using namespace donorspin;

namespace {

const Complex kI(0.0, 1.0);

Matrix4c random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix4c a;
  for (int i = 0; i < 16; ++i) a.data()[i] = Complex(n(rng), n(rng));
  Matrix4c rho = a * a.adjoint();
  return rho / rho.trace();
}

Matrix4c random_hermitian(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n;
  Matrix4c a;
  for (int i = 0; i < 16; ++i) a.data()[i] = Complex(n(rng), n(rng));
  return scale * 0.5 * (a + a.adjoint());
}

Matrix4c ket_bra(int i, int j) {
  Matrix4c m = Matrix4c::Zero();
  m(i, j) = 1.0;
  return m;
}

// Textbook Lindblad form with explicit jump operators.
Matrix4c jump_operator_rhs(const Matrix4c& rho, const Matrix4c& h, const DissipatorSet& d,
                           double rabi, double t) {
  std::vector<Matrix4c> ops;
  for (int e = 0; e < 2; ++e) {
    for (int g = 0; g < 2; ++g) {
      ops.push_back(std::sqrt(d.radiative_rate * d.branching[e][g]) * ket_bra(g, 2 + e));
    }
  }
  ops.push_back(std::sqrt(0.5 * d.t1_rate) * ket_bra(0, 1));
  ops.push_back(std::sqrt(0.5 * d.t1_rate) * ket_bra(1, 0));
  const double gd = d.ground_dephasing_rate + d.injected.rate(t);
  ops.push_back(std::sqrt(0.5 * gd) * (ket_bra(0, 0) - ket_bra(1, 1)));
  ops.push_back(std::sqrt(2.0 * d.excited_dephasing(rabi)) * (ket_bra(2, 2) + ket_bra(3, 3)));
  Matrix4c out = -kI * (h * rho - rho * h);
  for (const auto& c : ops) {
    const Matrix4c cdc = c.adjoint() * c;
    out += c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
  }
  return out;
}

DissipatorSet busy_dissipator() {
  DissipatorSet d;
  d.radiative_rate = 1.0 / 50e-12;
  d.branching = {{{0.7, 0.3}, {0.2, 0.8}}};
  d.t1_rate = 3e9;
  d.ground_dephasing_rate = 5e9;
  d.beta1 = 0.01;
  d.beta2 = 2e-15;
  d.injected.kind = InjectedDephasing::Kind::exponential;
  d.injected.decay_time = 1e-10;
  return d;
}

// Classical RK4 on lindblad_rhs with a constant Hamiltonian.
Matrix4c rk4_reference(Matrix4c rho, const Matrix4c& h, const DissipatorSet& d, double rabi,
                       double t0, double t1, int n) {
  const double dt = (t1 - t0) / n;
  double t = t0;
  for (int k = 0; k < n; ++k) {
    const Matrix4c k1 = lindblad_rhs(rho, h, d, rabi, t);
    const Matrix4c k2 = lindblad_rhs(rho + 0.5 * dt * k1, h, d, rabi, t + 0.5 * dt);
    const Matrix4c k3 = lindblad_rhs(rho + 0.5 * dt * k2, h, d, rabi, t + 0.5 * dt);
    const Matrix4c k4 = lindblad_rhs(rho + dt * k3, h, d, rabi, t + dt);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
  }
  return rho;
}

// exp(-iHt) from the spectral decomposition.
Matrix4c unitary(const Matrix4c& h, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Eigen::Matrix<Complex, 4, 1> ph;
  for (int k = 0; k < 4; ++k) ph(k) = std::exp(-kI * es.eigenvalues()(k) * t);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

double max_abs(const Matrix4c& m) { return m.cwiseAbs().maxCoeff(); }

LevelScheme scheme5T() { return levels_at_field(1.97, 0.34, 5.0, ghz_to_rad_per_s(3570.0)); }

}  // namespace

TEST_CASE("rhs equals the explicit jump-operator form") {
  std::mt19937_64 rng(7);
  const auto d = busy_dissipator();
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix4c rho = random_state(rng);
    const Matrix4c h = random_hermitian(rng, 1e12);
    const double rabi = 3e11 * (trial + 1);
    const double t = 1e-12 * trial;
    const Matrix4c expected = jump_operator_rhs(rho, h, d, rabi, t);
    const Matrix4c got = lindblad_rhs(rho, h, d, rabi, t);
    CHECK(max_abs(got - expected) <= 1e-12 * max_abs(expected));
  }
}

TEST_CASE("liouvillian acts like the rhs on vec(rho)") {
  std::mt19937_64 rng(11);
  const auto d = busy_dissipator();
  const Matrix4c rho = random_state(rng);
  const Matrix4c h = random_hermitian(rng, 1e12);
  const auto l = liouvillian(h, d, 5e11, 2e-12);
  const Matrix4c got = apply_map(l, rho);
  const Matrix4c expected = lindblad_rhs(rho, h, d, 5e11, 2e-12);
  CHECK(max_abs(got - expected) <= 1e-12 * max_abs(expected));
}

TEST_CASE("rhs is trace preserving and hermiticity preserving") {
  std::mt19937_64 rng(3);
  const auto d = busy_dissipator();
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix4c rho = random_state(rng);
    const Matrix4c out = lindblad_rhs(rho, random_hermitian(rng, 1e12), d, 1e12, 1e-12);
    CHECK(std::abs(out.trace()) <= 1e-12 * max_abs(out));
    CHECK(max_abs(out - out.adjoint()) <= 1e-12 * max_abs(out));
  }
}

TEST_CASE("analytic free propagation agrees with a fine RK4 reference") {
  std::mt19937_64 rng(5);
  auto d = busy_dissipator();
  d.injected.origin = 5e-12;  // switch-on inside the interval
  const Eigen::Vector4d e(0.0, 8.6e11, 2.2e13, 2.21e13);
  Matrix4c h = Matrix4c::Zero();
  for (int k = 0; k < 4; ++k) h(k, k) = e(k);
  const Matrix4c rho = random_state(rng);
  // The injected rate steps at the origin, so split the reference there.
  DissipatorSet before = d;
  before.injected.kind = InjectedDephasing::Kind::none;
  Matrix4c ref = rk4_reference(rho, h, before, 0.0, 0.0, 5e-12, 40000);
  ref = rk4_reference(ref, h, d, 0.0, 5e-12, 30e-12, 200000);
  const Matrix4c got = propagate_free(rho, e, d, 0.0, 30e-12);
  CHECK(max_abs(got - ref) < 1e-9);
}

TEST_CASE("cubed-exponential injected channel decays the ground coherence as exp(-(t/T)^3)") {
  DissipatorSet d;
  d.injected.kind = InjectedDephasing::Kind::cubed_exponential;
  d.injected.decay_time = 1e-6;
  d.injected.origin = 0.0;
  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = rho(1, 1) = rho(0, 1) = rho(1, 0) = 0.5;
  const Eigen::Vector4d e = Eigen::Vector4d::Zero();
  const Segment seg = free_segment(e, 0.0, 2e-6);
  const std::vector<double> ts{0.5e-6, 1e-6, 1.5e-6};
  const auto traj = evolve(DensityMatrix(rho), std::span(&seg, 1), d, {}, ts);
  REQUIRE(traj.samples.size() == 3);
  for (const auto& s : traj.samples) {
    const double x = s.time / 1e-6;
    CHECK(std::abs(s.rho(0, 1)) == doctest::Approx(0.5 * std::exp(-x * x * x)).epsilon(1e-12));
  }
  // Ground-excited coherences see a quarter of it.
  CHECK(d.injected.integral(0.0, 1e-6) == doctest::Approx(1.0));
  CHECK(d.injected.integral(-1.0, 0.0) == 0.0);
}

TEST_CASE("closed-system drive agrees with U rho U^dagger") {
  std::mt19937_64 rng(13);
  const DissipatorSet none;
  IntegratorConfig cfg;
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix4c h = random_hermitian(rng, 2e12);
    const Matrix4c rho0 = random_state(rng);
    const double dur = 4e-12;
    const Matrix4c u = unitary(h, dur);
    const Matrix4c expected = u * rho0 * u.adjoint();

    // Time-dependent path (adaptive RK in the interaction picture).
    Segment rk = constant_segment(h, 0.0, dur);
    CHECK(max_abs(propagate(rho0, std::span(&rk, 1), none, cfg) - expected) < 1e-8);

    // Time-independent path (Liouvillian exponential).
    Segment ex = rk;
    ex.time_independent = true;
    CHECK(max_abs(propagate(rho0, std::span(&ex, 1), none, cfg) - expected) < 1e-10);

    // Midpoint exponential method.
    IntegratorConfig mcfg;
    mcfg.method = IntegratorMethod::matrix_exponential;
    CHECK(max_abs(propagate(rho0, std::span(&rk, 1), none, mcfg) - expected) < 1e-10);
  }
}

TEST_CASE("spontaneous decay follows the rate equations") {
  DissipatorSet d;
  d.radiative_rate = 1.0 / 40e-12;
  const double g = d.radiative_rate;
  const Eigen::Vector4d e(0.0, 1e12, 2e13, 2.1e13);
  const std::vector<double> ts{10e-12, 40e-12, 100e-12};
  for (bool analytic : {true, false}) {
    Segment seg;
    if (analytic) {
      seg = free_segment(e, 0.0, 120e-12);
    } else {
      Matrix4c h = Matrix4c::Zero();
      for (int k = 0; k < 4; ++k) h(k, k) = e(k);
      seg = constant_segment(h, 0.0, 120e-12);
    }
    const auto traj =
        evolve(DensityMatrix::pure(kTrionDown), std::span(&seg, 1), d, IntegratorConfig{}, ts);
    for (const auto& s : traj.samples) {
      const double lost = 1.0 - std::exp(-g * s.time);
      CHECK(s.rho(kTrionDown, kTrionDown).real() ==
            doctest::Approx(std::exp(-g * s.time)).epsilon(1e-8));
      CHECK(s.rho(kDown, kDown).real() == doctest::Approx(0.5 * lost).epsilon(1e-8));
      CHECK(s.rho(kUp, kUp).real() == doctest::Approx(0.5 * lost).epsilon(1e-8));
    }
  }
}

TEST_CASE("ground relaxation drives populations toward one half") {
  DissipatorSet d;
  d.t1_rate = 1e3;
  const Segment seg = free_segment(Eigen::Vector4d(0, 1e12, 0, 0), 0.0, 5e-3);
  const auto traj = evolve(DensityMatrix::pure(kUp), std::span(&seg, 1), d, {});
  const double expected_up = 0.5 + 0.5 * std::exp(-1e3 * 5e-3);
  CHECK(traj.final_state.population(kUp) == doctest::Approx(expected_up).epsilon(1e-12));
}

TEST_CASE("excited population decreases monotonically without drive") {
  DissipatorSet d;
  d.radiative_rate = 1.0 / 40e-12;
  d.ground_dephasing_rate = 1e9;
  Matrix4c rho = Matrix4c::Zero();
  rho(kTrionDown, kTrionDown) = rho(kTrionUp, kTrionUp) = 0.3;
  rho(kDown, kDown) = 0.4;
  const Segment seg = free_segment(scheme5T(), 0.0, 200e-12);
  std::vector<double> ts;
  for (int i = 1; i <= 100; ++i) ts.push_back(2e-12 * i);
  const auto traj = evolve(DensityMatrix(rho), std::span(&seg, 1), d, {}, ts);
  double prev = 0.6;
  for (const auto& s : traj.samples) {
    const double exc = s.rho(kTrionDown, kTrionDown).real() + s.rho(kTrionUp, kTrionUp).real();
    CHECK(exc < prev);
    prev = exc;
  }
}

TEST_CASE("state invariants hold along random pulse trains") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto d = busy_dissipator();
  d.injected.kind = InjectedDephasing::Kind::none;
  const auto lv = scheme5T();
  const double k = M_PI * lv.detuning / 40e-12;
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Segment> segs;
    double t = 0.0;
    for (int p = 0; p < 3; ++p) {
      PulseSpec pulse;
      pulse.energy = 60e-12 * u(rng);
      pulse.shape = p % 2 ? PulseShape::sech2 : PulseShape::gaussian;
      pulse.arrival_time = t + 5 * pulse.duration;
      segs.push_back(pulse_segment(lv, pulse, k));
      t = segs.back().end();
      segs.push_back(free_segment(lv, t, 20e-12 * u(rng)));
      t = segs.back().end();
    }
    std::vector<double> ts;
    for (int i = 0; i < 50; ++i) ts.push_back(t * i / 50.0);
    const auto traj = evolve(DensityMatrix(random_state(rng)), segs, d, {}, ts);
    for (const auto& s : traj.samples) {
      const auto diag = diagnose(s.rho);
      CHECK(diag.trace_error < kTraceTolerance);
      CHECK(diag.hermiticity_error < kHermiticityTolerance);
      CHECK(diag.min_eigenvalue > -kPositivityTolerance);
      CHECK(diag.purity <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("halving the tolerances moves a pulse result by less than the tolerance scale") {
  const auto lv = scheme5T();
  PulseSpec pulse;
  pulse.energy = 40e-12;
  const double k = M_PI * lv.detuning / 40e-12;
  DissipatorSet d;
  d.radiative_rate = 1.0 / 40e-12;
  d.beta1 = 0.02;
  const Segment seg = pulse_segment(lv, pulse, k);
  IntegratorConfig coarse;
  coarse.rel_tol = 1e-7;
  coarse.abs_tol = 1e-9;
  IntegratorConfig fine = coarse;
  fine.rel_tol /= 2;
  fine.abs_tol /= 2;
  const Matrix4c a = evolve(DensityMatrix(), std::span(&seg, 1), d, coarse).final_state.matrix();
  const Matrix4c b = evolve(DensityMatrix(), std::span(&seg, 1), d, fine).final_state.matrix();
  CHECK(max_abs(a - b) < 1e-6);
}

TEST_CASE("pulse map reproduces direct propagation") {
  std::mt19937_64 rng(2);
  const auto lv = scheme5T();
  PulseSpec pulse;
  pulse.energy = 25e-12;
  const double k = M_PI * lv.detuning / 40e-12;
  const DissipatorSet d = [] {
    DissipatorSet x;
    x.radiative_rate = 1.0 / 40e-12;
    x.beta2 = 1e-15;
    return x;
  }();
  const std::vector<Segment> segs{pulse_segment(lv, pulse, k),
                                  free_segment(lv, pulse.window_end(), 7e-12)};
  const auto map = segment_propagator(segs, d, {});
  const Matrix4c rho = random_state(rng);
  CHECK(max_abs(apply_map(map, rho) - propagate(rho, segs, d, {})) < 1e-8);
}

TEST_CASE("merged pulses at zero delay equal one pulse of the summed energy") {
  const auto lv = scheme5T();
  const double k = M_PI * lv.detuning / 40e-12;
  PulseSpec a;
  a.energy = 12e-12;
  PulseSpec b = a;
  b.energy = 12e-12;
  PulseSpec ab = a;
  ab.energy = 24e-12;
  const Segment merged = merged_pulse_segment(lv, {a, b}, k);
  const Segment single = pulse_segment(lv, ab, k);
  const DissipatorSet d;
  const Matrix4c x = propagate(DensityMatrix().matrix(), std::span(&merged, 1), d, {});
  const Matrix4c y = propagate(DensityMatrix().matrix(), std::span(&single, 1), d, {});
  CHECK(max_abs(x - y) < 1e-8);
}

TEST_CASE("step size underflow raises an integration error with the last good time") {
  const auto lv = scheme5T();
  PulseSpec pulse;
  pulse.energy = 40e-12;
  const double k = M_PI * lv.detuning / 40e-12;
  const Segment seg = pulse_segment(lv, pulse, k);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 1e-16;
  cfg.min_step = 1e-15;
  try {
    evolve(DensityMatrix(), std::span(&seg, 1), DissipatorSet{}, cfg);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.last_good_time() >= seg.start);
    CHECK(e.last_good_time() < seg.end());
  }
}

TEST_CASE("invalid inputs are rejected") {
  const Segment a = free_segment(Eigen::Vector4d::Zero(), 0.0, 1e-9);
  const Segment gap = free_segment(Eigen::Vector4d::Zero(), 2e-9, 1e-9);
  const std::vector<Segment> segs{a, gap};
  CHECK_THROWS_AS(evolve(DensityMatrix(), segs, {}, {}), ValidationError);

  DissipatorSet bad;
  bad.radiative_rate = -1.0;
  bad.branching = {{{0.6, 0.6}, {0.5, 0.5}}};
  try {
    evolve(DensityMatrix(), std::span(&a, 1), bad, {});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() == 2);
  }

  IntegratorConfig cfg;
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(evolve(DensityMatrix(), std::span(&a, 1), {}, cfg), ValidationError);

  const std::vector<double> unsorted{5e-10, 1e-10};
  CHECK_THROWS_AS(evolve(DensityMatrix(), std::span(&a, 1), {}, {}, unsorted), ValidationError);
}

TEST_CASE("non-physical states are detected") {
  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = 1.2;
  rho(1, 1) = -0.2;
  CHECK_THROWS_AS(require_physical(rho, 0.0), NumericalError);
  CHECK_NOTHROW(require_physical(DensityMatrix().matrix(), 0.0));
  CHECK_THROWS_AS(evolve(DensityMatrix(rho), {}, {}, {}), NumericalError);
}

TEST_CASE("spin relaxation power law") {
  CHECK(t1_rate_model(2.25) == doctest::Approx(10.0));
  CHECK(1.0 / t1_rate_model(4.5) == doctest::Approx(8.83883476483184e-3).epsilon(1e-12));
  CHECK_THROWS_AS(t1_rate_model(0.0), ValidationError);
  CHECK_THROWS_AS(t1_rate_model(1.0, -1.0), ValidationError);
}
