#include <doctest.h>

#include <cmath>

#include "donorspin/errors.hpp"
#include "donorspin/hamiltonian.hpp"
#include "donorspin/units.hpp"

using namespace donorspin;

namespace {

// Composite Simpson over the pulse window.
double simpson_intensity(const PulseSpec& p, double k, int n = 20000) {
  const double a = p.window_start();
  const double b = p.window_end();
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double r = envelope_value(p, k, a + i * h);
    s += w * r * r;
  }
  return s * h / 3.0;
}

LevelScheme scheme() { return levels_at_field(1.97, 0.34, 5.0, ghz_to_rad_per_s(3570.0)); }

}  // namespace

TEST_CASE("integrated intensity equals k E for every shape") {
  for (auto shape : {PulseShape::gaussian, PulseShape::sech2, PulseShape::rectangular}) {
    PulseSpec p;
    p.shape = shape;
    p.energy = 40e-12;
    p.arrival_time = 3e-12;
    const double k = 2.5e24;
    CHECK(simpson_intensity(p, k) == doctest::Approx(k * p.energy).epsilon(1e-6));
  }
}

TEST_CASE("intensity full width at half maximum equals the duration") {
  for (auto shape : {PulseShape::gaussian, PulseShape::sech2}) {
    PulseSpec p;
    p.shape = shape;
    p.duration = 1.9e-12;
    p.energy = 1e-12;
    const double peak = normalized_intensity(p, 0.0);
    CHECK(normalized_intensity(p, 0.95e-12) == doctest::Approx(0.5 * peak).epsilon(1e-9));
    CHECK(normalized_intensity(p, -0.95e-12) == doctest::Approx(0.5 * peak).epsilon(1e-9));
  }
}

TEST_CASE("envelope vanishes outside the window and for zero energy") {
  PulseSpec p;
  p.energy = 1e-12;
  CHECK(envelope_value(p, 1e24, p.window_end() * 1.01) == 0.0);
  CHECK(p.window_end() - p.window_start() == doctest::Approx(10 * p.duration));
  p.energy = 0.0;
  CHECK(envelope_value(p, 1e24, 0.0) == 0.0);
}

TEST_CASE("hamiltonian structure") {
  const auto lv = scheme();
  const Matrix4c h = hamiltonian_matrix(lv, kBalancedCoupling, 1e12);
  CHECK((h - h.adjoint()).norm() == doctest::Approx(0.0));
  CHECK(h(kDown, kDown).real() == 0.0);
  CHECK(h(kUp, kUp).real() == lv.omega_e);
  CHECK(h(kTrionDown, kTrionDown).real() == lv.detuning);
  CHECK(h(kTrionUp, kTrionUp).real() == lv.detuning + lv.omega_h);
  CHECK(h(kDown, kTrionDown) == Complex(-0.5e12, 0.0));
  CHECK(h(kUp, kTrionUp) == Complex(-0.5e12, 0.0));
  CHECK(h(kDown, kUp) == Complex(0.0));
  CHECK(h(kTrionDown, kTrionUp) == Complex(0.0));
}

TEST_CASE("hermitian for random complex weights and times") {
  PulseSpec p;
  p.energy = 20e-12;
  p.coupling_weights = {Complex(0.3, 0.7), Complex(-1.1, 0.2), Complex(0.0, 1.0),
                        Complex(0.5, -0.5)};
  const auto lv = scheme();
  for (double t : {-3e-12, -1e-12, 0.0, 0.4e-12, 2e-12}) {
    const auto snap = build_hamiltonian(lv, p, 3e24, t);
    CHECK(snap.time == t);
    CHECK((snap.matrix - snap.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("swapping the two ground and two excited levels maps balanced H onto itself") {
  // With omega_e = omega_h = 0 the balanced coupling is symmetric under
  // |down> <-> |up>, |trion down> <-> |trion up>.
  LevelScheme lv{0.0, 0.0, 1e13};
  const Matrix4c h = hamiltonian_matrix(lv, kBalancedCoupling, 7e11);
  Matrix4c perm = Matrix4c::Zero();
  perm(0, 1) = perm(1, 0) = perm(2, 3) = perm(3, 2) = 1.0;
  CHECK((perm * h * perm - h).norm() == doctest::Approx(0.0));
}

TEST_CASE("effective Rabi frequency") {
  const double r = effective_rabi(ghz_to_rad_per_s(100), ghz_to_rad_per_s(3570),
                                  ghz_to_rad_per_s(23.8));
  CHECK(rad_per_s_to_ghz(r) == doctest::Approx(2.79184521490715).epsilon(1e-10));
  CHECK_THROWS_AS(effective_rabi(1e11, 0.0, 1e10), ValidationError);
  CHECK_THROWS_AS(effective_rabi(1e11, -1e12, 1e10), ValidationError);
  CHECK_THROWS_AS(effective_rabi(1e11, 1e10, -2e10), ValidationError);
}

TEST_CASE("effective two-level hamiltonian is hermitian with the Larmor phase") {
  const double w = 1e12;
  const auto h = effective_hamiltonian(3e10, w, 1e-12);
  CHECK((h - h.adjoint()).norm() == doctest::Approx(0.0));
  CHECK(std::abs(h(0, 1)) == doctest::Approx(1.5e10));
  CHECK(std::arg(h(0, 1)) == doctest::Approx(-1.0));
}

TEST_CASE("adiabaticity diagnostic") {
  PulseSpec p;
  p.duration = 1.9e-12;
  const auto rep = adiabaticity_diagnostic(scheme(), p);
  CHECK(rep.ratio == doctest::Approx(42.6188459385991).epsilon(1e-10));
  CHECK(rep.pass);
  LevelScheme close{0.0, 0.0, ghz_to_rad_per_s(500)};
  const auto bad = adiabaticity_diagnostic(close, p);
  CHECK(bad.ratio == doctest::Approx(kTwoPi * 500e9 * 1.9e-12));
  CHECK_FALSE(bad.pass);
}
