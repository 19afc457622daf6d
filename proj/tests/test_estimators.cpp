#include <doctest.h>

#include <cmath>

#include "donorspin/errors.hpp"
#include "donorspin/estimators.hpp"

using namespace donorspin;

namespace {
MaterialParams zno() { return load_material_profile("zno-natural"); }
}  // namespace

TEST_CASE("instantaneous diffusion reproduces the quoted range") {
  const auto m = zno();
  const auto hi = t2_instantaneous_diffusion(m, M_PI / 2);
  const auto lo = t2_instantaneous_diffusion(m, M_PI / 5);
  CHECK(hi.t2 == doctest::Approx(240e-6).epsilon(0.05));
  CHECK(lo.t2 == doctest::Approx(1.27e-3).epsilon(0.05));
  // mu0 (g muB)^2 N pi sin^2 / (9 sqrt3 hbar), evaluated independently
  CHECK(hi.t2 == doctest::Approx(2.49506564839743e-4).epsilon(1e-9));
  CHECK(lo.t2 == doctest::Approx(1.30643333433336e-3).epsilon(1e-9));
  CHECK(lo.t2 / hi.t2 == doctest::Approx(5.23606797749979).epsilon(1e-12));
  CHECK(hi.decay_exponent == 1);
}

TEST_CASE("instantaneous diffusion variants") {
  const auto m = zno();
  const auto pc = t2_instantaneous_diffusion(m, M_PI / 2, IdVariant::paper_consistent);
  const auto ap = t2_instantaneous_diffusion(m, M_PI / 2, IdVariant::as_printed);
  CHECK(ap.t2 == doctest::Approx(2.46253109044302e-3).epsilon(1e-9));
  CHECK(ap.t2 / pc.t2 == doctest::Approx(M_PI * M_PI).epsilon(1e-12));
  const auto ap5 = t2_instantaneous_diffusion(m, M_PI / 5, IdVariant::as_printed);
  CHECK(ap5.t2 / ap.t2 == doctest::Approx(5.23606797749979).epsilon(1e-12));
}

TEST_CASE("instantaneous diffusion limits and linearity") {
  auto m = zno();
  CHECK(std::isinf(t2_instantaneous_diffusion(m, 0.0).t2));
  CHECK(t2_instantaneous_diffusion(m, 0.0).rate == 0.0);
  const double r1 = t2_instantaneous_diffusion(m, 1.0).rate;
  m.donor_density *= 3.0;
  CHECK(t2_instantaneous_diffusion(m, 1.0).rate == doctest::Approx(3.0 * r1).epsilon(1e-14));
  m.donor_density = 0.0;
  CHECK(std::isinf(t2_instantaneous_diffusion(m, 1.0).t2));
  CHECK_THROWS_AS(t2_instantaneous_diffusion(m, -0.1), ValidationError);
  CHECK_THROWS_AS(t2_instantaneous_diffusion(m, 3.2), ValidationError);
}

TEST_CASE("dipolar lattice sum, deterministic mode") {
  const auto m = zno();
  const auto x = dipolar_lattice_sum(m);
  // f (mu0/4pi)^2 mu^4 / hbar^2 sum (1-3cos^2)^2 / r^6, independent numpy evaluation
  CHECK(x.sum_b_squared == doctest::Approx(148655.232960483).epsilon(1e-8));
  CHECK(x.converged);
  CHECK(x.relative_change < 1e-5);
  CHECK(x.site_count == 175928);

  LatticeSumOptions z;
  z.field_direction = Eigen::Vector3d::UnitZ();
  CHECK(dipolar_lattice_sum(m, z).sum_b_squared ==
        doctest::Approx(163819.194339534).epsilon(1e-8));
  LatticeSumOptions powder;
  powder.powder_average = true;
  CHECK(dipolar_lattice_sum(m, powder).sum_b_squared ==
        doctest::Approx(142609.37644692).epsilon(1e-8));
}

TEST_CASE("lattice sum properties") {
  auto m = zno();
  const double base = dipolar_lattice_sum(m).sum_b_squared;

  LatticeSumOptions rev;
  rev.field_direction = -Eigen::Vector3d::UnitX();
  CHECK(dipolar_lattice_sum(m, rev).sum_b_squared == doctest::Approx(base).epsilon(1e-13));

  LatticeSumOptions big;
  big.cutoff = 12.5e-9;
  CHECK(std::abs(dipolar_lattice_sum(m, big).sum_b_squared / base - 1.0) <= 0.01);

  LatticeSumOptions serial;
  serial.jobs = 1;
  CHECK(dipolar_lattice_sum(m, serial).sum_b_squared == base);

  auto twice = m;
  twice.abundance_zn67 *= 2.0;
  CHECK(dipolar_lattice_sum(twice).sum_b_squared == doctest::Approx(2.0 * base).epsilon(1e-14));

  auto none = m;
  none.abundance_zn67 = 0.0;
  CHECK(dipolar_lattice_sum(none).sum_b_squared == 0.0);

  LatticeSumOptions tiny;
  tiny.cutoff = 2e-9;
  CHECK_THROWS_AS(dipolar_lattice_sum(m, tiny), ValidationError);
}

TEST_CASE("monte carlo occupation mode agrees with the weighted sum") {
  const auto m = zno();
  LatticeSumOptions mc;
  mc.monte_carlo = true;
  mc.mc_samples = 400;
  mc.seed = 17;
  const auto r = dipolar_lattice_sum(m, mc);
  const double det = dipolar_lattice_sum(m).sum_b_squared;
  CHECK(r.standard_error > 0.0);
  CHECK(std::abs(r.sum_b_squared - det) < 3.0 * r.standard_error);
  mc.jobs = 1;
  CHECK(dipolar_lattice_sum(m, mc).sum_b_squared == r.sum_b_squared);
}

TEST_CASE("spectral diffusion time") {
  const auto m = zno();
  const auto sd = t2_spectral_diffusion(m, dipolar_lattice_sum(m));
  CHECK(sd.t2 > 200e-6 / 1.5);
  CHECK(sd.t2 < 200e-6 * 1.5);
  CHECK(sd.t2 == doctest::Approx(1.96349267244317e-4).epsilon(1e-8));
  CHECK(sd.decay_exponent == 3);

  // rate scales as f^(2/3)
  auto m8 = m;
  m8.abundance_zn67 = m.abundance_zn67 / 8.0;
  const auto sd8 = t2_spectral_diffusion(m8, dipolar_lattice_sum(m8));
  CHECK(sd8.rate == doctest::Approx(sd.rate / 4.0).epsilon(1e-12));

  auto none = m;
  none.abundance_zn67 = 0.0;
  CHECK(std::isinf(t2_spectral_diffusion(none, dipolar_lattice_sum(none)).t2));
}

TEST_CASE("decoherence budget") {
  const auto m = zno();
  const auto lo = decoherence_budget(m, M_PI / 5);
  const auto hi = decoherence_budget(m, M_PI / 2);
  CHECK(hi.id.t2 >= 240e-6 * 0.95);
  CHECK(lo.id.t2 <= 1.27e-3 * 1.05);
  CHECK(hi.echo_envelope(0.0) == 1.0);
  for (double t : {1e-6, 50e-6, 200e-6, 1e-3}) {
    const double env = hi.echo_envelope(t);
    const double id_only = std::exp(-t / hi.id.t2);
    const double sd_only = std::exp(-std::pow(t / hi.sd.t2, 3));
    CHECK(env <= std::min(id_only, sd_only) + 1e-15);
  }
  const auto doc = hi.to_json();
  REQUIRE(doc["mechanisms"].size() == 3);
  CHECK(doc["mechanisms"][0]["decay_exponent"] == 1);
  CHECK(doc["mechanisms"][1]["decay_exponent"] == 3);
  CHECK(doc["mechanisms"][0]["inputs"]["variant"] == "paper-consistent");
  const auto table = hi.to_table();
  CHECK(table.find("spectral diffusion") != std::string::npos);
  CHECK(table.find("us") != std::string::npos);
}
