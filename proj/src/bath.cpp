#include "donorspin/bath.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "donorspin/errors.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_material(const MaterialParams& m) {
  IssueCollector issues;
  if (!(m.g_electron > 0.0)) issues.add("g_electron", "must be > 0");
  if (!(m.bohr_radius > 0.0)) issues.add("bohr_radius", "must be > 0");
  if (!(m.nuclear_spin_donor > 0.0)) issues.add("nuclear_spin_donor", "must be > 0");
  if (!(m.nuclear_spin_zn > 0.0)) issues.add("nuclear_spin_zn", "must be > 0");
  if (!(m.abundance_zn67 >= 0.0 && m.abundance_zn67 <= 1.0)) {
    issues.add("abundance_zn67", "must lie in [0, 1]");
  }
  issues.throw_if_any();
}

}  // namespace

std::array<double, 4> ga_field_values(const MaterialParams& m) {
  check_material(m);
  const double psi0 = density_at_origin(m.bohr_radius);
  const double unit = 2.0 * kConstants.vacuum_permeability / (3.0 * m.g_electron) *
                      m.moment_donor / m.nuclear_spin_donor * m.bloch_density_ratio * psi0;
  return {1.5 * unit, 0.5 * unit, -0.5 * unit, -1.5 * unit};
}

double envelope_fourth_power_sum(const MaterialParams& m, double cutoff) {
  const double a = m.bohr_radius;
  const double norm = 1.0 / (std::numbers::pi * a * a * a);
  double sum = 0.0;
  for (const auto& r : wurtzite_cation_sites(m.lattice_a, m.lattice_c, cutoff)) {
    const double psi2 = norm * std::exp(-2.0 * r.norm() / a);
    sum += psi2 * psi2;
  }
  return sum;
}

double zn_dispersion(const MaterialParams& m, const DispersionOptions& opt) {
  check_material(m);
  double fourth = 0.0;
  if (opt.method == DispersionMethod::continuum) {
    // integral of |psi|^4 over all space is 1 / (8 pi a^3)
    fourth = m.zn_site_density / (8.0 * std::numbers::pi * std::pow(m.bohr_radius, 3));
  } else {
    if (!(opt.cutoff_bohr_radii >= 5.0)) {
      throw ValidationError("cutoff_bohr_radii", "lattice sum cutoff must be >= 5 Bohr radii");
    }
    fourth = envelope_fourth_power_sum(m, opt.cutoff_bohr_radii * m.bohr_radius);
  }
  const double i = m.nuclear_spin_zn;
  return kConstants.vacuum_permeability * m.moment_zn / m.g_electron * std::sqrt(32.0 / 27.0) *
         std::sqrt((i + 1.0) / i) * m.bloch_density_ratio * std::sqrt(m.abundance_zn67 * fourth);
}

double BathModel::zn_field_std() const { return std::numbers::sqrt2 * zn_dispersion; }

double BathModel::ga_rms() const {
  double s = 0.0;
  for (double b : ga_field_values) s += b * b;
  return std::sqrt(0.25 * s);
}

double BathModel::gyromagnetic_ratio() const {
  return g_electron * kConstants.bohr_magneton / kConstants.reduced_planck;
}

double BathModel::envelope(double t) const {
  const double gamma = gyromagnetic_ratio();
  double lines = 0.0;
  for (double b : ga_field_values) lines += std::cos(gamma * b * t);
  const double x = gamma * zn_dispersion * t;
  return 0.25 * lines * std::exp(-x * x);
}

void BathModel::validate() const {
  IssueCollector issues;
  if (!(g_electron > 0.0)) issues.add("bath.g_electron", "must be > 0");
  if (!(zn_dispersion >= 0.0)) issues.add("bath.zn_dispersion", "must be >= 0");
  for (double b : ga_field_values) {
    if (!std::isfinite(b)) issues.add("bath.ga_field_values", "must be finite");
  }
  issues.throw_if_any();
}

namespace {

BathModel finish(BathModel b) {
  b.combined_dispersion = std::hypot(b.zn_dispersion, b.ga_rms());
  return b;
}

}  // namespace

BathModel make_bath(const MaterialParams& m, const DispersionOptions& opt) {
  BathModel b;
  b.ga_field_values = ga_field_values(m);
  b.zn_dispersion = zn_dispersion(m, opt);
  b.g_electron = m.g_electron;
  return finish(b);
}

BathModel gaussian_bath(double t2_star, double g_electron) {
  IssueCollector issues;
  if (!(t2_star > 0.0)) issues.add("bath.t2_star", "must be > 0");
  if (!(g_electron > 0.0)) issues.add("g_electron", "must be > 0");
  issues.throw_if_any();
  BathModel b;
  b.g_electron = g_electron;
  b.zn_dispersion = kConstants.reduced_planck / (g_electron * kConstants.bohr_magneton * t2_star);
  return finish(b);
}

BathModel empty_bath(double g_electron) {
  BathModel b;
  b.g_electron = g_electron;
  b.validate();
  return b;
}

T2StarEstimate t2_star_theory(const BathModel& bath) {
  bath.validate();
  T2StarEstimate out;
  const double gamma = bath.gyromagnetic_ratio();
  out.quadrature = bath.combined_dispersion > 0.0 ? 1.0 / (gamma * bath.combined_dispersion) : kInf;

  double ga_max = 0.0;
  for (double b : bath.ga_field_values) ga_max = std::max(ga_max, std::abs(b));
  const double scale = std::max(ga_max, bath.zn_dispersion) * gamma;
  if (scale == 0.0) {
    out.exact = kInf;
    return out;
  }
  // March to the first crossing of 1/e, then bisect.
  const double target = std::exp(-1.0);
  const double dt = 0.01 / scale;
  const long max_steps = 100000;
  double lo = 0.0;
  double hi = kInf;
  for (long k = 1; k <= max_steps; ++k) {
    const double t = k * dt;
    if (bath.envelope(t) <= target) {
      hi = t;
      lo = t - dt;
      break;
    }
  }
  if (!std::isfinite(hi)) {
    out.exact = kInf;
    return out;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (bath.envelope(mid) > target ? lo : hi) = mid;
  }
  out.exact = 0.5 * (lo + hi);
  return out;
}

T2StarEstimate t2_star_theory(const MaterialParams& m, const DispersionOptions& opt) {
  return t2_star_theory(make_bath(m, opt));
}

std::vector<OverhauserSample> sample_overhauser(const BathModel& bath, std::uint64_t seed,
                                                long n) {
  if (n < 1) throw ValidationError("bath.samples", "need at least one sample");
  bath.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> line(0, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double gamma = bath.gyromagnetic_ratio();
  const double sigma = bath.zn_field_std();
  std::vector<OverhauserSample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.ga_component = bath.ga_field_values[line(rng)];
    s.zn_component = sigma * gauss(rng);
    s.detuning = gamma * (s.ga_component + s.zn_component);
  }
  return out;
}

nlohmann::json bath_summary(const BathModel& bath) {
  const auto t2 = t2_star_theory(bath);
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nullptr; };
  return {
      {"ga_field_values_T", bath.ga_field_values},
      {"ga_rms_T", bath.ga_rms()},
      {"zn_dispersion_T", bath.zn_dispersion},
      {"zn_field_std_T", bath.zn_field_std()},
      {"combined_dispersion_T", bath.combined_dispersion},
      {"t2_star_exact_s", finite_or_null(t2.exact)},
      {"t2_star_quadrature_s", finite_or_null(t2.quadrature)},
  };
}

}  // namespace donorspin
