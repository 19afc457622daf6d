#include "donorspin/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "donorspin/errors.hpp"
#include "donorspin/parallel.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

double inverse_or_inf(double rate) { return rate > 0.0 ? 1.0 / rate : kInf; }

}  // namespace

std::string_view to_string(IdVariant v) {
  return v == IdVariant::paper_consistent ? "paper-consistent" : "as-printed";
}

IDEstimate t2_instantaneous_diffusion(const MaterialParams& m, double theta2, IdVariant variant) {
  IssueCollector issues;
  if (!(theta2 >= 0.0 && theta2 <= kPi)) issues.add("theta2", "must lie in [0, pi]");
  if (!(m.donor_density >= 0.0)) issues.add("donor_density", "must be >= 0");
  issues.throw_if_any();
  const double gmu = m.g_electron * kConstants.bohr_magneton;
  const double base = kConstants.vacuum_permeability * gmu * gmu * m.donor_density /
                      (9.0 * std::sqrt(3.0) * kConstants.reduced_planck);
  const double s = std::sin(0.5 * theta2);
  IDEstimate out;
  out.rate = base * (variant == IdVariant::paper_consistent ? kPi : 1.0 / kPi) * s * s;
  out.t2 = inverse_or_inf(out.rate);
  out.donor_density = m.donor_density;
  out.theta2 = theta2;
  out.variant = variant;
  return out;
}

LatticeSumResult dipolar_lattice_sum(const MaterialParams& m, const LatticeSumOptions& opt) {
  IssueCollector issues;
  if (!(opt.cutoff >= 3e-9)) issues.add("lattice.cutoff", "must be >= 3 nm");
  const double dn = opt.field_direction.norm();
  if (!(dn > 0.0) || !std::isfinite(dn)) issues.add("lattice.field_direction", "must be nonzero");
  if (opt.monte_carlo && opt.mc_samples < 2) issues.add("lattice.mc_samples", "must be >= 2");
  if (!(m.abundance_zn67 >= 0.0 && m.abundance_zn67 <= 1.0)) {
    issues.add("abundance_zn67", "must lie in [0, 1]");
  }
  issues.throw_if_any();
  const Eigen::Vector3d dir = opt.field_direction / dn;

  const double coupling = kConstants.vacuum_permeability / (4.0 * kPi) * m.moment_zn *
                          m.moment_zn / kConstants.reduced_planck;
  const double pref = coupling * coupling;

  const double outer = 1.25 * opt.cutoff;
  const auto sites = wurtzite_cation_sites(m.lattice_a, m.lattice_c, outer);
  const long n = static_cast<long>(sites.size());
  std::vector<double> kernel(sites.size());
  std::vector<char> inside(sites.size());
  for (long i = 0; i < n; ++i) {
    const double r2 = sites[i].squaredNorm();
    const double r6 = r2 * r2 * r2;
    double ang = 0.8;
    if (!opt.powder_average) {
      const double c2 = std::pow(sites[i].dot(dir), 2) / r2;
      ang = (1.0 - 3.0 * c2) * (1.0 - 3.0 * c2);
    }
    kernel[i] = ang / r6;
    inside[i] = r2 <= opt.cutoff * opt.cutoff;
  }

  // Fixed chunking keeps the reduction order, and the result, independent of jobs.
  constexpr int kChunks = 64;
  std::vector<double> part_in(kChunks, 0.0), part_all(kChunks, 0.0);
  parallel_for(kChunks, opt.jobs, [&](long c) {
    const long lo = n * c / kChunks;
    const long hi = n * (c + 1) / kChunks;
    double a = 0.0, b = 0.0;
    for (long i = lo; i < hi; ++i) {
      b += kernel[i];
      if (inside[i]) a += kernel[i];
    }
    part_in[c] = a;
    part_all[c] = b;
  });
  double s_in = 0.0, s_all = 0.0;
  long count = 0;
  for (int c = 0; c < kChunks; ++c) {
    s_in += part_in[c];
    s_all += part_all[c];
  }
  for (char f : inside) count += f;

  LatticeSumResult out;
  out.cutoff_radius = opt.cutoff;
  out.site_count = count;
  out.field_direction = dir;
  out.powder_average = opt.powder_average;
  out.monte_carlo = opt.monte_carlo;
  out.relative_change = s_in > 0.0 ? (s_all - s_in) / s_in : 0.0;
  out.converged = out.relative_change <= 0.01;
  if (!out.converged) {
    std::ostringstream msg;
    msg << "dipolar lattice sum not converged at cutoff " << opt.cutoff
        << " m: partial sums " << m.abundance_zn67 * pref * s_in << " and "
        << m.abundance_zn67 * pref * s_all << " rad^2/s^2 at 1.25x cutoff";
    throw NumericalError(msg.str());
  }

  if (!opt.monte_carlo) {
    out.sum_b_squared = m.abundance_zn67 * pref * s_in;
    return out;
  }

  // Each sample draws an occupation of every site. The central nucleus may sit
  // on either cation sublattice, but the two environments are related by
  // inversion, which leaves every kernel term unchanged.
  std::vector<double> totals(static_cast<std::size_t>(opt.mc_samples));
  const int chunks = static_cast<int>(std::min<long>(opt.mc_samples, 256));
  parallel_for(chunks, opt.jobs, [&](long c) {
    const long lo = opt.mc_samples * c / chunks;
    const long hi = opt.mc_samples * (c + 1) / chunks;
    for (long s = lo; s < hi; ++s) {
      std::seed_seq seq{static_cast<std::uint64_t>(opt.seed), static_cast<std::uint64_t>(s)};
      std::mt19937_64 rng(seq);
      std::bernoulli_distribution occupied(m.abundance_zn67);
      double acc = 0.0;
      for (long i = 0; i < n; ++i) {
        if (!inside[i] || !occupied(rng)) continue;
        acc += kernel[i];
      }
      totals[static_cast<std::size_t>(s)] = pref * acc;
    }
  });
  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= static_cast<double>(totals.size());
  double var = 0.0;
  for (double t : totals) var += (t - mean) * (t - mean);
  var /= static_cast<double>(totals.size() - 1);
  out.sum_b_squared = mean;
  out.standard_error = std::sqrt(var / static_cast<double>(totals.size()));
  return out;
}

SDEstimate t2_spectral_diffusion(const MaterialParams& m, const LatticeSumResult& lattice) {
  if (!(lattice.sum_b_squared >= 0.0)) {
    throw ValidationError("lattice.sum_b_squared", "must be >= 0");
  }
  SDEstimate out;
  out.spin_density = m.abundance_zn67 * m.zn_site_density;
  out.sum_b_squared = lattice.sum_b_squared;
  const double cube = 8.0 * kPi / (27.0 * std::sqrt(3.0) * kConstants.reduced_planck) *
                      kConstants.vacuum_permeability * m.moment_zn * m.g_electron *
                      kConstants.bohr_magneton * out.spin_density * lattice.sum_b_squared;
  out.rate = std::cbrt(cube);
  out.t2 = inverse_or_inf(out.rate);
  return out;
}

double DecoherenceBudget::echo_envelope(double t) const {
  const double x = std::isfinite(sd.t2) ? t / sd.t2 : 0.0;
  return std::exp(-id.rate * t) * std::exp(-x * x * x);
}

nlohmann::json DecoherenceBudget::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  nlohmann::json doc;
  doc["mechanisms"] = nlohmann::json::array({
      {{"mechanism", "instantaneous_diffusion"},
       {"t2_s", num(id.t2)},
       {"decay_exponent", id.decay_exponent},
       {"inputs",
        {{"donor_density_m-3", id.donor_density},
         {"theta2_rad", id.theta2},
         {"variant", std::string(to_string(id.variant))}}}},
      {{"mechanism", "spectral_diffusion"},
       {"t2_s", num(sd.t2)},
       {"decay_exponent", sd.decay_exponent},
       {"inputs",
        {{"spin_density_m-3", sd.spin_density},
         {"sum_b_squared_rad2_s-2", sd.sum_b_squared},
         {"cutoff_m", lattice.cutoff_radius},
         {"site_count", lattice.site_count},
         {"field_direction",
          {lattice.field_direction.x(), lattice.field_direction.y(), lattice.field_direction.z()}},
         {"powder_average", lattice.powder_average},
         {"monte_carlo", lattice.monte_carlo},
         {"relative_change_at_1.25_cutoff", lattice.relative_change}}}},
      {{"mechanism", "inhomogeneous_dephasing"},
       {"t2_s", num(t2_star.exact)},
       {"decay_exponent", 2},
       {"inputs", {{"quadrature_t2_s", num(t2_star.quadrature)}}}},
  });
  doc["echo_envelope"] = "exp(-t/T2_ID) * exp(-(t/T2_SD)^3)";
  return doc;
}

std::string DecoherenceBudget::to_table() const {
  auto fmt = [](double seconds) {
    std::ostringstream s;
    s.precision(4);
    if (!std::isfinite(seconds)) {
      s << "inf";
    } else if (seconds < 1e-6) {
      s << seconds * 1e9 << " ns";
    } else if (seconds < 1e-3) {
      s << seconds * 1e6 << " us";
    } else {
      s << seconds * 1e3 << " ms";
    }
    std::string out = s.str();
    out.resize(std::max<std::size_t>(out.size() + 1, 12), ' ');
    return out;
  };
  std::ostringstream out;
  out << "mechanism                  T2          decay\n";
  out << "instantaneous diffusion    " << fmt(id.t2) << "exp(-t/T)      theta2 = " << id.theta2
      << " rad, " << to_string(id.variant) << "\n";
  out << "spectral diffusion         " << fmt(sd.t2) << "exp(-(t/T)^3)\n";
  out << "inhomogeneous (T2*)        " << fmt(t2_star.exact)
      << "1/e of ensemble envelope, quadrature " << fmt(t2_star.quadrature) << "\n";
  return out.str();
}

DecoherenceBudget decoherence_budget(const MaterialParams& m, double theta2,
                                     const LatticeSumOptions& lattice, IdVariant variant) {
  DecoherenceBudget b;
  b.id = t2_instantaneous_diffusion(m, theta2, variant);
  b.lattice = dipolar_lattice_sum(m, lattice);
  b.sd = t2_spectral_diffusion(m, b.lattice);
  b.t2_star = t2_star_theory(m);
  return b;
}

}  // namespace donorspin
