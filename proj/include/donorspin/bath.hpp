#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "donorspin/materials.hpp"

namespace donorspin {

enum class DispersionMethod { continuum, lattice_sum };

struct DispersionOptions {
  DispersionMethod method = DispersionMethod::continuum;
  double cutoff_bohr_radii = 10.0;  // lattice_sum only; must be >= 5
};

// Hyperfine field of the single donor nucleus for m = 3/2, 1/2, -1/2, -3/2 (tesla).
std::array<double, 4> ga_field_values(const MaterialParams& m);

// Gaussian dispersion of the 67Zn hyperfine field (tesla).
double zn_dispersion(const MaterialParams& m, const DispersionOptions& opt = {});

// Sum of |psi(R_j)|^4 over host cation sites within the cutoff, donor site excluded.
double envelope_fourth_power_sum(const MaterialParams& m, double cutoff);

// Overhauser field distribution seen by one donor electron: four equally
// likely donor-nucleus lines convolved with the Zn Gaussian.
//
// zn_dispersion is the Delta of the dispersion formula, read so that
// hbar / (g muB Delta) is the 1/e time of the Zn-only ensemble envelope
// exp(-(g muB Delta t / hbar)^2). The field itself then has standard
// deviation sqrt(2) Delta.
struct BathModel {
  std::array<double, 4> ga_field_values{};
  double zn_dispersion = 0.0;
  double combined_dispersion = 0.0;  // sqrt(zn^2 + rms(ga)^2)
  double g_electron = 0.0;

  double zn_field_std() const;
  double ga_rms() const;
  // g muB / hbar, rad/s per tesla
  double gyromagnetic_ratio() const;

  // Ensemble coherence <cos(delta t)>: four-line average times the Gaussian.
  double envelope(double t) const;

  void validate() const;
};

BathModel make_bath(const MaterialParams& m, const DispersionOptions& opt = {});

// Gaussian-only bath whose envelope is exp(-(t / t2_star)^2).
BathModel gaussian_bath(double t2_star, double g_electron);

// No nuclear field at all.
BathModel empty_bath(double g_electron);

struct T2StarEstimate {
  double exact = 0.0;       // 1/e time of BathModel::envelope; +inf if it never decays
  double quadrature = 0.0;  // hbar / (g muB combined_dispersion); +inf for zero dispersion
};

T2StarEstimate t2_star_theory(const BathModel& bath);
T2StarEstimate t2_star_theory(const MaterialParams& m, const DispersionOptions& opt = {});

struct OverhauserSample {
  double detuning = 0.0;      // shift of the electron Zeeman frequency, rad/s
  double ga_component = 0.0;  // tesla
  double zn_component = 0.0;  // tesla
};

// Reproducible for a fixed seed. Throws ValidationError for n < 1.
std::vector<OverhauserSample> sample_overhauser(const BathModel& bath, std::uint64_t seed,
                                                long n);

nlohmann::json bath_summary(const BathModel& bath);

}  // namespace donorspin
