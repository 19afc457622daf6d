#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "donorspin/bath.hpp"
#include "donorspin/materials.hpp"

namespace donorspin {

enum class IdVariant {
  paper_consistent,  // pi in the numerator; matches the quoted 240 us - 1.27 ms range
  as_printed,        // pi in the denominator
};

std::string_view to_string(IdVariant v);

struct IDEstimate {
  double t2 = 0.0;    // s, +inf when the rate vanishes
  double rate = 0.0;  // 1/s
  int decay_exponent = 1;
  double donor_density = 0.0;
  double theta2 = 0.0;
  IdVariant variant = IdVariant::paper_consistent;
};

// Echo decay from the refocusing pulse rotating the whole donor ensemble.
// Throws ValidationError unless 0 <= theta2 <= pi.
IDEstimate t2_instantaneous_diffusion(const MaterialParams& m, double theta2,
                                      IdVariant variant = IdVariant::paper_consistent);

struct LatticeSumOptions {
  Eigen::Vector3d field_direction = Eigen::Vector3d::UnitX();  // perpendicular to c
  double cutoff = 10e-9;                                       // m, >= 3 nm
  // Replace (1 - 3 cos^2)^2 by its orientation average 4/5.
  bool powder_average = false;
  // Monte Carlo over random 67Zn occupations instead of the f-weighted sum.
  bool monte_carlo = false;
  long mc_samples = 200;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: hardware concurrency
};

struct LatticeSumResult {
  double sum_b_squared = 0.0;  // rad^2/s^2, abundance weighted
  double standard_error = 0.0; // Monte Carlo only
  double cutoff_radius = 0.0;
  long site_count = 0;
  Eigen::Vector3d field_direction = Eigen::Vector3d::UnitX();
  bool powder_average = false;
  bool monte_carlo = false;
  bool converged = false;         // <= 1% change when the cutoff grows by 25%
  double relative_change = 0.0;   // between cutoff and 1.25 cutoff
};

// Sum of b_j^2 over 67Zn sites around a central 67Zn, b_j the secular
// dipolar coupling in rad/s. Throws NumericalError (with both partial sums in
// the message) if the sum has not converged at the cutoff.
LatticeSumResult dipolar_lattice_sum(const MaterialParams& m, const LatticeSumOptions& opt = {});

struct SDEstimate {
  double t2 = 0.0;  // s, +inf when the rate vanishes
  double rate = 0.0;
  int decay_exponent = 3;
  double spin_density = 0.0;  // f * zn_site_density
  double sum_b_squared = 0.0;
};

SDEstimate t2_spectral_diffusion(const MaterialParams& m, const LatticeSumResult& lattice);

struct DecoherenceBudget {
  IDEstimate id;
  SDEstimate sd;
  LatticeSumResult lattice;
  T2StarEstimate t2_star;

  // exp(-t/T_ID) exp(-(t/T_SD)^3)
  double echo_envelope(double t) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

DecoherenceBudget decoherence_budget(const MaterialParams& m, double theta2,
                                     const LatticeSumOptions& lattice = {},
                                     IdVariant variant = IdVariant::paper_consistent);

}  // namespace donorspin
