#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "donorspin/fit.hpp"
#include "donorspin/sequences.hpp"

namespace donorspin {

// P_up after one pulse, per pulse energy.
struct RabiData {
  std::vector<double> energy;  // J
  std::vector<double> p_up;
  std::vector<double> sigma;   // optional, per point
};

// Ramsey fringe amplitude V, per pulse energy (both pulses equal).
struct FringeAmplitudeData {
  std::vector<double> energy;  // J
  std::vector<double> amplitude;
  std::vector<double> sigma;   // optional, per point
};

struct SimultaneousFitSpec {
  ExperimentSetup setup;  // forward model; k, beta1, beta2 are overwritten by the fit
  double k_initial = 0.0;  // 0: take setup.calibration_k
  double beta1_initial = 0.02;
  double beta2_initial = 5e-15;  // s
  // Delay window used to extract V: `fringe_points` delays at 1/8 Larmor
  // period steps starting at `fringe_delay`.
  double fringe_delay = 40e-12;
  int fringe_points = 8;
  // Relative weight of the fringe dataset in the joint sum of squares. Within
  // each dataset points are weighted by 1/sigma^2 when sigma is given.
  double fringe_weight = 1.0;
  int gamma_curve_points = 50;
  LmOptions lm;

  void validate(const RabiData& rabi, const FringeAmplitudeData& fringe) const;
};

struct SimultaneousFitResult {
  FitResult fit;  // parameters calibration_k, beta1, beta2
  // gamma(Omega_R) = beta1 Omega_R + beta2 Omega_R^2 from 0 to the largest
  // peak Omega_R reached in the data, with 1 sigma from the covariance.
  std::vector<double> rabi_frequency;
  std::vector<double> gamma;
  std::vector<double> gamma_error;
  std::vector<double> rabi_model;   // forward model at the optimum
  std::vector<double> fringe_model;
  std::vector<std::string> rejected_trials;  // forward-model failures

  nlohmann::json to_json() const;
};

// Forward model: P_up per Rabi energy and V per fringe energy.
struct ForwardValues {
  std::vector<double> rabi;
  std::vector<double> fringe;
};
ForwardValues simultaneous_forward(const SimultaneousFitSpec& spec, double k, double beta1,
                                   double beta2, std::span<const double> rabi_energy,
                                   std::span<const double> fringe_energy);

SimultaneousFitResult simultaneous_fit_rabi_fringe(const RabiData& rabi,
                                                   const FringeAmplitudeData& fringe,
                                                   const SimultaneousFitSpec& spec);

}  // namespace donorspin
