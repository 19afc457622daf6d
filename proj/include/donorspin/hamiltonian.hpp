#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>

namespace donorspin {

using Complex = std::complex<double>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;

// Basis ordering used everywhere: |down>, |up>, |trion, hole down>, |trion, hole up>.
enum Level : int { kDown = 0, kUp = 1, kTrionDown = 2, kTrionUp = 3 };

// Level energies in the laser rotating frame, rad/s.
struct LevelScheme {
  double omega_e = 0.0;   // electron Zeeman splitting
  double omega_h = 0.0;   // hole Zeeman splitting
  double detuning = 0.0;  // red detuning of the laser from |down> <-> |trion down>

  // diag(0, omega_e, detuning, detuning + omega_h)
  Eigen::Vector4d energies() const;
};

LevelScheme levels_at_field(double g_electron, double g_hole, double field_tesla, double detuning);

enum class PulseShape { gaussian, sech2, rectangular };

// Coupling weights of the four optical transitions relative to Omega_R, in
// the order (1-3, 2-3, 1-4, 2-4).
using CouplingWeights = std::array<Complex, 4>;
inline constexpr CouplingWeights kBalancedCoupling{Complex{1.0}, Complex{1.0}, Complex{1.0},
                                                   Complex{1.0}};

struct PulseSpec {
  PulseShape shape = PulseShape::gaussian;
  double duration = 1.9e-12;  // intensity FWHM (length for rectangular), s
  double energy = 0.0;        // J
  double arrival_time = 0.0;  // s, envelope peak / centre
  double detuning = 0.0;      // rad/s
  CouplingWeights coupling_weights = kBalancedCoupling;

  // Support [start, end] of the envelope. Shaped pulses are cut at +-5 FWHM.
  double window_start() const;
  double window_end() const;
};

inline constexpr double kShapedPulseCutoffFwhm = 5.0;

// Instantaneous Rabi frequency Omega_R(t) >= 0 such that the integral of
// Omega_R^2 over the window equals calibration_k * energy.
double envelope_value(const PulseSpec& pulse, double calibration_k, double t);

// Omega_R^2(t) / (calibration_k * energy): a unit-area intensity profile.
double normalized_intensity(const PulseSpec& pulse, double t);

struct HamiltonianSnapshot {
  Matrix4c matrix;
  double time = 0.0;
};

// Rotating-wave Hamiltonian for instantaneous Rabi frequency `rabi`.
Matrix4c hamiltonian_matrix(const LevelScheme& levels, const CouplingWeights& weights,
                            double rabi);

HamiltonianSnapshot build_hamiltonian(const LevelScheme& levels, const PulseSpec& pulse,
                                      double calibration_k, double t);

// Adiabatically eliminated Rabi frequency (|Omega_R|^2 / 2)(1/D + 1/(D + w_h)).
// Throws ValidationError unless D > 0 and D + w_h > 0.
double effective_rabi(double rabi, double detuning, double omega_h);

// Effective 2-level Hamiltonian over {|down>, |up>} in the same frame as the
// 4-level one: off-diagonal (Omega_eff/2) e^{-i w_e t}.
Eigen::Matrix2cd effective_hamiltonian(double omega_eff, double omega_e, double t);

struct AdiabaticityReport {
  double ratio = 0.0;  // detuning * duration
  bool pass = false;   // ratio >= kAdiabaticityThreshold
};
inline constexpr double kAdiabaticityThreshold = 10.0;

AdiabaticityReport adiabaticity_diagnostic(const LevelScheme& levels, const PulseSpec& pulse);

}  // namespace donorspin
