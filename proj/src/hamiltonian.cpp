#include "donorspin/hamiltonian.hpp"

#include <cmath>
#include <numbers>

#include "donorspin/errors.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

Eigen::Vector4d LevelScheme::energies() const {
  return {0.0, omega_e, detuning, detuning + omega_h};
}

LevelScheme levels_at_field(double g_electron, double g_hole, double field_tesla,
                            double detuning) {
  return {zeeman_splitting(g_electron, field_tesla), zeeman_splitting(g_hole, field_tesla),
          detuning};
}

namespace {

constexpr double kSqrt2Ln2 = 1.1774100225154747;  // sqrt(2 ln 2)
constexpr double kSech2FwhmPerT = 1.7627471740390860;  // 2 asinh(1)

double half_window(const PulseSpec& p) {
  return p.shape == PulseShape::rectangular ? 0.5 * p.duration
                                            : kShapedPulseCutoffFwhm * p.duration;
}

}  // namespace

double PulseSpec::window_start() const { return arrival_time - half_window(*this); }
double PulseSpec::window_end() const { return arrival_time + half_window(*this); }

double normalized_intensity(const PulseSpec& pulse, double t) {
  const double x = t - pulse.arrival_time;
  const double half = half_window(pulse);
  if (!(std::abs(x) <= half)) return 0.0;
  switch (pulse.shape) {
    case PulseShape::rectangular:
      return 1.0 / pulse.duration;
    case PulseShape::gaussian: {
      const double sigma = pulse.duration / (2.0 * kSqrt2Ln2);
      const double area = sigma * std::sqrt(2.0 * std::numbers::pi) *
                          std::erf(half / (sigma * std::numbers::sqrt2));
      return std::exp(-0.5 * x * x / (sigma * sigma)) / area;
    }
    case PulseShape::sech2: {
      const double width = pulse.duration / kSech2FwhmPerT;
      const double area = 2.0 * width * std::tanh(half / width);
      const double s = 1.0 / std::cosh(x / width);
      return s * s / area;
    }
  }
  return 0.0;
}

double envelope_value(const PulseSpec& pulse, double calibration_k, double t) {
  if (pulse.energy <= 0.0) return 0.0;
  return std::sqrt(calibration_k * pulse.energy * normalized_intensity(pulse, t));
}

Matrix4c hamiltonian_matrix(const LevelScheme& levels, const CouplingWeights& w, double rabi) {
  Matrix4c h = Matrix4c::Zero();
  const Eigen::Vector4d e = levels.energies();
  for (int i = 0; i < 4; ++i) h(i, i) = e(i);
  const Complex half(-0.5 * rabi, 0.0);
  h(kDown, kTrionDown) = half * w[0];
  h(kUp, kTrionDown) = half * w[1];
  h(kDown, kTrionUp) = half * w[2];
  h(kUp, kTrionUp) = half * w[3];
  for (int g = 0; g < 2; ++g) {
    for (int x = 2; x < 4; ++x) h(x, g) = std::conj(h(g, x));
  }
  return h;
}

HamiltonianSnapshot build_hamiltonian(const LevelScheme& levels, const PulseSpec& pulse,
                                      double calibration_k, double t) {
  return {hamiltonian_matrix(levels, pulse.coupling_weights,
                             envelope_value(pulse, calibration_k, t)),
          t};
}

double effective_rabi(double rabi, double detuning, double omega_h) {
  if (!(detuning > 0.0) || !(detuning + omega_h > 0.0)) {
    throw ValidationError("detuning", "effective Rabi frequency needs red detuning D > 0 and "
                                      "D + omega_h > 0");
  }
  return 0.5 * rabi * rabi * (1.0 / detuning + 1.0 / (detuning + omega_h));
}

Eigen::Matrix2cd effective_hamiltonian(double omega_eff, double omega_e, double t) {
  Eigen::Matrix2cd h = Eigen::Matrix2cd::Zero();
  h(0, 1) = 0.5 * omega_eff * std::exp(Complex(0.0, -omega_e * t));
  h(1, 0) = std::conj(h(0, 1));
  return h;
}

AdiabaticityReport adiabaticity_diagnostic(const LevelScheme& levels, const PulseSpec& pulse) {
  const double ratio = std::abs(levels.detuning) * pulse.duration;
  return {ratio, ratio >= kAdiabaticityThreshold};
}

}  // namespace donorspin
