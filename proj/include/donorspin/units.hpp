#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace donorspin {

// CODATA 2018 values. Fixed at build time.
struct PhysicalConstants {
  double bohr_magneton;         // J/T
  double nuclear_magneton;      // J/T
  double vacuum_permeability;   // T m / A
  double reduced_planck;        // J s

  constexpr double planck() const { return 2.0 * std::numbers::pi * reduced_planck; }
};

inline constexpr PhysicalConstants kConstants{
    9.2740100783e-24,
    5.0507837461e-27,
    1.25663706212e-6,
    1.054571817e-34,
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Internal convention: energies are angular frequencies in rad/s.
constexpr double hz_to_rad_per_s(double hz) { return kTwoPi * hz; }
constexpr double rad_per_s_to_hz(double w) { return w / kTwoPi; }
constexpr double ghz_to_rad_per_s(double ghz) { return kTwoPi * ghz * 1e9; }
constexpr double rad_per_s_to_ghz(double w) { return w / kTwoPi * 1e-9; }

// Zeeman splitting g * muB * B / hbar in rad/s. Throws ValidationError for B < 0.
double zeeman_splitting(double g, double field_tesla);

// |psi(0)|^2 = 1 / (pi a^3) for a hydrogenic 1s envelope. Throws for a <= 0.
double density_at_origin(double bohr_radius);

enum class Dimension {
  dimensionless,
  length,
  time,
  field,
  angular_frequency,
  rate,
  energy,
  number_density,
  nuclear_moment,
  angle,
  time_per_radian,
  calibration,  // rad^2 / (s J): integral of Omega_R^2 per unit pulse energy
};

std::string_view dimension_name(Dimension d);

// Parses "<number> <unit>" into SI (rad/s for angular frequency). A bare
// number is accepted only for dimensionless quantities. Frequency units
// (Hz, GHz, THz, ...) are read as cyclic and converted to rad/s.
// Throws ValidationError naming `key` on unknown units or malformed text.
double parse_quantity(std::string_view text, Dimension dim, std::string_view key = {});

}  // namespace donorspin
