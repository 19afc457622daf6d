#include "donorspin/units.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <utility>

#include "donorspin/errors.hpp"

namespace donorspin {

double zeeman_splitting(double g, double field_tesla) {
  if (!(field_tesla >= 0.0)) {
    throw ValidationError("field", "magnetic field must be >= 0 T");
  }
  return g * kConstants.bohr_magneton * field_tesla / kConstants.reduced_planck;
}

double density_at_origin(double bohr_radius) {
  if (!(bohr_radius > 0.0)) {
    throw ValidationError("bohr_radius", "Bohr radius must be > 0");
  }
  return 1.0 / (std::numbers::pi * bohr_radius * bohr_radius * bohr_radius);
}

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::dimensionless: return "dimensionless";
    case Dimension::length: return "length";
    case Dimension::time: return "time";
    case Dimension::field: return "magnetic field";
    case Dimension::angular_frequency: return "frequency";
    case Dimension::rate: return "rate";
    case Dimension::energy: return "energy";
    case Dimension::number_density: return "number density";
    case Dimension::nuclear_moment: return "nuclear moment";
    case Dimension::angle: return "angle";
    case Dimension::time_per_radian: return "time per radian";
    case Dimension::calibration: return "pulse calibration";
  }
  return "unknown";
}

namespace {

struct UnitEntry {
  Dimension dim;
  std::string_view symbol;
  double factor;
};

constexpr double kPi = std::numbers::pi;

constexpr std::array kUnits{
    UnitEntry{Dimension::dimensionless, "1", 1.0},
    UnitEntry{Dimension::length, "m", 1.0},
    UnitEntry{Dimension::length, "cm", 1e-2},
    UnitEntry{Dimension::length, "mm", 1e-3},
    UnitEntry{Dimension::length, "um", 1e-6},
    UnitEntry{Dimension::length, "nm", 1e-9},
    UnitEntry{Dimension::length, "pm", 1e-12},
    UnitEntry{Dimension::length, "A", 1e-10},
    UnitEntry{Dimension::time, "s", 1.0},
    UnitEntry{Dimension::time, "ms", 1e-3},
    UnitEntry{Dimension::time, "us", 1e-6},
    UnitEntry{Dimension::time, "ns", 1e-9},
    UnitEntry{Dimension::time, "ps", 1e-12},
    UnitEntry{Dimension::time, "fs", 1e-15},
    UnitEntry{Dimension::field, "T", 1.0},
    UnitEntry{Dimension::field, "mT", 1e-3},
    UnitEntry{Dimension::field, "uT", 1e-6},
    UnitEntry{Dimension::field, "G", 1e-4},
    UnitEntry{Dimension::angular_frequency, "rad/s", 1.0},
    UnitEntry{Dimension::angular_frequency, "Hz", 2 * kPi},
    UnitEntry{Dimension::angular_frequency, "kHz", 2 * kPi * 1e3},
    UnitEntry{Dimension::angular_frequency, "MHz", 2 * kPi * 1e6},
    UnitEntry{Dimension::angular_frequency, "GHz", 2 * kPi * 1e9},
    UnitEntry{Dimension::angular_frequency, "THz", 2 * kPi * 1e12},
    UnitEntry{Dimension::rate, "s^-1", 1.0},
    UnitEntry{Dimension::rate, "1/s", 1.0},
    UnitEntry{Dimension::rate, "ms^-1", 1e3},
    UnitEntry{Dimension::rate, "us^-1", 1e6},
    UnitEntry{Dimension::rate, "ns^-1", 1e9},
    UnitEntry{Dimension::energy, "J", 1.0},
    UnitEntry{Dimension::energy, "uJ", 1e-6},
    UnitEntry{Dimension::energy, "nJ", 1e-9},
    UnitEntry{Dimension::energy, "pJ", 1e-12},
    UnitEntry{Dimension::energy, "fJ", 1e-15},
    UnitEntry{Dimension::number_density, "m^-3", 1.0},
    UnitEntry{Dimension::number_density, "cm^-3", 1e6},
    UnitEntry{Dimension::nuclear_moment, "mu_N", kConstants.nuclear_magneton},
    UnitEntry{Dimension::nuclear_moment, "J/T", 1.0},
    UnitEntry{Dimension::angle, "rad", 1.0},
    UnitEntry{Dimension::angle, "deg", kPi / 180.0},
    UnitEntry{Dimension::angle, "pi", kPi},
    UnitEntry{Dimension::time_per_radian, "s/rad", 1.0},
    UnitEntry{Dimension::time_per_radian, "ps/rad", 1e-12},
    UnitEntry{Dimension::time_per_radian, "fs/rad", 1e-15},
    UnitEntry{Dimension::calibration, "rad^2/s/J", 1.0},
    UnitEntry{Dimension::calibration, "rad^2/s/pJ", 1e12},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dim, std::string_view key) {
  const std::string k(key.empty() ? std::string_view("value") : key);
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || !std::isfinite(value)) {
    throw ValidationError(k, "cannot parse number from '" + std::string(text) + "'");
  }
  const std::string_view unit = trim(std::string_view(ptr, s.data() + s.size() - ptr));
  if (unit.empty()) {
    if (dim == Dimension::dimensionless) return value;
    throw ValidationError(k, "missing unit for " + std::string(dimension_name(dim)) +
                                 " quantity '" + std::string(text) + "'");
  }
  for (const auto& u : kUnits) {
    if (u.symbol == unit) {
      if (u.dim != dim) {
        throw ValidationError(k, "unit '" + std::string(unit) + "' is a " +
                                     std::string(dimension_name(u.dim)) + " unit, expected " +
                                     std::string(dimension_name(dim)));
      }
      return value * u.factor;
    }
  }
  throw ValidationError(k, "unknown unit '" + std::string(unit) + "'");
}

ValidationError::ValidationError(std::vector<Issue> issues)
    : std::runtime_error([&] {
        std::string msg = "validation failed:";
        for (const auto& i : issues) msg += "\n  " + i.key + ": " + i.message;
        return msg;
      }()),
      issues_(std::move(issues)) {}

ValidationError::ValidationError(std::string key, std::string message)
    : ValidationError(std::vector<Issue>{{std::move(key), std::move(message)}}) {}

}  // namespace donorspin
