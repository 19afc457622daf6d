#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "donorspin/bath.hpp"
#include "donorspin/estimators.hpp"
#include "donorspin/materials.hpp"
#include "donorspin/sequences.hpp"
#include "donorspin/simultaneous_fit.hpp"

namespace donorspin {

// Run configuration document (JSON). Physical quantities are strings with an
// explicit unit, "5 T", "1.9 ps", "10 MHz"; dimensionless ones are numbers.
// Missing keys take the values of default_config_document(); keys that are
// not in it are rejected. The `experiment` object holds exactly one of
// rabi, ramsey, echo, t1, pump.

enum class ExperimentKind { rabi, ramsey, echo, t1, pump };
std::string_view to_string(ExperimentKind k);
inline constexpr std::string_view kExperimentNames = "rabi, ramsey, echo, t1, pump";

struct BathSection {
  bool enabled = false;
  std::string model = "material";  // material | gaussian
  double t2_star = 17e-9;          // gaussian model only
  DispersionMethod dispersion = DispersionMethod::continuum;
  EnsembleOptions ensemble;
};

struct ScanSection {
  double pulse_energy = 0.0;     // resolved from pulse_angle when not given
  std::vector<double> centers;   // ramsey window centres or echo tau1 values
  double step = 0.0;             // resolved to a Larmor period / 8 when not given
  int points = 16;
  std::string envelope_model;    // fit of the window amplitudes, "" for none
};

struct FitSection {
  std::string model = "exp";
  std::vector<std::string> compare;
  std::string ordinate = "auto";  // auto: p_up, else amplitude
  // Offset of the decay models: auto frees it for p_up (recovery to a
  // plateau) and pins it at 0 for envelope amplitudes.
  std::string offset = "auto";
  SimultaneousFitSpec simultaneous;
};

struct EstimateSection {
  std::vector<double> theta2;
  IdVariant variant = IdVariant::paper_consistent;
  LatticeSumOptions lattice;
  DispersionMethod dispersion = DispersionMethod::continuum;
};

struct RunConfig {
  nlohmann::json resolved;  // defaults merged with the user document
  MaterialParams material;
  Eigen::Vector3d field_orientation = Eigen::Vector3d::UnitX();
  ExperimentSetup setup;
  std::optional<ExperimentKind> experiment;
  std::vector<double> rabi_energies;
  ScanSection scan;  // ramsey and echo
  std::vector<double> t1_waits;
  BathSection bath;
  FitSection fit;
  EstimateSection estimate;
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 1;

  std::optional<BathModel> bath_model() const;
  std::string hash() const;  // FNV-1a of the resolved document, 16 hex digits
};

nlohmann::json default_config_document();

// Reads JSON; IoError when unreadable, ValidationError on syntax errors.
nlohmann::json load_config_document(const std::filesystem::path& path);

// "a.b.c=value": value is parsed as JSON when it parses, else taken as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Dotted key lookup, nullptr when absent.
const nlohmann::json* find_key(const nlohmann::json& doc, std::string_view dotted);

// Validates the whole document and reports every problem in one
// ValidationError. With require_experiment = false the experiment object may
// be absent (more than one section is still an error).
RunConfig parse_run_config(const nlohmann::json& doc, bool require_experiment = true);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace donorspin
