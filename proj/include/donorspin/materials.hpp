#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace donorspin {

// Host and donor constants for one material. Immutable once loaded.
struct MaterialParams {
  std::string name;
  double g_electron = 0.0;
  double g_hole = 0.0;
  double nuclear_spin_zn = 0.0;     // 67Zn
  double nuclear_spin_donor = 0.0;  // donor nucleus
  double moment_zn = 0.0;           // J/T
  double moment_donor = 0.0;        // J/T
  double abundance_zn67 = 0.0;      // fraction
  double bohr_radius = 0.0;         // m
  double bloch_density_ratio = 0.0; // |u_Zn|^2
  double lattice_a = 0.0;           // m
  double lattice_c = 0.0;           // m
  double zn_site_density = 0.0;     // m^-3
  double donor_density = 0.0;       // m^-3

  bool operator==(const MaterialParams&) const = default;
};

// Wurtzite defaults; zn_site_density is derived from the cell (2 Zn per cell).
inline constexpr double kDefaultLatticeA = 3.25e-10;
inline constexpr double kDefaultLatticeC = 5.21e-10;
double wurtzite_zn_site_density(double a, double c);

// Cation (Zn) sites of the wurtzite lattice within `radius` of a cation at
// the origin, origin excluded. Hexagonal axes: a1 = (a, 0, 0),
// a2 = (a/2, sqrt(3) a/2, 0), c along z; second basis site at
// (a1 + a2)/3 + c/2.
std::vector<Eigen::Vector3d> wurtzite_cation_sites(double a, double c, double radius);

// Validates a material document. Every value is a string "<number> <unit>";
// dimensionless values may also be plain numbers. Lattice keys are optional.
// Throws ValidationError listing every problem.
MaterialParams load_material(const nlohmann::json& doc);

MaterialParams load_material_file(const std::filesystem::path& path);

// Resolves a bundled profile name (e.g. "zno-natural") or a path.
MaterialParams load_material_profile(const std::string& name_or_path);

std::filesystem::path materials_directory();

nlohmann::json material_to_json(const MaterialParams& m);

// Static field, magnitude in tesla, orientation in crystal coordinates
// (z along the c-axis).
class FieldConfig {
 public:
  FieldConfig(double magnitude, const Eigen::Vector3d& orientation);

  // Voigt geometry: B perpendicular to c.
  static FieldConfig voigt(double magnitude);

  double magnitude() const { return magnitude_; }
  const Eigen::Vector3d& orientation() const { return orientation_; }

 private:
  double magnitude_;
  Eigen::Vector3d orientation_;
};

}  // namespace donorspin
