#include "donorspin/materials.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include "donorspin/errors.hpp"
#include "donorspin/units.hpp"

namespace donorspin {

double wurtzite_zn_site_density(double a, double c) {
  const double cell_volume = std::sqrt(3.0) / 2.0 * a * a * c;
  return 2.0 / cell_volume;
}

std::vector<Eigen::Vector3d> wurtzite_cation_sites(double a, double c, double radius) {
  if (!(a > 0.0 && c > 0.0 && radius >= 0.0)) {
    throw ValidationError("lattice", "lattice constants must be > 0 and radius >= 0");
  }
  const Eigen::Vector3d a1(a, 0.0, 0.0);
  const Eigen::Vector3d a2(0.5 * a, 0.5 * std::sqrt(3.0) * a, 0.0);
  const Eigen::Vector3d a3(0.0, 0.0, c);
  const std::array<Eigen::Vector3d, 2> basis{Eigen::Vector3d::Zero(),
                                             (a1 + a2) / 3.0 + 0.5 * a3};
  // In-plane cell indices must reach radius / (a sqrt(3)/2) to cover the disk.
  const int nab = static_cast<int>(std::ceil(radius / (0.5 * std::sqrt(3.0) * a))) + 1;
  const int nc = static_cast<int>(std::ceil(radius / c)) + 1;
  const double r2 = radius * radius;
  std::vector<Eigen::Vector3d> sites;
  for (int i = -nab; i <= nab; ++i) {
    for (int j = -nab; j <= nab; ++j) {
      for (int k = -nc; k <= nc; ++k) {
        const Eigen::Vector3d cell = i * a1 + j * a2 + k * a3;
        for (const auto& b : basis) {
          const Eigen::Vector3d r = cell + b;
          const double d2 = r.squaredNorm();
          if (d2 > 0.0 && d2 <= r2) sites.push_back(r);
        }
      }
    }
  }
  return sites;
}

namespace {

std::optional<double> read_quantity(const nlohmann::json& doc, const char* key, Dimension dim,
                                    IssueCollector& issues, bool required) {
  if (!doc.is_object() || !doc.contains(key)) {
    if (required) issues.add(key, "missing required key");
    return std::nullopt;
  }
  const auto& v = doc.at(key);
  try {
    if (v.is_number()) {
      if (dim != Dimension::dimensionless) {
        issues.add(key, "value needs an explicit unit string");
        return std::nullopt;
      }
      return v.get<double>();
    }
    if (v.is_string()) return parse_quantity(v.get<std::string>(), dim, key);
    issues.add(key, "expected a string '<number> <unit>'");
  } catch (const ValidationError& e) {
    for (const auto& i : e.issues()) issues.add(i.key, i.message);
  }
  return std::nullopt;
}

}  // namespace

MaterialParams load_material(const nlohmann::json& doc) {
  IssueCollector issues;
  if (!doc.is_object()) {
    issues.add("<document>", "material document must be an object");
  }
  auto req = [&](const char* key, Dimension dim) {
    return read_quantity(doc, key, dim, issues, true);
  };
  MaterialParams m;
  if (doc.is_object() && doc.contains("name") && doc["name"].is_string()) {
    m.name = doc["name"].get<std::string>();
  }
  const auto g_e = req("g_electron", Dimension::dimensionless);
  const auto g_h = req("g_hole", Dimension::dimensionless);
  const auto i_zn = req("nuclear_spin_zn", Dimension::dimensionless);
  const auto i_d = req("nuclear_spin_donor", Dimension::dimensionless);
  const auto mu_zn = req("moment_zn", Dimension::nuclear_moment);
  const auto mu_d = req("moment_donor", Dimension::nuclear_moment);
  const auto f = req("abundance_zn67", Dimension::dimensionless);
  const auto a_b = req("bohr_radius", Dimension::length);
  const auto u2 = req("bloch_density_ratio", Dimension::dimensionless);
  const auto n_d = req("donor_density", Dimension::number_density);
  const auto lat_a = read_quantity(doc, "lattice_a", Dimension::length, issues, false);
  const auto lat_c = read_quantity(doc, "lattice_c", Dimension::length, issues, false);
  const auto n_zn = read_quantity(doc, "zn_site_density", Dimension::number_density, issues, false);

  if (f && (*f < 0.0 || *f > 1.0)) issues.add("abundance_zn67", "must lie in [0, 1]");
  if (a_b && !(*a_b > 0.0)) issues.add("bohr_radius", "must be > 0");
  if (n_d && *n_d < 0.0) issues.add("donor_density", "must be >= 0");
  if (n_zn && *n_zn < 0.0) issues.add("zn_site_density", "must be >= 0");
  if (i_zn && !(*i_zn > 0.0)) issues.add("nuclear_spin_zn", "must be > 0");
  if (i_d && !(*i_d > 0.0)) issues.add("nuclear_spin_donor", "must be > 0");
  if (lat_a && !(*lat_a > 0.0)) issues.add("lattice_a", "must be > 0");
  if (lat_c && !(*lat_c > 0.0)) issues.add("lattice_c", "must be > 0");
  issues.throw_if_any();

  m.g_electron = *g_e;
  m.g_hole = *g_h;
  m.nuclear_spin_zn = *i_zn;
  m.nuclear_spin_donor = *i_d;
  m.moment_zn = *mu_zn;
  m.moment_donor = *mu_d;
  m.abundance_zn67 = *f;
  m.bohr_radius = *a_b;
  m.bloch_density_ratio = *u2;
  m.donor_density = *n_d;
  m.lattice_a = lat_a.value_or(kDefaultLatticeA);
  m.lattice_c = lat_c.value_or(kDefaultLatticeC);
  m.zn_site_density = n_zn.value_or(wurtzite_zn_site_density(m.lattice_a, m.lattice_c));
  return m;
}

MaterialParams load_material_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open material profile " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string(), std::string("malformed document: ") + e.what());
  }
  return load_material(doc);
}

std::filesystem::path materials_directory() {
  if (const char* env = std::getenv("DONORSPIN_MATERIALS_DIR")) return env;
  return DONORSPIN_MATERIALS_DIR;
}

MaterialParams load_material_profile(const std::string& name_or_path) {
  const std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p) && std::filesystem::is_regular_file(p)) {
    return load_material_file(p);
  }
  const auto bundled = materials_directory() / (name_or_path + ".json");
  if (!std::filesystem::exists(bundled)) {
    throw ValidationError("material", "no material profile named '" + name_or_path + "'");
  }
  return load_material_file(bundled);
}

namespace {

std::string with_unit(double v, const char* unit) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr) + " " + unit;
}

}  // namespace

// Same layout as the input documents, in SI units, so that load_material()
// reads it back unchanged.
nlohmann::json material_to_json(const MaterialParams& m) {
  return {
      {"name", m.name},
      {"g_electron", m.g_electron},
      {"g_hole", m.g_hole},
      {"nuclear_spin_zn", m.nuclear_spin_zn},
      {"nuclear_spin_donor", m.nuclear_spin_donor},
      {"moment_zn", with_unit(m.moment_zn, "J/T")},
      {"moment_donor", with_unit(m.moment_donor, "J/T")},
      {"abundance_zn67", m.abundance_zn67},
      {"bohr_radius", with_unit(m.bohr_radius, "m")},
      {"bloch_density_ratio", m.bloch_density_ratio},
      {"lattice_a", with_unit(m.lattice_a, "m")},
      {"lattice_c", with_unit(m.lattice_c, "m")},
      {"donor_density", with_unit(m.donor_density, "m^-3")},
  };
}

FieldConfig::FieldConfig(double magnitude, const Eigen::Vector3d& orientation)
    : magnitude_(magnitude) {
  IssueCollector issues;
  if (!(magnitude >= 0.0)) issues.add("field.magnitude", "must be >= 0 T");
  const double n = orientation.norm();
  if (!(n > 0.0) || !std::isfinite(n)) issues.add("field.orientation", "must be a nonzero vector");
  issues.throw_if_any();
  orientation_ = orientation / n;
}

FieldConfig FieldConfig::voigt(double magnitude) {
  return FieldConfig(magnitude, Eigen::Vector3d::UnitX());
}

}  // namespace donorspin
