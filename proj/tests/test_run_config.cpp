#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "donorspin/errors.hpp"
#include "donorspin/run_config.hpp"
#include "donorspin/units.hpp"

using namespace donorspin;
using nlohmann::json;

namespace {

std::vector<Issue> issues_of(const json& doc, bool require_experiment = true) {
  try {
    parse_run_config(doc, require_experiment);
  } catch (const ValidationError& e) {
    return e.issues();
  }
  return {};
}

bool has_key(const std::vector<Issue>& issues, std::string_view key) {
  for (const auto& i : issues) {
    if (i.key == key) return true;
  }
  return false;
}

json ramsey_doc() { return json::parse(R"({"experiment": {"ramsey": {}}})"); }

}  // namespace

TEST_CASE("defaults resolve to the 5 T ZnO setup") {
  const RunConfig c = parse_run_config(ramsey_doc());
  REQUIRE(c.experiment == ExperimentKind::ramsey);
  CHECK(c.setup.field == doctest::Approx(5.0));
  CHECK(c.setup.omega_e() / kTwoPi == doctest::Approx(137.9e9).epsilon(2e-3));
  CHECK(c.setup.pulse_duration == doctest::Approx(1.9e-12));
  CHECK(c.setup.detuning == doctest::Approx(kTwoPi * 3.57e12));
  // default step is an eighth of the Larmor period
  CHECK(c.scan.step == doctest::Approx(kTwoPi / c.setup.omega_e() / 8.0));
  CHECK(c.scan.centers == std::vector<double>{30e-12});
  CHECK(c.scan.pulse_energy > 0.0);
  CHECK(c.seed == 1);
  CHECK_FALSE(c.bath_model().has_value());
  // the resolved document carries every default
  CHECK(c.resolved.at("pulse").at("duration") == "1.9 ps");
  CHECK(c.resolved.at("experiment").at("ramsey").at("points") == 16);
}

TEST_CASE("t1 follows the power law unless a rate is given") {
  json doc = json::parse(R"({"field": {"magnitude": "2.25 T"}, "experiment": {"t1": {}}})");
  const RunConfig a = parse_run_config(doc);
  CHECK(1.0 / a.setup.dissipators.t1_rate == doctest::Approx(0.1).epsilon(1e-9));
  doc["field"]["magnitude"] = "4.5 T";
  const RunConfig b = parse_run_config(doc);
  CHECK(a.setup.dissipators.t1_rate / b.setup.dissipators.t1_rate == doctest::Approx(std::pow(0.5, 3.5)));
  doc["dissipators"]["t1"]["rate"] = "20 s^-1";
  CHECK(parse_run_config(doc).setup.dissipators.t1_rate == doctest::Approx(20.0));
  CHECK(a.t1_waits.size() == 24);
}

TEST_CASE("unknown keys are rejected with their full path") {
  json doc = ramsey_doc();
  doc["pulse"]["durration"] = "2 ps";
  doc["bogus"] = 1;
  const auto issues = issues_of(doc);
  CHECK(has_key(issues, "pulse.durration"));
  CHECK(has_key(issues, "bogus"));
}

TEST_CASE("every problem is reported at once") {
  json doc = ramsey_doc();
  doc["field"]["magnitude"] = 5;        // no unit
  doc["pulse"]["duration"] = "2 parsecs";
  doc["seed"] = "seven";
  doc["bath"]["samples"] = 0;
  const auto issues = issues_of(doc);
  CHECK(issues.size() >= 4);
  CHECK(has_key(issues, "field.magnitude"));
  CHECK(has_key(issues, "pulse.duration"));
  CHECK(has_key(issues, "seed"));
  CHECK(has_key(issues, "bath.samples"));
}

TEST_CASE("a bare number for a dimensional quantity names the expected unit") {
  json doc = ramsey_doc();
  doc["pulse"]["duration"] = 1.9e-12;
  const auto issues = issues_of(doc);
  REQUIRE(has_key(issues, "pulse.duration"));
  for (const auto& i : issues) {
    if (i.key == "pulse.duration") CHECK(i.message.find("needs a unit") != std::string::npos);
  }
}

TEST_CASE("exactly one experiment section") {
  CHECK(has_key(issues_of(json::object()), "experiment"));
  CHECK(issues_of(json::object(), false).empty());
  const json two = json::parse(R"({"experiment": {"rabi": {}, "t1": {}}})");
  CHECK(has_key(issues_of(two), "experiment"));
  CHECK(has_key(issues_of(two, false), "experiment"));
  const json bad = json::parse(R"({"experiment": {"hahn": {}}})");
  const auto issues = issues_of(bad);
  REQUIRE_FALSE(issues.empty());
  bool lists_valid = false;
  for (const auto& i : issues) lists_valid = lists_valid || i.message.find("rabi, ramsey, echo, t1, pump") != std::string::npos;
  CHECK(lists_valid);
}

TEST_CASE("coarse fringe sampling is rejected") {
  json doc = ramsey_doc();
  doc["experiment"]["ramsey"]["step"] = "2 ps";
  const auto issues = issues_of(doc);
  REQUIRE_FALSE(issues.empty());
  bool mentions = false;
  for (const auto& i : issues) mentions = mentions || i.message.find("use a step <=") != std::string::npos;
  CHECK(mentions);
}

TEST_CASE("overrides parse JSON and fall back to strings") {
  json doc = ramsey_doc();
  apply_override(doc, "field.magnitude=3 T");
  apply_override(doc, "bath.samples=250");
  apply_override(doc, "bath.enabled=true");
  apply_override(doc, "experiment.ramsey.centers=[\"10 ps\", \"20 ps\"]");
  CHECK(doc["field"]["magnitude"] == "3 T");
  CHECK(doc["bath"]["samples"] == 250);
  const RunConfig c = parse_run_config(doc);
  CHECK(c.setup.field == doctest::Approx(3.0));
  CHECK(c.bath.ensemble.samples == 250);
  CHECK(c.bath_model().has_value());
  CHECK(c.scan.centers.size() == 2);
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ValidationError);
  CHECK_THROWS_AS(apply_override(doc, "a..b=1"), ValidationError);
  CHECK(find_key(doc, "field.magnitude") != nullptr);
  CHECK(find_key(doc, "field.nothing") == nullptr);
}

TEST_CASE("config hash is stable and tracks content") {
  const RunConfig a = parse_run_config(ramsey_doc());
  const RunConfig b = parse_run_config(ramsey_doc());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  json doc = ramsey_doc();
  doc["seed"] = 2;
  CHECK(parse_run_config(doc).hash() != a.hash());
  // explicit defaults hash like omitted ones
  json explicit_doc = ramsey_doc();
  explicit_doc["field"]["magnitude"] = "5 T";
  CHECK(parse_run_config(explicit_doc).hash() == a.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("config files: missing is an IoError, malformed a ValidationError") {
  const auto dir = std::filesystem::temp_directory_path() / "donorspin_run_config_test";
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS(load_config_document(dir / "absent.json"), IoError);
  {
    std::ofstream(dir / "broken.json") << "{\"field\": ";
  }
  CHECK_THROWS_AS(load_config_document(dir / "broken.json"), ValidationError);
  {
    std::ofstream(dir / "ok.json") << R"({"experiment": {"pump": {}}})";
  }
  CHECK(parse_run_config(load_config_document(dir / "ok.json")).experiment == ExperimentKind::pump);
}

TEST_CASE("estimate options") {
  json doc = json::parse(R"({"estimate": {"theta2": ["0.25 pi", "90 deg"], "variant": "as_printed"}})");
  const RunConfig c = parse_run_config(doc, false);
  REQUIRE(c.estimate.theta2.size() == 2);
  CHECK(c.estimate.theta2[1] == doctest::Approx(kTwoPi / 4));
  CHECK(c.estimate.variant == IdVariant::as_printed);
  doc["estimate"]["theta2"] = {"2 pi"};
  CHECK(has_key(issues_of(doc, false), "estimate.theta2"));
}
