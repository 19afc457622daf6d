#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "donorspin/errors.hpp"
#include "donorspin/trace_io.hpp"

using namespace donorspin;

namespace {

std::filesystem::path scratch_dir() {
  auto p = std::filesystem::temp_directory_path() / "donorspin_trace_io_test";
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("format_double parses back to the same bits") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(u(rng), static_cast<int>(u(rng)));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("column units come from suffixes") {
  CHECK(column_unit("tau_s") == "s");
  CHECK(column_unit("energy_J") == "J");
  CHECK(column_unit("field_T") == "T");
  CHECK(column_unit("rate_per_s") == "s^-1");
  CHECK(column_unit("p_up") == "1");
  try {
    column_unit("tau");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.issues().at(0).key == "tau");
  }
}

TEST_CASE("written traces round-trip bit-identically") {
  ExperimentTrace tr;
  tr.experiment = "ramsey";
  tr.abscissa_name = "tau_s";
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int i = 0; i < 50; ++i) {
    tr.abscissa.push_back(i * 1.1e-12 / 7.0);
    tr.p_up.push_back(u(rng));
    tr.p_down.push_back(u(rng));
    tr.p_up_stderr.push_back(u(rng) * 1e-3);
  }
  const auto path = scratch_dir() / "trace.csv";
  write_table(path, trace_to_table(tr));
  const ExperimentTrace back = ingest_trace(path);
  CHECK(back.experiment == "ramsey");
  CHECK(back.abscissa == tr.abscissa);
  CHECK(back.p_up == tr.p_up);
  CHECK(back.p_down == tr.p_down);
  CHECK(back.p_up_stderr == tr.p_up_stderr);
  const auto again = scratch_dir() / "trace2.csv";
  write_table(again, trace_to_table(back));
  CHECK(slurp(path) == slurp(again));
  CHECK_FALSE(std::filesystem::exists(path.string() + ".part"));
}

TEST_CASE("comments are skipped and tabs accepted") {
  const auto t = parse_table("# one\n# two\n# three\nwait_s\tp_up\n0\t0.1\n0.5\t0.3\n");
  CHECK(t.comments.size() == 3);
  CHECK(t.rows() == 2);
  CHECK(t.column("p_up").values[1] == 0.3);
}

TEST_CASE("malformed input is reported with line numbers") {
  try {
    parse_table("tau_s,p_up\n1,0.2\n2\n3,abc\n", "data.csv");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.issues().size() == 2);
    CHECK(e.issues()[0].key == "data.csv:3");
    CHECK(e.issues()[1].key == "data.csv:4");
  }
  CHECK_THROWS_AS(parse_table("tau,p_up\n1,0.2\n"), ValidationError);
  CHECK_THROWS_AS(parse_table("# only comments\n"), ValidationError);
  CHECK_THROWS_AS(read_table(scratch_dir() / "missing.csv"), IoError);
  CHECK_THROWS_AS(table_to_trace(parse_table("p_up,tau_s\n0.1,0\n")), ValidationError);
}
