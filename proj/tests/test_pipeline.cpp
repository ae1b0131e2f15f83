#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "subnoise/error.hpp"
#include "subnoise/netlist_io.hpp"
#include "subnoise/pipeline.hpp"

using namespace subnoise;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SUBNOISE_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("subnoise_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ProjectConfig config(const std::string& file, const fs::path& out) {
  ProjectConfig c = read_config(kFixtures / file);
  c.output_dir = out;
  return c;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("extract lists every coupling path") {
  const fs::path out = scratch("extract");
  const CommandOutput r = cmd_extract(config("vco_project.json", out));
  CHECK(r.exit_code == 0);
  CHECK(r.text.find("{ground-interconnect, inductor, nmos-backgate, nwell-pmos, supply, varactor-nwell}") !=
        std::string::npos);
  for (const char* f : {"mesh.json", "substrate.json", "interconnect.json", "system.json", "extract_summary.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  const auto summary = read_json_file(out / "extract_summary.json");
  CHECK(summary.at("path_labels").size() == 6);
  CHECK(summary.at("ground_path_resistance_ohm").get<double>() > 0.0);
}

TEST_CASE("empty feature list gives a mesh-only extraction") {
  const Technology tech = read_technology(kFixtures / "technology.json");
  const auto j = nlohmann::json::parse(R"({
    "ground": "0", "die": ["0", "0", "100u", "100u"],
    "stack": {"resistivity": 0.2, "thickness": "100u"},
    "mesh": {"nx": 4, "ny": 4, "nz": 3},
    "features": []})");
  const Layout l = layout_from_json(j, tech);
  const Extraction x = extract(l, tech);
  CHECK(x.interconnect.elements().empty());
  CHECK(x.interconnect.devices().empty());
  CHECK(x.mesh.node_count() == 4 * 4 * 3 + 1);
  CHECK(x.substrate.elements().size() == x.mesh.elements().size());
}

TEST_CASE("malformed json writes nothing") {
  const fs::path dir = scratch("malformed");
  for (const char* f : {"technology.json", "vco.json"}) fs::copy_file(kFixtures / f, dir / f);
  std::ofstream(dir / "broken_layout.json") << "{\"ground\": \"0\", \"die\": [0, 0,\n";
  std::ofstream(dir / "project.json")
      << R"({"layout": "broken_layout.json", "technology": "technology.json", "vco": "vco.json", "output_dir": "out"})";
  const ProjectConfig c = read_config(dir / "project.json");
  try {
    cmd_extract(c);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("broken_layout.json") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("missing files are validation errors") {
  ProjectConfig c;
  c.layout = "/nonexistent/layout.json";
  c.technology = kFixtures / "technology.json";
  c.vco = kFixtures / "vco.json";
  CHECK_THROWS_AS(load_project(c), ValidationError);
  CHECK_THROWS_AS(read_config("/nonexistent/project.json"), ValidationError);
}

TEST_CASE("single-point sweep") {
  const fs::path out = scratch("single");
  ProjectConfig c = config("vco_ground_project.json", out);
  c.frequencies = {1e6};
  const CommandOutput r = cmd_impact(c, Format::csv);
  CHECK(r.exit_code == 0);
  CHECK(r.text.find("insufficient span") != std::string::npos);
  CHECK(lines(slurp(out / "impact.csv")) == 2);
}

TEST_CASE("one report per tuning voltage") {
  const fs::path out = scratch("vtune");
  ProjectConfig c = config("vco_project.json", out);
  c.vtune = {0.0, 0.9};
  c.points_per_decade = 5;
  const CommandOutput r = cmd_impact(c, Format::csv);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "impact_vtune_0.000.csv"));
  CHECK(fs::exists(out / "impact_vtune_0.900.csv"));
  CHECK(slurp(out / "impact_vtune_0.000.csv") != slurp(out / "impact_vtune_0.900.csv"));
  CHECK(r.text.find("V_tune = 0.900 V") != std::string::npos);
}

TEST_CASE("whatif with factor one is exactly zero") {
  const Project p = load_project(config("vco_project.json", scratch("whatif")));
  const WhatIf w = whatif(p, 1.0, 0.0);
  for (double d : w.delta_db) CHECK(d == 0.0);
}

TEST_CASE("fixture calibration holds") {
  for (const char* file : {"vco_project.json", "nmos.json"}) {
    const ProjectConfig c = config(file, scratch("cal"));
    REQUIRE(c.calibration);
    const Project p = load_project(c);
    const double d = divider_ratio(extract(p.layout, p.tech).system, *c.calibration);
    CHECK_MESSAGE(d == doctest::Approx(1.0 / 652.0).epsilon(1e-3), file);
  }
}

TEST_CASE("NMOS chain across the bias table") {
  const Project p = load_project(config("nmos.json", scratch("nmos")));
  for (double bias : {0.5, 1.6}) {
    Layout l = p.layout;
    l.circuit[0]["bias"] = bias;
    const auto tf = transfer(extract(l, p.tech).system, "SUB", "nd", std::vector<double>{1e6});
    const MosParams m = mos_params(p.tech.bias, bias);
    const double db = 20.0 * std::log10(std::abs(tf.value[0]));
    CHECK(db == doctest::Approx(20.0 * std::log10(m.gmb / (652.0 * m.gds))).epsilon(0.002));
  }
}

TEST_CASE("transfer and contrib artifacts") {
  const fs::path out = scratch("artifacts");
  ProjectConfig c = config("vco_project.json", out);
  c.points_per_decade = 5;
  CHECK(cmd_transfer(c, Format::csv).exit_code == 0);
  CHECK(fs::exists(out / "transfer_ground-interconnect.csv"));
  CHECK(cmd_transfer(c, Format::json).exit_code == 0);
  CHECK(read_json_file(out / "transfers.json").size() == 6);
  const CommandOutput r = cmd_contrib(c, Format::csv);
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(out / "contrib.csv");
  CHECK(csv.rfind("f_noise_hz,rank,path_label,power_dbm,share,destructive\n", 0) == 0);
  CHECK(csv.find(",1,ground-interconnect,") != std::string::npos);
}

TEST_CASE("oracle suite") {
  const auto rows = oracle_suite();
  REQUIRE(rows.size() == 5);
  for (const OracleRow& r : rows) {
    if (r.informational) CHECK(r.error_pct > 1.0);
    else CHECK(r.pass);
  }
  CHECK(oracle_suite(std::vector<std::string>{}).empty());
  CHECK(oracle_suite(std::vector<std::string>{"fm-beta-0.1"}).size() == 1);
  CHECK_THROWS_AS(oracle_suite(std::vector<std::string>{"no-such-case"}), ValidationError);
  const auto strict = oracle_suite(std::vector<std::string>{"fm-beta-0.1"}, 1e-6);
  CHECK_FALSE(strict.front().pass);
}

}
