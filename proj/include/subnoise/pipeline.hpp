#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subnoise/impact.hpp"
#include "subnoise/layout.hpp"
#include "subnoise/oracle.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

// Project file; relative paths resolve against the file's directory.
//
//   {
//     "layout": "vco_layout.json",
//     "technology": "technology.json",
//     "vco": "vco.json",
//     "sweep": {"start": "100k", "stop": "15meg", "points_per_decade": 10},
//     "noise_dbm": -5,
//     "source_impedance": 50,
//     "injection_node": "SUB",
//     "vtune": [0, 0.9],
//     "resize_all_ground": false,
//     "calibration": {"source": "SUB", "target": "bg", "reference": "vco_gnd",
//                     "divider": 0.00153374, "frequency": "1meg"},
//     "oracle_tolerance_pct": 1,
//     "output_dir": "out"
//   }
//
// "sweep" may instead carry an explicit "frequencies" list.
struct ProjectConfig {
  std::filesystem::path layout;
  std::filesystem::path technology;
  std::filesystem::path vco;
  double f_start = 100e3;
  double f_stop = 15e6;
  int points_per_decade = 20;
  std::vector<double> frequencies;  // overrides the decade range when set
  double noise_dbm = -5.0;
  double source_impedance = 50.0;
  std::string injection_node = "SUB";
  std::vector<double> vtune;        // empty: the VCO file's value
  bool resize_all_ground = false;
  std::optional<Calibration> calibration;
  double oracle_tolerance_pct = 1.0;
  std::filesystem::path output_dir = "out";

  std::vector<double> sweep() const;
  double noise_amplitude() const { return dbm_to_amplitude(noise_dbm, source_impedance); }
  void validate() const;
};

ProjectConfig read_config(const std::filesystem::path& path);

struct Project {
  ProjectConfig config;
  Technology tech;
  Layout layout;
  VcoModel vco;
};

Project load_project(const ProjectConfig& config);

// Transfer from the injection node to every VCO entry's observation node.
std::vector<TransferFunction> entry_transfers(const Netlist& system, const VcoModel& vco,
                                              std::string_view injection_node, std::span<const double> frequencies);

struct ImpactRun {
  double vtune = 0.0;
  std::vector<TransferFunction> transfers;
  std::vector<SpurReport> sweep;
};

ImpactRun run_impact(const Project& project, const Layout& layout, double vtune);
ImpactRun run_impact(const Project& project, double vtune);

struct WhatIf {
  ImpactRun before;
  ImpactRun after;
  std::vector<double> delta_db;  // combined sideband power, after - before
};

WhatIf whatif(const Project& project, double factor, double vtune);

enum class Format { csv, json };

struct OracleRow {
  std::string name;
  double beta = 0.0;
  double narrowband = 0.0;  // V
  double oracle = 0.0;      // V
  double error_pct = 0.0;
  double tolerance_pct = 0.0;
  bool informational = false;
  bool pass = true;
};

// Narrowband spur versus synthesized waveform + coherent DFT. `selection`
// filters by case name when given.
std::vector<OracleRow> oracle_suite(const std::optional<std::vector<std::string>>& selection = std::nullopt,
                                    double tolerance_pct = 1.0);

// Every command writes its artifacts atomically under config.output_dir and
// returns the text printed on stdout.
struct CommandOutput {
  std::string text;
  int exit_code = 0;
};

CommandOutput cmd_extract(const ProjectConfig& config);
CommandOutput cmd_transfer(const ProjectConfig& config, Format format);
CommandOutput cmd_impact(const ProjectConfig& config, Format format);
CommandOutput cmd_contrib(const ProjectConfig& config, Format format);
CommandOutput cmd_whatif(const ProjectConfig& config, double factor, Format format);
CommandOutput cmd_oracle_check(const ProjectConfig& config, Format format,
                               const std::optional<std::vector<std::string>>& selection);
CommandOutput cmd_calibrate(const ProjectConfig& config);

} // namespace subnoise
