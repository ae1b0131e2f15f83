#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subnoise/netlist.hpp"

namespace subnoise {

struct AcSolution {
  double frequency = 0.0;
  std::vector<Complex> node_voltage;  // indexed by NodeId; ground is 0
  std::vector<std::string> node_names;
  double relative_residual = 0.0;

  Complex at(std::string_view node) const;
  std::map<std::string, Complex> as_map() const;
};

struct SolveOptions {
  StampOptions stamp;
  double max_relative_residual = 1e-9;
};

// Solves the netlist as given: AC-flagged sources drive, others are zeroed.
// Throws SolverError naming the suspect unknowns if the system is singular.
AcSolution ac_solve(const Netlist& netlist, double frequency, const SolveOptions& options = {});

// Same, but reuses one expansion/factor pattern across many frequencies.
// Results are assembled in input order regardless of thread scheduling.
std::vector<AcSolution> ac_sweep(const Netlist& netlist, std::span<const double> frequencies,
                                 const SolveOptions& options = {});

struct TransferFunction {
  std::string source_node;
  std::string target_node;
  std::string reference_node;  // empty means ground
  std::string path_label;
  std::vector<double> frequency;
  std::vector<Complex> value;

  std::size_t size() const { return frequency.size(); }
  // Log-frequency interpolation of log|H| and unwrapped phase. Throws if
  // f lies outside the sampled range.
  Complex at(double f) const;
};

enum class Drive {
  // Unit voltage at the source node; H = (v_target - v_ref) / v_source.
  voltage,
  // Unit current injected into the source node; H is a transimpedance in ohms.
  current,
};

struct TransferOptions {
  Drive drive = Drive::voltage;
  std::string reference_node;
  std::string path_label;
  SolveOptions solve;
};

// Replaces the netlist's excitation with a unit drive at `source` and samples
// the response at `target`. An existing voltage source from `source` to
// ground becomes the drive; every other independent source is zeroed.
TransferFunction transfer(const Netlist& netlist, std::string_view source, std::string_view target,
                          std::span<const double> frequencies, const TransferOptions& options = {});

struct Probe {
  std::string target;
  std::string reference;  // empty means ground
  std::string label;
};

// Several transfers sharing one drive, solved with a single sweep.
std::vector<TransferFunction> transfers(const Netlist& netlist, std::string_view source,
                                        std::span<const Probe> probes, std::span<const double> frequencies,
                                        Drive drive = Drive::voltage, const SolveOptions& solve = {});

// DC resistance between two nodes over the resistor-only subnetwork.
double point_to_point_resistance(const Netlist& netlist, std::string_view a, std::string_view b);

// start * 10^(k / points_per_decade) up to stop; stop is appended if the
// grid does not land on it.
std::vector<double> log_sweep(double start, double stop, int points_per_decade = 20);

// Columns: frequency_hz,re,im,mag_db,phase_deg
std::string transfer_to_csv(const TransferFunction& tf);

} // namespace subnoise
