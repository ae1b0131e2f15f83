#pragma once

#include <string>
#include <vector>

#include "subnoise/netlist.hpp"

namespace subnoise {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct WireSegment {
  std::string name;
  std::string layer;
  std::vector<Point> path;        // centreline, metres
  double width = 0.0;             // m
  double sheet_resistance = 0.0;  // ohm/sq
  double cap_density = 0.0;       // F/m^2 to `substrate_node`
  double via_start = 2.0;         // ohm; 0 ties the run directly to the endpoint
  double via_end = 2.0;
  std::string from;               // endpoint nodes
  std::string to;
  std::string substrate_node;     // where the run capacitance lands; empty drops it
  std::string path_label = "ground-interconnect";
  bool resizable = true;

  void validate() const;
};

struct ExtractOptions {
  // Effective squares of a 90-degree corner square.
  double corner_weight = 0.56;
};

struct WireStats {
  double run_resistance = 0.0;  // sum over runs, corner-corrected
  double via_resistance = 0.0;
  double capacitance = 0.0;
  int skipped_runs = 0;         // zero-length runs

  double total_resistance() const { return run_resistance + via_resistance; }
};

// Emits one series resistor per straight run and a pi-model capacitance
// (half of density * length * width to each run end). Each corner of the
// centreline counts as `corner_weight` squares instead of the one square the
// two half-widths contribute; the correction is shared by the adjacent runs.
// Internal nodes are named "<segment>.n<k>".
WireStats extract_wire(NetlistBuilder& b, const WireSegment& seg, const ExtractOptions& options = {});

// Standalone fragment with its own ground "0".
Netlist extract_wire(const WireSegment& seg, const ExtractOptions& options = {});

// Widens every resizable ground-interconnect segment by `factor`. Via
// resistance shrinks by the same factor: a wider line carries
// proportionally more vias.
std::vector<WireSegment> scale_ground_width(std::vector<WireSegment> segments, double factor);

} // namespace subnoise
