#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subnoise/devices.hpp"
#include "subnoise/interconnect.hpp"
#include "subnoise/mesh.hpp"
#include "subnoise/netlist.hpp"

namespace subnoise {

struct LayerTech {
  double sheet_resistance = 0.0;  // ohm/sq
  double cap_density = 0.0;       // F/m^2
};

// Technology file:
//
//   {
//     "layers": {"metal1": {"sheet_resistance": 0.08, "cap_density": "30u"}},
//     "via_resistance": 2,
//     "corner_weight": 0.56,
//     "bias_table": [[0.5, "10m", "2.8m"], [1.6, "38m", "22m"]],
//     "package_pin": {"resistance": 1, "inductance": "2n"}
//   }
struct Technology {
  std::map<std::string, LayerTech> layers;
  double via_resistance = 2.0;
  double corner_weight = 0.56;
  BiasTable bias = BiasTable::standard();
  double pin_resistance = 1.0;
  double pin_inductance = 2e-9;
};

// Layout file:
//
//   {
//     "ground": "board",
//     "die": [x0, y0, x1, y1],
//     "stack": {"resistivity": 0.2, "thickness": "300u", "epi": [], "backside_contact": false},
//     "mesh": {"nx": 24, "ny": 24, "nz": 6, "z_grading": 20, "edge_refinement": 1, "refinement": {"sub": 2},
//              "conductance_scale": 1},
//     "features": [
//       {"name": "sub", "kind": "injection-port", "rect": [...], "node": "SUB"},
//       {"name": "ring", "kind": "contact", "rect": [...], "node": "vco_gnd"},
//       {"name": "nw", "kind": "well", "rect": [...], "node": "nwell_p",
//        "cap_density": "1e-4", "path_label": "nwell-pmos"},
//       {"name": "end", "kind": "contact", "face": "xmin", "node": "a"}
//     ],
//     "wires": [
//       {"name": "gnd", "layer": "metal1", "path": [[x, y], ...], "width": "5u",
//        "from": "vco_gnd", "to": "0", "substrate_node": "gw_sub",
//        "vias": [2, 2], "resizable": true, "path_label": "ground-interconnect"}
//     ],
//     "pins": [{"name": "pin_gnd", "a": "0", "b": "board"}],
//     "stubs": [{"name": "cind", "kind": "inductor-substrate-cap", "a": "ind_sub", "b": "tank",
//                "value": "120f", "path_label": "inductor"}],
//     "circuit": [ netlist elements; a mos may give "bias" instead of gmb/gds ]
//   }
struct Layout {
  std::string ground = "0";
  Rect die;
  SubstrateStack stack;
  MeshSpec mesh;
  std::vector<SurfaceFeature> features;
  std::vector<WireSegment> wires;
  std::vector<CouplingStub> stubs;
  nlohmann::json circuit = nlohmann::json::array();
};

Technology technology_from_json(const nlohmann::json& j);
Layout layout_from_json(const nlohmann::json& j, const Technology& tech);

Technology read_technology(const std::filesystem::path& path);
Layout read_layout(const std::filesystem::path& path, const Technology& tech);

// Layout with every resizable ground-interconnect wire widened by `factor`.
// `all` ignores the per-wire resizable flags.
Layout scale_ground_width(Layout layout, double factor, bool all = false);

struct Extraction {
  Netlist mesh;          // full finite-volume mesh
  Netlist substrate;     // port macro-model (the mesh itself when there are < 2 ports)
  Netlist interconnect;  // wires, pins, stubs
  Netlist circuit;
  Netlist system;        // everything merged
  double ground_path_resistance = 0.0;  // summed ground-interconnect wire resistance
  int skipped_runs = 0;
  std::set<std::string> path_labels;
};

Extraction extract(const Layout& layout, const Technology& tech);

// Multiplies every resistor conductance in `netlist` by `factor`.
Netlist scale_conductance(const Netlist& netlist, double factor);

struct Calibration {
  std::string source = "SUB";
  std::string target = "bg";
  std::string reference;  // empty means ground
  double divider = 1.0 / 652.0;
  double frequency = 1e6;
};

// Mesh conductance scale at which |v(target) - v(reference)| / |v(source)|
// equals the requested divider, found by bisection in log scale.
double calibrate_conductance_scale(const Layout& layout, const Technology& tech, const Calibration& cal);

// |v(target) - v(reference)| / |v(source)| for the layout as given.
double divider_ratio(const Netlist& system, const Calibration& cal);

} // namespace subnoise
