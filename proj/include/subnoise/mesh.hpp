#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "subnoise/netlist.hpp"

namespace subnoise {

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Rect& r, double tol = 0.0) const;
  double overlap_area(const Rect& r) const;
};

struct EpiLayer {
  double resistivity = 0.0;  // ohm * m
  double thickness = 0.0;    // m
};

// Epi layers are listed top-down and sit above the bulk.
struct SubstrateStack {
  double resistivity = 0.2;
  double thickness = 300e-6;
  std::vector<EpiLayer> epi;
  bool backside_contact = false;
};

enum class FeatureKind { contact, well, injection_port };
enum class Face { top, xmin, xmax, ymin, ymax };

struct SurfaceFeature {
  std::string name;
  FeatureKind kind = FeatureKind::contact;
  Rect rect;               // footprint on the top surface; ignored on side faces
  Face face = Face::top;   // side faces are covered completely
  std::string node;        // terminal the feature connects to
  double cap_density = 0;  // F/m^2, wells only
  std::string path_label;  // label for the well junction capacitor
};

struct MeshSpec {
  int nx = 20, ny = 20, nz = 8;
  // Per-feature lateral refinement: cells inside the feature's extent are
  // `factor` times finer than the base pitch.
  std::map<std::string, double> refinement;
  // Height of the deepest cell over the topmost one inside each layer; cell
  // heights grow geometrically with depth.
  double z_grading = 1.0;
  // Lateral cells touching a top-feature edge are this many times finer than
  // the local pitch and grow by kEdgeGrowth away from the edge.
  double edge_refinement = 1.0;
  // Calibration multiplier applied to every mesh conductance.
  double conductance_scale = 1.0;
};

// Plate node a well's footprint collapses onto.
std::string well_plate_node(const SurfaceFeature& well);

// Nodes that must survive port reduction: every feature terminal plus the
// well plates.
std::vector<std::string> feature_ports(std::span<const SurfaceFeature> features);

// Finite-volume mesh: one node per cell centre, neighbour conductance
// A / (rho * d). Contacts and injection ports tie to the covered cells
// through the half-cell conductance of the boundary face; wells do the same
// onto a plate node, which couples to the well terminal through
// cap_density * area. Sides and bottom are insulating unless the stack has
// a backside contact, which ties the bottom face to ground.
Netlist build_mesh(const SubstrateStack& stack, std::span<const SurfaceFeature> features, const Rect& die,
                   const MeshSpec& spec, std::string_view ground = "0");

// Schur-complement reduction of the resistive part of `mesh` onto `ports`
// (plus ground when the mesh touches it). Non-resistive elements are kept;
// any node carrying one is retained as an extra port.
Netlist reduce_to_ports(const Netlist& mesh, std::span<const std::string> ports);

inline constexpr double kEdgeGrowth = 1.5;

// Axis grid used by build_mesh: cell boundaries from `lo` to `hi`.
// Breakpoints become grid lines; cells next to them are graded when
// edge_refinement > 1.
std::vector<double> axis_grid(double lo, double hi, int cells,
                              std::span<const std::pair<double, double>> refined_spans,
                              std::span<const double> factors,
                              std::span<const double> breakpoints,
                              double edge_refinement = 1.0);

} // namespace subnoise
