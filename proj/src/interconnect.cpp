#include "subnoise/interconnect.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>

#include "subnoise/error.hpp"

namespace subnoise {

void WireSegment::validate() const {
  if (path.size() < 2) throw ValidationError(fmt::format("wire '{}': path needs at least two points", name));
  if (!(width > 0.0)) throw ValidationError(fmt::format("wire '{}': width must be > 0", name));
  if (!(sheet_resistance >= 0.0))
    throw ValidationError(fmt::format("wire '{}': sheet_resistance must be >= 0", name));
  if (!(cap_density >= 0.0)) throw ValidationError(fmt::format("wire '{}': cap_density must be >= 0", name));
  if (!(via_start >= 0.0) || !(via_end >= 0.0))
    throw ValidationError(fmt::format("wire '{}': via resistance must be >= 0", name));
  if (from.empty() || to.empty()) throw ValidationError(fmt::format("wire '{}': missing endpoint node", name));
}

WireStats extract_wire(NetlistBuilder& b, const WireSegment& seg, const ExtractOptions& options) {
  seg.validate();
  if (!(options.corner_weight > 0.0)) throw ValidationError("corner_weight must be > 0");
  WireStats stats;

  // Collapse zero-length runs.
  std::vector<Point> pts{seg.path.front()};
  for (std::size_t i = 1; i < seg.path.size(); ++i) {
    const double len = std::hypot(seg.path[i].x - pts.back().x, seg.path[i].y - pts.back().y);
    if (len == 0.0) {
      ++stats.skipped_runs;
      continue;
    }
    pts.push_back(seg.path[i]);
  }
  const std::size_t runs = pts.size() - 1;
  if (runs == 0) throw ValidationError(fmt::format("wire '{}': path has zero length", seg.name));

  std::vector<double> length(runs), squares(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    length[r] = std::hypot(pts[r + 1].x - pts[r].x, pts[r + 1].y - pts[r].y);
    squares[r] = length[r] / seg.width;
  }
  const double correction = 1.0 - options.corner_weight;
  for (std::size_t c = 1; c < runs; ++c) {
    const double ux = pts[c].x - pts[c - 1].x, uy = pts[c].y - pts[c - 1].y;
    const double vx = pts[c + 1].x - pts[c].x, vy = pts[c + 1].y - pts[c].y;
    if (std::abs(ux * vy - uy * vx) == 0.0 && ux * vx + uy * vy > 0.0) continue;  // collinear
    squares[c - 1] -= 0.5 * correction;
    squares[c] -= 0.5 * correction;
  }

  auto internal = [&](std::size_t k) { return fmt::format("{}.n{}", seg.name, k); };
  std::vector<std::string> at(runs + 1);
  for (std::size_t k = 0; k <= runs; ++k) at[k] = internal(k);
  if (seg.via_start == 0.0) at.front() = seg.from;
  if (seg.via_end == 0.0) at.back() = seg.to;

  if (seg.via_start > 0.0) {
    b.resistor(seg.name + ".via0", seg.from, at.front(), seg.via_start, seg.path_label);
    stats.via_resistance += seg.via_start;
  }
  std::map<std::size_t, double> cap;
  for (std::size_t r = 0; r < runs; ++r) {
    const double ohms = seg.sheet_resistance * squares[r];
    if (ohms < 0.0)
      throw ValidationError(fmt::format("wire '{}': run {} shorter than its corner allowance", seg.name, r));
    // A zero-ohm run would make the MNA matrix singular; tie it with a 1 micro-ohm stub.
    b.resistor(fmt::format("{}.r{}", seg.name, r), at[r], at[r + 1], ohms > 0.0 ? ohms : 1e-6, seg.path_label);
    stats.run_resistance += ohms;
    const double c = seg.cap_density * length[r] * seg.width;
    cap[r] += 0.5 * c;
    cap[r + 1] += 0.5 * c;
    stats.capacitance += c;
  }
  if (seg.via_end > 0.0) {
    b.resistor(seg.name + ".via1", at.back(), seg.to, seg.via_end, seg.path_label);
    stats.via_resistance += seg.via_end;
  }
  if (!seg.substrate_node.empty())
    for (const auto& [k, c] : cap)
      if (c > 0.0) b.capacitor(fmt::format("{}.c{}", seg.name, k), at[k], seg.substrate_node, c, seg.path_label);
  return stats;
}

Netlist extract_wire(const WireSegment& seg, const ExtractOptions& options) {
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  extract_wire(b, seg, options);
  return b.build();
}

std::vector<WireSegment> scale_ground_width(std::vector<WireSegment> segments, double factor) {
  if (!(factor > 0.0)) throw ValidationError("scale factor must be > 0");
  if (factor == 1.0) return segments;
  for (auto& s : segments) {
    if (s.path_label != "ground-interconnect" || !s.resizable) continue;
    s.width *= factor;
    s.via_start /= factor;
    s.via_end /= factor;
  }
  return segments;
}

} // namespace subnoise
