#include <doctest.h>

#include <cmath>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/interconnect.hpp"
#include "subnoise/solver.hpp"

using namespace subnoise;

namespace {

constexpr double um = 1e-6;

WireSegment straight(double length, double width) {
  WireSegment s;
  s.name = "w";
  s.layer = "metal1";
  s.path = {{0, 0}, {length, 0}};
  s.width = width;
  s.sheet_resistance = 0.08;
  s.cap_density = 30e-6;
  s.via_start = 0.0;
  s.via_end = 0.0;
  s.from = "a";
  s.to = "b";
  s.substrate_node = "0";
  return s;
}

double end_to_end(const WireSegment& s) { return point_to_point_resistance(extract_wire(s), s.from, s.to); }

// Resistance of an L-shaped strip of width w: centreline (0,0) -> (l,0) -> (l,l),
// discretized into square cells of side w/n. The terminals cover the two end edges.
double fine_l_resistance(double l, double w, int n, double rs) {
  const double h = w / n;
  const int cols = static_cast<int>(std::lround((l + w / 2) / h));  // horizontal leg incl. corner
  const int rows = static_cast<int>(std::lround((l + w / 2) / h));  // vertical leg incl. corner
  // Cell (i, j) with i along x from the left end, j along y from the bottom edge.
  auto inside = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= cols || j >= rows) return false;
    return j < n || i >= cols - n;
  };
  auto name = [](int i, int j) { return fmt::format("c{}_{}", i, j); };
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  int k = 0;
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < rows; ++j) {
      if (!inside(i, j)) continue;
      if (inside(i + 1, j)) b.resistor(fmt::format("R{}", k++), name(i, j), name(i + 1, j), rs);
      if (inside(i, j + 1)) b.resistor(fmt::format("R{}", k++), name(i, j), name(i, j + 1), rs);
      if (i == 0) b.resistor(fmt::format("R{}", k++), name(i, j), "A", rs / 2);
      if (j == rows - 1) b.resistor(fmt::format("R{}", k++), name(i, j), "B", rs / 2);
    }
  return point_to_point_resistance(b.build(), "A", "B");
}

} // namespace

TEST_SUITE("interconnect") {

TEST_CASE("straight run squares times sheet resistance") {
  CHECK(end_to_end(straight(100 * um, 1 * um)) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(end_to_end(straight(100 * um, 2 * um)) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("vias add at both ends") {
  WireSegment s = straight(100 * um, 1 * um);
  s.via_start = 2.0;
  s.via_end = 2.0;
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  const WireStats st = extract_wire(b, s);
  CHECK(st.run_resistance == doctest::Approx(8.0));
  CHECK(st.via_resistance == doctest::Approx(4.0));
  CHECK(point_to_point_resistance(b.build(), "a", "b") == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("pi-model capacitance") {
  const WireSegment s = straight(100 * um, 2 * um);
  const Netlist n = extract_wire(s);
  double total = 0.0;
  int caps = 0;
  for (const Element& e : n.elements())
    if (auto* c = std::get_if<Capacitor>(&e.value)) {
      total += c->farads;
      ++caps;
      CHECK(c->farads == doctest::Approx(30e-6 * 100 * um * 2 * um / 2));
    }
  CHECK(caps == 2);
  CHECK(total == doctest::Approx(30e-6 * 100 * um * 2 * um));
}

TEST_CASE("every element carries the path label") {
  WireSegment s = straight(50 * um, 1 * um);
  s.via_start = 2.0;
  const Netlist ground = extract_wire(s);
  for (const Element& e : ground.elements()) CHECK(e.path_label == "ground-interconnect");
  s.path_label = "supply";
  const Netlist supply = extract_wire(s);
  for (const Element& e : supply.elements()) CHECK(e.path_label == "supply");
}

TEST_CASE("L-path against a fine resistor grid") {
  WireSegment s = straight(0, 1 * um);
  s.path = {{0, 0}, {10 * um, 0}, {10 * um, 10 * um}};
  const double extracted = end_to_end(s);
  CHECK(extracted == doctest::Approx(0.08 * (20.0 - (1.0 - 0.56))).epsilon(1e-12));
  const double fine = fine_l_resistance(10 * um, 1 * um, 10, 0.08);
  CHECK(extracted == doctest::Approx(fine).epsilon(0.01));
}

TEST_CASE("corner weight is configurable") {
  WireSegment s = straight(0, 1 * um);
  s.path = {{0, 0}, {10 * um, 0}, {10 * um, 10 * um}};
  ExtractOptions opt;
  opt.corner_weight = 1.0;
  CHECK(point_to_point_resistance(extract_wire(s, opt), "a", "b") == doctest::Approx(0.08 * 20.0));
}

TEST_CASE("resistance is additive over concatenation") {
  WireSegment whole = straight(100 * um, 1 * um);
  WireSegment first = straight(40 * um, 1 * um);
  WireSegment second = straight(0, 1 * um);
  second.path = {{40 * um, 0}, {100 * um, 0}};
  CHECK(end_to_end(whole) == doctest::Approx(end_to_end(first) + end_to_end(second)).epsilon(1e-12));

  WireSegment l = straight(0, 1 * um);
  l.path = {{0, 0}, {30 * um, 0}, {30 * um, 20 * um}, {60 * um, 20 * um}};
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  const WireStats st = extract_wire(b, l);
  double sum = 0.0;
  for (const Element& e : b.build().elements())
    if (auto* r = std::get_if<Resistor>(&e.value)) sum += r->ohms;
  CHECK(st.run_resistance == doctest::Approx(sum).epsilon(1e-12));
  CHECK(point_to_point_resistance(b.build(), "a", "b") == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("uniform width scaling") {
  for (double alpha : {0.5, 2.0, 3.0}) {
    const WireSegment s = straight(80 * um, 2 * um);
    const WireSegment t = straight(80 * um, 2 * um * alpha);
    NetlistBuilder b1, b2;
    b1.node("0", NodeKind::ground_reference);
    b2.node("0", NodeKind::ground_reference);
    const WireStats a = extract_wire(b1, s), c = extract_wire(b2, t);
    CHECK(c.run_resistance == doctest::Approx(a.run_resistance / alpha).epsilon(1e-12));
    CHECK(c.capacitance == doctest::Approx(a.capacitance * alpha).epsilon(1e-12));
  }
}

TEST_CASE("fragment is passive") {
  WireSegment s = straight(0, 1.5 * um);
  s.path = {{0, 0}, {30 * um, 0}, {30 * um, 40 * um}};
  s.via_start = 1.0;
  s.via_end = 3.0;
  const Netlist n = extract_wire(s);
  for (const Element& e : n.elements()) {
    if (auto* r = std::get_if<Resistor>(&e.value)) CHECK(r->ohms >= 0.0);
    if (auto* c = std::get_if<Capacitor>(&e.value)) CHECK(c->farads >= 0.0);
  }
}

TEST_CASE("zero-length runs are skipped and counted") {
  WireSegment s = straight(0, 1 * um);
  s.path = {{0, 0}, {50 * um, 0}, {50 * um, 0}, {100 * um, 0}};
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  const WireStats st = extract_wire(b, s);
  CHECK(st.skipped_runs == 1);
  CHECK(point_to_point_resistance(b.build(), "a", "b") == doctest::Approx(8.0).epsilon(1e-12));
  s.path = {{0, 0}, {0, 0}};
  CHECK_THROWS_AS(extract_wire(s), ValidationError);
}

TEST_CASE("scale_ground_width") {
  WireSegment g = straight(100 * um, 1 * um);
  g.via_start = 2.0;
  WireSegment fixed = g;
  fixed.name = "fixed";
  fixed.resizable = false;
  WireSegment supply = g;
  supply.name = "sup";
  supply.path_label = "supply";
  const std::vector<WireSegment> ws = {g, fixed, supply};

  const auto same = scale_ground_width(ws, 1.0);
  for (std::size_t i = 0; i < ws.size(); ++i) CHECK(same[i].width == ws[i].width);

  const auto wide = scale_ground_width(ws, 2.0);
  CHECK(wide[0].width == 2 * um);
  CHECK(wide[0].via_start == 1.0);
  CHECK(end_to_end(wide[0]) == doctest::Approx(end_to_end(ws[0]) / 2.0).epsilon(1e-12));
  CHECK(wide[1].width == 1 * um);
  CHECK(wide[2].width == 1 * um);
  CHECK_THROWS_AS(scale_ground_width(ws, 0.0), ValidationError);
}

TEST_CASE("segment validation") {
  WireSegment s = straight(10 * um, 0.0);
  CHECK_THROWS_AS(extract_wire(s), ValidationError);
  s = straight(10 * um, 1 * um);
  s.sheet_resistance = -1.0;
  CHECK_THROWS_AS(extract_wire(s), ValidationError);
  s = straight(10 * um, 1 * um);
  s.path = {{0, 0}};
  CHECK_THROWS_AS(extract_wire(s), ValidationError);
}

}
