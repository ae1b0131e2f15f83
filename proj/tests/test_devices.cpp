#include <doctest.h>

#include <cmath>

#include "subnoise/devices.hpp"
#include "subnoise/error.hpp"
#include "subnoise/solver.hpp"
#include "subnoise/units.hpp"

using namespace subnoise;

namespace {

// Back-gate driven NMOS with grounded gate and source; output at the drain.
double drain_response(double gmb, double cdbj, double csbj, double f) {
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  MosSmallSignal m;
  m.name = "M1";
  m.gm = 20e-3;
  m.gmb = gmb;
  m.gds = 2.8e-3;
  m.cdbj = cdbj;
  m.csbj = csbj;
  m.gate = b.node("0");
  m.source = b.node("0");
  m.drain = b.node("d");
  m.bulk = b.node("bk");
  b.add(m);
  b.vsource("V1", "bk", "0");
  return std::abs(ac_solve(b.build(), f).at("d"));
}

const VaractorModel kVar{1e-12, 2.6e-12, 0.6, 2.5};

} // namespace

TEST_SUITE("devices") {

TEST_CASE("bias table endpoints and midpoint") {
  const BiasTable t = BiasTable::standard();
  auto lo = mos_params(t, 0.5), hi = mos_params(t, 1.6), mid = mos_params(t, 1.05);
  CHECK(lo.gmb == doctest::Approx(10e-3));
  CHECK(lo.gds == doctest::Approx(2.8e-3));
  CHECK(hi.gmb == doctest::Approx(38e-3));
  CHECK(hi.gds == doctest::Approx(22e-3));
  CHECK(mid.gmb == doctest::Approx(24e-3));
  CHECK(mid.gds == doctest::Approx(12.4e-3));
}

TEST_CASE("bias table is monotone and refuses extrapolation") {
  const BiasTable t = BiasTable::standard();
  double prev_gmb = 0.0, prev_gds = 0.0;
  for (double v = 0.5; v <= 1.6; v += 0.05) {
    const MosParams p = mos_params(t, v);
    CHECK(p.gmb >= prev_gmb);
    CHECK(p.gds >= prev_gds);
    prev_gmb = p.gmb;
    prev_gds = p.gds;
  }
  CHECK_THROWS_AS(mos_params(t, 0.49), ValidationError);
  CHECK_THROWS_AS(mos_params(t, 1.7), ValidationError);
  BiasTable bad{{{1.0, 1e-3, 1e-3}, {0.5, 2e-3, 2e-3}}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("back-gate corner frequency") {
  CHECK(backgate_corner_freq(10e-3, 120e-15, 200e-15) == doctest::Approx(4.97e9).epsilon(0.001));
  CHECK(backgate_corner_freq(38e-3, 120e-15, 200e-15) == doctest::Approx(18.9e9).epsilon(0.001));
  CHECK(backgate_corner_freq(2.0 * kPi * 2.0 * 1e-12, 1e-12, 1e-12) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(backgate_corner_freq(0.0, 1e-15, 1e-15), ValidationError);
  CHECK_THROWS_AS(backgate_corner_freq(1e-3, -1e-15, 1e-15), ValidationError);
}

TEST_CASE("junction coupling stays below back-gate coupling under the corner") {
  for (double gmb : {10e-3, 38e-3}) {
    const double fc = backgate_corner_freq(gmb, 120e-15, 200e-15);
    for (double f : {1e6, 1e8, 0.5 * fc}) {
      const double via_gmb = drain_response(gmb, 0.0, 0.0, f);
      const double via_caps = drain_response(0.0, 120e-15, 200e-15, f);
      CHECK(via_caps < via_gmb);
    }
  }
}

TEST_CASE("varactor law") {
  CHECK(varactor_cap(kVar, 0.6) == doctest::Approx(1.8e-12).epsilon(1e-12));
  CHECK(varactor_cap(kVar, 100.0) == doctest::Approx(2.6e-12).epsilon(1e-12));
  CHECK(varactor_cap(kVar, -100.0) == doctest::Approx(1e-12).epsilon(1e-12));
  CHECK(varactor_cap(kVar, 3.0) < 2.6e-12);
  CHECK(varactor_cap(kVar, -3.0) > 1e-12);
  CHECK(varactor_dcdv(kVar, 0.6) == doctest::Approx(1.6e-12 * 2.5 / 2.0).epsilon(1e-12));
  double prev = 0.0;
  for (double v = -2.0; v <= 3.0; v += 0.1) {
    const double c = varactor_cap(kVar, v);
    CHECK(c > prev);
    prev = c;
    const double h = 1e-5;
    const double fd = (varactor_cap(kVar, v + h) - varactor_cap(kVar, v - h)) / (2 * h);
    CHECK(fd == doctest::Approx(varactor_dcdv(kVar, v)).epsilon(1e-6));
  }
  CHECK_THROWS_AS((VaractorModel{2e-12, 1e-12, 0.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((VaractorModel{0.0, 1e-12, 0.0, 1.0}.validate()), ValidationError);
}

TEST_CASE("coupling stubs") {
  CHECK(stub_kind_from_string("inductor-substrate-cap") == StubKind::inductor_substrate_cap);
  CHECK(stub_kind_from_string("package-pin") == StubKind::package_pin);
  CHECK_THROWS_AS(stub_kind_from_string("bondwire"), ValidationError);

  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  add_stub(b, package_pin("pin", "pad", "0"));
  add_stub(b, CouplingStub{StubKind::inductor_substrate_cap, "cind", "sub", "tank", 120e-15, 0.0, "inductor"});
  const Netlist n = b.build();
  CHECK(n.find("pin.mid").has_value());
  double r = 0, l = 0, c = 0;
  for (const Element& e : n.elements()) {
    if (auto* x = std::get_if<Resistor>(&e.value)) r += x->ohms;
    if (auto* x = std::get_if<Inductor>(&e.value)) l += x->henries;
    if (auto* x = std::get_if<Capacitor>(&e.value)) {
      c += x->farads;
      CHECK(e.path_label == "inductor");
    }
  }
  CHECK(r == doctest::Approx(1.0));
  CHECK(l == doctest::Approx(2e-9));
  CHECK(c == doctest::Approx(120e-15));

  NetlistBuilder bad;
  bad.node("0", NodeKind::ground_reference);
  CHECK_THROWS_AS(add_stub(bad, CouplingStub{StubKind::nwell_cap, "c", "a", "b", 0.0, 0.0, ""}), ValidationError);
}

}
