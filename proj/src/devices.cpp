#include "subnoise/devices.hpp"

#include <cmath>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

BiasTable BiasTable::standard() { return BiasTable{{{0.5, 10e-3, 2.8e-3}, {1.6, 38e-3, 22e-3}}}; }

void BiasTable::validate() const {
  if (rows.size() < 2) throw ValidationError("bias table needs at least two rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].gmb > 0.0) || !(rows[i].gds > 0.0))
      throw ValidationError(fmt::format("bias table row {}: g_mb and g_ds must be > 0", i));
    if (i > 0 && !(rows[i].bias > rows[i - 1].bias))
      throw ValidationError("bias table: bias must be strictly increasing");
  }
}

MosParams mos_params(const BiasTable& table, double bias) {
  table.validate();
  const auto& r = table.rows;
  if (!(bias >= r.front().bias && bias <= r.back().bias))
    throw ValidationError(
        fmt::format("bias {} V outside table range [{}, {}] V", bias, r.front().bias, r.back().bias));
  std::size_t k = 1;
  while (k + 1 < r.size() && bias > r[k].bias) ++k;
  const double t = (bias - r[k - 1].bias) / (r[k].bias - r[k - 1].bias);
  return {r[k - 1].gmb + t * (r[k].gmb - r[k - 1].gmb), r[k - 1].gds + t * (r[k].gds - r[k - 1].gds)};
}

double backgate_corner_freq(double gmb, double cdbj, double csbj) {
  if (!(gmb > 0.0) || !(cdbj > 0.0) || !(csbj > 0.0))
    throw ValidationError("backgate_corner_freq: inputs must be > 0");
  return gmb / (2.0 * kPi * (cdbj + csbj));
}

void VaractorModel::validate() const {
  if (!(c_min > 0.0) || !(c_max > c_min)) throw ValidationError("varactor: need C_max > C_min > 0");
  if (!(slope > 0.0)) throw ValidationError("varactor: slope must be > 0");
}

double varactor_cap(const VaractorModel& m, double v) {
  return m.c_min + (m.c_max - m.c_min) * 0.5 * (1.0 + std::tanh(m.slope * (v - m.v_half)));
}

double varactor_dcdv(const VaractorModel& m, double v) {
  const double t = std::tanh(m.slope * (v - m.v_half));
  return (m.c_max - m.c_min) * 0.5 * m.slope * (1.0 - t * t);
}

CouplingStub package_pin(std::string name, std::string a, std::string b, double ohms, double henries) {
  CouplingStub s;
  s.kind = StubKind::package_pin;
  s.name = std::move(name);
  s.a = std::move(a);
  s.b = std::move(b);
  s.value = ohms;
  s.inductance = henries;
  return s;
}

StubKind stub_kind_from_string(std::string_view text) {
  if (text == "inductor-substrate-cap") return StubKind::inductor_substrate_cap;
  if (text == "nwell-cap") return StubKind::nwell_cap;
  if (text == "supply-cap") return StubKind::supply_cap;
  if (text == "package-pin") return StubKind::package_pin;
  throw ValidationError(fmt::format("unknown stub kind '{}'", text));
}

void add_stub(NetlistBuilder& b, const CouplingStub& s) {
  if (!(s.value > 0.0)) throw ValidationError(fmt::format("stub '{}': value must be > 0", s.name));
  if (s.kind != StubKind::package_pin) {
    b.capacitor(s.name, s.a, s.b, s.value, s.path_label);
    return;
  }
  if (!(s.inductance > 0.0)) throw ValidationError(fmt::format("stub '{}': inductance must be > 0", s.name));
  const std::string mid = s.name + ".mid";
  b.resistor(s.name + ".r", s.a, mid, s.value, s.path_label);
  b.inductor(s.name + ".l", mid, s.b, s.inductance, s.path_label);
}

} // namespace subnoise
