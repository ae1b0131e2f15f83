#pragma once

#include <string>
#include <vector>

#include "subnoise/netlist.hpp"

namespace subnoise {

struct BiasRow {
  double bias = 0.0;  // V
  double gmb = 0.0;   // S
  double gds = 0.0;   // S
};

// Piecewise-linear g_mb / g_ds versus bias.
struct BiasTable {
  std::vector<BiasRow> rows;

  // Two rows: (0.5 V, 10 mS, 2.8 mS) and (1.6 V, 38 mS, 22 mS).
  static BiasTable standard();
  void validate() const;
};

struct MosParams {
  double gmb = 0.0;
  double gds = 0.0;
};

// Linear interpolation; no extrapolation outside the table.
MosParams mos_params(const BiasTable& table, double bias);

// g_mb / (2 pi (C_dbj + C_sbj))
double backgate_corner_freq(double gmb, double cdbj, double csbj);

// C(V) = C_min + (C_max - C_min) * (1 + tanh(slope * (V - V_half))) / 2
struct VaractorModel {
  double c_min = 0.0;
  double c_max = 0.0;
  double v_half = 0.0;
  double slope = 1.0;

  void validate() const;
};

double varactor_cap(const VaractorModel& model, double v);
double varactor_dcdv(const VaractorModel& model, double v);

enum class StubKind { inductor_substrate_cap, nwell_cap, supply_cap, package_pin };

// A lumped coupling element between two nodes. Capacitive stubs use
// `value` as farads; a package pin is a series R (`value`, ohms) and L.
struct CouplingStub {
  StubKind kind = StubKind::inductor_substrate_cap;
  std::string name;
  std::string a;
  std::string b;
  double value = 0.0;
  double inductance = 0.0;
  std::string path_label;
};

CouplingStub package_pin(std::string name, std::string a, std::string b, double ohms = 1.0,
                         double henries = 2e-9);

StubKind stub_kind_from_string(std::string_view text);

// Emits the stub into `b`. A package pin adds the internal node "<name>.mid".
void add_stub(NetlistBuilder& b, const CouplingStub& stub);

} // namespace subnoise
