#include "subnoise/layout.hpp"

#include <cmath>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/netlist_io.hpp"
#include "subnoise/solver.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

using nlohmann::json;

namespace {

std::string str(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw ValidationError(fmt::format("missing string field '{}'", key));
  return obj.at(key).get<std::string>();
}

Rect rect_from(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(fmt::format("{}: expected [x0, y0, x1, y1]", what));
  return {json_value(j[0], what), json_value(j[1], what), json_value(j[2], what), json_value(j[3], what)};
}

FeatureKind feature_kind(const std::string& s) {
  if (s == "contact") return FeatureKind::contact;
  if (s == "well") return FeatureKind::well;
  if (s == "injection-port") return FeatureKind::injection_port;
  throw ValidationError(fmt::format("unknown feature kind '{}'", s));
}

Face face_from(const std::string& s) {
  if (s == "top") return Face::top;
  if (s == "xmin") return Face::xmin;
  if (s == "xmax") return Face::xmax;
  if (s == "ymin") return Face::ymin;
  if (s == "ymax") return Face::ymax;
  throw ValidationError(fmt::format("unknown face '{}'", s));
}

// Fills in g_mb / g_ds of mos elements that only give a bias point.
json resolve_bias(const json& circuit, const BiasTable& table) {
  json out = circuit;
  for (json& e : out) {
    if (e.value("type", std::string()) != "mos" || !e.contains("bias")) continue;
    const MosParams p = mos_params(table, json_value(e.at("bias"), "bias"));
    if (!e.contains("gmb")) e["gmb"] = p.gmb;
    if (!e.contains("gds")) e["gds"] = p.gds;
  }
  return out;
}

template <class F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", where, e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", where, e.what()));
  }
}

} // namespace

Technology technology_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("technology: expected a JSON object");
  Technology t;
  if (j.contains("layers"))
    for (const auto& [name, l] : j.at("layers").items())
      t.layers[name] = with_context(fmt::format("layer '{}'", name), [&] {
        return LayerTech{json_field(l, "sheet_resistance"), json_field(l, "cap_density", 0.0)};
      });
  t.via_resistance = json_field(j, "via_resistance", t.via_resistance);
  t.corner_weight = json_field(j, "corner_weight", t.corner_weight);
  if (j.contains("bias_table")) {
    t.bias.rows.clear();
    for (const json& r : j.at("bias_table")) {
      if (!r.is_array() || r.size() != 3) throw ValidationError("bias_table rows are [bias, gmb, gds]");
      t.bias.rows.push_back({json_value(r[0], "bias"), json_value(r[1], "gmb"), json_value(r[2], "gds")});
    }
  }
  t.bias.validate();
  if (j.contains("package_pin")) {
    t.pin_resistance = json_field(j.at("package_pin"), "resistance", t.pin_resistance);
    t.pin_inductance = json_field(j.at("package_pin"), "inductance", t.pin_inductance);
  }
  return t;
}

Layout layout_from_json(const json& j, const Technology& tech) {
  if (!j.is_object()) throw ValidationError("layout: expected a JSON object");
  Layout L;
  L.ground = j.value("ground", std::string("0"));
  L.die = rect_from(j.at("die"), "die");

  if (j.contains("stack")) {
    const json& s = j.at("stack");
    L.stack.resistivity = json_field(s, "resistivity", L.stack.resistivity);
    L.stack.thickness = json_field(s, "thickness", L.stack.thickness);
    L.stack.backside_contact = s.value("backside_contact", false);
    if (s.contains("epi"))
      for (const json& e : s.at("epi"))
        L.stack.epi.push_back({json_field(e, "resistivity"), json_field(e, "thickness")});
  }
  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    L.mesh.nx = m.value("nx", L.mesh.nx);
    L.mesh.ny = m.value("ny", L.mesh.ny);
    L.mesh.nz = m.value("nz", L.mesh.nz);
    L.mesh.z_grading = json_field(m, "z_grading", 1.0);
    L.mesh.edge_refinement = json_field(m, "edge_refinement", 1.0);
    L.mesh.conductance_scale = json_field(m, "conductance_scale", 1.0);
    if (m.contains("refinement"))
      for (const auto& [name, v] : m.at("refinement").items()) L.mesh.refinement[name] = json_value(v, name);
  }

  if (j.contains("features"))
    for (const json& f : j.at("features")) {
      SurfaceFeature sf;
      sf.name = str(f, "name");
      with_context(fmt::format("feature '{}'", sf.name), [&] {
        sf.kind = feature_kind(str(f, "kind"));
        sf.node = str(f, "node");
        sf.face = face_from(f.value("face", std::string("top")));
        if (sf.face == Face::top) sf.rect = rect_from(f.at("rect"), "rect");
        sf.cap_density = json_field(f, "cap_density", 0.0);
        sf.path_label = f.value("path_label", std::string());
        return 0;
      });
      L.features.push_back(std::move(sf));
    }

  if (j.contains("wires"))
    for (const json& w : j.at("wires")) {
      WireSegment seg;
      seg.name = str(w, "name");
      with_context(fmt::format("wire '{}'", seg.name), [&] {
        seg.layer = str(w, "layer");
        auto layer = tech.layers.find(seg.layer);
        if (layer == tech.layers.end()) throw ValidationError(fmt::format("unknown layer '{}'", seg.layer));
        seg.sheet_resistance = json_field(w, "sheet_resistance", layer->second.sheet_resistance);
        seg.cap_density = json_field(w, "cap_density", layer->second.cap_density);
        for (const json& p : w.at("path")) {
          if (!p.is_array() || p.size() != 2) throw ValidationError("path points are [x, y]");
          seg.path.push_back({json_value(p[0], "x"), json_value(p[1], "y")});
        }
        seg.width = json_field(w, "width");
        seg.from = str(w, "from");
        seg.to = str(w, "to");
        seg.substrate_node = w.value("substrate_node", std::string());
        seg.via_start = seg.via_end = tech.via_resistance;
        if (w.contains("vias")) {
          const json& v = w.at("vias");
          if (!v.is_array() || v.size() != 2) throw ValidationError("vias is [start, end]");
          seg.via_start = json_value(v[0], "via");
          seg.via_end = json_value(v[1], "via");
        }
        seg.path_label = w.value("path_label", std::string("ground-interconnect"));
        seg.resizable = w.value("resizable", true);
        seg.validate();
        return 0;
      });
      L.wires.push_back(std::move(seg));
    }

  if (j.contains("pins"))
    for (const json& p : j.at("pins")) {
      const std::string name = str(p, "name");
      L.stubs.push_back(package_pin(name, str(p, "a"), str(p, "b"),
                                    json_field(p, "resistance", tech.pin_resistance),
                                    json_field(p, "inductance", tech.pin_inductance)));
    }
  if (j.contains("stubs"))
    for (const json& s : j.at("stubs")) {
      CouplingStub st;
      st.name = str(s, "name");
      with_context(fmt::format("stub '{}'", st.name), [&] {
        st.kind = stub_kind_from_string(str(s, "kind"));
        if (st.kind == StubKind::package_pin) throw ValidationError("package pins belong in \"pins\"");
        st.a = str(s, "a");
        st.b = str(s, "b");
        st.value = json_field(s, "value");
        st.path_label = s.value("path_label", std::string());
        return 0;
      });
      L.stubs.push_back(std::move(st));
    }

  if (j.contains("circuit")) {
    // Bias points stay symbolic until extraction; resolve once here to validate.
    L.circuit = j.at("circuit");
    with_context("circuit", [&] { return resolve_bias(L.circuit, tech.bias); });
  }
  return L;
}

Technology read_technology(const std::filesystem::path& path) {
  return with_context(path.string(), [&] { return technology_from_json(read_json_file(path)); });
}

Layout read_layout(const std::filesystem::path& path, const Technology& tech) {
  return with_context(path.string(), [&] { return layout_from_json(read_json_file(path), tech); });
}

Layout scale_ground_width(Layout layout, double factor, bool all) {
  if (all)
    for (auto& w : layout.wires)
      if (w.path_label == "ground-interconnect") w.resizable = true;
  layout.wires = scale_ground_width(std::move(layout.wires), factor);
  return layout;
}

Netlist scale_conductance(const Netlist& netlist, double factor) {
  if (!(factor > 0.0)) throw ValidationError("conductance factor must be > 0");
  NetlistBuilder b;
  for (const Node& n : netlist.nodes()) b.node(n.name, n.kind);
  for (Element e : netlist.elements()) {
    if (auto* r = std::get_if<Resistor>(&e.value)) r->ohms /= factor;
    b.add(std::move(e));
  }
  for (const MosSmallSignal& d : netlist.devices()) b.add(d);
  return b.build();
}

namespace {

struct Parts {
  Netlist mesh;
  Netlist substrate;
  Netlist interconnect;
  Netlist circuit;
  double ground_r = 0.0;
  int skipped = 0;
};

Parts build_parts(const Layout& layout, const Technology& tech) {
  Parts p;
  p.mesh = build_mesh(layout.stack, layout.features, layout.die, layout.mesh, layout.ground);
  const auto ports = feature_ports(layout.features);
  p.substrate = ports.size() >= 2 ? reduce_to_ports(p.mesh, ports) : p.mesh;

  NetlistBuilder ic;
  ic.node(layout.ground, NodeKind::ground_reference);
  ExtractOptions opts;
  opts.corner_weight = tech.corner_weight;
  for (const auto& w : layout.wires) {
    const WireStats s = extract_wire(ic, w, opts);
    p.skipped += s.skipped_runs;
    if (w.path_label == "ground-interconnect") p.ground_r += s.total_resistance();
  }
  for (const auto& s : layout.stubs) add_stub(ic, s);
  p.interconnect = ic.build();

  json c{{"ground", layout.ground}, {"elements", resolve_bias(layout.circuit, tech.bias)}};
  p.circuit = with_context("circuit", [&] { return netlist_from_json(c); });
  return p;
}

Netlist assemble(const Netlist& substrate, const Parts& p) {
  NetlistBuilder b(substrate);
  b.merge(p.interconnect);
  b.merge(p.circuit);
  return b.build();
}

} // namespace

Extraction extract(const Layout& layout, const Technology& tech) {
  Parts p = build_parts(layout, tech);
  Extraction x;
  x.system = assemble(p.substrate, p);
  x.mesh = std::move(p.mesh);
  x.substrate = std::move(p.substrate);
  x.interconnect = std::move(p.interconnect);
  x.circuit = std::move(p.circuit);
  x.ground_path_resistance = p.ground_r;
  x.skipped_runs = p.skipped;
  for (const Element& e : x.system.elements())
    if (!e.path_label.empty()) x.path_labels.insert(e.path_label);
  for (const MosSmallSignal& d : x.system.devices())
    if (!d.path_label.empty()) x.path_labels.insert(d.path_label);
  return x;
}

double divider_ratio(const Netlist& system, const Calibration& cal) {
  const double f[] = {cal.frequency};
  TransferOptions o;
  o.reference_node = cal.reference;
  return std::abs(transfer(system, cal.source, cal.target, f, o).value[0]);
}

double calibrate_conductance_scale(const Layout& layout, const Technology& tech, const Calibration& cal) {
  if (!(cal.divider > 0.0)) throw ValidationError("calibration divider must be > 0");
  Layout base = layout;
  base.mesh.conductance_scale = 1.0;
  const Parts p = build_parts(base, tech);
  auto eval = [&](double log_s) {
    return std::log(divider_ratio(assemble(scale_conductance(p.substrate, std::exp(log_s)), p), cal));
  };
  const double target = std::log(cal.divider);

  // Bracket on a coarse log grid, then bisect.
  double lo = std::log(1e-6), hi = std::log(1e6);
  const int steps = 24;
  double prev_x = lo, prev_v = eval(lo) - target;
  bool found = false;
  for (int k = 1; k <= steps && !found; ++k) {
    const double x = lo + (hi - lo) * k / steps;
    const double v = eval(x) - target;
    if ((prev_v <= 0.0) != (v <= 0.0)) {
      lo = prev_x;
      hi = x;
      found = true;
    } else {
      prev_x = x;
      prev_v = v;
    }
  }
  if (!found)
    throw ValidationError(fmt::format("divider {:.6g} is not reachable by scaling mesh conductance", cal.divider));
  double f_lo = eval(lo) - target;
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = eval(mid) - target;
    if ((v <= 0.0) == (f_lo <= 0.0)) {
      lo = mid;
      f_lo = v;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

} // namespace subnoise
