#include "subnoise/netlist_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

using nlohmann::json;

namespace {

std::string str_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw ValidationError(fmt::format("missing string field '{}'", key));
  return obj.at(key).get<std::string>();
}

Complex complex_value(const json& j, const std::string& what) {
  if (j.is_array() && j.size() == 2) return {json_value(j[0], what), json_value(j[1], what)};
  return {json_value(j, what), 0.0};
}

} // namespace

Netlist netlist_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("netlist: expected a JSON object");
  NetlistBuilder b;
  b.node(j.value("ground", std::string("0")), NodeKind::ground_reference);

  if (j.contains("nodes")) {
    for (const json& n : j.at("nodes")) {
      const std::string name = str_field(n, "name");
      NodeKind kind = node_kind_from_string(n.value("kind", std::string("circuit")));
      b.node(name, kind);
    }
  }

  if (!j.contains("elements")) return b.build();
  std::size_t index = 0;
  for (const json& e : j.at("elements")) {
    const std::string type = str_field(e, "type");
    const std::string name = e.value("name", fmt::format("{}{}", type, index++));
    const std::string label = e.value("path_label", std::string());
    try {
      if (type == "mos") {
        const json& t = e.at("nodes");
        if (!t.is_object()) throw ValidationError("mos nodes must be an object");
        MosSmallSignal d;
        d.name = name;
        d.gate = b.node(str_field(t, "gate"));
        d.drain = b.node(str_field(t, "drain"));
        d.source = b.node(str_field(t, "source"));
        d.bulk = b.node(str_field(t, "bulk"));
        d.gm = json_field(e, "gm", 0.0);
        d.gmb = json_field(e, "gmb");
        d.gds = json_field(e, "gds");
        d.cdbj = json_field(e, "cdbj", 0.0);
        d.csbj = json_field(e, "csbj", 0.0);
        d.path_label = label;
        b.add(std::move(d));
        continue;
      }

      const json& t = e.at("nodes");
      if (!t.is_array()) throw ValidationError("nodes must be an array");
      std::vector<NodeId> terms;
      for (const json& n : t) terms.push_back(b.node(n.get<std::string>()));

      Element el{name, Resistor{1.0}, std::move(terms), label};
      if (type == "resistor") el.value = Resistor{json_field(e, "value")};
      else if (type == "capacitor") el.value = Capacitor{json_field(e, "value")};
      else if (type == "inductor") el.value = Inductor{json_field(e, "value")};
      else if (type == "vccs") el.value = Vccs{json_field(e, "value")};
      else if (type == "vsource")
        el.value = VoltageSource{complex_value(e.at("value"), name), e.value("ac", true)};
      else if (type == "isource")
        el.value = CurrentSource{complex_value(e.at("value"), name), e.value("ac", true)};
      else throw ValidationError(fmt::format("unknown element type '{}'", type));
      b.add(std::move(el));
    } catch (const json::exception& ex) {
      throw ValidationError(fmt::format("element '{}': {}", name, ex.what()));
    } catch (const ValidationError& ex) {
      throw ValidationError(fmt::format("element '{}': {}", name, ex.what()));
    }
  }
  return b.build();
}

json netlist_to_json(const Netlist& netlist) {
  json out;
  out["ground"] = netlist.node(netlist.ground()).name;
  json nodes = json::array();
  for (const Node& n : netlist.nodes())
    nodes.push_back({{"name", n.name}, {"kind", std::string(to_string(n.kind))}});
  out["nodes"] = std::move(nodes);

  json elements = json::array();
  auto names = [&](const std::vector<NodeId>& ids) {
    json a = json::array();
    for (NodeId id : ids) a.push_back(netlist.node(id).name);
    return a;
  };
  for (const Element& e : netlist.elements()) {
    json r{{"name", e.name}, {"nodes", names(e.terminals)}};
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) { r["type"] = "resistor"; r["value"] = v.ohms; }
          else if constexpr (std::is_same_v<T, Capacitor>) { r["type"] = "capacitor"; r["value"] = v.farads; }
          else if constexpr (std::is_same_v<T, Inductor>) { r["type"] = "inductor"; r["value"] = v.henries; }
          else if constexpr (std::is_same_v<T, Vccs>) { r["type"] = "vccs"; r["value"] = v.siemens; }
          else {
            r["type"] = std::is_same_v<T, VoltageSource> ? "vsource" : "isource";
            r["value"] = v.amplitude.imag() == 0.0 ? json(v.amplitude.real())
                                                  : json::array({v.amplitude.real(), v.amplitude.imag()});
            r["ac"] = v.ac;
          }
        },
        e.value);
    if (!e.path_label.empty()) r["path_label"] = e.path_label;
    elements.push_back(std::move(r));
  }
  for (const MosSmallSignal& d : netlist.devices()) {
    json r{{"name", d.name},
           {"type", "mos"},
           {"nodes",
            {{"gate", netlist.node(d.gate).name},
             {"drain", netlist.node(d.drain).name},
             {"source", netlist.node(d.source).name},
             {"bulk", netlist.node(d.bulk).name}}},
           {"gm", d.gm},
           {"gmb", d.gmb},
           {"gds", d.gds},
           {"cdbj", d.cdbj},
           {"csbj", d.csbj}};
    if (!d.path_label.empty()) r["path_label"] = d.path_label;
    elements.push_back(std::move(r));
  }
  out["elements"] = std::move(elements);
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("{}: cannot open file", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ValidationError(fmt::format("{}:{}: {}", path.string(), line, e.what()));
  }
}

Netlist read_netlist(const std::filesystem::path& path) {
  try {
    return netlist_from_json(read_json_file(path));
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ValidationError(fmt::format("{}: {}", path.string(), msg));
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError(fmt::format("{}: cannot write", tmp.string()));
    out << contents;
    if (!out.flush()) throw ValidationError(fmt::format("{}: write failed", tmp.string()));
  }
  fs::rename(tmp, path);
}

} // namespace subnoise
