#include "subnoise/netlist.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::circuit: return "circuit";
    case NodeKind::substrate_mesh: return "substrate-mesh";
    case NodeKind::interface: return "interface";
    case NodeKind::ground_reference: return "ground-reference";
  }
  return "circuit";
}

NodeKind node_kind_from_string(std::string_view text) {
  if (text == "circuit") return NodeKind::circuit;
  if (text == "substrate-mesh") return NodeKind::substrate_mesh;
  if (text == "interface") return NodeKind::interface;
  if (text == "ground-reference") return NodeKind::ground_reference;
  throw ValidationError(fmt::format("unknown node kind '{}'", text));
}

std::optional<NodeId> Netlist::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId Netlist::require(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ValidationError(fmt::format("unknown node '{}'", name));
}

NetlistBuilder::NetlistBuilder(const Netlist& base) : net_(base) {
  has_ground_ = !net_.nodes_.empty() &&
                net_.nodes_.at(net_.ground_).kind == NodeKind::ground_reference;
}

std::optional<NodeId> NetlistBuilder::find(std::string_view name) const { return net_.find(name); }

NodeId NetlistBuilder::node(std::string_view name, NodeKind kind) {
  if (name.empty()) throw ValidationError("empty node name");
  if (auto id = net_.find(name)) {
    if (kind == NodeKind::ground_reference) set_kind(*id, kind);
    return *id;
  }
  const NodeId id = net_.nodes_.size();
  net_.nodes_.push_back(Node{std::string(name), NodeKind::circuit});
  net_.index_.emplace(std::string(name), id);
  set_kind(id, kind);
  return id;
}

void NetlistBuilder::set_kind(NodeId id, NodeKind kind) {
  Node& n = net_.nodes_.at(id);
  if (kind == NodeKind::ground_reference && n.kind != NodeKind::ground_reference) {
    if (has_ground_)
      throw ValidationError(fmt::format("duplicate ground: '{}' and '{}'",
                                        net_.nodes_.at(net_.ground_).name, n.name));
    has_ground_ = true;
    net_.ground_ = id;
  } else if (n.kind == NodeKind::ground_reference && kind != NodeKind::ground_reference) {
    // Ground stays ground.
    return;
  }
  n.kind = kind;
}

NetlistBuilder& NetlistBuilder::add(Element element) {
  for (NodeId t : element.terminals)
    if (t >= net_.nodes_.size())
      throw ValidationError(fmt::format("element '{}' references unknown node id {}", element.name, t));
  net_.elements_.push_back(std::move(element));
  return *this;
}

NetlistBuilder& NetlistBuilder::add(MosSmallSignal device) {
  for (NodeId t : {device.gate, device.drain, device.source, device.bulk})
    if (t >= net_.nodes_.size())
      throw ValidationError(fmt::format("device '{}' references unknown node id {}", device.name, t));
  net_.devices_.push_back(std::move(device));
  return *this;
}

NetlistBuilder& NetlistBuilder::resistor(std::string name, std::string_view a, std::string_view b,
                                         double ohms, std::string label) {
  return add(Element{std::move(name), Resistor{ohms}, {node(a), node(b)}, std::move(label)});
}

NetlistBuilder& NetlistBuilder::capacitor(std::string name, std::string_view a, std::string_view b,
                                          double farads, std::string label) {
  return add(Element{std::move(name), Capacitor{farads}, {node(a), node(b)}, std::move(label)});
}

NetlistBuilder& NetlistBuilder::inductor(std::string name, std::string_view a, std::string_view b,
                                         double henries, std::string label) {
  return add(Element{std::move(name), Inductor{henries}, {node(a), node(b)}, std::move(label)});
}

NetlistBuilder& NetlistBuilder::vccs(std::string name, std::string_view ctrl_p, std::string_view ctrl_n,
                                     std::string_view out_p, std::string_view out_n, double siemens,
                                     std::string label) {
  return add(Element{std::move(name), Vccs{siemens},
                     {node(ctrl_p), node(ctrl_n), node(out_p), node(out_n)}, std::move(label)});
}

NetlistBuilder& NetlistBuilder::vsource(std::string name, std::string_view p, std::string_view n,
                                        Complex amplitude, bool ac) {
  return add(Element{std::move(name), VoltageSource{amplitude, ac}, {node(p), node(n)}, {}});
}

NetlistBuilder& NetlistBuilder::isource(std::string name, std::string_view p, std::string_view n,
                                        Complex amplitude, bool ac) {
  return add(Element{std::move(name), CurrentSource{amplitude, ac}, {node(p), node(n)}, {}});
}

NetlistBuilder& NetlistBuilder::merge(const Netlist& other) {
  std::vector<NodeId> remap(other.node_count());
  for (NodeId i = 0; i < other.node_count(); ++i) {
    const Node& n = other.node(i);
    remap[i] = node(n.name, n.kind == NodeKind::ground_reference ? NodeKind::ground_reference
                                                                  : NodeKind::circuit);
    Node& mine = net_.nodes_[remap[i]];
    if (mine.kind == NodeKind::circuit && n.kind != NodeKind::circuit) mine.kind = n.kind;
  }
  for (Element e : other.elements()) {
    for (NodeId& t : e.terminals) t = remap[t];
    add(std::move(e));
  }
  for (MosSmallSignal d : other.devices()) {
    d.gate = remap[d.gate];
    d.drain = remap[d.drain];
    d.source = remap[d.source];
    d.bulk = remap[d.bulk];
    add(std::move(d));
  }
  return *this;
}

namespace {

void check_positive(const std::string& element, const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(fmt::format("element '{}': {} must be finite and > 0 (got {})", element, what, v));
}

} // namespace

Netlist NetlistBuilder::build() const {
  if (!has_ground_) throw ValidationError("netlist has no ground-reference node");
  std::unordered_set<std::string_view> names;
  for (const Element& e : net_.elements_) {
    if (!names.insert(e.name).second) throw ValidationError(fmt::format("duplicate element name '{}'", e.name));
    const std::size_t expected = std::holds_alternative<Vccs>(e.value) ? 4 : 2;
    if (e.terminals.size() != expected)
      throw ValidationError(fmt::format("element '{}' needs {} terminals, has {}", e.name, expected,
                                        e.terminals.size()));
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) check_positive(e.name, "resistance", v.ohms);
          else if constexpr (std::is_same_v<T, Capacitor>) check_positive(e.name, "capacitance", v.farads);
          else if constexpr (std::is_same_v<T, Inductor>) check_positive(e.name, "inductance", v.henries);
          else if constexpr (std::is_same_v<T, Vccs>) {
            if (!std::isfinite(v.siemens))
              throw ValidationError(fmt::format("element '{}': non-finite transconductance", e.name));
          }
        },
        e.value);
  }
  for (const MosSmallSignal& d : net_.devices_) {
    for (double g : {d.gm, d.gmb, d.gds, d.cdbj, d.csbj})
      if (!(g >= 0.0) || !std::isfinite(g))
        throw ValidationError(fmt::format("device '{}': parameters must be finite and >= 0", d.name));
  }
  return net_;
}

Netlist expand_devices(const Netlist& netlist) {
  if (netlist.devices().empty()) return netlist;

  // Rebuild without devices, then append each expansion.
  NetlistBuilder b;
  for (const Node& n : netlist.nodes()) b.node(n.name, n.kind);
  for (const Element& e : netlist.elements()) b.add(e);

  for (const MosSmallSignal& d : netlist.devices()) {
    const auto& label = d.path_label;
    b.add(Element{d.name + ".gm", Vccs{d.gm}, {d.gate, d.source, d.drain, d.source}, label});
    b.add(Element{d.name + ".gmb", Vccs{d.gmb}, {d.bulk, d.source, d.drain, d.source}, label});
    // Zero gds or zero junction caps still expand; the element is simply
    // left out of the electrical model if it would be an open circuit.
    if (d.gds > 0.0) b.add(Element{d.name + ".rds", Resistor{1.0 / d.gds}, {d.drain, d.source}, label});
    else b.add(Element{d.name + ".rds", Vccs{0.0}, {d.drain, d.source, d.drain, d.source}, label});
    if (d.cdbj > 0.0) b.add(Element{d.name + ".cdbj", Capacitor{d.cdbj}, {d.drain, d.bulk}, label});
    else b.add(Element{d.name + ".cdbj", Vccs{0.0}, {d.drain, d.bulk, d.drain, d.bulk}, label});
    if (d.csbj > 0.0) b.add(Element{d.name + ".csbj", Capacitor{d.csbj}, {d.source, d.bulk}, label});
    else b.add(Element{d.name + ".csbj", Vccs{0.0}, {d.source, d.bulk, d.source, d.bulk}, label});
  }
  return b.build();
}

std::vector<bool> dc_floating_nodes(const Netlist& netlist) {
  const std::size_t n = netlist.node_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };

  for (const Element& e : netlist.elements()) {
    const bool conductive = std::holds_alternative<Resistor>(e.value) ||
                            std::holds_alternative<Inductor>(e.value) ||
                            std::holds_alternative<VoltageSource>(e.value);
    if (conductive) unite(e.terminals[0], e.terminals[1]);
  }
  for (const MosSmallSignal& d : netlist.devices())
    if (d.gds > 0.0) unite(d.drain, d.source);

  std::vector<bool> floating(n);
  const std::size_t g = find(netlist.ground());
  for (std::size_t i = 0; i < n; ++i) floating[i] = find(i) != g;
  return floating;
}

bool is_passive_rc(const Netlist& netlist) {
  if (!netlist.devices().empty()) return false;
  for (const Element& e : netlist.elements()) {
    if (std::holds_alternative<Vccs>(e.value) || std::holds_alternative<Inductor>(e.value)) return false;
  }
  return true;
}

MnaSystem stamp(const Netlist& input, double frequency, const StampOptions& options) {
  if (!(frequency >= 0.0) || !std::isfinite(frequency))
    throw ValidationError(fmt::format("stamp frequency must be >= 0 (got {})", frequency));

  const Netlist netlist = expand_devices(input);
  const double omega = 2.0 * kPi * frequency;
  const Complex j{0.0, 1.0};

  MnaSystem sys;
  const std::size_t n_nodes = netlist.node_count();
  sys.node_row.assign(n_nodes, MnaSystem::npos);
  for (NodeId i = 0; i < n_nodes; ++i) {
    if (i == netlist.ground()) continue;
    sys.node_row[i] = sys.unknowns.size();
    sys.unknowns.push_back(netlist.node(i).name);
  }
  sys.node_unknowns = sys.unknowns.size();
  for (const Element& e : netlist.elements()) {
    if (std::holds_alternative<Inductor>(e.value) || std::holds_alternative<VoltageSource>(e.value))
      sys.unknowns.push_back("I(" + e.name + ")");
  }

  const std::size_t dim = sys.unknowns.size();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(netlist.elements().size() * 4 + n_nodes);
  sys.rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));

  auto row = [&](NodeId id) { return sys.node_row[id]; };
  auto put = [&](std::size_t r, std::size_t c, Complex v) {
    if (r != MnaSystem::npos && c != MnaSystem::npos)
      trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  };
  auto admittance = [&](NodeId a, NodeId b, Complex y) {
    put(row(a), row(a), y);
    put(row(b), row(b), y);
    put(row(a), row(b), -y);
    put(row(b), row(a), -y);
  };
  auto add_rhs = [&](NodeId id, Complex v) {
    if (row(id) != MnaSystem::npos) sys.rhs[static_cast<Eigen::Index>(row(id))] += v;
  };

  std::size_t branch = sys.node_unknowns;
  for (const Element& e : netlist.elements()) {
    const auto& t = e.terminals;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) {
            admittance(t[0], t[1], 1.0 / v.ohms);
          } else if constexpr (std::is_same_v<T, Capacitor>) {
            admittance(t[0], t[1], j * omega * v.farads);
          } else if constexpr (std::is_same_v<T, Inductor>) {
            // Branch current flows a -> b through the inductor.
            put(row(t[0]), branch, 1.0);
            put(row(t[1]), branch, -1.0);
            put(branch, row(t[0]), 1.0);
            put(branch, row(t[1]), -1.0);
            trip.emplace_back(static_cast<int>(branch), static_cast<int>(branch), -j * omega * v.henries);
            ++branch;
          } else if constexpr (std::is_same_v<T, Vccs>) {
            const NodeId cp = t[0], cn = t[1], op = t[2], on = t[3];
            put(row(op), row(cp), v.siemens);
            put(row(op), row(cn), -v.siemens);
            put(row(on), row(cp), -v.siemens);
            put(row(on), row(cn), v.siemens);
          } else if constexpr (std::is_same_v<T, VoltageSource>) {
            put(row(t[0]), branch, 1.0);
            put(row(t[1]), branch, -1.0);
            put(branch, row(t[0]), 1.0);
            put(branch, row(t[1]), -1.0);
            // Keep the diagonal in the pattern for the sparse ordering.
            trip.emplace_back(static_cast<int>(branch), static_cast<int>(branch), 0.0);
            sys.rhs[static_cast<Eigen::Index>(branch)] = v.ac ? v.amplitude : Complex{0.0};
            ++branch;
          } else if constexpr (std::is_same_v<T, CurrentSource>) {
            if (v.ac) {
              // Current leaves the + node into the external network.
              add_rhs(t[0], v.amplitude);
              add_rhs(t[1], -v.amplitude);
            }
          }
        },
        e.value);
  }

  // A node with no element on it would leave an all-zero row and column.
  std::vector<int> incidence(n_nodes, 0);
  for (const Element& e : netlist.elements())
    for (NodeId t : e.terminals) ++incidence[t];
  for (NodeId i = 0; i < n_nodes; ++i)
    if (i != netlist.ground() && incidence[i] == 0)
      throw ValidationError(fmt::format("disconnected node '{}'", netlist.node(i).name));

  const std::vector<bool> floating = dc_floating_nodes(netlist);
  for (NodeId i = 0; i < n_nodes; ++i)
    if (floating[i] && options.leak_conductance > 0.0) put(row(i), row(i), options.leak_conductance);

  sys.matrix.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  return sys;
}

} // namespace subnoise
