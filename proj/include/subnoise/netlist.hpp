#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Sparse>

namespace subnoise {

using Complex = std::complex<double>;
using NodeId = std::size_t;

enum class NodeKind { circuit, substrate_mesh, interface, ground_reference };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view text);

struct Node {
  std::string name;
  NodeKind kind = NodeKind::circuit;
};

struct Resistor { double ohms; };
struct Capacitor { double farads; };
struct Inductor { double henries; };
// Current g * (v[ctrl+] - v[ctrl-]) flows from out+ through the source to out-.
struct Vccs { double siemens; };
struct VoltageSource { Complex amplitude{1.0, 0.0}; bool ac = true; };
struct CurrentSource { Complex amplitude{1.0, 0.0}; bool ac = true; };

using ElementValue = std::variant<Resistor, Capacitor, Inductor, Vccs, VoltageSource, CurrentSource>;

// Two terminals for everything except Vccs, which takes
// {ctrl+, ctrl-, out+, out-}. Sources are oriented {+, -}; a current source
// pushes its current out of the + node through the external circuit.
struct Element {
  std::string name;
  ElementValue value;
  std::vector<NodeId> terminals;
  std::string path_label;
};

// Small-signal MOS: expands into gm and gmb VCCSs, 1/gds and two junction caps.
struct MosSmallSignal {
  std::string name;
  double gm = 0.0;
  double gmb = 0.0;
  double gds = 0.0;
  double cdbj = 0.0;
  double csbj = 0.0;
  NodeId gate = 0;
  NodeId drain = 0;
  NodeId source = 0;
  NodeId bulk = 0;
  std::string path_label;
};

// Immutable electrical network. Construct through NetlistBuilder.
class Netlist {
public:
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<MosSmallSignal>& devices() const { return devices_; }

  NodeId ground() const { return ground_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::optional<NodeId> find(std::string_view name) const;
  NodeId require(std::string_view name) const;

  std::size_t node_count() const { return nodes_.size(); }

private:
  friend class NetlistBuilder;

  std::vector<Node> nodes_;
  std::vector<Element> elements_;
  std::vector<MosSmallSignal> devices_;
  std::unordered_map<std::string, NodeId> index_;
  NodeId ground_ = 0;
};

class NetlistBuilder {
public:
  NetlistBuilder() = default;
  // Starts from an existing netlist so that pieces can be appended.
  explicit NetlistBuilder(const Netlist& base);

  // Returns the id of `name`, creating it with `kind` if absent. Asking for
  // ground_reference on a second distinct name is a validation error.
  NodeId node(std::string_view name, NodeKind kind = NodeKind::circuit);
  std::optional<NodeId> find(std::string_view name) const;
  void set_kind(NodeId id, NodeKind kind);

  NetlistBuilder& add(Element element);
  NetlistBuilder& add(MosSmallSignal device);

  NetlistBuilder& resistor(std::string name, std::string_view a, std::string_view b, double ohms,
                           std::string label = {});
  NetlistBuilder& capacitor(std::string name, std::string_view a, std::string_view b, double farads,
                            std::string label = {});
  NetlistBuilder& inductor(std::string name, std::string_view a, std::string_view b, double henries,
                           std::string label = {});
  NetlistBuilder& vccs(std::string name, std::string_view ctrl_p, std::string_view ctrl_n,
                       std::string_view out_p, std::string_view out_n, double siemens,
                       std::string label = {});
  NetlistBuilder& vsource(std::string name, std::string_view p, std::string_view n,
                          Complex amplitude = 1.0, bool ac = true);
  NetlistBuilder& isource(std::string name, std::string_view p, std::string_view n,
                          Complex amplitude = 1.0, bool ac = true);

  // Copies every node and element of `other` (names must not collide).
  NetlistBuilder& merge(const Netlist& other);

  const std::vector<Node>& nodes() const { return net_.nodes_; }

  // Validates and freezes. Requires exactly one ground_reference node.
  Netlist build() const;

private:
  Netlist net_;
  bool has_ground_ = false;
};

// Replaces every MosSmallSignal with its five-element expansion. The
// expansion elements are named <device>.gm, .gmb, .rds, .cdbj, .csbj.
Netlist expand_devices(const Netlist& netlist);

struct StampOptions {
  // Conductance to ground added on nodes with no DC path to ground.
  double leak_conductance = 1e-12;
};

// Modified nodal analysis system. Unknowns are the non-ground node voltages
// followed by one branch current per inductor and voltage source.
struct MnaSystem {
  Eigen::SparseMatrix<Complex> matrix;
  Eigen::VectorXcd rhs;
  std::vector<std::string> unknowns;
  // Row/column of each node; ground maps to npos.
  std::vector<std::size_t> node_row;
  std::size_t node_unknowns = 0;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Stamps at `frequency` (Hz). AC-flagged sources contribute their amplitude;
// all other independent sources are zeroed (V shorts, I opens).
MnaSystem stamp(const Netlist& netlist, double frequency, const StampOptions& options = {});

// Nodes that have no DC-conductive path to ground (resistors, inductors,
// voltage sources). These receive the leak conductance.
std::vector<bool> dc_floating_nodes(const Netlist& netlist);

bool is_passive_rc(const Netlist& netlist);

} // namespace subnoise
