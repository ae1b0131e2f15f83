#include "subnoise/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

Complex AcSolution::at(std::string_view node) const {
  for (std::size_t i = 0; i < node_names.size(); ++i)
    if (node_names[i] == node) return node_voltage[i];
  throw ValidationError(fmt::format("unknown node '{}'", node));
}

std::map<std::string, Complex> AcSolution::as_map() const {
  std::map<std::string, Complex> out;
  for (std::size_t i = 0; i < node_names.size(); ++i) out.emplace(node_names[i], node_voltage[i]);
  return out;
}

namespace {

using SparseLu = Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>>;

// Unknowns with significant weight in the null space of a singular system.
std::vector<std::string> singular_suspects(const MnaSystem& sys, const SparseLu& lu) {
  std::vector<std::string> out;
  const auto dim = sys.matrix.rows();
  if (dim <= 3000) {
    Eigen::MatrixXcd dense(sys.matrix);
    Eigen::FullPivLU<Eigen::MatrixXcd> full(dense);
    full.setThreshold(1e-12);
    Eigen::MatrixXcd kernel = full.kernel();
    if (kernel.cols() > 0 && kernel.norm() > 0.0) {
      Eigen::VectorXd weight = kernel.rowwise().norm();
      const double peak = weight.maxCoeff();
      for (Eigen::Index i = 0; i < dim; ++i)
        if (weight[i] > 0.1 * peak) out.push_back(sys.unknowns[static_cast<std::size_t>(i)]);
      if (!out.empty()) return out;
    }
  }
  // Fall back on the zero pivot Eigen reports (1-based, in permuted order).
  const std::string msg = lu.lastErrorMessage();
  const auto pos = msg.find_last_of(' ');
  if (pos != std::string::npos) {
    try {
      const long col = std::stol(msg.substr(pos + 1)) - 1;
      if (col >= 0 && col < dim) {
        const auto& perm = lu.colsPermutation().indices();
        for (Eigen::Index i = 0; i < perm.size(); ++i)
          if (perm[i] == col) out.push_back(sys.unknowns[static_cast<std::size_t>(i)]);
      }
    } catch (const std::exception&) {
    }
  }
  return out;
}

AcSolution solve_system(const Netlist& expanded, const MnaSystem& sys, double frequency,
                        const SolveOptions& options) {
  AcSolution sol;
  sol.frequency = frequency;
  sol.node_names.reserve(expanded.node_count());
  for (const Node& n : expanded.nodes()) sol.node_names.push_back(n.name);
  sol.node_voltage.assign(expanded.node_count(), Complex{0.0});

  const double bnorm = sys.rhs.norm();
  if (bnorm == 0.0) return sol;

  SparseLu lu;
  lu.analyzePattern(sys.matrix);
  lu.factorize(sys.matrix);
  if (lu.info() != Eigen::Success) {
    auto suspects = singular_suspects(sys, lu);
    std::string list;
    for (const auto& s : suspects) list += (list.empty() ? "" : ", ") + s;
    throw SolverError(fmt::format("singular system at {} Hz; suspect unknowns: {{{}}}", frequency, list),
                      std::move(suspects));
  }
  Eigen::VectorXcd x = lu.solve(sys.rhs);
  Eigen::VectorXcd r = sys.rhs - sys.matrix * x;
  double rel = r.norm() / bnorm;
  for (int pass = 0; pass < 3 && rel > 0.1 * options.max_relative_residual; ++pass) {
    x += lu.solve(r);
    r = sys.rhs - sys.matrix * x;
    rel = r.norm() / bnorm;
  }
  if (!std::isfinite(rel) || rel > options.max_relative_residual)
    throw SolverError(fmt::format("residual {:.3e} exceeds tolerance at {} Hz", rel, frequency));
  sol.relative_residual = rel;

  for (NodeId i = 0; i < expanded.node_count(); ++i) {
    const std::size_t row = sys.node_row[i];
    if (row != MnaSystem::npos) sol.node_voltage[i] = x[static_cast<Eigen::Index>(row)];
  }
  return sol;
}

} // namespace

AcSolution ac_solve(const Netlist& netlist, double frequency, const SolveOptions& options) {
  const Netlist expanded = expand_devices(netlist);
  const MnaSystem sys = stamp(expanded, frequency, options.stamp);
  return solve_system(expanded, sys, frequency, options);
}

std::vector<AcSolution> ac_sweep(const Netlist& netlist, std::span<const double> frequencies,
                                 const SolveOptions& options) {
  const Netlist expanded = expand_devices(netlist);
  const std::size_t n = frequencies.size();
  std::vector<AcSolution> out(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < n; k += stride) {
      try {
        const MnaSystem sys = stamp(expanded, frequencies[k], options.stamp);
        out[k] = solve_system(expanded, sys, frequencies[k], options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const SolverError& e) {
      throw SolverError(fmt::format("at {} Hz: {}", frequencies[k], e.what()), e.suspects());
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("at {} Hz: {}", frequencies[k], e.what()));
    }
  }
  return out;
}

Complex TransferFunction::at(double f) const {
  if (frequency.empty()) throw ValidationError("empty transfer function");
  const double lo = frequency.front(), hi = frequency.back();
  const double tol = 1e-9;
  if (f < lo * (1.0 - tol) || f > hi * (1.0 + tol))
    throw ValidationError(fmt::format("frequency {} Hz outside transfer range [{}, {}] Hz", f, lo, hi));
  auto it = std::lower_bound(frequency.begin(), frequency.end(), f);
  std::size_t k = static_cast<std::size_t>(it - frequency.begin());
  if (k < frequency.size() && std::abs(frequency[k] - f) <= tol * std::abs(f)) return value[k];
  if (k > 0 && std::abs(frequency[k - 1] - f) <= tol * std::abs(f)) return value[k - 1];
  if (k == 0) return value.front();
  if (k >= frequency.size()) return value.back();

  const double f0 = frequency[k - 1], f1 = frequency[k];
  const Complex h0 = value[k - 1], h1 = value[k];
  if (f0 <= 0.0 || std::abs(h0) == 0.0 || std::abs(h1) == 0.0) {
    const double t = (f - f0) / (f1 - f0);
    return h0 + t * (h1 - h0);
  }
  const double t = std::log(f / f0) / std::log(f1 / f0);
  const double mag = std::exp(std::log(std::abs(h0)) + t * (std::log(std::abs(h1)) - std::log(std::abs(h0))));
  double dphi = std::arg(h1) - std::arg(h0);
  while (dphi > kPi) dphi -= 2.0 * kPi;
  while (dphi <= -kPi) dphi += 2.0 * kPi;
  return std::polar(mag, std::arg(h0) + t * dphi);
}

std::vector<TransferFunction> transfers(const Netlist& netlist, std::string_view source,
                                        std::span<const Probe> probes, std::span<const double> frequencies,
                                        Drive drive, const SolveOptions& solve) {
  if (frequencies.empty()) throw ValidationError("transfer: empty frequency list");
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    if (!(frequencies[k] >= 0.0)) throw ValidationError("transfer: negative frequency");
    if (k > 0 && !(frequencies[k] > frequencies[k - 1]))
      throw ValidationError("transfer: frequencies must be strictly increasing");
  }
  const NodeId src = netlist.require(source);
  const NodeId gnd = netlist.ground();
  if (src == gnd) throw ValidationError("transfer: source node is the ground reference");
  std::vector<std::pair<NodeId, std::optional<NodeId>>> ids;
  for (const Probe& p : probes) {
    std::optional<NodeId> ref;
    if (!p.reference.empty()) ref = netlist.require(p.reference);
    ids.emplace_back(netlist.require(p.target), ref);
  }

  // Rebuild with the excitation replaced.
  NetlistBuilder b;
  for (const Node& n : netlist.nodes()) b.node(n.name, n.kind);
  bool driven = false;
  for (Element e : netlist.elements()) {
    if (auto* v = std::get_if<VoltageSource>(&e.value)) {
      const auto& t = e.terminals;
      const bool at_source = (t[0] == src && t[1] == gnd) || (t[0] == gnd && t[1] == src);
      if (drive == Drive::voltage && at_source && !driven) {
        v->amplitude = t[0] == src ? 1.0 : -1.0;
        v->ac = true;
        driven = true;
      } else {
        v->ac = false;
      }
    } else if (auto* i = std::get_if<CurrentSource>(&e.value)) {
      i->ac = false;
    }
    b.add(std::move(e));
  }
  for (const MosSmallSignal& d : netlist.devices()) b.add(d);
  const std::string gname = netlist.node(gnd).name;
  if (!driven) {
    if (drive == Drive::voltage) b.vsource("__drive", source, gname, 1.0, true);
    else b.isource("__drive", source, gname, 1.0, true);
  }
  const Netlist driven_net = b.build();

  const auto sols = ac_sweep(driven_net, frequencies, solve);
  std::vector<TransferFunction> out(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    TransferFunction& tf = out[p];
    tf.source_node = std::string(source);
    tf.target_node = probes[p].target;
    tf.reference_node = probes[p].reference;
    tf.path_label = probes[p].label;
    tf.frequency.assign(frequencies.begin(), frequencies.end());
    tf.value.reserve(sols.size());
    for (const AcSolution& s : sols) {
      Complex v = s.node_voltage[ids[p].first];
      if (ids[p].second) v -= s.node_voltage[*ids[p].second];
      if (drive == Drive::voltage) {
        const Complex vs = s.node_voltage[src];
        if (std::abs(vs) == 0.0)
          throw SolverError(fmt::format("at {} Hz: source node '{}' has zero voltage", s.frequency, source));
        v /= vs;
      }
      tf.value.push_back(v);
    }
  }
  return out;
}

TransferFunction transfer(const Netlist& netlist, std::string_view source, std::string_view target,
                          std::span<const double> frequencies, const TransferOptions& options) {
  const Probe probe{std::string(target), options.reference_node, options.path_label};
  return std::move(transfers(netlist, source, std::span(&probe, 1), frequencies, options.drive, options.solve)[0]);
}

double point_to_point_resistance(const Netlist& input, std::string_view a, std::string_view b) {
  const Netlist netlist = expand_devices(input);
  const NodeId na = netlist.require(a);
  const NodeId nb = netlist.require(b);
  if (na == nb) throw ValidationError(fmt::format("point_to_point_resistance: '{}' given twice", a));

  const std::size_t n = netlist.node_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<const Element*> resistors;
  for (const Element& e : netlist.elements())
    if (std::holds_alternative<Resistor>(e.value)) {
      resistors.push_back(&e);
      parent[find(e.terminals[0])] = find(e.terminals[1]);
    }
  if (find(na) != find(nb))
    throw ValidationError(fmt::format("no resistive path between '{}' and '{}'", a, b));

  // Unknowns: every node of the component except b (held at 0 V).
  const std::size_t comp = find(na);
  std::vector<std::size_t> idx(n, static_cast<std::size_t>(-1));
  std::size_t dim = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (find(i) == comp && i != nb) idx[i] = dim++;

  std::vector<Eigen::Triplet<double>> trip;
  for (const Element* e : resistors) {
    const std::size_t p = e->terminals[0], q = e->terminals[1];
    if (find(p) != comp || p == q) continue;
    const double g = 1.0 / std::get<Resistor>(e->value).ohms;
    const std::size_t ip = idx[p], iq = idx[q];
    if (ip != static_cast<std::size_t>(-1)) trip.emplace_back(ip, ip, g);
    if (iq != static_cast<std::size_t>(-1)) trip.emplace_back(iq, iq, g);
    if (ip != static_cast<std::size_t>(-1) && iq != static_cast<std::size_t>(-1)) {
      trip.emplace_back(ip, iq, -g);
      trip.emplace_back(iq, ip, -g);
    }
  }
  Eigen::SparseMatrix<double> lap(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  lap.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(lap);
  if (ldlt.info() != Eigen::Success) throw SolverError("resistive network factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  rhs[static_cast<Eigen::Index>(idx[na])] = 1.0;
  Eigen::VectorXd v = ldlt.solve(rhs);
  return v[static_cast<Eigen::Index>(idx[na])];
}

std::vector<double> log_sweep(double start, double stop, int points_per_decade) {
  if (!(start > 0.0) || !(stop >= start) || points_per_decade < 1)
    throw ValidationError(fmt::format("invalid sweep [{}, {}] at {} points/decade", start, stop, points_per_decade));
  std::vector<double> out;
  const double decades = std::log10(stop / start);
  const int steps = static_cast<int>(std::floor(decades * points_per_decade + 1e-9));
  for (int k = 0; k <= steps; ++k) out.push_back(start * std::pow(10.0, static_cast<double>(k) / points_per_decade));
  if (out.back() < stop * (1.0 - 1e-9)) out.push_back(stop);
  else out.back() = stop;
  return out;
}

std::string transfer_to_csv(const TransferFunction& tf) {
  std::string out = "frequency_hz,re,im,mag_db,phase_deg\n";
  for (std::size_t k = 0; k < tf.size(); ++k) {
    const Complex h = tf.value[k];
    const double mag = std::abs(h);
    const double db = mag > 0.0 ? 20.0 * std::log10(mag) : -HUGE_VAL;
    out += fmt::format("{:.9e},{:.12e},{:.12e},{:.6f},{:.6f}\n", tf.frequency[k], h.real(), h.imag(), db,
                       std::arg(h) * 180.0 / kPi);
  }
  return out;
}

} // namespace subnoise
