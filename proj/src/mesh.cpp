#include "subnoise/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "subnoise/error.hpp"

namespace subnoise {

bool Rect::contains(const Rect& r, double tol) const {
  return r.x0 >= x0 - tol && r.y0 >= y0 - tol && r.x1 <= x1 + tol && r.y1 <= y1 + tol;
}

double Rect::overlap_area(const Rect& r) const {
  const double w = std::min(x1, r.x1) - std::max(x0, r.x0);
  const double h = std::min(y1, r.y1) - std::max(y0, r.y0);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

std::string well_plate_node(const SurfaceFeature& well) { return well.name + ".plate"; }

std::vector<std::string> feature_ports(std::span<const SurfaceFeature> features) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto push = [&](const std::string& n) {
    if (seen.insert(n).second) out.push_back(n);
  };
  for (const auto& f : features) {
    push(f.node);
    if (f.kind == FeatureKind::well) push(well_plate_node(f));
  }
  return out;
}

namespace {

// Interior points and `b` for [a, b]: geometric growth from h0 at each graded
// end up to `pitch`, uniform in between.
std::vector<double> graded_split(double a, double b, double pitch, bool left, bool right, double h0) {
  auto ramp = [&](bool on) {
    std::vector<double> h;
    if (!on) return h;
    for (double x = h0; x < pitch; x *= kEdgeGrowth) h.push_back(x);
    return h;
  };
  std::vector<double> hl = ramp(left), hr = ramp(right);
  const double len = b - a;
  auto total = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t;
  };
  // Short intervals: drop the coarsest ramp cells until both ramps fit.
  while (total(hl) + total(hr) > len && (!hl.empty() || !hr.empty())) {
    if (hl.size() >= hr.size()) hl.pop_back();
    else hr.pop_back();
  }
  const double rest = len - total(hl) - total(hr);
  const int n = rest > 1e-9 * len ? std::max(1, static_cast<int>(std::ceil(rest / pitch - 1e-9))) : 0;
  std::vector<double> cells = hl;
  for (int k = 0; k < n; ++k) cells.push_back(rest / n);
  if (n == 0 && !cells.empty()) cells.back() += rest;
  cells.insert(cells.end(), hr.rbegin(), hr.rend());
  std::vector<double> out;
  double x = a;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    x += cells[k];
    out.push_back(k + 1 == cells.size() ? b : x);
  }
  return out;
}

} // namespace

std::vector<double> axis_grid(double lo, double hi, int cells,
                              std::span<const std::pair<double, double>> refined_spans,
                              std::span<const double> factors, std::span<const double> breakpoints,
                              double edge_refinement) {
  if (!(hi > lo)) throw ValidationError("degenerate die extent");
  if (!(edge_refinement >= 1.0)) throw ValidationError("edge_refinement must be >= 1");
  const double base = (hi - lo) / cells;
  const double merge_tol = 1e-6 * base;

  std::vector<double> pts{lo, hi};
  for (double b : breakpoints)
    if (b > lo && b < hi) pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  std::vector<double> uniq;
  for (double p : pts)
    if (uniq.empty() || p - uniq.back() > merge_tol) uniq.push_back(p);
  uniq.back() = hi;
  auto is_edge = [&](double x) {
    for (double b : breakpoints)
      if (std::abs(b - x) <= merge_tol) return true;
    return false;
  };

  std::vector<double> grid{lo};
  for (std::size_t s = 0; s + 1 < uniq.size(); ++s) {
    const double a = uniq[s], b = uniq[s + 1];
    const double mid = 0.5 * (a + b);
    double factor = 1.0;
    for (std::size_t r = 0; r < refined_spans.size(); ++r)
      if (mid > refined_spans[r].first && mid < refined_spans[r].second) factor = std::max(factor, factors[r]);
    const double pitch = base / factor;
    if (edge_refinement > 1.0 && (is_edge(a) || is_edge(b))) {
      for (double x : graded_split(a, b, pitch, is_edge(a), is_edge(b), pitch / edge_refinement)) grid.push_back(x);
      continue;
    }
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / pitch - 1e-9)));
    for (int k = 1; k <= n; ++k) grid.push_back(k == n ? b : a + (b - a) * k / n);
  }
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw ValidationError("degenerate mesh cell (zero extent)");
  return grid;
}

namespace {

struct Layer {
  double rho;
  double thickness;
};

// Cell heights per layer, top-down; returns (height, resistivity) per cell.
std::vector<std::pair<double, double>> z_cells(const SubstrateStack& stack, int nz, double grading) {
  std::vector<Layer> layers;
  for (const auto& e : stack.epi) layers.push_back({e.resistivity, e.thickness});
  layers.push_back({stack.resistivity, stack.thickness});
  double total = 0.0;
  for (const auto& l : layers) total += l.thickness;

  std::vector<std::pair<double, double>> out;
  for (const auto& l : layers) {
    const int n = std::max(1, static_cast<int>(std::lround(nz * l.thickness / total)));
    // Geometric series h, h*r, ..., h*r^(n-1) = h*grading, summing to the layer thickness.
    const double r = n > 1 ? std::pow(grading, 1.0 / (n - 1)) : 1.0;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += std::pow(r, k);
    const double h0 = l.thickness / sum;
    for (int k = 0; k < n; ++k) out.emplace_back(h0 * std::pow(r, k), l.rho);
  }
  return out;
}

std::string face_name(Face f) {
  switch (f) {
    case Face::top: return "top";
    case Face::xmin: return "xmin";
    case Face::xmax: return "xmax";
    case Face::ymin: return "ymin";
    case Face::ymax: return "ymax";
  }
  return "top";
}

} // namespace

Netlist build_mesh(const SubstrateStack& stack, std::span<const SurfaceFeature> features, const Rect& die,
                   const MeshSpec& spec, std::string_view ground) {
  if (spec.nx < 2 || spec.ny < 2 || spec.nz < 2) throw ValidationError("mesh cell counts must be >= 2");
  if (!(stack.resistivity > 0.0) || !(stack.thickness > 0.0))
    throw ValidationError("substrate resistivity and thickness must be > 0");
  for (const auto& e : stack.epi)
    if (!(e.resistivity > 0.0) || !(e.thickness > 0.0)) throw ValidationError("epi layers must be > 0");
  if (!(spec.z_grading > 0.0)) throw ValidationError("z_grading must be > 0");
  if (!(spec.conductance_scale > 0.0)) throw ValidationError("conductance_scale must be > 0");
  if (!(die.width() > 0.0) || !(die.height() > 0.0)) throw ValidationError("degenerate die outline");

  const double tol = 1e-9 * std::max(die.width(), die.height());
  std::set<std::string> names;
  for (const auto& f : features) {
    if (!names.insert(f.name).second) throw ValidationError(fmt::format("duplicate feature name '{}'", f.name));
    if (f.node.empty()) throw ValidationError(fmt::format("feature '{}' has no node", f.name));
    if (f.face != Face::top) {
      if (f.kind == FeatureKind::well) throw ValidationError(fmt::format("well '{}' must be on the top face", f.name));
      continue;
    }
    if (!(f.rect.width() > 0.0) || !(f.rect.height() > 0.0))
      throw ValidationError(fmt::format("feature '{}' has a degenerate rectangle", f.name));
    if (!die.contains(f.rect, tol)) throw ValidationError(fmt::format("feature '{}' lies outside the die", f.name));
    if (f.kind == FeatureKind::well && !(f.cap_density > 0.0))
      throw ValidationError(fmt::format("well '{}' needs a positive cap_density", f.name));
  }
  for (std::size_t a = 0; a < features.size(); ++a)
    for (std::size_t b = a + 1; b < features.size(); ++b) {
      const auto &fa = features[a], &fb = features[b];
      if (fa.face != fb.face) continue;
      const bool clash = fa.face == Face::top ? fa.rect.overlap_area(fb.rect) > 0.0 : true;
      if (clash) throw ValidationError(fmt::format("features '{}' and '{}' overlap", fa.name, fb.name));
    }

  // Lateral grid with feature edges as grid lines.
  std::vector<double> bx, by;
  std::vector<std::pair<double, double>> rx, ry;
  std::vector<double> factor;
  for (const auto& f : features) {
    if (f.face != Face::top) continue;
    bx.insert(bx.end(), {f.rect.x0, f.rect.x1});
    by.insert(by.end(), {f.rect.y0, f.rect.y1});
    if (auto it = spec.refinement.find(f.name); it != spec.refinement.end()) {
      if (!(it->second >= 1.0)) throw ValidationError(fmt::format("refinement for '{}' must be >= 1", f.name));
      rx.emplace_back(f.rect.x0, f.rect.x1);
      ry.emplace_back(f.rect.y0, f.rect.y1);
      factor.push_back(it->second);
    }
  }
  for (const auto& [name, _] : spec.refinement)
    if (!names.count(name)) throw ValidationError(fmt::format("refinement names unknown feature '{}'", name));

  const std::vector<double> gx = axis_grid(die.x0, die.x1, spec.nx, rx, factor, bx, spec.edge_refinement);
  const std::vector<double> gy = axis_grid(die.y0, die.y1, spec.ny, ry, factor, by, spec.edge_refinement);
  const auto gz = z_cells(stack, spec.nz, spec.z_grading);

  const std::size_t nx = gx.size() - 1, ny = gy.size() - 1, nz = gz.size();
  auto dx = [&](std::size_t i) { return gx[i + 1] - gx[i]; };
  auto dy = [&](std::size_t j) { return gy[j + 1] - gy[j]; };
  const double s = spec.conductance_scale;

  NetlistBuilder b;
  const std::string gname(ground);
  b.node(gname, NodeKind::ground_reference);
  auto cell = [](std::size_t i, std::size_t j, std::size_t k) { return fmt::format("sub[{},{},{}]", i, j, k); };
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) b.node(cell(i, j, k), NodeKind::substrate_mesh);

  std::size_t count = 0;
  auto conductance = [&](const std::string& a, const std::string& c, double g) {
    b.resistor(fmt::format("Rsub{}", count++), a, c, 1.0 / (g * s));
  };

  for (std::size_t k = 0; k < nz; ++k) {
    const double hz = gz[k].first, rho = gz[k].second;
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        if (i + 1 < nx)
          conductance(cell(i, j, k), cell(i + 1, j, k), dy(j) * hz / (rho * 0.5 * (dx(i) + dx(i + 1))));
        if (j + 1 < ny)
          conductance(cell(i, j, k), cell(i, j + 1, k), dx(i) * hz / (rho * 0.5 * (dy(j) + dy(j + 1))));
        if (k + 1 < nz) {
          const double series = 0.5 * hz * rho + 0.5 * gz[k + 1].first * gz[k + 1].second;
          conductance(cell(i, j, k), cell(i, j, k + 1), dx(i) * dy(j) / series);
        }
      }
  }

  if (stack.backside_contact) {
    const std::size_t k = nz - 1;
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        conductance(cell(i, j, k), gname, dx(i) * dy(j) / (0.5 * gz[k].first * gz[k].second));
  }

  for (const auto& f : features) {
    std::string terminal = f.node;
    if (f.kind == FeatureKind::well) {
      terminal = well_plate_node(f);
      b.node(terminal, NodeKind::interface);
      b.node(f.node);
      b.capacitor(f.name + ".cj", terminal, f.node, f.cap_density * f.rect.area(), f.path_label);
    } else {
      b.node(terminal, terminal == gname ? NodeKind::ground_reference : NodeKind::interface);
    }

    switch (f.face) {
      case Face::top: {
        const double hz = gz[0].first, rho = gz[0].second;
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t i = 0; i < nx; ++i) {
            const double a = f.rect.overlap_area(Rect{gx[i], gy[j], gx[i + 1], gy[j + 1]});
            if (a > 0.0) conductance(cell(i, j, 0), terminal, a / (0.5 * hz * rho));
          }
        break;
      }
      case Face::xmin:
      case Face::xmax: {
        const std::size_t i = f.face == Face::xmin ? 0 : nx - 1;
        for (std::size_t k = 0; k < nz; ++k)
          for (std::size_t j = 0; j < ny; ++j)
            conductance(cell(i, j, k), terminal, dy(j) * gz[k].first / (0.5 * dx(i) * gz[k].second));
        break;
      }
      case Face::ymin:
      case Face::ymax: {
        const std::size_t j = f.face == Face::ymin ? 0 : ny - 1;
        for (std::size_t k = 0; k < nz; ++k)
          for (std::size_t i = 0; i < nx; ++i)
            conductance(cell(i, j, k), terminal, dx(i) * gz[k].first / (0.5 * dy(j) * gz[k].second));
        break;
      }
    }
    (void)face_name;
  }
  return b.build();
}

Netlist reduce_to_ports(const Netlist& mesh, std::span<const std::string> ports) {
  if (ports.size() < 2) throw ValidationError("reduce_to_ports needs at least two ports");
  const std::size_t n = mesh.node_count();
  std::vector<bool> keep(n, false);
  for (const auto& p : ports) {
    auto id = mesh.find(p);
    if (!id) throw ValidationError(fmt::format("port '{}' not in mesh", p));
    keep[*id] = true;
  }
  keep[mesh.ground()] = true;

  std::vector<bool> resistive(n, false);
  for (const Element& e : mesh.elements()) {
    if (std::holds_alternative<Resistor>(e.value)) {
      for (NodeId t : e.terminals) resistive[t] = true;
    } else {
      for (NodeId t : e.terminals) keep[t] = true;
    }
  }
  for (const MosSmallSignal& d : mesh.devices())
    for (NodeId t : {d.gate, d.drain, d.source, d.bulk}) keep[t] = true;

  // Internal nodes are eliminated; a node that is neither kept nor resistive
  // cannot exist (it would carry no element at all) and is dropped.
  std::vector<std::size_t> kidx(n, static_cast<std::size_t>(-1)), iidx(n, static_cast<std::size_t>(-1));
  std::vector<NodeId> kept, internal;
  for (NodeId i = 0; i < n; ++i) {
    if (keep[i]) {
      kidx[i] = kept.size();
      kept.push_back(i);
    } else if (resistive[i]) {
      iidx[i] = internal.size();
      internal.push_back(i);
    }
  }

  // Internal islands with no path to a kept node carry no current; drop them.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Element& e : mesh.elements())
    if (std::holds_alternative<Resistor>(e.value)) parent[find(e.terminals[0])] = find(e.terminals[1]);
  std::vector<bool> anchored(n, false);
  for (NodeId k : kept) anchored[find(k)] = true;
  {
    std::vector<NodeId> live;
    for (NodeId i : internal)
      if (anchored[find(i)]) live.push_back(i);
    internal.swap(live);
    std::fill(iidx.begin(), iidx.end(), static_cast<std::size_t>(-1));
    for (std::size_t k = 0; k < internal.size(); ++k) iidx[internal[k]] = k;
  }

  const auto nk = static_cast<Eigen::Index>(kept.size());
  const auto ni = static_cast<Eigen::Index>(internal.size());
  Eigen::MatrixXd gkk = Eigen::MatrixXd::Zero(nk, nk);
  Eigen::SparseMatrix<double> gii(ni, ni), gik(ni, nk);
  std::vector<Eigen::Triplet<double>> tii, tik;
  const auto none = static_cast<std::size_t>(-1);
  for (const Element& e : mesh.elements()) {
    if (!std::holds_alternative<Resistor>(e.value)) continue;
    const NodeId p = e.terminals[0], q = e.terminals[1];
    if (p == q) continue;
    const double g = 1.0 / std::get<Resistor>(e.value).ohms;
    auto diag = [&](NodeId a) {
      if (kidx[a] != none) gkk(static_cast<Eigen::Index>(kidx[a]), static_cast<Eigen::Index>(kidx[a])) += g;
      else if (iidx[a] != none) tii.emplace_back(iidx[a], iidx[a], g);
    };
    auto off = [&](NodeId a, NodeId c) {
      if (kidx[a] != none && kidx[c] != none)
        gkk(static_cast<Eigen::Index>(kidx[a]), static_cast<Eigen::Index>(kidx[c])) -= g;
      else if (iidx[a] != none && iidx[c] != none) tii.emplace_back(iidx[a], iidx[c], -g);
      else if (iidx[a] != none && kidx[c] != none) tik.emplace_back(iidx[a], kidx[c], -g);
    };
    if (kidx[p] == none && iidx[p] == none) continue;  // dropped island
    diag(p);
    diag(q);
    off(p, q);
    off(q, p);
  }
  gii.setFromTriplets(tii.begin(), tii.end());
  gik.setFromTriplets(tik.begin(), tik.end());

  Eigen::MatrixXd schur = gkk;
  if (ni > 0) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(gii);
    if (ldlt.info() != Eigen::Success) throw SolverError("mesh interior factorization failed");
    Eigen::MatrixXd rhs(gik);
    Eigen::MatrixXd x = ldlt.solve(rhs);
    schur -= Eigen::MatrixXd(gik.transpose()) * x;
  }

  NetlistBuilder b;
  for (NodeId id : kept) b.node(mesh.node(id).name, mesh.node(id).kind);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < nk; ++i) scale = std::max(scale, std::abs(schur(i, i)));
  for (Eigen::Index a = 0; a < nk; ++a)
    for (Eigen::Index c = a + 1; c < nk; ++c) {
      // Symmetrize; the Schur complement of a symmetric M-matrix is one.
      const double g = -0.5 * (schur(a, c) + schur(c, a));
      if (g > 1e-15 * scale)
        b.resistor(fmt::format("Rmm[{},{}]", mesh.node(kept[static_cast<std::size_t>(a)]).name,
                               mesh.node(kept[static_cast<std::size_t>(c)]).name),
                   mesh.node(kept[static_cast<std::size_t>(a)]).name,
                   mesh.node(kept[static_cast<std::size_t>(c)]).name, 1.0 / g);
    }
  for (const Element& e : mesh.elements()) {
    if (std::holds_alternative<Resistor>(e.value)) continue;
    Element copy = e;
    for (NodeId& t : copy.terminals) t = b.node(mesh.node(t).name);
    b.add(std::move(copy));
  }
  for (MosSmallSignal d : mesh.devices()) {
    d.gate = b.node(mesh.node(d.gate).name);
    d.drain = b.node(mesh.node(d.drain).name);
    d.source = b.node(mesh.node(d.source).name);
    d.bulk = b.node(mesh.node(d.bulk).name);
    b.add(std::move(d));
  }

  // Kept nodes that ended up with no element at all (e.g. an unused ground)
  // are dropped by rebuilding from the element list.
  Netlist reduced = b.build();
  std::vector<int> touched(reduced.node_count(), 0);
  for (const Element& e : reduced.elements())
    for (NodeId t : e.terminals) ++touched[t];
  for (const MosSmallSignal& d : reduced.devices())
    for (NodeId t : {d.gate, d.drain, d.source, d.bulk}) ++touched[t];
  bool all = true;
  for (NodeId i = 0; i < reduced.node_count(); ++i)
    if (!touched[i] && i != reduced.ground()) all = false;
  if (all) return reduced;

  NetlistBuilder pruned;
  for (NodeId i = 0; i < reduced.node_count(); ++i)
    if (touched[i] || i == reduced.ground()) pruned.node(reduced.node(i).name, reduced.node(i).kind);
  for (Element e : reduced.elements()) {
    for (NodeId& t : e.terminals) t = pruned.node(reduced.node(t).name);
    pruned.add(std::move(e));
  }
  for (MosSmallSignal d : reduced.devices()) {
    d.gate = pruned.node(reduced.node(d.gate).name);
    d.drain = pruned.node(reduced.node(d.drain).name);
    d.source = pruned.node(reduced.node(d.source).name);
    d.bulk = pruned.node(reduced.node(d.bulk).name);
    pruned.add(std::move(d));
  }
  return pruned.build();
}

} // namespace subnoise
