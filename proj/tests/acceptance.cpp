// Acceptance checks: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "subnoise/devices.hpp"
#include "subnoise/error.hpp"
#include "subnoise/impact.hpp"
#include "subnoise/mesh.hpp"
#include "subnoise/netlist_io.hpp"
#include "subnoise/oracle.hpp"
#include "subnoise/pipeline.hpp"
#include "subnoise/solver.hpp"
#include "subnoise/units.hpp"

using namespace subnoise;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SUBNOISE_FIXTURE_DIR;

struct Result {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += ok ? what : "FAILED " + what;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double db20(double x) { return 20.0 * std::log10(x); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("subnoise_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ProjectConfig fixture_config(const std::string& file, const fs::path& out) {
  ProjectConfig c = read_config(kFixtures / file);
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double summed_power_dbm(std::span<const SpurReport> sweep, std::string_view label, std::size_t k) {
  for (std::size_t i = 0; i < sweep[k].paths.size(); ++i)
    if (sweep[k].paths[i].path_label == label) return sweep[k].path_combined_dbm(i);
  throw ValidationError(fmt::format("no path '{}'", label));
}

// 1. NMOS back-gate chain at both ends of the bias table.
Result nmos_chain() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  const Project p = load_project(fixture_config("nmos.json", scratch("c1")));
  const double pinned[] = {-45.2, -51.5};
  int idx = 0;
  for (double bias : {0.5, 1.6}) {
    Layout l = p.layout;
    l.circuit[0]["bias"] = bias;
    const auto tf = transfer(extract(l, p.tech).system, "SUB", "nd", std::vector<double>{1e6});
    const MosParams m = mos_params(p.tech.bias, bias);
    const double closed = db20(m.gmb / (652.0 * m.gds));
    const double got = db20(std::abs(tf.value[0]));
    r.require(std::abs(got - closed) <= 0.1 && std::abs(closed - pinned[idx]) <= 0.05,
              fmt::format("bias {} V: {:.3f} dB vs closed form {:.3f} dB", bias, got, closed));
    ++idx;
  }
  const double t = seconds_since(t0);
  r.require(t < 1.0, fmt::format("{:.2f} s", t));
  return r;
}

// 2. Back-gate corner frequency at the table endpoints.
Result corner_frequency() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  const double lo = backgate_corner_freq(10e-3, 120e-15, 200e-15);
  const double hi = backgate_corner_freq(38e-3, 120e-15, 200e-15);
  r.require(std::abs(lo / 4.97e9 - 1.0) <= 0.005, fmt::format("{:.4g} Hz", lo));
  r.require(std::abs(hi / 18.9e9 - 1.0) <= 0.005, fmt::format("{:.4g} Hz", hi));
  r.require(seconds_since(t0) < 1.0, "runtime");
  return r;
}

// 3. Narrowband FM against the time-domain oracle.
Result narrowband_oracle() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260412);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_bessel = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const double f_noise = std::pow(10.0, 5.0 + 2.0 * u(rng));
    const double f_c = f_noise * static_cast<double>(32 + static_cast<int>(96 * u(rng)));
    const double a_c = 0.05 + u(rng);
    const double a_n = 0.01 + 0.3 * u(rng);
    const Complex h = std::polar(1e-3 + u(rng), 2.0 * kPi * u(rng));
    const double beta = 1e-3 + 0.099 * u(rng);
    const double k = (u(rng) < 0.5 ? -1.0 : 1.0) * beta * f_noise / (std::abs(h) * a_n);
    const double narrow = std::abs(fm_spur(a_c, h, a_n, k, f_noise));
    const ModulationPath path{h, k, 0.0};
    const auto spec = coherent_spec(f_c, f_noise);
    const SpurLines lines =
        extract_spurs(synthesize(a_c, f_c, a_n, f_noise, std::span(&path, 1), spec), f_c, f_noise, spec.window);
    worst = std::max(worst, std::abs(narrow / std::abs(lines.upper) - 1.0));
    worst = std::max(worst, std::abs(narrow / std::abs(lines.lower) - 1.0));
    worst_bessel = std::max(worst_bessel, std::abs(narrow / bessel_fm(a_c, beta, 1) - 1.0));
  }
  r.require(worst <= 0.01, fmt::format("100 draws beta <= 0.1: worst {:.4f}% vs DFT", 100 * worst));
  r.require(worst_bessel <= 0.01, fmt::format("worst {:.4f}% vs Bessel", 100 * worst_bessel));

  const double f_noise = 1e6, f_c = 64e6, beta = 0.3;
  const Complex h = std::polar(1.0, 0.3);
  const double a_n = 0.01, k = beta * f_noise / a_n;
  const ModulationPath path{h, k, 0.0};
  const auto spec = coherent_spec(f_c, f_noise);
  const SpurLines lines =
      extract_spurs(synthesize(1.0, f_c, a_n, f_noise, std::span(&path, 1), spec), f_c, f_noise, spec.window);
  const double err = std::abs(std::abs(fm_spur(1.0, h, a_n, k, f_noise)) / std::abs(lines.upper) - 1.0);
  r.require(err <= 0.05, fmt::format("beta 0.3: {:.3f}%", 100 * err));
  const double t = seconds_since(t0);
  r.require(t < 30.0, fmt::format("{:.2f} s", t));
  return r;
}

// 4. Total spur slope and ground-path mechanism.
Result slope_law() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  const Project p = load_project(fixture_config("vco_project.json", scratch("c4")));
  const ImpactRun run = run_impact(p, p.vco.vtune);
  r.require(run.sweep.front().f_noise == 100e3 && run.sweep.back().f_noise == 15e6, "sweep 100 kHz - 15 MHz");
  const Classification total = classify_mechanism(total_samples(run.sweep));
  r.require(std::abs(total.slope_db_per_decade + 20.0) <= 0.5,
            fmt::format("total slope {:.3f} dB/dec", total.slope_db_per_decade));
  const Classification ground = classify_mechanism(path_samples(run.sweep, "ground-interconnect"));
  r.require(ground.mechanisms == std::vector<std::string>{"resistive-FM"},
            fmt::format("ground path {{{}}}", fmt::join(ground.mechanisms, ", ")));
  const double t = seconds_since(t0);
  r.require(t < 120.0, fmt::format("{:.2f} s", t));
  return r;
}

// 5. Ground interconnect dominates the NMOS back-gate.
Result dominance_gap() {
  Result r;
  const Project p = load_project(fixture_config("vco_project.json", scratch("c5")));
  const ImpactRun run = run_impact(p, p.vco.vtune);
  double lo = 1e300, hi = -1e300;
  for (std::size_t k = 0; k < run.sweep.size(); ++k) {
    const double gap = summed_power_dbm(run.sweep, "ground-interconnect", k) -
                       summed_power_dbm(run.sweep, "nmos-backgate", k);
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
  }
  r.require(lo >= 17.0 && hi <= 23.0, fmt::format("gap {:.2f} .. {:.2f} dB", lo, hi));
  return r;
}

// 6. Ground width what-if.
Result whatif_law() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  auto range = [](const WhatIf& w) {
    double lo = 1e300, hi = -1e300;
    for (double d : w.delta_db) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return std::pair{lo, hi};
  };
  {
    const Project p = load_project(fixture_config("vco_ground_project.json", scratch("c6a")));
    const auto [lo, hi] = range(whatif(p, 2.0, p.vco.vtune));
    r.require(lo >= -6.02 - 0.3 && hi <= -6.02 + 0.3, fmt::format("full resize {:.3f} .. {:.3f} dB", lo, hi));
  }
  {
    const Project p = load_project(fixture_config("vco_project.json", scratch("c6b")));
    const auto [lo, hi] = range(whatif(p, 2.0, p.vco.vtune));
    r.require(lo >= -4.5 - 1.0 && hi <= -4.5 + 1.0, fmt::format("partial resize {:.3f} .. {:.3f} dB", lo, hi));
  }
  const double t = seconds_since(t0);
  r.require(t < 120.0, fmt::format("{:.2f} s", t));
  return r;
}

// 7. Solver and mesh correctness.
Result solver_suite() {
  Result r;
  auto close = [](Complex a, Complex b, double rel) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
  };
  {
    NetlistBuilder b;
    b.node("0", NodeKind::ground_reference);
    b.vsource("V1", "in", "0");
    b.resistor("R1", "in", "mid", 1e3);
    b.resistor("R2", "mid", "0", 1e3);
    b.capacitor("C1", "out", "0", 1e-6);
    b.resistor("R3", "in", "out", 1e3);
    const Netlist n = b.build();
    const double fc = 1.0 / (2.0 * kPi * 1e-3);
    const AcSolution s = ac_solve(n, fc);
    const bool div = close(s.at("mid"), 0.5, 1e-9);
    const bool rc = std::abs(std::abs(s.at("out")) * std::sqrt(2.0) - 1.0) <= 1e-9;
    r.require(div && rc, "RC divider analytic");
  }
  NetlistBuilder b;
  b.node("0", NodeKind::ground_reference);
  b.resistor("R1", "a", "b", 1e3);
  b.resistor("R2", "b", "c", 470.0);
  b.resistor("R3", "c", "0", 2.2e3);
  b.resistor("R4", "a", "0", 10e3);
  b.capacitor("C1", "b", "0", 1e-9);
  b.capacitor("C2", "a", "c", 220e-12);
  const Netlist rc = b.build();
  const auto freqs = log_sweep(1e2, 1e8, 3);
  {
    TransferOptions opt;
    opt.drive = Drive::current;
    bool ok = true;
    for (auto [s, t] : {std::pair{"a", "c"}, std::pair{"b", "c"}, std::pair{"a", "b"}}) {
      const auto fwd = transfer(rc, s, t, freqs, opt), rev = transfer(rc, t, s, freqs, opt);
      for (std::size_t k = 0; k < freqs.size(); ++k) ok = ok && close(fwd.value[k], rev.value[k], 1e-9);
    }
    r.require(ok, "reciprocity");
  }
  {
    auto with = [&](bool one, bool two) {
      NetlistBuilder s(rc);
      s.isource("I1", "a", "0", Complex(1e-3, 0.0), one);
      s.isource("I2", "c", "0", Complex(0.0, 2e-3), two);
      return s.build();
    };
    bool ok = true;
    for (double f : freqs) {
      const auto both = ac_solve(with(true, true), f), one = ac_solve(with(true, false), f),
                 two = ac_solve(with(false, true), f);
      for (const char* node : {"a", "b", "c"}) ok = ok && close(both.at(node), one.at(node) + two.at(node), 1e-9);
    }
    r.require(ok, "superposition");
  }
  {
    SubstrateStack stack;
    stack.resistivity = 0.2;
    stack.thickness = 100e-6;
    const Rect die{0, 0, 100e-6, 100e-6};
    SurfaceFeature a, c;
    a.name = "a";
    a.face = Face::xmin;
    a.node = "A";
    c.name = "b";
    c.face = Face::xmax;
    c.node = "B";
    const std::vector<SurfaceFeature> fs = {a, c};
    MeshSpec spec;
    spec.nx = 20;
    spec.ny = 4;
    spec.nz = 4;
    const double bar = point_to_point_resistance(build_mesh(stack, fs, die, spec), "A", "B");
    r.require(std::abs(bar / 2000.0 - 1.0) <= 0.02, fmt::format("bar {:.2f} ohm", bar));

    const Rect sq{0, 0, 200e-6, 200e-6};
    const std::vector<std::pair<Rect, std::string>> spots = {{{20e-6, 20e-6, 40e-6, 40e-6}, "P1"},
                                                             {{150e-6, 150e-6, 190e-6, 190e-6}, "P2"},
                                                             {{150e-6, 20e-6, 180e-6, 50e-6}, "P3"}};
    std::vector<SurfaceFeature> tops;
    for (const auto& [rect, node] : spots) {
      SurfaceFeature f;
      f.name = "c" + node;
      f.rect = rect;
      f.node = node;
      tops.push_back(f);
    }
    const std::vector<std::string> ports = {"P1", "P2", "P3"};
    auto reduced = [&](int n) {
      MeshSpec m;
      m.nx = m.ny = m.nz = n;
      m.z_grading = 30.0;
      m.edge_refinement = 8.0;
      return reduce_to_ports(build_mesh(stack, tops, sq, m), ports);
    };
    const Netlist coarse = reduced(8), fine = reduced(16);
    double worst = 0.0;
    for (auto [a, c2] : {std::pair{"P1", "P2"}, std::pair{"P1", "P3"}, std::pair{"P2", "P3"}}) {
      const double r1 = point_to_point_resistance(coarse, a, c2);
      const double r2 = point_to_point_resistance(fine, a, c2);
      worst = std::max(worst, std::abs(r1 - r2) / r2);
    }
    r.require(worst < 0.05, fmt::format("doubling {:.2f}%", 100 * worst));
  }
  return r;
}

// 8. Upper/lower asymmetry against the time-domain oracle.
Result asymmetry() {
  Result r;
  ProjectConfig c = fixture_config("vco_project.json", scratch("c8"));
  c.frequencies = {10e6};
  const Project p = load_project(c);
  const ImpactRun run = run_impact(p, p.vco.vtune);
  const SpurReport& rep = run.sweep.front();
  const double narrow = rep.upper_dbm() - rep.lower_dbm();

  NoiseSource noise;
  noise.amplitude = c.noise_amplitude();
  noise.frequency = 10e6;
  const double f_c = snap_carrier(p.vco.carrier_frequency(), noise.frequency);
  const auto spec = coherent_spec(f_c, noise.frequency);
  const SpurLines lines =
      extract_spurs(synthesize(p.vco, noise, run.transfers, spec, f_c), f_c, noise.frequency, spec.window);
  const double oracle = db20(std::abs(lines.upper)) - db20(std::abs(lines.lower));
  r.require(std::abs(narrow) >= 0.5 && std::abs(narrow) <= 1.5, fmt::format("fixture asymmetry {:.3f} dB", narrow));
  r.require(std::abs(narrow - oracle) <= 0.2, fmt::format("oracle {:.3f} dB", oracle));
  return r;
}

// 9. Byte-identical reports.
Result determinism() {
  Result r;
  const fs::path a = scratch("c9a"), b = scratch("c9b");
  cmd_impact(fixture_config("vco_project.json", a), Format::csv);
  cmd_impact(fixture_config("vco_project.json", b), Format::csv);
  const std::string x = slurp(a / "impact.csv"), y = slurp(b / "impact.csv");
  r.require(!x.empty() && x == y, fmt::format("{} bytes identical", x.size()));
  return r;
}

// 10. Stored goldens and full pipeline runtime.
Result goldens() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = scratch("c10");
  const ProjectConfig c = fixture_config("vco_project.json", out);
  cmd_extract(c);
  cmd_transfer(c, Format::csv);
  cmd_impact(c, Format::csv);
  cmd_contrib(c, Format::csv);
  cmd_whatif(c, 2.0, Format::csv);
  const Project p = load_project(c);
  const ImpactRun run = run_impact(p, p.vco.vtune);

  std::ifstream in(kFixtures / "golden_impact.csv");
  std::string line;
  std::getline(in, line);
  if (line != "f_noise_hz,upper_total_dbm,lower_total_dbm,combined_total_dbm") {
    r.require(false, "golden header");
    return r;
  }
  double worst = 0.0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double f, up, lo, comb;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &f, &up, &lo, &comb) != 4) continue;
    const SpurReport* rep = nullptr;
    for (const SpurReport& s : run.sweep)
      if (std::abs(s.f_noise / f - 1.0) < 1e-6) rep = &s;
    if (!rep) {
      r.require(false, fmt::format("golden frequency {:.6g} Hz missing", f));
      continue;
    }
    worst = std::max({worst, std::abs(rep->upper_dbm() - up), std::abs(rep->lower_dbm() - lo),
                      std::abs(rep->combined_dbm() - comb)});
    ++rows;
  }
  r.require(rows == run.sweep.size() && worst <= 2.0, fmt::format("{} rows, worst {:.4f} dB", rows, worst));
  const double t = seconds_since(t0);
  r.require(t < 300.0, fmt::format("{:.2f} s", t));
  return r;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"NMOS transfer chain", nmos_chain},
      {"back-gate corner frequency", corner_frequency},
      {"narrowband oracle agreement", narrowband_oracle},
      {"slope law", slope_law},
      {"dominance gap", dominance_gap},
      {"what-if law", whatif_law},
      {"solver correctness", solver_suite},
      {"FM/AM asymmetry", asymmetry},
      {"determinism", determinism},
      {"golden envelope", goldens},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::printf("criterion %zu: %s  %s  [%s]\n", i + 1, r.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                r.detail.c_str());
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
