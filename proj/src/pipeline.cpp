#include "subnoise/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/netlist_io.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> ProjectConfig::sweep() const {
  if (!frequencies.empty()) return frequencies;
  return log_sweep(f_start, f_stop, points_per_decade);
}

void ProjectConfig::validate() const {
  for (const auto* p : {&layout, &technology, &vco})
    if (!fs::exists(*p)) throw ValidationError(fmt::format("{}: file not found", p->string()));
  const auto s = sweep();
  if (s.empty()) throw ValidationError("sweep is empty");
  for (std::size_t k = 0; k < s.size(); ++k)
    if (!(s[k] > 0.0) || (k > 0 && !(s[k] > s[k - 1])))
      throw ValidationError("sweep frequencies must be positive and strictly increasing");
  if (!(source_impedance > 0.0)) throw ValidationError("source_impedance must be > 0");
}

ProjectConfig read_config(const fs::path& path) {
  const json j = read_json_file(path);
  const fs::path dir = path.parent_path();
  auto rel = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string())
      throw ValidationError(fmt::format("{}: missing path '{}'", path.string(), key));
    fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : dir / p;
  };
  ProjectConfig c;
  try {
    c.layout = rel("layout");
    c.technology = rel("technology");
    c.vco = rel("vco");
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.contains("frequencies"))
        for (const json& f : s.at("frequencies")) c.frequencies.push_back(json_value(f, "frequency"));
      c.f_start = json_field(s, "start", c.f_start);
      c.f_stop = json_field(s, "stop", c.f_stop);
      c.points_per_decade = s.value("points_per_decade", c.points_per_decade);
    }
    c.noise_dbm = json_field(j, "noise_dbm", c.noise_dbm);
    c.source_impedance = json_field(j, "source_impedance", c.source_impedance);
    c.injection_node = j.value("injection_node", c.injection_node);
    if (j.contains("vtune"))
      for (const json& v : j.at("vtune")) c.vtune.push_back(json_value(v, "vtune"));
    c.resize_all_ground = j.value("resize_all_ground", false);
    c.oracle_tolerance_pct = json_field(j, "oracle_tolerance_pct", c.oracle_tolerance_pct);
    if (j.contains("calibration")) {
      const json& k = j.at("calibration");
      Calibration cal;
      cal.source = k.value("source", cal.source);
      cal.target = k.value("target", cal.target);
      cal.reference = k.value("reference", cal.reference);
      cal.divider = json_field(k, "divider", cal.divider);
      cal.frequency = json_field(k, "frequency", cal.frequency);
      c.calibration = cal;
    }
    if (j.contains("output_dir")) {
      fs::path o = j.at("output_dir").get<std::string>();
      c.output_dir = o.is_absolute() ? o : dir / o;
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ValidationError(fmt::format("{}: {}", path.string(), msg));
  }
  return c;
}

Project load_project(const ProjectConfig& config) {
  config.validate();
  Project p;
  p.config = config;
  p.tech = read_technology(config.technology);
  p.layout = read_layout(config.layout, p.tech);
  try {
    p.vco = vco_from_json(read_json_file(config.vco));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", config.vco.string(), e.what()));
  }
  if (config.resize_all_ground)
    for (auto& w : p.layout.wires)
      if (w.path_label == "ground-interconnect") w.resizable = true;
  return p;
}

std::vector<TransferFunction> entry_transfers(const Netlist& system, const VcoModel& vco,
                                              std::string_view injection_node, std::span<const double> frequencies) {
  std::vector<Probe> probes;
  for (const VcoEntry& e : vco.entries) {
    if (!system.find(e.node))
      throw ValidationError(fmt::format("entry '{}': node '{}' not in the extracted system", e.path_label, e.node));
    if (!e.reference.empty() && !system.find(e.reference))
      throw ValidationError(
          fmt::format("entry '{}': reference '{}' not in the extracted system", e.path_label, e.reference));
    probes.push_back({e.node, e.reference, e.path_label});
  }
  return transfers(system, injection_node, probes, frequencies);
}

ImpactRun run_impact(const Project& project, const Layout& layout, double vtune) {
  const Extraction x = extract(layout, project.tech);
  VcoModel vco = project.vco;
  vco.vtune = vtune;
  vco.validate();
  const auto freqs = project.config.sweep();
  ImpactRun run;
  run.vtune = vtune;
  run.transfers = entry_transfers(x.system, vco, project.config.injection_node, freqs);
  NoiseSource noise;
  noise.amplitude = project.config.noise_amplitude();
  noise.source_impedance = project.config.source_impedance;
  noise.injection_node = project.config.injection_node;
  run.sweep = spur_sweep(vco, noise, run.transfers, freqs);
  return run;
}

ImpactRun run_impact(const Project& project, double vtune) { return run_impact(project, project.layout, vtune); }

WhatIf whatif(const Project& project, double factor, double vtune) {
  WhatIf w;
  w.before = run_impact(project, vtune);
  w.after = run_impact(project, scale_ground_width(project.layout, factor), vtune);
  for (std::size_t k = 0; k < w.before.sweep.size(); ++k)
    w.delta_db.push_back(w.after.sweep[k].combined_dbm() - w.before.sweep[k].combined_dbm());
  return w;
}

std::vector<OracleRow> oracle_suite(const std::optional<std::vector<std::string>>& selection, double tolerance_pct) {
  if (!(tolerance_pct > 0.0)) throw ValidationError("oracle tolerance must be > 0");
  struct Case {
    std::string name;
    double beta;
    double m;  // AM index
    bool informational;
  };
  const std::vector<Case> cases = {
      {"fm-beta-0.01", 0.01, 0.0, false}, {"fm-beta-0.05", 0.05, 0.0, false}, {"fm-beta-0.1", 0.1, 0.0, false},
      {"am-m-0.002", 0.0, 0.002, false},   {"fm-beta-0.5", 0.5, 0.0, true},
  };
  const double a_c = 1.0, a_noise = 0.01, f_noise = 1e6, f_c = 64e6;
  const Complex h = std::polar(1.0, 0.3);
  if (selection)
    for (const std::string& name : *selection)
      if (std::none_of(cases.begin(), cases.end(), [&](const Case& c) { return c.name == name; }))
        throw ValidationError(fmt::format("unknown oracle case '{}'", name));
  std::vector<OracleRow> rows;
  for (const Case& c : cases) {
    if (selection && std::find(selection->begin(), selection->end(), c.name) == selection->end()) continue;
    const double k = c.beta * f_noise / (std::abs(h) * a_noise);
    const double g = c.m / (std::abs(h) * a_noise);
    const Complex fm = fm_spur(a_c, h, a_noise, k, f_noise);
    const Complex am = am_spur(a_c, h, a_noise, g);
    const double narrow = std::abs(am + Complex(0, 1) * fm);
    const ModulationPath path{h, k, g};
    const auto spec = coherent_spec(f_c, f_noise);
    const SpurLines lines =
        extract_spurs(synthesize(a_c, f_c, a_noise, f_noise, std::span(&path, 1), spec), f_c, f_noise, spec.window);
    OracleRow r;
    r.name = c.name;
    r.beta = c.beta;
    r.narrowband = narrow;
    r.oracle = std::abs(lines.upper);
    r.error_pct = 100.0 * std::abs(r.narrowband - r.oracle) / r.oracle;
    r.tolerance_pct = tolerance_pct;
    r.informational = c.informational;
    r.pass = r.informational || r.error_pct <= r.tolerance_pct;
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::vector<double> vtunes(const Project& p) {
  return p.config.vtune.empty() ? std::vector<double>{p.vco.vtune} : p.config.vtune;
}

json classification_json(const ImpactRun& run, const VcoModel& vco) {
  json out = json::object();
  auto classify = [&](const std::vector<Sample>& s) -> json {
    try {
      const Classification c = classify_mechanism(s);
      return {{"slope_db_per_decade", c.slope_db_per_decade}, {"mechanisms", c.mechanisms}};
    } catch (const ValidationError& e) {
      return {{"error", e.what()}};
    }
  };
  for (const VcoEntry& e : vco.entries) out[e.path_label] = classify(path_samples(run.sweep, e.path_label));
  out["total"] = classify(total_samples(run.sweep));
  return out;
}

std::string classification_text(const json& c) {
  std::string out;
  for (const auto& [label, v] : c.items()) {
    if (v.contains("error")) {
      out += fmt::format("  {:<22} {}\n", label, v.at("error").get<std::string>());
      continue;
    }
    std::string mech;
    for (const auto& m : v.at("mechanisms")) mech += (mech.empty() ? "" : ", ") + m.get<std::string>();
    out += fmt::format("  {:<22} {:+8.3f} dB/dec  {{{}}}\n", label, v.at("slope_db_per_decade").get<double>(), mech);
  }
  return out;
}

} // namespace

CommandOutput cmd_extract(const ProjectConfig& config) {
  const Project p = load_project(config);
  const Extraction x = extract(p.layout, p.tech);
  const fs::path out = config.output_dir;
  std::string labels;
  for (const auto& l : x.path_labels) labels += (labels.empty() ? "" : ", ") + l;
  auto count = [](const Netlist& n) { return n.elements().size() + n.devices().size(); };

  std::string text;
  text += fmt::format("mesh:          {} nodes, {} elements\n", x.mesh.node_count(), count(x.mesh));
  text += fmt::format("substrate:     {} nodes, {} elements\n", x.substrate.node_count(), count(x.substrate));
  text += fmt::format("interconnect:  {} elements", count(x.interconnect));
  text += x.skipped_runs ? fmt::format(" ({} zero-length runs skipped)\n", x.skipped_runs) : std::string("\n");
  text += fmt::format("circuit:       {} elements\n", count(x.circuit));
  text += fmt::format("system:        {} nodes, {} elements\n", x.system.node_count(), count(x.system));
  text += fmt::format("ground-path resistance: {:.6g} ohm\n", x.ground_path_resistance);
  text += fmt::format("path labels: {{{}}}\n", labels);

  json summary{{"mesh_nodes", x.mesh.node_count()},
               {"mesh_elements", count(x.mesh)},
               {"substrate_nodes", x.substrate.node_count()},
               {"substrate_elements", count(x.substrate)},
               {"interconnect_elements", count(x.interconnect)},
               {"circuit_elements", count(x.circuit)},
               {"system_nodes", x.system.node_count()},
               {"system_elements", count(x.system)},
               {"ground_path_resistance_ohm", x.ground_path_resistance},
               {"skipped_runs", x.skipped_runs},
               {"path_labels", x.path_labels}};
  const std::string mesh = netlist_to_json(x.mesh).dump() + "\n";
  const std::string sub = json_text(netlist_to_json(x.substrate));
  const std::string ic = json_text(netlist_to_json(x.interconnect));
  const std::string sys = json_text(netlist_to_json(x.system));
  write_file_atomic(out / "mesh.json", mesh);
  write_file_atomic(out / "substrate.json", sub);
  write_file_atomic(out / "interconnect.json", ic);
  write_file_atomic(out / "system.json", sys);
  write_file_atomic(out / "extract_summary.json", json_text(summary));
  return {text, 0};
}

CommandOutput cmd_transfer(const ProjectConfig& config, Format format) {
  const Project p = load_project(config);
  const Extraction x = extract(p.layout, p.tech);
  const auto freqs = config.sweep();
  const auto tfs = entry_transfers(x.system, p.vco, config.injection_node, freqs);
  std::string text;
  std::vector<std::pair<fs::path, std::string>> files;
  json all = json::array();
  for (const TransferFunction& tf : tfs) {
    const double lo = 20.0 * std::log10(std::abs(tf.value.front()));
    const double hi = 20.0 * std::log10(std::abs(tf.value.back()));
    text += fmt::format("{:<22} {} -> {}{}: {:.3f} dB at {:.4g} Hz, {:.3f} dB at {:.4g} Hz\n", tf.path_label,
                        tf.source_node, tf.target_node, tf.reference_node.empty() ? "" : " - " + tf.reference_node,
                        lo, tf.frequency.front(), hi, tf.frequency.back());
    if (format == Format::csv) {
      files.emplace_back(config.output_dir / fmt::format("transfer_{}.csv", tf.path_label), transfer_to_csv(tf));
    } else {
      json re = json::array(), im = json::array();
      for (const Complex& v : tf.value) {
        re.push_back(v.real());
        im.push_back(v.imag());
      }
      all.push_back({{"path_label", tf.path_label},
                     {"source", tf.source_node},
                     {"target", tf.target_node},
                     {"reference", tf.reference_node},
                     {"frequency_hz", tf.frequency},
                     {"re", re},
                     {"im", im}});
    }
  }
  if (format == Format::json) files.emplace_back(config.output_dir / "transfers.json", json_text(all));
  for (const auto& [path, body] : files) write_file_atomic(path, body);
  return {text, 0};
}

CommandOutput cmd_impact(const ProjectConfig& config, Format format) {
  const Project p = load_project(config);
  const auto vts = vtunes(p);
  std::string text;
  std::vector<std::pair<fs::path, std::string>> files;
  for (double vt : vts) {
    const ImpactRun run = run_impact(p, vt);
    VcoModel vco = p.vco;
    vco.vtune = vt;
    const json cls = classification_json(run, vco);
    const std::string stem = vts.size() == 1 ? "impact" : fmt::format("impact_vtune_{:.3f}", vt);
    text += fmt::format("V_tune = {:.3f} V, f_c = {:.6g} Hz, A_noise = {:.6g} V ({:g} dBm)\n", vt,
                        vco.carrier_frequency(), config.noise_amplitude(), config.noise_dbm);
    for (const SpurReport& r : run.sweep)
      text += fmt::format("  f_noise {:>12.6g} Hz  upper {:9.3f} dBm  lower {:9.3f} dBm  combined {:9.3f} dBm\n",
                          r.f_noise, r.upper_dbm(), r.lower_dbm(), r.combined_dbm());
    text += "mechanism:\n" + classification_text(cls);
    std::set<std::string> warned;
    for (const SpurReport& r : run.sweep)
      for (const auto& w : r.warnings)
        if (warned.insert(w.substr(0, w.find(':'))).second) text += "warning: " + w + "\n";
    if (format == Format::csv) {
      files.emplace_back(config.output_dir / (stem + ".csv"), sweep_to_csv(run.sweep));
    } else {
      json j{{"vtune", vt},
             {"f_c_hz", vco.carrier_frequency()},
             {"noise_dbm", config.noise_dbm},
             {"noise_amplitude_v", config.noise_amplitude()},
             {"sweep", sweep_to_json(run.sweep)},
             {"classification", cls}};
      files.emplace_back(config.output_dir / (stem + ".json"), json_text(j));
    }
  }
  for (const auto& [path, body] : files) write_file_atomic(path, body);
  return {text, 0};
}

CommandOutput cmd_contrib(const ProjectConfig& config, Format format) {
  const Project p = load_project(config);
  const double vt = vtunes(p).front();
  const ImpactRun run = run_impact(p, vt);
  std::string csv = "f_noise_hz,rank,path_label,power_dbm,share,destructive\n";
  json arr = json::array();
  std::string text;
  for (const SpurReport& r : run.sweep) {
    const Breakdown b = contribution_breakdown(r);
    json items = json::array();
    for (std::size_t i = 0; i < b.items.size(); ++i) {
      const Contribution& c = b.items[i];
      csv += fmt::format("{:.9e},{},{},{:.6f},{:.9f},{}\n", r.f_noise, i + 1, c.path_label, c.dbm, c.share,
                         b.destructive ? 1 : 0);
      items.push_back({{"path_label", c.path_label}, {"power_dbm", c.dbm}, {"share", c.share}});
    }
    arr.push_back({{"f_noise_hz", r.f_noise}, {"items", items}, {"share_sum", b.share_sum},
                   {"destructive", b.destructive}});
  }
  const Breakdown first = contribution_breakdown(run.sweep.front());
  const Breakdown last = contribution_breakdown(run.sweep.back());
  for (const auto* b : {&first, &last}) {
    const double f = b == &first ? run.sweep.front().f_noise : run.sweep.back().f_noise;
    text += fmt::format("f_noise = {:.6g} Hz{}\n", f, b->destructive ? "  (destructive interference)" : "");
    for (const Contribution& c : b->items)
      text += fmt::format("  {:<22} {:9.3f} dBm  share {:.4f}\n", c.path_label, c.dbm, c.share);
  }
  json crossings = json::array();
  if (run.sweep.size() >= 3) {
    const std::string dominant = first.items.front().path_label;
    const auto ds = path_samples(run.sweep, dominant);
    for (const VcoEntry& e : p.vco.entries) {
      if (e.path_label == dominant) continue;
      try {
        const Crossover c = crossover(ds, path_samples(run.sweep, e.path_label));
        if (!c.found) continue;
        text += fmt::format("crossover {} / {}: {:.4g} Hz{}\n", dominant, e.path_label, c.frequency,
                            c.extrapolated ? " (extrapolated)" : "");
        crossings.push_back({{"a", dominant}, {"b", e.path_label}, {"frequency_hz", c.frequency},
                             {"extrapolated", c.extrapolated}});
      } catch (const ValidationError&) {
      }
    }
  }
  if (format == Format::csv) write_file_atomic(config.output_dir / "contrib.csv", csv);
  else write_file_atomic(config.output_dir / "contrib.json",
                         json_text({{"vtune", vt}, {"breakdown", arr}, {"crossover", crossings}}));
  return {text, 0};
}

CommandOutput cmd_whatif(const ProjectConfig& config, double factor, Format format) {
  const Project p = load_project(config);
  const double vt = vtunes(p).front();
  const WhatIf w = whatif(p, factor, vt);
  std::string csv = "f_noise_hz,before_dbm,after_dbm,delta_db\n";
  json arr = json::array();
  double lo = 1e300, hi = -1e300, sum = 0.0;
  for (std::size_t k = 0; k < w.delta_db.size(); ++k) {
    const double f = w.before.sweep[k].f_noise;
    const double b = w.before.sweep[k].combined_dbm(), a = w.after.sweep[k].combined_dbm();
    csv += fmt::format("{:.9e},{:.6f},{:.6f},{:.6f}\n", f, b, a, w.delta_db[k]);
    arr.push_back({{"f_noise_hz", f}, {"before_dbm", b}, {"after_dbm", a}, {"delta_db", w.delta_db[k]}});
    lo = std::min(lo, w.delta_db[k]);
    hi = std::max(hi, w.delta_db[k]);
    sum += w.delta_db[k];
  }
  const std::string text = fmt::format("ground width x{:g}: delta mean {:.3f} dB (min {:.3f}, max {:.3f})\n", factor,
                                       sum / static_cast<double>(w.delta_db.size()), lo, hi);
  if (format == Format::csv) write_file_atomic(config.output_dir / "whatif.csv", csv);
  else write_file_atomic(config.output_dir / "whatif.json", json_text({{"factor", factor}, {"sweep", arr}}));
  return {text, 0};
}

CommandOutput cmd_oracle_check(const ProjectConfig& config, Format format,
                               const std::optional<std::vector<std::string>>& selection) {
  const auto rows = oracle_suite(selection, config.oracle_tolerance_pct);
  std::string text = fmt::format("{:<14} {:>8} {:>16} {:>16} {:>10}  {}\n", "case", "beta", "narrowband_v",
                                 "oracle_v", "error_%", "status");
  std::string csv = "case,beta,narrowband_v,oracle_v,error_pct,status\n";
  json arr = json::array();
  bool ok = true;
  for (const OracleRow& r : rows) {
    const std::string status = r.informational ? "expected-divergence" : (r.pass ? "pass" : "FAIL");
    ok = ok && r.pass;
    text += fmt::format("{:<14} {:>8.3g} {:>16.9e} {:>16.9e} {:>10.5f}  {}\n", r.name, r.beta, r.narrowband,
                        r.oracle, r.error_pct, status);
    csv += fmt::format("{},{:.6g},{:.12e},{:.12e},{:.6f},{}\n", r.name, r.beta, r.narrowband, r.oracle,
                       r.error_pct, status);
    arr.push_back({{"case", r.name}, {"beta", r.beta}, {"narrowband_v", r.narrowband}, {"oracle_v", r.oracle},
                   {"error_pct", r.error_pct}, {"status", status}});
  }
  if (format == Format::csv) write_file_atomic(config.output_dir / "oracle_check.csv", csv);
  else write_file_atomic(config.output_dir / "oracle_check.json", json_text(arr));
  return {text, ok ? 0 : 3};
}

CommandOutput cmd_calibrate(const ProjectConfig& config) {
  if (!config.calibration) throw ValidationError("config has no \"calibration\" section");
  const Project p = load_project(config);
  const Calibration& cal = *config.calibration;
  const double s = calibrate_conductance_scale(p.layout, p.tech, cal);
  const double current = divider_ratio(extract(p.layout, p.tech).system, cal);
  Layout l = p.layout;
  l.mesh.conductance_scale = s;
  const double achieved = divider_ratio(extract(l, p.tech).system, cal);
  return {fmt::format("divider at conductance_scale {:.10g}: {:.9g} (1/{:.4g})\n"
                      "conductance_scale = {:.10g}  (divider {:.9g}, target {:.9g})\n",
                      p.layout.mesh.conductance_scale, current, 1.0 / current, s, achieved, cal.divider),
          0};
}

} // namespace subnoise
