#include "subnoise/impact.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

using nlohmann::json;

double Tank::capacitance(double v) const {
  double c = fixed_capacitance;
  if (law == TankLaw::varactor) c += varactor_cap(varactor, v);
  else c += c0 * (1.0 + gamma * v);
  return c;
}

double oscillation_frequency(const Tank& tank, double v) {
  const double c = tank.capacitance(v);
  if (!(c > 0.0) || !(tank.inductance > 0.0))
    throw ValidationError(fmt::format("tank capacitance {} F at {} V is not positive", c, v));
  return 1.0 / (2.0 * kPi * std::sqrt(tank.inductance * c));
}

void VcoModel::validate() const {
  if (!(amplitude >= 0.0)) throw ValidationError("vco amplitude must be >= 0");
  if (tank.law == TankLaw::varactor) tank.varactor.validate();
  (void)carrier_frequency();
  std::set<std::string> seen;
  for (const auto& e : entries)
    if (!seen.insert(e.path_label).second)
      throw ValidationError(fmt::format("duplicate entry path_label '{}'", e.path_label));
}

double sensitivity_K(const VcoModel& vco, std::string_view path_label) {
  auto it = std::find_if(vco.entries.begin(), vco.entries.end(),
                         [&](const VcoEntry& e) { return e.path_label == path_label; });
  if (it == vco.entries.end()) throw ValidationError(fmt::format("no VCO entry '{}'", path_label));
  if (it->k) return *it->k;
  if (it->control_gain == 0.0) return 0.0;
  const double h = 1e-3;
  const double df = oscillation_frequency(vco.tank, vco.vtune + h) - oscillation_frequency(vco.tank, vco.vtune - h);
  return it->control_gain * df / (2.0 * h);
}

double fm_beta(Complex h, double a_noise, double k, double f_noise) {
  if (!(f_noise > 0.0)) throw ValidationError("f_noise must be > 0");
  return std::abs(h) * a_noise * std::abs(k) / f_noise;
}

Complex fm_spur(double a_c, Complex h, double a_noise, double k, double f_noise) {
  if (!(f_noise > 0.0)) throw ValidationError("f_noise must be > 0");
  return a_c * h * a_noise * k / (2.0 * f_noise) / Complex(0.0, 1.0);
}

Complex am_spur(double a_c, Complex h, double a_noise, double g_am) { return a_c * h * a_noise * g_am / 2.0; }

double spur_dbm(double volts, double ohms) {
  const double p = volts * volts / (2.0 * ohms) / 1e-3;
  return p > 0.0 ? std::max(kFloorDbm, 10.0 * std::log10(p)) : kFloorDbm;
}

namespace {

double power_dbm(double p_watts) {
  return p_watts > 0.0 ? std::max(kFloorDbm, 10.0 * std::log10(p_watts / 1e-3)) : kFloorDbm;
}

double sideband_power(Complex v, double ohms) { return std::norm(v) / (2.0 * ohms); }

} // namespace

double SpurReport::upper_dbm() const { return spur_dbm(std::abs(upper), source_impedance); }
double SpurReport::lower_dbm() const { return spur_dbm(std::abs(lower), source_impedance); }
double SpurReport::combined_dbm() const {
  return power_dbm(sideband_power(upper, source_impedance) + sideband_power(lower, source_impedance));
}
double SpurReport::path_fm_dbm(std::size_t i) const { return spur_dbm(std::abs(paths.at(i).fm), source_impedance); }
double SpurReport::path_am_dbm(std::size_t i) const { return spur_dbm(std::abs(paths.at(i).am), source_impedance); }
double SpurReport::path_combined_dbm(std::size_t i) const {
  const PathSpur& p = paths.at(i);
  return power_dbm(sideband_power(p.upper(), source_impedance) + sideband_power(p.lower(), source_impedance));
}

SpurReport spur_report(const VcoModel& vco, const NoiseSource& noise, std::span<const TransferFunction> transfers) {
  if (!(noise.frequency > 0.0)) throw ValidationError("f_noise must be > 0");
  if (!(noise.amplitude >= 0.0)) throw ValidationError("noise amplitude must be >= 0");
  if (!(noise.source_impedance > 0.0)) throw ValidationError("source impedance must be > 0");
  SpurReport r;
  r.f_noise = noise.frequency;
  r.f_c = vco.carrier_frequency();
  r.source_impedance = noise.source_impedance;
  for (const VcoEntry& e : vco.entries) {
    auto tf = std::find_if(transfers.begin(), transfers.end(),
                           [&](const TransferFunction& t) { return t.path_label == e.path_label; });
    if (tf == transfers.end()) throw ValidationError(fmt::format("missing transfer for entry '{}'", e.path_label));
    PathSpur p;
    p.path_label = e.path_label;
    p.h = tf->at(noise.frequency);
    p.k = sensitivity_K(vco, e.path_label);
    p.fm = fm_spur(vco.amplitude, p.h, noise.amplitude, p.k, noise.frequency);
    p.am = am_spur(vco.amplitude, p.h, noise.amplitude, e.g_am);
    p.beta = fm_beta(p.h, noise.amplitude, p.k, noise.frequency);
    if (p.beta >= kNarrowbandLimit)
      r.warnings.push_back(fmt::format("{}: beta {:.3g} at {:.6g} Hz exceeds the narrowband limit {}",
                                       e.path_label, p.beta, noise.frequency, kNarrowbandLimit));
    r.upper += p.upper();
    r.lower += p.lower();
    r.paths.push_back(std::move(p));
  }
  return r;
}

std::vector<SpurReport> spur_sweep(const VcoModel& vco, NoiseSource noise,
                                   std::span<const TransferFunction> transfers,
                                   std::span<const double> frequencies) {
  std::vector<SpurReport> out;
  out.reserve(frequencies.size());
  for (double f : frequencies) {
    noise.frequency = f;
    out.push_back(spur_report(vco, noise, transfers));
  }
  return out;
}

namespace {

struct Line {
  double slope = 0.0;      // dB per decade
  double intercept = 0.0;  // dB at log10 f = 0
};

Line fit(std::span<const Sample> s) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(s.size());
  for (const Sample& p : s) {
    const double x = std::log10(p.frequency);
    sx += x;
    sy += p.dbm;
    sxx += x * x;
    sxy += x * p.dbm;
  }
  const double den = n * sxx - sx * sx;
  Line l;
  l.slope = (n * sxy - sx * sy) / den;
  l.intercept = (sy - l.slope * sx) / n;
  return l;
}

void require_span(std::span<const Sample> s) {
  if (s.size() < 3) throw ValidationError("insufficient span");
  double lo = s[0].frequency, hi = s[0].frequency;
  for (const Sample& p : s) {
    if (!(p.frequency > 0.0)) throw ValidationError("sample frequencies must be > 0");
    lo = std::min(lo, p.frequency);
    hi = std::max(hi, p.frequency);
  }
  if (hi / lo < 10.0 * (1.0 - 1e-12)) throw ValidationError("insufficient span");
}

} // namespace

Classification classify_mechanism(std::span<const Sample> samples) {
  require_span(samples);
  Classification c;
  c.slope_db_per_decade = fit(samples).slope;
  const double s = c.slope_db_per_decade;
  if (std::abs(s + 20.0) <= 3.0) c.mechanisms = {"resistive-FM"};
  else if (std::abs(s) <= 3.0) c.mechanisms = {"resistive-AM", "capacitive-FM"};
  else if (std::abs(s - 20.0) <= 3.0) c.mechanisms = {"capacitive-AM"};
  else c.mechanisms = {"mixed"};
  return c;
}

Breakdown contribution_breakdown(const SpurReport& report) {
  Breakdown b;
  const double total = sideband_power(report.upper, report.source_impedance) +
                       sideband_power(report.lower, report.source_impedance);
  for (std::size_t i = 0; i < report.paths.size(); ++i) {
    const PathSpur& p = report.paths[i];
    const double pw = sideband_power(p.upper(), report.source_impedance) +
                      sideband_power(p.lower(), report.source_impedance);
    b.items.push_back({p.path_label, report.path_combined_dbm(i), total > 0.0 ? pw / total : 0.0});
    b.share_sum += b.items.back().share;
  }
  std::stable_sort(b.items.begin(), b.items.end(),
                   [](const Contribution& x, const Contribution& y) { return x.dbm > y.dbm; });
  b.destructive = b.share_sum > 1.0 + 1e-9;
  return b;
}

Crossover crossover(std::span<const Sample> a, std::span<const Sample> b) {
  require_span(a);
  require_span(b);
  const Line la = fit(a), lb = fit(b);
  Crossover c;
  if (std::abs(la.slope - lb.slope) < 1e-9) return c;
  const double x = (lb.intercept - la.intercept) / (la.slope - lb.slope);
  const double f = std::pow(10.0, x);
  if (!std::isfinite(f) || !(f > 0.0)) return c;
  c.found = true;
  c.frequency = f;
  double lo = a[0].frequency, hi = a[0].frequency;
  for (auto s : {a, b})
    for (const Sample& p : s) {
      lo = std::min(lo, p.frequency);
      hi = std::max(hi, p.frequency);
    }
  c.extrapolated = c.frequency < lo || c.frequency > hi;
  return c;
}

std::vector<Sample> path_samples(std::span<const SpurReport> sweep, std::string_view path_label) {
  std::vector<Sample> out;
  for (const SpurReport& r : sweep)
    for (std::size_t i = 0; i < r.paths.size(); ++i)
      if (r.paths[i].path_label == path_label) out.push_back({r.f_noise, r.path_combined_dbm(i)});
  return out;
}

std::vector<Sample> total_samples(std::span<const SpurReport> sweep) {
  std::vector<Sample> out;
  for (const SpurReport& r : sweep) out.push_back({r.f_noise, r.combined_dbm()});
  return out;
}

std::string sweep_to_csv(std::span<const SpurReport> sweep) {
  std::string out = "f_noise_hz,path_label,fm_dbm,am_dbm,upper_total_dbm,lower_total_dbm,combined_total_dbm\n";
  for (const SpurReport& r : sweep)
    for (std::size_t i = 0; i < r.paths.size(); ++i)
      out += fmt::format("{:.9e},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.f_noise, r.paths[i].path_label,
                         r.path_fm_dbm(i), r.path_am_dbm(i), r.upper_dbm(), r.lower_dbm(), r.combined_dbm());
  return out;
}

json sweep_to_json(std::span<const SpurReport> sweep) {
  auto cplx = [](Complex z) { return json::array({z.real(), z.imag()}); };
  json arr = json::array();
  for (const SpurReport& r : sweep) {
    json paths = json::array();
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
      const PathSpur& p = r.paths[i];
      paths.push_back({{"path_label", p.path_label},
                       {"h", cplx(p.h)},
                       {"k_hz_per_v", p.k},
                       {"fm_v", cplx(p.fm)},
                       {"am_v", cplx(p.am)},
                       {"fm_dbm", r.path_fm_dbm(i)},
                       {"am_dbm", r.path_am_dbm(i)},
                       {"combined_dbm", r.path_combined_dbm(i)},
                       {"beta", p.beta}});
    }
    arr.push_back({{"f_noise_hz", r.f_noise},
                   {"f_c_hz", r.f_c},
                   {"upper_v", cplx(r.upper)},
                   {"lower_v", cplx(r.lower)},
                   {"upper_total_dbm", r.upper_dbm()},
                   {"lower_total_dbm", r.lower_dbm()},
                   {"combined_total_dbm", r.combined_dbm()},
                   {"paths", std::move(paths)},
                   {"warnings", r.warnings}});
  }
  return arr;
}

VcoModel vco_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("vco: expected a JSON object");
  VcoModel v;
  try {
    v.amplitude = json_field(j, "amplitude");
    v.vtune = json_field(j, "vtune", 0.0);
    const json& t = j.at("tank");
    v.tank.inductance = json_field(t, "inductance");
    v.tank.fixed_capacitance = json_field(t, "fixed_capacitance", 0.0);
    const std::string law = t.value("law", std::string("varactor"));
    if (law == "varactor") {
      const json& m = t.at("varactor");
      v.tank.varactor = {json_field(m, "c_min"), json_field(m, "c_max"), json_field(m, "v_half"),
                         json_field(m, "slope")};
    } else if (law == "linear") {
      v.tank.law = TankLaw::linear;
      v.tank.c0 = json_field(t, "c0");
      v.tank.gamma = json_field(t, "gamma");
    } else {
      throw ValidationError(fmt::format("unknown tank law '{}'", law));
    }
    for (const json& e : j.at("entries")) {
      VcoEntry en;
      en.path_label = e.at("path_label").get<std::string>();
      en.node = e.at("node").get<std::string>();
      en.reference = e.value("reference", std::string());
      en.control_gain = json_field(e, "control_gain", 0.0);
      if (e.contains("k")) en.k = json_field(e, "k");
      en.g_am = json_field(e, "g_am", 0.0);
      v.entries.push_back(std::move(en));
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("vco: {}", e.what()));
  }
  v.validate();
  return v;
}

} // namespace subnoise
