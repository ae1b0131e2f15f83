#include "subnoise/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "subnoise/error.hpp"
#include "subnoise/units.hpp"

namespace subnoise {

namespace {

bool is_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

} // namespace

void WaveformSpec::validate(double f_c, double f_noise) const {
  if (!(f_noise > 0.0) || !(f_c > f_noise)) throw ValidationError("need f_c > f_noise > 0");
  if (!(duration > 0.0)) throw ValidationError("duration must be > 0");
  if (!(sample_rate > 2.0 * (f_c + f_noise)))
    throw ValidationError(fmt::format("sample rate {} Hz aliases f_c + f_noise = {} Hz", sample_rate, f_c + f_noise));
  if (window == Window::rectangular_coherent) {
    if (!is_integer(duration * f_c) || !is_integer(duration * f_noise))
      throw ValidationError("coherent window needs whole periods of f_c and f_noise");
    if (!is_integer(duration * sample_rate)) throw ValidationError("coherent window needs a whole sample count");
  }
}

std::size_t WaveformSpec::samples() const { return static_cast<std::size_t>(std::llround(duration * sample_rate)); }

double snap_carrier(double f_c, double f_noise) {
  if (!(f_noise > 0.0)) throw ValidationError("f_noise must be > 0");
  return std::max(1.0, std::round(f_c / f_noise)) * f_noise;
}

WaveformSpec coherent_spec(double f_c, double f_noise, double oversample) {
  if (!is_integer(f_c / f_noise)) throw ValidationError("f_c must be a multiple of f_noise");
  const double per_period = oversample * (f_c + f_noise) / f_noise;
  std::size_t n = 1;
  while (static_cast<double>(n) < per_period) n <<= 1;
  WaveformSpec s;
  s.duration = 1.0 / f_noise;
  s.sample_rate = static_cast<double>(n) * f_noise;
  s.window = Window::rectangular_coherent;
  return s;
}

Waveform synthesize(double a_c, double f_c, double a_noise, double f_noise, std::span<const ModulationPath> paths,
                    const WaveformSpec& spec) {
  spec.validate(f_c, f_noise);
  Waveform w;
  w.sample_rate = spec.sample_rate;
  const std::size_t n = spec.samples();
  w.v.resize(n);
  const double wn = 2.0 * kPi * f_noise;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    double env = 1.0, phase = 0.0;
    for (const ModulationPath& p : paths) {
      const double mag = std::abs(p.h) * a_noise, arg = std::arg(p.h);
      env += p.g_am * mag * std::cos(wn * t + arg);
      phase += p.k * mag / f_noise * std::sin(wn * t + arg);
    }
    // Carrier phase reduced modulo one cycle to keep precision at large t.
    const double cycles = f_c * t;
    const double frac = cycles - std::floor(cycles);
    w.v[i] = a_c * env * std::cos(2.0 * kPi * frac + phase);
  }
  return w;
}

Waveform synthesize(const VcoModel& vco, const NoiseSource& noise, std::span<const TransferFunction> transfers,
                    const WaveformSpec& spec, double f_c) {
  std::vector<ModulationPath> paths;
  for (const VcoEntry& e : vco.entries) {
    auto tf = std::find_if(transfers.begin(), transfers.end(),
                           [&](const TransferFunction& t) { return t.path_label == e.path_label; });
    if (tf == transfers.end()) throw ValidationError(fmt::format("missing transfer for entry '{}'", e.path_label));
    paths.push_back({tf->at(noise.frequency), sensitivity_K(vco, e.path_label), e.g_am});
  }
  return synthesize(vco.amplitude, f_c, noise.amplitude, noise.frequency, paths, spec);
}

namespace {

Complex tone(const Waveform& w, double f, Window window) {
  const std::size_t n = w.v.size();
  // Accumulate in long double and reduce the phase per sample to whole cycles.
  long double re = 0, im = 0, norm = 0;
  const long double step = static_cast<long double>(f) / w.sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    long double cyc = step * i;
    cyc -= std::floor(cyc);
    const long double ang = 2.0L * static_cast<long double>(kPi) * cyc;
    long double win = 1.0L;
    if (window == Window::hann) win = 0.5L - 0.5L * std::cos(2.0L * static_cast<long double>(kPi) * i / n);
    re += win * w.v[i] * std::cos(ang);
    im -= win * w.v[i] * std::sin(ang);
    norm += win;
  }
  return {static_cast<double>(2.0L * re / norm), static_cast<double>(2.0L * im / norm)};
}

} // namespace

SpurLines extract_spurs(const Waveform& w, double f_c, double f_noise, Window window) {
  if (w.v.empty() || !(w.sample_rate > 0.0)) throw ValidationError("empty waveform");
  if (!(f_c > f_noise) || !(f_noise > 0.0)) throw ValidationError("need f_c > f_noise > 0");
  if (window == Window::rectangular_coherent) {
    const double bin = w.sample_rate / static_cast<double>(w.v.size());
    for (double f : {f_c, f_c + f_noise, f_c - f_noise})
      if (!is_integer(f / bin)) throw ValidationError(fmt::format("{} Hz is not on the DFT grid", f));
  }
  return {tone(w, f_c + f_noise, window), tone(w, f_c - f_noise, window), tone(w, f_c, window)};
}

double bessel_j(int n, double x) {
  if (n < 0) return (n % 2 ? -1.0 : 1.0) * bessel_j(-n, x);
  // Power series; long double keeps the cancellation in check up to |x| ~ 10.
  const long double h = static_cast<long double>(x) / 2.0L;
  long double term = 1.0L;
  for (int k = 1; k <= n; ++k) term *= h / k;
  long double sum = term;
  const long double h2 = h * h;
  for (int k = 1; k < 200; ++k) {
    term *= -h2 / (static_cast<long double>(k) * (k + n));
    sum += term;
    if (std::abs(term) < 1e-22L * std::max(1.0L, std::abs(sum))) break;
  }
  return static_cast<double>(sum);
}

double bessel_fm(double a_c, double beta, int n) {
  if (n < 0) throw ValidationError("bessel_fm: n must be >= 0");
  return a_c * bessel_j(n, beta);
}

std::vector<Complex> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  std::vector<Complex> twiddle(n);
  for (std::size_t k = 0; k < n; ++k) twiddle[k] = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * twiddle[(k * i) % n];
    out[k] = acc;
  }
  return out;
}

std::string waveform_to_csv(const Waveform& w) {
  std::string out = "t,v\n";
  for (std::size_t i = 0; i < w.v.size(); ++i)
    out += fmt::format("{:.12e},{:.12e}\n", static_cast<double>(i) / w.sample_rate, w.v[i]);
  return out;
}

} // namespace subnoise
