#pragma once

#include <span>
#include <string>
#include <vector>

#include "subnoise/impact.hpp"

namespace subnoise {

enum class Window { rectangular_coherent, hann };

struct WaveformSpec {
  double sample_rate = 0.0;  // Hz
  double duration = 0.0;     // s
  Window window = Window::rectangular_coherent;

  // Sampling above Nyquist for f_c + f_noise; in coherent mode both tones
  // must complete an integer number of periods.
  void validate(double f_c, double f_noise) const;
  std::size_t samples() const;
};

// One noise period, power-of-two sample count with at least `oversample`
// samples per period of f_c + f_noise. f_c must be a multiple of f_noise.
WaveformSpec coherent_spec(double f_c, double f_noise, double oversample = 4.0);

// f_c rounded to the nearest positive multiple of f_noise.
double snap_carrier(double f_c, double f_noise);

struct ModulationPath {
  Complex h;          // substrate transfer at f_noise
  double k = 0.0;     // Hz/V
  double g_am = 0.0;  // 1/V
};

struct Waveform {
  double sample_rate = 0.0;
  std::vector<double> v;
};

// Closed-form modulated carrier for a sinusoidal noise tone:
// A_c (1 + sum G |H| A cos(w t + arg H)) cos(2 pi f_c t + sum K |H| A / f sin(w t + arg H)).
Waveform synthesize(double a_c, double f_c, double a_noise, double f_noise, std::span<const ModulationPath> paths,
                    const WaveformSpec& spec);

// Same, with K, G_AM and H taken from the VCO entries and transfers. The
// carrier is used as given; callers snap it for coherent sampling.
Waveform synthesize(const VcoModel& vco, const NoiseSource& noise, std::span<const TransferFunction> transfers,
                    const WaveformSpec& spec, double f_c);

struct SpurLines {
  Complex upper;    // phasors relative to cos(2 pi f t)
  Complex lower;
  Complex carrier;
};

// Windowed single-frequency DFT at f_c and f_c +- f_noise. Coherent mode
// requires the three frequencies to fall on DFT bins.
SpurLines extract_spurs(const Waveform& w, double f_c, double f_noise, Window window);

double bessel_j(int n, double x);
double bessel_fm(double a_c, double beta, int n);

// Full DFT, X[k] = sum_n x[n] exp(-2 pi j k n / N).
std::vector<Complex> dft(std::span<const double> x);

// (t, v) rows.
std::string waveform_to_csv(const Waveform& w);

} // namespace subnoise
