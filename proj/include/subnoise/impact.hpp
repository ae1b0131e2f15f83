#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subnoise/devices.hpp"
#include "subnoise/netlist.hpp"
#include "subnoise/solver.hpp"

namespace subnoise {

enum class TankLaw {
  varactor,  // tanh varactor plus fixed C
  linear,    // C0 * (1 + gamma * V) plus fixed C
};

struct Tank {
  double inductance = 1e-9;
  TankLaw law = TankLaw::varactor;
  VaractorModel varactor;
  double c0 = 0.0;
  double gamma = 0.0;
  double fixed_capacitance = 0.0;

  double capacitance(double v) const;
};

// 1 / (2 pi sqrt(L C(v)))
double oscillation_frequency(const Tank& tank, double v);

struct VcoEntry {
  std::string path_label;
  std::string node;       // observation node of the transfer
  std::string reference;  // empty means ground
  // K = control_gain * df/dV_tune unless `k` pins it directly.
  double control_gain = 0.0;
  std::optional<double> k;
  double g_am = 0.0;      // 1/V
};

struct VcoModel {
  double amplitude = 1.0;  // A_c, V
  Tank tank;
  double vtune = 0.0;
  std::vector<VcoEntry> entries;

  double carrier_frequency() const { return oscillation_frequency(tank, vtune); }
  void validate() const;
};

struct NoiseSource {
  double amplitude = 0.0;  // V
  double frequency = 0.0;  // Hz
  std::string injection_node = "SUB";
  double source_impedance = 50.0;
};

// Central difference of the oscillation frequency with a 1 mV step, times
// the entry's control gain.
double sensitivity_K(const VcoModel& vco, std::string_view path_label);

// Narrowband modulation index |H| A_noise K / f_noise.
double fm_beta(Complex h, double a_noise, double k, double f_noise);

// A_c H A_noise K / (2 j f_noise): narrowband FM line with the integration phase.
Complex fm_spur(double a_c, Complex h, double a_noise, double k, double f_noise);

// A_c H A_noise G_AM / 2
Complex am_spur(double a_c, Complex h, double a_noise, double g_am);

inline constexpr double kNarrowbandLimit = 0.3;
inline constexpr double kFloorDbm = -300.0;

// Sideband phasors of one path. upper() is the f_c + f_noise line and
// lower() the f_c - f_noise line, both relative to cos(2 pi f_c t).
struct PathSpur {
  std::string path_label;
  Complex h;
  double k = 0.0;
  Complex fm;
  Complex am;
  double beta = 0.0;

  Complex upper() const { return am + Complex(0, 1) * fm; }
  Complex lower() const { return std::conj(am) + Complex(0, 1) * std::conj(fm); }
};

struct SpurReport {
  double f_noise = 0.0;
  double f_c = 0.0;
  double source_impedance = 50.0;
  std::vector<PathSpur> paths;
  Complex upper;
  Complex lower;
  std::vector<std::string> warnings;

  double upper_dbm() const;
  double lower_dbm() const;
  // 10 log10 of the summed power of both sidebands.
  double combined_dbm() const;
  double path_fm_dbm(std::size_t i) const;
  double path_am_dbm(std::size_t i) const;
  double path_combined_dbm(std::size_t i) const;
};

// Power in dBm of a peak amplitude, floored at kFloorDbm.
double spur_dbm(double volts, double ohms);

SpurReport spur_report(const VcoModel& vco, const NoiseSource& noise, std::span<const TransferFunction> transfers);

// Same noise amplitude at every frequency.
std::vector<SpurReport> spur_sweep(const VcoModel& vco, NoiseSource noise,
                                   std::span<const TransferFunction> transfers,
                                   std::span<const double> frequencies);

struct Sample {
  double frequency = 0.0;
  double dbm = 0.0;
};

struct Classification {
  double slope_db_per_decade = 0.0;
  std::vector<std::string> mechanisms;
};

// Least-squares slope in dB/decade, then bands of +-3 dB/dec around -20, 0
// and +20. Throws ValidationError("insufficient span") for fewer than three
// samples or less than one decade.
Classification classify_mechanism(std::span<const Sample> samples);

struct Contribution {
  std::string path_label;
  double dbm = 0.0;
  double share = 0.0;
};

struct Breakdown {
  std::vector<Contribution> items;  // descending by power
  double share_sum = 0.0;
  bool destructive = false;         // shares add to more than one
};

// Shares are per-path combined sideband power over the total combined power.
Breakdown contribution_breakdown(const SpurReport& report);

struct Crossover {
  bool found = false;
  double frequency = 0.0;
  bool extrapolated = false;
};

// Intersection of the least-squares dB-versus-log f lines of two paths.
Crossover crossover(std::span<const Sample> a, std::span<const Sample> b);

std::vector<Sample> path_samples(std::span<const SpurReport> sweep, std::string_view path_label);
std::vector<Sample> total_samples(std::span<const SpurReport> sweep);

// Columns: f_noise_hz,path_label,fm_dbm,am_dbm,upper_total_dbm,lower_total_dbm,combined_total_dbm
std::string sweep_to_csv(std::span<const SpurReport> sweep);
nlohmann::json sweep_to_json(std::span<const SpurReport> sweep);

VcoModel vco_from_json(const nlohmann::json& j);

} // namespace subnoise
