// subnoise: substrate noise impact simulator for LC-tank VCOs.
//
//   subnoise extract      --config project.json [--out DIR]
//   subnoise transfer     --config project.json [sweep flags] [--format csv|json]
//   subnoise impact       --config project.json [sweep flags] [--noise-dbm P] [--vtune V ...]
//   subnoise contrib      --config project.json [sweep flags]
//   subnoise whatif       --config project.json --factor 2
//   subnoise oracle-check [--config project.json] [--cases a,b]
//   subnoise calibrate    --config project.json
//
// Exit codes: 0 success, 1 validation, 2 solver, 3 oracle tolerance failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string_view>

#include <CLI11.hpp>

#include "subnoise/error.hpp"
#include "subnoise/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<double> f_start, f_stop, noise_dbm;
  std::optional<int> ppd;
  std::vector<double> vtune;
  double factor = 2.0;
  std::string out;
  std::string format = "csv";
  std::optional<std::string> cases;
};

subnoise::ProjectConfig make_config(const Flags& f, bool required) {
  subnoise::ProjectConfig c;
  if (!f.config.empty()) c = subnoise::read_config(f.config);
  else if (required) throw subnoise::ValidationError("--config is required");
  if (f.f_start) c.f_start = *f.f_start;
  if (f.f_stop) c.f_stop = *f.f_stop;
  if (f.ppd) c.points_per_decade = *f.ppd;
  if (f.f_start || f.f_stop || f.ppd) c.frequencies.clear();
  if (f.noise_dbm) c.noise_dbm = *f.noise_dbm;
  if (!f.vtune.empty()) c.vtune = f.vtune;
  if (!f.out.empty()) c.output_dir = f.out;
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Substrate noise impact simulator"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Project JSON");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--format", flags.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto add_sweep = [&](CLI::App* sub) {
    sub->add_option("--freq-start", flags.f_start, "First noise frequency (Hz)");
    sub->add_option("--freq-stop", flags.f_stop, "Last noise frequency (Hz)");
    sub->add_option("--points-per-decade", flags.ppd, "Sweep density");
    sub->add_option("--noise-dbm", flags.noise_dbm, "Injected noise power (dBm)");
    sub->add_option("--vtune", flags.vtune, "Tuning voltage(s)")->delimiter(',');
  };

  auto* extract = app.add_subcommand("extract", "Build mesh, macro-model and interconnect netlists");
  add_common(extract);
  auto* transfer = app.add_subcommand("transfer", "Substrate transfer to every VCO entry");
  add_common(transfer);
  add_sweep(transfer);
  auto* impact = app.add_subcommand("impact", "Spur report over the noise sweep");
  add_common(impact);
  add_sweep(impact);
  auto* contrib = app.add_subcommand("contrib", "Per-path contribution breakdown");
  add_common(contrib);
  add_sweep(contrib);
  auto* whatif = app.add_subcommand("whatif", "Impact change after widening ground interconnect");
  add_common(whatif);
  add_sweep(whatif);
  whatif->add_option("--factor", flags.factor, "Ground width factor")->check(CLI::PositiveNumber);
  auto* oracle = app.add_subcommand("oracle-check", "Narrowband formulas versus time-domain oracle");
  add_common(oracle);
  oracle->add_option("--cases", flags.cases, "Comma-separated case names; empty runs none");
  auto* calibrate = app.add_subcommand("calibrate", "Solve for the mesh conductance scale");
  add_common(calibrate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; any usage error is a validation failure.
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto format = flags.format == "json" ? subnoise::Format::json : subnoise::Format::csv;
  try {
    subnoise::CommandOutput out;
    if (*extract) out = subnoise::cmd_extract(make_config(flags, true));
    else if (*transfer) out = subnoise::cmd_transfer(make_config(flags, true), format);
    else if (*impact) out = subnoise::cmd_impact(make_config(flags, true), format);
    else if (*contrib) out = subnoise::cmd_contrib(make_config(flags, true), format);
    else if (*whatif) out = subnoise::cmd_whatif(make_config(flags, true), flags.factor, format);
    else if (*oracle) {
      std::optional<std::vector<std::string>> sel;
      if (flags.cases) {
        sel.emplace();
        std::string_view rest = *flags.cases;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          const std::string_view name = rest.substr(0, comma);
          if (!name.empty()) sel->emplace_back(name);
          rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
        }
      }
      out = subnoise::cmd_oracle_check(make_config(flags, false), format, sel);
    } else if (*calibrate) out = subnoise::cmd_calibrate(make_config(flags, true));
    std::fputs(out.text.c_str(), stdout);
    return out.exit_code;
  } catch (const subnoise::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const subnoise::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    for (const auto& s : e.suspects()) std::cerr << "  suspect: " << s << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
