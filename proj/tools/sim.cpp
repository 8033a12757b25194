// sim: run a named scenario or print closed-form quantities.
//
//   sim <scenario> [--config FILE] [--set key=value]... [--seed N] [--out DIR]
//       [--formats csv,json,svg] [--workers N] [--paper-scale]
//   sim calc [--config FILE] [--set key=value]...
//   sim defaults <scenario>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cqed/cli.hpp"

namespace {

constexpr const char* kOutEnv = "CQED_SIM_OUT";

struct Options {
  std::string scenario;
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string formats;
  std::optional<int> workers;
  bool paper_scale = false;
};

int run(const Options& o) {
  using namespace cqed;
  const auto file = o.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.config);
  if (o.scenario == "calc") {
    const RunConfig cfg = parse_config("calc", file, o.overrides);
    for (const std::string& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << calc_results(system_from(cfg.params)).dump(2) << "\n";
    return kExitOk;
  }
  RunConfig cfg = parse_config(o.scenario, file, o.overrides, o.paper_scale);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers must be >= 1");
    cfg.workers = *o.workers;
  }
  if (!o.formats.empty()) cfg.formats = parse_formats(o.formats);
  // --out, then run.out_dir from the file, then the environment
  if (!o.out.empty()) {
    cfg.out_dir = o.out;
  } else if (const char* env = std::getenv(kOutEnv); cfg.out_dir.empty() && env != nullptr && *env != '\0') {
    cfg.out_dir = env;
  }
  for (const std::string& w : cfg.warnings) std::cerr << "warning: " << w << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  RunContext ctx;
  ctx.seed = cfg.seed;
  ctx.workers = cfg.workers;
  const ScenarioOutput out = run_scenario(cfg.scenario, cfg.params, ctx);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& path : write_outputs(cfg, out, runtime)) std::cout << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-atom circuit QED simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--set", o.overrides, "parameter override key=value (repeatable)");
  };

  for (const std::string& name : cqed::scenario_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " scenario");
    add_common(sub);
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, std::string("output directory (default $") + kOutEnv + " or ./out)");
    sub->add_option("--formats", o.formats, "comma separated subset of csv,json,svg");
    sub->add_option("--workers", o.workers, "worker threads for sweeps and benchmarking");
    sub->add_flag("--paper-scale", o.paper_scale, "full benchmarking statistics (rb, leakage)");
    sub->callback([&o, name] { o.scenario = name; });
  }
  CLI::App* calc = app.add_subcommand("calc", "print effective couplings, swap times and idle frequencies");
  add_common(calc);
  calc->callback([&o] { o.scenario = "calc"; });

  std::string defaults_for;
  CLI::App* defaults = app.add_subcommand("defaults", "print the default config of a scenario");
  defaults->add_option("scenario", defaults_for, "scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cqed::kExitOk : cqed::kExitConfig;
  }

  try {
    if (defaults->parsed()) {
      std::cout << cqed::render_config(defaults_for == "calc" ? cqed::calc_defaults()
                                                              : cqed::scenario_defaults(defaults_for));
      return cqed::kExitOk;
    }
    return run(o);
  } catch (const cqed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cqed::kExitConfig;
  } catch (const cqed::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cqed::kExitConfig;
  } catch (const cqed::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return cqed::kExitIo;
  } catch (const cqed::Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return cqed::kExitContract;
  }
}
