#include "dds/lab.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

nlohmann::json read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dds::ConfigError("cannot open grid '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw dds::ConfigError("grid '" + path + "' is not valid JSON");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Denoising diffusion samplers: training, sampling and log-Z estimation"};
  app.set_version_flag("--version", dds::library_version());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train and evaluate one configuration over its seeds");
  std::string config_path, preset_name, out_dir;
  std::optional<std::uint64_t> seed;
  bool deterministic = false, quiet = false;
  auto* cfg_opt = run->add_option("--config", config_path, "TOML or JSON config file");
  auto* preset_opt = run->add_option("--preset", preset_name, "Named preset instead of a config file");
  cfg_opt->excludes(preset_opt);
  run->add_option("--seed", seed, "Run this single seed instead of the configured list");
  run->add_flag("--deterministic", deterministic, "Zero wallclock fields so traces replay byte for byte");
  run->add_option("--out", out_dir, "Output root (overrides config and DDS_LAB_OUTPUT)");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of configurations (at most 64 cells)");
  std::string grid_path;
  sweep->add_option("--grid", grid_path, "JSON grid file")->required();
  sweep->add_option("--out", out_dir, "Output root");
  sweep->add_flag("-q,--quiet", quiet, "No progress output");

  auto* estimate = app.add_subcommand("estimate-z", "Evaluate a checkpoint's log-Z estimate");
  std::string checkpoint, target_preset;
  long n = 2000;
  std::uint64_t eval_seed = 0;
  estimate->add_option("--checkpoint", checkpoint, "Checkpoint written by 'run'")->required();
  estimate->add_option("--target", target_preset, "Preset supplying the target")->required();
  estimate->add_option("--n", n, "Number of samples")->capture_default_str();
  estimate->add_option("--seed", eval_seed, "Evaluation seed")->capture_default_str();

  auto* presets = app.add_subcommand("presets", "List presets, or print one as JSON");
  std::string show;
  presets->add_option("--show", show, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::ostream* progress = quiet ? nullptr : &std::cerr;
    if (*run) {
      if (config_path.empty() && preset_name.empty())
        throw dds::ConfigError("run needs --config or --preset");
      dds::RunConfig c = config_path.empty() ? dds::preset(preset_name) : dds::load_config(config_path);
      if (seed) c.seeds = {*seed};
      if (deterministic) c.deterministic = true;
      if (!out_dir.empty()) c.output_dir = out_dir;
      dds::validate(c);
      const dds::RunSummary s = dds::run(c, progress);
      std::cout << dds::summary_json(s).dump(2) << '\n';
      return s.status == "ok" ? kExitOk : kExitDiverged;
    }
    if (*sweep) {
      auto grid = read_grid(grid_path);
      if (!out_dir.empty()) {
        if (!grid.contains("base")) grid["base"] = nlohmann::json::object();
        grid["base"]["output_dir"] = out_dir;
      }
      const dds::SweepResult r = dds::sweep(grid, progress);
      std::cout << "wrote " << r.csv.string() << '\n';
      if (r.best) std::cout << "best cell: " << r.rows[*r.best].cell << '\n';
      return kExitOk;
    }
    if (*estimate) {
      const auto e = dds::estimate_from_checkpoint(checkpoint, target_preset, n, eval_seed);
      nlohmann::json out{{"ln_z_is", e.report.ln_z_is},   {"ln_z_is_se", e.report.ln_z_is_se},
                         {"elbo", e.report.elbo},         {"elbo_se", e.report.elbo_se},
                         {"samples", e.report.samples},   {"method", e.config.method},
                         {"target", e.config.target},     {"library_version", dds::library_version()}};
      std::cout << out.dump(2) << '\n';
      return kExitOk;
    }
    if (*presets) {
      if (!show.empty()) {
        std::cout << nlohmann::json(dds::preset(show)).dump(2) << '\n';
      } else {
        for (const auto& name : dds::preset_names()) std::cout << name << '\n';
      }
      return kExitOk;
    }
  } catch (const dds::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dds::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}
