#pragma once

#include "dds/driftnet.hpp"
#include "dds/flowode.hpp"
#include "dds/sampler.hpp"
#include "dds/schedule.hpp"
#include "dds/targets.hpp"
#include "dds/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dds {

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Flat experiment configuration; every field maps to one key of the config file.
struct RunConfig {
  std::string name;
  std::string method = "dds";  // dds | dds-lambda | em | pis | udmp | flow-ode
  std::string target = "funnel";

  // Target parameters (only those relevant to `target` are read).
  int dim = 2;
  std::vector<double> target_mean = {0.0};
  double target_variance = 1.0;
  double mixture_separation = 3.0;
  std::string dataset;
  double prior_variance = 1.0;
  bool intercept = true;
  int lgcp_grid_side = 8;
  std::uint64_t data_seed = 0;

  // Schedule.
  std::string schedule = "cosine";  // cosine | uniform (for pis: the delta grid)
  int steps = 64;
  double alpha_max = 1.075;
  double horizon = 3.2;
  double offset = 0.008;
  double sigma = 1.075;
  double mass = 1.0;
  double tau = 0.0;

  // Network.
  std::vector<int> hidden = {64, 64};
  int embedding_dim = 64;
  double score_clip = 1e2;
  double output_clip = 1e4;

  // Optimization.
  double learning_rate = 1e-4;
  double lr_decay = 1.0;
  long lr_decay_every = 1;
  long iterations = 3000;
  long batch = 300;
  long chunk = 100;
  bool early_stop = true;
  long plateau_window = 200;
  double plateau_tolerance = 1e-3;

  // Evaluation and output.
  long eval_batch = 2000;
  std::vector<std::uint64_t> seeds = {0};
  long log_every = 10;
  std::string output_dir;
  bool deterministic = false;
  int workers = 1;
  int flow_probes = 1;
  std::optional<bool> flow_exact;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Unknown keys and type mismatches raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

// Flat TOML subset: `key = value` lines with strings, numbers, booleans and
// one-line arrays; `#` comments. Tables are rejected.
nlohmann::json parse_flat_toml(const std::string& text);
// Reads JSON (by extension .json) or TOML. A "preset" key seeds the defaults.
RunConfig load_config(const std::filesystem::path& path);

// Checks method/target requirements; throws ConfigError.
void validate(const RunConfig& c);

std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

// Directory holding the shipped dataset fixtures.
std::filesystem::path data_directory();

TargetPtr make_target(const RunConfig& c);
NoiseSchedule make_schedule(const RunConfig& c);
std::unique_ptr<PathSampler> make_sampler(const RunConfig& c, TargetPtr target);
DriftArchitecture make_architecture(const RunConfig& c, const PathSampler& sampler);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | diverged
  long iterations = 0;
  long diverged_at = -1;
  std::string message;
  LogZReport report;
};

struct RunSummary {
  RunConfig config;
  std::vector<SeedOutcome> seeds;
  std::string status = "ok";
  std::optional<double> median;
  std::optional<double> lower_quartile;
  std::optional<double> upper_quartile;
  std::filesystem::path directory;
};

nlohmann::json summary_json(const RunSummary& s);

// Trains (unless nothing is trainable) and evaluates every seed. Artifacts go
// to <output_dir>/<name>: config.json, trace_seed<S>.jsonl, samples_seed<S>.csv,
// checkpoint_seed<S>.bin and summary.json.
// Progress lines go to `progress` when given.
RunSummary run(const RunConfig& config, std::ostream* progress = nullptr);

struct SweepRow {
  std::string cell;
  nlohmann::json overrides;
  RunSummary summary;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<std::size_t> best;
  std::filesystem::path csv;
};

// Grid file: {"base": {...} or "preset": name, "axes": {key: [values...]}}.
// Runs the Cartesian product (at most 64 cells); a failing cell is recorded and
// the sweep continues.
SweepResult sweep(const nlohmann::json& grid, std::ostream* progress = nullptr);
// Best cell: median closest to ln Z from below when ln Z is known, else the largest median.
std::optional<std::size_t> select_best(const std::vector<SweepRow>& rows, std::optional<double> log_z);

// Re-evaluates a saved network on the target of `target_preset`; the
// checkpoint's embedded config supplies the method and schedule.
struct CheckpointEstimate {
  RunConfig config;
  LogZReport report;
};
CheckpointEstimate estimate_from_checkpoint(const std::filesystem::path& checkpoint,
                                            const std::string& target_preset, long n,
                                            std::uint64_t seed);

// Output root: config.output_dir, else $DDS_LAB_OUTPUT, else "runs".
std::filesystem::path output_root(const RunConfig& c);

std::string library_version();

}  // namespace dds
