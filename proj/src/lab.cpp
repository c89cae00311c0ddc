#include "dds/lab.hpp"

#include "dds/dds.hpp"
#include "dds/numerics.hpp"
#include "dds/pis.hpp"
#include "dds/rng.hpp"
#include "dds/underdamped.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dds {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve_dataset(const std::string& name) {
  const fs::path p(name);
  if (p.is_absolute() || fs::exists(p)) return p;
  return data_directory() / p;
}

}  // namespace

TargetPtr make_target(const RunConfig& c) {
  if (c.target == "funnel") return funnel_target();
  if (c.target == "gaussian") {
    Vector mu = c.target_mean.size() == 1
                    ? Vector::Constant(c.dim, c.target_mean.front())
                    : Eigen::Map<const Vector>(c.target_mean.data(), c.dim).eval();
    return gaussian_target(std::move(mu), c.target_variance);
  }
  if (c.target == "mixture") {
    const Vector m = Vector::Constant(c.dim, c.mixture_separation);
    return mixture_target({-m, m}, {0.5, 0.5}, c.target_variance);
  }
  if (c.target == "logistic")
    return logistic_regression_target(load_csv_dataset(resolve_dataset(c.dataset)), c.prior_variance,
                                      c.intercept);
  if (c.target == "brownian") {
    // Ground-truth scales of the standard missing-middle benchmark.
    RngStream rng(c.data_seed, 1);
    return brownian_target(synthetic_brownian_observations(rng, 0.1, 0.15));
  }
  if (c.target == "lgcp") {
    LgcpParams p;
    p.grid_side = c.lgcp_grid_side;
    RngStream rng(c.data_seed, 2);
    Vector counts = synthetic_lgcp_counts(p, rng);
    return lgcp_target(p, std::move(counts));
  }
  throw ConfigError("unknown target '" + c.target + "'");
}

std::unique_ptr<PathSampler> make_sampler(const RunConfig& c, TargetPtr target) {
  if (c.method == "pis") {
    PisConfig p{c.sigma, c.horizon, c.steps, c.schedule, c.offset};
    return make_pis_sampler(p, std::move(target));
  }
  if (c.method == "udmp")
    return std::make_unique<UnderdampedSampler>(make_schedule(c), UnderdampedConfig{c.mass, c.tau},
                                                std::move(target));
  Integrator integ = Integrator::Exponential;
  if (c.method == "dds-lambda") integ = Integrator::ExponentialLambda;
  if (c.method == "em") integ = Integrator::EulerMaruyama;
  // flow-ode trains the exponential-integrator SDE and reuses its network.
  return make_dds_sampler(make_schedule(c), std::move(target), integ);
}

DriftArchitecture make_architecture(const RunConfig& c, const PathSampler& sampler) {
  DriftArchitecture a = sampler.default_architecture();
  a.hidden = c.hidden;
  a.embedding_dim = c.embedding_dim;
  a.score_clip = c.score_clip;
  a.output_clip = c.output_clip;
  return a;
}

namespace {

struct Evaluation {
  LogZReport report;
  Matrix samples;
};

Evaluation evaluate(const RunConfig& c, const PathSampler& sampler, const TargetPtr& target,
                    const DriftNetwork& net, long n, RngStream rng) {
  if (c.method == "flow-ode") {
    FlowOptions opt;
    opt.exact = c.flow_exact;
    opt.probes = c.flow_probes;
    FlowResult r =
        flow_sample_and_logdensity(flow_field(as_drift_fn(net), target), make_schedule(c), *target, n, rng, opt);
    return {std::move(r.report), std::move(r.samples)};
  }
  BatchResult b = sampler.simulate(as_drift_fn(net), n, rng);
  return {summarize_log_weights(b.log_weights.transpose()), std::move(b.samples)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json header_json(const RunConfig& c) {
  return json{{"config", c}, {"library_version", library_version()}};
}

void write_samples(const fs::path& path, const RunConfig& c, const Evaluation& e) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "# dds-lab " << library_version() << " config=" << json(c).dump() << '\n';
  const Eigen::Index d = e.samples.rows();
  for (Eigen::Index i = 0; i < d; ++i) out << 'x' << i << ',';
  out << "log_weight\n";
  for (Eigen::Index s = 0; s < e.samples.cols(); ++s) {
    for (Eigen::Index i = 0; i < d; ++i) out << fmt(e.samples(i, s)) << ',';
    out << fmt(e.report.log_weights[s]) << '\n';
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

SeedOutcome run_seed(const RunConfig& c, const TargetPtr& target, const PathSampler& sampler,
                     std::uint64_t seed, const fs::path& dir, std::ostream* progress) {
  SeedOutcome out;
  out.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&]() -> long {
    if (c.deterministic) return 0;
    return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count());
  };

  RunConfig resolved = c;
  resolved.seeds = {seed};
  const std::string tag = "seed" + std::to_string(seed);
  std::ofstream trace(dir / ("trace_" + tag + ".jsonl"));
  if (!trace) throw Error("cannot write trace in '" + dir.string() + "'");
  json head = header_json(resolved);
  head["type"] = "header";
  trace << head.dump() << '\n';

  DriftNetwork net(make_architecture(c, sampler), seed);
  TrainConfig tc;
  tc.iterations = c.iterations;
  tc.batch = c.batch;
  tc.chunk = c.chunk;
  tc.seed = seed;
  tc.workers = c.workers;
  tc.early_stop = c.early_stop;
  tc.plateau_window = c.plateau_window;
  tc.plateau_tolerance = c.plateau_tolerance;
  tc.adam.learning_rate = c.learning_rate;
  tc.adam.decay = c.lr_decay;
  tc.adam.decay_every = c.lr_decay_every;

  auto on_iteration = [&](const IterationRecord& r) {
    if (r.iteration % c.log_every != 0) return;
    json rec{{"iter", r.iteration}, {"loss", r.loss},       {"elbo", r.elbo},
             {"ln_z_is", r.ln_z_is}, {"se", r.se},          {"seed", seed},
             {"wallclock_ms", elapsed_ms()}};
    trace << rec.dump() << '\n';
    if (progress)
      *progress << c.name << " seed " << seed << " iter " << r.iteration << " loss " << r.loss
                << " elbo " << r.elbo << '\n';
  };

  try {
    const TrainResult tr = train(sampler, net, tc, on_iteration);
    out.iterations = tr.iterations_run;
    const Evaluation e = evaluate(c, sampler, target, net, c.eval_batch, RngStream(seed, kEvaluationStream));
    out.report = e.report;
    json rec{{"type", "eval"},        {"iter", out.iterations}, {"elbo", e.report.elbo},
             {"ln_z_is", e.report.ln_z_is}, {"se", e.report.elbo_se}, {"seed", seed},
             {"wallclock_ms", elapsed_ms()}};
    trace << rec.dump() << '\n';
    write_samples(dir / ("samples_" + tag + ".csv"), resolved, e);
  } catch (const DivergedError& e) {
    out.status = "diverged";
    out.diverged_at = e.iteration();
    out.iterations = e.iteration();
    out.message = e.what();
  } catch (const NonFiniteError& e) {
    out.status = "diverged";
    out.diverged_at = out.iterations;
    out.message = e.what();
  }
  if (out.status == "diverged") {
    json rec{{"type", "diverged"}, {"iter", out.diverged_at}, {"message", out.message},
             {"seed", seed}, {"wallclock_ms", elapsed_ms()}};
    trace << rec.dump() << '\n';
  } else {
    json extra = header_json(resolved);
    extra["seed"] = seed;
    save_checkpoint(net, dir / ("checkpoint_" + tag + ".bin"), extra);
  }
  if (progress)
    *progress << c.name << " seed " << seed << " " << out.status << " ln_z_is "
              << (out.status == "ok" ? fmt(out.report.ln_z_is) : std::string("n/a")) << '\n';
  return out;
}

}  // namespace

json summary_json(const RunSummary& s) {
  json seeds = json::array();
  for (const auto& o : s.seeds) {
    json j{{"seed", o.seed}, {"status", o.status}, {"iterations", o.iterations}};
    if (o.status == "ok") {
      j["ln_z_is"] = o.report.ln_z_is;
      j["ln_z_is_se"] = o.report.ln_z_is_se;
      j["elbo"] = o.report.elbo;
      j["elbo_se"] = o.report.elbo_se;
      j["samples"] = o.report.samples;
    } else {
      j["diverged_at"] = o.diverged_at;
      j["message"] = o.message;
    }
    seeds.push_back(std::move(j));
  }
  json out = header_json(s.config);
  out["method"] = s.config.method;
  out["target"] = s.config.target;
  out["status"] = s.status;
  out["median"] = nullable(s.median);
  out["lower_quartile"] = nullable(s.lower_quartile);
  out["upper_quartile"] = nullable(s.upper_quartile);
  out["seeds"] = std::move(seeds);
  return out;
}

RunSummary run(const RunConfig& config, std::ostream* progress) {
  validate(config);
  RunSummary s;
  s.config = config;
  const TargetPtr target = make_target(config);
  const auto sampler = make_sampler(config, target);
  s.directory = output_root(config) / config.name;
  fs::create_directories(s.directory);
  write_json(s.directory / "config.json", [&] {
    json j = config;
    j["library_version"] = library_version();
    return j;
  }());

  std::vector<double> ln_z;
  for (std::uint64_t seed : config.seeds) {
    s.seeds.push_back(run_seed(config, target, *sampler, seed, s.directory, progress));
    if (s.seeds.back().status == "ok") ln_z.push_back(s.seeds.back().report.ln_z_is);
    else s.status = "diverged";
  }
  if (!ln_z.empty()) {
    s.median = quantile(ln_z, 0.5);
    s.lower_quartile = quantile(ln_z, 0.25);
    s.upper_quartile = quantile(ln_z, 0.75);
  }
  json summary = summary_json(s);
  if (const auto z = target->exact_log_z()) summary["exact_ln_z"] = *z;
  write_json(s.directory / "summary.json", summary);
  return s;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> select_best(const std::vector<SweepRow>& rows, std::optional<double> log_z) {
  std::optional<std::size_t> best;
  auto better = [&](double a, double b) {
    if (!log_z) return a > b;
    const bool a_below = a <= *log_z, b_below = b <= *log_z;
    if (a_below != b_below) return a_below;
    return std::abs(a - *log_z) < std::abs(b - *log_z);
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i].summary.median;
    if (!m) continue;
    if (!best || better(*m, *rows[*best].summary.median)) best = i;
  }
  return best;
}

SweepResult sweep(const json& grid, std::ostream* progress) {
  if (!grid.is_object()) throw ConfigError("sweep grid must be a JSON object");
  json base = json::object();
  if (const auto p = grid.find("preset"); p != grid.end()) {
    if (!p->is_string()) throw ConfigError("sweep key 'preset' must be a string");
    base = preset(p->get<std::string>());
  }
  if (const auto b = grid.find("base"); b != grid.end()) {
    if (!b->is_object()) throw ConfigError("sweep key 'base' must be an object");
    base.merge_patch(*b);
  }
  base.erase("preset");
  const RunConfig base_config = config_from_json(base);
  const std::string name = grid.value("name", "sweep");

  const json axes = grid.value("axes", json::object());
  if (!axes.is_object()) throw ConfigError("sweep key 'axes' must be an object");
  std::vector<std::pair<std::string, json>> axis_list;
  std::size_t cells = 1;
  for (const auto& [key, values] : axes.items()) {
    if (!values.is_array() || values.empty())
      throw ConfigError("sweep axis '" + key + "' must be a non-empty array");
    axis_list.emplace_back(key, values);
    cells *= values.size();
  }
  if (cells > 64) throw ConfigError("sweep grid has " + std::to_string(cells) + " cells (max 64)");

  SweepResult result;
  const fs::path root = output_root(base_config) / name;
  fs::create_directories(root);

  for (std::size_t cell = 0; cell < cells; ++cell) {
    SweepRow row;
    char label[16];
    std::snprintf(label, sizeof label, "cell-%02zu", cell);
    row.cell = label;
    row.overrides = json::object();
    std::size_t rem = cell;
    for (auto it = axis_list.rbegin(); it != axis_list.rend(); ++it) {
      row.overrides[it->first] = it->second[rem % it->second.size()];
      rem /= it->second.size();
    }
    row.summary.config = base_config;
    try {
      json cfg = base;
      cfg.merge_patch(row.overrides);
      cfg["name"] = row.cell;
      cfg["output_dir"] = root.string();
      RunConfig c = config_from_json(cfg);
      row.summary.config = c;
      row.summary = run(c, progress);
    } catch (const std::exception& e) {
      row.summary.status = dynamic_cast<const ConfigError*>(&e) ? "config-error" : "error";
      SeedOutcome o;
      o.status = row.summary.status;
      o.message = e.what();
      row.summary.seeds = {o};
    }
    result.rows.push_back(std::move(row));
  }

  std::optional<double> log_z;
  try {
    log_z = make_target(base_config)->exact_log_z();
  } catch (const Error&) {
  }
  result.best = select_best(result.rows, log_z);

  result.csv = root / "sweep.csv";
  std::ofstream csv(result.csv);
  if (!csv) throw Error("cannot write '" + result.csv.string() + "'");
  csv << "cell";
  for (const auto& [key, v] : axis_list) csv << ',' << key;
  csv << ",status,median,lower_quartile,upper_quartile,seeds_ok,best\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    csv << r.cell;
    for (const auto& [key, v] : axis_list) {
      std::string text = r.overrides[key].dump();
      for (char& ch : text)
        if (ch == ',') ch = ';';
      csv << ',' << text;
    }
    long ok = 0;
    for (const auto& o : r.summary.seeds) ok += o.status == "ok";
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
    csv << ',' << r.summary.status << ',' << opt(r.summary.median) << ',' << opt(r.summary.lower_quartile)
        << ',' << opt(r.summary.upper_quartile) << ',' << ok << ','
        << (result.best == i ? 1 : 0) << '\n';
  }

  json table = json::array();
  for (const auto& r : result.rows) {
    json j{{"cell", r.cell}, {"overrides", r.overrides}, {"status", r.summary.status},
           {"median", nullable(r.summary.median)}};
    if (!r.summary.seeds.empty() && !r.summary.seeds.front().message.empty())
      j["message"] = r.summary.seeds.front().message;
    table.push_back(std::move(j));
  }
  json summary{{"grid", grid},
               {"library_version", library_version()},
               {"exact_ln_z", nullable(log_z)},
               {"best", result.best ? json(result.rows[*result.best].cell) : json(nullptr)},
               {"cells", std::move(table)}};
  write_json(root / "sweep_summary.json", summary);
  return result;
}

// ---------------------------------------------------------------------------

CheckpointEstimate estimate_from_checkpoint(const fs::path& checkpoint, const std::string& target_preset,
                                            long n, std::uint64_t seed) {
  json header;
  const DriftNetwork net = load_checkpoint(checkpoint, &header);
  if (!header.contains("config")) throw ConfigError("checkpoint carries no run config");
  RunConfig c = config_from_json(header["config"]);
  const RunConfig p = preset(target_preset);
  c.target = p.target;
  c.dim = p.dim;
  c.target_mean = p.target_mean;
  c.target_variance = p.target_variance;
  c.mixture_separation = p.mixture_separation;
  c.dataset = p.dataset;
  c.prior_variance = p.prior_variance;
  c.intercept = p.intercept;
  c.lgcp_grid_side = p.lgcp_grid_side;
  c.data_seed = p.data_seed;
  c.eval_batch = n;
  validate(c);
  const TargetPtr target = make_target(c);
  const auto sampler = make_sampler(c, target);
  if (!(make_architecture(c, *sampler) == net.architecture()))
    throw ConfigError("checkpoint network does not fit target preset '" + target_preset + "'");
  Evaluation e = evaluate(c, *sampler, target, net, n, RngStream(seed, kEvaluationStream));
  return {c, std::move(e.report)};
}

}  // namespace dds
