#include "dds/lab.hpp"

#include "dds/dds.hpp"
#include "dds/pis.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dds {

using nlohmann::json;

void to_json(json& j, const RunConfig& c) {
  j = json{{"name", c.name},
           {"method", c.method},
           {"target", c.target},
           {"dim", c.dim},
           {"target_mean", c.target_mean},
           {"target_variance", c.target_variance},
           {"mixture_separation", c.mixture_separation},
           {"dataset", c.dataset},
           {"prior_variance", c.prior_variance},
           {"intercept", c.intercept},
           {"lgcp_grid_side", c.lgcp_grid_side},
           {"data_seed", c.data_seed},
           {"schedule", c.schedule},
           {"steps", c.steps},
           {"alpha_max", c.alpha_max},
           {"horizon", c.horizon},
           {"offset", c.offset},
           {"sigma", c.sigma},
           {"mass", c.mass},
           {"tau", c.tau},
           {"hidden", c.hidden},
           {"embedding_dim", c.embedding_dim},
           {"score_clip", c.score_clip},
           {"output_clip", c.output_clip},
           {"learning_rate", c.learning_rate},
           {"lr_decay", c.lr_decay},
           {"lr_decay_every", c.lr_decay_every},
           {"iterations", c.iterations},
           {"batch", c.batch},
           {"chunk", c.chunk},
           {"early_stop", c.early_stop},
           {"plateau_window", c.plateau_window},
           {"plateau_tolerance", c.plateau_tolerance},
           {"eval_batch", c.eval_batch},
           {"seeds", c.seeds},
           {"log_every", c.log_every},
           {"output_dir", c.output_dir},
           {"deterministic", c.deterministic},
           {"workers", c.workers},
           {"flow_probes", c.flow_probes},
           {"flow_exact", c.flow_exact ? json(*c.flow_exact) : json(nullptr)}};
}

namespace {

// Keys tolerated in config files but not part of RunConfig.
const std::set<std::string> kReservedKeys = {"preset", "library_version"};

template <typename T>
void read(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer() && !it->is_number_unsigned())
        throw ConfigError(std::string("config key '") + key + "' must be an integer");
    }
    if constexpr (std::is_same_v<T, std::vector<double>>) {
      // A scalar broadcasts to a one-element list.
      if (it->is_number()) {
        out = {it->get<double>()};
        return;
      }
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object of flat keys");
  RunConfig c;
  if (const auto p = j.find("preset"); p != j.end()) {
    if (!p->is_string()) throw ConfigError("config key 'preset' must be a string");
    c = preset(p->get<std::string>());
  }
  const json known = c;
  for (const auto& [key, value] : j.items())
    if (!known.contains(key) && !kReservedKeys.contains(key))
      throw ConfigError("unknown config key '" + key + "'");

  read(j, "name", c.name);
  read(j, "method", c.method);
  read(j, "target", c.target);
  read(j, "dim", c.dim);
  read(j, "target_mean", c.target_mean);
  read(j, "target_variance", c.target_variance);
  read(j, "mixture_separation", c.mixture_separation);
  read(j, "dataset", c.dataset);
  read(j, "prior_variance", c.prior_variance);
  read(j, "intercept", c.intercept);
  read(j, "lgcp_grid_side", c.lgcp_grid_side);
  read(j, "data_seed", c.data_seed);
  read(j, "schedule", c.schedule);
  read(j, "steps", c.steps);
  read(j, "alpha_max", c.alpha_max);
  read(j, "horizon", c.horizon);
  read(j, "offset", c.offset);
  read(j, "sigma", c.sigma);
  read(j, "mass", c.mass);
  read(j, "tau", c.tau);
  read(j, "hidden", c.hidden);
  read(j, "embedding_dim", c.embedding_dim);
  read(j, "score_clip", c.score_clip);
  read(j, "output_clip", c.output_clip);
  read(j, "learning_rate", c.learning_rate);
  read(j, "lr_decay", c.lr_decay);
  read(j, "lr_decay_every", c.lr_decay_every);
  read(j, "iterations", c.iterations);
  read(j, "batch", c.batch);
  read(j, "chunk", c.chunk);
  read(j, "early_stop", c.early_stop);
  read(j, "plateau_window", c.plateau_window);
  read(j, "plateau_tolerance", c.plateau_tolerance);
  read(j, "eval_batch", c.eval_batch);
  read(j, "seeds", c.seeds);
  read(j, "log_every", c.log_every);
  read(j, "output_dir", c.output_dir);
  read(j, "deterministic", c.deterministic);
  read(j, "workers", c.workers);
  read(j, "flow_probes", c.flow_probes);
  if (const auto f = j.find("flow_exact"); f != j.end()) {
    if (f->is_null())
      c.flow_exact.reset();
    else if (f->is_boolean())
      c.flow_exact = f->get<bool>();
    else
      throw ConfigError("config key 'flow_exact' must be a boolean or null");
  }
  if (c.name.empty()) c.name = c.target + "-" + c.method + "-k" + std::to_string(c.steps);
  return c;
}

json parse_flat_toml(const std::string& text) {
  json out = json::object();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Drop a trailing comment that is not inside a string.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const std::string where = "TOML line " + std::to_string(line_no);
    if (line.front() == '[') throw ConfigError(where + ": tables are not supported (flat keys only)");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (out.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    std::string value = line.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    // The supported scalar and array literals coincide with JSON.
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded() || parsed.is_object())
      throw ConfigError(where + ": unsupported value for '" + key + "'");
    out[key] = std::move(parsed);
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  if (path.extension() == ".json") {
    j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  } else {
    j = parse_flat_toml(buf.str());
  }
  RunConfig c = config_from_json(j);
  validate(c);
  return c;
}

namespace {

const std::set<std::string> kMethods = {"dds", "dds-lambda", "em", "pis", "udmp", "flow-ode"};
const std::set<std::string> kTargets = {"gaussian", "funnel", "mixture", "logistic", "brownian", "lgcp"};

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void validate(const RunConfig& c) {
  check(kMethods.contains(c.method), "unknown method '" + c.method + "'");
  check(kTargets.contains(c.target), "unknown target '" + c.target + "'");
  check(c.steps >= 1, "steps must be >= 1");
  check(c.sigma > 0.0 && std::isfinite(c.sigma), "sigma must be positive");
  check(c.horizon > 0.0 && std::isfinite(c.horizon), "horizon must be positive");
  check(c.alpha_max > 0.0 && std::isfinite(c.alpha_max), "alpha_max must be positive");
  check(c.offset >= 0.0, "offset must be non-negative");
  check(c.schedule == "cosine" || c.schedule == "uniform", "schedule must be 'cosine' or 'uniform'");
  check(!c.hidden.empty(), "hidden must list at least one layer");
  for (int h : c.hidden) check(h >= 1, "hidden layer sizes must be >= 1");
  check(c.embedding_dim >= 2 && c.embedding_dim % 2 == 0, "embedding_dim must be even and >= 2");
  check(c.score_clip > 0.0 && c.output_clip > 0.0, "clip bounds must be positive");
  check(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning_rate must be positive");
  check(c.lr_decay > 0.0 && c.lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
  check(c.lr_decay_every >= 1, "lr_decay_every must be >= 1");
  check(c.iterations >= 0, "iterations must be >= 0");
  check(c.batch >= 2, "batch must be >= 2");
  check(c.chunk >= 0, "chunk must be >= 0");
  check(c.plateau_window >= 1, "plateau_window must be >= 1");
  check(c.eval_batch >= 2, "eval_batch must be >= 2");
  check(!c.seeds.empty(), "seeds must not be empty");
  check(c.log_every >= 1, "log_every must be >= 1");
  check(c.workers >= 1, "workers must be >= 1");
  check(c.flow_probes >= 1, "flow_probes must be >= 1");

  if (c.target == "gaussian" || c.target == "mixture") {
    check(c.dim >= 1, "dim must be >= 1");
    check(c.target_variance > 0.0, "target_variance must be positive");
  }
  if (c.target == "gaussian")
    check(c.target_mean.size() == 1 || c.target_mean.size() == static_cast<std::size_t>(c.dim),
          "target_mean must have 1 or dim entries");
  if (c.target == "logistic") {
    check(!c.dataset.empty(), "target 'logistic' requires a dataset");
    check(c.prior_variance > 0.0, "prior_variance must be positive");
  }
  if (c.target == "lgcp") check(c.lgcp_grid_side >= 2, "lgcp_grid_side must be >= 2");
  if (c.method == "udmp") check(c.mass > 0.0, "mass must be positive");

  // Schedules that cannot be built are config errors, not runtime failures.
  try {
    if (c.method == "pis") {
      PisConfig p{c.sigma, c.horizon, c.steps, c.schedule, c.offset};
      (void)pis_plan(p);
    } else {
      const NoiseSchedule s = make_schedule(c);
      if (c.method == "em") (void)dds_plan(s, Integrator::EulerMaruyama);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid schedule: ") + e.what());
  }
}

NoiseSchedule make_schedule(const RunConfig& c) {
  if (c.schedule == "uniform") return uniform_schedule(c.steps, c.alpha_max, c.horizon, c.sigma);
  return cosine_schedule(c.steps, c.alpha_max, c.horizon, c.offset, c.sigma);
}

// ---------------------------------------------------------------------------
// Presets: one per (target, method, K) cell of the fitted-hyperparameter tables.

namespace {

struct Cell {
  double sigma;
  double alpha;  // unused for pis
  double mass;   // udmp only
};

struct TargetTable {
  std::map<int, Cell> dds, pis, udmp;
};

const std::map<std::string, TargetTable>& tables() {
  static const std::map<std::string, TargetTable> t = {
      {"funnel",
       {{{64, {1.075, 1.075, 0}}, {128, {1.075, 0.6875, 0}}, {256, {1.85, 0.3, 0}}, {512, {1.463, 0.3, 0}}},
        {{64, {1.068, 0, 0}}, {128, {0.416, 0, 0}}, {256, {0.742, 0, 0}}, {512, {0.253, 0, 0}}},
        {{64, {1.85, 1.67, 0.9}}, {128, {1.85, 3.7, 0.9}}, {256, {1.075, 2.5, 0.9}}, {512, {0.688, 3.7, 0.9}}}}},
      {"lgcp",
       {{{64, {2.1, 1.5, 0}}, {128, {2.1, 0.75, 0}}, {256, {2.1, 0.9, 0}}, {512, {2.1, 1.5, 0}}},
        {{64, {1.068, 0, 0}}, {128, {0.742, 0, 0}}, {256, {0.579, 0, 0}}, {512, {0.416, 0, 0}}},
        {{64, {1.1, 2.5, 0.4}}, {128, {1.4, 2.5, 0.4}}, {256, {1.4, 4.5, 0.4}}, {512, {1.7, 4.5, 0.4}}}}},
      {"ion",
       {{{64, {0.688, 1.463, 0}}, {128, {0.3, 1.075, 0}}, {256, {0.3, 0.688, 0}}, {512, {0.688, 0.688, 0}}},
        {{64, {0.253, 0, 0}}, {128, {0.09, 0, 0}}, {256, {0.416, 0, 0}}, {512, {0.253, 0, 0}}},
        {{64, {0.6, 3.85, 0.6}}, {128, {0.6, 3.85, 0.6}}, {256, {0.6, 3.85, 1.0}}, {512, {0.6, 3.85, 1.0}}}}},
      {"sonar",
       {{{64, {0.3, 1.65, 0}}, {128, {0.3, 1.2, 0}}, {256, {0.3, 0.75, 0}}, {512, {0.3, 0.75, 0}}},
        {{64, {0.253, 0, 0}}, {128, {0.253, 0, 0}}, {256, {0.253, 0, 0}}, {512, {0.253, 0, 0}}},
        {{64, {1.15, 1.7, 2.2}}, {128, {0.55, 1.7, 3.1}}, {256, {0.55, 2.9, 2.2}}, {512, {0.55, 2.9, 3.1}}}}},
      {"brownian",
       {{{64, {0.1, 2.35, 0}}, {128, {0.1, 1.8, 0}}, {256, {0.1, 2.35, 0}}, {512, {0.1, 1.8, 0}}},
        {{64, {0.084, 0, 0}}, {128, {0.093, 0, 0}}, {256, {0.043, 0, 0}}, {512, {0.0408, 0, 0}}},
        {{64, {0.115, 4.8, 2.2}}, {128, {0.115, 4.8, 2.2}}, {256, {0.115, 3.75, 2.2}}, {512, {0.115, 4.8, 2.2}}}}},
  };
  return t;
}

RunConfig target_base(const std::string& family) {
  RunConfig c;
  if (family == "funnel") {
    c.target = "funnel";
    c.learning_rate = 5e-3;
    // Anneals to about 2e-4 by iteration 3000.
    c.lr_decay = 0.9;
    c.lr_decay_every = 100;
    c.iterations = 3000;
    // The funnel batch loss is noisy enough to trip the plateau rule early.
    c.early_stop = false;
  } else {
    c.learning_rate = 1e-4;
    c.iterations = 3000;
    if (family == "lgcp") {
      c.target = "lgcp";
      c.lgcp_grid_side = 8;
    } else if (family == "ion") {
      c.target = "logistic";
      c.dataset = "ionosphere_synthetic.csv";
    } else if (family == "sonar") {
      c.target = "logistic";
      c.dataset = "sonar_synthetic.csv";
    } else {
      c.target = "brownian";
    }
  }
  return c;
}

std::string preset_key(const std::string& family, const std::string& method, int k) {
  return family + "-" + method + "-k" + std::to_string(k);
}

std::map<std::string, RunConfig> build_presets() {
  std::map<std::string, RunConfig> out;
  for (const auto& [family, table] : tables()) {
    auto add = [&](const std::string& method, int k, const Cell& cell) {
      RunConfig c = target_base(family);
      c.method = method;
      c.steps = k;
      c.horizon = 0.05 * k;
      c.sigma = cell.sigma;
      if (method == "pis") {
        c.schedule = "uniform";
      } else {
        c.alpha_max = cell.alpha;
      }
      if (method == "udmp") c.mass = cell.mass;
      c.name = preset_key(family, method, k);
      out[c.name] = c;
    };
    for (const auto& [k, cell] : table.dds) {
      add("dds", k, cell);
      // Euler-Maruyama ablation on the DDS hyperparameters.
      add("em", k, cell);
    }
    for (const auto& [k, cell] : table.pis) add("pis", k, cell);
    for (const auto& [k, cell] : table.udmp) add("udmp", k, cell);
  }

  // Gaussian N((6, 6), I): the closed-form drift is available at sigma = 1.
  RunConfig g;
  g.name = "gaussian-dds-k64";
  g.target = "gaussian";
  g.dim = 2;
  g.target_mean = {6.0};
  g.target_variance = 1.0;
  g.sigma = 1.0;
  g.steps = 64;
  g.alpha_max = 8.0;
  g.horizon = 1.0;
  g.learning_rate = 1e-3;
  g.iterations = 1500;
  g.early_stop = false;
  out[g.name] = g;

  RunConfig f = g;
  f.name = "gaussian-flow-k256";
  f.method = "flow-ode";
  f.dim = 1;
  f.steps = 256;
  f.flow_exact = true;
  out[f.name] = f;
  return out;
}

const std::map<std::string, RunConfig>& presets() {
  static const std::map<std::string, RunConfig> p = build_presets();
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, c] : presets()) names.push_back(name);
  return names;
}

RunConfig preset(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("DDS_LAB_DATA"); env && *env) return env;
#ifdef DDS_LAB_DATA_DIR
  return DDS_LAB_DATA_DIR;
#else
  return "data";
#endif
}

std::filesystem::path output_root(const RunConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("DDS_LAB_OUTPUT"); env && *env) return env;
  return "runs";
}

std::string library_version() { return DDS_LAB_VERSION; }

}  // namespace dds
