#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "srnam/checkpoint.hpp"
#include "srnam/errors.hpp"
#include "srnam/rng.hpp"

namespace fs = std::filesystem;

namespace srnam::cli {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

int64_t parse_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a real number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<int64_t> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int64_t> out;
  size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) bad_value(key, v, "a comma-separated list of integers");
    out.push_back(parse_int(key, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

torch::Dtype parse_dtype(const std::string& key, const std::string& v) {
  if (v == "float32") return torch::kFloat;
  if (v == "float64") return torch::kDouble;
  bad_value(key, v, "float32 or float64");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

void apply_adam(AdamSettings& adam, const std::string& field, const std::string& key, const std::string& v) {
  if (field == "learning_rate") adam.learning_rate = parse_real(key, v);
  else if (field == "beta1") adam.beta1 = parse_real(key, v);
  else if (field == "beta2") adam.beta2 = parse_real(key, v);
  else adam.epsilon = parse_real(key, v);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["seed"] = [](RunConfig&, const std::string&, const std::string&) {};  // applied up front
    t["output.dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; };
    t["threads"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_int(k, v); };
    t["log.every"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.log_every = parse_int(k, v); };

    for (const std::string role : {"hr", "lr"}) {
      auto spec = [role](RunConfig& c) -> DataSpec& { return role == "hr" ? c.hr : c.lr; };
      t["data." + role + ".manifest"] = [spec](RunConfig& c, const std::string&, const std::string& v) {
        spec(c).manifest = fs::path(v);
      };
      t["data." + role + ".synthetic_count"] = [spec](RunConfig& c, const std::string& k, const std::string& v) {
        spec(c).synthetic_count = parse_int(k, v);
      };
      t["data." + role + ".synthetic_seed"] = [spec](RunConfig& c, const std::string& k, const std::string& v) {
        spec(c).synthetic_seed = parse_uint(k, v);
      };
    }

    t["degrader.iterations"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.iterations = parse_int(k, v); };
    t["degrader.d_steps"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.d_steps_per_g_step = parse_int(k, v); };
    t["degrader.gp_lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.gp_lambda = parse_real(k, v); };
    t["degrader.batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.batch_size = parse_int(k, v); };
    t["degrader.alpha"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.weights.alpha = parse_real(k, v); };
    t["degrader.beta"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.weights.beta = parse_real(k, v); };
    t["degrader.gamma"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.weights.gamma = parse_real(k, v); };
    t["degrader.delta"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.weights.delta = parse_real(k, v); };
    t["degrader.width"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.generator.width = parse_int(k, v); };
    t["degrader.disc_width"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.discriminator.width = parse_int(k, v); };
    t["degrader.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.seed = parse_uint(k, v); };
    t["degrader.data_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.data_seed = parse_uint(k, v); };
    t["degrader.dtype"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.dtype = parse_dtype(k, v); };
    t["degrader.checkpoint"] = [](RunConfig& c, const std::string&, const std::string& v) { c.degrader_checkpoint = fs::path(v); };

    t["hrgen.resolutions"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.schedule.resolutions = parse_int_list(k, v); };
    t["hrgen.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.schedule.epochs = parse_int_list(k, v); };
    t["hrgen.batch_sizes"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.schedule.batch_sizes = parse_int_list(k, v); };
    t["hrgen.fade_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.schedule.fade_fraction = parse_real(k, v); };
    t["hrgen.latent_dim"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.arch.latent_dim = parse_int(k, v); };
    t["hrgen.widths"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.arch.widths = parse_int_list(k, v); };
    t["hrgen.normalize_latent"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.arch.normalize_latent = parse_bool(k, v); };
    t["hrgen.gp_lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.gp_lambda = parse_real(k, v); };
    t["hrgen.d_steps"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.d_steps_per_g_step = parse_int(k, v); };
    t["hrgen.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.arch.seed = parse_uint(k, v); };
    t["hrgen.data_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.data_seed = parse_uint(k, v); };
    t["hrgen.sample_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.sample_seed = parse_uint(k, v); };
    t["hrgen.dtype"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.hrgen.dtype = parse_dtype(k, v); };
    t["hrgen.checkpoint"] = [](RunConfig& c, const std::string&, const std::string& v) { c.generator_checkpoint = fs::path(v); };

    t["naminvert.iterations"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.iterations = parse_int(k, v); };
    t["naminvert.num_solutions"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.num_solutions = parse_int(k, v); };
    t["naminvert.init_scale"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.init_scale = parse_real(k, v); };
    t["naminvert.sphere"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.sphere_projection = parse_bool(k, v); };
    t["naminvert.workers"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.workers = parse_int(k, v); };
    t["naminvert.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.invert.seed = parse_uint(k, v); };
    t["naminvert.noise_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_seed = parse_uint(k, v); };

    for (const std::string field : {"learning_rate", "beta1", "beta2", "epsilon"}) {
      t["degrader." + field] = [field](RunConfig& c, const std::string& k, const std::string& v) { apply_adam(c.degrader.adam, field, k, v); };
      t["hrgen." + field] = [field](RunConfig& c, const std::string& k, const std::string& v) { apply_adam(c.hrgen.adam, field, k, v); };
      t["naminvert." + field] = [field](RunConfig& c, const std::string& k, const std::string& v) { apply_adam(c.invert.adam, field, k, v); };
    }

    t["percept.backend"] = [](RunConfig& c, const std::string&, const std::string& v) { c.degrader.percept.backend = v; };
    t["percept.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.percept.seed = parse_uint(k, v); };
    t["percept.width"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.percept.width = parse_int(k, v); };
    t["percept.stages"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.degrader.percept.stages = parse_int(k, v); };
    t["percept.weights"] = [](RunConfig& c, const std::string&, const std::string& v) { c.degrader.percept.weights = v; };

    t["metrics.backend"] = [](RunConfig& c, const std::string&, const std::string& v) { c.landmark_backend = v; };
    t["metrics.sigma"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.landmark_sigma = parse_real(k, v); };
    return t;
  }();
  return table;
}

void apply_seed(RunConfig& c, uint64_t seed) {
  c.seed = seed;
  c.hr.synthetic_seed = mix_seed(seed, 1);
  c.lr.synthetic_seed = mix_seed(seed, 2);
  c.degrader.seed = mix_seed(seed, 3);
  c.degrader.data_seed = mix_seed(seed, 4);
  c.degrader.percept.seed = mix_seed(seed, 5);
  c.hrgen.arch.seed = mix_seed(seed, 6);
  c.hrgen.data_seed = mix_seed(seed, 7);
  c.hrgen.sample_seed = mix_seed(seed, 8);
  c.invert.seed = seed;
  c.noise_seed = seed;
}

void check_path(const std::optional<fs::path>& p, const std::string& key) {
  if (p && !fs::exists(*p)) throw ConfigError(key + ": path does not exist: " + p->string());
}

template <class F>
void validate_section(const char* section, F&& f) {
  try {
    f();
  } catch (const ValueError& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

}  // namespace

fs::path RunConfig::degrader_dir() const { return degrader_checkpoint.value_or(out / "degrader"); }
fs::path RunConfig::generator_dir() const { return generator_checkpoint.value_or(out / "generator"); }

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  auto key = trim(text.substr(0, eq));
  auto value = trim(text.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + text + "'");
  return {std::move(key), std::move(value)};
}

Assignments read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  Assignments out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      out.push_back(split_assignment(line));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig build_config(const Assignments& assignments) {
  RunConfig c;
  uint64_t seed = 0;
  for (const auto& [k, v] : assignments) {
    if (k == "seed") seed = parse_uint(k, v);
  }
  apply_seed(c, seed);
  const auto& table = setters();
  for (const auto& [k, v] : assignments) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError(k + ": unknown configuration key");
    it->second(c, k, v);
  }

  check_path(c.hr.manifest, "data.hr.manifest");
  check_path(c.lr.manifest, "data.lr.manifest");
  if (!c.degrader.percept.weights.empty()) check_path(c.degrader.percept.weights, "percept.weights");
  for (const char* role : {"hr", "lr"}) {
    const auto& spec = std::string(role) == "hr" ? c.hr : c.lr;
    if (spec.synthetic_count < 0) throw ConfigError(std::string("data.") + role + ".synthetic_count: must be >= 0");
    if (spec.manifest && spec.synthetic_count > 0) {
      throw ConfigError(std::string("data.") + role + ".manifest: cannot be combined with synthetic_count");
    }
  }
  if (c.threads < 1) throw ConfigError("threads: must be >= 1");
  if (c.log_every < 0) throw ConfigError("log.every: must be >= 0");
  if (c.degrader.percept.backend != "random" && c.degrader.percept.backend != "pretrained") {
    throw ConfigError("percept.backend: expected random or pretrained, got '" + c.degrader.percept.backend + "'");
  }
  if (c.landmark_backend != "synthetic") {
    throw ConfigError("metrics.backend: only the synthetic landmark backend is built in, got '" + c.landmark_backend + "'");
  }
  if (!(c.landmark_sigma > 0.0)) throw ConfigError("metrics.sigma: must be > 0");
  if (c.invert.iterations < 1 || c.invert.iterations > 10000) {
    throw ConfigError("naminvert.iterations: must lie in [1, 10000]");
  }
  if (c.invert.num_solutions < 1) throw ConfigError("naminvert.num_solutions: must be >= 1");

  validate_section("degrader", [&] { c.degrader.validate(); });
  validate_section("hrgen", [&] { c.hrgen.validate(); });
  validate_section("naminvert", [&] { c.invert.validate(); });
  return c;
}

imagedata::Dataset resolve_dataset(const DataSpec& spec, imagedata::Role role, const char* key) {
  const std::string prefix = std::string("data.") + key;
  if (spec.manifest) {
    try {
      auto ds = imagedata::load_manifest(*spec.manifest);
      if (ds.role() != role) {
        throw ConfigError(prefix + ".manifest: expected a " + imagedata::to_string(role) + " dataset");
      }
      return ds;
    } catch (const DatasetError& e) {
      throw ConfigError(prefix + ".manifest: " + e.what());
    }
  }
  if (spec.synthetic_count > 0) {
    return imagedata::synth_dataset(static_cast<size_t>(spec.synthetic_count), imagedata::role_resolution(role),
                                    spec.synthetic_seed);
  }
  throw ConfigError(prefix + ".manifest: no dataset configured (set a manifest or synthetic_count)");
}

}  // namespace srnam::cli
