#include "aeig/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>

#include "aeig/errors.hpp"
#include "aeig/text.hpp"

namespace aeig::config {

const char* to_string(Preset p) { return p == Preset::full ? "full" : "desk"; }

Preset parse_preset(const std::string& s) {
  if (s == "full") return Preset::full;
  if (s == "desk") return Preset::desk;
  throw ConfigError("unknown preset '" + s + "' (expected full or desk)");
}

GridGeometry RunConfig::solve_geom() const {
  return use_case == UseCase::tile3d ? GridGeometry::cube(grid) : GridGeometry::square(grid);
}

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  o.geom = map_geom();
  o.seed = seed;
  return o;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  const std::size_t ae_div = std::size_t{1} << ae_arch.stages;
  const std::size_t ig_div = std::size_t{1} << ig_arch.stages;
  if (grid < 4) fail("grid must be at least 4");
  if (grid % ae_div) fail("grid " + std::to_string(grid) + " is not divisible by 2^ae.stages");
  if (grid % ig_div) fail("grid " + std::to_string(grid) + " is not divisible by 2^ig.stages");
  if (!(physics.k > 0.0)) fail("physics.k must be positive");
  if (ae_arch.latent_dim == 0 || ae_arch.channels == 0 || ig_arch.channels == 0)
    fail("network widths must be positive");
  if (ae_arch.kernel % 2 == 0 || ig_arch.kernel % 2 == 0) fail("kernels must be odd");
  if (!(ae_schedule.lr > 0.0) || !(ig_schedule.schedule.lr > 0.0)) fail("learning rates must be positive");
  if (!(oracle.tol > 0.0)) fail("oracle.tol must be positive");
  if (jobs == 0) fail("jobs must be at least 1");
}

RunConfig preset_config(UseCase use_case, Preset preset) {
  RunConfig c;
  c.use_case = use_case;
  c.preset = preset;
  const bool three_d = use_case == UseCase::tile3d;
  const bool full = preset == Preset::full;
  c.grid = three_d ? (full ? 32 : 16) : (full ? 64 : 32);
  c.ae_schedule = {full ? 5000u : 2000u, 1e-4};
  c.ig_schedule.schedule = {full ? 10000u : 5000u, 1e-4};
  if (three_d) {
    c.physics.k = 5e-5;
    c.physics.velocity = {1e-3, 1e-3, 1e-3};
    c.ig_arch.channels = 8;
  } else {
    c.physics.k = 1e-3;
    c.physics.velocity = {0.0, 0.0, 0.0};
  }
  return c;
}

namespace {

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::size_t to_size(const std::string& v) {
  const long long x = text::parse_int(v);
  if (x < 0) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& v) {
  // Seeds may exceed the signed range; accept any unsigned decimal.
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || v.front() == '-')
    throw ConfigError("expected an unsigned integer, got '" + v + "'");
  return x;
}

#define AEIG_SIZE_KEY(name, field)                                              \
  Key {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.field = to_size(v); },     \
        [](const RunConfig& c) { return std::to_string(c.field); }              \
  }
#define AEIG_REAL_KEY(name, field)                                                     \
  Key {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = text::parse_double(v); }, \
        [](const RunConfig& c) { return text::format_double(c.field); }                \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"use_case", [](RunConfig& c, const std::string& v) { c.use_case = parse_use_case(v); },
       [](const RunConfig& c) { return std::string(aeig::to_string(c.use_case)); }},
      {"preset", [](RunConfig& c, const std::string& v) { c.preset = parse_preset(v); },
       [](const RunConfig& c) { return std::string(to_string(c.preset)); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      AEIG_SIZE_KEY("grid", grid),
      AEIG_REAL_KEY("physics.k", physics.k),
      AEIG_REAL_KEY("physics.vx", physics.velocity[0]),
      AEIG_REAL_KEY("physics.vy", physics.velocity[1]),
      AEIG_REAL_KEY("physics.vz", physics.velocity[2]),
      AEIG_REAL_KEY("physics.t_boundary", physics.t_boundary),
      AEIG_SIZE_KEY("ae.latent_dim", ae_arch.latent_dim),
      AEIG_SIZE_KEY("ae.channels", ae_arch.channels),
      AEIG_SIZE_KEY("ae.stages", ae_arch.stages),
      AEIG_SIZE_KEY("ae.kernel", ae_arch.kernel),
      AEIG_SIZE_KEY("ae.epochs", ae_schedule.epochs),
      AEIG_REAL_KEY("ae.lr", ae_schedule.lr),
      AEIG_SIZE_KEY("ig.channels", ig_arch.channels),
      AEIG_SIZE_KEY("ig.stages", ig_arch.stages),
      AEIG_SIZE_KEY("ig.kernel", ig_arch.kernel),
      AEIG_REAL_KEY("ig.output_scale", ig_arch.output_scale),
      AEIG_SIZE_KEY("ig.epochs", ig_schedule.schedule.epochs),
      AEIG_REAL_KEY("ig.lr", ig_schedule.schedule.lr),
      AEIG_REAL_KEY("ig.divergence_factor", ig_schedule.divergence_factor),
      AEIG_SIZE_KEY("ig.divergence_window", ig_schedule.divergence_window),
      AEIG_REAL_KEY("oracle.tol", oracle.tol),
      AEIG_SIZE_KEY("oracle.max_iterations", oracle.max_iterations),
      AEIG_REAL_KEY("oracle.omega", oracle.omega),
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out.string(); }},
      AEIG_SIZE_KEY("jobs", jobs),
      AEIG_SIZE_KEY("log_every", log_every),
  };
  return k;
}

#undef AEIG_SIZE_KEY
#undef AEIG_REAL_KEY

const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : keys()) v.push_back(k.name);
    return v;
  }();
  return names;
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    find_key(key).set(cfg, std::string(text::trim(value)));
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind("unknown config key", 0) == 0) throw;
    throw ConfigError(key + ": " + what);
  }
}

std::string get_value(const RunConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected 'key = value'");
    const std::string key(text::trim(body.substr(0, eq)));
    find_key(key);
    out[key] = std::string(text::trim(body.substr(eq + 1)));
  }
  return out;
}

void write_config_file(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& k : keys()) os << k.name << " = " << k.get(cfg) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::string env_name(const std::string& key) {
  std::string s = "AEIG_";
  for (char c : key) s += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

RunConfig resolve(const std::filesystem::path& config_file, const Overrides& overrides) {
  std::map<std::string, std::string> file;
  if (!config_file.empty()) file = read_config_file(config_file);
  std::map<std::string, std::string> env;
  for (const auto& k : keys())
    if (const char* v = std::getenv(env_name(k.name).c_str())) env[k.name] = v;

  auto pick = [&](const std::string& key, const std::string& fallback) {
    if (auto it = overrides.values.find(key); it != overrides.values.end()) return it->second;
    if (auto it = env.find(key); it != env.end()) return it->second;
    if (auto it = file.find(key); it != file.end()) return it->second;
    return fallback;
  };
  RunConfig cfg = preset_config(parse_use_case(pick("use_case", "sin")),
                                parse_preset(pick("preset", "desk")));
  using Layer = const std::map<std::string, std::string>*;
  for (Layer layer : {Layer{&file}, Layer{&env}, Layer{&overrides.values}})
    for (const auto& [k, v] : *layer) set_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

}  // namespace aeig::config
