#pragma once

// Run configuration: presets, flat "key = value" files and AEIG_* environment
// overrides.
//
// Resolution order, later wins: preset defaults for the use case, config
// file, environment, explicit command-line values.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aeig/autoencoder.hpp"
#include "aeig/grid.hpp"
#include "aeig/oracle.hpp"
#include "aeig/powermap.hpp"
#include "aeig/solver.hpp"

namespace aeig::config {

enum class Preset { full, desk };

const char* to_string(Preset p);
Preset parse_preset(const std::string& s);

struct RunConfig {
  UseCase use_case = UseCase::sin;
  Preset preset = Preset::desk;
  std::uint64_t seed = 7;
  std::size_t grid = 32;  // map extent n; 2D solves on n x n, tile3d on n^3
  PhysicsParams physics;
  ae::AEArch ae_arch;
  nn::Schedule ae_schedule;
  solver::IGArch ig_arch;
  solver::AeigSchedule ig_schedule;
  oracle::SolveOptions oracle;
  std::filesystem::path out = "runs";
  std::size_t jobs = 1;
  std::size_t log_every = 500;  // progress line every this many epochs, 0 for none

  GridGeometry map_geom() const { return GridGeometry::square(grid); }
  GridGeometry solve_geom() const;
  DatasetOptions dataset_options() const;
  // Seeds derived from `seed` for each randomised stage.
  std::uint64_t ae_seed() const { return seed * 1000 + 1; }
  std::uint64_t ig_seed() const { return seed * 1000 + 2; }

  // Throws ConfigError on values no stage can use.
  void validate() const;
};

// Defaults of `preset` for `use_case`.
RunConfig preset_config(UseCase use_case, Preset preset);

// Every settable key, in file order.
const std::vector<std::string>& config_keys();

// Sets one dotted key from its text form. Unknown keys and malformed values
// are ConfigErrors. Setting use_case or preset does not reapply defaults.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& cfg, const std::string& key);

// "key = value" lines; '#' starts a comment, blank lines are ignored.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
void write_config_file(const std::filesystem::path& path, const RunConfig& cfg);

// AEIG_ followed by the key upper-cased with dots as underscores,
// e.g. AEIG_AE_EPOCHS for ae.epochs.
std::string env_name(const std::string& key);

struct Overrides {
  std::map<std::string, std::string> values;  // explicit settings, highest priority
};

// Picks use_case and preset (file, env, then overrides), starts from the
// preset, then applies file values, environment values and overrides.
RunConfig resolve(const std::filesystem::path& config_file, const Overrides& overrides);

}  // namespace aeig::config
