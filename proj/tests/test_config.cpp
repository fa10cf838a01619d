#include <cstdlib>
#include <fstream>
#include <filesystem>

#include "aeig/config.hpp"
#include "aeig/errors.hpp"
#include "doctest.h"

using namespace aeig;
using config::Preset;

namespace {

struct EnvVar {
  std::string name;
  EnvVar(std::string n, const char* v) : name(std::move(n)) { ::setenv(name.c_str(), v, 1); }
  ~EnvVar() { ::unsetenv(name.c_str()); }
};

std::filesystem::path temp_file(const char* name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("presets") {
  auto desk = config::preset_config(UseCase::sin, Preset::desk);
  CHECK(desk.grid == 32);
  CHECK(desk.ae_schedule.epochs == 2000);
  CHECK(desk.ig_schedule.schedule.epochs == 5000);
  CHECK(desk.ae_schedule.lr == 1e-4);
  CHECK(desk.ig_schedule.schedule.lr == 1e-4);
  CHECK(desk.physics.t_boundary == 150.0);
  auto full = config::preset_config(UseCase::exp, Preset::full);
  CHECK(full.ae_schedule.epochs == 5000);
  CHECK(full.ig_schedule.schedule.epochs == 10000);
  auto cube = config::preset_config(UseCase::tile3d, Preset::desk);
  CHECK(cube.solve_geom() == GridGeometry::cube(16));
  CHECK(cube.map_geom() == GridGeometry::square(16));
  CHECK(cube.physics.k == 5e-5);
  for (const auto& c : {desk, full, cube}) CHECK_NOTHROW(c.validate());
}

TEST_CASE("config keys") {
  SUBCASE("every key round-trips through text") {
    auto a = config::preset_config(UseCase::tile3d, Preset::full);
    a.physics.k = 0.123456789;
    a.seed = 18446744073709551615ull;
    config::RunConfig b;
    for (const auto& k : config::config_keys()) config::set_value(b, k, config::get_value(a, k));
    for (const auto& k : config::config_keys()) CHECK(config::get_value(b, k) == config::get_value(a, k));
  }
  SUBCASE("errors") {
    config::RunConfig c;
    CHECK_THROWS_AS(config::set_value(c, "ae.epoch", "3"), ConfigError);
    CHECK_THROWS_AS(config::set_value(c, "ae.epochs", "three"), ConfigError);
    CHECK_THROWS_AS(config::set_value(c, "ae.epochs", "-3"), ConfigError);
    CHECK_THROWS_AS(config::set_value(c, "seed", "-1"), ConfigError);
    CHECK_THROWS_AS(config::set_value(c, "preset", "laptop"), ConfigError);
    CHECK_THROWS_AS(config::set_value(c, "use_case", "realistic"), ConfigError);
    c.grid = 36;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("environment names") {
    CHECK(config::env_name("ae.epochs") == "AEIG_AE_EPOCHS");
    CHECK(config::env_name("physics.t_boundary") == "AEIG_PHYSICS_T_BOUNDARY");
  }
}

TEST_CASE("resolve") {
  SUBCASE("defaults need no file") {
    auto c = config::resolve({}, {});
    CHECK(c.use_case == UseCase::sin);
    CHECK(c.preset == Preset::desk);
  }
  SUBCASE("file, then environment, then explicit values") {
    auto file = temp_file("aeig_cfg_test.txt",
                          "# comment\nuse_case = exp\npreset = full\n\nae.epochs = 11  # trailing\n"
                          "ig.epochs = 12\nseed = 3\n");
    auto c = config::resolve(file, {});
    CHECK(c.use_case == UseCase::exp);
    CHECK(c.grid == 64);  // full preset picked up from the file
    CHECK(c.ae_schedule.epochs == 11);
    CHECK(c.ig_schedule.schedule.epochs == 12);
    {
      EnvVar e("AEIG_AE_EPOCHS", "21");
      EnvVar p("AEIG_PRESET", "desk");
      auto d = config::resolve(file, {});
      CHECK(d.ae_schedule.epochs == 21);
      CHECK(d.grid == 32);
      config::Overrides o;
      o.values["ae.epochs"] = "31";
      CHECK(config::resolve(file, o).ae_schedule.epochs == 31);
    }
    std::filesystem::remove(file);
  }
  SUBCASE("echoed config reproduces the run") {
    config::Overrides o;
    o.values = {{"use_case", "tile2d"}, {"seed", "99"}, {"physics.k", "0.002"}, {"jobs", "3"}};
    auto a = config::resolve({}, o);
    auto path = std::filesystem::temp_directory_path() / "aeig_cfg_echo.txt";
    config::write_config_file(path, a);
    auto b = config::resolve(path, {});
    for (const auto& k : config::config_keys()) CHECK(config::get_value(a, k) == config::get_value(b, k));
    std::filesystem::remove(path);
  }
  SUBCASE("bad file lines") {
    auto f1 = temp_file("aeig_cfg_bad1.txt", "grid 32\n");
    auto f2 = temp_file("aeig_cfg_bad2.txt", "gird = 32\n");
    CHECK_THROWS_AS(config::resolve(f1, {}), ConfigError);
    CHECK_THROWS_AS(config::resolve(f2, {}), ConfigError);
    CHECK_THROWS_AS(config::resolve("/nonexistent/aeig.cfg", {}), IoError);
    std::filesystem::remove(f1);
    std::filesystem::remove(f2);
  }
}
