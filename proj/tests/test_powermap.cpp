#include <cmath>
#include <filesystem>
#include <numbers>
#include <map>
#include <set>

#include "aeig/errors.hpp"
#include "aeig/powermap.hpp"
#include "doctest.h"

using namespace aeig;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("aeig_unit_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("sinusoidal maps") {
  const auto g = GridGeometry::square(16);
  PowerMap flat = gen_sinusoidal(0.125, 0, 0, g);
  for (double v : flat.values) CHECK(v == 0.125);

  PowerMap m = gen_sinusoidal(0.125, 1, 0, g);
  for (double v : m.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 0.25);
  }
  // period 1 along x: x and x + 1 coincide, so compare with the formula
  CHECK(sinusoidal_value(0.125, 1, 0, 0.2, 0.7) == doctest::Approx(sinusoidal_value(0.125, 1, 0, 1.2, 0.7)));
  CHECK(sinusoidal_value(0.125, 2, 3, 0.25, 0.5) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(m.at(3, 5) == sinusoidal_value(0.125, 1, 0, g.coord(0, 3), g.coord(1, 5)));
  CHECK_THROWS_AS(gen_sinusoidal(0.1, 1, 1, GridGeometry::cube(8)), ShapeError);
}

TEST_CASE("exponential maps") {
  for (double a : {0.0, 2.0, 4.0})
    CHECK(exponential_value(a, 4 - a, 0.3, 0.0, 0.0) == 1.0);
  CHECK(exponential_value(0, 0, 0, 0.25, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  const auto g = GridGeometry::square(20);
  for (double bias : {-0.5, 0.0, 0.5}) {
    PowerMap m = gen_exponential(3, 1, bias, g);
    for (double v : m.values) {
      CHECK(std::isfinite(v));
      CHECK(v >= std::exp(-2.0) - 1e-15);
      CHECK(v <= std::exp(2.0) + 1e-12);
    }
  }
  CHECK_THROWS_AS(gen_exponential(-5, 0, 0, g), DomainError);
  CHECK_THROWS_AS(gen_exponential(0, 0, -5, g), DomainError);
}

TEST_CASE("tile seed maps") {
  const auto g = GridGeometry::square(32);
  const TileConfig cfg;
  CHECK(gen_tile_seed(g, 3).values == gen_tile_seed(g, 3).values);
  CHECK(gen_tile_seed(g, 3).values != gen_tile_seed(g, 4).values);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PowerMap m = gen_tile_seed(g, seed, cfg);
    CHECK(m.params.regions >= 3);
    CHECK(m.params.regions <= 8);
    double total = 0.0;
    std::set<double> levels;
    for (double v : m.values) {
      total += v;
      if (v != cfg.background) {
        CHECK(v >= cfg.q_min);
        CHECK(v <= cfg.q_max);
        levels.insert(v);
      }
    }
    CHECK(levels.size() >= 1);
    CHECK(levels.size() <= static_cast<std::size_t>(m.params.regions));
    CHECK(total > cfg.background * static_cast<double>(m.values.size()));
  }
}

TEST_CASE("augmentation") {
  const auto g = GridGeometry::square(24);
  PowerMap seed = gen_tile_seed(g, 11);
  SUBCASE("identity") {
    PowerMap same = augment(seed, 0.0, {0, 0});
    for (std::size_t i = 0; i < seed.values.size(); ++i)
      CHECK(std::abs(same.values[i] - seed.values[i]) <= 1e-12);
  }
  SUBCASE("full turn on a smooth map") {
    PowerMap smooth = gen_sinusoidal(0.125, 1, 2, g);
    PowerMap turned = augment(smooth, 360.0, {0, 0});
    for (std::size_t i = 0; i < smooth.values.size(); ++i)
      CHECK(std::abs(turned.values[i] - smooth.values[i]) <= 1e-9);
  }
  SUBCASE("quarter turn is an exact index permutation") {
    PowerMap q = augment(seed, 90.0, {0, 0});
    const std::size_t n = 24;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(q.at(i, j) - seed.at(j, n - 1 - i)) <= 1e-12);
  }
  SUBCASE("shift and shift back with a background margin") {
    PowerMap shifted = augment(seed, 0.0, {3, 0});
    PowerMap back = augment(shifted, 0.0, {-3, 0});
    for (std::size_t i = 0; i < seed.values.size(); ++i) CHECK(back.values[i] == seed.values[i]);
    CHECK(back.params.shift_x == 0);
    CHECK(shifted.at(3, 5) == seed.at(0, 5));
  }
  SUBCASE("cells shifted in from outside take the background") {
    PowerMap far = augment(seed, 0.0, {30, 0});
    for (double v : far.values) CHECK(v == seed.params.background);
  }
}

TEST_CASE("spiral offsets") {
  CHECK(spiral_offset(0) == std::pair{0, 0});
  CHECK(spiral_offset(1) == std::pair{1, 0});
  CHECK(spiral_offset(2) == std::pair{1, 1});
  CHECK(spiral_offset(3) == std::pair{0, 1});
  CHECK(spiral_offset(4) == std::pair{-1, 1});
  CHECK(spiral_offset(5) == std::pair{-1, 0});
  CHECK(spiral_offset(9) == std::pair{2, -1});
  std::set<std::pair<int, int>> seen;
  for (int m = 0; m < 400; ++m) {
    auto p = spiral_offset(m);
    CHECK(seen.insert(p).second);
    const int ring = static_cast<int>(std::ceil((std::sqrt(static_cast<double>(m) + 1.0) - 1.0) / 2.0));
    CHECK(std::max(std::abs(p.first), std::abs(p.second)) == ring);
  }
}

TEST_CASE("test augmentation magnitudes") {
  const auto mags = test_augmentation_magnitudes();
  CHECK(mags.size() == 132);
  CHECK(std::is_sorted(mags.begin(), mags.end()));
  for (int m : mags) CHECK(m % 20 != 0);
  CHECK(mags.front() == 1);
}

TEST_CASE("standard datasets") {
  DatasetOptions opts;
  opts.geom = GridGeometry::square(16);
  struct Expect {
    UseCase u;
    std::size_t train, test;
  };
  for (auto e : {Expect{UseCase::sin, 25, 175}, Expect{UseCase::exp, 25, 250},
                 Expect{UseCase::tile2d, 41, 217}, Expect{UseCase::tile3d, 41, 188}}) {
    CAPTURE(to_string(e.u));
    const auto ds = build_standard_datasets(e.u, opts);
    CHECK(ds.count(Split::train) == e.train);
    CHECK(ds.count(Split::test) == e.test);
    std::set<std::string> ids;
    for (const auto& m : ds.maps) {
      CHECK(ids.insert(m.id).second);
      for (double v : m.values) CHECK(std::isfinite(v));
      if (m.family == Family::sinusoidal)
        for (double v : m.values) CHECK(v >= 0.0);
    }
    // train and test are disjoint in parameter space
    for (const auto* tr : ds.split(Split::train))
      for (const auto* te : ds.split(Split::test)) CHECK_FALSE(tr->params == te->params);
  }
  const auto sin = build_standard_datasets(UseCase::sin, opts);
  std::map<std::string, int> groups;
  for (const auto* m : sin.split(Split::test)) ++groups[m->group];
  CHECK(groups.size() == 7);
  for (auto& [name, count] : groups) CHECK(count == 25);
  CHECK(sin.normalization_max == doctest::Approx(0.25).epsilon(1e-3));

  const auto t3 = build_standard_datasets(UseCase::tile3d, opts);
  CHECK(t3.solve_geom == GridGeometry::cube(16));
  CHECK(build_standard_datasets(UseCase::tile2d, opts).maps[0].values ==
        build_standard_datasets(UseCase::tile2d, opts).maps[0].values);
  CHECK_THROWS_AS(parse_use_case("tile4d"), ConfigError);
}

TEST_CASE("source tensors") {
  const auto g = GridGeometry::square(6);
  PowerMap m = gen_sinusoidal(0.125, 1, 1, g);
  SUBCASE("2D") {
    auto t = source_tensor(m, g);
    CHECK(t.shape() == ad::Shape{1, 6, 6, 1});
    CHECK(t.at(7) == m.values[7]);
  }
  SUBCASE("odd depth uses the single centre plane") {
    auto t = source_tensor(m, GridGeometry{{6, 6, 5}});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t k = 0; k < 5; ++k)
          CHECK(t.at((i * 6 + j) * 5 + k) == (k == 2 ? m.at(i, j) : 0.0));
  }
  SUBCASE("even depth uses both middle planes") {
    std::vector<const PowerMap*> maps{&m, &m};
    auto t = source_batch(maps, GridGeometry::cube(6));
    CHECK(t.shape() == ad::Shape{2, 6, 6, 6, 1});
    for (std::size_t k = 0; k < 6; ++k)
      CHECK(t.at(((36 + 2 * 6 + 3) * 6) + k) == ((k == 2 || k == 3) ? m.at(2, 3) : 0.0));
  }
  CHECK_THROWS_AS(source_tensor(m, GridGeometry::square(8)), ShapeError);
}

TEST_CASE("grid files round trip") {
  const auto dir = scratch("grid");
  std::filesystem::create_directories(dir);
  PowerMap m = augment(gen_tile_seed(GridGeometry::square(12), 5), 37.5, {2, -1});
  m.id = "tile_test_004";
  m.split = Split::test;
  m.group = "rotation";
  write_grid_file(dir / "m.grid", to_grid_file(m));
  PowerMap back = from_grid_file(read_grid_file(dir / "m.grid"));
  CHECK(back.id == m.id);
  CHECK(back.family == m.family);
  CHECK(back.split == m.split);
  CHECK(back.group == m.group);
  CHECK(back.params == m.params);
  CHECK(back.geom == m.geom);
  CHECK(back.values == m.values);
  CHECK_THROWS_AS(read_grid_file(dir / "missing.grid"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset directories round trip") {
  const auto dir = scratch("dataset");
  DatasetOptions opts;
  opts.geom = GridGeometry::square(8);
  const auto ds = build_standard_datasets(UseCase::exp, opts);
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  CHECK(back.use_case == ds.use_case);
  CHECK(back.seed == ds.seed);
  CHECK(back.map_geom == ds.map_geom);
  CHECK(back.solve_geom == ds.solve_geom);
  CHECK(back.normalization_max == ds.normalization_max);
  REQUIRE(back.maps.size() == ds.maps.size());
  for (std::size_t i = 0; i < ds.maps.size(); ++i) {
    CHECK(back.maps[i].params == ds.maps[i].params);
    CHECK(back.maps[i].values == ds.maps[i].values);
    CHECK(back.maps[i].group == ds.maps[i].group);
  }
  std::filesystem::remove_all(dir);
}
