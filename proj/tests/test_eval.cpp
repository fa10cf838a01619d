#include <cmath>
#include <filesystem>

#include "aeig/errors.hpp"
#include "aeig/eval.hpp"
#include "doctest.h"
#include "grad_check.hpp"

using namespace aeig;

namespace {

TemperatureField padded(std::vector<double> v) {
  TemperatureField f;
  f.geom = GridGeometry::square(1);
  f.padded = true;
  f.values = std::move(v);
  return f;
}

TemperatureField interior(const GridGeometry& g, std::uint64_t seed) {
  return make_field("f", g, 150.0, testing::random_values(g.interior_cells(), seed, 150.0, 190.0));
}

}  // namespace

TEST_CASE("mape") {
  const GridGeometry g = GridGeometry::square(6);
  auto a = interior(g, 1), b = interior(g, 2);
  CHECK(eval::mape(a, a) == 0.0);
  CHECK(eval::mape(padded({100, 102}), padded({100, 100})) == doctest::Approx(1.0).epsilon(1e-15));
  SUBCASE("ratio invariance") {
    const double base = eval::mape(a, b);
    for (double lambda : {0.5, 3.0, 1e3}) {
      auto sa = a, sb = b;
      for (auto& v : sa.values) v *= lambda;
      for (auto& v : sb.values) v *= lambda;
      sa.t_boundary *= lambda;
      sb.t_boundary *= lambda;
      CHECK(std::abs(eval::mape(sa, sb) - base) <= 1e-12);
    }
  }
  SUBCASE("boundary ring counts with zero error") {
    // interior error 1 deg on 36 of 64 cells, relative to 150
    auto c = a;
    auto d = a;
    for (auto& v : c.values) v = 151.0;
    for (auto& v : d.values) v = 150.0;
    CHECK(eval::mape(c, d) == doctest::Approx(100.0 * 36.0 / 64.0 / 150.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(eval::mape(a, interior(GridGeometry::square(5), 3)), ShapeError);
}

TEST_CASE("supervised_reference_loss") {
  const GridGeometry g = GridGeometry::square(4);
  auto a = interior(g, 4), b = interior(g, 5);
  CHECK(eval::supervised_reference_loss(a, a) == 0.0);
  auto c = a;
  for (auto& v : c.values) v += 1.0;
  CHECK(eval::supervised_reference_loss(c, a) == doctest::Approx(16.0).epsilon(1e-12));
  // N * MSE over the padded grid
  const auto pa = a.with_boundary(), pb = b.with_boundary();
  double mse = 0.0;
  for (std::size_t i = 0; i < pa.values.size(); ++i) mse += std::pow(pa.values[i] - pb.values[i], 2);
  mse /= static_cast<double>(pa.values.size());
  const double n = static_cast<double>(pa.values.size());
  CHECK(std::abs(eval::supervised_reference_loss(a, b) - n * mse) <= 1e-12 * n * mse);
  CHECK_THROWS_AS(eval::supervised_reference_loss(a, interior(GridGeometry::square(5), 3)), ShapeError);
}

TEST_CASE("group_table and median") {
  CHECK(eval::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(eval::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  std::vector<eval::MapeRecord> recs;
  auto v = testing::random_values(12, 8, 0.0, 2.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    eval::MapeRecord r;
    r.map_id = "m" + std::to_string(i);
    r.split = i < 4 ? Split::train : Split::test;
    r.group = i < 4 ? "train" : (i % 2 ? "odd" : "even");
    r.mape = v[i];
    recs.push_back(r);
  }
  auto t = eval::group_table(recs);
  REQUIRE(t.size() == 3);
  CHECK(t[0].group == "train");
  CHECK(t[1].group == "even");
  CHECK(t[2].count == 4);
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) s += v[i];
  CHECK(std::abs(t[0].mean - s / 4.0) <= 1e-12);
  CHECK(t[2].max == std::max({v[5], v[7], v[9], v[11]}));
}

TEST_CASE("solve_all is independent of the thread count") {
  const GridGeometry g = GridGeometry::square(12);
  std::vector<PowerMap> maps;
  for (int a = 0; a < 5; ++a) maps.push_back(gen_sinusoidal(0.125, a, 1, g));
  std::vector<const PowerMap*> p;
  for (const auto& m : maps) p.push_back(&m);
  PhysicsParams phys;
  phys.k = 1e-3;
  auto one = eval::solve_all(p, g, phys, {}, 1);
  auto three = eval::solve_all(p, g, phys, {}, 3);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    CHECK(one[i].field.values == three[i].field.values);
    CHECK(one[i].report.converged);
  }
}

TEST_CASE("stages report failures") {
  config::RunConfig cfg = config::preset_config(UseCase::sin, config::Preset::desk);
  cfg.out = std::filesystem::temp_directory_path() / "aeig_eval_missing";
  std::filesystem::remove_all(cfg.out);
  try {
    eval::evaluate(cfg, false);
    FAIL("expected StageError");
  } catch (const eval::StageError& e) {
    CHECK(e.stage() == "evaluate");
    CHECK_FALSE(e.numerical());
  }
  CHECK_THROWS_AS(eval::train(cfg, false), eval::StageError);
}
