#include <cmath>
#include <numbers>

#include "aeig/errors.hpp"
#include "aeig/stencil.hpp"
#include "doctest.h"
#include "grad_check.hpp"

using namespace aeig;
using ad::Graph;
using ad::GraphScope;
using ad::Tensor;

namespace {

constexpr double kPi = std::numbers::pi;

Tensor line(const std::vector<double>& v) { return Tensor::from({1, v.size(), 1}, v); }

// Full nodal field f(x, y) on geom, padded layout [1, N, N, 1].
template <class F>
Tensor nodal_2d(const GridGeometry& g, F f) {
  const std::size_t nx = g.nodes(0), ny = g.nodes(1);
  std::vector<double> v;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) v.push_back(f(i * g.h(0), j * g.h(1)));
  return Tensor::from({1, nx, ny, 1}, v);
}

template <class F>
Tensor nodal_3d(const GridGeometry& g, F f) {
  std::vector<double> v;
  for (std::size_t i = 0; i < g.nodes(0); ++i)
    for (std::size_t j = 0; j < g.nodes(1); ++j)
      for (std::size_t k = 0; k < g.nodes(2); ++k) v.push_back(f(i * g.h(0), j * g.h(1), k * g.h(2)));
  return Tensor::from({1, g.nodes(0), g.nodes(1), g.nodes(2), 1}, v);
}

template <class F>
Tensor interior_2d(const GridGeometry& g, F f) {
  std::vector<double> v;
  for (std::size_t i = 0; i < g.interior[0]; ++i)
    for (std::size_t j = 0; j < g.interior[1]; ++j) v.push_back(f(g.coord(0, i), g.coord(1, j)));
  return Tensor::from({1, g.interior[0], g.interior[1], 1}, v);
}

template <class F>
Tensor interior_3d(const GridGeometry& g, F f) {
  std::vector<double> v;
  for (std::size_t i = 0; i < g.interior[0]; ++i)
    for (std::size_t j = 0; j < g.interior[1]; ++j)
      for (std::size_t k = 0; k < g.interior[2]; ++k)
        v.push_back(f(g.coord(0, i), g.coord(1, j), g.coord(2, k)));
  return Tensor::from({1, g.interior[0], g.interior[1], g.interior[2], 1}, v);
}

// Max |r| over cells at least `margin` nodes from the boundary.
double max_abs_inner_2d(const Tensor& r, std::size_t margin) {
  const std::size_t nx = r.extent(1), ny = r.extent(2);
  double m = 0.0;
  for (std::size_t i = margin; i + margin < nx; ++i)
    for (std::size_t j = margin; j + margin < ny; ++j) m = std::max(m, std::abs(r.at(i * ny + j)));
  return m;
}

}  // namespace

TEST_CASE("image_gradient") {
  Tensor lin = stencil::image_gradient(line({0, 1, 2, 3}), 0, 1.0);
  for (double v : lin.data()) CHECK(v == 1.0);

  Tensor flat = stencil::image_gradient(Tensor::full({2, 4, 5, 3}, 2.0), 1, 0.1);
  for (double v : flat.data()) CHECK(v == 0.0);

  Tensor sq = stencil::image_gradient(line({0, 1, 4, 9, 16, 25}), 0, 1.0);
  const std::vector<double> expect{1, 2, 4, 6, 8, 9};
  for (std::size_t i = 0; i < 6; ++i) CHECK(sq.at(i) == expect[i]);

  CHECK_THROWS_AS(stencil::image_gradient(line({1, 2}), 0, 1.0), ShapeError);
  CHECK_THROWS_AS(stencil::image_gradient(Tensor::zeros({1, 4, 4, 1}), 2, 1.0), ShapeError);

  Tensor p = testing::random_parameter({2, 5, 4, 3, 1}, 31);
  for (std::size_t axis = 0; axis < 3; ++axis)
    CHECK(testing::max_grad_error(
              [&] { return ad::reduce_mean_square(stencil::image_gradient(p, axis, 0.3)); }, {p}) <=
          1e-4);
}

TEST_CASE("second_derivative") {
  SUBCASE("quadratic gives 2 where the widened stencil applies") {
    std::vector<double> v;
    for (int x = 0; x < 9; ++x) v.push_back(x * x);
    Tensor d2 = stencil::second_derivative(line(v), 0, 1.0);
    for (std::size_t i = 2; i + 2 < 9; ++i) CHECK(d2.at(i) == 2.0);
  }
  SUBCASE("linear gives zero everywhere") {
    std::vector<double> v;
    for (int x = 0; x < 7; ++x) v.push_back(3.0 * x - 1.0);
    Tensor d2 = stencil::second_derivative(line(v), 0, 0.5);
    for (double d : d2.data()) CHECK(std::abs(d) <= 1e-12);
  }
  SUBCASE("exact on cubics at interior-of-interior points") {
    const double h = 0.125;
    std::vector<double> v;
    for (int i = 0; i < 12; ++i) {
      const double x = i * h;
      v.push_back(2.0 * x * x * x - x * x + 0.5 * x + 3.0);
    }
    Tensor d2 = stencil::second_derivative(line(v), 0, h);
    for (std::size_t i = 2; i + 2 < 12; ++i) CHECK(std::abs(d2.at(i) - (12.0 * i * h - 2.0)) <= 1e-12);
  }
  SUBCASE("near-boundary row mixes one-sided and central differences") {
    auto v = testing::random_values(8, 32);
    Tensor d2 = stencil::second_derivative(line(v), 0, 1.0);
    CHECK(d2.at(1) == doctest::Approx((v[3] - 3.0 * v[1] + 2.0 * v[0]) / 4.0).epsilon(1e-14));
    CHECK(d2.at(0) == doctest::Approx(((v[2] - v[0]) / 2.0 - (v[1] - v[0])) / 1.0).epsilon(1e-14));
  }
  SUBCASE("sin(2 pi x) on 64 points converges at second order") {
    const std::size_t n = 64;
    const double h = 1.0 / (n - 1);
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(std::sin(2.0 * kPi * i * h));
    Tensor d2 = stencil::second_derivative(line(v), 0, h);
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < n; ++i)
      worst = std::max(worst, std::abs(d2.at(i) + 4.0 * kPi * kPi * std::sin(2.0 * kPi * i * h)));
    // Leading error term of the widened stencil: (2h)^2/12 * max|f''''| = (16 pi^4 / 3) h^2.
    const double c = worst / (h * h);
    CHECK(c <= 16.0 * std::pow(kPi, 4) / 3.0);
    CHECK(c == doctest::Approx(518.6653865765).epsilon(1e-9));
  }
  CHECK_THROWS_AS(stencil::second_derivative(line({0, 1, 2, 3}), 0, 1.0), ShapeError);
}

TEST_CASE("pad_with_boundary") {
  Tensor p = stencil::pad_with_boundary(Tensor::from({1, 1, 1, 1}, {200.0}), 150.0);
  CHECK(p.shape() == ad::Shape{1, 3, 3, 1});
  for (std::size_t i = 0; i < 9; ++i) CHECK(p.at(i) == (i == 4 ? 200.0 : 150.0));

  Tensor c = stencil::pad_with_boundary(Tensor::full({1, 3, 3, 3, 1}, 150.0), 150.0);
  CHECK(c.shape() == ad::Shape{1, 5, 5, 5, 1});
  for (double v : c.data()) CHECK(v == 150.0);

  Tensor x = Tensor::from({2, 3, 4, 1}, testing::random_values(24, 33));
  Tensor back = nn::crop(stencil::pad_with_boundary(x, 150.0), 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.at(i) == x.at(i));
}

TEST_CASE("residual_2d") {
  PhysicsParams phys;
  SUBCASE("constant field without source") {
    const auto g = GridGeometry::square(6);
    Tensor r = stencil::residual_2d(Tensor::full({1, 8, 8, 1}, 150.0), Tensor::zeros({6, 6}), phys, g);
    for (double v : r.data()) CHECK(v == 0.0);
  }
  SUBCASE("manufactured solution converges at second order away from the boundary") {
    phys.k = 0.7;
    std::vector<double> errors;
    for (std::size_t nodes : {17, 33, 65}) {
      const auto g = GridGeometry::from_nodes(nodes, 2);
      Tensor t = nodal_2d(g, [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y) + 150.0; });
      Tensor q = interior_2d(g, [&](double x, double y) {
        return 2.0 * phys.k * kPi * kPi * std::sin(kPi * x) * std::sin(kPi * y);
      });
      errors.push_back(max_abs_inner_2d(stencil::residual_2d(t, q, phys, g), 1));
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.08));
    CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.04));
  }
  SUBCASE("brute-force widened stencil at interior-of-interior points") {
    const auto g = GridGeometry::square(7);
    const std::size_t N = 9;
    auto vals = testing::random_values(N * N, 34, 100.0, 200.0);
    auto qv = testing::random_values(49, 35);
    phys.k = 1.3;
    Tensor r = stencil::residual_2d(Tensor::from({1, N, N, 1}, vals), Tensor::from({7, 7}, qv), phys, g);
    const double h = g.h(0);
    auto T = [&](std::size_t i, std::size_t j) { return vals[i * N + j]; };
    for (std::size_t i = 3; i + 3 < N; ++i)
      for (std::size_t j = 3; j + 3 < N; ++j) {
        const double lap = (T(i + 2, j) - 2 * T(i, j) + T(i - 2, j)) / (4 * h * h) +
                           (T(i, j + 2) - 2 * T(i, j) + T(i, j - 2)) / (4 * h * h);
        CHECK(r.at((i - 1) * 7 + (j - 1)) ==
              doctest::Approx(phys.k * lap + qv[(i - 1) * 7 + (j - 1)]).epsilon(1e-11));
      }
  }
  SUBCASE("superposition") {
    const auto g = GridGeometry::square(5);
    Tensor a = Tensor::from({1, 7, 7, 1}, testing::random_values(49, 36));
    Tensor b = Tensor::from({1, 7, 7, 1}, testing::random_values(49, 37));
    Tensor q0 = Tensor::zeros({5, 5});
    Tensor ra = stencil::residual_2d(a, q0, phys, g);
    Tensor rb = stencil::residual_2d(b, q0, phys, g);
    Tensor rab = stencil::residual_2d(ad::add(a, b), q0, phys, g);
    for (std::size_t i = 0; i < 25; ++i)
      CHECK(std::abs(rab.at(i) - ra.at(i) - rb.at(i)) <= 1e-12 * std::max(1.0, std::abs(rab.at(i))));
  }
  SUBCASE("boundary value does not reach cells two away from it") {
    const auto g = GridGeometry::square(8);
    Tensor inner = Tensor::from({1, 8, 8, 1}, testing::random_values(64, 38, 140, 160));
    Tensor q = Tensor::from({8, 8}, testing::random_values(64, 39));
    Tensor r1 = stencil::residual_2d(stencil::pad_with_boundary(inner, 150.0), q, phys, g);
    Tensor r2 = stencil::residual_2d(stencil::pad_with_boundary(inner, 10.0), q, phys, g);
    for (std::size_t i = 2; i < 6; ++i)
      for (std::size_t j = 2; j < 6; ++j) CHECK(r1.at(i * 8 + j) == r2.at(i * 8 + j));
  }
  SUBCASE("batched source and gradient check") {
    const auto g = GridGeometry::square(4);
    Tensor inner = testing::random_parameter({2, 4, 4, 1}, 40);
    Tensor q = Tensor::from({2, 4, 4, 1}, testing::random_values(32, 41));
    CHECK(testing::max_grad_error(
              [&] {
                return ad::reduce_mean_square(
                    stencil::residual_2d(stencil::pad_with_boundary(inner, 150.0), q, phys, g));
              },
              {inner}) <= 1e-4);
  }
  SUBCASE("errors") {
    const auto g = GridGeometry::square(5);
    CHECK_THROWS_AS(stencil::residual_2d(Tensor::zeros({1, 7, 7, 1}), Tensor::zeros({4, 4}), phys, g),
                    ShapeError);
    CHECK_THROWS_AS(stencil::residual_2d(Tensor::zeros({1, 8, 8, 1}), Tensor::zeros({6, 6}), phys, g),
                    ShapeError);
    phys.k = 0.0;
    CHECK_THROWS_AS(stencil::residual_2d(Tensor::zeros({1, 7, 7, 1}), Tensor::zeros({5, 5}), phys, g),
                    DomainError);
  }
}

TEST_CASE("residual_3d") {
  PhysicsParams phys;
  SUBCASE("constant field, no source, no flow") {
    phys.velocity = {0, 0, 0};
    const auto g = GridGeometry::cube(4);
    Tensor r = stencil::residual_3d(Tensor::full({1, 6, 6, 6, 1}, 150.0), Tensor::zeros({4, 4, 4}), phys, g);
    for (double v : r.data()) CHECK(v == 0.0);
  }
  SUBCASE("zero velocity equals a separate diffusion evaluation") {
    phys.velocity = {0, 0, 0};
    phys.k = 0.4;
    const auto g = GridGeometry{{4, 5, 3}};
    Tensor t = Tensor::from({1, 6, 7, 5, 1}, testing::random_values(210, 42));
    Tensor q = Tensor::from({1, 4, 5, 3, 1}, testing::random_values(60, 43));
    Tensor r = stencil::residual_3d(t, q, phys, g);
    Tensor lap = ad::add(ad::add(stencil::second_derivative(t, 0, g.h(0)), stencil::second_derivative(t, 1, g.h(1))),
                         stencil::second_derivative(t, 2, g.h(2)));
    Tensor ref = ad::add(ad::affine(nn::crop(lap, 1), phys.k), q);
    for (std::size_t i = 0; i < r.size(); ++i)
      CHECK(std::abs(r.at(i) - ref.at(i)) <= 1e-12 * std::max(1.0, std::abs(ref.at(i))));
  }
  SUBCASE("manufactured solution with convection converges at second order") {
    phys.k = 1.0;
    std::vector<double> errors;
    for (std::size_t nodes : {9, 17, 33}) {
      const auto g = GridGeometry::from_nodes(nodes, 3);
      auto s = [](double v) { return std::sin(kPi * v); };
      auto c = [](double v) { return std::cos(kPi * v); };
      Tensor t = nodal_3d(g, [&](double x, double y, double z) { return s(x) * s(y) * s(z) + 150.0; });
      Tensor q = interior_3d(g, [&](double x, double y, double z) {
        const double lap = -3.0 * kPi * kPi * s(x) * s(y) * s(z);
        const double adv = kPi * (c(x) * s(y) * s(z) + s(x) * c(y) * s(z) + s(x) * s(y) * c(z));
        return -(phys.k * lap - adv);
      });
      Tensor r = stencil::residual_3d(t, q, phys, g);
      // max over cells at least one node in from the boundary
      const std::size_t n = g.interior[0];
      double worst = 0.0;
      for (std::size_t i = 1; i + 1 < n; ++i)
        for (std::size_t j = 1; j + 1 < n; ++j)
          for (std::size_t k = 1; k + 1 < n; ++k) worst = std::max(worst, std::abs(r.at((i * n + j) * n + k)));
      errors.push_back(worst);
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.08));
  }
  SUBCASE("gradient check") {
    const auto g = GridGeometry::cube(3);
    Tensor inner = testing::random_parameter({1, 3, 3, 3, 1}, 44);
    Tensor q = Tensor::from({3, 3, 3}, testing::random_values(27, 45));
    CHECK(testing::max_grad_error(
              [&] {
                return ad::reduce_mean_square(
                    stencil::residual(stencil::pad_with_boundary(inner, 150.0), q, phys, g));
              },
              {inner}) <= 1e-4);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(stencil::residual_3d(Tensor::zeros({1, 7, 7, 1}), Tensor::zeros({5, 5}), phys,
                                         GridGeometry::square(5)),
                    ShapeError);
  }
}

TEST_CASE("geometry") {
  const auto g = GridGeometry::from_nodes(33, 2);
  CHECK(g.interior == std::vector<std::size_t>{31, 31});
  CHECK(g.h(0) == 1.0 / 32.0);
  CHECK(g.coord(0, 0) == 1.0 / 32.0);
  CHECK_THROWS_AS(GridGeometry::square(2).validate(), ShapeError);
  CHECK_THROWS_AS((GridGeometry{{5}}).validate(), ShapeError);
  PhysicsParams p;
  p.velocity[1] = INFINITY;
  CHECK_THROWS_AS(p.validate(), DomainError);
}
