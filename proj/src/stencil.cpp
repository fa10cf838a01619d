#include "aeig/stencil.hpp"

#include <cmath>
#include <string>

#include "aeig/errors.hpp"
#include "aeig/layers.hpp"

namespace aeig {

GridGeometry GridGeometry::from_nodes(std::size_t nodes, std::size_t dims) {
  if (nodes < 3) throw ShapeError("grid needs at least 3 nodes per axis");
  return {std::vector<std::size_t>(dims, nodes - 2)};
}

std::size_t GridGeometry::interior_cells() const {
  std::size_t n = 1;
  for (auto e : interior) n *= e;
  return n;
}

std::size_t GridGeometry::node_cells() const {
  std::size_t n = 1;
  for (auto e : interior) n *= e + 2;
  return n;
}

void GridGeometry::validate() const {
  if (dims() != 2 && dims() != 3)
    throw ShapeError("grid must have 2 or 3 axes, got " + std::to_string(dims()));
  for (std::size_t a = 0; a < dims(); ++a)
    if (nodes(a) < 5)
      throw ShapeError("grid axis " + std::to_string(a) + " has " + std::to_string(nodes(a)) +
                       " nodes; the widened stencil needs at least 5");
}

void PhysicsParams::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("conductivity k must be positive");
  for (double v : velocity)
    if (!std::isfinite(v)) throw DomainError("velocity must be finite");
  if (!std::isfinite(t_boundary)) throw DomainError("boundary temperature must be finite");
}

}  // namespace aeig

namespace aeig::stencil {

using ad::attach;
using ad::make_result;
using ad::OpKind;
using ad::Shape;

namespace {

// Strides for differencing along spatial axis `axis` of [B, s..., C].
struct AxisView {
  std::size_t outer = 1;   // product of extents before the axis
  std::size_t extent = 0;  // extent along the axis
  std::size_t inner = 1;   // product of extents after the axis (incl. channels)
};

AxisView view_of(const Shape& s, std::size_t axis, std::size_t min_extent, const char* op) {
  if (s.size() < 3)
    throw ShapeError(std::string(op) + ": expected [batch, spatial..., channels], got " +
                     ad::to_string(s));
  const std::size_t spatial = s.size() - 2;
  if (axis >= spatial)
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     ad::to_string(s));
  const std::size_t a = axis + 1;
  AxisView v;
  for (std::size_t i = 0; i < a; ++i) v.outer *= s[i];
  v.extent = s[a];
  for (std::size_t i = a + 1; i < s.size(); ++i) v.inner *= s[i];
  if (v.extent < min_extent)
    throw ShapeError(std::string(op) + ": extent " + std::to_string(v.extent) + " along axis " +
                     std::to_string(axis) + " is below the minimum " + std::to_string(min_extent));
  return v;
}

}  // namespace

Tensor image_gradient(const Tensor& field, std::size_t axis, double h) {
  const AxisView v = view_of(field.shape(), axis, 3, "image_gradient");
  const double* f = field.data().data();
  std::vector<double> out(field.size());
  const std::size_t m = v.extent, in = v.inner;
  const double inv_h = 1.0 / h, inv_2h = 1.0 / (2.0 * h);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const std::size_t base = o * m * in;
    for (std::size_t c = 0; c < in; ++c) {
      auto at = [&](std::size_t i) { return f[base + i * in + c]; };
      out[base + c] = (at(1) - at(0)) * inv_h;
      for (std::size_t i = 1; i + 1 < m; ++i) out[base + i * in + c] = (at(i + 1) - at(i - 1)) * inv_2h;
      out[base + (m - 1) * in + c] = (at(m - 1) - at(m - 2)) * inv_h;
    }
  }
  Tensor result = make_result(field.shape(), std::move(out), {field});
  auto pf = field.impl();
  auto po = result.impl().get();
  attach(result, OpKind::image_gradient, {field}, [pf, po, v, inv_h, inv_2h] {
    if (!pf->requires_grad) return;
    const std::size_t m = v.extent, in = v.inner;
    const double* g = po->grad.data();
    double* gf = pf->grad.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const std::size_t base = o * m * in;
      for (std::size_t c = 0; c < in; ++c) {
        auto idx = [&](std::size_t i) { return base + i * in + c; };
        const double g0 = g[idx(0)] * inv_h;
        gf[idx(1)] += g0;
        gf[idx(0)] -= g0;
        for (std::size_t i = 1; i + 1 < m; ++i) {
          const double gi = g[idx(i)] * inv_2h;
          gf[idx(i + 1)] += gi;
          gf[idx(i - 1)] -= gi;
        }
        const double gl = g[idx(m - 1)] * inv_h;
        gf[idx(m - 1)] += gl;
        gf[idx(m - 2)] -= gl;
      }
    }
  });
  return result;
}

Tensor second_derivative(const Tensor& field, std::size_t axis, double h) {
  view_of(field.shape(), axis, 5, "second_derivative");
  return image_gradient(image_gradient(field, axis, h), axis, h);
}

Tensor pad_with_boundary(const Tensor& interior, double t_boundary) {
  return nn::pad_constant(interior, 1, t_boundary);
}

namespace {

// Accepts [B, n..., 1] or a bare [n...] map shared across the batch.
Tensor source_as_batch(const Tensor& q, const Tensor& t_padded, std::size_t dims) {
  const Shape& ts = t_padded.shape();
  if (ts.size() != dims + 2 || ts.back() != 1)
    throw ShapeError("residual: temperature field must be [batch, spatial x" +
                     std::to_string(dims) + ", 1], got " + ad::to_string(ts));
  Shape expected{ts[0]};
  for (std::size_t a = 0; a < dims; ++a) {
    if (ts[a + 1] < 5) throw ShapeError("residual: padded extent below 5");
    expected.push_back(ts[a + 1] - 2);
  }
  expected.push_back(1);
  if (q.shape() == expected) return q;
  Shape bare(expected.begin() + 1, expected.end() - 1);
  if (q.shape() == bare) {
    if (ts[0] == 1) return ad::reshape(q, expected);
    std::vector<double> rep;
    rep.reserve(ad::numel(expected));
    for (std::size_t b = 0; b < ts[0]; ++b) rep.insert(rep.end(), q.data().begin(), q.data().end());
    return Tensor::from(expected, std::move(rep));
  }
  throw ShapeError("residual: source " + ad::to_string(q.shape()) +
                   " must have the padded field's extents minus 2, i.e. " +
                   ad::to_string(expected));
}

void check_geometry(const Tensor& t_padded, const GridGeometry& geom) {
  geom.validate();
  for (std::size_t a = 0; a < geom.dims(); ++a)
    if (t_padded.extent(a + 1) != geom.nodes(a))
      throw ShapeError("residual: field extent " + std::to_string(t_padded.extent(a + 1)) +
                       " on axis " + std::to_string(a) + " does not match geometry (" +
                       std::to_string(geom.nodes(a)) + " nodes)");
}

}  // namespace

Tensor residual_2d(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                   const GridGeometry& geom) {
  if (geom.dims() != 2) throw ShapeError("residual_2d needs a 2D geometry");
  physics.validate();
  check_geometry(t_padded, geom);
  Tensor source = source_as_batch(q, t_padded, 2);
  Tensor lap = ad::add(second_derivative(t_padded, 0, geom.h(0)),
                       second_derivative(t_padded, 1, geom.h(1)));
  return ad::add(ad::affine(nn::crop(lap, 1), physics.k), source);
}

Tensor residual_3d(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                   const GridGeometry& geom) {
  if (geom.dims() != 3) throw ShapeError("residual_3d needs a 3D geometry");
  physics.validate();
  check_geometry(t_padded, geom);
  Tensor source = source_as_batch(q, t_padded, 3);
  Tensor lap = second_derivative(t_padded, 0, geom.h(0));
  lap = ad::add(lap, second_derivative(t_padded, 1, geom.h(1)));
  lap = ad::add(lap, second_derivative(t_padded, 2, geom.h(2)));
  Tensor r = ad::affine(lap, physics.k);
  for (std::size_t a = 0; a < 3; ++a) {
    if (physics.velocity[a] == 0.0) continue;
    r = ad::add(r, ad::affine(image_gradient(t_padded, a, geom.h(a)), -physics.velocity[a]));
  }
  return ad::add(nn::crop(r, 1), source);
}

Tensor residual(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                const GridGeometry& geom) {
  return geom.dims() == 3 ? residual_3d(t_padded, q, physics, geom)
                          : residual_2d(t_padded, q, physics, geom);
}

}  // namespace aeig::stencil
