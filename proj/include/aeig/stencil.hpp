#pragma once

// Differentiable finite-difference operators on gridded fields.
//
// Fields are channels-last tensors [batch, x, y, (z,) channels]. The first
// derivative is the image gradient: central (f[i+1] - f[i-1]) / 2h inside,
// one-sided first-order differences on the two end planes. Applying it twice
// gives (f[i+2] - 2 f[i] + f[i-2]) / 4h^2 wherever the outer gradient's
// stencil stays inside the central region, i.e. at indices 2 .. m-3.

#include "aeig/grid.hpp"
#include "aeig/tensor.hpp"

namespace aeig::stencil {

using ad::Tensor;

// d(field)/d(axis) for spatial axis 0, 1 or 2. Needs extent >= 3.
Tensor image_gradient(const Tensor& field, std::size_t axis, double h);

// image_gradient applied twice. Needs extent >= 5.
Tensor second_derivative(const Tensor& field, std::size_t axis, double h);

// Surrounds the interior prediction with one ring (2D) or shell (3D) of
// t_boundary. The written boundary values are exact constants.
Tensor pad_with_boundary(const Tensor& interior, double t_boundary);

// k (T_xx + T_yy) + Q on the interior cells. T_padded: [B, nx+2, ny+2, 1];
// q: [B, nx, ny, 1] or [nx, ny] (shared by every batch entry).
Tensor residual_2d(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                   const GridGeometry& geom);

// k lap(T) - V . grad(T) + Q on the interior cells, three axes.
Tensor residual_3d(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                   const GridGeometry& geom);

// Dispatches on geom.dims().
Tensor residual(const Tensor& t_padded, const Tensor& q, const PhysicsParams& physics,
                const GridGeometry& geom);

}  // namespace aeig::stencil
