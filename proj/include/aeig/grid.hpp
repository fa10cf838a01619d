#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace aeig {

// Uniform grid on the unit square or cube. `interior` holds the extents of
// the unknown (non-boundary) nodes; the full nodal grid adds one Dirichlet
// node on each side, so spacing is h = 1 / (interior + 1) = 1 / (N - 1).
struct GridGeometry {
  std::vector<std::size_t> interior;

  static GridGeometry square(std::size_t n) { return {{n, n}}; }
  static GridGeometry cube(std::size_t n) { return {{n, n, n}}; }
  // From full nodal extents N (boundary included).
  static GridGeometry from_nodes(std::size_t nodes, std::size_t dims);

  std::size_t dims() const { return interior.size(); }
  std::size_t nodes(std::size_t axis) const { return interior.at(axis) + 2; }
  double h(std::size_t axis) const { return 1.0 / static_cast<double>(nodes(axis) - 1); }
  // Coordinate of interior index i along `axis`.
  double coord(std::size_t axis, std::size_t i) const {
    return static_cast<double>(i + 1) * h(axis);
  }
  std::size_t interior_cells() const;
  std::size_t node_cells() const;

  // Throws ShapeError unless 2 or 3 axes with at least 5 nodes each.
  void validate() const;

  bool operator==(const GridGeometry&) const = default;
};

struct PhysicsParams {
  double k = 1.0;                           // thermal conductivity
  std::array<double, 3> velocity{1.0, 1.0, 1.0};  // convection (3D only)
  double t_boundary = 150.0;                // Dirichlet value, deg C

  // Throws DomainError unless k > 0 and all values are finite.
  void validate() const;
};

}  // namespace aeig
