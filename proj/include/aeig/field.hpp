#pragma once

// Temperature fields on the unit square/cube.

#include <filesystem>
#include <string>
#include <vector>

#include "aeig/grid.hpp"
#include "aeig/tensor.hpp"

namespace aeig {

struct TemperatureField {
  std::string map_id;
  GridGeometry geom;           // interior geometry
  double t_boundary = 150.0;
  bool padded = false;         // values cover the full nodal grid when true
  std::vector<double> values;  // row-major, deg C

  // Copy with the Dirichlet ring (shell) added; already-padded fields are
  // returned unchanged.
  TemperatureField with_boundary() const;
  TemperatureField interior_only() const;

  std::vector<std::size_t> extents() const;
  // [1, extents..., 1]
  ad::Tensor to_tensor() const;
  // Throws NumericalError naming the map when a value is not finite.
  void check_finite() const;
};

// Field from a network output or solver vector of interior values.
TemperatureField make_field(std::string map_id, const GridGeometry& geom, double t_boundary,
                            std::vector<double> interior);

// Grid-file export (family "temperature").
void write_field(const std::filesystem::path& path, const TemperatureField& field);
TemperatureField read_field(const std::filesystem::path& path, double t_boundary = 150.0);

}  // namespace aeig
