#include "aeig/field.hpp"

#include <cmath>

#include "aeig/errors.hpp"
#include "aeig/powermap.hpp"

namespace aeig {

TemperatureField make_field(std::string map_id, const GridGeometry& geom, double t_boundary,
                            std::vector<double> interior) {
  if (interior.size() != geom.interior_cells())
    throw ShapeError("temperature field for " + map_id + " has " + std::to_string(interior.size()) +
                     " values, geometry needs " + std::to_string(geom.interior_cells()));
  TemperatureField f;
  f.map_id = std::move(map_id);
  f.geom = geom;
  f.t_boundary = t_boundary;
  f.values = std::move(interior);
  return f;
}

std::vector<std::size_t> TemperatureField::extents() const {
  std::vector<std::size_t> e = geom.interior;
  if (padded)
    for (auto& v : e) v += 2;
  return e;
}

TemperatureField TemperatureField::with_boundary() const {
  if (padded) return *this;
  const std::size_t d = geom.dims();
  std::vector<std::size_t> n(3, 1), N(3, 1);
  for (std::size_t a = 0; a < d; ++a) {
    n[a] = geom.interior[a];
    N[a] = n[a] + 2;
  }
  // 2D fields use a unit third axis without padding
  const std::size_t zoff = d == 3 ? 1 : 0;
  if (d == 2) N[2] = 1;
  TemperatureField out = *this;
  out.padded = true;
  out.values.assign(N[0] * N[1] * N[2], t_boundary);
  for (std::size_t i = 0; i < n[0]; ++i)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t k = 0; k < n[2]; ++k)
        out.values[((i + 1) * N[1] + (j + 1)) * N[2] + k + zoff] = values[(i * n[1] + j) * n[2] + k];
  return out;
}

TemperatureField TemperatureField::interior_only() const {
  if (!padded) return *this;
  const std::size_t d = geom.dims();
  std::vector<std::size_t> n(3, 1), N(3, 1);
  for (std::size_t a = 0; a < d; ++a) {
    n[a] = geom.interior[a];
    N[a] = n[a] + 2;
  }
  const std::size_t zoff = d == 3 ? 1 : 0;
  if (d == 2) N[2] = 1;
  TemperatureField out = *this;
  out.padded = false;
  out.values.resize(geom.interior_cells());
  for (std::size_t i = 0; i < n[0]; ++i)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t k = 0; k < n[2]; ++k)
        out.values[(i * n[1] + j) * n[2] + k] = values[((i + 1) * N[1] + (j + 1)) * N[2] + k + zoff];
  return out;
}

ad::Tensor TemperatureField::to_tensor() const {
  ad::Shape s{1};
  for (auto e : extents()) s.push_back(e);
  s.push_back(1);
  return ad::Tensor::from(std::move(s), values);
}

void TemperatureField::check_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("non-finite temperature in field " + map_id);
}

void write_field(const std::filesystem::path& path, const TemperatureField& field) {
  GridFile g;
  g.id = field.map_id;
  g.family = Family::temperature;
  g.group = field.padded ? "padded" : "interior";
  g.extents = field.extents();
  g.h = field.geom.h(0);
  g.params.background = field.t_boundary;  // boundary temperature rides in the background slot
  g.values = field.values;
  write_grid_file(path, g);
}

TemperatureField read_field(const std::filesystem::path& path, double t_boundary) {
  GridFile g = read_grid_file(path);
  if (g.family != Family::temperature) throw IoError(path.string() + " is not a temperature field");
  TemperatureField f;
  f.map_id = g.id;
  f.padded = g.group == "padded";
  f.t_boundary = g.params.background != 0.0 ? g.params.background : t_boundary;
  for (auto e : g.extents) f.geom.interior.push_back(f.padded ? e - 2 : e);
  f.values = std::move(g.values);
  return f;
}

}  // namespace aeig
