#pragma once

// Power-map (heat source) generation and persistence.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aeig/grid.hpp"
#include "aeig/tensor.hpp"

namespace aeig {

enum class Family { sinusoidal, exponential, tile, temperature };
enum class Split { train, test };
enum class UseCase { sin, exp, tile2d, tile3d };

const char* to_string(Family f);
const char* to_string(Split s);
const char* to_string(UseCase u);
Family parse_family(const std::string& s);
Split parse_split(const std::string& s);
UseCase parse_use_case(const std::string& s);  // ConfigError when unknown

struct MapParams {
  double C = 0.0;
  double a = 0.0;
  double b = 0.0;
  double bias = 0.0;
  double rotation_deg = 0.0;
  int shift_x = 0;
  int shift_y = 0;
  std::uint64_t seed = 0;
  int regions = 0;
  double background = 0.0;

  bool operator==(const MapParams&) const = default;
};

struct PowerMap {
  std::string id;
  Family family = Family::sinusoidal;
  MapParams params;
  Split split = Split::train;
  std::string group;  // test group label, "train" for training maps
  GridGeometry geom;  // 2D interior grid
  std::vector<double> values;  // row-major [x][y]

  double at(std::size_t i, std::size_t j) const { return values[i * geom.interior[1] + j]; }
  // [1, nx, ny, 1]
  ad::Tensor to_tensor() const;
};

// Pointwise source formulas.
double sinusoidal_value(double C, double a, double b, double x, double y);
double exponential_value(double a, double b, double bias, double x, double y);

// C sin(2 pi (a x + b y)) + C sampled at the interior nodes.
PowerMap gen_sinusoidal(double C, double a, double b, const GridGeometry& geom);

// exp(-(sin(2 pi x / (0.5 + 0.1 (a + bias))) + sin(2 pi y / (0.5 + 0.1 (b + bias)))))
// Throws DomainError when either period is zero.
PowerMap gen_exponential(double a, double b, double bias, const GridGeometry& geom);

struct TileConfig {
  double background = 0.05;
  double q_min = 0.2;
  double q_max = 1.0;
  int min_regions = 3;
  int max_regions = 8;
};

// Piecewise-constant synthetic chip map: 3-8 axis-aligned rectangles with
// distinct power levels on a low background, kept at least n/8 cells away
// from the edges. Deterministic in `seed`.
PowerMap gen_tile_seed(const GridGeometry& geom, std::uint64_t seed, const TileConfig& cfg = {});

// Bilinear rotation about the grid centre followed by a whole-cell shift.
// Samples falling outside the source take params.background.
PowerMap augment(const PowerMap& map, double rotation_deg, std::pair<int, int> shift_cells);

// Cell offset for augmentation magnitude m: the m-th point of a square
// spiral around the origin (m = 0 is no shift).
std::pair<int, int> spiral_offset(int m);

// Magnitudes c' * step' for c', step' in [1, 20], deduplicated, excluding
// the training multiples of 20, ascending.
std::vector<int> test_augmentation_magnitudes();

struct DatasetOptions {
  GridGeometry geom = GridGeometry::square(32);  // 2D map grid; tile3d solves on its cube
  std::uint64_t seed = 7;                        // tile seed map
  TileConfig tile;
};

struct DatasetManifest {
  UseCase use_case = UseCase::sin;
  std::uint64_t seed = 0;
  GridGeometry map_geom;     // geometry of each stored 2D map
  GridGeometry solve_geom;   // geometry the PDE is solved on
  double normalization_max = 1.0;  // max |Q| over training maps
  std::vector<PowerMap> maps;

  std::size_t count(Split s) const;
  std::vector<const PowerMap*> split(Split s) const;
};

// Train/test maps for one use case. Counts: sin 25/175, exp 25/250,
// tile2d 41/217, tile3d 41/188.
DatasetManifest build_standard_datasets(UseCase use_case, const DatasetOptions& opts = {});

// Source tensor on the solve grid: the map itself in 2D, or the map placed on
// the cube's centre plane in 3D (both middle planes when the depth is even),
// zero elsewhere. Shape [1, n..., 1].
ad::Tensor source_tensor(const PowerMap& map, const GridGeometry& solve_geom);

// Stacks source tensors into [B, n..., 1].
ad::Tensor source_batch(const std::vector<const PowerMap*>& maps, const GridGeometry& solve_geom);

// ---------------------------------------------------------------------------
// Files

struct GridFile {
  std::string id;
  Family family = Family::sinusoidal;
  Split split = Split::train;
  std::string group;
  MapParams params;
  std::vector<std::size_t> extents;
  double h = 0.0;
  std::vector<double> values;
};

inline constexpr int kGridFormatVersion = 1;

void write_grid_file(const std::filesystem::path& path, const GridFile& grid);
GridFile read_grid_file(const std::filesystem::path& path);

GridFile to_grid_file(const PowerMap& map);
PowerMap from_grid_file(const GridFile& grid);

// Writes every map as <dir>/maps/<id>.grid plus <dir>/manifest.txt.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_dataset(const std::filesystem::path& dir);

}  // namespace aeig
