#include "aeig/powermap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "aeig/checkpoint.hpp"
#include "aeig/errors.hpp"
#include "aeig/layers.hpp"
#include "aeig/text.hpp"

namespace aeig {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_num(double v) { return text::format_double(v); }

std::string index_id(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return stem + buf;
}

void require_2d(const GridGeometry& geom, const char* what) {
  geom.validate();
  if (geom.dims() != 2) throw ShapeError(std::string(what) + " needs a 2D map grid");
}

}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::sinusoidal: return "sinusoidal";
    case Family::exponential: return "exponential";
    case Family::tile: return "tile";
    case Family::temperature: return "temperature";
  }
  return "?";
}

const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

const char* to_string(UseCase u) {
  switch (u) {
    case UseCase::sin: return "sin";
    case UseCase::exp: return "exp";
    case UseCase::tile2d: return "tile2d";
    case UseCase::tile3d: return "tile3d";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "sinusoidal") return Family::sinusoidal;
  if (s == "exponential") return Family::exponential;
  if (s == "tile") return Family::tile;
  if (s == "temperature") return Family::temperature;
  throw ConfigError("unknown map family '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

UseCase parse_use_case(const std::string& s) {
  if (s == "sin") return UseCase::sin;
  if (s == "exp") return UseCase::exp;
  if (s == "tile2d") return UseCase::tile2d;
  if (s == "tile3d") return UseCase::tile3d;
  throw ConfigError("unknown use case '" + s + "' (expected sin, exp, tile2d or tile3d)");
}

ad::Tensor PowerMap::to_tensor() const {
  return ad::Tensor::from({1, geom.interior[0], geom.interior[1], 1}, values);
}

// ---------------------------------------------------------------------------
// Analytic families

double sinusoidal_value(double C, double a, double b, double x, double y) {
  return C * std::sin(kTwoPi * (a * x + b * y)) + C;
}

double exponential_value(double a, double b, double bias, double x, double y) {
  const double px = 0.5 + 0.1 * (a + bias);
  const double py = 0.5 + 0.1 * (b + bias);
  if (std::abs(px) < 1e-12 || std::abs(py) < 1e-12)
    throw DomainError("exponential power map: period 0.5 + 0.1(a + bias) is zero");
  return std::exp(-(std::sin(kTwoPi * x / px) + std::sin(kTwoPi * y / py)));
}

PowerMap gen_sinusoidal(double C, double a, double b, const GridGeometry& geom) {
  require_2d(geom, "gen_sinusoidal");
  PowerMap m;
  m.family = Family::sinusoidal;
  m.params.C = C;
  m.params.a = a;
  m.params.b = b;
  m.geom = geom;
  m.values.resize(geom.interior_cells());
  for (std::size_t i = 0; i < geom.interior[0]; ++i)
    for (std::size_t j = 0; j < geom.interior[1]; ++j)
      m.values[i * geom.interior[1] + j] =
          sinusoidal_value(C, a, b, geom.coord(0, i), geom.coord(1, j));
  return m;
}

PowerMap gen_exponential(double a, double b, double bias, const GridGeometry& geom) {
  require_2d(geom, "gen_exponential");
  PowerMap m;
  m.family = Family::exponential;
  m.params.a = a;
  m.params.b = b;
  m.params.bias = bias;
  m.geom = geom;
  m.values.resize(geom.interior_cells());
  for (std::size_t i = 0; i < geom.interior[0]; ++i)
    for (std::size_t j = 0; j < geom.interior[1]; ++j)
      m.values[i * geom.interior[1] + j] =
          exponential_value(a, b, bias, geom.coord(0, i), geom.coord(1, j));
  return m;
}

// ---------------------------------------------------------------------------
// Tile maps and augmentation

PowerMap gen_tile_seed(const GridGeometry& geom, std::uint64_t seed, const TileConfig& cfg) {
  require_2d(geom, "gen_tile_seed");
  const auto nx = static_cast<std::int64_t>(geom.interior[0]);
  const auto ny = static_cast<std::int64_t>(geom.interior[1]);
  nn::Rng rng(seed);
  PowerMap m;
  m.family = Family::tile;
  m.params.seed = seed;
  m.params.background = cfg.background;
  m.geom = geom;
  m.values.assign(geom.interior_cells(), cfg.background);

  const int regions = static_cast<int>(rng.integer(cfg.min_regions, cfg.max_regions));
  m.params.regions = regions;
  std::vector<double> levels;
  auto draw_extent = [&](std::int64_t n) {
    return rng.integer(std::max<std::int64_t>(2, n / 10), std::max<std::int64_t>(2, n / 3));
  };
  for (int r = 0; r < regions; ++r) {
    const std::int64_t w = draw_extent(nx), h = draw_extent(ny);
    const std::int64_t mx = std::max<std::int64_t>(1, nx / 8), my = std::max<std::int64_t>(1, ny / 8);
    const std::int64_t x0 = rng.integer(mx, std::max(mx, nx - mx - w));
    const std::int64_t y0 = rng.integer(my, std::max(my, ny - my - h));
    double level = rng.uniform(cfg.q_min, cfg.q_max);
    while (std::find(levels.begin(), levels.end(), level) != levels.end())
      level = rng.uniform(cfg.q_min, cfg.q_max);
    levels.push_back(level);
    for (std::int64_t i = x0; i < std::min(nx, x0 + w); ++i)
      for (std::int64_t j = y0; j < std::min(ny, y0 + h); ++j)
        m.values[static_cast<std::size_t>(i * ny + j)] = level;
  }
  return m;
}

PowerMap augment(const PowerMap& map, double rotation_deg, std::pair<int, int> shift_cells) {
  const std::size_t nx = map.geom.interior[0], ny = map.geom.interior[1];
  const double bg = map.params.background;
  const double angle = std::fmod(rotation_deg, 360.0) * std::numbers::pi / 180.0;
  const double c = std::cos(angle), s = std::sin(angle);
  const double cx = 0.5 * static_cast<double>(nx - 1), cy = 0.5 * static_cast<double>(ny - 1);
  constexpr double kEdge = 1e-9;

  std::vector<double> rotated(map.values.size(), bg);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double dx = static_cast<double>(i) - cx, dy = static_cast<double>(j) - cy;
      double sx = cx + c * dx + s * dy;
      double sy = cy - s * dx + c * dy;
      if (sx < -kEdge || sy < -kEdge || sx > static_cast<double>(nx - 1) + kEdge ||
          sy > static_cast<double>(ny - 1) + kEdge)
        continue;
      sx = std::clamp(sx, 0.0, static_cast<double>(nx - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(ny - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(sx));
      const auto j0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t i1 = std::min(i0 + 1, nx - 1), j1 = std::min(j0 + 1, ny - 1);
      const double fx = sx - static_cast<double>(i0), fy = sy - static_cast<double>(j0);
      const double v00 = map.values[i0 * ny + j0], v01 = map.values[i0 * ny + j1];
      const double v10 = map.values[i1 * ny + j0], v11 = map.values[i1 * ny + j1];
      rotated[i * ny + j] =
          (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11);
    }

  PowerMap out = map;
  out.params.rotation_deg = map.params.rotation_deg + rotation_deg;
  out.params.shift_x = map.params.shift_x + shift_cells.first;
  out.params.shift_y = map.params.shift_y + shift_cells.second;
  out.values.assign(map.values.size(), bg);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const auto si = static_cast<std::ptrdiff_t>(i) - shift_cells.first;
      const auto sj = static_cast<std::ptrdiff_t>(j) - shift_cells.second;
      if (si < 0 || sj < 0 || si >= static_cast<std::ptrdiff_t>(nx) ||
          sj >= static_cast<std::ptrdiff_t>(ny))
        continue;
      out.values[i * ny + j] = rotated[static_cast<std::size_t>(si) * ny + static_cast<std::size_t>(sj)];
    }
  return out;
}

std::pair<int, int> spiral_offset(int m) {
  int x = 0, y = 0, dx = 1, dy = 0, leg = 1, taken = 0, turns = 0;
  for (int i = 0; i < m; ++i) {
    x += dx;
    y += dy;
    if (++taken == leg) {
      taken = 0;
      const int t = dx;
      dx = -dy;
      dy = t;
      if (++turns % 2 == 0) ++leg;
    }
  }
  return {x, y};
}

std::vector<int> test_augmentation_magnitudes() {
  std::set<int> mags;
  for (int c = 1; c <= 20; ++c)
    for (int step = 1; step <= 20; ++step) mags.insert(c * step);
  for (int c = 1; c <= 20; ++c) mags.erase(20 * c);
  return {mags.begin(), mags.end()};
}

// ---------------------------------------------------------------------------
// Standard datasets

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(maps.begin(), maps.end(), [s](const PowerMap& m) { return m.split == s; }));
}

std::vector<const PowerMap*> DatasetManifest::split(Split s) const {
  std::vector<const PowerMap*> out;
  for (const auto& m : maps)
    if (m.split == s) out.push_back(&m);
  return out;
}

namespace {

void add_map(DatasetManifest& ds, PowerMap m, Split split, std::string group, const char* stem) {
  const std::size_t index = ds.count(split);
  m.id = index_id(std::string(stem) + "_" + to_string(split) + "_", index);
  m.split = split;
  m.group = std::move(group);
  ds.maps.push_back(std::move(m));
}

void build_tile(DatasetManifest& ds, const DatasetOptions& opts, std::size_t test_shifts,
                const char* stem) {
  const PowerMap seed = gen_tile_seed(opts.geom, opts.seed, opts.tile);
  add_map(ds, seed, Split::train, "train", stem);
  for (int c = 1; c <= 20; ++c) add_map(ds, augment(seed, 20.0 * c, {0, 0}), Split::train, "train", stem);
  for (int c = 1; c <= 20; ++c)
    add_map(ds, augment(seed, 0.0, spiral_offset(20 * c)), Split::train, "train", stem);

  const auto mags = test_augmentation_magnitudes();
  std::set<int> train_angles{0};
  for (int c = 1; c <= 20; ++c) train_angles.insert((20 * c) % 360);
  std::set<int> angles;
  for (int m : mags)
    if (!train_angles.count(m % 360)) angles.insert(m % 360);
  for (int a : angles) add_map(ds, augment(seed, a, {0, 0}), Split::test, "rotation", stem);
  for (std::size_t i = 0; i < test_shifts && i < mags.size(); ++i)
    add_map(ds, augment(seed, 0.0, spiral_offset(mags[i])), Split::test, "shift", stem);
}

}  // namespace

DatasetManifest build_standard_datasets(UseCase use_case, const DatasetOptions& opts) {
  require_2d(opts.geom, "build_standard_datasets");
  DatasetManifest ds;
  ds.use_case = use_case;
  ds.seed = opts.seed;
  ds.map_geom = opts.geom;
  ds.solve_geom = opts.geom;
  const auto& g = opts.geom;
  switch (use_case) {
    case UseCase::sin: {
      for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) add_map(ds, gen_sinusoidal(0.125, a, b, g), Split::train, "train", "sin");
      for (double c2 : {0.1, 0.13, 0.15})
        for (int a = 0; a <= 4; ++a)
          for (int b = 0; b <= 4; ++b)
            add_map(ds, gen_sinusoidal(c2, a, b, g), Split::test, "C=" + fmt_num(c2), "sin");
      for (double bias : {0.05, 0.1, 0.3, 0.5})
        for (int a = 0; a <= 4; ++a)
          for (int b = 0; b <= 4; ++b) {
            PowerMap m = gen_sinusoidal(0.125, a + bias, b + bias, g);
            m.params.bias = bias;
            add_map(ds, std::move(m), Split::test, "bias=" + fmt_num(bias), "sin");
          }
      break;
    }
    case UseCase::exp: {
      for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) add_map(ds, gen_exponential(a, b, 0.0, g), Split::train, "train", "exp");
      for (double bias : {-0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5})
        for (int a = 0; a <= 4; ++a)
          for (int b = 0; b <= 4; ++b)
            add_map(ds, gen_exponential(a, b, bias, g), Split::test, "bias=" + fmt_num(bias), "exp");
      break;
    }
    case UseCase::tile2d:
      build_tile(ds, opts, 86, "tile2d");
      break;
    case UseCase::tile3d:
      ds.solve_geom = GridGeometry{{g.interior[0], g.interior[1], g.interior[0]}};
      build_tile(ds, opts, 57, "tile3d");
      break;
  }
  double mx = 0.0;
  for (const auto* m : ds.split(Split::train))
    for (double v : m->values) mx = std::max(mx, std::abs(v));
  ds.normalization_max = mx > 0.0 ? mx : 1.0;
  return ds;
}

ad::Tensor source_tensor(const PowerMap& map, const GridGeometry& solve_geom) {
  return source_batch({&map}, solve_geom);
}

ad::Tensor source_batch(const std::vector<const PowerMap*>& maps, const GridGeometry& solve_geom) {
  if (maps.empty()) throw ShapeError("source_batch: no maps");
  const std::size_t nx = solve_geom.interior[0], ny = solve_geom.interior[1];
  ad::Shape shape{maps.size()};
  for (auto e : solve_geom.interior) shape.push_back(e);
  shape.push_back(1);
  std::vector<double> v;
  v.reserve(ad::numel(shape));
  for (const auto* m : maps) {
    if (m->geom.interior[0] != nx || m->geom.interior[1] != ny)
      throw ShapeError("map " + m->id + " does not match the solve grid");
    if (solve_geom.dims() == 2) {
      v.insert(v.end(), m->values.begin(), m->values.end());
      continue;
    }
    const std::size_t nz = solve_geom.interior[2];
    const std::size_t hi = nz / 2, lo = nz % 2 == 0 ? hi - 1 : hi;
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t k = 0; k < nz; ++k)
          v.push_back(k == lo || k == hi ? m->values[i * ny + j] : 0.0);
  }
  return ad::Tensor::from(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------------------
// Grid files

namespace {

std::string params_line(const MapParams& p) {
  std::ostringstream os;
  os << "C=" << fmt_num(p.C) << " a=" << fmt_num(p.a) << " b=" << fmt_num(p.b)
     << " bias=" << fmt_num(p.bias) << " rotation=" << fmt_num(p.rotation_deg)
     << " shift=" << p.shift_x << ',' << p.shift_y << " seed=" << p.seed
     << " regions=" << p.regions << " background=" << fmt_num(p.background);
  return os.str();
}

MapParams parse_params(const std::vector<std::string>& toks) {
  MapParams p;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos) throw IoError("bad params field '" + toks[i] + "'");
    const std::string key = toks[i].substr(0, eq), val = toks[i].substr(eq + 1);
    if (key == "C") p.C = text::parse_double(val);
    else if (key == "a") p.a = text::parse_double(val);
    else if (key == "b") p.b = text::parse_double(val);
    else if (key == "bias") p.bias = text::parse_double(val);
    else if (key == "rotation") p.rotation_deg = text::parse_double(val);
    else if (key == "shift") {
      auto xy = text::split(val, ',');
      if (xy.size() != 2) throw IoError("bad shift '" + val + "'");
      p.shift_x = static_cast<int>(text::parse_int(xy[0]));
      p.shift_y = static_cast<int>(text::parse_int(xy[1]));
    } else if (key == "seed") p.seed = static_cast<std::uint64_t>(text::parse_int(val));
    else if (key == "regions") p.regions = static_cast<int>(text::parse_int(val));
    else if (key == "background") p.background = text::parse_double(val);
    else throw IoError("unknown params field '" + key + "'");
  }
  return p;
}

}  // namespace

void write_grid_file(const std::filesystem::path& path, const GridFile& grid) {
  std::size_t n = 1;
  for (auto e : grid.extents) n *= e;
  if (n != grid.values.size()) throw ShapeError("grid file " + grid.id + ": extents/values mismatch");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "AEIGGRID " << kGridFormatVersion << '\n'
     << "id " << grid.id << '\n'
     << "family " << to_string(grid.family) << '\n'
     << "split " << to_string(grid.split) << '\n'
     << "group " << (grid.group.empty() ? "-" : grid.group) << '\n'
     << "params " << params_line(grid.params) << '\n'
     << "extents";
  for (auto e : grid.extents) os << ' ' << e;
  os << '\n' << "h " << fmt_num(grid.h) << '\n' << "values " << grid.values.size() << '\n';
  for (double v : grid.values) nn::write_f64(os, v);
  if (!os) throw IoError("failed writing " + path.string());
}

GridFile read_grid_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open grid file " + path.string());
  GridFile g;
  std::string line;
  std::size_t count = 0;
  bool header_ok = false;
  while (std::getline(is, line)) {
    auto toks = text::tokens(line);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    if (key == "AEIGGRID") {
      if (toks.size() != 2 || text::parse_int(toks[1]) != kGridFormatVersion)
        throw IoError(path.string() + ": unsupported grid format version");
      header_ok = true;
    } else if (!header_ok) {
      throw IoError(path.string() + " is not a grid file");
    } else if (key == "id" && toks.size() == 2) {
      g.id = toks[1];
    } else if (key == "family" && toks.size() == 2) {
      g.family = parse_family(toks[1]);
    } else if (key == "split" && toks.size() == 2) {
      g.split = parse_split(toks[1]);
    } else if (key == "group" && toks.size() == 2) {
      g.group = toks[1] == "-" ? "" : toks[1];
    } else if (key == "params") {
      g.params = parse_params(toks);
    } else if (key == "extents") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        g.extents.push_back(static_cast<std::size_t>(text::parse_int(toks[i])));
    } else if (key == "h" && toks.size() == 2) {
      g.h = text::parse_double(toks[1]);
    } else if (key == "values" && toks.size() == 2) {
      count = static_cast<std::size_t>(text::parse_int(toks[1]));
      break;
    } else {
      throw IoError(path.string() + ": unexpected header line '" + line + "'");
    }
  }
  std::size_t n = 1;
  for (auto e : g.extents) n *= e;
  if (g.extents.empty() || n != count) throw IoError(path.string() + ": extents/values mismatch");
  g.values.resize(count);
  for (auto& v : g.values) v = nn::read_f64(is);
  return g;
}

GridFile to_grid_file(const PowerMap& map) {
  GridFile g;
  g.id = map.id;
  g.family = map.family;
  g.split = map.split;
  g.group = map.group;
  g.params = map.params;
  g.extents = map.geom.interior;
  g.h = map.geom.h(0);
  g.values = map.values;
  return g;
}

PowerMap from_grid_file(const GridFile& g) {
  if (g.extents.size() != 2) throw ShapeError("power map file " + g.id + " must be 2D");
  PowerMap m;
  m.id = g.id;
  m.family = g.family;
  m.split = g.split;
  m.group = g.group;
  m.params = g.params;
  m.geom = GridGeometry{g.extents};
  m.values = g.values;
  return m;
}

// ---------------------------------------------------------------------------
// Dataset directories

namespace {

std::string extents_line(const GridGeometry& g) {
  std::string s;
  for (auto e : g.interior) s += " " + std::to_string(e);
  return s;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "maps", ec);
  if (ec) throw IoError("cannot create " + (dir / "maps").string() + ": " + ec.message());
  std::ofstream os(dir / "manifest.txt", std::ios::trunc);
  if (!os) throw IoError("cannot write " + (dir / "manifest.txt").string());
  os << "# power-map dataset manifest\n"
     << "format " << kGridFormatVersion << '\n'
     << "use_case " << to_string(ds.use_case) << '\n'
     << "seed " << ds.seed << '\n'
     << "map_extents" << extents_line(ds.map_geom) << '\n'
     << "solve_extents" << extents_line(ds.solve_geom) << '\n'
     << "normalization_max " << fmt_num(ds.normalization_max) << '\n'
     << "count train " << ds.count(Split::train) << '\n'
     << "count test " << ds.count(Split::test) << '\n'
     << "# map <id> <split> <group> <relative path>\n";
  for (const auto& m : ds.maps) {
    const std::string rel = "maps/" + m.id + ".grid";
    os << "map " << m.id << ' ' << to_string(m.split) << ' ' << m.group << ' ' << rel << '\n';
    write_grid_file(dir / rel, to_grid_file(m));
  }
  if (!os) throw IoError("failed writing manifest in " + dir.string());
}

DatasetManifest read_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.txt");
  if (!is) throw IoError("no dataset manifest in " + dir.string());
  DatasetManifest ds;
  std::string line;
  auto read_extents = [](const std::vector<std::string>& toks) {
    GridGeometry g;
    for (std::size_t i = 1; i < toks.size(); ++i)
      g.interior.push_back(static_cast<std::size_t>(text::parse_int(toks[i])));
    return g;
  };
  while (std::getline(is, line)) {
    auto toks = text::tokens(line);
    if (toks.empty() || toks[0].starts_with('#')) continue;
    const std::string& key = toks[0];
    if (key == "format") {
      if (text::parse_int(toks.at(1)) != kGridFormatVersion) throw IoError("unsupported manifest format");
    } else if (key == "use_case") {
      ds.use_case = parse_use_case(toks.at(1));
    } else if (key == "seed") {
      ds.seed = static_cast<std::uint64_t>(text::parse_int(toks.at(1)));
    } else if (key == "map_extents") {
      ds.map_geom = read_extents(toks);
    } else if (key == "solve_extents") {
      ds.solve_geom = read_extents(toks);
    } else if (key == "normalization_max") {
      ds.normalization_max = text::parse_double(toks.at(1));
    } else if (key == "count") {
      continue;
    } else if (key == "map" && toks.size() == 5) {
      ds.maps.push_back(from_grid_file(read_grid_file(dir / toks[4])));
    } else {
      throw IoError("bad manifest line: " + line);
    }
  }
  return ds;
}

}  // namespace aeig
