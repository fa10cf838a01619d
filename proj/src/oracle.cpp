#include "aeig/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace aeig::oracle {

namespace {

// One row of a 1D operator over node indices 0..m-1.
using Row = std::vector<std::pair<std::size_t, double>>;

std::vector<Row> image_gradient_rows(std::size_t m, double h) {
  std::vector<Row> g(m);
  g[0] = {{0, -1.0 / h}, {1, 1.0 / h}};
  for (std::size_t i = 1; i + 1 < m; ++i) g[i] = {{i - 1, -0.5 / h}, {i + 1, 0.5 / h}};
  g[m - 1] = {{m - 2, -1.0 / h}, {m - 1, 1.0 / h}};
  return g;
}

// k * D2 - v * D1 restricted to the interior rows 1..m-2.
std::vector<Row> axis_operator(std::size_t m, double h, double k, double v, Operator op) {
  std::vector<Row> rows(m);
  const auto g = image_gradient_rows(m, h);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    std::map<std::size_t, double> acc;
    if (op == Operator::compact) {
      acc[i - 1] += k / (h * h);
      acc[i] += -2.0 * k / (h * h);
      acc[i + 1] += k / (h * h);
    } else {
      for (auto [l, gil] : g[i])
        for (auto [j, glj] : g[l]) acc[j] += k * gil * glj;
    }
    if (v != 0.0)
      for (auto [j, c] : g[i]) acc[j] -= v * c;
    rows[i].assign(acc.begin(), acc.end());
  }
  return rows;
}

using Clock = std::chrono::steady_clock;

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double cell_peclet(const GridGeometry& geom, const PhysicsParams& physics) {
  if (geom.dims() != 3) return 0.0;
  double pe = 0.0;
  for (std::size_t a = 0; a < 3; ++a)
    pe = std::max(pe, std::abs(physics.velocity[a]) * geom.h(a) / (2.0 * physics.k));
  return pe;
}

LinearSystemGrid assemble(const GridGeometry& geom, const PhysicsParams& physics, Operator op) {
  geom.validate();
  physics.validate();
  const std::size_t d = geom.dims();
  std::vector<std::size_t> n(3, 1);
  for (std::size_t a = 0; a < d; ++a) n[a] = geom.interior[a];
  std::vector<std::vector<Row>> ops;
  for (std::size_t a = 0; a < d; ++a)
    ops.push_back(axis_operator(geom.nodes(a), geom.h(a), physics.k,
                                d == 3 ? physics.velocity[a] : 0.0, op));

  LinearSystemGrid sys;
  sys.geom = geom;
  sys.op = op;
  const std::size_t cells = geom.interior_cells();
  sys.diag.assign(cells, 0.0);
  sys.row_start.reserve(cells + 1);
  sys.row_start.push_back(0);
  sys.dominance_margin = std::numeric_limits<double>::infinity();

  std::map<std::size_t, double> row;
  for (std::size_t i = 0; i < n[0]; ++i)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t k = 0; k < n[2]; ++k) {
        const std::size_t p = (i * n[1] + j) * n[2] + k;
        const std::size_t idx[3] = {i, j, k};
        row.clear();
        double boundary = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const std::size_t node = idx[a] + 1;
          for (auto [nj, c] : ops[a][node]) {
            if (nj == 0 || nj + 1 == geom.nodes(a)) {
              boundary += std::abs(c);
              continue;
            }
            std::size_t q[3] = {i, j, k};
            q[a] = nj - 1;
            row[(q[0] * n[1] + q[1]) * n[2] + q[2]] += c;
          }
        }
        double off = boundary;
        for (auto [col, c] : row) {
          if (col == p) {
            sys.diag[p] = c;
            continue;
          }
          if (c == 0.0) continue;
          sys.cols.push_back(col);
          sys.coefs.push_back(c);
          off += std::abs(c);
        }
        sys.row_start.push_back(sys.cols.size());
        sys.dominance_margin = std::min(sys.dominance_margin, std::abs(sys.diag[p]) - off);
      }
  return sys;
}

void LinearSystemGrid::apply(const std::vector<double>& theta, std::vector<double>& out) const {
  out.resize(size());
  for (std::size_t r = 0; r < size(); ++r) {
    double s = diag[r] * theta[r];
    for (std::size_t e = row_start[r]; e < row_start[r + 1]; ++e) s += coefs[e] * theta[cols[e]];
    out[r] = s;
  }
}

Solution solve_system(const LinearSystemGrid& sys, const std::vector<double>& q, double t_boundary,
                      const SolveOptions& opts) {
  if (q.size() != sys.size())
    throw ShapeError("oracle: source has " + std::to_string(q.size()) + " values, system has " +
                     std::to_string(sys.size()) + " unknowns");
  if (!(opts.tol > 0.0)) throw DomainError("oracle: tolerance must be positive");
  const auto start = Clock::now();
  SolveReport report;
  double h_max = 0.0;
  for (std::size_t a = 0; a < sys.geom.dims(); ++a) h_max = std::max(h_max, sys.geom.h(a));
  const double h_eff = sys.op == Operator::widened ? 2.0 * h_max : h_max;
  report.omega = opts.omega > 0.0 ? opts.omega : 2.0 / (1.0 + std::sin(std::numbers::pi * h_eff));

  // Sweep order: red then black for the compact stencils (neighbours always
  // have the other colour), plain row order otherwise.
  std::vector<std::size_t> order(sys.size());
  if (sys.op == Operator::compact) {
    const auto& g = sys.geom;
    const std::size_t ny = g.interior[1], nz = g.dims() == 3 ? g.interior[2] : 1;
    std::size_t pos = 0;
    for (std::size_t colour = 0; colour < 2; ++colour)
      for (std::size_t r = 0; r < sys.size(); ++r) {
        const std::size_t k = r % nz, j = (r / nz) % ny, i = r / (nz * ny);
        if ((i + j + k) % 2 == colour) order[pos++] = r;
      }
  } else {
    for (std::size_t r = 0; r < sys.size(); ++r) order[r] = r;
  }

  std::vector<double> theta(sys.size(), 0.0), ax;
  const double qnorm = norm2(q);
  const double scale = qnorm > 0.0 ? qnorm : 1.0;
  auto relative_residual = [&] {
    sys.apply(theta, ax);
    for (std::size_t r = 0; r < ax.size(); ++r) ax[r] += q[r];
    return norm2(ax) / scale;
  };

  const double w = report.omega;
  report.relative_residual = relative_residual();
  while (report.relative_residual > opts.tol) {
    if (report.iterations >= opts.max_iterations) break;
    const std::size_t sweeps = std::max<std::size_t>(1, opts.check_every);
    for (std::size_t s = 0; s < sweeps; ++s) {
      for (std::size_t r : order) {
        double acc = -q[r];
        for (std::size_t e = sys.row_start[r]; e < sys.row_start[r + 1]; ++e)
          acc -= sys.coefs[e] * theta[sys.cols[e]];
        theta[r] += w * (acc / sys.diag[r] - theta[r]);
      }
    }
    report.iterations += sweeps;
    report.relative_residual = relative_residual();
    if (!std::isfinite(report.relative_residual) || report.relative_residual > 1e12) break;
  }
  report.converged = report.relative_residual <= opts.tol;
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (!report.converged) {
    std::ostringstream os;
    os << "oracle did not converge: relative residual " << report.relative_residual << " after "
       << report.iterations << " sweeps (omega " << report.omega << ", tol " << opts.tol << ")";
    throw SolveError(os.str(), report);
  }
  Solution sol;
  for (auto& t : theta) t += t_boundary;
  sol.field = make_field("", sys.geom, t_boundary, std::move(theta));
  sol.report = report;
  return sol;
}

namespace {

std::vector<double> source_values(const PowerMap& map, const GridGeometry& geom) {
  auto t = source_tensor(map, geom);
  return {t.data().begin(), t.data().end()};
}

void check_peclet(const GridGeometry& geom, const PhysicsParams& physics) {
  const double pe = cell_peclet(geom, physics);
  if (pe >= 1.0) {
    std::ostringstream os;
    os << "cell Peclet number " << pe
       << " >= 1: central convection differencing is unstable here; reduce the velocity, raise k "
          "or refine the grid";
    throw DomainError(os.str());
  }
}

Solution finish(Solution s, const PowerMap& map) {
  s.field.map_id = map.id;
  return s;
}

}  // namespace

Solution solve_2d(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                  const SolveOptions& opts) {
  if (geom.dims() != 2) throw ShapeError("solve_2d needs a 2D geometry");
  const auto sys = assemble(geom, physics, Operator::compact);
  return finish(solve_system(sys, source_values(map, geom), physics.t_boundary, opts), map);
}

Solution solve_3d(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                  const SolveOptions& opts) {
  if (geom.dims() != 3) throw ShapeError("solve_3d needs a 3D geometry");
  physics.validate();
  check_peclet(geom, physics);
  const auto sys = assemble(geom, physics, Operator::compact);
  return finish(solve_system(sys, source_values(map, geom), physics.t_boundary, opts), map);
}

Solution solve_widened(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                       const SolveOptions& opts) {
  physics.validate();
  check_peclet(geom, physics);
  const auto sys = assemble(geom, physics, Operator::widened);
  return finish(solve_system(sys, source_values(map, geom), physics.t_boundary, opts), map);
}

Solution solve(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
               const SolveOptions& opts) {
  return geom.dims() == 3 ? solve_3d(map, physics, geom, opts) : solve_2d(map, physics, geom, opts);
}

}  // namespace aeig::oracle
