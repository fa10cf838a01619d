#pragma once

// Finite-difference reference solvers for the steady heat equations
//   2D: k (T_xx + T_yy) + Q = 0
//   3D: k lap(T) - V . grad(T) + Q = 0
// with T = t_boundary on the boundary of the unit square/cube.
//
// The unknowns are offsets theta = T - t_boundary. Every operator here
// annihilates constants, so theta vanishes on the boundary and the Dirichlet
// data drops out of the right-hand side.

#include <cstddef>
#include <vector>

#include "aeig/errors.hpp"
#include "aeig/field.hpp"
#include "aeig/grid.hpp"
#include "aeig/powermap.hpp"

namespace aeig::oracle {

enum class Operator {
  compact,  // 3/5/7-point second differences, central first differences
  widened,  // image gradient applied twice, as in the residual loss
};

// Sparse rows over the interior unknowns (row-major index map).
struct LinearSystemGrid {
  GridGeometry geom;
  Operator op = Operator::compact;
  std::vector<double> diag;
  std::vector<std::size_t> row_start;  // CSR over off-diagonal entries
  std::vector<std::size_t> cols;
  std::vector<double> coefs;
  // Worst |diag| - sum |offdiag| over rows, boundary couplings included;
  // negative when some row is not diagonally dominant.
  double dominance_margin = 0.0;

  std::size_t size() const { return diag.size(); }
  // out = A theta
  void apply(const std::vector<double>& theta, std::vector<double>& out) const;
};

LinearSystemGrid assemble(const GridGeometry& geom, const PhysicsParams& physics, Operator op);

// max |V_a| h_a / (2k) over axes; 0 in 2D.
double cell_peclet(const GridGeometry& geom, const PhysicsParams& physics);

struct SolveOptions {
  double tol = 1e-10;                 // on ||A theta + Q|| / ||Q||
  std::size_t max_iterations = 200000;
  double omega = 0.0;                 // 0 selects 2 / (1 + sin(pi h_eff))
  std::size_t check_every = 10;
};

struct SolveReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  double wall_seconds = 0.0;
  double omega = 0.0;
  bool converged = false;
};

class SolveError : public NumericalError {
 public:
  SolveError(const std::string& what, SolveReport report)
      : NumericalError(what), report_(report) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

struct Solution {
  TemperatureField field;  // interior values
  SolveReport report;
};

// Successive over-relaxation. Compact operators sweep in red-black order,
// the widened operator lexicographically. Throws SolveError when the
// tolerance is not met within max_iterations or the iteration blows up.
Solution solve_system(const LinearSystemGrid& system, const std::vector<double>& q,
                      double t_boundary, const SolveOptions& opts = {});

// Compact 5-point solve of the 2D equation for a map on geom.
Solution solve_2d(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                  const SolveOptions& opts = {});

// Compact 7-point diffusion with central convection; the 2D map is placed
// on the cube's centre plane(s). Throws DomainError when the cell Peclet
// number is 1 or more.
Solution solve_3d(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                  const SolveOptions& opts = {});

// Same equation under the residual loss's own operator, in 2D or 3D.
Solution solve_widened(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
                       const SolveOptions& opts = {});

// Dispatch on geom.dims() with the compact operator.
Solution solve(const PowerMap& map, const PhysicsParams& physics, const GridGeometry& geom,
               const SolveOptions& opts = {});

}  // namespace aeig::oracle
