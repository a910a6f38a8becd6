#pragma once

#include "lls/common.hpp"

#include <vector>

namespace lls {

/// Small dense convex QP:
///   minimize 0.5 x'Qx + c'x  subject to  A x = b,  G x >= h.
/// Q must be symmetric positive semidefinite.
struct QuadraticProgram {
  Mat Q;
  Vec c;
  Mat A;  // may have zero rows
  Vec b;
  Mat G;  // may have zero rows
  Vec h;

  int dimension() const { return static_cast<int>(Q.rows()); }

  /// Residual form: minimize ||R x - r||^2 (plus a constant), i.e.
  /// Q = 2 R'R, c = -2 R'r.
  static QuadraticProgram from_residual(const Mat& R, const Vec& r);

  void validate() const;
};

struct QpSolution {
  Vec x;
  std::vector<int> active_set;  // indices of tight inequalities
  Vec eq_multipliers;
  Vec ineq_multipliers;  // aligned with active_set
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct QpOptions {
  double tol = 1e-10;
  /// 0 means the default 10 * (n + #constraints).
  int max_iter = 0;
  /// Optional per-iteration traces (objective value and iterate).
  std::vector<double>* objective_trace = nullptr;
  std::vector<Vec>* iterate_trace = nullptr;
};

/// Antigradient projection with active-set management: the negative gradient
/// is projected onto the null space of the active constraints, the iterate
/// moves to the exact line minimum of the quadratic or to the closest
/// inactive boundary, whichever is nearer; at a projected stationary point
/// the most negative active-inequality multiplier is released. The returned
/// point satisfies the Kuhn-Tucker conditions to tolerance.
///
/// x0 must be feasible. A constraint dropped on one iteration may not re-enter
/// on the next (cycling guard). Throws numeric_error on iteration exhaustion.
QpSolution solve_qp(const QuadraticProgram& prob, const Vec& x0, const QpOptions& options = {});

struct KktReport {
  double stationarity = 0.0;
  double primal_equality = 0.0;
  double primal_inequality = 0.0;
  double dual = 0.0;  // most negative inequality multiplier, clipped at 0
  double complementarity = 0.0;
  bool ok = false;

  double residual() const;
};

/// Verifies stationarity, primal/dual feasibility, and complementary
/// slackness of a candidate optimum. ineq_multipliers must align with
/// active_set; inactive constraints carry zero multipliers.
KktReport kkt_check(const QuadraticProgram& prob, const Vec& x, const Vec& eq_multipliers,
                    const std::vector<int>& active_set, const Vec& ineq_multipliers, double tol);

}  // namespace lls
