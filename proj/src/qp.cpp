#include "lls/qp.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lls {

QuadraticProgram QuadraticProgram::from_residual(const Mat& R, const Vec& r) {
  QuadraticProgram prob;
  prob.Q = 2.0 * R.transpose() * R;
  prob.c = -2.0 * R.transpose() * r;
  return prob;
}

void QuadraticProgram::validate() const {
  const int n = dimension();
  if (Q.cols() != n || c.size() != n) throw input_error("qp: Q/c shape mismatch");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + Q.cwiseAbs().maxCoeff()))
    throw input_error("qp: Q is not symmetric");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
    throw input_error("qp: equality shape mismatch");
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n))
    throw input_error("qp: inequality shape mismatch");
}

namespace {

// Orthonormal basis of the null space of N (rows = active constraint normals).
Mat null_space(const Mat& N, int n) {
  if (N.rows() == 0) return Mat::Identity(n, n);
  Eigen::JacobiSVD<Mat> svd(N, Eigen::ComputeFullV);
  double tol = std::max(N.rows(), static_cast<Eigen::Index>(n)) *
               svd.singularValues()(0) * 1e-13;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

}  // namespace

double KktReport::residual() const {
  return std::max({stationarity, primal_equality, primal_inequality, dual, complementarity});
}

KktReport kkt_check(const QuadraticProgram& prob, const Vec& x, const Vec& eq_multipliers,
                    const std::vector<int>& active_set, const Vec& ineq_multipliers, double tol) {
  KktReport rep;
  Vec grad = prob.Q * x + prob.c;
  Vec stat = grad;
  if (prob.A.rows() > 0) stat += prob.A.transpose() * eq_multipliers;
  for (std::size_t i = 0; i < active_set.size(); ++i)
    stat -= prob.G.row(active_set[i]).transpose() * ineq_multipliers(static_cast<int>(i));
  double scale = 1.0 + grad.cwiseAbs().maxCoeff();
  rep.stationarity = stat.cwiseAbs().maxCoeff() / scale;
  if (prob.A.rows() > 0)
    rep.primal_equality =
        (prob.A * x - prob.b).cwiseAbs().maxCoeff() / (1.0 + prob.b.cwiseAbs().maxCoeff());
  if (prob.G.rows() > 0) {
    Vec slack = prob.G * x - prob.h;
    rep.primal_inequality =
        std::max(0.0, -slack.minCoeff()) / (1.0 + prob.h.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < active_set.size(); ++i) {
      rep.dual = std::max(rep.dual, -ineq_multipliers(static_cast<int>(i)) / scale);
      rep.complementarity = std::max(
          rep.complementarity,
          std::abs(ineq_multipliers(static_cast<int>(i)) * slack(active_set[i])) / scale);
    }
  }
  rep.ok = rep.residual() <= tol;
  return rep;
}

QpSolution solve_qp(const QuadraticProgram& prob, const Vec& x0, const QpOptions& options) {
  prob.validate();
  const int n = prob.dimension();
  const int n_eq = static_cast<int>(prob.A.rows());
  const int n_in = static_cast<int>(prob.G.rows());
  const double tol = options.tol;
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * (n + n_eq + n_in);

  if (x0.size() != n) throw input_error("solve_qp: x0 dimension mismatch");
  const double h_scale = n_in > 0 ? 1.0 + prob.h.cwiseAbs().maxCoeff() : 1.0;
  const double feas_tol = 1e-8;
  if (n_eq > 0 &&
      (prob.A * x0 - prob.b).cwiseAbs().maxCoeff() > feas_tol * (1.0 + prob.b.cwiseAbs().maxCoeff()))
    throw numeric_error("solve_qp: x0 violates equality constraints");
  if (n_in > 0 && (prob.G * x0 - prob.h).minCoeff() < -feas_tol * h_scale)
    throw numeric_error("solve_qp: x0 violates inequality constraints");

  Vec x = x0;
  // Active when |Gx - h| <= 1e-10 * (1 + ||h||).
  const double active_tol = 1e-10 * h_scale;
  std::vector<bool> active(n_in, false);
  if (n_in > 0) {
    Vec slack = prob.G * x - prob.h;
    for (int i = 0; i < n_in; ++i) active[i] = slack(i) <= active_tol;
  }

  auto active_rows = [&]() {
    std::vector<int> rows;
    for (int i = 0; i < n_in; ++i)
      if (active[i]) rows.push_back(i);
    return rows;
  };

  int last_dropped = -1;
  int dropped_iter = -2;
  QpSolution sol;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (options.objective_trace)
      options.objective_trace->push_back(0.5 * x.dot(prob.Q * x) + prob.c.dot(x));
    if (options.iterate_trace) options.iterate_trace->push_back(x);
    std::vector<int> act = active_rows();
    Mat N(n_eq + static_cast<int>(act.size()), n);
    if (n_eq > 0) N.topRows(n_eq) = prob.A;
    for (std::size_t i = 0; i < act.size(); ++i) N.row(n_eq + static_cast<int>(i)) = prob.G.row(act[i]);

    Mat Z = null_space(N, n);
    Vec grad = prob.Q * x + prob.c;
    double grad_scale = 1.0 + grad.cwiseAbs().maxCoeff();
    Vec d = Z.cols() > 0 ? Vec(-Z * (Z.transpose() * grad)) : Vec(Vec::Zero(n));

    if (d.norm() <= tol * grad_scale) {
      // Projected stationary point: examine multipliers of active inequalities.
      Vec mu;
      if (N.rows() > 0) {
        // grad + A' nu - G_act' lambda = 0  =>  solve N' m = -grad, lambda = -m_act.
        mu = N.transpose().colPivHouseholderQr().solve(-grad);
      }
      int worst = -1;
      double worst_val = -tol * grad_scale;
      for (std::size_t i = 0; i < act.size(); ++i) {
        double lambda = -mu(n_eq + static_cast<int>(i));
        if (lambda < worst_val) {
          worst_val = lambda;
          worst = act[i];
        }
      }
      if (worst < 0) {
        // Flat optimum (Q singular on the working subspace): pick the
        // minimum-norm stationary point when it stays feasible.
        if (Z.cols() > 0) {
          Mat ZQZ = Z.transpose() * prob.Q * Z;
          Eigen::JacobiSVD<Mat> svd(ZQZ);
          double smax = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
          if (svd.singularValues().minCoeff() <= 1e-12 * (1.0 + smax)) {
            Mat M(Z.cols() + N.rows(), n);
            Vec rhs(Z.cols() + N.rows());
            M.topRows(Z.cols()) = Z.transpose() * prob.Q;
            rhs.head(Z.cols()) = -Z.transpose() * prob.c;
            if (N.rows() > 0) {
              M.bottomRows(N.rows()) = N;
              rhs.tail(N.rows()) = N * x;
            }
            Vec x_mn = M.completeOrthogonalDecomposition().solve(rhs);
            bool ok = (M * x_mn - rhs).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff());
            if (ok && n_in > 0) ok = (prob.G * x_mn - prob.h).minCoeff() >= -feas_tol * h_scale;
            double f_cur = 0.5 * x.dot(prob.Q * x) + prob.c.dot(x);
            double f_mn = 0.5 * x_mn.dot(prob.Q * x_mn) + prob.c.dot(x_mn);
            if (ok && f_mn <= f_cur + 1e-10 * (1.0 + std::abs(f_cur))) x = x_mn;
          }
        }
        sol.x = x;
        sol.active_set = act;
        sol.eq_multipliers = n_eq > 0 ? Vec(mu.head(n_eq)) : Vec();
        sol.ineq_multipliers = Vec::Zero(static_cast<int>(act.size()));
        for (std::size_t i = 0; i < act.size(); ++i)
          sol.ineq_multipliers(static_cast<int>(i)) = -mu(n_eq + static_cast<int>(i));
        sol.iterations = iter;
        sol.kkt_residual = kkt_check(prob, sol.x, sol.eq_multipliers, sol.active_set,
                                     sol.ineq_multipliers, 1e-8)
                               .residual();
        return sol;
      }
      active[worst] = false;
      last_dropped = worst;
      dropped_iter = iter;
      continue;
    }

    // Exact line minimum of the quadratic along d.
    double dQd = d.dot(prob.Q * d);
    double slope = d.dot(grad);  // < 0 by construction
    double t_min = dQd > 1e-14 * d.squaredNorm() * (1.0 + prob.Q.cwiseAbs().maxCoeff())
                       ? -slope / dQd
                       : std::numeric_limits<double>::infinity();

    // Step to the closest inactive boundary.
    double t_bound = std::numeric_limits<double>::infinity();
    int blocking = -1;
    for (int i = 0; i < n_in; ++i) {
      if (active[i]) continue;
      if (i == last_dropped && dropped_iter == iter - 1) continue;  // cycling guard
      double gd = prob.G.row(i).dot(d);
      if (gd >= -1e-14) continue;
      double t = (prob.h(i) - prob.G.row(i).dot(x)) / gd;
      if (t < t_bound) {
        t_bound = t;
        blocking = i;
      }
    }

    double t = std::min(t_min, t_bound);
    if (!std::isfinite(t))
      throw numeric_error("solve_qp: objective unbounded along feasible direction");
    x += t * d;
    if (t_bound <= t_min && blocking >= 0) active[blocking] = true;
  }

  throw numeric_error("solve_qp: iteration limit " + std::to_string(max_iter) +
                      " exceeded (best objective " +
                      std::to_string(0.5 * x.dot(prob.Q * x) + prob.c.dot(x)) + ")");
}

}  // namespace lls
