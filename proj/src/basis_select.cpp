#include "lls/basis_select.hpp"

#include "lls/cluster.hpp"
#include "lls/qp.hpp"
#include "lls/subspace.hpp"

#include <Eigen/QR>

#include <cmath>

namespace lls {

void PureTypeSpec::validate(const SurveyDesign& design) const {
  if (target.size() != design.total_cells())
    throw input_error("pure type: expected " + std::to_string(design.total_cells()) +
                      " entries, got " + std::to_string(target.size()));
  if (target.minCoeff() < -1e-12 || target.maxCoeff() > 1.0 + 1e-12)
    throw input_error("pure type: entries must lie in [0,1]");
  for (int j = 0; j < design.question_count(); ++j) {
    double s = target.segment(design.cell_offset(j), design.levels[j]).sum();
    if (std::abs(s - 1.0) > 1e-9)
      throw input_error("pure type: question " + std::to_string(j + 1) + " sums to " +
                        std::to_string(s) + ", expected 1");
  }
}

Vec project_pure_type(const PureTypeSpec& spec, const Basis& basis) {
  spec.validate(basis.design);
  const int K = basis.dimension();

  QuadraticProgram prob = QuadraticProgram::from_residual(basis.vectors, spec.target);
  prob.A = Mat::Ones(1, K);
  prob.b = Vec::Ones(1);
  prob.G = basis.vectors;
  prob.h = Vec::Zero(basis.vectors.rows());

  Vec g0 = Vec::Constant(K, 1.0 / K);
  if ((basis.vectors * g0).minCoeff() < -1e-8) {
    // Uniform start outside the polyhedron: try the vertices.
    bool found = false;
    for (int k = 0; k < K && !found; ++k) {
      Vec e = Vec::Unit(K, k);
      if ((basis.vectors * e).minCoeff() >= -1e-8) {
        g0 = e;
        found = true;
      }
    }
    if (!found) throw numeric_error("project_pure_type: no feasible starting point");
  }
  QpOptions opts;
  opts.max_iter = 400 * (K + 1 + static_cast<int>(basis.vectors.rows()));
  QpSolution sol = solve_qp(prob, g0, opts);
  return sol.x;
}

Basis pure_type_basis(const std::vector<PureTypeSpec>& specs, const Basis& basis) {
  if (specs.empty()) throw input_error("pure_type_basis: no pure types given");
  Basis out;
  out.design = basis.design;
  out.vectors = Mat(basis.vectors.rows(), specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i)
    out.vectors.col(static_cast<int>(i)) = basis.beta(project_pure_type(specs[i], basis));
  out.validate();
  return out;
}

Basis cluster_mean_basis(const MixingEstimate& estimate, const Basis& basis, int k,
                         std::uint64_t seed) {
  std::vector<int> keep;
  for (std::size_t i = 0; i < estimate.support.size(); ++i)
    if (!estimate.support[i].failed) keep.push_back(static_cast<int>(i));
  if (static_cast<int>(keep.size()) < k)
    throw input_error("cluster_mean_basis: fewer scored patterns than clusters");

  Mat points(basis.dimension(), keep.size());
  std::vector<double> weights(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    points.col(static_cast<int>(i)) = estimate.support[keep[i]].g;
    weights[i] = estimate.support[keep[i]].weight;
  }
  ClusterResult clusters = kmeans(points, weights, k, seed);

  Mat vectors = Mat::Zero(basis.vectors.rows(), k);
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    int c = clusters.assignments[i];
    vectors.col(c) += weights[i] * basis.beta(points.col(static_cast<int>(i)));
    mass[c] += weights[i];
  }
  for (int c = 0; c < k; ++c) {
    if (mass[c] <= 0.0)
      throw numeric_error("cluster_mean_basis: cluster " + std::to_string(c + 1) +
                          " is empty; request fewer clusters");
    vectors.col(c) /= mass[c];
  }
  Basis out;
  out.design = basis.design;
  out.vectors = vectors;
  out.validate();
  return out;
}

Vec rebase(const Vec& g, const Basis& old_basis, const Basis& new_basis, double max_distance) {
  if (old_basis.vectors.rows() != new_basis.vectors.rows())
    throw input_error("rebase: bases live in different spaces");
  double d = subspace_distance(old_basis, new_basis);
  if (d > max_distance)
    throw numeric_error("rebase: subspaces differ (distance " + std::to_string(d) + " > " +
                        std::to_string(max_distance) + ")");

  const int K = new_basis.dimension();
  Vec beta = old_basis.beta(g);
  // Solve stacked [vectors; 1'] g' = [beta; 1] in least squares; exact when
  // the spans coincide.
  Mat M(new_basis.vectors.rows() + 1, K);
  M.topRows(new_basis.vectors.rows()) = new_basis.vectors;
  M.bottomRows(1).setOnes();
  Vec rhs(new_basis.vectors.rows() + 1);
  rhs.head(new_basis.vectors.rows()) = beta;
  rhs(new_basis.vectors.rows()) = 1.0;
  Vec gp = M.colPivHouseholderQr().solve(rhs);
  // Renormalize the sum exactly.
  gp.array() -= (gp.sum() - 1.0) / K;
  return gp;
}

}  // namespace lls
