#include "lls/basis_select.hpp"

#include "fixtures.hpp"
#include "lls/sim.hpp"
#include "lls/subspace.hpp"

#include <Eigen/QR>
#include <doctest.h>

#include <cmath>

using namespace lls;
using lls::testing::pat;
using lls::testing::worked_basis;

TEST_CASE("pure types already in the polyhedron project to themselves") {
  Basis basis = worked_basis();
  PureTypeSpec spec;
  spec.target = basis.vectors.col(0);
  Vec g = project_pure_type(spec, basis);
  CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g(1) == doctest::Approx(0.0).epsilon(1e-9));

  spec.target = 0.5 * basis.vectors.col(0) + 0.5 * basis.vectors.col(1);
  g = project_pure_type(spec, basis);
  CHECK(g(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(g(1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("an outside pure type projects to the grid-oracle point") {
  Basis basis = worked_basis();
  PureTypeSpec spec;
  spec.target = Vec(6);
  spec.target << 0, 1, 1, 0, 1, 0;
  Vec g = project_pure_type(spec, basis);

  // 1e-4 grid over the feasible segment g = (t, 1-t), beta(t) >= 0.
  double best_t = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (double t = 0.0; t <= 1.0 + 1e-12; t += 1e-4) {
    Vec cand(2);
    cand << t, 1 - t;
    if ((basis.vectors * cand).minCoeff() < 0.0) continue;
    double v = (basis.vectors * cand - spec.target).squaredNorm();
    if (v < best_val) {
      best_val = v;
      best_t = t;
    }
  }
  CHECK(g(0) == doctest::Approx(best_t).epsilon(2e-4));
  CHECK(std::abs(g.sum() - 1.0) <= 1e-12);
  CHECK((basis.vectors * g).minCoeff() >= -1e-8);
}

TEST_CASE("hand-built pure types with bad sums are rejected") {
  Basis basis = worked_basis();
  PureTypeSpec spec;
  spec.target = Vec::Constant(6, 0.4);
  CHECK_THROWS_WITH_AS(project_pure_type(spec, basis), doctest::Contains("sums"), input_error);
  spec.target = Vec(6);
  spec.target << 1.2, -0.2, 1, 0, 1, 0;
  CHECK_THROWS_AS(project_pure_type(spec, basis), input_error);
}

TEST_CASE("cluster means recover point-mass bases up to permutation") {
  Basis basis = worked_basis();
  MixingEstimate est;
  est.basis = basis;
  for (int rep = 0; rep < 6; ++rep) {
    ScoredPattern sp;
    sp.pattern = pat({1, 1, 1});
    sp.weight = 1.0 / 6;
    sp.g = Vec::Zero(2);
    sp.g(rep % 2) = 1.0;
    est.support.push_back(sp);
  }
  Basis mean2 = cluster_mean_basis(est, basis, 2, 5);
  double direct = (mean2.vectors - basis.vectors).cwiseAbs().maxCoeff();
  Mat swapped(6, 2);
  swapped.col(0) = basis.vectors.col(1);
  swapped.col(1) = basis.vectors.col(0);
  double crossed = (mean2.vectors - swapped).cwiseAbs().maxCoeff();
  CHECK(std::min(direct, crossed) <= 1e-12);

  // K = 1 collapses to the weighted mean of fitted probabilities.
  Basis mean1 = cluster_mean_basis(est, basis, 1, 5);
  Vec expect = Vec::Zero(6);
  for (const auto& s : est.support) expect += s.weight * basis.beta(s.g);
  CHECK((mean1.vectors.col(0) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("five-point cluster means stay inside the generating plane") {
  Basis truth = make_block_basis(3, 12);
  ScoreSample sample = sample_scores(ScoreDesign::five_point, 600, 3, 2);
  Dataset data = simulate_responses(truth, sample.scores, 2);
  MixingEstimate est = estimate_all_scores(data, truth, {.min_row_eligible = 1});
  Basis means = cluster_mean_basis(est, truth, 3, 7);

  // Every new vector is a combination of the generating basis.
  Eigen::ColPivHouseholderQR<Mat> qr(truth.vectors);
  for (int k = 0; k < 3; ++k) {
    Vec v = means.vectors.col(k);
    Vec coef = qr.solve(v);
    CHECK((truth.vectors * coef - v).norm() <= 1e-6);
  }
}

TEST_CASE("rebase identities") {
  Basis basis = worked_basis();
  Vec g(2);
  g << 0.3, 0.7;
  CHECK((rebase(g, basis, basis) - g).cwiseAbs().maxCoeff() <= 1e-12);

  Basis permuted = basis;
  permuted.vectors.col(0).swap(permuted.vectors.col(1));
  Vec gp = rebase(g, basis, permuted);
  CHECK(gp(0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(gp(1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("rebase keeps beta invariant under stochastic recombination") {
  Rng rng(64);
  Basis basis = worked_basis();
  // Random invertible stochastic recombination of the basis.
  Mat T(2, 2);
  T << 0.8, 0.3, 0.2, 0.7;  // columns sum to one
  Basis recombined;
  recombined.design = basis.design;
  recombined.vectors = basis.vectors * T;
  for (int trial = 0; trial < 20; ++trial) {
    Vec g = lls::testing::random_simplex_point(2, rng);
    Vec gp = rebase(g, basis, recombined);
    CHECK(std::abs(gp.sum() - 1.0) <= 1e-12);
    CHECK((recombined.vectors * gp - basis.vectors * g).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("rebase refuses bases with different spans") {
  Basis basis = worked_basis();
  Basis other = basis;
  other.vectors(0, 1) = 0.9;
  other.vectors(1, 1) = 0.1;
  Vec g(2);
  g << 0.5, 0.5;
  CHECK_THROWS_WITH_AS(rebase(g, basis, other), doctest::Contains("distance"), numeric_error);
}

TEST_CASE("model probabilities are invariant under rebasing all scores") {
  MixingModel model = lls::testing::example1();
  ScoreSample sample = sample_scores(ScoreDesign::two_interval, 300, 2, 1);
  Dataset data = simulate_responses(model.basis, sample.scores, 31);
  MixingEstimate est = estimate_all_scores(data, model.basis, {.min_row_eligible = 1});

  Mat T(2, 2);
  T << 0.6, 0.25, 0.4, 0.75;
  Basis recombined;
  recombined.design = model.basis.design;
  recombined.vectors = model.basis.vectors * T;

  MixingEstimate rebased = est;
  rebased.basis = recombined;
  for (auto& s : rebased.support)
    if (!s.failed) s.g = rebase(s.g, model.basis, recombined);

  for (auto& entries : {std::vector<int>{1, 0, 0}, {1, 2, 0}, {2, 2, 2}, {0, 1, 1}}) {
    ResponsePattern ell = pat(entries);
    CHECK(model_probability(est, ell) ==
          doctest::Approx(model_probability(rebased, ell)).epsilon(1e-9));
  }
}
