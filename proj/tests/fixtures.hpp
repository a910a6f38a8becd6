#pragma once

#include "lls/moments.hpp"
#include "lls/sim.hpp"

#include <vector>

namespace lls::testing {

inline ResponsePattern pat(std::vector<int> entries) { return ResponsePattern(std::move(entries)); }

/// K=2, three dichotomous questions, lambda^1 = (1,0;1,0;1,0),
/// lambda^2 = (1/2,1/2;0,1;0,1).
inline Basis worked_basis() {
  Basis basis;
  basis.design.levels = {2, 2, 2};
  basis.vectors = Mat(6, 2);
  basis.vectors.col(0) << 1, 0, 1, 0, 1, 0;
  basis.vectors.col(1) << 0.5, 0.5, 0, 1, 0, 1;
  return basis;
}

/// Worked example 1: mixing uniform over the segment between the basis points.
inline MixingModel example1() {
  MixingModel model;
  model.basis = worked_basis();
  MixingModel::Segment seg;
  seg.a = Vec(2);
  seg.a << 1, 0;
  seg.b = Vec(2);
  seg.b << 0, 1;
  model.support = seg;
  return model;
}

/// Worked example 2: mixing concentrated at g1 = 0.1 and g1 = 0.4, weights 1/2.
inline MixingModel example2() {
  MixingModel model;
  model.basis = worked_basis();
  MixingModel::Discrete d;
  d.weights = {0.5, 0.5};
  Vec p1(2), p2(2);
  p1 << 0.1, 0.9;
  p2 << 0.4, 0.6;
  d.points = {p1, p2};
  model.support = d;
  return model;
}

/// Random nonnegative basis: per-question rows drawn uniformly, normalized.
inline Basis random_basis(int K, const std::vector<int>& levels, Rng& rng) {
  Basis basis;
  basis.design.levels = levels;
  const int total = basis.design.total_cells();
  basis.vectors = Mat(total, K);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < basis.design.question_count(); ++j) {
      double sum = 0.0;
      int off = basis.design.cell_offset(j);
      for (int l = 0; l < levels[j]; ++l) {
        basis.vectors(off + l, k) = 0.05 + rng.uniform();
        sum += basis.vectors(off + l, k);
      }
      for (int l = 0; l < levels[j]; ++l) basis.vectors(off + l, k) /= sum;
    }
  }
  return basis;
}

/// Random interior point of the unit simplex.
inline Vec random_simplex_point(int K, Rng& rng) {
  Vec g(K);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    g(k) = 0.05 + rng.uniform();
    sum += g(k);
  }
  return g / sum;
}

/// Random discrete mixing model with nonnegative basis and simplex support.
inline MixingModel random_model(int K, const std::vector<int>& levels, int support_points,
                                Rng& rng) {
  MixingModel model;
  model.basis = random_basis(K, levels, rng);
  MixingModel::Discrete d;
  double total = 0.0;
  for (int m = 0; m < support_points; ++m) {
    d.points.push_back(random_simplex_point(K, rng));
    d.weights.push_back(0.1 + rng.uniform());
    total += d.weights.back();
  }
  for (auto& w : d.weights) w /= total;
  model.support = d;
  return model;
}

}  // namespace lls::testing
