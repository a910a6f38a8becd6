#pragma once

#include "lls/common.hpp"
#include "lls/moments.hpp"

#include <optional>
#include <vector>

namespace lls {

/// Block isometry that drops one coordinate per question (Eqs. 16-17 style):
/// forward  y_{j,l-1} = x_{jl} - (sqrt(L_j)-1)/(L_j-1) * x_{j1},  l = 2..L_j
/// inverse  x_{j1} = (c - sum_l y_{j,l-1}) / sqrt(L_j), rest by the forward
/// formula; the inverse restores per-question sums of c (1 by default).
class RotationMap {
 public:
  explicit RotationMap(SurveyDesign design);

  const SurveyDesign& design() const { return design_; }
  int reduced_size() const { return reduced_; }

  /// Requires per-question sums equal (within 1e-8) to a common value.
  Vec rotate(const Vec& point) const;
  /// Restores per-question sums of `block_sum` exactly.
  Vec unrotate(const Vec& reduced, double block_sum = 1.0) const;

 private:
  SurveyDesign design_;
  std::vector<double> coeff_;  // (sqrt(L_j)-1)/(L_j-1)
  int reduced_ = 0;
};

/// Least-squares affine plane through a point cloud: center of gravity plus
/// the top eigenvectors of the scatter matrix.
struct PlaneFit {
  Vec center;
  Mat directions;  // reduced_size x (K-1), orthonormal columns
  Vec eigenvalues;
  double residual = 0.0;  // tr X - sum of kept eigenvalues
  bool padded = false;    // fewer informative directions than requested
};

/// Fits a (K-1)-dimensional affine plane to the columns (equally weighted).
PlaneFit fit_plane(const Mat& columns, int K, Warnings* warnings = nullptr);

/// Computational rank: SVD of the largest question-mark-free block
/// off-diagonal minor (rows from the first half of the questions, columns
/// from the second half); K = number of singular values exceeding
/// multiplier * sqrt(sum of squared cell half-widths).
struct RankEstimate {
  int K = 0;
  Vec singular_values;
  double threshold = 0.0;
};

RankEstimate estimate_rank(const FrequencyMatrix& fm, const StdErrMatrix& se,
                           double multiplier = 2.0);

/// Rank decision from externally supplied singular values and threshold.
int rank_from_singular_values(const Vec& singular_values, double threshold);

enum class CompletionInit { product, identity };

struct CompletionReport {
  int qp_fallbacks = 0;  // blocks finished by the clipped least-squares fallback
};

/// Fills the same-question blocks from the low-rank structure: per question,
/// expansion coefficients of the (column-normalized) known cells over the
/// basis solve a QP with sum-to-one, raw-cell symmetry, and nonnegativity
/// side conditions; the block is then rebuilt from the coefficients.
FrequencyMatrix complete_matrix(const FrequencyMatrix& fm, const Basis& basis,
                                Warnings* warnings = nullptr, CompletionReport* report = nullptr);

/// Initial completion with no basis: product rule B = f_l f_l' or the
/// identity block (both consistent with the first-order sums).
FrequencyMatrix complete_matrix_initial(const FrequencyMatrix& fm, CompletionInit init);

struct SubspaceOptions {
  int n_iter = 5;
  double tol = 1e-6;
  CompletionInit init = CompletionInit::product;
};

struct SubspaceFit {
  Basis basis;
  /// Subspace distance between consecutive iterates.
  std::vector<double> step_distances;
  int iterations = 0;
  CompletionReport completion;
};

/// Iterative completion / rotation / plane-fit / unrotation loop producing a
/// basis of the supporting plane with exact per-question sums of one.
SubspaceFit find_subspace(const FrequencyMatrix& fm, int K, const SubspaceOptions& options = {},
                          Warnings* warnings = nullptr);

/// sin of the largest principal angle: sqrt(1 - sigma_min^2) of P1' P2 where
/// P1, P2 are orthonormal frames of the two spans. Bases of unequal dimension
/// compare through the smaller dimension's principal angles.
double subspace_distance(const Basis& a, const Basis& b);
double subspace_distance(const Mat& span_a, const Mat& span_b);

}  // namespace lls
