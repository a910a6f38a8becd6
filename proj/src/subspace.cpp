#include "lls/subspace.hpp"

#include "lls/qp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lls {

RotationMap::RotationMap(SurveyDesign design) : design_(std::move(design)) {
  design_.validate();
  coeff_.reserve(design_.levels.size());
  for (int l : design_.levels) {
    coeff_.push_back((std::sqrt(static_cast<double>(l)) - 1.0) / (l - 1.0));
    reduced_ += l - 1;
  }
}

Vec RotationMap::rotate(const Vec& point) const {
  const int J = design_.question_count();
  if (point.size() != design_.total_cells())
    throw input_error("rotate: point dimension mismatch");
  double sum0 = point.segment(0, design_.levels[0]).sum();
  Vec out(reduced_);
  int in = 0, at = 0;
  for (int j = 0; j < J; ++j) {
    const int L = design_.levels[j];
    double s = point.segment(in, L).sum();
    if (std::abs(s - sum0) > 1e-8)
      throw numeric_error("rotate: per-question sums differ (question " + std::to_string(j + 1) +
                          ": " + std::to_string(s) + " vs " + std::to_string(sum0) + ")");
    for (int l = 1; l < L; ++l) out(at + l - 1) = point(in + l) - coeff_[j] * point(in);
    in += L;
    at += L - 1;
  }
  return out;
}

Vec RotationMap::unrotate(const Vec& reduced, double block_sum) const {
  if (reduced.size() != reduced_) throw input_error("unrotate: dimension mismatch");
  const int J = design_.question_count();
  Vec out(design_.total_cells());
  int in = 0, at = 0;
  for (int j = 0; j < J; ++j) {
    const int L = design_.levels[j];
    double tail = reduced.segment(at, L - 1).sum();
    double first = (block_sum - tail) / std::sqrt(static_cast<double>(L));
    out(in) = first;
    for (int l = 1; l < L; ++l) out(in + l) = reduced(at + l - 1) + coeff_[j] * first;
    in += L;
    at += L - 1;
  }
  return out;
}

PlaneFit fit_plane(const Mat& columns, int K, Warnings* warnings) {
  const int m = static_cast<int>(columns.rows());
  const int n = static_cast<int>(columns.cols());
  if (K < 1) throw input_error("fit_plane: K must be >= 1");
  if (n < K) throw input_error("fit_plane: need at least K columns");

  PlaneFit fit;
  fit.center = columns.rowwise().mean();
  Mat centered = columns.colwise() - fit.center;
  Mat scatter = centered * centered.transpose();

  Eigen::SelfAdjointEigenSolver<Mat> eig(scatter);
  // Eigen returns ascending order; flip to gamma_1 >= gamma_2 >= ...
  fit.eigenvalues = eig.eigenvalues().reverse();
  Mat vectors = eig.eigenvectors().rowwise().reverse();

  const int want = K - 1;
  fit.directions = Mat(m, want);
  int informative = 0;
  for (int k = 0; k < want; ++k) {
    if (k < m && fit.eigenvalues(k) > 0.0) {
      fit.directions.col(k) = vectors.col(k);
      ++informative;
    }
  }
  if (informative < want) {
    // Pad with the remaining (orthonormal) eigenvectors of the scatter.
    fit.padded = true;
    if (warnings)
      warnings->add("fit_plane: only " + std::to_string(informative) + " of " +
                    std::to_string(want) + " directions are informative; plane padded");
    for (int k = informative; k < want; ++k)
      fit.directions.col(k) = k < m ? Vec(vectors.col(k)) : Vec(Vec::Unit(m, k % m));
  }
  double kept = 0.0;
  for (int k = 0; k < std::min(want, m); ++k) kept += fit.eigenvalues(k);
  fit.residual = scatter.trace() - kept;
  return fit;
}

int rank_from_singular_values(const Vec& singular_values, double threshold) {
  double floor = singular_values.size() > 0 ? 1e-9 * singular_values(0) : 0.0;
  int k = 0;
  for (int i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > std::max(threshold, floor)) ++k;
  return k;
}

RankEstimate estimate_rank(const FrequencyMatrix& fm, const StdErrMatrix& se, double multiplier) {
  const SurveyDesign& design = fm.design;
  const int J = design.question_count();
  if (J < 2) throw input_error("estimate_rank: no complete minor of size >= 2 (need J >= 2)");

  // Interleaved half split: contiguous halves can be rank-deficient for
  // block-structured designs even when the full matrix has rank K.
  std::vector<int> row_cells, col_cells;
  for (int j = 0; j < J; ++j)
    for (int l = 0; l < design.levels[j]; ++l)
      (j % 2 == 0 ? row_cells : col_cells).push_back(design.cell_offset(j) + l);

  Mat minor(row_cells.size(), col_cells.size());
  Mat err(row_cells.size(), col_cells.size());
  for (std::size_t r = 0; r < row_cells.size(); ++r)
    for (std::size_t c = 0; c < col_cells.size(); ++c) {
      if (!fm.completed && !fm.is_estimable(row_cells[r], col_cells[c]))
        throw numeric_error("estimate_rank: minor contains an inestimable cell");
      minor(r, c) = fm.second_order(row_cells[r], col_cells[c]);
      double hw = se.second_order(row_cells[r], col_cells[c]);
      err(r, c) = std::isfinite(hw) ? hw : 0.0;
    }

  RankEstimate est;
  Eigen::JacobiSVD<Mat> svd(minor);
  est.singular_values = svd.singularValues();
  est.threshold = multiplier * std::sqrt(err.squaredNorm());
  est.K = rank_from_singular_values(est.singular_values, est.threshold);
  return est;
}

FrequencyMatrix complete_matrix_initial(const FrequencyMatrix& fm, CompletionInit init) {
  FrequencyMatrix out = fm;
  const SurveyDesign& design = fm.design;
  for (int j = 0; j < design.question_count(); ++j) {
    const int off = design.cell_offset(j);
    const int L = design.levels[j];
    for (int a = 0; a < L; ++a)
      for (int b = 0; b < L; ++b)
        out.second_order(off + a, off + b) =
            init == CompletionInit::product
                ? fm.first_order(off + a) * fm.first_order(off + b)
                : (a == b ? fm.first_order(off + a) : 0.0);
  }
  out.completed = true;
  return out;
}

namespace {

// Joint completion QP for one question: unknowns C (K coefficients per
// outcome) fitting the normalized off-block cells, with sum-to-one rows,
// raw-cell symmetry, and nonnegative completed cells.
struct BlockProblem {
  Mat design_stack;    // rows of lambda outside question jbar
  Mat targets;         // normalized column cells, same row order, one col per outcome
  Mat block;           // lambda rows of question jbar: L x K
  Vec first_order;     // f_{jbar,l}
};

// Returns the coefficient matrix C (K x L) or nullopt when the QP fails.
std::optional<Mat> solve_block(const BlockProblem& bp, int* fallback_flag) {
  const int K = static_cast<int>(bp.design_stack.cols());
  const int L = static_cast<int>(bp.block.rows());
  const int n = K * L;

  // Residual form over all outcomes jointly; variables ordered [C^1; ...; C^L].
  Mat R = Mat::Zero(bp.design_stack.rows() * L, n);
  Vec r(bp.design_stack.rows() * L);
  for (int l = 0; l < L; ++l) {
    R.block(l * bp.design_stack.rows(), l * K, bp.design_stack.rows(), K) = bp.design_stack;
    r.segment(l * bp.design_stack.rows(), bp.design_stack.rows()) = bp.targets.col(l);
  }
  QuadraticProgram prob = QuadraticProgram::from_residual(R, r);

  // Equalities: sum_k C^l_k = 1 per outcome, and raw symmetry
  // (sum_k C^l_k lambda_{l'}) f_l = (sum_k C^l'_k lambda_l) f_l'.
  const int n_sym = L * (L - 1) / 2;
  Mat A = Mat::Zero(L + n_sym, n);
  Vec b = Vec::Zero(L + n_sym);
  for (int l = 0; l < L; ++l) {
    A.block(l, l * K, 1, K).setOnes();
    b(l) = 1.0;
  }
  int row = L;
  for (int l = 0; l < L; ++l)
    for (int lp = l + 1; lp < L; ++lp, ++row) {
      A.block(row, l * K, 1, K) = bp.first_order(l) * bp.block.row(lp);
      A.block(row, lp * K, 1, K) -= bp.first_order(lp) * bp.block.row(l);
    }
  prob.A = A;
  prob.b = b;

  // Nonnegative completed cells: sum_k C^l_k lambda_{l'} >= 0 for all (l, l').
  Mat G = Mat::Zero(L * L, n);
  for (int l = 0; l < L; ++l)
    for (int lp = 0; lp < L; ++lp) G.block(l * L + lp, l * K, 1, K) = bp.block.row(lp);
  prob.G = G;
  prob.h = Vec::Zero(L * L);

  // Equality-constrained least squares first; most blocks need nothing more.
  Mat kkt = Mat::Zero(n + A.rows(), n + A.rows());
  kkt.topLeftCorner(n, n) = prob.Q;
  kkt.topRightCorner(n, A.rows()) = A.transpose();
  kkt.bottomLeftCorner(A.rows(), n) = A;
  Vec rhs(n + A.rows());
  rhs.head(n) = -prob.c;
  rhs.tail(A.rows()) = b;
  Vec eq_sol = kkt.completeOrthogonalDecomposition().solve(rhs).head(n);
  if ((A * eq_sol - b).cwiseAbs().maxCoeff() < 1e-8 && (G * eq_sol).minCoeff() >= -1e-8) {
    Mat C(K, L);
    for (int l = 0; l < L; ++l) C.col(l) = eq_sol.segment(l * K, K);
    return C;
  }

  try {
    // Phase 1: shrink a uniform slack on the nonnegativity constraints to
    // reach the feasible set from the equality-constrained solution.
    QuadraticProgram phase1;
    phase1.Q = Mat::Zero(n + 1, n + 1);
    phase1.Q(n, n) = 2.0;
    phase1.c = Vec::Zero(n + 1);
    phase1.A = Mat::Zero(A.rows(), n + 1);
    phase1.A.leftCols(n) = A;
    phase1.b = b;
    phase1.G = Mat::Zero(G.rows() + 1, n + 1);
    phase1.G.topLeftCorner(G.rows(), n) = G;
    phase1.G.col(n).setOnes();
    phase1.G(G.rows(), n) = 1.0;
    phase1.h = Vec::Zero(G.rows() + 1);

    Vec start(n + 1);
    start.head(n) = eq_sol;
    start(n) = std::max(0.0, -(G * eq_sol).minCoeff()) + 1e-10;
    QpOptions opts;
    opts.max_iter = 200 * (n + 1 + static_cast<int>(A.rows() + G.rows()));
    QpSolution feasible = solve_qp(phase1, start, opts);
    if (feasible.x(n) > 5e-9) throw numeric_error("no feasible completion");

    // Phase 2: the actual fit from the feasible interior point.
    Vec x0 = feasible.x.head(n);
    QpSolution sol = solve_qp(prob, x0, opts);
    if (sol.kkt_residual <= 1e-8) {
      Mat C(K, L);
      for (int l = 0; l < L; ++l) C.col(l) = sol.x.segment(l * K, K);
      return C;
    }
  } catch (const numeric_error&) {
    // fall through to the clipped fallback
  }
  if (fallback_flag) *fallback_flag = 1;
  return std::nullopt;
}

}  // namespace

FrequencyMatrix complete_matrix(const FrequencyMatrix& fm, const Basis& basis, Warnings* warnings,
                                CompletionReport* report) {
  const SurveyDesign& design = fm.design;
  if (!(basis.design == design)) throw input_error("complete_matrix: basis/matrix design mismatch");
  const int J = design.question_count();
  const int total = design.total_cells();
  const int K = basis.dimension();

  FrequencyMatrix out = fm;
  out.completed = true;
  Mat coeffs = Mat::Zero(K, total);  // expansion coefficients per column

  for (int jbar = 0; jbar < J; ++jbar) {
    const int off = design.cell_offset(jbar);
    const int L = design.levels[jbar];

    // Rows outside jbar with estimable cells in every column of the block.
    std::vector<int> rows;
    rows.reserve(total - L);
    for (int r = 0; r < total; ++r) {
      if (r >= off && r < off + L) continue;
      bool ok = true;
      for (int l = 0; l < L && ok; ++l)
        ok = fm.completed || fm.is_estimable(r, off + l);
      if (ok) rows.push_back(r);
    }
    if (static_cast<int>(rows.size()) < K)
      throw numeric_error("complete_matrix: question " + std::to_string(jbar + 1) +
                          " has fewer estimable rows than K");

    BlockProblem bp;
    bp.design_stack = Mat(rows.size(), K);
    bp.targets = Mat(rows.size(), L);
    bp.block = basis.vectors.middleRows(off, L);
    bp.first_order = fm.first_order.segment(off, L);
    for (std::size_t i = 0; i < rows.size(); ++i) bp.design_stack.row(i) = basis.vectors.row(rows[i]);
    for (int l = 0; l < L; ++l) {
      double norm = fm.first_order(off + l);
      if (norm <= 0.0) {
        // Unobserved outcome: no information in its column.
        bp.targets.col(l).setZero();
        continue;
      }
      for (std::size_t i = 0; i < rows.size(); ++i)
        bp.targets(i, l) = fm.second_order(rows[i], off + l) / norm;
    }

    int fell_back = 0;
    std::optional<Mat> C = solve_block(bp, &fell_back);
    Mat block_values(L, L);  // (l', l) = raw completed cell
    if (C) {
      for (int l = 0; l < L; ++l)
        block_values.col(l) = (bp.block * C->col(l)) * bp.first_order(l);
      coeffs.middleCols(off, L) = *C;
    } else {
      // Unconstrained least squares with symmetrization and clipping; column
      // sums are then rescaled to keep the first-order condition.
      Mat ls = bp.design_stack.colPivHouseholderQr().solve(bp.targets);  // K x L coefficients
      for (int l = 0; l < L; ++l) block_values.col(l) = (bp.block * ls.col(l)) * bp.first_order(l);
      block_values = 0.5 * (block_values + block_values.transpose()).eval();
      block_values = block_values.cwiseMax(0.0);
      for (int l = 0; l < L; ++l) {
        double sum = block_values.col(l).sum();
        if (sum > 0.0 && bp.first_order(l) > 0.0)
          block_values.col(l) *= bp.first_order(l) / sum;
        else
          block_values.col(l) = bp.first_order * bp.first_order(l);  // product rule
      }
      coeffs.middleCols(off, L) = ls;
      if (warnings)
        warnings->add("completion fell back to clipped least squares on question " +
                      std::to_string(jbar + 1));
      if (report) report->qp_fallbacks += fell_back;
    }
    out.second_order.block(off, off, L, L) = block_values;
  }

  // Cross-question cells without co-observation (possible under heavy
  // missingness) also follow from the expansions.
  if (!fm.completed) {
    for (int r = 0; r < total; ++r)
      for (int c = 0; c < total; ++c)
        if (!fm.is_estimable(r, c) && !std::isfinite(out.second_order(r, c)))
          out.second_order(r, c) =
              0.5 * (basis.vectors.row(r).dot(coeffs.col(c)) * fm.first_order(c) +
                     basis.vectors.row(c).dot(coeffs.col(r)) * fm.first_order(r));
  }
  return out;
}

namespace {

// Column set for the plane fit: the first-order column plus every
// second-order column, normalized so every question block sums to one
// (conditional probabilities; inexact completions and missing data leave
// small per-block drifts that the rotation would otherwise reject).
Mat normalized_columns(const FrequencyMatrix& fm) {
  const SurveyDesign& design = fm.design;
  const int total = design.total_cells();
  std::vector<int> keep;
  for (int c = 0; c < total; ++c)
    if (fm.first_order(c) > 0.0) keep.push_back(c);
  Mat cols(total, 1 + keep.size());
  cols.col(0) = fm.first_order;
  for (std::size_t i = 0; i < keep.size(); ++i)
    cols.col(1 + static_cast<int>(i)) = fm.second_order.col(keep[i]) / fm.first_order(keep[i]);
  for (int c = 0; c < cols.cols(); ++c)
    for (int j = 0; j < design.question_count(); ++j) {
      auto block = cols.col(c).segment(design.cell_offset(j), design.levels[j]);
      double sum = block.sum();
      if (sum > 1e-12) block /= sum;
    }
  return cols;
}

Mat orthonormal_frame(const Mat& span) {
  Eigen::HouseholderQR<Mat> qr(span);
  Mat Q = qr.householderQ() * Mat::Identity(span.rows(), span.cols());
  return Q;
}

}  // namespace

SubspaceFit find_subspace(const FrequencyMatrix& fm, int K, const SubspaceOptions& options,
                          Warnings* warnings) {
  if (K < 1) throw input_error("find_subspace: K must be >= 1");
  const SurveyDesign& design = fm.design;
  RotationMap rotation(design);

  FrequencyMatrix work = fm.completed ? fm : complete_matrix_initial(fm, options.init);

  SubspaceFit result;
  std::optional<Basis> previous;
  for (int it = 0; it < options.n_iter; ++it) {
    Mat cols = normalized_columns(work);
    Mat rotated(rotation.reduced_size(), cols.cols());
    for (int c = 0; c < cols.cols(); ++c) rotated.col(c) = rotation.rotate(cols.col(c));

    PlaneFit plane = fit_plane(rotated, K, warnings);
    Basis basis;
    basis.design = design;
    basis.vectors = Mat(design.total_cells(), K);
    basis.vectors.col(0) = rotation.unrotate(plane.center);
    for (int k = 1; k < K; ++k)
      basis.vectors.col(k) = rotation.unrotate(plane.center + plane.directions.col(k - 1));

    Eigen::JacobiSVD<Mat> svd(basis.vectors);
    if (svd.singularValues()(K - 1) <= 1e-9)
      throw numeric_error("find_subspace: rank collapse at iteration " + std::to_string(it + 1) +
                          " (sigma_min = " + std::to_string(svd.singularValues()(K - 1)) + ")");

    result.iterations = it + 1;
    if (previous) {
      double d = subspace_distance(*previous, basis);
      result.step_distances.push_back(d);
      if (d < options.tol) {
        result.basis = basis;
        return result;
      }
    }
    previous = basis;
    if (it + 1 < options.n_iter) work = complete_matrix(fm, basis, warnings, &result.completion);
  }
  result.basis = *previous;
  return result;
}

double subspace_distance(const Mat& span_a, const Mat& span_b) {
  if (span_a.rows() != span_b.rows())
    throw input_error("subspace_distance: ambient dimensions differ");
  Mat P1 = orthonormal_frame(span_a);
  Mat P2 = orthonormal_frame(span_b);
  Eigen::JacobiSVD<Mat> svd(P1.transpose() * P2);
  int k = static_cast<int>(std::min(span_a.cols(), span_b.cols()));
  double sigma = svd.singularValues()(k - 1);
  sigma = std::clamp(sigma, 0.0, 1.0);
  return std::sqrt(std::max(0.0, 1.0 - sigma * sigma));
}

double subspace_distance(const Basis& a, const Basis& b) {
  return subspace_distance(a.vectors, b.vectors);
}

}  // namespace lls
