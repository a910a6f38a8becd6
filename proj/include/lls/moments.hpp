#pragma once

#include "lls/common.hpp"
#include "lls/dataset.hpp"

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace lls {

/// Basis of the supporting plane: K vectors in R^|L| stored as the columns of
/// an |L| x K matrix. Every vector sums to one within each question block.
struct Basis {
  SurveyDesign design;
  Mat vectors;  // |L| x K

  int dimension() const { return static_cast<int>(vectors.cols()); }
  /// True when all entries are >= -1e-12 (a pure-type basis).
  bool nonnegative() const;

  /// Mixed probability vector beta = sum_k g_k lambda^k.
  Vec beta(const Vec& g) const { return vectors * g; }
  double beta_cell(const Vec& g, int j, int l) const {
    return vectors.row(design.cell_index(j, l)).dot(g);
  }

  /// Enforces the invariants: per-question sums of one (1e-12), linear
  /// independence (smallest singular value of the stack > 1e-9).
  void validate() const;
};

/// Order-0/1/2 moment estimates with the estimability mask. Rows and columns
/// of the second-order grid are flat (j,l) cells; same-question blocks are the
/// inestimable "question mark" cells until a completion fills them.
struct FrequencyMatrix {
  SurveyDesign design;
  Vec first_order;              // |L|
  Mat second_order;             // |L| x |L|
  std::vector<bool> estimable;  // |L|*|L|, row-major; false on same-question blocks
  /// Per-question count of records answering j (Wilson n for first-order cells).
  std::vector<std::int64_t> first_avail;
  /// Per-question-pair count of records answering both (Wilson n for pair cells).
  std::vector<std::int64_t> pair_avail;  // J*J row-major
  std::int64_t record_count = 0;
  bool renormalized = false;
  bool completed = false;  // all cells hold values (exact model or completion)

  int cells() const { return design.total_cells(); }
  bool is_estimable(int row, int col) const { return estimable[static_cast<std::size_t>(row) * cells() + col]; }
  std::int64_t pair_count(int j, int jp) const {
    return pair_avail[static_cast<std::size_t>(j) * design.question_count() + jp];
  }
};

/// Wilson half-widths matching the FrequencyMatrix shape; NaN where inestimable.
struct StdErrMatrix {
  SurveyDesign design;
  double alpha = 0.05;
  Vec first_order;   // |L|
  Mat second_order;  // |L| x |L|
};

/// A known mixing distribution over the supporting plane: either a discrete
/// set of weighted score points or a uniform segment between two score points.
/// Serves as the exact oracle for moments, scores, and simulations.
struct MixingModel {
  struct Discrete {
    std::vector<double> weights;
    std::vector<Vec> points;  // score vectors, sum to one
  };
  struct Segment {
    Vec a;  // endpoints in score coordinates
    Vec b;
  };

  Basis basis;
  std::variant<Discrete, Segment> support;

  void validate() const;
};

struct BuildOptions {
  double alpha = 0.05;
  /// Rescale second-order blocks so they sum to the first-order moments
  /// (meaningful only when records have missing answers).
  bool renormalize = true;
};

/// Streams counts over the records and assembles the order-0/1/2 frequency
/// matrix plus Wilson half-widths. Same-question blocks are flagged
/// inestimable. Throws input_error when a question has no observed answers.
std::pair<FrequencyMatrix, StdErrMatrix> build_frequency_matrix(const Dataset& data,
                                                                const BuildOptions& options = {},
                                                                Warnings* warnings = nullptr);

/// Wilson score interval for a proportion f observed over n trials,
/// clipped to [0,1]. n = 0 degenerates to [0,1].
std::pair<double, double> wilson_interval(double f, std::int64_t n, double alpha);
/// Half-width of the Wilson interval (0.5 * (upper - lower) before clipping).
double wilson_half_width(double f, std::int64_t n, double alpha);

/// Exact mixed moment M_ell under a known mixing model. Discrete supports sum
/// directly; segments integrate by Gauss-Legendre quadrature, exact because
/// the integrand is a polynomial of degree order(ell).
double exact_moment(const MixingModel& model, const ResponsePattern& pattern);

/// Generalized cell list variant: factors may repeat a question, which makes
/// the same-question moments (diagonal blocks) of a known model calculable.
double exact_moment_cells(const MixingModel& model, std::span<const std::pair<int, int>> cells);

/// Fully populated frequency matrix (no question marks) from a known model.
FrequencyMatrix exact_frequency_matrix(const MixingModel& model);

}  // namespace lls
