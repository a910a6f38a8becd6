#pragma once

#include "lls/common.hpp"
#include "lls/dataset.hpp"
#include "lls/moments.hpp"

#include <memory>
#include <string>
#include <vector>

namespace lls {

/// Supplies pattern frequencies to the score estimator: empirical counts from
/// a dataset, or exact moments of a known mixing model (the noiseless limit).
class FrequencySource {
 public:
  struct Value {
    double f = 0.0;
    bool available = false;
    std::int64_t eligible = 0;
  };

  /// Counts around a complete pattern: the pattern itself, every one-question
  /// drop ell^[j], and every one-answer swap (question j answered l instead).
  struct CompleteCounts {
    Value full;
    std::vector<Value> dropped;               // indexed by question
    std::vector<std::vector<Value>> swapped;  // [question][outcome-1]
  };

  /// Counts around a pattern with zeros: the pattern itself and every
  /// one-question extension ell + l_j over its zero positions.
  struct ExtensionCounts {
    Value base;
    std::vector<int> questions;               // zero positions, ascending
    std::vector<std::vector<Value>> extended;  // aligned with questions, [outcome-1]
  };

  virtual ~FrequencySource() = default;
  virtual const SurveyDesign& design() const = 0;
  virtual Value frequency(const ResponsePattern& pattern) const = 0;

  virtual CompleteCounts complete_counts(const ResponsePattern& pattern) const;
  virtual ExtensionCounts extension_counts(const ResponsePattern& pattern) const;
};

/// Frequencies counted from records in a single pass per query pattern.
class EmpiricalFrequencySource final : public FrequencySource {
 public:
  explicit EmpiricalFrequencySource(const Dataset& data) : data_(data) {}
  const SurveyDesign& design() const override { return data_.design(); }
  Value frequency(const ResponsePattern& pattern) const override;
  CompleteCounts complete_counts(const ResponsePattern& pattern) const override;
  ExtensionCounts extension_counts(const ResponsePattern& pattern) const override;

 private:
  const Dataset& data_;
};

/// Exact moments of a known model presented as frequencies (infinite sample).
class ExactFrequencySource final : public FrequencySource {
 public:
  explicit ExactFrequencySource(const MixingModel& model) : model_(model) {}
  const SurveyDesign& design() const override { return model_.basis.design; }
  Value frequency(const ResponsePattern& pattern) const override;

 private:
  const MixingModel& model_;
};

enum class ScoreMode { qp, svd };

struct ScoreOptions {
  ScoreMode mode = ScoreMode::qp;
  /// Rows whose denominator pattern has fewer eligible respondents are dropped.
  std::int64_t min_row_eligible = 5;
  /// Complete patterns: average the J per-question exact-system solutions
  /// instead of solving the joint system.
  bool mean_over_questions = false;
};

struct ScoreResult {
  Vec g;
  double residual = 0.0;
  int rows = 0;
  ScoreMode mode_used = ScoreMode::qp;
  bool qp_fallback = false;
  /// Kuhn-Tucker residual of the polyhedron-constrained solve (qp mode only).
  double kkt_residual = 0.0;
};

/// Conditional-expectation estimate E(G | X = ell) from the main system of
/// equations. Patterns with zeros use one row per (zero question, outcome)
/// with right sides f_{ell+l_j} / f_ell; complete patterns use one row per
/// question with right sides f_ell / f_{ell^[j]}. qp mode enforces the score
/// polyhedron; svd mode eliminates g_K by the sum constraint and solves the
/// reduced least squares.
ScoreResult estimate_score(const FrequencySource& source, const Basis& basis,
                           const ResponsePattern& pattern, const ScoreOptions& options = {});

/// Exact posterior mean under a known model (Bayes oracle).
Vec bayes_score(const MixingModel& model, const ResponsePattern& pattern);

struct ScoredPattern {
  ResponsePattern pattern;
  double weight = 0.0;
  Vec g;
  double residual = 0.0;
  ScoreMode mode_used = ScoreMode::qp;
  bool qp_fallback = false;
  bool failed = false;
  std::string error;
};

/// Empirical mixing-distribution estimate: one support point per unique
/// observed pattern, weighted by its observed frequency.
struct MixingEstimate {
  Basis basis;
  std::vector<ScoredPattern> support;

  /// Total weight of successfully scored support points.
  double scored_weight() const;
};

/// Scores every unique observed pattern (patterns with missing answers flow
/// through the zero-position branch). Per-pattern failures are flagged on the
/// entry; the batch never aborts.
MixingEstimate estimate_all_scores(const Dataset& data, const Basis& basis,
                                   const ScoreOptions& options = {}, Warnings* warnings = nullptr);

/// Model probability p*_ell = sum_l' f_l' prod_j sum_k g_l'k lambda^k_{j ell_j}.
double model_probability(const MixingEstimate& estimate, const ResponsePattern& pattern);

/// Fitted outcome distribution of question j for an individual with score g,
/// clipped to [0,1] and renormalized when clipping occurred.
Vec impute_cell(const Vec& g, const Basis& basis, int question, Warnings* warnings = nullptr);

/// Weighted histogram of one score component over [0,1].
struct Histogram {
  int component = 0;
  std::vector<double> edges;   // bins+1 edges
  std::vector<double> masses;  // per bin
};

Histogram score_histogram(const MixingEstimate& estimate, int component, int bins);

}  // namespace lls
