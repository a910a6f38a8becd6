#include "lls/scores.hpp"

#include "lls/qp.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lls {

namespace {

ResponsePattern with_entry(const ResponsePattern& p, int question, int value) {
  ResponsePattern out = p;
  out.entries[question] = value;
  return out;
}

}  // namespace

FrequencySource::CompleteCounts FrequencySource::complete_counts(
    const ResponsePattern& pattern) const {
  const SurveyDesign& d = design();
  CompleteCounts out;
  out.full = frequency(pattern);
  out.dropped.resize(d.question_count());
  out.swapped.resize(d.question_count());
  for (int j = 0; j < d.question_count(); ++j) {
    out.dropped[j] = frequency(with_entry(pattern, j, 0));
    out.swapped[j].resize(d.levels[j]);
    for (int l = 1; l <= d.levels[j]; ++l)
      out.swapped[j][l - 1] =
          l == pattern.entries[j] ? out.full : frequency(with_entry(pattern, j, l));
  }
  return out;
}

FrequencySource::ExtensionCounts FrequencySource::extension_counts(
    const ResponsePattern& pattern) const {
  const SurveyDesign& d = design();
  ExtensionCounts out;
  out.base = frequency(pattern);
  for (int j = 0; j < d.question_count(); ++j) {
    if (pattern.entries[j] != 0) continue;
    out.questions.push_back(j);
    std::vector<Value> vals(d.levels[j]);
    for (int l = 1; l <= d.levels[j]; ++l) vals[l - 1] = frequency(with_entry(pattern, j, l));
    out.extended.push_back(std::move(vals));
  }
  return out;
}

FrequencySource::Value EmpiricalFrequencySource::frequency(const ResponsePattern& pattern) const {
  auto c = count_pattern(data_, pattern);
  Value v;
  v.eligible = c.eligible;
  v.available = c.eligible > 0;
  v.f = v.available ? c.frequency() : 0.0;
  return v;
}

FrequencySource::CompleteCounts EmpiricalFrequencySource::complete_counts(
    const ResponsePattern& pattern) const {
  pattern.validate(data_.design());
  if (!pattern.complete()) throw input_error("complete_counts: pattern has zero entries");
  const int J = pattern.size();
  const std::int64_t I = data_.record_count();
  const bool clean = !data_.has_missing();

  std::int64_t full_match = 0, full_avail = 0;
  std::vector<std::int64_t> drop_match(J, 0), drop_avail(J, 0);
  // swap_match[cell] counts records matching everywhere except question j
  // where they answered l (the diagonal l = ell_j cell holds full matches).
  std::vector<std::int64_t> swap_match(data_.design().total_cells(), 0);

  const std::vector<int>& want = pattern.entries;
  for (std::int64_t i = 0; i < I; ++i) {
    const std::int32_t* rec = data_.row(i);
    int offences = 0, misses = 0;
    int offence_pos = -1, miss_pos = -1;
    if (clean) {
      for (int j = 0; j < J; ++j) {
        if (rec[j] == want[j]) continue;
        ++offences;
        offence_pos = j;
        if (offences > 1) break;
      }
    } else {
      // two misses make the record ineligible everywhere; keep scanning past
      // mismatches because eligibility only depends on missingness
      for (int j = 0; j < J; ++j) {
        int a = rec[j];
        if (a == want[j]) continue;
        ++offences;
        offence_pos = j;
        if (a == 0) {
          ++misses;
          miss_pos = j;
          if (misses > 1) break;
        }
      }
    }

    if (misses == 0) {
      ++full_avail;
      for (int j = 0; j < J; ++j) ++drop_avail[j];
      if (offences == 0) {
        ++full_match;
        for (int j = 0; j < J; ++j) ++drop_match[j];
      } else if (offences == 1) {
        ++drop_match[offence_pos];
        ++swap_match[data_.design().cell_index(offence_pos, rec[offence_pos])];
      }
    } else if (misses == 1 && offences == 1) {
      // the single offence is the missing answer: matches ell^[miss_pos]
      ++drop_avail[miss_pos];
      ++drop_match[miss_pos];
    } else if (misses == 1) {
      ++drop_avail[miss_pos];
    }
  }

  auto value = [](std::int64_t match, std::int64_t avail) {
    Value v;
    v.eligible = avail;
    v.available = avail > 0;
    v.f = avail > 0 ? static_cast<double>(match) / static_cast<double>(avail) : 0.0;
    return v;
  };

  CompleteCounts out;
  out.full = value(full_match, full_avail);
  out.dropped.resize(J);
  out.swapped.resize(J);
  for (int j = 0; j < J; ++j) {
    out.dropped[j] = value(drop_match[j], drop_avail[j]);
    out.swapped[j].resize(data_.design().levels[j]);
    for (int l = 1; l <= data_.design().levels[j]; ++l) {
      std::int64_t m =
          l == want[j] ? full_match : swap_match[data_.design().cell_index(j, l)];
      out.swapped[j][l - 1] = value(m, full_avail);
    }
  }
  return out;
}

FrequencySource::ExtensionCounts EmpiricalFrequencySource::extension_counts(
    const ResponsePattern& pattern) const {
  pattern.validate(data_.design());
  const SurveyDesign& d = data_.design();
  const int J = pattern.size();

  std::vector<int> support, zeros;
  for (int j = 0; j < J; ++j)
    (pattern.entries[j] != 0 ? support : zeros).push_back(j);

  std::int64_t base_match = 0, base_avail = 0;
  std::vector<std::int64_t> ext_match(d.total_cells(), 0), ext_avail(J, 0);

  for (std::int64_t i = 0; i < data_.record_count(); ++i) {
    const std::int32_t* rec = data_.row(i);
    bool eligible = true, match = true;
    for (int j : support) {
      int a = rec[j];
      if (a == 0) {
        eligible = false;
        break;
      }
      if (a != pattern.entries[j]) match = false;
    }
    if (!eligible) continue;
    ++base_avail;
    if (match) ++base_match;
    for (int j : zeros) {
      int a = rec[j];
      if (a == 0) continue;
      ++ext_avail[j];
      if (match) ++ext_match[d.cell_index(j, a)];
    }
  }

  auto value = [](std::int64_t match, std::int64_t avail) {
    Value v;
    v.eligible = avail;
    v.available = avail > 0;
    v.f = avail > 0 ? static_cast<double>(match) / static_cast<double>(avail) : 0.0;
    return v;
  };

  ExtensionCounts out;
  out.base = value(base_match, base_avail);
  for (int j : zeros) {
    out.questions.push_back(j);
    std::vector<Value> vals(d.levels[j]);
    for (int l = 1; l <= d.levels[j]; ++l) vals[l - 1] = value(ext_match[d.cell_index(j, l)], ext_avail[j]);
    out.extended.push_back(std::move(vals));
  }
  return out;
}

FrequencySource::Value ExactFrequencySource::frequency(const ResponsePattern& pattern) const {
  Value v;
  v.f = exact_moment(model_, pattern);
  v.available = true;
  v.eligible = std::numeric_limits<std::int64_t>::max();
  return v;
}

namespace {

struct SystemRows {
  Mat A;  // rows x K, basis cells
  Vec r;  // right sides
};

SystemRows build_rows(const FrequencySource& source, const Basis& basis,
                      const ResponsePattern& pattern, const ScoreOptions& options) {
  const SurveyDesign& d = basis.design;
  std::vector<Vec> rows;
  std::vector<double> rhs;

  if (pattern.order() < pattern.size()) {
    // Exact system: rows over the zero positions, denominators f_ell.
    auto counts = source.extension_counts(pattern);
    if (!counts.base.available || counts.base.f <= 0.0 ||
        counts.base.eligible < options.min_row_eligible)
      throw numeric_error("insufficient data for pattern " + pattern.to_string());
    for (std::size_t qi = 0; qi < counts.questions.size(); ++qi) {
      int j = counts.questions[qi];
      for (int l = 1; l <= d.levels[j]; ++l) {
        const auto& v = counts.extended[qi][l - 1];
        if (!v.available) continue;
        rows.push_back(basis.vectors.row(d.cell_index(j, l)));
        rhs.push_back(v.f / counts.base.f);
      }
    }
  } else {
    // Approximate system: one row per question, denominators f_{ell^[j]}.
    auto counts = source.complete_counts(pattern);
    if (!counts.full.available || counts.full.f <= 0.0)
      throw numeric_error("pattern " + pattern.to_string() + " not observed");
    for (int j = 0; j < d.question_count(); ++j) {
      const auto& den = counts.dropped[j];
      if (!den.available || den.f <= 0.0 || den.eligible < options.min_row_eligible) continue;
      rows.push_back(basis.vectors.row(d.cell_index(j, pattern.entries[j])));
      rhs.push_back(counts.full.f / den.f);
    }
  }

  if (rows.empty()) throw numeric_error("insufficient data for pattern " + pattern.to_string());
  SystemRows sys;
  sys.A = Mat(rows.size(), basis.dimension());
  sys.r = Vec(rhs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sys.A.row(static_cast<int>(i)) = rows[i];
    sys.r(static_cast<int>(i)) = rhs[i];
  }
  return sys;
}

// Reduced least squares after eliminating g_K through the sum constraint.
Vec solve_reduced(const Mat& A, const Vec& r) {
  const int K = static_cast<int>(A.cols());
  if (K == 1) return Vec::Ones(1);
  Mat At = A.leftCols(K - 1).colwise() - A.col(K - 1);
  Vec rt = r - A.col(K - 1);
  Vec head = At.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rt);
  Vec g(K);
  g.head(K - 1) = head;
  g(K - 1) = 1.0 - head.sum();
  return g;
}

}  // namespace

ScoreResult estimate_score(const FrequencySource& source, const Basis& basis,
                           const ResponsePattern& pattern, const ScoreOptions& options) {
  pattern.validate(basis.design);
  const int K = basis.dimension();

  if (options.mean_over_questions && pattern.complete()) {
    // Mean over the J exact-system solutions for the ell^[j] drops.
    auto counts = source.complete_counts(pattern);
    if (!counts.full.available || counts.full.f <= 0.0)
      throw numeric_error("pattern " + pattern.to_string() + " not observed");
    Vec sum = Vec::Zero(K);
    int used = 0;
    for (int j = 0; j < basis.design.question_count(); ++j) {
      const auto& den = counts.dropped[j];
      if (!den.available || den.f <= 0.0 || den.eligible < options.min_row_eligible) continue;
      Mat A(basis.design.levels[j], K);
      Vec r(basis.design.levels[j]);
      for (int l = 1; l <= basis.design.levels[j]; ++l) {
        A.row(l - 1) = basis.vectors.row(basis.design.cell_index(j, l));
        r(l - 1) = counts.swapped[j][l - 1].f / den.f;
      }
      sum += solve_reduced(A, r);
      ++used;
    }
    if (used == 0) throw numeric_error("insufficient data for pattern " + pattern.to_string());
    ScoreResult res;
    res.g = sum / used;
    res.rows = used;
    res.mode_used = ScoreMode::svd;
    return res;
  }

  SystemRows sys = build_rows(source, basis, pattern, options);
  ScoreResult res;
  res.rows = static_cast<int>(sys.A.rows());

  if (options.mode == ScoreMode::qp && K > 1) {
    Vec g0 = Vec::Constant(K, 1.0 / K);
    bool feasible = (basis.vectors * g0).minCoeff() >= -1e-8;
    if (feasible) {
      QuadraticProgram prob = QuadraticProgram::from_residual(sys.A, sys.r);
      prob.A = Mat::Ones(1, K);
      prob.b = Vec::Ones(1);
      prob.G = basis.vectors;
      prob.h = Vec::Zero(basis.vectors.rows());
      try {
        QpOptions qopts;
        qopts.max_iter = 400 * (K + static_cast<int>(basis.vectors.rows()) + 1);
        QpSolution sol = solve_qp(prob, g0, qopts);
        res.g = sol.x;
        res.residual = (sys.A * res.g - sys.r).norm();
        res.mode_used = ScoreMode::qp;
        res.kkt_residual = sol.kkt_residual;
        return res;
      } catch (const numeric_error&) {
        res.qp_fallback = true;
      }
    } else {
      res.qp_fallback = true;
    }
  }

  res.g = solve_reduced(sys.A, sys.r);
  res.residual = (sys.A * res.g - sys.r).norm();
  res.mode_used = ScoreMode::svd;
  return res;
}

Vec bayes_score(const MixingModel& model, const ResponsePattern& pattern) {
  pattern.validate(model.basis.design);
  const int K = model.basis.dimension();
  double m = exact_moment(model, pattern);
  if (m <= 0.0) throw numeric_error("zero-probability pattern " + pattern.to_string());

  std::vector<std::pair<int, int>> cells;
  for (int j = 0; j < pattern.size(); ++j)
    if (pattern.entries[j] != 0) cells.emplace_back(j, pattern.entries[j]);

  Vec numerator = Vec::Zero(K);
  if (const auto* d = std::get_if<MixingModel::Discrete>(&model.support)) {
    for (std::size_t i = 0; i < d->points.size(); ++i) {
      double prod = d->weights[i];
      for (auto [j, l] : cells) prod *= model.basis.beta_cell(d->points[i], j, l);
      numerator += prod * d->points[i];
    }
  } else {
    const auto& s = std::get<MixingModel::Segment>(model.support);
    int n_nodes = static_cast<int>(cells.size()) / 2 + 3;
    std::vector<double> nodes, weights;
    gauss_legendre(n_nodes, nodes, weights);
    for (int q = 0; q < n_nodes; ++q) {
      Vec g = s.a + nodes[q] * (s.b - s.a);
      double prod = weights[q];
      for (auto [j, l] : cells) prod *= model.basis.beta_cell(g, j, l);
      numerator += prod * g;
    }
  }
  return numerator / m;
}

double MixingEstimate::scored_weight() const {
  double w = 0.0;
  for (const auto& s : support)
    if (!s.failed) w += s.weight;
  return w;
}

MixingEstimate estimate_all_scores(const Dataset& data, const Basis& basis,
                                   const ScoreOptions& options, Warnings* warnings) {
  if (data.record_count() < 1) throw input_error("estimate_all_scores: no records");
  PatternTable table = unique_patterns(data);

  EmpiricalFrequencySource source(data);
  MixingEstimate est;
  est.basis = basis;
  est.support.reserve(table.patterns.size());
  int failures = 0, fallbacks = 0;
  for (std::size_t p = 0; p < table.patterns.size(); ++p) {
    ScoredPattern sp;
    sp.pattern = table.patterns[p];
    sp.weight =
        static_cast<double>(table.counts[p]) / static_cast<double>(data.record_count());
    try {
      ScoreResult r = estimate_score(source, basis, sp.pattern, options);
      sp.g = r.g;
      sp.residual = r.residual;
      sp.mode_used = r.mode_used;
      sp.qp_fallback = r.qp_fallback;
      if (r.qp_fallback) ++fallbacks;
    } catch (const numeric_error& e) {
      sp.failed = true;
      sp.error = e.what();
      sp.g = Vec::Constant(basis.dimension(), std::numeric_limits<double>::quiet_NaN());
      ++failures;
    }
    est.support.push_back(std::move(sp));
  }
  if (warnings && fallbacks > 0)
    warnings->add("score QP fell back to svd mode for " + std::to_string(fallbacks) + " patterns");
  if (warnings && failures > 0)
    warnings->add(std::to_string(failures) + " patterns could not be scored");
  return est;
}

double model_probability(const MixingEstimate& estimate, const ResponsePattern& pattern) {
  pattern.validate(estimate.basis.design);
  double p = 0.0;
  for (const auto& s : estimate.support) {
    if (s.failed) continue;
    double prod = s.weight;
    for (int j = 0; j < pattern.size(); ++j)
      if (pattern.entries[j] != 0)
        prod *= estimate.basis.beta_cell(s.g, j, pattern.entries[j]);
    p += prod;
  }
  return p;
}

Vec impute_cell(const Vec& g, const Basis& basis, int question, Warnings* warnings) {
  if (question < 0 || question >= basis.design.question_count())
    throw input_error("impute_cell: question index out of range");
  Vec block =
      basis.vectors.middleRows(basis.design.cell_offset(question), basis.design.levels[question]) * g;
  if (block.minCoeff() < 0.0 || block.maxCoeff() > 1.0) {
    block = block.cwiseMax(0.0).cwiseMin(1.0);
    double s = block.sum();
    if (s > 0.0) block /= s;
    if (warnings)
      warnings->add("imputed probabilities clipped for question " + std::to_string(question + 1));
  }
  return block;
}

Histogram score_histogram(const MixingEstimate& estimate, int component, int bins) {
  if (component < 0 || component >= estimate.basis.dimension())
    throw input_error("score_histogram: component out of range");
  if (bins < 1) throw input_error("score_histogram: need at least one bin");
  Histogram h;
  h.component = component;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = static_cast<double>(b) / bins;
  h.masses.assign(bins, 0.0);
  for (const auto& s : estimate.support) {
    if (s.failed) continue;
    double v = std::clamp(s.g(component), 0.0, 1.0);
    int b = std::min(static_cast<int>(v * bins), bins - 1);
    h.masses[b] += s.weight;
  }
  return h;
}

}  // namespace lls
