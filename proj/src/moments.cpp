#include "lls/moments.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lls {

bool Basis::nonnegative() const {
  return vectors.minCoeff() >= -1e-12;
}

void Basis::validate() const {
  design.validate();
  if (vectors.rows() != design.total_cells())
    throw input_error("basis: vector length " + std::to_string(vectors.rows()) +
                      " does not match |L|=" + std::to_string(design.total_cells()));
  if (vectors.cols() < 1) throw input_error("basis: need K >= 1 vectors");
  for (int k = 0; k < vectors.cols(); ++k) {
    for (int j = 0; j < design.question_count(); ++j) {
      double s = vectors.col(k).segment(design.cell_offset(j), design.levels[j]).sum();
      if (std::abs(s - 1.0) > 1e-12)
        throw numeric_error("basis vector " + std::to_string(k + 1) + " sums to " +
                            std::to_string(s) + " on question " + std::to_string(j + 1));
    }
  }
  Eigen::JacobiSVD<Mat> svd(vectors);
  if (svd.singularValues()(vectors.cols() - 1) <= 1e-9)
    throw numeric_error("basis vectors are linearly dependent (sigma_min = " +
                        std::to_string(svd.singularValues()(vectors.cols() - 1)) + ")");
}

void MixingModel::validate() const {
  basis.validate();
  const int K = basis.dimension();
  auto check_point = [&](const Vec& g, const char* what) {
    if (g.size() != K) throw input_error(std::string(what) + ": score dimension mismatch");
    if (std::abs(g.sum() - 1.0) > 1e-9)
      throw input_error(std::string(what) + ": score coordinates must sum to one");
  };
  if (const auto* d = std::get_if<Discrete>(&support)) {
    if (d->weights.size() != d->points.size() || d->points.empty())
      throw input_error("mixing model: weights/points mismatch");
    double total = 0.0;
    for (std::size_t m = 0; m < d->points.size(); ++m) {
      if (d->weights[m] < 0) throw input_error("mixing model: negative weight");
      total += d->weights[m];
      check_point(d->points[m], "mixing model point");
      if ((basis.vectors * d->points[m]).minCoeff() < -1e-9)
        throw input_error("mixing model point " + std::to_string(m + 1) +
                          " has negative mixed probability");
    }
    if (std::abs(total - 1.0) > 1e-9) throw input_error("mixing model: weights must sum to one");
  } else {
    const auto& s = std::get<Segment>(support);
    check_point(s.a, "segment endpoint");
    check_point(s.b, "segment endpoint");
    if ((basis.vectors * s.a).minCoeff() < -1e-9 || (basis.vectors * s.b).minCoeff() < -1e-9)
      throw input_error("segment endpoint has negative mixed probability");
  }
}

std::pair<double, double> wilson_interval(double f, std::int64_t n, double alpha) {
  if (n == 0) return {0.0, 1.0};
  if (n < 0 || f < 0.0 || f > 1.0 || alpha <= 0.0 || alpha >= 1.0)
    throw input_error("wilson_interval: need n >= 1, 0 <= f <= 1, 0 < alpha < 1");
  double hw = wilson_half_width(f, n, alpha);
  double z = normal_quantile(1.0 - alpha / 2.0);
  double nn = static_cast<double>(n);
  double center = (nn * f + z * z / 2.0) / (nn + z * z);
  return {std::max(center - hw, 0.0), std::min(center + hw, 1.0)};
}

double wilson_half_width(double f, std::int64_t n, double alpha) {
  if (n <= 0) return 0.5;
  double z = normal_quantile(1.0 - alpha / 2.0);
  double nn = static_cast<double>(n);
  return z * std::sqrt(nn) / (nn + z * z) * std::sqrt(f * (1.0 - f) + z * z / (4.0 * nn));
}

std::pair<FrequencyMatrix, StdErrMatrix> build_frequency_matrix(const Dataset& data,
                                                                const BuildOptions& options,
                                                                Warnings* warnings) {
  const SurveyDesign& design = data.design();
  const int J = design.question_count();
  const int L = design.total_cells();
  if (data.record_count() < 1) throw input_error("build_frequency_matrix: no records");

  std::vector<int> offset(J);
  for (int j = 0; j < J; ++j) offset[j] = design.cell_offset(j);

  std::vector<std::int64_t> count1(L, 0);
  std::vector<std::int64_t> avail1(J, 0);
  std::vector<std::int64_t> count2(static_cast<std::size_t>(L) * L, 0);
  std::vector<std::int64_t> avail2(static_cast<std::size_t>(J) * J, 0);

  std::vector<int> cells;
  cells.reserve(J);
  std::vector<int> qs;
  qs.reserve(J);
  for (std::int64_t i = 0; i < data.record_count(); ++i) {
    const std::int32_t* rec = data.row(i);
    cells.clear();
    qs.clear();
    for (int j = 0; j < J; ++j) {
      if (rec[j] == 0) continue;
      int c = offset[j] + rec[j] - 1;
      ++count1[c];
      ++avail1[j];
      cells.push_back(c);
      qs.push_back(j);
    }
    const std::size_t n = cells.size();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        ++count2[static_cast<std::size_t>(cells[a]) * L + cells[b]];
        ++avail2[static_cast<std::size_t>(qs[a]) * J + qs[b]];
      }
    }
  }

  for (int j = 0; j < J; ++j)
    if (avail1[j] == 0)
      throw input_error("question " + std::to_string(j + 1) + " has no observed answers");

  FrequencyMatrix fm;
  fm.design = design;
  fm.first_order = Vec::Zero(L);
  fm.second_order = Mat::Constant(L, L, std::numeric_limits<double>::quiet_NaN());
  fm.estimable.assign(static_cast<std::size_t>(L) * L, false);
  fm.first_avail = avail1;
  fm.pair_avail.assign(static_cast<std::size_t>(J) * J, 0);
  fm.record_count = data.record_count();

  for (int j = 0; j < J; ++j)
    for (int l = 0; l < design.levels[j]; ++l)
      fm.first_order(offset[j] + l) =
          static_cast<double>(count1[offset[j] + l]) / static_cast<double>(avail1[j]);

  for (int j = 0; j < J; ++j) {
    for (int jp = 0; jp < J; ++jp) {
      if (jp == j) continue;
      std::int64_t n_pair = j < jp ? avail2[static_cast<std::size_t>(j) * J + jp]
                                   : avail2[static_cast<std::size_t>(jp) * J + j];
      fm.pair_avail[static_cast<std::size_t>(j) * J + jp] = n_pair;
      for (int l = 0; l < design.levels[j]; ++l) {
        for (int lp = 0; lp < design.levels[jp]; ++lp) {
          int r = offset[j] + l, c = offset[jp] + lp;
          std::int64_t cnt = j < jp ? count2[static_cast<std::size_t>(r) * L + c]
                                    : count2[static_cast<std::size_t>(c) * L + r];
          fm.estimable[static_cast<std::size_t>(r) * L + c] = n_pair > 0;
          fm.second_order(r, c) =
              n_pair > 0 ? static_cast<double>(cnt) / static_cast<double>(n_pair)
                         : std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  }

  if (options.renormalize && data.has_missing()) {
    // Row-block rescale so sums over l' match the first-order moments, then
    // symmetrize; sums then hold within the renormalization tolerance.
    Mat scaled = fm.second_order;
    for (int j = 0; j < J; ++j) {
      for (int l = 0; l < design.levels[j]; ++l) {
        int r = offset[j] + l;
        for (int jp = 0; jp < J; ++jp) {
          if (jp == j || fm.pair_count(j, jp) == 0) continue;
          double s = fm.second_order.row(r).segment(offset[jp], design.levels[jp]).sum();
          if (s > 0.0) {
            double factor = fm.first_order(r) / s;
            scaled.row(r).segment(offset[jp], design.levels[jp]) *= factor;
          }
        }
      }
    }
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < L; ++c)
        if (fm.is_estimable(r, c))
          fm.second_order(r, c) = 0.5 * (scaled(r, c) + scaled(c, r));
    fm.renormalized = true;
    if (warnings) warnings->add("second-order frequencies renormalized to first-order sums");
  }

  StdErrMatrix se;
  se.design = design;
  se.alpha = options.alpha;
  se.first_order = Vec::Zero(L);
  se.second_order = Mat::Constant(L, L, std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < J; ++j)
    for (int l = 0; l < design.levels[j]; ++l) {
      int r = offset[j] + l;
      se.first_order(r) = wilson_half_width(fm.first_order(r), avail1[j], options.alpha);
    }
  for (int r = 0; r < L; ++r)
    for (int c = 0; c < L; ++c)
      if (fm.is_estimable(r, c)) {
        int j = 0;
        while (offset[j] + design.levels[j] <= r) ++j;
        int jp = 0;
        while (offset[jp] + design.levels[jp] <= c) ++jp;
        se.second_order(r, c) =
            wilson_half_width(fm.second_order(r, c), fm.pair_count(j, jp), options.alpha);
      }

  return {std::move(fm), std::move(se)};
}

namespace {

// Product of mixed probabilities over the given (question, outcome) factors at
// score point g; questions may repeat.
double cell_product(const Basis& basis, const Vec& g,
                    std::span<const std::pair<int, int>> cells) {
  double prod = 1.0;
  for (auto [j, l] : cells) prod *= basis.beta_cell(g, j, l);
  return prod;
}

}  // namespace

double exact_moment_cells(const MixingModel& model, std::span<const std::pair<int, int>> cells) {
  if (const auto* d = std::get_if<MixingModel::Discrete>(&model.support)) {
    double m = 0.0;
    for (std::size_t i = 0; i < d->points.size(); ++i)
      m += d->weights[i] * cell_product(model.basis, d->points[i], cells);
    return m;
  }
  const auto& s = std::get<MixingModel::Segment>(model.support);
  // The integrand is a polynomial of degree |cells| in the segment parameter.
  int n_nodes = static_cast<int>(cells.size()) / 2 + 2;
  std::vector<double> nodes, weights;
  gauss_legendre(n_nodes, nodes, weights);
  double m = 0.0;
  for (int q = 0; q < n_nodes; ++q) {
    Vec g = s.a + nodes[q] * (s.b - s.a);
    m += weights[q] * cell_product(model.basis, g, cells);
  }
  return m;
}

double exact_moment(const MixingModel& model, const ResponsePattern& pattern) {
  pattern.validate(model.basis.design);
  std::vector<std::pair<int, int>> cells;
  for (int j = 0; j < pattern.size(); ++j)
    if (pattern.entries[j] != 0) cells.emplace_back(j, pattern.entries[j]);
  return exact_moment_cells(model, cells);
}

FrequencyMatrix exact_frequency_matrix(const MixingModel& model) {
  model.validate();
  const SurveyDesign& design = model.basis.design;
  const int J = design.question_count();
  const int L = design.total_cells();

  FrequencyMatrix fm;
  fm.design = design;
  fm.first_order = Vec::Zero(L);
  fm.second_order = Mat::Zero(L, L);
  fm.estimable.assign(static_cast<std::size_t>(L) * L, true);
  fm.first_avail.assign(J, 0);
  fm.pair_avail.assign(static_cast<std::size_t>(J) * J, 0);
  fm.completed = true;

  for (int j = 0; j < J; ++j)
    for (int l = 1; l <= design.levels[j]; ++l) {
      std::pair<int, int> c{j, l};
      fm.first_order(design.cell_index(j, l)) = exact_moment_cells(model, {&c, 1});
    }
  for (int j = 0; j < J; ++j)
    for (int l = 1; l <= design.levels[j]; ++l)
      for (int jp = j; jp < J; ++jp)
        for (int lp = 1; lp <= design.levels[jp]; ++lp) {
          if (jp == j && lp < l) continue;
          std::pair<int, int> cells[2] = {{j, l}, {jp, lp}};
          double m = exact_moment_cells(model, {cells, 2});
          fm.second_order(design.cell_index(j, l), design.cell_index(jp, lp)) = m;
          fm.second_order(design.cell_index(jp, lp), design.cell_index(j, l)) = m;
        }
  return fm;
}

}  // namespace lls
