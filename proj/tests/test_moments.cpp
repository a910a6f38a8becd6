#include "lls/moments.hpp"

#include "fixtures.hpp"

#include <Eigen/SVD>
#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace lls;
using lls::testing::example1;
using lls::testing::example2;
using lls::testing::pat;

TEST_CASE("worked example 1 moments") {
  MixingModel model = example1();
  CHECK(exact_moment(model, pat({1, 0, 0})) == doctest::Approx(3.0 / 4).epsilon(1e-13));
  CHECK(exact_moment(model, pat({0, 0, 1})) == doctest::Approx(1.0 / 2).epsilon(1e-13));
  CHECK(exact_moment(model, pat({1, 0, 1})) == doctest::Approx(5.0 / 12).epsilon(1e-13));
  CHECK(exact_moment(model, pat({1, 0, 2})) == doctest::Approx(1.0 / 3).epsilon(1e-13));
}

TEST_CASE("worked example 1 same-question cells") {
  MixingModel model = example1();
  std::pair<int, int> both_one[2] = {{0, 1}, {0, 1}};
  std::pair<int, int> one_two[2] = {{0, 1}, {0, 2}};
  CHECK(exact_moment_cells(model, {both_one, 2}) == doctest::Approx(7.0 / 12).epsilon(1e-13));
  CHECK(exact_moment_cells(model, {one_two, 2}) == doctest::Approx(1.0 / 6).epsilon(1e-13));
}

TEST_CASE("worked example 2 moments") {
  MixingModel model = example2();
  CHECK(exact_moment(model, pat({1, 0, 0})) == doctest::Approx(5.0 / 8).epsilon(1e-13));
  CHECK(exact_moment(model, pat({0, 0, 1})) == doctest::Approx(1.0 / 4).epsilon(1e-13));
  CHECK(exact_moment(model, pat({1, 0, 1})) == doctest::Approx(67.0 / 400).epsilon(1e-13));
}

TEST_CASE("all-zero pattern has moment one; moments are linear in weights") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    MixingModel model = lls::testing::random_model(3, {2, 3, 2}, 4, rng);
    CHECK(exact_moment(model, pat({0, 0, 0})) == doctest::Approx(1.0).epsilon(1e-12));

    auto& d = std::get<MixingModel::Discrete>(model.support);
    ResponsePattern p = pat({1, 2, 0});
    double whole = exact_moment(model, p);
    double parts = 0.0;
    for (std::size_t m = 0; m < d.points.size(); ++m) {
      MixingModel single;
      single.basis = model.basis;
      MixingModel::Discrete one;
      one.weights = {1.0};
      one.points = {d.points[m]};
      single.support = one;
      parts += d.weights[m] * exact_moment(single, p);
    }
    CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
  }
}

TEST_CASE("exact second-order blocks have rank K") {
  auto block_rank = [](const FrequencyMatrix& fm) {
    Eigen::JacobiSVD<Mat> svd(fm.second_order);
    int r = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++r;
    return r;
  };
  CHECK(block_rank(exact_frequency_matrix(example1())) == 2);
  CHECK(block_rank(exact_frequency_matrix(example2())) == 2);

  // Degenerate single-point mixture: every cell is a product, rank 1.
  MixingModel point;
  point.basis = lls::testing::worked_basis();
  MixingModel::Discrete d;
  d.weights = {1.0};
  Vec g(2);
  g << 1, 0;
  d.points = {g};
  point.support = d;
  FrequencyMatrix fm = exact_frequency_matrix(point);
  CHECK(block_rank(fm) == 1);
  for (int r = 0; r < fm.cells(); ++r)
    for (int c = 0; c < fm.cells(); ++c)
      CHECK(fm.second_order(r, c) ==
            doctest::Approx(fm.first_order(r) * fm.first_order(c)).epsilon(1e-12));
}

TEST_CASE("build_frequency_matrix on a small complete dataset") {
  SurveyDesign d;
  d.levels = {2, 2};
  Dataset data(d, {{1, 1}, {1, 2}, {2, 1}, {1, 1}});
  auto [fm, se] = build_frequency_matrix(data);
  CHECK(fm.first_order(0) == doctest::Approx(0.75));
  CHECK(fm.second_order(0, 2) == doctest::Approx(0.5));  // M_{(1,0);(0,1)}
  CHECK_FALSE(fm.is_estimable(0, 1));                    // same-question cell
  CHECK_FALSE(fm.is_estimable(0, 0));
  CHECK(fm.is_estimable(0, 2));

  // Counting identity: block sums over l' reproduce the first-order moments.
  for (int r = 0; r < 2; ++r) {
    double sum = fm.second_order(r, 2) + fm.second_order(r, 3);
    CHECK(sum == doctest::Approx(fm.first_order(r)).epsilon(1e-12));
  }
  CHECK(se.second_order(0, 2) > 0.0);
  CHECK(std::isnan(se.second_order(0, 1)));
}

TEST_CASE("build_frequency_matrix names a never-answered question") {
  SurveyDesign d;
  d.levels = {2, 2};
  Dataset data(d, {{1, 0}, {2, 0}});
  CHECK_THROWS_WITH_AS(build_frequency_matrix(data), doctest::Contains("question 2"), input_error);
}

TEST_CASE("renormalization restores first-order sums under missing data") {
  SurveyDesign d;
  d.levels = {2, 2, 2};
  std::vector<ResponseRecord> records;
  Rng rng(5);
  for (int i = 0; i < 400; ++i) {
    ResponseRecord r(3);
    for (int j = 0; j < 3; ++j)
      r[j] = rng.uniform() < 0.15 ? 0 : 1 + static_cast<int>(rng.below(2));
    records.push_back(r);
  }
  Dataset data(d, records);
  Warnings warnings;
  auto [fm, se] = build_frequency_matrix(data, {}, &warnings);
  CHECK(fm.renormalized);
  CHECK_FALSE(warnings.empty());
  for (int r = 0; r < fm.cells(); ++r)
    for (int jp = 0; jp < 3; ++jp) {
      int off = d.cell_offset(jp);
      if (!fm.is_estimable(r, off)) continue;
      double sum = fm.second_order(r, off) + fm.second_order(r, off + 1);
      CHECK(sum == doctest::Approx(fm.first_order(r)).epsilon(0.05));
    }
  // Symmetry is exact after renormalization.
  for (int r = 0; r < fm.cells(); ++r)
    for (int c = 0; c < fm.cells(); ++c)
      if (fm.is_estimable(r, c))
        CHECK(fm.second_order(r, c) == doctest::Approx(fm.second_order(c, r)).epsilon(1e-14));
}

TEST_CASE("wilson interval collapses algebraically at f = 0") {
  double z = normal_quantile(1.0 - 0.05 / 2.0);
  for (std::int64_t n : {1, 10, 250}) {
    auto [lo, hi] = wilson_interval(0.0, n, 0.05);
    CHECK(lo <= 1e-15);
    CHECK(hi == doctest::Approx(z * z / (n + z * z)).epsilon(1e-12));
  }
}

TEST_CASE("wilson interval matches a high-precision evaluation") {
  // Independent long-double evaluation of the interval formula.
  long double z = 1.959963984540054L;
  long double n = 100.0L, f = 0.5L;
  long double center = (n * f + z * z / 2.0L) / (n + z * z);
  long double hw = z * sqrtl(n) / (n + z * z) * sqrtl(f * (1.0L - f) + z * z / (4.0L * n));
  auto [lo, hi] = wilson_interval(0.5, 100, 0.05);
  CHECK(lo == doctest::Approx(static_cast<double>(center - hw)).epsilon(1e-10));
  CHECK(hi == doctest::Approx(static_cast<double>(center + hw)).epsilon(1e-10));
}

TEST_CASE("wilson interval approaches the Wald interval for large n") {
  double f = 0.3, alpha = 0.05;
  double z = normal_quantile(1.0 - alpha / 2.0);
  std::int64_t n = 100000000;
  auto [lo, hi] = wilson_interval(f, n, alpha);
  double wald = z * std::sqrt(f * (1.0 - f) / static_cast<double>(n));
  CHECK(lo == doctest::Approx(f - wald).epsilon(1e-4));
  CHECK(hi == doctest::Approx(f + wald).epsilon(1e-4));
}

TEST_CASE("wilson interval contains its center and shrinks with n") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    double f = rng.uniform();
    std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(5000));
    double alpha = 0.01 + 0.5 * rng.uniform();
    double z = normal_quantile(1.0 - alpha / 2.0);
    auto [lo, hi] = wilson_interval(f, n, alpha);
    double center = (n * f + z * z / 2) / (n + z * z);
    CHECK(lo <= center + 1e-15);
    CHECK(hi >= center - 1e-15);
    CHECK(wilson_half_width(f, 4 * n, alpha) < wilson_half_width(f, n, alpha));
  }
  CHECK(wilson_interval(0.5, 0, 0.05) == std::pair<double, double>{0.0, 1.0});
}
