#include "lls/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lls {

namespace {

Mat member_means(const Mat& points, const std::vector<double>& weights,
                 const std::vector<int>& assignments, int k) {
  Mat centers = Mat::Zero(points.rows(), k);
  std::vector<double> mass(k, 0.0);
  for (int i = 0; i < points.cols(); ++i) {
    centers.col(assignments[i]) += weights[i] * points.col(i);
    mass[assignments[i]] += weights[i];
  }
  for (int c = 0; c < k; ++c)
    if (mass[c] > 0.0) centers.col(c) /= mass[c];
  return centers;
}

void check_points(const Mat& points, const std::vector<double>& weights) {
  if (points.cols() < 1) throw input_error("clustering: need at least one point");
  if (static_cast<int>(weights.size()) != points.cols())
    throw input_error("clustering: weights/points mismatch");
  for (double w : weights)
    if (w < 0.0) throw input_error("clustering: negative weight");
}

}  // namespace

ClusterResult kmeans(const Mat& points, const std::vector<double>& weights, int k,
                     std::uint64_t seed) {
  check_points(points, weights);
  const int n = static_cast<int>(points.cols());

  // Count distinct points (exact comparison; callers pass deduplicated sets).
  int distinct = 0;
  for (int i = 0; i < n; ++i) {
    bool dup = false;
    for (int j = 0; j < i && !dup; ++j) dup = (points.col(i) - points.col(j)).norm() == 0.0;
    if (!dup) ++distinct;
  }
  if (k > distinct)
    throw input_error("kmeans: " + std::to_string(k) + " clusters requested but only " +
                      std::to_string(distinct) + " distinct points");

  Rng rng(seed);
  Mat centers(points.rows(), k);
  centers.col(0) = points.col(static_cast<int>(rng.categorical(weights)));
  std::vector<double> nearest(n);
  for (int c = 1; c < k; ++c) {
    int far = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (int cc = 0; cc < c; ++cc)
        d = std::min(d, (points.col(i) - centers.col(cc)).squaredNorm());
      nearest[i] = d;
      if (d > best) {
        best = d;
        far = i;
      }
    }
    centers.col(c) = points.col(far);
  }

  std::vector<int> assignments(n, 0);
  for (int round = 0; round < 1000; ++round) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = (points.col(i) - centers.col(c)).squaredNorm();
        if (d < bd - 1e-15) {
          bd = d;
          best = c;
        }
      }
      if (best != assignments[i]) {
        assignments[i] = best;
        changed = true;
      }
    }
    centers = member_means(points, weights, assignments, k);
    if (!changed) break;
  }

  ClusterResult res;
  res.assignments = std::move(assignments);
  res.centers = centers;
  res.linkage = "kmeans";
  return res;
}

ClusterResult hierarchical(const Mat& points, const std::vector<double>& weights,
                           std::optional<int> k, std::optional<double> threshold,
                           Linkage linkage) {
  check_points(points, weights);
  if (!k && !threshold) throw input_error("hierarchical: need a target count or a threshold");
  const int n = static_cast<int>(points.cols());
  const int target = k ? std::max(1, std::min(*k, n)) : 1;

  // Active cluster bookkeeping with a dense distance matrix.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  Mat centers = points;
  std::vector<double> mass(weights);

  Mat dist(n, n);
  auto center_dist = [&](int a, int b) { return (centers.col(a) - centers.col(b)).norm(); };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) dist(a, b) = a == b ? 0.0 : center_dist(a, b);

  std::vector<int> live(n);
  std::iota(live.begin(), live.end(), 0);
  while (static_cast<int>(live.size()) > target) {
    int ba = -1, bb = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ia = 0; ia < live.size(); ++ia)
      for (std::size_t ib = ia + 1; ib < live.size(); ++ib) {
        int a = live[ia], b = live[ib];
        if (dist(a, b) < best) {
          best = dist(a, b);
          ba = a;
          bb = b;
        }
      }
    if (ba < 0) break;
    if (threshold && best > *threshold) break;

    // Merge bb into ba; update distances by linkage.
    for (int c : live) {
      if (c == ba || c == bb) continue;
      double d;
      switch (linkage) {
        case Linkage::single:
          d = std::min(dist(ba, c), dist(bb, c));
          break;
        case Linkage::complete:
          d = std::max(dist(ba, c), dist(bb, c));
          break;
        case Linkage::centroid:
        default: {
          double wa = mass[ba], wb = mass[bb], wc_ = wa + wb;
          Vec merged = wc_ > 0.0 ? Vec((wa * centers.col(ba) + wb * centers.col(bb)) / wc_)
                                 : Vec(0.5 * (centers.col(ba) + centers.col(bb)));
          d = (merged - centers.col(c)).norm();
          break;
        }
      }
      dist(ba, c) = dist(c, ba) = d;
    }
    double wa = mass[ba], wb = mass[bb];
    centers.col(ba) = wa + wb > 0.0
                          ? Vec((wa * centers.col(ba) + wb * centers.col(bb)) / (wa + wb))
                          : Vec(0.5 * (centers.col(ba) + centers.col(bb)));
    mass[ba] += mass[bb];
    parent[bb] = ba;
    live.erase(std::find(live.begin(), live.end(), bb));
  }

  // Compress labels in first-appearance order.
  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::vector<int> label(n, -1);
  int next = 0;
  ClusterResult res;
  res.assignments.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = root(i);
    if (label[r] < 0) label[r] = next++;
    res.assignments[i] = label[r];
  }
  res.centers = member_means(points, weights, res.assignments, next);
  switch (linkage) {
    case Linkage::single: res.linkage = "single"; break;
    case Linkage::complete: res.linkage = "complete"; break;
    default: res.linkage = "centroid"; break;
  }
  return res;
}

double misclassification_rate(const std::vector<int>& assignments,
                              const std::vector<int>& truth_labels,
                              const std::vector<double>& weights) {
  if (assignments.size() != truth_labels.size())
    throw input_error("misclassification_rate: length mismatch");
  const std::size_t n = assignments.size();
  if (n == 0) return 0.0;
  std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
  if (w.size() != n) throw input_error("misclassification_rate: weights length mismatch");

  int labels = 0;
  for (std::size_t i = 0; i < n; ++i)
    labels = std::max({labels, assignments[i] + 1, truth_labels[i] + 1});
  if (labels > 8) throw input_error("misclassification_rate: more than 8 labels");

  // Weighted confusion matrix, then exhaustive permutation search.
  Mat confusion = Mat::Zero(labels, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (assignments[i] < 0 || truth_labels[i] < 0)
      throw input_error("misclassification_rate: negative label");
    confusion(assignments[i], truth_labels[i]) += w[i];
    total += w[i];
  }
  if (total <= 0.0) return 0.0;

  std::vector<int> perm(labels);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double correct = 0.0;
    for (int a = 0; a < labels; ++a) correct += confusion(a, perm[a]);
    best = std::max(best, correct);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return (total - best) / total;
}

}  // namespace lls
