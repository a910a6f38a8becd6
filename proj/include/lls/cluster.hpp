#pragma once

#include "lls/common.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lls {

struct ClusterResult {
  std::vector<int> assignments;  // per point
  Mat centers;                   // dim x clusters (weighted means of members)
  std::string linkage;           // "kmeans" or the hierarchical linkage used
};

/// Lloyd iteration on weighted points to a fixed point. Seeding: the first
/// center is drawn by weight, the rest by farthest-point; ties break to the
/// lowest index. Deterministic for a given seed.
ClusterResult kmeans(const Mat& points, const std::vector<double>& weights, int k,
                     std::uint64_t seed);

enum class Linkage { centroid, single, complete };

/// Agglomerative merging under the chosen linkage until `k` clusters remain
/// or the smallest inter-cluster distance exceeds `threshold` (when given).
/// Merge ties break to the lowest pair of cluster indices.
ClusterResult hierarchical(const Mat& points, const std::vector<double>& weights,
                           std::optional<int> k, std::optional<double> threshold,
                           Linkage linkage);

/// Fraction of weight misclassified under the best bijective relabeling
/// (exhaustive over label permutations; at most 8 labels).
double misclassification_rate(const std::vector<int>& assignments,
                              const std::vector<int>& truth_labels,
                              const std::vector<double>& weights = {});

}  // namespace lls
