#pragma once

#include "lls/cluster.hpp"
#include "lls/common.hpp"
#include "lls/dataset.hpp"
#include "lls/moments.hpp"
#include "lls/scores.hpp"
#include "lls/subspace.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lls {

/// 0/1 block basis over J dichotomous questions: lambda^1 answers outcome 1
/// everywhere; lambda^k (k >= 2) answers outcome 2 exactly on the (k-1)-th
/// block of J/(K-1) questions. Requires K-1 to divide J.
Basis make_block_basis(int K, int J);

enum class ScoreDesign { simplex_grid, two_interval, five_point, custom };

ScoreDesign parse_score_design(const std::string& name);
std::string score_design_name(ScoreDesign design);

struct ScoreSample {
  std::vector<Vec> scores;
  std::vector<int> labels;  // generator class per individual (where meaningful)
};

/// Deterministic score layouts:
///  - simplex_grid: the finest unit-simplex lattice with at most I points,
///    cycled to length I;
///  - two_interval (K=2): g1 equally spaced, half on [0.10,0.25], half on
///    [0.50,0.75];
///  - five_point (K=3): I/5 individuals per design point, labels attached.
ScoreSample sample_scores(ScoreDesign design, std::int64_t count, int K, std::uint64_t seed,
                          const std::vector<Vec>* custom_points = nullptr);

/// The five score points used by the five_point design.
std::vector<Vec> five_point_locations();

/// Position-random dichotomous basis: outcome-1 probabilities drawn uniformly
/// from [0.05, 0.95] per question and component.
Basis make_random_basis(int K, int J, std::uint64_t seed);

/// Categorical draws from the per-question mixed probabilities; byte-identical
/// across runs for a fixed seed. Throws when a mixed probability is below
/// -1e-9.
Dataset simulate_responses(const Basis& basis, const std::vector<Vec>& scores,
                           std::uint64_t seed);

struct ExperimentConfig {
  int K = 2;
  int J = 60;
  std::int64_t I = 1430;
  ScoreDesign design = ScoreDesign::simplex_grid;
  int replications = 10;
  std::uint64_t seed = 20240501;
  SubspaceOptions subspace;
  /// Cluster experiment: classes follow the number of distinct design points.
  Linkage linkage = Linkage::complete;
  ScoreOptions score;
  /// Acceptance threshold echoed into reports (median distance, rate, mass).
  std::optional<double> accept = {};
  int jobs = 1;
};

struct RecoveryReport {
  std::vector<double> distances;  // per replication
  std::vector<double> seconds;    // fit stage wall time per replication
  double median_distance = 0.0;
};

/// Basis -> scores -> responses -> find_subspace -> distance to the truth,
/// aggregated over seeded replications.
RecoveryReport run_recovery_experiment(const ExperimentConfig& config,
                                       Warnings* warnings = nullptr);

struct ClusterReport {
  std::vector<double> score_rates;  // per replication
  std::vector<double> raw_rates;
  double mean_score_rate = 0.0;
  double mean_raw_rate = 0.0;
};

/// Five-point design: full pipeline scores and raw 0/1 response vectors are
/// both clustered (hierarchical, complete linkage by default) and compared to
/// the generator labels.
ClusterReport run_cluster_experiment(const ExperimentConfig& config,
                                     Warnings* warnings = nullptr);

struct Figure1Report {
  double true_basis_mass = 0.0;   // weight of scores inside the two intervals
  double recon_basis_mass = 0.0;
  Histogram true_hist;
  Histogram recon_hist;
  double subspace_dist = 0.0;
};

/// Two-interval design: scores under the generating basis and under the
/// recovered (truth-aligned) basis, with the mass landing in the widened
/// design intervals [0.05,0.30] and [0.45,0.80].
Figure1Report run_figure1_experiment(const ExperimentConfig& config,
                                     Warnings* warnings = nullptr);

double median(std::vector<double> values);

}  // namespace lls
