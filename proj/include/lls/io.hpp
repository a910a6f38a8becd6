#pragma once

#include "lls/common.hpp"
#include "lls/dataset.hpp"
#include "lls/moments.hpp"
#include "lls/scores.hpp"
#include "lls/sim.hpp"

#include <map>
#include <string>

namespace lls {

/// Design file: one line "L_1 L_2 ... L_J".
SurveyDesign read_design_file(const std::string& path);
void write_design_file(const SurveyDesign& design, const std::string& path);

Dataset load_dataset_file(const std::string& path, std::optional<SurveyDesign> design,
                          const LoadOptions& options = {});
void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::string& missing_token = ".");

/// Basis file: K rows of |L| comma-separated values, design sidecar at
/// <path>.design.
void write_basis_csv(const Basis& basis, const std::string& path);
Basis read_basis_csv(const std::string& path);

/// Frequency matrix dump: header row, then one row per (j,l) cell holding the
/// first-order moment and the second-order row; inestimable cells print "?".
/// Metadata sidecar (design, counts, renormalization flag) at <path>.meta.json.
void write_matrix_csv(const FrequencyMatrix& fm, const std::string& path);

/// Scores table: pattern, weight, g_1..g_K, residual, mode, flags.
void write_scores_csv(const MixingEstimate& estimate, const std::string& path);
MixingEstimate read_scores_csv(const std::string& path, const Basis& basis);

void write_histogram_csv(const Histogram& hist, const std::string& path);

/// key=value configuration file; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path);
ExperimentConfig experiment_config_from(const std::map<std::string, std::string>& kv);

/// Deterministic shortest-round-trip formatting for doubles.
std::string format_double(double v);

}  // namespace lls
