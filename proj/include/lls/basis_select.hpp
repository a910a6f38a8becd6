#pragma once

#include "lls/common.hpp"
#include "lls/moments.hpp"
#include "lls/scores.hpp"

#include <cstdint>

namespace lls {

/// Researcher-specified "ideal individual" probability vector: |L| entries in
/// [0,1] with per-question sums of one. Violations are rejected, not repaired.
struct PureTypeSpec {
  Vec target;

  void validate(const SurveyDesign& design) const;
};

/// Nearest score polyhedron point to the pure type: minimizes
/// ||sum_k g_k lambda^k - target||^2 subject to sum g = 1 and
/// nonnegative mixed probabilities.
Vec project_pure_type(const PureTypeSpec& spec, const Basis& basis);

/// New basis from projecting each pure type; vectors are the fitted betas.
Basis pure_type_basis(const std::vector<PureTypeSpec>& specs, const Basis& basis);

/// Basis vectors as weighted means of fitted probability vectors over score
/// clusters (k-means on the support points).
Basis cluster_mean_basis(const MixingEstimate& estimate, const Basis& basis, int k,
                         std::uint64_t seed = 1);

/// Re-expresses a score over a basis spanning the same subspace; the mixed
/// probability vector beta is invariant. `max_distance` bounds the allowed
/// subspace distance between the two bases.
Vec rebase(const Vec& g, const Basis& old_basis, const Basis& new_basis,
           double max_distance = 1e-6);

}  // namespace lls
