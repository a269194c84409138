#pragma once

// Projection of posteriors onto the span of training-data atoms: group-sparse
// code, reconstruction D*alpha, then clip-and-normalize onto the simplex.

#include "uos/core.hpp"
#include "uos/sparse_coding.hpp"

#include <optional>

namespace uos {

RealVector reconstruct(const GroupedDictionary& dict, const SparseCode& code);

// Negatives clipped to zero, then divided by the sum. nullopt when the
// clipped sum is below 1e-12 (degenerate).
std::optional<PosteriorVector> to_simplex(const RealVector& v);

struct ProjectionStats {
  Eigen::Index frames = 0;
  Eigen::Index degenerate = 0;
  Eigen::Index unconverged = 0;
};

struct ProjectionResult {
  RealMatrix posteriors;
  ProjectionStats stats;
};

// Degenerate frames fall back to the input posterior unchanged.
ProjectionResult project_posteriors(const RealMatrix& z, const GroupedDictionary& dict,
                                    const CodingConfig& cfg, unsigned threads = 0);

}  // namespace uos
