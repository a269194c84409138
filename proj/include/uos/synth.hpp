#pragma once

// Synthetic union-of-subspaces posteriors with known ground truth.
//
// Class l owns an r-dimensional subspace S_l of R^m spanned by the axis e_l
// (when l < m) and r-1 non-negative directions. Clean latent points are
// non-negative combinations of those directions with weight `anchor` on e_l,
// so they peak at coordinate l the way a posterior peaks at its class. The
// simplex map shifts by |min(x)| + epsilon and divides by the sum; for
// non-negative x the shift is just epsilon, so clean frames stay close to S_l.
// Noise is added to latent coordinates before the map.
//
// Frames are emitted as short same-class runs so that sequence decoding has
// something to do.

#include "uos/core.hpp"

#include <cstdint>
#include <vector>

namespace uos {

struct SynthConfig {
  Eigen::Index m = 50;   // ambient dimension
  int classes = 5;       // L
  Eigen::Index rank = 3; // r, intrinsic dimension per class
  Eigen::Index frames_per_class = 200;
  double noise_sigma = 0.0;        // additive Gaussian on latent coordinates
  double subspace_angle_min = 30;  // degrees
  std::uint64_t seed = 0;

  void validate() const;
};

// Shape of the latent coefficient draw and the simplex map.
struct SynthShape {
  double anchor = 1.0;        // weight of the class axis
  double spread = 0.5;        // scale of the half-normal weights on other directions
  double epsilon = 1e-5;      // added to |min| when shifting to positive
  Eigen::Index support = 3;   // nonzeros per direction for random subspaces
  double min_margin = 0.1;    // clean latent must beat other coordinates by this
  int max_run = 6;            // same-class run lengths drawn from [1, max_run]
};

struct SynthDataset {
  RealMatrix latent;  // pre-simplex points, exact subspace members
  RealMatrix clean;
  RealMatrix noisy;
  ClassAlignment align;
  SubspaceSpec spec;
};

// Smallest principal angle between the spans of two orthonormal bases, in
// degrees.
double min_principal_angle_deg(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct SubspaceModel {
  SubspaceSpec spec;  // orthonormal bases
  // Non-negative spanning directions per class (m x r); column 0 is the anchor.
  std::vector<Eigen::MatrixXd> directions;
};

// Disjoint coordinate blocks when L*r <= m (pairwise orthogonal, each basis
// rotated by a random orthogonal map); otherwise sparse non-negative random
// directions, rejection-sampled up to 100 times against the angle
// constraint. Throws AngleInfeasible.
SubspaceModel generate_subspaces(const SynthConfig& cfg, const SynthShape& shape = {});

// Shift by |min| + epsilon, then l1-normalize.
RealVector latent_to_simplex(const RealVector& x, double epsilon);

// `stream` selects an independent draw from the same subspaces (e.g. a
// held-out set).
SynthDataset generate_dataset(const SubspaceModel& model, const SynthConfig& cfg,
                              std::uint64_t stream = 0, const SynthShape& shape = {});

struct SynthSplit {
  SynthDataset train;
  SynthDataset test;
};

// Train and test draws sharing one set of subspaces.
SynthSplit generate_split(const SynthConfig& cfg, Eigen::Index test_frames_per_class,
                          const SynthShape& shape = {});

}  // namespace uos
