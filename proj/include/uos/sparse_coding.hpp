#pragma once

// Lasso and sparse-group (hierarchical) Lasso coding over a grouped
// dictionary.
//
// Weights follow the unscaled convention documented on CodingConfig:
// the solvers minimize 1/2 ||z - D a||^2 + (lambda/2) ||a||_1 (+ group term),
// whose minimizers coincide with ||z - D a||^2 + lambda ||a||_1. Reported
// objectives and gaps are in the unscaled form.

#include "uos/core.hpp"

#include <vector>

namespace uos {

struct SolverReport {
  int iterations_used = 0;
  double final_objective = 0.0;
  bool converged = false;
  double duality_gap_or_rel_change = 0.0;
};

struct EncodeResult {
  SparseCode code;
  SolverReport report;
};

enum class CodingMode { Lasso, Hilasso };

// sign(x) * max(|x| - t, 0)
inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Unscaled objective ||z - D a||^2 + lambda1 ||a||_1 + lambda2 sum_g ||a_g||_2.
double coding_objective(const RealVector& z, const GroupedDictionary& dict, const RealVector& alpha,
                        double lambda1, double lambda2);

// Power-method estimate of ||D||_2^2 (20 iterations, relative tolerance 1e-6).
double spectral_norm_squared(const AtomMatrix& atoms);

// Coordinate descent Lasso on raw atoms, warm-started from `alpha`, which is
// overwritten with the solution. Atoms visited in ascending order; stops when
// the duality gap of the halved objective is <= tolerance * max(1, ||z||^2).
SolverReport lasso_solve(const AtomMatrix& atoms, const Eigen::Ref<const RealVector>& z,
                         double lambda1, double tolerance, int max_iterations, RealVector& alpha);

// Reusable encoder: caches column norms and the Lipschitz estimate for a
// fixed dictionary. Thread-safe for concurrent encode() calls.
class SparseEncoder {
 public:
  SparseEncoder(const GroupedDictionary& dict, CodingConfig cfg, CodingMode mode);

  EncodeResult encode(const Eigen::Ref<const RealVector>& z) const;

  const GroupedDictionary& dictionary() const noexcept { return *dict_; }
  CodingMode mode() const noexcept { return mode_; }
  double lipschitz() const noexcept { return lipschitz_; }

 private:
  EncodeResult encode_lasso(const Eigen::Ref<const RealVector>& z) const;
  EncodeResult encode_hilasso(const Eigen::Ref<const RealVector>& z) const;

  const GroupedDictionary* dict_;
  CodingConfig cfg_;
  CodingMode mode_;
  double lipschitz_ = 0.0;
};

EncodeResult lasso_encode(const RealVector& z, const GroupedDictionary& dict, const CodingConfig& cfg);

// FISTA with backtracking and function-value restart. The proximal step is
// entrywise soft-threshold followed by groupwise l2 shrinkage.
EncodeResult hilasso_encode(const RealVector& z, const GroupedDictionary& dict,
                            const CodingConfig& cfg);

struct BatchCodes {
  RealMatrix codes;  // T x n
  std::vector<SolverReport> reports;
  GroupLayout layout;

  SparseCode code(Eigen::Index t) const { return SparseCode(codes.row(t).transpose(), layout); }
};

// Independent per-frame coding; result does not depend on `threads`.
BatchCodes batch_encode(const RealMatrix& z, const GroupedDictionary& dict, const CodingConfig& cfg,
                        CodingMode mode, unsigned threads = 0);

}  // namespace uos
