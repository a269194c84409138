#pragma once

// Robust PCA by principal component pursuit,
//   min ||L||_* + lambda ||N||_1  s.t.  M = L + N,
// solved with the inexact augmented Lagrange multiplier method.

#include "uos/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace uos {

struct RpcaConfig {
  std::optional<double> lambda;  // default 1 / sqrt(max(rows, cols))
  double residual_tol = 1e-7;
  int max_iterations = 500;
  double rho = 1.5;  // penalty growth factor

  void validate() const;
  double lambda_for(Eigen::Index rows, Eigen::Index cols) const;
};

// U * shrink(S, tau) * V^T.
RealMatrix singular_value_threshold(const RealMatrix& m, double tau);

// Per-iteration diagnostics.
struct RpcaTrace {
  std::vector<double> objective;  // ||L||_* + lambda ||N||_1
  std::vector<double> residual;   // ||M - L - N||_F / max(1, ||M||_F)
};

RpcaDecomposition rpca_decompose(const RealMatrix& m, const RpcaConfig& cfg,
                                 RpcaTrace* trace = nullptr);

enum class RpcaDomain { Log, Raw };

inline constexpr double kLogFloor = 1e-10;

struct EnhanceResult {
  RealMatrix posteriors;
  std::vector<int> skipped_classes;  // empty or single-frame
  std::vector<int> unconverged_classes;
  std::vector<std::string> warnings;
};

// Decomposes each class's frames (log-posteriors by default), keeps the
// low-rank part, maps back and renormalizes rows onto the simplex. Rows keep
// their original frame positions.
EnhanceResult rpca_enhance_by_class(const RealMatrix& z, const ClassAlignment& align,
                                    const RpcaConfig& cfg, RpcaDomain domain = RpcaDomain::Log,
                                    unsigned threads = 0);

}  // namespace uos
