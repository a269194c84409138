#include "uos/rpca.hpp"

#include "uos/parallel.hpp"
#include "uos/projection.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace uos {

namespace {

using ColMatrix = Eigen::MatrixXd;

struct ShrunkSvd {
  RealMatrix value;
  double nuclear_norm = 0.0;
};

ShrunkSvd shrink_singular_values(const RealMatrix& m, double tau) {
  Eigen::BDCSVD<ColMatrix> svd(ColMatrix(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::SvdFailure, "SVD did not converge");
  const RealVector s = svd.singularValues();
  if (!s.allFinite()) throw Error(ErrorCode::SvdFailure, "SVD produced non-finite values");
  Eigen::Index keep = 0;
  while (keep < s.size() && s[keep] > tau) ++keep;
  ShrunkSvd out{RealMatrix::Zero(m.rows(), m.cols()), 0.0};
  if (keep == 0) return out;
  const RealVector shrunk = s.head(keep).array() - tau;
  out.value = svd.matrixU().leftCols(keep) * shrunk.asDiagonal() *
              svd.matrixV().leftCols(keep).transpose();
  out.nuclear_norm = shrunk.sum();
  return out;
}

double spectral_norm(const RealMatrix& m) {
  Eigen::BDCSVD<ColMatrix> svd{ColMatrix(m)};
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::SvdFailure, "SVD did not converge");
  return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

RealMatrix soft_threshold_entries(const RealMatrix& m, double t) {
  return m.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

}  // namespace

void RpcaConfig::validate() const {
  if (lambda && !(*lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_rpca must be > 0");
  if (!(residual_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "residual_tol must be > 0");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(rho > 1.0)) throw Error(ErrorCode::InvalidArgument, "rho must be > 1");
}

double RpcaConfig::lambda_for(Eigen::Index rows, Eigen::Index cols) const {
  if (lambda) return *lambda;
  return 1.0 / std::sqrt(static_cast<double>(std::max(rows, cols)));
}

RealMatrix singular_value_threshold(const RealMatrix& m, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  require_finite(m, "matrix");
  return shrink_singular_values(m, tau).value;
}

RpcaDecomposition rpca_decompose(const RealMatrix& m, const RpcaConfig& cfg, RpcaTrace* trace) {
  cfg.validate();
  if (m.rows() < 2 || m.cols() < 2)
    throw Error(ErrorCode::InvalidArgument, "RPCA needs at least a 2 x 2 matrix");
  require_finite(m, "RPCA input");

  RpcaDecomposition out{m, RealMatrix::Zero(m.rows(), m.cols()),
                        RealMatrix::Zero(m.rows(), m.cols()), 0, false};
  const double lambda = cfg.lambda_for(m.rows(), m.cols());
  const double m_fro = m.norm();
  const double scale = std::max(1.0, m_fro);
  if (m_fro == 0.0) {
    out.converged = true;
    return out;
  }

  const double norm_two = spectral_norm(m);
  const double norm_inf = m.cwiseAbs().maxCoeff() / lambda;
  RealMatrix dual = m / std::max(norm_two, norm_inf);
  double mu = 1.25 / norm_two;
  const double mu_max = mu * 1e7;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    ShrunkSvd low = shrink_singular_values(m - out.sparse + dual / mu, 1.0 / mu);
    out.low_rank = std::move(low.value);
    out.sparse = soft_threshold_entries(m - out.low_rank + dual / mu, lambda / mu);
    const RealMatrix gap = m - out.low_rank - out.sparse;
    dual += mu * gap;
    mu = std::min(mu * cfg.rho, mu_max);
    const double residual = gap.norm() / scale;
    out.iterations_used = it;
    if (trace) {
      trace->objective.push_back(low.nuclear_norm + lambda * out.sparse.cwiseAbs().sum());
      trace->residual.push_back(residual);
    }
    if (residual <= cfg.residual_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

EnhanceResult rpca_enhance_by_class(const RealMatrix& z, const ClassAlignment& align,
                                    const RpcaConfig& cfg, RpcaDomain domain, unsigned threads) {
  align.require_matches(z);
  require_finite(z, "posteriors");
  cfg.validate();
  const auto by_class = align.frames_by_class();
  EnhanceResult out{z, {}, {}, {}};
  std::vector<char> skipped(by_class.size(), 0);
  std::vector<char> unconverged(by_class.size(), 0);

  parallel_for(by_class.size(), threads, [&](std::size_t l) {
    const auto& rows = by_class[l];
    if (rows.size() < 2 || z.cols() < 2) {
      skipped[l] = 1;
      return;
    }
    RealMatrix block = gather_rows(z, rows);
    if (domain == RpcaDomain::Log) {
      if ((block.array() < 0.0).any())
        throw Error(ErrorCode::NegativeEntry, "class " + std::to_string(l) + " has negative posteriors");
      block = block.cwiseMax(kLogFloor).array().log().matrix();
    }
    const RpcaDecomposition dec = rpca_decompose(block, cfg);
    unconverged[l] = dec.converged ? 0 : 1;
    RealMatrix enhanced = dec.low_rank;
    if (domain == RpcaDomain::Log) enhanced = enhanced.array().exp().matrix();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto p = to_simplex(enhanced.row(static_cast<Eigen::Index>(i)).transpose());
      // rows of distinct classes never overlap
      if (p) out.posteriors.row(rows[i]) = p->values().transpose();
    }
  });

  for (std::size_t l = 0; l < by_class.size(); ++l) {
    if (skipped[l]) {
      out.skipped_classes.push_back(static_cast<int>(l));
      out.warnings.push_back("class " + std::to_string(l) + " has " +
                             std::to_string(by_class[l].size()) +
                             " frame(s); passed through unchanged");
    }
    if (unconverged[l]) {
      out.unconverged_classes.push_back(static_cast<int>(l));
      out.warnings.push_back("class " + std::to_string(l) + ": RPCA hit the iteration limit");
    }
  }
  return out;
}

}  // namespace uos
