#include "uos/sparse_coding.hpp"

#include "uos/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uos {

namespace {

double group_l2_sum(const RealVector& alpha, const GroupLayout& layout) {
  double s = 0.0;
  for (const auto& g : layout.groups()) s += alpha.segment(g.offset, g.size).norm();
  return s;
}

void check_dims(const Eigen::Ref<const RealVector>& z, const GroupedDictionary& dict) {
  if (z.size() != dict.dim())
    throw Error(ErrorCode::DimensionMismatch, "frame has dimension " + std::to_string(z.size()) +
                                                  ", dictionary expects " +
                                                  std::to_string(dict.dim()));
  if (!z.allFinite()) throw Error(ErrorCode::NonFinite, "frame contains NaN or Inf");
}

}  // namespace

double coding_objective(const RealVector& z, const GroupedDictionary& dict, const RealVector& alpha,
                        double lambda1, double lambda2) {
  const double fit = (z - dict.atoms() * alpha).squaredNorm();
  double reg = lambda1 * alpha.lpNorm<1>();
  if (lambda2 != 0.0) reg += lambda2 * group_l2_sum(alpha, dict.layout());
  return fit + reg;
}

double spectral_norm_squared(const AtomMatrix& atoms) {
  const Eigen::Index n = atoms.cols();
  if (n == 0) return 0.0;
  RealVector v = RealVector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double estimate = 0.0;
  for (int it = 0; it < 20; ++it) {
    RealVector w = atoms.transpose() * (atoms * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double previous = estimate;
    estimate = norm;
    v = w / norm;
    if (it > 0 && std::abs(estimate - previous) <= 1e-6 * estimate) break;
  }
  return estimate;
}

SolverReport lasso_solve(const AtomMatrix& atoms, const Eigen::Ref<const RealVector>& z,
                         double lambda1, double tolerance, int max_iterations, RealVector& alpha) {
  if (!(lambda1 > 0.0)) throw Error(ErrorCode::InvalidArgument, "lasso requires lambda1 > 0");
  const Eigen::Index n = atoms.cols();
  if (alpha.size() != n) alpha = RealVector::Zero(n);
  const double lambda = 0.5 * lambda1;
  const double z_sq = z.squaredNorm();
  const double gap_target = tolerance * std::max(1.0, z_sq);

  RealVector col_sq(n);
  for (Eigen::Index j = 0; j < n; ++j) col_sq[j] = atoms.col(j).squaredNorm();
  for (Eigen::Index j = 0; j < n; ++j)
    if (col_sq[j] == 0.0) alpha[j] = 0.0;

  RealVector residual = z - atoms * alpha;
  SolverReport report;

  auto duality_gap = [&](double& primal) {
    const RealVector corr = atoms.transpose() * residual;
    const double max_corr = n > 0 ? corr.cwiseAbs().maxCoeff() : 0.0;
    const double scale = std::max(1.0, max_corr / lambda);
    const double r_sq = residual.squaredNorm();
    primal = 0.5 * r_sq + lambda * alpha.lpNorm<1>();
    // dual point theta = residual / scale
    const double dual = 0.5 * z_sq - 0.5 * (z - residual / scale).squaredNorm();
    return std::max(0.0, primal - dual);
  };

  double primal = 0.0;
  double gap = duality_gap(primal);
  int sweeps = 0;
  while (gap > gap_target && sweeps < max_iterations) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double old = alpha[j];
      const double rho = atoms.col(j).dot(residual) + col_sq[j] * old;
      const double updated = soft_threshold(rho, lambda) / col_sq[j];
      if (updated != old) {
        residual.noalias() -= (updated - old) * atoms.col(j);
        alpha[j] = updated;
      }
    }
    ++sweeps;
    residual = z - atoms * alpha;
    gap = duality_gap(primal);
  }
  report.iterations_used = sweeps;
  report.converged = gap <= gap_target;
  report.final_objective = 2.0 * primal;
  report.duality_gap_or_rel_change = 2.0 * gap;
  return report;
}

SparseEncoder::SparseEncoder(const GroupedDictionary& dict, CodingConfig cfg, CodingMode mode)
    : dict_(&dict), cfg_(cfg), mode_(mode) {
  cfg_.validate();
  if (mode_ == CodingMode::Lasso && !(cfg_.lambda1 > 0.0))
    throw Error(ErrorCode::InvalidArgument, "lasso requires lambda1 > 0");
  if (mode_ == CodingMode::Hilasso) {
    if (cfg_.lambda1 == 0.0 && cfg_.lambda2 == 0.0)
      throw Error(ErrorCode::InvalidArgument, "hierarchical lasso needs lambda1 or lambda2 > 0");
    lipschitz_ = spectral_norm_squared(dict.atoms());
  }
}

EncodeResult SparseEncoder::encode(const Eigen::Ref<const RealVector>& z) const {
  check_dims(z, *dict_);
  return mode_ == CodingMode::Lasso ? encode_lasso(z) : encode_hilasso(z);
}

EncodeResult SparseEncoder::encode_lasso(const Eigen::Ref<const RealVector>& z) const {
  RealVector alpha = RealVector::Zero(dict_->num_atoms());
  SolverReport report =
      lasso_solve(dict_->atoms(), z, cfg_.lambda1, cfg_.tolerance, cfg_.max_iterations, alpha);
  return EncodeResult{SparseCode(std::move(alpha), dict_->layout()), report};
}

EncodeResult SparseEncoder::encode_hilasso(const Eigen::Ref<const RealVector>& z) const {
  const AtomMatrix& atoms = dict_->atoms();
  const GroupLayout& layout = dict_->layout();
  const Eigen::Index n = atoms.cols();
  const double l1 = 0.5 * cfg_.lambda1;
  const double l2 = 0.5 * cfg_.lambda2;

  auto regularizer = [&](const RealVector& v) {
    double r = l1 * v.lpNorm<1>();
    if (l2 != 0.0) r += l2 * group_l2_sum(v, layout);
    return r;
  };
  auto smooth = [&](const RealVector& v) { return 0.5 * (atoms * v - z).squaredNorm(); };
  auto prox = [&](RealVector& v, double step) {
    const double t1 = step * l1;
    for (Eigen::Index j = 0; j < n; ++j) v[j] = soft_threshold(v[j], t1);
    if (l2 == 0.0) return;
    const double t2 = step * l2;
    for (const auto& g : layout.groups()) {
      auto seg = v.segment(g.offset, g.size);
      const double norm = seg.norm();
      if (norm <= t2)
        seg.setZero();
      else
        seg *= 1.0 - t2 / norm;
    }
  };

  RealVector x = RealVector::Zero(n);
  SolverReport report;
  double objective = smooth(x);
  if (lipschitz_ <= 0.0) {
    report.converged = true;
    report.final_objective = 2.0 * objective;
    return EncodeResult{SparseCode(std::move(x), layout), report};
  }

  double lip = lipschitz_;
  RealVector y = x;
  RealVector x_new(n);
  double t = 1.0;
  double rel_change = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < cfg_.max_iterations) {
    ++it;
    const RealVector fit_y = atoms * y - z;
    const double f_y = 0.5 * fit_y.squaredNorm();
    const RealVector grad = atoms.transpose() * fit_y;
    double f_new = 0.0;
    for (;;) {
      x_new = y - grad / lip;
      prox(x_new, 1.0 / lip);
      const RealVector diff = x_new - y;
      f_new = smooth(x_new);
      const double model = f_y + grad.dot(diff) + 0.5 * lip * diff.squaredNorm();
      if (f_new <= model + 1e-14 * std::abs(f_y)) break;
      lip *= 2.0;
    }
    const double obj_new = f_new + regularizer(x_new);
    if (obj_new > objective) {
      // momentum overshoot: restart from the last accepted iterate
      t = 1.0;
      y = x;
      continue;
    }
    rel_change = objective > 0.0 ? (objective - obj_new) / objective : 0.0;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_next) * (x_new - x);
    x = x_new;
    objective = obj_new;
    t = t_next;
    if (rel_change <= cfg_.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.iterations_used = it;
  report.final_objective = 2.0 * objective;
  report.duality_gap_or_rel_change = rel_change;
  return EncodeResult{SparseCode(std::move(x), layout), report};
}

EncodeResult lasso_encode(const RealVector& z, const GroupedDictionary& dict, const CodingConfig& cfg) {
  return SparseEncoder(dict, cfg, CodingMode::Lasso).encode(z);
}

EncodeResult hilasso_encode(const RealVector& z, const GroupedDictionary& dict,
                            const CodingConfig& cfg) {
  return SparseEncoder(dict, cfg, CodingMode::Hilasso).encode(z);
}

BatchCodes batch_encode(const RealMatrix& z, const GroupedDictionary& dict, const CodingConfig& cfg,
                        CodingMode mode, unsigned threads) {
  if (z.cols() != dict.dim())
    throw Error(ErrorCode::DimensionMismatch, "frames have " + std::to_string(z.cols()) +
                                                  " columns, dictionary expects " +
                                                  std::to_string(dict.dim()));
  const SparseEncoder encoder(dict, cfg, mode);
  const auto frames = static_cast<std::size_t>(z.rows());
  BatchCodes out{RealMatrix(z.rows(), dict.num_atoms()), std::vector<SolverReport>(frames),
                 dict.layout()};
  parallel_for(frames, threads, [&](std::size_t t) {
    const auto row = static_cast<Eigen::Index>(t);
    try {
      EncodeResult r = encoder.encode(z.row(row).transpose());
      out.codes.row(row) = r.code.coefficients().transpose();
      out.reports[t] = r.report;
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(t) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace uos
