#include "uos/synth.hpp"

#include "uos/random.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

namespace uos {

namespace {

constexpr int kMaxAttempts = 100;
constexpr int kMaxCoefficientDraws = 1000;

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

// Orthonormal basis of span(columns), assuming full column rank.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& columns) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(columns);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(columns.rows(), columns.cols());
  // fix signs so the basis is a deterministic function of the input
  const Eigen::MatrixXd r = qr.matrixQR().topRows(columns.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index n, Rng& rng) {
  return orthonormalize(gaussian_matrix(n, n, rng));
}

std::optional<Eigen::Index> anchor_of(std::size_t label, Eigen::Index m) {
  if (static_cast<Eigen::Index>(label) < m) return static_cast<Eigen::Index>(label);
  return std::nullopt;
}

SubspaceModel block_subspaces(const SynthConfig& cfg, Rng& rng) {
  const Eigen::Index m = cfg.m;
  const Eigen::Index r = cfg.rank;
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(m - cfg.classes));
  std::iota(pool.begin(), pool.end(), Eigen::Index{cfg.classes});
  std::shuffle(pool.begin(), pool.end(), rng);

  SubspaceModel out{SubspaceSpec{m, {}}, {}};
  std::size_t next = 0;
  for (int l = 0; l < cfg.classes; ++l) {
    Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(m, r);
    coords(l, 0) = 1.0;
    for (Eigen::Index k = 1; k < r; ++k) coords(pool[next++], k) = 1.0;
    out.spec.bases.push_back(coords * random_orthogonal(r, rng));
    out.directions.push_back(std::move(coords));
  }
  return out;
}

std::optional<SubspaceModel> random_subspaces(const SynthConfig& cfg, Eigen::Index support, Rng& rng) {
  SubspaceModel out{SubspaceSpec{cfg.m, {}}, {}};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < cfg.classes; ++l) {
    const auto anchor = anchor_of(static_cast<std::size_t>(l), cfg.m);
    Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(cfg.m, cfg.rank);
    std::vector<Eigen::Index> coords;
    for (Eigen::Index i = 0; i < cfg.m; ++i)
      if (!anchor || i != *anchor) coords.push_back(i);
    for (Eigen::Index k = 0; k < cfg.rank; ++k) {
      if (k == 0 && anchor) {
        columns(*anchor, 0) = 1.0;
        continue;
      }
      std::shuffle(coords.begin(), coords.end(), rng);
      const auto nnz = std::min<std::size_t>(static_cast<std::size_t>(support), coords.size());
      for (std::size_t i = 0; i < nnz; ++i) columns(coords[i], k) = std::abs(normal(rng)) + 0.1;
      columns.col(k).normalize();
    }
    if (Eigen::FullPivLU<Eigen::MatrixXd>(columns).rank() < cfg.rank) return std::nullopt;
    out.spec.bases.push_back(orthonormalize(columns));
    out.directions.push_back(std::move(columns));
  }
  for (std::size_t i = 0; i < out.spec.bases.size(); ++i)
    for (std::size_t j = i + 1; j < out.spec.bases.size(); ++j)
      if (min_principal_angle_deg(out.spec.bases[i], out.spec.bases[j]) < cfg.subspace_angle_min)
        return std::nullopt;
  return out;
}

// Same-class runs with lengths in [1, max_run]; consecutive runs differ in
// class while more than one class has frames left.
std::vector<int> run_structured_labels(const SynthConfig& cfg, int max_run, Rng& rng) {
  std::vector<Eigen::Index> remaining(static_cast<std::size_t>(cfg.classes), cfg.frames_per_class);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(cfg.classes * cfg.frames_per_class));
  std::uniform_int_distribution<int> run_length(1, std::max(1, max_run));
  int previous = -1;
  for (;;) {
    std::vector<int> candidates;
    for (int l = 0; l < cfg.classes; ++l)
      if (remaining[static_cast<std::size_t>(l)] > 0 && l != previous) candidates.push_back(l);
    if (candidates.empty()) {
      if (previous >= 0 && remaining[static_cast<std::size_t>(previous)] > 0)
        candidates.push_back(previous);
      else
        break;
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const int l = candidates[pick(rng)];
    auto& left = remaining[static_cast<std::size_t>(l)];
    const Eigen::Index len = std::min<Eigen::Index>(left, run_length(rng));
    for (Eigen::Index k = 0; k < len; ++k) labels.push_back(l);
    left -= len;
    previous = l;
  }
  return labels;
}

}  // namespace

void SynthConfig::validate() const {
  if (m < 2 || classes < 1 || rank < 1 || frames_per_class < 1)
    throw Error(ErrorCode::InvalidArgument, "synth needs m >= 2, classes >= 1, rank >= 1, frames >= 1");
  if (rank >= m) throw Error(ErrorCode::InvalidArgument, "rank must be below the ambient dimension");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(subspace_angle_min > 0.0 && subspace_angle_min <= 90.0))
    throw Error(ErrorCode::InvalidArgument, "subspace angle must be in (0, 90]");
}

double min_principal_angle_deg(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  const double largest = std::clamp(svd.singularValues()[0], 0.0, 1.0);
  return std::acos(largest) * 180.0 / std::numbers::pi;
}

SubspaceModel generate_subspaces(const SynthConfig& cfg, const SynthShape& shape) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0));
  if (cfg.classes * cfg.rank <= cfg.m) return block_subspaces(cfg, rng);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt)
    if (auto model = random_subspaces(cfg, shape.support, rng)) return std::move(*model);
  throw Error(ErrorCode::AngleInfeasible,
              "no set of " + std::to_string(cfg.classes) + " subspaces of dimension " +
                  std::to_string(cfg.rank) + " in R^" + std::to_string(cfg.m) +
                  " met the minimum angle of " + std::to_string(cfg.subspace_angle_min) +
                  " degrees after " + std::to_string(kMaxAttempts) + " attempts");
}

RealVector latent_to_simplex(const RealVector& x, double epsilon) {
  const double shift = std::abs(x.minCoeff()) + epsilon;
  RealVector p = x.array() + shift;
  return p / p.sum();
}

SynthDataset generate_dataset(const SubspaceModel& model, const SynthConfig& cfg, std::uint64_t stream,
                              const SynthShape& shape) {
  cfg.validate();
  const SubspaceSpec& spec = model.spec;
  spec.validate();
  if (model.directions.size() != spec.num_classes())
    throw Error(ErrorCode::DimensionMismatch, "subspace model has no directions for some class");
  if (spec.num_classes() != static_cast<std::size_t>(cfg.classes) || spec.ambient_dim != cfg.m)
    throw Error(ErrorCode::DimensionMismatch, "subspace spec does not match the config");

  const std::uint64_t base = derive_seed(cfg.seed, 1 + stream);
  Rng order_rng(derive_seed(base, 0));
  const std::vector<int> labels = run_structured_labels(cfg, shape.max_run, order_rng);
  const auto total = static_cast<Eigen::Index>(labels.size());

  // Per-class latent frames, drawn in class order from per-class streams.
  std::vector<RealMatrix> latent_by_class;
  std::vector<RealMatrix> noise_by_class;
  for (int l = 0; l < cfg.classes; ++l) {
    const Eigen::MatrixXd& dirs = model.directions[static_cast<std::size_t>(l)];
    Rng rng(derive_seed(base, 1 + static_cast<std::uint64_t>(l)));
    Rng noise_rng(derive_seed(base, 100001 + static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::normal_distribution<double> noise_normal(0.0, 1.0);
    const auto anchor = anchor_of(static_cast<std::size_t>(l), cfg.m);

    RealMatrix latent(cfg.frames_per_class, cfg.m);
    RealMatrix noise(cfg.frames_per_class, cfg.m);
    for (Eigen::Index f = 0; f < cfg.frames_per_class; ++f) {
      RealVector w = RealVector::Zero(dirs.cols());
      bool accepted = false;
      for (int draw = 0; draw < kMaxCoefficientDraws && !accepted; ++draw) {
        w[0] = shape.anchor;
        for (Eigen::Index k = 1; k < w.size(); ++k) w[k] = shape.spread * std::abs(normal(rng));
        if (!anchor) {
          accepted = true;
        } else {
          RealVector others = dirs * w;
          const double top = others[*anchor];
          others[*anchor] = -std::numeric_limits<double>::infinity();
          accepted = top - others.maxCoeff() >= shape.min_margin;
        }
      }
      if (!accepted) w.tail(w.size() - 1).setZero();
      const RealVector x = dirs * w;
      latent.row(f) = x.transpose();
      for (Eigen::Index i = 0; i < cfg.m; ++i) noise(f, i) = cfg.noise_sigma * noise_normal(noise_rng);
    }
    latent_by_class.push_back(std::move(latent));
    noise_by_class.push_back(std::move(noise));
  }

  SynthDataset out{RealMatrix(total, cfg.m), RealMatrix(total, cfg.m), RealMatrix(total, cfg.m),
                   ClassAlignment(labels, cfg.classes), spec};
  std::vector<Eigen::Index> used(static_cast<std::size_t>(cfg.classes), 0);
  for (Eigen::Index t = 0; t < total; ++t) {
    const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(t)]);
    const Eigen::Index f = used[l]++;
    const RealVector x = latent_by_class[l].row(f).transpose();
    out.latent.row(t) = x.transpose();
    out.clean.row(t) = latent_to_simplex(x, shape.epsilon).transpose();
    if (cfg.noise_sigma == 0.0) {
      out.noisy.row(t) = out.clean.row(t);
    } else {
      const RealVector noisy = x + RealVector(noise_by_class[l].row(f).transpose());
      out.noisy.row(t) = latent_to_simplex(noisy, shape.epsilon).transpose();
    }
  }
  return out;
}

SynthSplit generate_split(const SynthConfig& cfg, Eigen::Index test_frames_per_class,
                          const SynthShape& shape) {
  const SubspaceModel model = generate_subspaces(cfg, shape);
  SynthConfig test_cfg = cfg;
  test_cfg.frames_per_class = test_frames_per_class;
  return SynthSplit{generate_dataset(model, cfg, 0, shape), generate_dataset(model, test_cfg, 1, shape)};
}

}  // namespace uos
