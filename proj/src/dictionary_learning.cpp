#include "uos/dictionary_learning.hpp"

#include "uos/parallel.hpp"
#include "uos/random.hpp"
#include "uos/sparse_coding.hpp"

#include <algorithm>
#include <numeric>

namespace uos {

namespace {

constexpr double kDeadAtomThreshold = 1e-10;

double surrogate_objective(const RealMatrix& frames, const AtomMatrix& atoms,
                           const Eigen::MatrixXd& codes, double lambda) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    total += (frames.row(t).transpose() - atoms * codes.col(t)).squaredNorm();
    total += lambda * codes.col(t).lpNorm<1>();
  }
  return total;
}

void update_atoms(AtomMatrix& atoms, const Eigen::MatrixXd& a, const AtomMatrix& b) {
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const double ajj = a(j, j);
    if (ajj < kDeadAtomThreshold) continue;
    RealVector u = atoms.col(j) + (b.col(j) - atoms * a.col(j)) / ajj;
    const double norm = u.norm();
    if (norm > 1.0) u /= norm;
    atoms.col(j) = u;
  }
}

}  // namespace

AtomMatrix initial_atoms(const RealMatrix& frames, Eigen::Index atoms, std::uint64_t seed) {
  const Eigen::Index k = std::min(atoms, frames.rows());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  AtomMatrix out(frames.cols(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    RealVector d = frames.row(order[static_cast<std::size_t>(j)]).transpose();
    const double norm = d.norm();
    if (norm > 0.0) d /= norm;
    out.col(j) = d;
  }
  return out;
}

ClassDictionaryResult learn_class_dictionary(const RealMatrix& frames, const LearnerConfig& cfg,
                                             int label) {
  if (frames.rows() < 1) throw Error(ErrorCode::EmptyInput, "class has no frames");
  if (frames.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "frames have no columns");
  if (cfg.atoms < 1) throw Error(ErrorCode::InvalidArgument, "atom count must be >= 1");
  if (cfg.epochs < 0 || cfg.batch_size < 1)
    throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0 and batch size >= 1");
  cfg.coding.validate();
  require_finite(frames, "training frames");

  std::vector<std::string> warnings;
  const Eigen::Index frames_count = frames.rows();
  if (cfg.atoms > frames_count) {
    warnings.push_back("class " + std::to_string(label) + ": " + std::to_string(frames_count) +
                       " frames < " + std::to_string(cfg.atoms) + " atoms; group capped at " +
                       std::to_string(frames_count));
  }

  Rng rng(cfg.seed);
  AtomMatrix atoms = initial_atoms(frames, cfg.atoms, rng());
  const Eigen::Index k = atoms.cols();
  const Eigen::Index m = frames.cols();
  const double lambda = cfg.coding.lambda1;

  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(k, frames_count);
  LearnerState state{Eigen::MatrixXd::Zero(k, k), AtomMatrix::Zero(m, k), 0, cfg.seed};

  std::vector<double> objectives{surrogate_objective(frames, atoms, codes, lambda)};
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames_count));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Eigen::MatrixXd previous(k, static_cast<Eigen::Index>(stop - start));
      for (std::size_t i = start; i < stop; ++i)
        previous.col(static_cast<Eigen::Index>(i - start)) = codes.col(order[i]);

      parallel_for(stop - start, cfg.threads, [&](std::size_t i) {
        const Eigen::Index t = order[start + i];
        RealVector alpha = codes.col(t);
        lasso_solve(atoms, frames.row(t).transpose(), lambda, cfg.coding.tolerance,
                    cfg.coding.max_iterations, alpha);
        codes.col(t) = alpha;
      });

      for (std::size_t i = start; i < stop; ++i) {
        const Eigen::Index t = order[i];
        const RealVector& old = previous.col(static_cast<Eigen::Index>(i - start));
        const RealVector fresh = codes.col(t);
        state.accum_A.noalias() += fresh * fresh.transpose() - old * old.transpose();
        state.accum_B.noalias() += frames.row(t).transpose() * (fresh - old).transpose();
      }
      state.samples_seen += static_cast<long long>(stop - start);
      update_atoms(atoms, state.accum_A, state.accum_B);
    }

    // Exact statistics from the stored codes; removes incremental drift.
    state.accum_A.noalias() = codes * codes.transpose();
    state.accum_B.noalias() = frames.transpose() * codes.transpose();

    std::vector<Eigen::Index> dead;
    for (Eigen::Index j = 0; j < k; ++j)
      if (state.accum_A(j, j) < kDeadAtomThreshold) dead.push_back(j);
    if (!dead.empty()) {
      std::vector<std::pair<double, Eigen::Index>> errors;
      errors.reserve(static_cast<std::size_t>(frames_count));
      for (Eigen::Index t = 0; t < frames_count; ++t)
        errors.emplace_back((frames.row(t).transpose() - atoms * codes.col(t)).squaredNorm(), t);
      std::stable_sort(errors.begin(), errors.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t i = 0; i < dead.size(); ++i) {
        const Eigen::Index j = dead[i];
        RealVector d = frames.row(errors[i % errors.size()].second).transpose();
        const double norm = d.norm();
        if (norm > 1.0) d /= norm;
        atoms.col(j) = d;
        codes.row(j).setZero();
      }
      state.accum_A.noalias() = codes * codes.transpose();
      state.accum_B.noalias() = frames.transpose() * codes.transpose();
    }
    objectives.push_back(surrogate_objective(frames, atoms, codes, lambda));
  }

  return ClassDictionaryResult{GroupedDictionary(std::move(atoms), GroupLayout::single(k, label)),
                               std::move(state), std::move(objectives), std::move(warnings)};
}

DictionaryResult learn_all(const RealMatrix& z, const ClassAlignment& align, const LearnerConfig& cfg) {
  align.require_matches(z);
  const auto by_class = align.frames_by_class();
  const auto classes = by_class.size();

  std::vector<std::optional<ClassDictionaryResult>> parts(classes);
  // Classes run one after another; frame coding inside a class uses the pool.
  for (std::size_t l = 0; l < classes; ++l) {
    if (by_class[l].empty()) continue;
    LearnerConfig class_cfg = cfg;
    class_cfg.seed = derive_seed(cfg.seed, l);
    parts[l] = learn_class_dictionary(gather_rows(z, by_class[l]), class_cfg, static_cast<int>(l));
  }

  std::vector<Eigen::Index> sizes;
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < classes; ++l) {
    const Eigen::Index s = parts[l] ? parts[l]->dictionary.num_atoms() : 1;
    sizes.push_back(s);
    total += s;
  }
  AtomMatrix atoms = AtomMatrix::Zero(z.cols(), total);
  DictionaryResult out{GroupedDictionary(AtomMatrix::Zero(z.cols(), 1), GroupLayout::single(1)),
                       {}, std::vector<std::vector<double>>(classes), {}};
  Eigen::Index col = 0;
  for (std::size_t l = 0; l < classes; ++l) {
    if (parts[l]) {
      atoms.middleCols(col, sizes[l]) = parts[l]->dictionary.atoms();
      out.epoch_objectives[l] = parts[l]->epoch_objectives;
      for (auto& w : parts[l]->warnings) out.warnings.push_back(std::move(w));
    } else {
      out.empty_classes.push_back(static_cast<int>(l));
      out.warnings.push_back("class " + std::to_string(l) +
                             " has no frames; group holds a single zero atom");
    }
    col += sizes[l];
  }
  out.dictionary = GroupedDictionary(std::move(atoms), GroupLayout::from_sizes(sizes));
  return out;
}

}  // namespace uos
