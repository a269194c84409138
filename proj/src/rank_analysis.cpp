#include "uos/rank_analysis.hpp"

#include "uos/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <numeric>

namespace uos {

namespace {

// Guards cumulative-share comparisons against SVD rounding.
constexpr double kShareSlack = 1e-12;

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<Eigen::Index> sample_rows(const std::vector<Eigen::Index>& rows, Eigen::Index limit,
                                      Rng& rng) {
  if (static_cast<Eigen::Index>(rows.size()) <= limit) return rows;
  std::vector<Eigen::Index> pool = rows;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(limit));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

int effective_rank(const RealMatrix& m, double variability, VariabilityMode mode) {
  if (m.rows() < 1 || m.cols() < 1) throw Error(ErrorCode::EmptyInput, "matrix is empty");
  if (!(variability > 0.0 && variability <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "variability must be in (0, 1]");
  require_finite(m, "matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(m)};
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::SvdFailure, "SVD did not converge");
  RealVector energy = svd.singularValues();
  if (mode == VariabilityMode::Squared) energy = energy.array().square();
  const double total = energy.sum();
  if (total <= 0.0) return 0;
  double running = 0.0;
  for (Eigen::Index k = 0; k < energy.size(); ++k) {
    running += energy[k];
    if (running / total >= variability - kShareSlack) return static_cast<int>(k + 1);
  }
  return static_cast<int>(energy.size());
}

RealMatrix log_transform(const RealMatrix& z, double floor) {
  if ((z.array() < 0.0).any()) throw Error(ErrorCode::NegativeEntry, "log_transform needs entries >= 0");
  return z.cwiseMax(floor).array().log().matrix();
}

CorrectnessSplit split_correct_incorrect(const RealMatrix& z, const ClassAlignment& align) {
  align.require_matches(z);
  const auto classes = static_cast<std::size_t>(align.num_classes());
  CorrectnessSplit out{std::vector<std::vector<Eigen::Index>>(classes),
                       std::vector<std::vector<Eigen::Index>>(classes)};
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const int label = align[static_cast<std::size_t>(t)];
    auto& bucket = argmax(z.row(t).transpose()) == label ? out.correct : out.incorrect;
    bucket[static_cast<std::size_t>(label)].push_back(t);
  }
  return out;
}

RankReport rank_table(const RealMatrix& z, const ClassAlignment& align, const RankOptions& options) {
  align.require_matches(z);
  if (options.sample_per_class < 1)
    throw Error(ErrorCode::InvalidArgument, "sample size must be >= 1");
  const CorrectnessSplit split = split_correct_incorrect(z, align);
  const auto by_class = align.frames_by_class();

  RankReport report;
  std::vector<double> correct_ranks, incorrect_ranks, all_ranks;
  for (std::size_t l = 0; l < by_class.size(); ++l) {
    Rng rng(derive_seed(options.seed, l));
    ClassRank row;
    row.label = static_cast<int>(l);
    row.correct_frames = static_cast<Eigen::Index>(split.correct[l].size());
    row.incorrect_frames = static_cast<Eigen::Index>(split.incorrect[l].size());

    auto bucket_rank = [&](const std::vector<Eigen::Index>& rows,
                           const char* name) -> std::optional<double> {
      const auto sampled = sample_rows(rows, options.sample_per_class, rng);
      if (sampled.size() < 2) {
        report.skipped.push_back("class " + std::to_string(l) + " " + name + ": " +
                                 std::to_string(rows.size()) + " frame(s)");
        return std::nullopt;
      }
      return effective_rank(log_transform(gather_rows(z, sampled)), options.variability,
                            options.mode);
    };
    row.correct = bucket_rank(split.correct[l], "correct");
    row.incorrect = bucket_rank(split.incorrect[l], "incorrect");
    row.all = bucket_rank(by_class[l], "all");
    if (row.correct) correct_ranks.push_back(*row.correct);
    if (row.incorrect) incorrect_ranks.push_back(*row.incorrect);
    if (row.all) all_ranks.push_back(*row.all);
    report.classes.push_back(row);
  }
  report.mean_correct = mean_of(correct_ranks);
  report.mean_incorrect = mean_of(incorrect_ranks);
  report.mean_all = mean_of(all_ranks);
  return report;
}

RealMatrix alpha_sum_vectors(const RealMatrix& codes, const GroupLayout& layout) {
  if (codes.cols() != layout.total())
    throw Error(ErrorCode::DimensionMismatch, "codes do not match the group layout");
  RealMatrix out(codes.rows(), static_cast<Eigen::Index>(layout.num_groups()));
  for (std::size_t g = 0; g < layout.num_groups(); ++g) {
    const Group& grp = layout.group(g);
    out.col(static_cast<Eigen::Index>(g)) =
        codes.middleCols(grp.offset, grp.size).cwiseAbs().rowwise().sum();
  }
  return out;
}

AlphaSumRanks alpha_sum_rank(const RealMatrix& codes, const GroupLayout& layout,
                             const ClassAlignment& align, double variability,
                             VariabilityMode mode) {
  align.require_matches(codes);
  const RealMatrix sums = alpha_sum_vectors(codes, layout);
  const auto by_class = align.frames_by_class();
  AlphaSumRanks out;
  out.ranks.resize(by_class.size());
  for (std::size_t l = 0; l < by_class.size(); ++l) {
    if (by_class[l].empty()) {
      out.skipped.push_back(static_cast<int>(l));
      continue;
    }
    const RealMatrix stack = gather_rows(sums, by_class[l]);
    if (stack.isZero(0.0)) {
      out.skipped.push_back(static_cast<int>(l));
      continue;
    }
    if (by_class[l].size() == 1) out.degenerate.push_back(static_cast<int>(l));
    out.ranks[l] = effective_rank(stack, variability, mode);
  }
  return out;
}

}  // namespace uos
