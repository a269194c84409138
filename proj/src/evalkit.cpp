#include "uos/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uos {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Scores this close to the best count as tied. Mathematically equal sums
// taken in different orders can differ in the last bits.
bool ties_with(double candidate, double best) {
  if (best == kNegInf) return candidate == kNegInf;
  return candidate >= best - kViterbiTieTolerance * std::max(1.0, std::abs(best));
}

// Lowest index whose score ties with the maximum.
int lowest_tied(const RealVector& scores) {
  const double top = scores.maxCoeff();
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (ties_with(scores[i], top)) return static_cast<int>(i);
  return 0;
}

void require_stochastic(const Eigen::Ref<const RealVector>& row, const std::string& what) {
  if (!row.allFinite() || (row.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, what + " has negative or non-finite probabilities");
  if (std::abs(row.sum() - 1.0) > kSimplexTolerance)
    throw Error(ErrorCode::NotNormalized, what + " sums to " + std::to_string(row.sum()));
}

}  // namespace

TransitionModel::TransitionModel(Eigen::MatrixXd transitions, RealVector initial)
    : transitions_(std::move(transitions)), initial_(std::move(initial)) {
  const Eigen::Index n = transitions_.rows();
  if (n < 1 || transitions_.cols() != n || initial_.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "transition model must be L x L with L initial values");
  for (Eigen::Index i = 0; i < n; ++i)
    require_stochastic(transitions_.row(i).transpose(), "transition row " + std::to_string(i));
  require_stochastic(initial_, "initial distribution");
  log_transitions_ = transitions_.unaryExpr(&safe_log);
  log_initial_ = initial_.unaryExpr(&safe_log);
}

TransitionModel TransitionModel::self_loop(int states, double self_loop) {
  if (states < 1) throw Error(ErrorCode::InvalidArgument, "need at least one state");
  if (!(self_loop >= 0.0 && self_loop <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "self-loop probability must be in [0, 1]");
  Eigen::MatrixXd trans(states, states);
  if (states == 1) {
    trans(0, 0) = 1.0;
  } else {
    trans.setConstant((1.0 - self_loop) / (states - 1));
    trans.diagonal().setConstant(self_loop);
  }
  return TransitionModel(trans, RealVector::Constant(states, 1.0 / states));
}

double frame_error(const RealMatrix& z, const ClassAlignment& align) {
  align.require_matches(z);
  if (z.rows() == 0) return 0.0;
  Eigen::Index wrong = 0;
  for (Eigen::Index t = 0; t < z.rows(); ++t)
    if (argmax(z.row(t).transpose()) != align[static_cast<std::size_t>(t)]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(z.rows());
}

Eigen::MatrixXd emission_scores(const RealMatrix& z, const std::optional<RealVector>& priors) {
  if (!z.allFinite() || (z.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "posteriors must be finite and non-negative");
  Eigen::MatrixXd scores = z.unaryExpr(&safe_log);
  if (priors) {
    if (priors->size() != z.cols())
      throw Error(ErrorCode::DimensionMismatch, "prior vector length differs from state count");
    if ((priors->array() <= 0.0).any())
      throw Error(ErrorCode::InvalidArgument, "priors must be positive");
    for (Eigen::Index s = 0; s < z.cols(); ++s) scores.col(s).array() -= std::log((*priors)[s]);
  }
  return scores;
}

std::vector<int> viterbi_decode(const RealMatrix& z, const TransitionModel& tm,
                                const std::optional<RealVector>& priors) {
  const int n = tm.states();
  if (z.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "posteriors have " + std::to_string(z.cols()) +
                                                  " columns, model has " + std::to_string(n) +
                                                  " states");
  const Eigen::Index frames = z.rows();
  if (frames == 0) return {};
  const Eigen::MatrixXd emit = emission_scores(z, priors);
  const Eigen::MatrixXd& log_a = tm.log_transitions();

  RealVector delta(n);
  for (int s = 0; s < n; ++s) delta[s] = tm.log_initial()[s] + emit(0, s);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(frames, n);
  back.row(0).setConstant(-1);
  RealVector next(n);
  RealVector cand(n);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < n; ++p) cand[p] = delta[p] + log_a(p, s);
      const int best = lowest_tied(cand);
      next[s] = cand[best] + emit(t, s);
      back(t, s) = best;
    }
    delta.swap(next);
  }

  const int last = lowest_tied(delta);
  if (delta[last] == kNegInf) throw Error(ErrorCode::AllPathsImpossible, "every path has zero probability");

  std::vector<int> path(static_cast<std::size_t>(frames));
  path.back() = last;
  for (Eigen::Index t = frames - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] = back(t, path[static_cast<std::size_t>(t)]);
  return path;
}

double path_score(const RealMatrix& z, const TransitionModel& tm, const std::vector<int>& path,
                  const std::optional<RealVector>& priors) {
  if (static_cast<Eigen::Index>(path.size()) != z.rows() || z.cols() != tm.states())
    throw Error(ErrorCode::DimensionMismatch, "path, posteriors and model disagree in shape");
  if (path.empty()) return 0.0;
  const Eigen::MatrixXd emit = emission_scores(z, priors);
  double score = tm.log_initial()[path[0]] + emit(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t)
    score = score + tm.log_transitions()(path[t - 1], path[t]) +
            emit(static_cast<Eigen::Index>(t), path[t]);
  return score;
}

EditCounts edit_distance_rate(const std::vector<int>& hyp, const std::vector<int>& ref) {
  if (ref.empty()) throw Error(ErrorCode::EmptyReference, "reference sequence is empty");
  const std::size_t rows = ref.size() + 1;
  const std::size_t cols = hyp.size() + 1;
  std::vector<int> cost(rows * cols);
  auto at = [&](std::size_t i, std::size_t j) -> int& { return cost[i * cols + j]; };
  for (std::size_t i = 0; i < rows; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j < cols; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i < rows; ++i) {
    for (std::size_t j = 1; j < cols; ++j) {
      const int diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }

  EditCounts out;
  out.reference_length = static_cast<int>(ref.size());
  std::size_t i = ref.size();
  std::size_t j = hyp.size();
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++out.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++out.insertions;
      --j;
    } else {
      ++out.deletions;
      --i;
    }
  }
  out.rate = static_cast<double>(out.total()) / static_cast<double>(ref.size());
  return out;
}

std::vector<int> collapse_runs(const std::vector<int>& labels) {
  std::vector<int> out;
  for (int l : labels)
    if (out.empty() || out.back() != l) out.push_back(l);
  return out;
}

double relative_change(double before, double after) {
  if (before == after) return 0.0;
  if (before == 0.0) return std::numeric_limits<double>::infinity();
  return (after - before) / before;
}

ComparisonReport compare_systems(const RealMatrix& before, const RealMatrix& after,
                                 const ClassAlignment& align, const TransitionModel& tm,
                                 const std::optional<RealVector>& priors) {
  if (before.rows() != after.rows() || before.cols() != after.cols())
    throw Error(ErrorCode::DimensionMismatch, "before and after posteriors differ in shape");
  align.require_matches(before);
  const std::vector<int> reference = collapse_runs(align.labels());

  auto score = [&](const RealMatrix& z) {
    SystemScore s;
    s.frame_error = frame_error(z, align);
    s.decoded = viterbi_decode(z, tm, priors);
    s.label_errors = edit_distance_rate(collapse_runs(s.decoded), reference);
    return s;
  };
  ComparisonReport report{score(before), score(after), 0.0, 0.0};
  report.frame_error_relative_change = relative_change(report.before.frame_error, report.after.frame_error);
  report.label_error_relative_change =
      relative_change(report.before.label_errors.rate, report.after.label_errors.rate);
  return report;
}

}  // namespace uos
