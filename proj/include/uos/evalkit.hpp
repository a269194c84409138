#pragma once

// Frame classification error, Viterbi best-path decoding over a state
// transition model, and edit-distance error rates on label sequences.

#include "uos/core.hpp"

#include <optional>
#include <vector>

namespace uos {

class TransitionModel {
 public:
  // Rows of `transitions` and `initial` must each sum to 1 within 1e-6.
  TransitionModel(Eigen::MatrixXd transitions, RealVector initial);

  // Stay with probability `self_loop`, move uniformly otherwise; uniform start.
  static TransitionModel self_loop(int states, double self_loop);

  int states() const noexcept { return static_cast<int>(transitions_.rows()); }
  const Eigen::MatrixXd& transitions() const noexcept { return transitions_; }
  const RealVector& initial() const noexcept { return initial_; }
  // log(0) is -infinity.
  const Eigen::MatrixXd& log_transitions() const noexcept { return log_transitions_; }
  const RealVector& log_initial() const noexcept { return log_initial_; }

 private:
  Eigen::MatrixXd transitions_;
  RealVector initial_;
  Eigen::MatrixXd log_transitions_;
  RealVector log_initial_;
};

// Fraction of frames whose argmax (lowest index on ties) differs from the label.
double frame_error(const RealMatrix& z, const ClassAlignment& align);

// Emission scores log z_t(s), or log(z_t(s) / prior(s)) when priors are given.
Eigen::MatrixXd emission_scores(const RealMatrix& z, const std::optional<RealVector>& priors = {});

// Scores within this relative distance of the best are ties.
inline constexpr double kViterbiTieTolerance = 1e-12;

// Maximizes log init(s_1) + sum_t [log trans(s_{t-1}, s_t) + log z_t(s_t)].
// Ties go to the lower state index, both for the final state and for every
// backpointer. Throws AllPathsImpossible.
std::vector<int> viterbi_decode(const RealMatrix& z, const TransitionModel& tm,
                                const std::optional<RealVector>& priors = {});

// Score of a given path, accumulated in the same order as the decoder.
double path_score(const RealMatrix& z, const TransitionModel& tm, const std::vector<int>& path,
                  const std::optional<RealVector>& priors = {});

struct EditCounts {
  double rate = 0.0;
  int insertions = 0;
  int deletions = 0;
  int substitutions = 0;
  int reference_length = 0;

  int total() const noexcept { return insertions + deletions + substitutions; }
};

// Unit-cost Levenshtein alignment of hyp against ref. Among equal-cost
// alignments the backtrace prefers substitution, then insertion, then
// deletion. Throws EmptyReference.
EditCounts edit_distance_rate(const std::vector<int>& hyp, const std::vector<int>& ref);

// Merges consecutive repeats: [1,1,2,2,1] -> [1,2,1].
std::vector<int> collapse_runs(const std::vector<int>& labels);

struct SystemScore {
  double frame_error = 0.0;
  EditCounts label_errors;  // collapsed Viterbi output vs collapsed alignment
  std::vector<int> decoded;
};

struct ComparisonReport {
  SystemScore before;
  SystemScore after;
  double frame_error_relative_change = 0.0;  // (after - before) / before
  double label_error_relative_change = 0.0;
};

// (after - before) / before; 0 when both are 0.
double relative_change(double before, double after);

ComparisonReport compare_systems(const RealMatrix& before, const RealMatrix& after,
                                 const ClassAlignment& align, const TransitionModel& tm,
                                 const std::optional<RealVector>& priors = {});

}  // namespace uos
