#pragma once

// Online (mini-batch) dictionary learning for per-class atom sets.
//
// Each class dictionary minimizes
//   sum_t ||z_t - D a_t||^2 + lambda ||a_t||_1   s.t. ||d_j||_2^2 <= 1
// by alternating warm-started Lasso coding of a mini-batch with a block
// coordinate update of every atom from the sufficient statistics
//   A = sum_t a_t a_t^T,  B = sum_t z_t a_t^T
// where each frame contributes its most recent code. Every step decreases
// the surrogate sum over stored codes, so the per-epoch objective is
// non-increasing.

#include "uos/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uos {

struct LearnerConfig {
  Eigen::Index atoms = 100;
  CodingConfig coding;  // lambda1 is used; lambda2 is ignored
  int epochs = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct LearnerState {
  Eigen::MatrixXd accum_A;  // k x k
  AtomMatrix accum_B;       // m x k
  long long samples_seen = 0;
  std::uint64_t rng_seed = 0;
};

struct ClassDictionaryResult {
  GroupedDictionary dictionary;
  LearnerState state;
  // Surrogate objective before training (index 0) and after each epoch.
  std::vector<double> epoch_objectives;
  std::vector<std::string> warnings;
};

// Frames sampled without replacement, scaled to unit norm (zero frames stay
// zero). This is the learner's starting point.
AtomMatrix initial_atoms(const RealMatrix& frames, Eigen::Index atoms, std::uint64_t seed);

// The group carries label `label`. Group size is capped at the frame count.
ClassDictionaryResult learn_class_dictionary(const RealMatrix& frames, const LearnerConfig& cfg,
                                             int label = 0);

struct DictionaryResult {
  GroupedDictionary dictionary;
  std::vector<int> empty_classes;
  std::vector<std::vector<double>> epoch_objectives;  // per class
  std::vector<std::string> warnings;
};

// Learns class l with seed derive_seed(cfg.seed, l) and concatenates groups in
// class order. Empty classes get a single zero atom and are reported.
DictionaryResult learn_all(const RealMatrix& z, const ClassAlignment& align, const LearnerConfig& cfg);

}  // namespace uos
