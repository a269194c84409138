#pragma once

// Rank diagnostics for class posterior matrices: the number of singular
// values needed to keep a given share of spectral energy, computed on log
// posteriors, split by whether the frame's argmax hits its true class.

#include "uos/core.hpp"
#include "uos/sparse_coding.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace uos {

// Squared: energy share of sigma_i^2 (default). Linear: share of sigma_i.
enum class VariabilityMode { Squared, Linear };

// Smallest k whose leading singular values reach `variability` of the total.
// Returns 0 for an all-zero matrix. No mean-centering.
int effective_rank(const RealMatrix& m, double variability,
                   VariabilityMode mode = VariabilityMode::Squared);

// Natural log of max(entry, floor).
RealMatrix log_transform(const RealMatrix& z, double floor = 1e-10);

struct CorrectnessSplit {
  // Indexed by true class; frame indices in frame order.
  std::vector<std::vector<Eigen::Index>> correct;
  std::vector<std::vector<Eigen::Index>> incorrect;
};

// A frame of true class l is correct iff argmax(z_t) == l (lowest index on ties).
CorrectnessSplit split_correct_incorrect(const RealMatrix& z, const ClassAlignment& align);

struct RankOptions {
  Eigen::Index sample_per_class = 1000;
  double variability = 0.95;
  VariabilityMode mode = VariabilityMode::Squared;
  std::uint64_t seed = 0;
};

struct ClassRank {
  int label = 0;
  Eigen::Index correct_frames = 0;
  Eigen::Index incorrect_frames = 0;
  std::optional<double> correct;    // unset when the bucket has < 2 frames
  std::optional<double> incorrect;
  std::optional<double> all;        // all frames of the class
};

struct RankReport {
  std::vector<ClassRank> classes;
  std::optional<double> mean_correct;
  std::optional<double> mean_incorrect;
  std::optional<double> mean_all;
  std::vector<std::string> skipped;
};

RankReport rank_table(const RealMatrix& z, const ClassAlignment& align, const RankOptions& options = {});

// Per-frame vector of length L whose entry l is sum_{j in group l} |alpha_j|.
RealMatrix alpha_sum_vectors(const RealMatrix& codes, const GroupLayout& layout);

struct AlphaSumRanks {
  std::vector<std::optional<int>> ranks;  // per true class
  std::vector<int> skipped;               // no frames or all-zero codes
  std::vector<int> degenerate;            // a single frame
};

AlphaSumRanks alpha_sum_rank(const RealMatrix& codes, const GroupLayout& layout,
                             const ClassAlignment& align, double variability = 0.95,
                             VariabilityMode mode = VariabilityMode::Squared);

}  // namespace uos
