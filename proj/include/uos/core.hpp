#pragma once

// Shared domain types for union-of-subspaces posterior modeling.
//
// Matrices of frames are frame-major: one row per frame, one column per
// class dimension. Dictionaries store one atom per column.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uos {

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using AtomMatrix = Eigen::MatrixXd;  // column-major, m x n

enum class ErrorCode {
  NegativeEntry,
  NotNormalized,
  NonFinite,
  ClassOutOfRange,
  DimensionMismatch,
  InvalidArgument,
  InvalidDictionary,
  EmptyInput,
  EmptyReference,
  AllPathsImpossible,
  SvdFailure,
  AngleInfeasible,
  Format,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Tolerance on simplex membership for externally produced posteriors.
inline constexpr double kSimplexTolerance = 1e-6;
// Slack on the unit-norm atom constraint.
inline constexpr double kAtomNormSlack = 1e-9;

void require_finite(const RealMatrix& m, std::string_view what);

// A validated class-conditional probability vector.
class PosteriorVector {
 public:
  // Throws NonFinite, NegativeEntry or NotNormalized. Never renormalizes.
  static PosteriorVector validate(const RealVector& values);

  const RealVector& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

 private:
  explicit PosteriorVector(RealVector v) : values_(std::move(v)) {}
  RealVector values_;
};

struct Group {
  int label = 0;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

// Contiguous partition of atom columns into class groups.
class GroupLayout {
 public:
  GroupLayout() = default;
  // Group i gets class label i and sizes[i] atoms.
  static GroupLayout from_sizes(const std::vector<Eigen::Index>& sizes);
  static GroupLayout single(Eigen::Index size, int label = 0);

  std::size_t num_groups() const noexcept { return groups_.size(); }
  Eigen::Index total() const noexcept { return total_; }
  const Group& group(std::size_t i) const { return groups_.at(i); }
  const std::vector<Group>& groups() const noexcept { return groups_; }
  std::vector<Eigen::Index> sizes() const;

  // Group index owning atom column j.
  std::size_t group_of(Eigen::Index j) const;

  bool operator==(const GroupLayout& other) const;

 private:
  std::vector<Group> groups_;
  Eigen::Index total_ = 0;
};

// D = [D_1 ... D_L] with per-column norm constraint ||d_j||_2^2 <= 1.
class GroupedDictionary {
 public:
  GroupedDictionary(AtomMatrix atoms, GroupLayout layout);

  const AtomMatrix& atoms() const noexcept { return atoms_; }
  const GroupLayout& layout() const noexcept { return layout_; }
  Eigen::Index dim() const noexcept { return atoms_.rows(); }
  Eigen::Index num_atoms() const noexcept { return atoms_.cols(); }
  std::size_t num_groups() const noexcept { return layout_.num_groups(); }

  // Columns of group g.
  auto group_atoms(std::size_t g) const {
    const Group& grp = layout_.group(g);
    return atoms_.middleCols(grp.offset, grp.size);
  }

  static GroupedDictionary concatenate(const std::vector<GroupedDictionary>& parts);

 private:
  AtomMatrix atoms_;
  GroupLayout layout_;
};

class SparseCode {
 public:
  SparseCode(RealVector coefficients, GroupLayout layout);

  const RealVector& coefficients() const noexcept { return coefficients_; }
  const GroupLayout& layout() const noexcept { return layout_; }
  Eigen::Index size() const noexcept { return coefficients_.size(); }

 private:
  RealVector coefficients_;
  GroupLayout layout_;
};

// Slice of the code belonging to class group `cls`. Throws ClassOutOfRange.
RealVector::ConstSegmentReturnType group_view(const SparseCode& code, std::size_t cls);

// lambda1 and lambda2 use the unscaled convention
//   ||z - D a||^2 + lambda1 ||a||_1 + lambda2 sum_g ||a_g||_2
// Solvers internally minimize half of that objective.
struct CodingConfig {
  double lambda1 = 0.2;
  double lambda2 = 0.2;
  double tolerance = 1e-6;
  int max_iterations = 1000;

  void validate() const;
};

class ClassAlignment {
 public:
  ClassAlignment() = default;
  ClassAlignment(std::vector<int> labels, int num_classes);

  const std::vector<int>& labels() const noexcept { return labels_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  int operator[](std::size_t t) const { return labels_[t]; }

  // Frame indices per class, in frame order.
  std::vector<std::vector<Eigen::Index>> frames_by_class() const;

  void require_matches(const RealMatrix& z) const;

 private:
  std::vector<int> labels_;
  int num_classes_ = 0;
};

struct RpcaDecomposition {
  RealMatrix original;
  RealMatrix low_rank;
  RealMatrix sparse;
  int iterations_used = 0;
  bool converged = false;
};

struct SubspaceSpec {
  Eigen::Index ambient_dim = 0;
  std::vector<Eigen::MatrixXd> bases;  // m x r_l, orthonormal columns

  std::size_t num_classes() const noexcept { return bases.size(); }
  void validate() const;
};

RealMatrix gather_rows(const RealMatrix& z, const std::vector<Eigen::Index>& rows);

// Index of the largest entry; ties resolve to the lowest index.
Eigen::Index argmax(const Eigen::Ref<const RealVector>& v);

}  // namespace uos
