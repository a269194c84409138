#include "uos/core.hpp"

#include <cmath>
#include <numeric>

namespace uos {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDictionary: return "InvalidDictionary";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::AllPathsImpossible: return "AllPathsImpossible";
    case ErrorCode::SvdFailure: return "SvdFailure";
    case ErrorCode::AngleInfeasible: return "AngleInfeasible";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void require_finite(const RealMatrix& m, std::string_view what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
}

PosteriorVector PosteriorVector::validate(const RealVector& values) {
  if (values.size() < 1) throw Error(ErrorCode::EmptyInput, "posterior vector is empty");
  if (!values.allFinite()) throw Error(ErrorCode::NonFinite, "posterior contains NaN or Inf");
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0)
      throw Error(ErrorCode::NegativeEntry, "entry " + std::to_string(i) + " is negative");
    if (values[i] > 1.0 + kSimplexTolerance)
      throw Error(ErrorCode::NotNormalized, "entry " + std::to_string(i) + " exceeds 1");
  }
  const double sum = values.sum();
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw Error(ErrorCode::NotNormalized, "entries sum to " + std::to_string(sum));
  return PosteriorVector(values);
}

GroupLayout GroupLayout::from_sizes(const std::vector<Eigen::Index>& sizes) {
  GroupLayout layout;
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1)
      throw Error(ErrorCode::InvalidDictionary, "group " + std::to_string(i) + " has no atoms");
    layout.groups_.push_back(Group{static_cast<int>(i), offset, sizes[i]});
    offset += sizes[i];
  }
  layout.total_ = offset;
  return layout;
}

GroupLayout GroupLayout::single(Eigen::Index size, int label) {
  GroupLayout layout = from_sizes({size});
  layout.groups_[0].label = label;
  return layout;
}

std::vector<Eigen::Index> GroupLayout::sizes() const {
  std::vector<Eigen::Index> out;
  out.reserve(groups_.size());
  for (const auto& g : groups_) out.push_back(g.size);
  return out;
}

std::size_t GroupLayout::group_of(Eigen::Index j) const {
  for (std::size_t g = 0; g < groups_.size(); ++g)
    if (j >= groups_[g].offset && j < groups_[g].offset + groups_[g].size) return g;
  throw Error(ErrorCode::ClassOutOfRange, "atom index " + std::to_string(j) + " outside layout");
}

bool GroupLayout::operator==(const GroupLayout& other) const {
  if (total_ != other.total_ || groups_.size() != other.groups_.size()) return false;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const auto& a = groups_[i];
    const auto& b = other.groups_[i];
    if (a.label != b.label || a.offset != b.offset || a.size != b.size) return false;
  }
  return true;
}

GroupedDictionary::GroupedDictionary(AtomMatrix atoms, GroupLayout layout)
    : atoms_(std::move(atoms)), layout_(std::move(layout)) {
  if (atoms_.cols() != layout_.total())
    throw Error(ErrorCode::InvalidDictionary,
                "layout covers " + std::to_string(layout_.total()) + " atoms but dictionary has " +
                    std::to_string(atoms_.cols()));
  if (atoms_.cols() < 1 || atoms_.rows() < 1)
    throw Error(ErrorCode::InvalidDictionary, "dictionary is empty");
  if (!atoms_.allFinite()) throw Error(ErrorCode::NonFinite, "dictionary contains NaN or Inf");
  for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
    if (atoms_.col(j).squaredNorm() > 1.0 + kAtomNormSlack)
      throw Error(ErrorCode::InvalidDictionary,
                  "atom " + std::to_string(j) + " violates the unit-norm constraint");
  }
}

GroupedDictionary GroupedDictionary::concatenate(const std::vector<GroupedDictionary>& parts) {
  if (parts.empty()) throw Error(ErrorCode::EmptyInput, "nothing to concatenate");
  const Eigen::Index m = parts.front().dim();
  Eigen::Index n = 0;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    if (p.dim() != m) throw Error(ErrorCode::DimensionMismatch, "dictionaries differ in dimension");
    n += p.num_atoms();
    for (const auto& g : p.layout().groups()) sizes.push_back(g.size);
  }
  AtomMatrix atoms(m, n);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    atoms.middleCols(col, p.num_atoms()) = p.atoms();
    col += p.num_atoms();
  }
  return GroupedDictionary(std::move(atoms), GroupLayout::from_sizes(sizes));
}

SparseCode::SparseCode(RealVector coefficients, GroupLayout layout)
    : coefficients_(std::move(coefficients)), layout_(std::move(layout)) {
  if (coefficients_.size() != layout_.total())
    throw Error(ErrorCode::DimensionMismatch, "code length does not match the group layout");
  if (!coefficients_.allFinite()) throw Error(ErrorCode::NonFinite, "code contains NaN or Inf");
}

RealVector::ConstSegmentReturnType group_view(const SparseCode& code, std::size_t cls) {
  if (cls >= code.layout().num_groups())
    throw Error(ErrorCode::ClassOutOfRange, "class " + std::to_string(cls) + " with " +
                                                std::to_string(code.layout().num_groups()) +
                                                " groups");
  const Group& g = code.layout().group(cls);
  return code.coefficients().segment(g.offset, g.size);
}

void CodingConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "coding weights must be non-negative");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
}

ClassAlignment::ClassAlignment(std::vector<int> labels, int num_classes)
    : labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 1) throw Error(ErrorCode::InvalidArgument, "alignment needs >= 1 class");
  for (std::size_t t = 0; t < labels_.size(); ++t) {
    if (labels_[t] < 0 || labels_[t] >= num_classes_)
      throw Error(ErrorCode::ClassOutOfRange,
                  "frame " + std::to_string(t) + " has label " + std::to_string(labels_[t]));
  }
}

std::vector<std::vector<Eigen::Index>> ClassAlignment::frames_by_class() const {
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(num_classes_));
  for (std::size_t t = 0; t < labels_.size(); ++t)
    out[static_cast<std::size_t>(labels_[t])].push_back(static_cast<Eigen::Index>(t));
  return out;
}

void ClassAlignment::require_matches(const RealMatrix& z) const {
  if (static_cast<Eigen::Index>(labels_.size()) != z.rows())
    throw Error(ErrorCode::DimensionMismatch, "alignment has " + std::to_string(labels_.size()) +
                                                  " frames, matrix has " +
                                                  std::to_string(z.rows()));
}

void SubspaceSpec::validate() const {
  for (std::size_t l = 0; l < bases.size(); ++l) {
    const auto& b = bases[l];
    if (b.rows() != ambient_dim)
      throw Error(ErrorCode::DimensionMismatch, "basis " + std::to_string(l) + " has wrong rows");
    if (b.cols() >= ambient_dim)
      throw Error(ErrorCode::InvalidArgument, "intrinsic dimension must be below ambient");
    const Eigen::MatrixXd gram = b.transpose() * b;
    if ((gram - Eigen::MatrixXd::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw Error(ErrorCode::InvalidArgument, "basis " + std::to_string(l) + " not orthonormal");
  }
}

RealMatrix gather_rows(const RealMatrix& z, const std::vector<Eigen::Index>& rows) {
  RealMatrix out(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = z.row(rows[i]);
  return out;
}

Eigen::Index argmax(const Eigen::Ref<const RealVector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace uos
