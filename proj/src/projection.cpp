#include "uos/projection.hpp"

#include "uos/parallel.hpp"

namespace uos {

namespace {
constexpr double kDegenerateSum = 1e-12;
}

RealVector reconstruct(const GroupedDictionary& dict, const SparseCode& code) {
  if (code.size() != dict.num_atoms())
    throw Error(ErrorCode::DimensionMismatch, "code has " + std::to_string(code.size()) +
                                                  " entries, dictionary has " +
                                                  std::to_string(dict.num_atoms()) + " atoms");
  return dict.atoms() * code.coefficients();
}

std::optional<PosteriorVector> to_simplex(const RealVector& v) {
  if (!v.allFinite()) throw Error(ErrorCode::NonFinite, "vector contains NaN or Inf");
  const RealVector clipped = v.cwiseMax(0.0);
  const double sum = clipped.sum();
  if (sum < kDegenerateSum) return std::nullopt;
  return PosteriorVector::validate(clipped / sum);
}

ProjectionResult project_posteriors(const RealMatrix& z, const GroupedDictionary& dict,
                                    const CodingConfig& cfg, unsigned threads) {
  if (z.cols() != dict.dim())
    throw Error(ErrorCode::DimensionMismatch, "frames have " + std::to_string(z.cols()) +
                                                  " columns, dictionary expects " +
                                                  std::to_string(dict.dim()));
  const SparseEncoder encoder(dict, cfg, CodingMode::Hilasso);
  const auto frames = static_cast<std::size_t>(z.rows());
  ProjectionResult out{RealMatrix(z.rows(), z.cols()), ProjectionStats{z.rows(), 0, 0}};
  std::vector<char> degenerate(frames, 0);
  std::vector<char> unconverged(frames, 0);

  parallel_for(frames, threads, [&](std::size_t i) {
    const auto t = static_cast<Eigen::Index>(i);
    try {
      const EncodeResult coded = encoder.encode(z.row(t).transpose());
      unconverged[i] = coded.report.converged ? 0 : 1;
      const auto projected = to_simplex(reconstruct(dict, coded.code));
      if (projected) {
        out.posteriors.row(t) = projected->values().transpose();
      } else {
        out.posteriors.row(t) = z.row(t);
        degenerate[i] = 1;
      }
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(i) + ": " + e.what());
    }
  });

  for (std::size_t i = 0; i < frames; ++i) {
    out.stats.degenerate += degenerate[i];
    out.stats.unconverged += unconverged[i];
  }
  return out;
}

}  // namespace uos
