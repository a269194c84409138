#include "oracles.hpp"
#include "test_util.hpp"

#include "uos/rank_analysis.hpp"
#include "uos/sparse_coding.hpp"
#include "uos/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace uos;
using testing::rows;

namespace {

Eigen::MatrixXd random_orthogonal(Eigen::Index n, Rng& rng) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(oracle::random_unit_atoms(n, n, rng)));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("effective rank examples") {
  RealMatrix same(6, 4);
  for (Eigen::Index j = 0; j < 4; ++j) same.col(j) = RealVector::LinSpaced(6, 1.0, 2.0);
  CHECK(effective_rank(same, 0.95) == 1);

  Rng rng(1);
  const RealMatrix q = random_orthogonal(20, rng);
  CHECK(effective_rank(q, 0.95) == 19);

  CHECK(effective_rank(rows({{3, 0}, {0, 1}}), 0.9) == 1);
  CHECK(effective_rank(rows({{3, 0}, {0, 1}}), 0.91) == 2);
  CHECK(effective_rank(rows({{3, 0}, {0, 1}}), 0.75, VariabilityMode::Linear) == 1);
  CHECK(effective_rank(rows({{3, 0}, {0, 1}}), 0.76, VariabilityMode::Linear) == 2);
  CHECK(effective_rank(RealMatrix::Zero(3, 3), 0.95) == 0);
}

TEST_CASE("effective rank is monotone in variability") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    RealMatrix m(12, 8);
    for (Eigen::Index i = 0; i < 12; ++i) m.row(i) = oracle::random_vector(8, rng).transpose();
    for (VariabilityMode mode : {VariabilityMode::Squared, VariabilityMode::Linear}) {
      int prev = 0;
      for (double v = 0.05; v <= 1.0 + 1e-12; v += 0.05) {
        const int k = effective_rank(m, std::min(v, 1.0), mode);
        CHECK(k >= prev);
        CHECK(k >= 1);
        CHECK(k <= 8);
        prev = k;
      }
    }
  }
}

TEST_CASE("effective rank is invariant to a right orthogonal factor") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    // well separated spectrum 2^-i
    const Eigen::MatrixXd u = random_orthogonal(10, rng), v = random_orthogonal(10, rng);
    Eigen::VectorXd s(10);
    for (int i = 0; i < 10; ++i) s[i] = std::pow(2.0, -i);
    const RealMatrix m = u * s.asDiagonal() * v.transpose();
    const Eigen::MatrixXd q = random_orthogonal(10, rng);
    for (double var : {0.5, 0.9, 0.95, 0.99})
      CHECK(effective_rank(m, var) == effective_rank(RealMatrix(m * q), var));
  }
}

TEST_CASE("log transform") {
  const RealMatrix l = log_transform(rows({{1.0, 0.0, 0.5}}));
  CHECK(l(0, 0) == 0.0);
  CHECK(l(0, 1) == doctest::Approx(-23.0259).epsilon(1e-5));
  CHECK(l(0, 2) == doctest::Approx(std::log(0.5)));
  CHECK(l(0, 0) > l(0, 2));
  CHECK(l(0, 2) > l(0, 1));
}

TEST_CASE("correct/incorrect split") {
  const RealMatrix z = rows({{0, 1, 0}, {0.5, 0.5, 0}, {1, 0, 0}, {0.2, 0.3, 0.5}});
  const ClassAlignment align({1, 1, 0, 1}, 3);
  const auto s = split_correct_incorrect(z, align);
  CHECK(s.correct[1] == std::vector<Eigen::Index>{0});
  CHECK(s.incorrect[1] == std::vector<Eigen::Index>{1, 3});  // frame 1 ties toward index 0
  CHECK(s.correct[0] == std::vector<Eigen::Index>{2});
  CHECK(s.incorrect[0].empty());
  for (std::size_t l = 0; l < 3; ++l)
    CHECK(s.correct[l].size() + s.incorrect[l].size() == align.frames_by_class()[l].size());
}

namespace {

SynthConfig synth(double noise, std::uint64_t seed) {
  SynthConfig c;
  c.m = 50;
  c.classes = 5;
  c.rank = 3;
  c.frames_per_class = 200;
  c.noise_sigma = noise;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("clean synthetic ranks are small") {
  const auto data = generate_dataset(generate_subspaces(synth(0.0, 4)), synth(0.0, 4));
  const auto report = rank_table(data.clean, data.align);
  REQUIRE(report.mean_all.has_value());
  MESSAGE("clean mean rank " << *report.mean_all);
  CHECK(*report.mean_all <= 3 + 2);
  Eigen::Index frames = 0;
  for (const auto& c : report.classes) frames += c.correct_frames + c.incorrect_frames;
  CHECK(frames == data.clean.rows());
}

TEST_CASE("correct bucket has lower rank than incorrect bucket on noisy data") {
  const auto data = generate_dataset(generate_subspaces(synth(0.5, 5)), synth(0.5, 5));
  const auto report = rank_table(data.noisy, data.align);
  REQUIRE(report.mean_correct.has_value());
  REQUIRE(report.mean_incorrect.has_value());
  MESSAGE("correct " << *report.mean_correct << ", incorrect " << *report.mean_incorrect);
  CHECK(*report.mean_correct < *report.mean_incorrect);
}

TEST_CASE("rank table is seeded and subsamples") {
  const auto data = generate_dataset(generate_subspaces(synth(0.3, 6)), synth(0.3, 6));
  RankOptions opt;
  opt.sample_per_class = 20;
  opt.seed = 9;
  const auto a = rank_table(data.noisy, data.align, opt);
  const auto b = rank_table(data.noisy, data.align, opt);
  REQUIRE(a.mean_correct.has_value());
  CHECK(*a.mean_correct == *b.mean_correct);
  for (const auto& c : a.classes) {
    if (c.correct) CHECK(*c.correct <= 20);
  }
}

TEST_CASE("alpha-sum vectors and ranks") {
  const GroupLayout layout = GroupLayout::from_sizes({2, 1});
  const RealMatrix codes = rows({{1, -2, 0}, {0, 0, 0.5}, {0.5, -1, 0}, {0, 0, 0}});
  const RealMatrix sums = alpha_sum_vectors(codes, layout);
  CHECK(sums == rows({{3, 0}, {0, 0.5}, {1.5, 0}, {0, 0}}));

  const ClassAlignment align({0, 1, 0, 2}, 3);
  const auto r = alpha_sum_rank(codes, layout, align);
  REQUIRE(r.ranks.size() == 3);
  CHECK(r.ranks[0] == 1);
  CHECK(r.ranks[1] == 1);
  CHECK(r.degenerate == std::vector<int>{1});
  CHECK(r.skipped == std::vector<int>{2});
  CHECK_FALSE(r.ranks[2].has_value());
}

TEST_CASE("alpha-sum rank is one under subspace sparse recovery") {
  SynthConfig cfg = synth(0.0, 7);
  cfg.frames_per_class = 40;
  const auto model = generate_subspaces(cfg);
  const auto data = generate_dataset(model, cfg);
  // one group per class spanned by that class's orthonormal basis
  std::vector<GroupedDictionary> parts;
  for (const auto& b : model.spec.bases) parts.emplace_back(b, GroupLayout::single(b.cols()));
  const auto dict = GroupedDictionary::concatenate(parts);
  CodingConfig cc;
  cc.lambda1 = 1e-3;
  cc.lambda2 = 1e-3;
  cc.tolerance = 1e-10;
  cc.max_iterations = 5000;
  const auto codes = batch_encode(data.latent, dict, cc, CodingMode::Hilasso, 1);
  const auto r = alpha_sum_rank(codes.codes, dict.layout(), data.align);
  for (const auto& k : r.ranks) CHECK(k == 1);
}
