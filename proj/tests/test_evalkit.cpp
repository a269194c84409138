#include "oracles.hpp"
#include "test_util.hpp"

#include "uos/evalkit.hpp"

#include <doctest.h>

#include <cmath>

using namespace uos;
using testing::rows;
using testing::vec;

namespace {

RealMatrix random_posteriors(Eigen::Index frames, Eigen::Index states, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  RealMatrix z(frames, states);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) z(t, s) = u(rng);
    z.row(t) /= z.row(t).sum();
  }
  return z;
}

TransitionModel random_transitions(int states, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd a(states, states);
  RealVector init(states);
  for (int i = 0; i < states; ++i) {
    for (int j = 0; j < states; ++j) a(i, j) = u(rng);
    a.row(i) /= a.row(i).sum();
    init[i] = u(rng);
  }
  init /= init.sum();
  return TransitionModel(a, init);
}

std::vector<int> random_sequence(Rng& rng, int alphabet, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len), sym(0, alphabet - 1);
  std::vector<int> out(static_cast<std::size_t>(len(rng)));
  for (auto& x : out) x = sym(rng);
  return out;
}

}  // namespace

TEST_CASE("frame error") {
  const RealMatrix onehot = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  CHECK(frame_error(onehot, ClassAlignment({0, 1, 2, 0}, 3)) == 0.0);
  CHECK(frame_error(onehot, ClassAlignment({1, 0, 2, 0}, 3)) == 0.5);
  CHECK(frame_error(rows({{0.5, 0.5}}), ClassAlignment({1}, 2)) == 1.0);
}

TEST_CASE("frame error is invariant under monotone row transforms") {
  Rng rng(1);
  const RealMatrix z = random_posteriors(40, 5, rng);
  std::vector<int> labels(40);
  std::uniform_int_distribution<int> pick(0, 4);
  for (auto& l : labels) l = pick(rng);
  const ClassAlignment align(labels, 5);
  const double e = frame_error(z, align);
  CHECK(frame_error(RealMatrix(z.array().log()), align) == e);
  CHECK(frame_error(RealMatrix(z.array().cube() * 7.0 + 2.0), align) == e);
}

TEST_CASE("transition model validation") {
  CHECK_THROWS_AS(TransitionModel(Eigen::MatrixXd::Constant(2, 2, 0.4), vec({0.5, 0.5})), Error);
  CHECK_THROWS_AS(TransitionModel(Eigen::MatrixXd::Identity(2, 2), vec({0.7, 0.5})), Error);
  const auto tm = TransitionModel::self_loop(3, 0.9);
  CHECK(tm.transitions()(0, 0) == doctest::Approx(0.9));
  CHECK(tm.transitions()(0, 1) == doctest::Approx(0.05));
  CHECK(tm.initial()[2] == doctest::Approx(1.0 / 3));
  const TransitionModel id(Eigen::MatrixXd::Identity(2, 2), vec({1.0, 0.0}));
  CHECK(std::isinf(id.log_transitions()(0, 1)));
  CHECK(id.log_transitions()(0, 1) < 0);
}

TEST_CASE("viterbi structural cases") {
  Rng rng(2);
  const RealMatrix single = RealMatrix::Ones(5, 1);
  CHECK(viterbi_decode(single, TransitionModel::self_loop(1, 1.0)) == std::vector<int>(5, 0));

  const RealMatrix z = random_posteriors(6, 3, rng);
  const TransitionModel stay(Eigen::MatrixXd::Identity(3, 3), vec({1.0, 0.0, 0.0}));
  CHECK(viterbi_decode(z, stay) == std::vector<int>(6, 0));

  const RealMatrix blocked = rows({{1, 0}, {0, 1}});
  CHECK(testing::error_code([&] { viterbi_decode(blocked, TransitionModel(Eigen::MatrixXd::Identity(2, 2), vec({1.0, 0.0}))); }) ==
        ErrorCode::AllPathsImpossible);
}

TEST_CASE("viterbi matches exhaustive enumeration") {
  Rng rng(3);
  int cases = 0;
  for (int states = 1; states <= 4; ++states)
    for (int frames = 1; frames <= 6; ++frames)
      for (int trial = 0; trial < 5; ++trial) {
        const RealMatrix z = random_posteriors(frames, states, rng);
        const auto tm = random_transitions(states, rng);
        const auto expected = oracle::viterbi_exhaustive(z, tm);
        REQUIRE(expected.has_value());
        const auto got = viterbi_decode(z, tm);
        CHECK(got == expected->path);
        CHECK(path_score(z, tm, got) == expected->score);
        ++cases;
      }
  CHECK(cases == 120);

  // the 3^4 case from a self-loop model with exact ties in the posteriors
  const RealMatrix tied = rows({{0.5, 0.5, 0}, {0.25, 0.25, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.2, 0.4, 0.4}});
  const auto tm = TransitionModel::self_loop(3, 0.6);
  const auto expected = oracle::viterbi_exhaustive(tied, tm);
  REQUIRE(expected.has_value());
  CHECK(viterbi_decode(tied, tm) == expected->path);
}

TEST_CASE("viterbi beats random paths") {
  Rng rng(4);
  const RealMatrix z = random_posteriors(30, 6, rng);
  const auto tm = random_transitions(6, rng);
  const auto best = viterbi_decode(z, tm);
  const double score = path_score(z, tm, best);
  std::uniform_int_distribution<int> pick(0, 5);
  for (int k = 0; k < 1000; ++k) {
    std::vector<int> path(30);
    for (auto& s : path) s = pick(rng);
    CHECK(path_score(z, tm, path) <= score);
  }
}

TEST_CASE("viterbi with priors divides out the prior") {
  const RealMatrix z = rows({{0.6, 0.4}, {0.6, 0.4}});
  const auto tm = TransitionModel::self_loop(2, 0.5);
  CHECK(viterbi_decode(z, tm) == std::vector<int>{0, 0});
  CHECK(viterbi_decode(z, tm, vec({0.9, 0.1})) == std::vector<int>{1, 1});
  const Eigen::MatrixXd e = emission_scores(z, vec({0.9, 0.1}));
  CHECK(e(0, 1) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("edit distance examples") {
  auto r = edit_distance_rate({1, 2, 3}, {1, 2, 3});
  CHECK(r.rate == 0.0);
  CHECK(r.total() == 0);
  r = edit_distance_rate({0, 1, 2}, {0, 9, 2});
  CHECK(r.rate == doctest::Approx(1.0 / 3));
  CHECK(r.substitutions == 1);
  CHECK(r.insertions + r.deletions == 0);
  r = edit_distance_rate({}, {1, 2, 3, 4, 5});
  CHECK(r.rate == 1.0);
  CHECK(r.deletions == 5);
  r = edit_distance_rate({1, 2}, {1});
  CHECK(r.insertions == 1);
  CHECK(r.rate == 1.0);
  CHECK(testing::error_code([] { edit_distance_rate({1}, {}); }) == ErrorCode::EmptyReference);
}

TEST_CASE("edit distance is symmetric and satisfies the triangle inequality") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    auto a = random_sequence(rng, 3, 7), b = random_sequence(rng, 3, 7), c = random_sequence(rng, 3, 7);
    if (a.empty()) a.push_back(0);
    if (b.empty()) b.push_back(1);
    if (c.empty()) c.push_back(2);
    const int ab = edit_distance_rate(a, b).total(), ba = edit_distance_rate(b, a).total();
    const int bc = edit_distance_rate(b, c).total(), ac = edit_distance_rate(a, c).total();
    CHECK(ab == ba);
    CHECK(ac <= ab + bc);
  }
}

TEST_CASE("collapse runs") {
  CHECK(collapse_runs({1, 1, 2, 2, 1}) == std::vector<int>{1, 2, 1});
  CHECK(collapse_runs({}).empty());
  CHECK(collapse_runs({4}) == std::vector<int>{4});
}

TEST_CASE("comparing a system with itself changes nothing") {
  Rng rng(6);
  const RealMatrix z = random_posteriors(20, 3, rng);
  std::vector<int> labels(20);
  for (std::size_t t = 0; t < 20; ++t) labels[t] = static_cast<int>(t / 7);
  const ClassAlignment align(labels, 3);
  const auto r = compare_systems(z, z, align, TransitionModel::self_loop(3, 0.9));
  CHECK(r.frame_error_relative_change == 0.0);
  CHECK(r.label_error_relative_change == 0.0);
  CHECK(r.before.decoded == r.after.decoded);
  CHECK(relative_change(0.0, 0.0) == 0.0);
  CHECK(relative_change(0.5, 0.25) == -0.5);
}
