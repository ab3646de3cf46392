#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gnts/policy.hpp"
#include "test_util.hpp"

using namespace gnts;
using namespace gnts::test;

namespace {

Vector random_vector(Eigen::Index n, RandomStream& rng) {
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

TangentFeature feature(Vector v) { return {std::move(v), 4, ThetaTag::Current}; }

}  // namespace

TEST(Sigma, InitialStateClosedForm) {
  RandomStream rng(1);
  const Vector g = random_vector(12, rng);
  const double lambda = 0.3;
  const double m = 16.0;
  const TangentFeature tf{g / std::sqrt(m), 16, ThetaTag::Current};
  for (auto mode : {UncertaintyMode::Full, UncertaintyMode::Diagonal}) {
    const UncertaintyState state(mode, 12, lambda, 16);
    EXPECT_NEAR(sigma(state, tf) * sigma(state, tf), g.squaredNorm() / (m * lambda), 1e-12);
  }
}

TEST(Sigma, ZeroFeature) {
  for (auto mode : {UncertaintyMode::Full, UncertaintyMode::Diagonal}) {
    const UncertaintyState state(mode, 5, 1.0, 4);
    EXPECT_EQ(sigma(state, feature(Vector::Zero(5))), 0.0);
  }
}

TEST(Sigma, DimensionMismatch) {
  for (auto mode : {UncertaintyMode::Full, UncertaintyMode::Diagonal}) {
    UncertaintyState state(mode, 5, 1.0, 4);
    expect_error(ErrorCode::DimensionMismatch, [&] { sigma(state, feature(Vector::Zero(4))); });
    expect_error(ErrorCode::DimensionMismatch, [&] { state.add(Vector::Zero(6)); });
  }
}

TEST(Sigma, FullModeMatchesDenseInverse) {
  RandomStream rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const double lambda = 0.5;
    UncertaintyState state(UncertaintyMode::Full, 20, lambda, 4);
    Matrix u = lambda * Matrix::Identity(20, 20);
    for (int t = 0; t < 15; ++t) {
      const Vector x = random_vector(20, rng);
      state.add(x);
      u += x * x.transpose();
    }
    const Matrix inv = gauss_jordan_inverse(u);
    for (int k = 0; k < 5; ++k) {
      const Vector x = random_vector(20, rng);
      const double expected = std::sqrt(x.dot(inv * x));
      EXPECT_NEAR(sigma(state, feature(x)), expected, 1e-8 * expected);
    }
  }
}

TEST(Sigma, DiagonalModeUsesDiagonalOnly) {
  RandomStream rng(3);
  UncertaintyState state(UncertaintyMode::Diagonal, 6, 0.2, 4);
  Vector diag = Vector::Constant(6, 0.2);
  for (int t = 0; t < 8; ++t) {
    const Vector x = random_vector(6, rng);
    const Vector before = state.diagonal();
    state.add(x);
    diag.array() += x.array().square();
    EXPECT_TRUE((state.diagonal().array() >= before.array()).all());
  }
  EXPECT_LT((state.diagonal() - diag).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE((state.diagonal().array() >= 0.2).all());
  const Vector x = random_vector(6, rng);
  EXPECT_NEAR(sigma(state, feature(x)), std::sqrt((x.array().square() / diag.array()).sum()),
              1e-14);
  EXPECT_EQ(state.rounds(), 8u);
}

TEST(Update, RankOneOnIdentity) {
  UncertaintyState state(UncertaintyMode::Full, 4, 1.0, 4);
  Vector e1 = Vector::Zero(4);
  e1(0) = 1.0;
  const UncertaintyState next = update(state, feature(e1));
  EXPECT_EQ(next.inverse()(0, 0), 0.5);
  EXPECT_EQ(next.inverse()(1, 1), 1.0);
  EXPECT_EQ(next.inverse()(3, 3), 1.0);
  EXPECT_EQ(next.rounds(), 1u);
  EXPECT_EQ(state.rounds(), 0u);
}

TEST(Update, ShermanMorrisonChainMatchesDenseInverse) {
  RandomStream rng(4);
  const double lambda = 0.7;
  UncertaintyState state(UncertaintyMode::Full, 20, lambda, 4);
  Matrix u = lambda * Matrix::Identity(20, 20);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_vector(20, rng);
    state.add(x);
    u += x * x.transpose();
  }
  const Matrix inv = gauss_jordan_inverse(u);
  EXPECT_LT((state.inverse() - inv).norm() / inv.norm(), 1e-8);
  EXPECT_EQ(max_asymmetry(state.inverse()), 0.0);
}

TEST(Update, SigmaShrinksAlongRepeatedFeature) {
  RandomStream rng(5);
  UncertaintyState state(UncertaintyMode::Full, 8, 0.1, 4);
  const auto tf = feature(random_vector(8, rng));
  double previous = sigma(state, tf);
  for (int t = 0; t < 10; ++t) {
    state = update(state, tf);
    const double now = sigma(state, tf);
    EXPECT_LT(now, previous);
    previous = now;
  }
}

TEST(TsSelect, ZeroNuIsArgmax) {
  RandomStream rng(6);
  const std::vector<double> means{0.1, 0.7, 0.7, -2.0};
  const std::vector<double> sigmas{5.0, 5.0, 5.0, 5.0};
  EXPECT_EQ(ts_select(means, sigmas, 0.0, rng).index, 1u);
  std::vector<double> shifted = means;
  for (auto& v : shifted) v += 100.0;
  EXPECT_EQ(ts_select(shifted, sigmas, 0.0, rng).index, 1u);
}

TEST(TsSelect, SingleAction) {
  RandomStream rng(7);
  for (int k = 0; k < 10; ++k) {
    const std::vector<double> means{rng.normal()};
    const std::vector<double> sigmas{3.0};
    EXPECT_EQ(ts_select(means, sigmas, 1.0, rng).index, 0u);
  }
}

TEST(TsSelect, SampleMomentsMonteCarlo) {
  RandomStream rng(8);
  const std::vector<double> means{1.5, -0.5};
  const std::vector<double> sigmas{0.4, 2.0};
  const double nu = 1.5;
  const int n = 100000;
  double s0 = 0, ss0 = 0, s1 = 0, ss1 = 0;
  for (int k = 0; k < n; ++k) {
    const auto c = ts_select(means, sigmas, nu, rng);
    s0 += c.samples[0];
    ss0 += c.samples[0] * c.samples[0];
    s1 += c.samples[1];
    ss1 += c.samples[1] * c.samples[1];
  }
  const double sd0 = nu * sigmas[0];
  const double sd1 = nu * sigmas[1];
  const double m0 = s0 / n;
  const double m1 = s1 / n;
  EXPECT_NEAR(m0, means[0], 4 * sd0 / std::sqrt(n));
  EXPECT_NEAR(m1, means[1], 4 * sd1 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(ss0 / n - m0 * m0), sd0, 4 * sd0 / std::sqrt(2.0 * n));
  EXPECT_NEAR(std::sqrt(ss1 / n - m1 * m1), sd1, 4 * sd1 / std::sqrt(2.0 * n));
}

TEST(TsSelect, Errors) {
  RandomStream rng(9);
  const std::vector<double> none;
  expect_error(ErrorCode::EmptyActions, [&] { ts_select(none, none, 1.0, rng); });
  const std::vector<double> one{1.0};
  const std::vector<double> two{1.0, 2.0};
  expect_error(ErrorCode::DimensionMismatch, [&] { ts_select(one, two, 1.0, rng); });
}

TEST(UcbSelect, Cases) {
  const std::vector<double> means{0.2, 0.9, 0.5};
  const std::vector<double> sigmas{3.0, 0.0, 1.0};
  EXPECT_EQ(ucb_select(means, sigmas, 0.0), 1u);
  const std::vector<double> equal{0.3, 0.3, 0.3};
  EXPECT_EQ(ucb_select(equal, sigmas, 1.0), 0u);
  const std::vector<double> hand_means{1.0, 0.0};
  const std::vector<double> hand_sigmas{0.0, 2.0};
  EXPECT_EQ(ucb_select(hand_means, hand_sigmas, 1.0), 1u);
  const std::vector<double> none;
  expect_error(ErrorCode::EmptyActions, [&] { ucb_select(none, none, 1.0); });
}

TEST(PeStep, HugeBetaEliminatesNothing) {
  const std::vector<double> means{1.0, 0.5, -1.0, 0.0};
  const std::vector<double> sigmas{0.1, 0.3, 0.2, 0.1};
  const auto step = pe_step(means, sigmas, 1e6, ActiveSet(4));
  EXPECT_EQ(step.active.size(), 4u);
  EXPECT_EQ(step.index, 1u);
}

TEST(PeStep, ZeroBetaKeepsArgmaxMeans) {
  const std::vector<double> means{0.3, 0.9, 0.9, -1.0};
  const std::vector<double> sigmas{0.5, 0.1, 0.2, 0.4};
  const auto step = pe_step(means, sigmas, 0.0, ActiveSet(4));
  EXPECT_EQ(step.active.members(), (std::vector<std::size_t>{1, 2}));
}

TEST(PeStep, HandCase) {
  const std::vector<double> means{1.0, 0.5, -1.0};
  const std::vector<double> sigmas{0.1, 0.1, 0.1};
  const auto step = pe_step(means, sigmas, 1.0, ActiveSet(3));
  EXPECT_EQ(step.index, 0u);
  EXPECT_FALSE(step.active.contains(2));
  // UCB 0.6 of the second action is also below the best LCB 0.9.
  EXPECT_FALSE(step.active.contains(1));
  EXPECT_TRUE(step.active.contains(0));
}

TEST(PeStep, SelectsMostUncertainSurvivor) {
  const std::vector<double> means{0.0, 0.0, 0.0, 0.0};
  const std::vector<double> sigmas{0.1, 0.9, 0.5, 2.0};
  const auto step = pe_step(means, sigmas, 1.0, ActiveSet(std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(step.index, 1u);
}

TEST(PeStep, SingletonPlaysItself) {
  const std::vector<double> means{0.0, 5.0};
  const std::vector<double> sigmas{0.0, 9.0};
  const auto step = pe_step(means, sigmas, 1.0, ActiveSet(std::vector<std::size_t>{0}));
  EXPECT_EQ(step.index, 0u);
  EXPECT_EQ(step.active.size(), 1u);
}

TEST(PeStep, ActiveSetShrinksMonotonically) {
  RandomStream rng(10);
  ActiveSet active(12);
  for (int t = 0; t < 40; ++t) {
    std::vector<double> means(12), sigmas(12);
    for (std::size_t i = 0; i < 12; ++i) {
      means[i] = 0.1 * static_cast<double>(i) + 0.05 * rng.normal();
      sigmas[i] = 1.0 / (1.0 + t);
    }
    const auto step = pe_step(means, sigmas, 1.0, active);
    EXPECT_TRUE(active.contains(step.index));
    for (auto i : step.active.members()) EXPECT_TRUE(active.contains(i));
    EXPECT_GE(step.active.size(), 1u);
    active = step.active;
  }
}

TEST(PeStep, Errors) {
  expect_error(ErrorCode::EmptyActiveSet, [] { ActiveSet(0); });
  expect_error(ErrorCode::EmptyActiveSet, [] { ActiveSet(std::vector<std::size_t>{}); });
  const std::vector<double> v{1.0};
  expect_error(ErrorCode::IndexOutOfRange,
               [&] { pe_step(v, v, 1.0, ActiveSet(std::vector<std::size_t>{0, 3})); });
}

TEST(RandomSelect, Cases) {
  RandomStream rng(11);
  EXPECT_EQ(random_select(1, rng), 0u);
  expect_error(ErrorCode::EmptyActions, [&] { random_select(0, rng); });
  RandomStream a(3);
  RandomStream b(3);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(random_select(7, a), random_select(7, b));
}

TEST(RandomSelect, UniformFrequencies) {
  RandomStream rng(12);
  const std::size_t k = 7;
  const int n = 100000;
  std::vector<int> counts(k, 0);
  for (int s = 0; s < n; ++s) ++counts[random_select(k, rng)];
  const double p = 1.0 / k;
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), p, 4 * std::sqrt(p * (1 - p) / n));
}
