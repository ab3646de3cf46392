#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gnts/environment.hpp"
#include "test_util.hpp"

using namespace gnts;
using namespace gnts::test;

namespace {

EnvConfig small_env(std::size_t horizon = 30) {
  EnvConfig cfg;
  cfg.nodes = 8;
  cfg.actions = 6;
  cfg.features = 4;
  cfg.horizon = horizon;
  cfg.kernel_width = 16;
  return cfg;
}

BanditHyper small_hyper() {
  BanditHyper hp;
  hp.width = 8;
  hp.trainer.epochs = 2;
  return hp;
}

std::vector<AggregatedFeatures> aggs_of(const ActionSpace& space) {
  return aggregate_all(space, false);
}

}  // namespace

TEST(LinearReward, IsolatedGraphsGiveZeroMeans) {
  std::vector<Graph> graphs;
  for (int k = 0; k < 3; ++k) graphs.push_back(new_graph(Matrix::Zero(4, 4), RowMatrix::Ones(4, 2)));
  const ActionSpace space(graphs);
  RandomStream rng(1);
  const auto table = linear_reward(aggs_of(space), 2, rng);
  EXPECT_EQ(table.mu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(table.best_index, 0u);
}

TEST(LinearReward, UnitThetaReadsFirstCoordinate) {
  RandomStream rng(2);
  const auto aggs = aggs_of(gen_action_space(ErdosRenyi{0.5}, 5, 7, 3, rng));
  Vector e1 = Vector::Zero(3);
  e1(0) = 1.0;
  const auto table = linear_reward_with(aggs, e1);
  for (std::size_t i = 0; i < aggs.size(); ++i)
    EXPECT_NEAR(table.mu(static_cast<Eigen::Index>(i)), aggs[i].rows.col(0).mean(), 1e-15);
  EXPECT_EQ(table.generator, RewardKind::Linear);
}

TEST(LinearReward, MarginalIsGaussianWithMeanFeatureNorm) {
  RandomStream space_rng(3);
  const auto aggs = aggs_of(gen_action_space(ErdosRenyi{0.4}, 1, 10, 4, space_rng));
  const double var = aggs[0].rows.colwise().mean().squaredNorm();
  const int n = 10000;
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < n; ++k) {
    RandomStream rng(static_cast<std::uint64_t>(k));
    const double mu = linear_reward(aggs, 4, rng).mu(0);
    s += mu;
    ss += mu * mu;
  }
  const double sd = std::sqrt(var);
  EXPECT_NEAR(s / n, 0.0, 4 * sd / std::sqrt(n));
  EXPECT_NEAR(ss / n, var, 4 * var * std::sqrt(2.0 / n));
}

TEST(RewardTable, BestIsLowestIndexArgmax) {
  Vector mu(4);
  mu << 0.1, 0.5, 0.5, -1.0;
  const auto t = RewardTable::from_means(mu, RewardKind::Linear);
  EXPECT_EQ(t.best_index, 1u);
  EXPECT_EQ(t.best_value, 0.5);
  EXPECT_EQ(t.gap(3), 1.5);
  EXPECT_EQ(t.gap(2), 0.0);
}

TEST(GpGntkReward, ZeroFeaturesGiveZeroMeans) {
  std::vector<AggregatedFeatures> aggs(3);
  for (auto& a : aggs) a.rows = RowMatrix::Zero(4, 2);
  RandomStream init(1);
  const GnnParams p = init_params(2, 8, 2, init);
  RandomStream rng(2);
  EXPECT_EQ(gp_gntk_reward(aggs, p, 1.0, rng).mu.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GpGntkReward, Reproducible) {
  RandomStream space_rng(3);
  const auto aggs = aggs_of(gen_action_space(ErdosRenyi{0.4}, 5, 6, 3, space_rng));
  RandomStream init(1);
  const GnnParams p = init_params(2, 16, 3, init);
  RandomStream a(9);
  RandomStream b(9);
  EXPECT_EQ(gp_gntk_reward(aggs, p, 1.0, a).mu, gp_gntk_reward(aggs, p, 1.0, b).mu);
}

TEST(GpGntkReward, ResidualCovarianceMatchesPosterior) {
  RandomStream space_rng(4);
  const auto aggs = aggs_of(gen_action_space(ErdosRenyi{0.5}, 2, 6, 3, space_rng));
  RandomStream init(1);
  const GnnParams p = init_params(2, 16, 3, init);
  const Matrix k = empirical_gntk(aggs, p).entries;
  const int n = 10000;
  Matrix cov = Matrix::Zero(2, 2);
  Matrix post_cov;
  for (int s = 0; s < n; ++s) {
    RandomStream rng(static_cast<std::uint64_t>(s) + 77);
    RandomStream replay = rng;
    Vector y(2);
    y << replay.normal(), replay.normal();
    const auto post = gp_posterior(k, y, 1.0);
    post_cov = post.cov;
    const Vector r = gp_gntk_reward(aggs, p, 1.0, rng).mu - post.mean;
    cov += r * r.transpose() / n;
  }
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double se =
          std::sqrt((post_cov(i, j) * post_cov(i, j) + post_cov(i, i) * post_cov(j, j)) / n);
      EXPECT_NEAR(cov(i, j), post_cov(i, j), 4 * se + 1e-12);
    }
}

TEST(RepKernelReward, StandardizedTargets) {
  RandomStream rng(5);
  const auto space = gen_action_space(ErdosRenyi{0.4}, 8, 10, 3, rng);
  const auto t = standardized_degree_targets(space);
  double mean = 0.0, var = 0.0;
  for (double v : t) mean += v / 8;
  for (double v : t) var += (v - mean) * (v - mean) / 8;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(RepKernelReward, ConstantDegreeOnlyCentered) {
  std::vector<Graph> graphs(3, new_graph(Matrix::Zero(3, 3), RowMatrix::Ones(3, 2)));
  for (double v : standardized_degree_targets(ActionSpace(graphs))) EXPECT_EQ(v, 0.0);
}

TEST(RepKernelReward, ComposesPretrainKernelAndSample) {
  RandomStream space_rng(6);
  const auto space = gen_action_space(ErdosRenyi{0.4}, 4, 8, 3, space_rng);
  RepPretrainConfig cfg;
  cfg.width = 8;
  cfg.trainer.epochs = 5;
  RandomStream rng(10);
  const auto table = rep_kernel_reward(space, cfg, rng);
  EXPECT_EQ(table.generator, RewardKind::GpRep);

  RandomStream init = rng.split(1);
  RandomStream train_rng = rng.split(2);
  RandomStream sample = rng.split(3);
  const auto aggs = aggs_of(space);
  GnnParams p = init_params(2, 8, 3, init);
  std::vector<LabeledGraph> data;
  const auto targets = standardized_degree_targets(space);
  for (std::size_t i = 0; i < aggs.size(); ++i) data.push_back({shared(aggs[i]), targets[i]});
  p = adam_train(p, data, cfg.trainer, train_rng);
  const Matrix k = representation_kernel(aggs, p).entries;
  EXPECT_TRUE(is_psd(k));
  EXPECT_EQ(table.mu, mvn_sample(Vector::Zero(4), chol(k), sample));

  RandomStream again(10);
  EXPECT_EQ(rep_kernel_reward(space, cfg, again).mu, table.mu);
}

TEST(RepKernelReward, UntrainedRepresentationIsWellDefined) {
  RandomStream rng(7);
  const auto space = gen_action_space(ErdosRenyi{0.4}, 5, 8, 3, rng);
  const GnnParams p = init_params(2, 16, 3, rng);
  const auto k = representation_kernel(space, p);
  EXPECT_GT(k.entries.diagonal().maxCoeff(), 0.0);
  EXPECT_TRUE(is_psd(k.entries));
}

TEST(RepKernelReward, SampleCovarianceMonteCarlo) {
  RandomStream space_rng(8);
  const auto space = gen_action_space(ErdosRenyi{0.5}, 2, 8, 3, space_rng);
  RandomStream init(3);
  const GnnParams p = init_params(2, 8, 3, init);
  const Matrix k = representation_kernel(space, p).entries;
  const auto factor = chol(k);
  Matrix target = k;
  target.diagonal().array() += factor.jitter;
  const int n = 10000;
  Matrix cov = Matrix::Zero(2, 2);
  RandomStream rng(4);
  for (int s = 0; s < n; ++s) {
    const Vector x = mvn_sample(Vector::Zero(2), factor, rng);
    cov += x * x.transpose() / n;
  }
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double se = std::sqrt((target(i, j) * target(i, j) + target(i, i) * target(j, j)) / n);
      EXPECT_NEAR(cov(i, j), target(i, j), 4 * se);
    }
}

TEST(Pull, NoiselessIsExact) {
  Vector mu(2);
  mu << 0.3, -0.2;
  const auto t = RewardTable::from_means(mu, RewardKind::Linear);
  RandomStream rng(1);
  EXPECT_EQ(pull(t, 1, 0.0, rng), -0.2);
  expect_error(ErrorCode::IndexOutOfRange, [&] { pull(t, 2, 0.0, rng); });
}

TEST(Pull, NoiseStandardDeviation) {
  Vector mu(1);
  mu << 1.0;
  const auto t = RewardTable::from_means(mu, RewardKind::Linear);
  RandomStream rng(2);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e = pull(t, 0, 0.01, rng) - 1.0;
    s += e;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  EXPECT_NEAR(sd, 0.01, 4 * 0.01 / std::sqrt(2.0 * n));
  RandomStream a(3);
  RandomStream b(3);
  EXPECT_EQ(pull(t, 0, 0.01, a), pull(t, 0, 0.01, b));
}

TEST(Algorithms, NamesRoundTrip) {
  for (auto a : kAllAlgorithms) EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_FALSE(parse_algorithm("GNN-XX").has_value());
  EXPECT_TRUE(uses_identity_aggregation(Algorithm::NnPe));
  EXPECT_FALSE(uses_identity_aggregation(Algorithm::GnnTs));
  EXPECT_EQ(rule_of(Algorithm::NnUcb), Rule::Ucb);
}

TEST(Environment, SharedFeaturesMatchAggregation) {
  const EnvConfig cfg = small_env();
  const auto env = make_environment(cfg, RandomStream(5));
  ASSERT_EQ(env.space.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(env.graph_features[i]->rows, aggregate(env.space[i], false).rows);
    EXPECT_EQ(env.node_features[i]->rows, aggregate(env.space[i], true).rows);
  }
  EXPECT_EQ(&env.features_for(Algorithm::NnTs), &env.node_features);
  EXPECT_EQ(cfg.name(), "er_p0.4_N8_G6_d4_linear");
}

TEST(Environment, AllGeneratorsAreDeterministic) {
  for (auto kind : {RewardKind::Linear, RewardKind::GpGntk, RewardKind::GpRep}) {
    EnvConfig cfg = small_env();
    cfg.reward = kind;
    cfg.graph = DotProduct{};
    const auto a = make_environment(cfg, RandomStream(8));
    const auto b = make_environment(cfg, RandomStream(8));
    EXPECT_EQ(a.table.mu, b.table.mu);
    EXPECT_EQ(a.table.generator, kind);
  }
}

TEST(RunBandit, SingleRound) {
  const EnvConfig cfg = small_env(1);
  const auto env = make_environment(cfg, RandomStream(1));
  for (auto alg : kAllAlgorithms) {
    const auto run = run_bandit(alg, env, cfg, small_hyper(), 11);
    ASSERT_EQ(run.rounds.size(), 1u);
    EXPECT_EQ(run.rounds[0].t, 1u);
    EXPECT_GE(run.rounds[0].cum_regret, 0.0);
    EXPECT_EQ(run.rounds[0].cum_regret, run.rounds[0].inst_regret);
  }
}

TEST(RunBandit, FirstRoundTiesGoToIndexZero) {
  const EnvConfig cfg = small_env(1);
  const auto env = make_environment(cfg, RandomStream(2));
  BanditHyper hp = small_hyper();
  hp.nu = 0.0;
  EXPECT_EQ(run_bandit(Algorithm::GnnTs, env, cfg, hp, 3).rounds[0].choice, 0u);
}

TEST(RunBandit, RandomRegretMatchesMeanGap) {
  const EnvConfig cfg = small_env(10000);
  const auto env = make_environment(cfg, RandomStream(3));
  const auto run = run_bandit(Algorithm::Random, env, cfg, small_hyper(), 4);
  double mean_gap = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < env.table.size(); ++i) {
    mean_gap += env.table.gap(i) / static_cast<double>(env.table.size());
    sq += env.table.gap(i) * env.table.gap(i) / static_cast<double>(env.table.size());
  }
  const double sd = std::sqrt(sq - mean_gap * mean_gap);
  EXPECT_NEAR(run.final_regret() / 10000.0, mean_gap, 4 * sd / 100.0);
}

TEST(RunBandit, RegretIsNonNegativeAndMonotone) {
  const EnvConfig cfg = small_env(25);
  const auto env = make_environment(cfg, RandomStream(4));
  for (auto alg : kAllAlgorithms) {
    const auto run = run_bandit(alg, env, cfg, small_hyper(), 5);
    double previous = 0.0;
    for (const auto& r : run.rounds) {
      EXPECT_GE(r.inst_regret, 0.0);
      EXPECT_GE(r.cum_regret, previous);
      EXPECT_LT(r.choice, env.table.size());
      previous = r.cum_regret;
    }
  }
}

TEST(RunBandit, Deterministic) {
  const EnvConfig cfg = small_env(20);
  const auto env = make_environment(cfg, RandomStream(6));
  for (auto alg : {Algorithm::GnnTs, Algorithm::NnUcb, Algorithm::GnnPe}) {
    const auto a = run_bandit(alg, env, cfg, small_hyper(), 9);
    const auto b = run_bandit(alg, env, cfg, small_hyper(), 9);
    std::ostringstream sa, sb;
    write_raw_rows(sa, a);
    write_raw_rows(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.fingerprint, b.fingerprint);
  }
}

TEST(RunBandit, PotentialInequalityHolds) {
  const EnvConfig cfg = small_env(40);
  const auto env = make_environment(cfg, RandomStream(7));
  BanditHyper hp = small_hyper();
  hp.uncertainty = UncertaintyMode::Full;
  hp.track_potential = true;
  for (auto alg : {Algorithm::GnnTs, Algorithm::GnnUcb, Algorithm::NnTs}) {
    const auto run = run_bandit(alg, env, cfg, hp, 8);
    ASSERT_TRUE(run.potential.has_value());
    EXPECT_GT(run.potential->lhs, 0.0);
    EXPECT_TRUE(run.potential->holds()) << run.potential->lhs << " > " << run.potential->rhs;
  }
}

TEST(RunBandit, PotentialNeedsFullMode) {
  const EnvConfig cfg = small_env(5);
  const auto env = make_environment(cfg, RandomStream(7));
  BanditHyper hp = small_hyper();
  hp.track_potential = true;
  expect_error(ErrorCode::ValidationError, [&] { run_bandit(Algorithm::GnnTs, env, cfg, hp, 1); });
}

TEST(RunBandit, InvalidHyperparametersReported) {
  const EnvConfig cfg = small_env(5);
  const auto env = make_environment(cfg, RandomStream(7));
  BanditHyper hp = small_hyper();
  hp.width = 7;
  hp.nu = -1.0;
  try {
    run_bandit(Algorithm::GnnTs, env, cfg, hp, 1);
    ADD_FAILURE() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("nu"), std::string::npos);
  }
}

TEST(LogDetGrowth, MatchesDenseDeterminant) {
  RandomStream rng(9);
  Matrix x(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.normal();
  const double lambda = 0.4;
  // det(I_4 + X^T X / lambda), the p x p side of Sylvester's identity.
  Matrix u = Matrix::Identity(4, 4) + x.transpose() * x / lambda;
  EXPECT_NEAR(log_det_growth(x, lambda), std::log(u.determinant()), 1e-10);
  EXPECT_EQ(log_det_growth(Matrix(0, 4), lambda), 0.0);
}

TEST(RawCsv, HeaderAndRows) {
  RunResult run;
  run.algorithm = Algorithm::NnPe;
  run.rep = 2;
  run.rounds.push_back({1, 3, 0.25, 0.5, 0.5});
  run.rounds.push_back({2, 0, -0.1, 0.0, 0.5});
  std::ostringstream os;
  write_raw_header(os);
  write_raw_rows(os, run);
  EXPECT_EQ(os.str(),
            "rep,alg,t,choice,reward,inst_regret,cum_regret\n"
            "2,NN-PE,1,3,0.25,0.5,0.5\n"
            "2,NN-PE,2,0,-0.1,0,0.5\n");
}
