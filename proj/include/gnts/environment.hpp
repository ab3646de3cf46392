#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gnts/error.hpp"
#include "gnts/gnn.hpp"
#include "gnts/graph.hpp"
#include "gnts/io.hpp"
#include "gnts/linalg.hpp"
#include "gnts/policy.hpp"
#include "gnts/random.hpp"
#include "gnts/tangent.hpp"

namespace gnts {

enum class RewardKind { Linear, GpGntk, GpRep };

inline std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::Linear: return "linear";
    case RewardKind::GpGntk: return "gp_gntk";
    case RewardKind::GpRep: return "gp_rep";
  }
  return "?";
}

inline std::optional<RewardKind> parse_reward_kind(std::string_view s) {
  for (auto k : {RewardKind::Linear, RewardKind::GpGntk, RewardKind::GpRep})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// True mean reward of every action, with its (lowest-index) optimum.
struct RewardTable {
  Vector mu;
  std::size_t best_index = 0;
  double best_value = 0.0;
  RewardKind generator = RewardKind::Linear;

  static RewardTable from_means(Vector mu, RewardKind kind) {
    require(mu.size() >= 1, ErrorCode::EmptyActions, "reward table must be nonempty");
    require(mu.allFinite(), ErrorCode::NonFinite, "reward means must be finite");
    RewardTable t;
    t.best_index = argmax(std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())));
    t.best_value = mu(static_cast<Eigen::Index>(t.best_index));
    t.mu = std::move(mu);
    t.generator = kind;
    return t;
  }

  std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
  double gap(std::size_t i) const { return best_value - mu(static_cast<Eigen::Index>(i)); }
};

/// mu(G) = <theta*, mean_i h_i^G>
inline RewardTable linear_reward_with(const std::vector<AggregatedFeatures>& aggs,
                                      const Vector& theta_star) {
  require(!aggs.empty(), ErrorCode::EmptyActions, "no graphs");
  Vector mu(static_cast<Eigen::Index>(aggs.size()));
  for (std::size_t i = 0; i < aggs.size(); ++i) {
    require(static_cast<Eigen::Index>(aggs[i].dim()) == theta_star.size(),
            ErrorCode::DimensionMismatch, "theta* dimension mismatch");
    mu(static_cast<Eigen::Index>(i)) = aggs[i].rows.colwise().mean().dot(theta_star.transpose());
  }
  return RewardTable::from_means(std::move(mu), RewardKind::Linear);
}

inline RewardTable linear_reward(const std::vector<AggregatedFeatures>& aggs, std::size_t d,
                                 RandomStream& rng) {
  Vector theta_star(static_cast<Eigen::Index>(d));
  for (auto& v : theta_star) v = rng.normal();
  return linear_reward_with(aggs, theta_star);
}

/// Pseudo-labels y ~ N(0, I) observed under the empirical GNTK prior; mu is a
/// draw from the resulting GP posterior.
inline RewardTable gp_gntk_reward(const std::vector<AggregatedFeatures>& aggs,
                                  const GnnParams& params0, double noise_var, RandomStream& rng) {
  const KernelMatrix k = empirical_gntk(aggs, params0);
  Vector y(static_cast<Eigen::Index>(aggs.size()));
  for (auto& v : y) v = rng.normal();
  const GpPosterior post = gp_posterior(k.entries, y, noise_var);
  const CholFactor factor = chol(post.cov);
  return RewardTable::from_means(mvn_sample(post.mean, factor, rng), RewardKind::GpGntk);
}

struct RepPretrainConfig {
  std::size_t layers = 2;
  std::size_t width = 512;
  TrainerConfig trainer{0.01, 1e-3, 30, 2, Adam{}, true};
};

/// Average-degree targets standardized over the action space (centered only
/// when every graph has the same average degree).
inline std::vector<double> standardized_degree_targets(const ActionSpace& space) {
  std::vector<double> deg;
  for (const auto& g : space) deg.push_back(average_degree(g));
  double mean = 0.0;
  for (double v : deg) mean += v;
  mean /= static_cast<double>(deg.size());
  double var = 0.0;
  for (double v : deg) var += (v - mean) * (v - mean);
  var /= static_cast<double>(deg.size());
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  for (double& v : deg) v = (v - mean) / sd;
  return deg;
}

/// Pretrains a fresh network to predict average degree, then draws
/// mu ~ N(0, K_rep + jitter) from its mean-pooled penultimate representation.
inline RewardTable rep_kernel_reward(const ActionSpace& space,
                                     const std::vector<AggregatedFeatures>& aggs,
                                     const RepPretrainConfig& cfg, RandomStream& rng) {
  require(aggs.size() == space.size(), ErrorCode::DimensionMismatch, "features per graph");
  RandomStream init_rng = rng.split(1);
  RandomStream train_rng = rng.split(2);
  RandomStream sample_rng = rng.split(3);
  GnnParams params = init_params(cfg.layers, cfg.width, space.feature_dim(), init_rng);
  const auto targets = standardized_degree_targets(space);
  std::vector<LabeledGraph> data;
  for (std::size_t i = 0; i < aggs.size(); ++i)
    data.push_back({std::make_shared<AggregatedFeatures>(aggs[i]), targets[i]});
  params = adam_train(params, data, cfg.trainer, train_rng);
  const KernelMatrix k = representation_kernel(aggs, params);
  const CholFactor factor = chol(k.entries);
  return RewardTable::from_means(
      mvn_sample(Vector::Zero(static_cast<Eigen::Index>(space.size())), factor, sample_rng),
      RewardKind::GpRep);
}

inline RewardTable rep_kernel_reward(const ActionSpace& space, const RepPretrainConfig& cfg,
                                     RandomStream& rng) {
  return rep_kernel_reward(space, aggregate_all(space, false), cfg, rng);
}

/// y = mu(G) + eps, eps ~ N(0, noise_sd^2)
inline double pull(const RewardTable& table, std::size_t index, double noise_sd,
                   RandomStream& rng) {
  require(index < table.size(), ErrorCode::IndexOutOfRange,
          "action " + std::to_string(index) + " out of range");
  return table.mu(static_cast<Eigen::Index>(index)) + noise_sd * rng.normal();
}

enum class Algorithm { GnnTs, GnnUcb, GnnPe, NnTs, NnUcb, NnPe, Random };
enum class Rule { Ts, Ucb, Pe, Uniform };

inline constexpr std::array<Algorithm, 7> kAllAlgorithms{
    Algorithm::GnnTs, Algorithm::GnnUcb, Algorithm::GnnPe, Algorithm::NnTs,
    Algorithm::NnUcb, Algorithm::NnPe,   Algorithm::Random};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GnnTs: return "GNN-TS";
    case Algorithm::GnnUcb: return "GNN-UCB";
    case Algorithm::GnnPe: return "GNN-PE";
    case Algorithm::NnTs: return "NN-TS";
    case Algorithm::NnUcb: return "NN-UCB";
    case Algorithm::NnPe: return "NN-PE";
    case Algorithm::Random: return "Random";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  for (auto a : kAllAlgorithms)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

inline Rule rule_of(Algorithm a) {
  switch (a) {
    case Algorithm::GnnTs:
    case Algorithm::NnTs: return Rule::Ts;
    case Algorithm::GnnUcb:
    case Algorithm::NnUcb: return Rule::Ucb;
    case Algorithm::GnnPe:
    case Algorithm::NnPe: return Rule::Pe;
    case Algorithm::Random: return Rule::Uniform;
  }
  return Rule::Uniform;
}

/// NN baselines replace the adjacency by the identity.
inline bool uses_identity_aggregation(Algorithm a) {
  return a == Algorithm::NnTs || a == Algorithm::NnUcb || a == Algorithm::NnPe;
}

struct EnvConfig {
  GraphKind graph = ErdosRenyi{0.4};
  std::size_t nodes = 50;
  std::size_t actions = 100;
  std::size_t features = 10;
  RewardKind reward = RewardKind::Linear;
  double noise_sd = 0.01;
  std::size_t horizon = 1000;
  double gp_noise_var = 1.0;
  // network used by the gp_gntk and gp_rep reward generators
  std::size_t kernel_layers = 2;
  std::size_t kernel_width = 512;
  bool normalize = true;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (const auto* er = std::get_if<ErdosRenyi>(&graph))
      if (!(er->p >= 0.0 && er->p <= 1.0)) out.push_back("environment.edge_probability must lie in [0,1]");
    if (nodes < 1) out.push_back("environment.nodes must be >= 1");
    if (actions < 1) out.push_back("environment.actions must be >= 1");
    if (features < 1) out.push_back("environment.features must be >= 1");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) out.push_back("environment.noise must be >= 0");
    if (horizon < 1) out.push_back("experiment.horizon must be >= 1");
    if (!(gp_noise_var > 0.0)) out.push_back("environment.gp_noise must be > 0");
    if (kernel_layers < 2) out.push_back("model.layers must be >= 2");
    if (kernel_width < 2 || kernel_width % 2 != 0) out.push_back("model.width must be even and >= 2");
    return out;
  }

  std::string name() const {
    std::ostringstream os;
    if (const auto* er = std::get_if<ErdosRenyi>(&graph))
      os << "er_p" << format_double(er->p);
    else
      os << "rdpg";
    os << "_N" << nodes << "_G" << actions << "_d" << features << '_' << to_string(reward);
    return os.str();
  }
};

/// One repetition's shared world: the action space, both aggregations of it,
/// and the true reward table.
struct Environment {
  ActionSpace space;
  std::vector<std::shared_ptr<const AggregatedFeatures>> graph_features;
  std::vector<std::shared_ptr<const AggregatedFeatures>> node_features;
  RewardTable table;

  const std::vector<std::shared_ptr<const AggregatedFeatures>>& features_for(Algorithm a) const {
    return uses_identity_aggregation(a) ? node_features : graph_features;
  }
};

inline Environment make_environment(const EnvConfig& cfg, const RandomStream& rng) {
  const auto bad = cfg.violations();
  require(bad.empty(), ErrorCode::ValidationError, bad.empty() ? "" : bad.front());
  RandomStream graph_rng = rng.split(1);
  RandomStream reward_rng = rng.split(2);
  ActionSpace space = gen_action_space(cfg.graph, cfg.actions, cfg.nodes, cfg.features, graph_rng);
  auto graph_aggs = aggregate_all(space, false, cfg.normalize);
  auto node_aggs = aggregate_all(space, true, cfg.normalize);

  RewardTable table;
  switch (cfg.reward) {
    case RewardKind::Linear:
      table = linear_reward(graph_aggs, cfg.features, reward_rng);
      break;
    case RewardKind::GpGntk: {
      RandomStream init_rng = reward_rng.split(1);
      const GnnParams params0 =
          init_params(cfg.kernel_layers, cfg.kernel_width, cfg.features, init_rng);
      table = gp_gntk_reward(graph_aggs, params0, cfg.gp_noise_var, reward_rng);
      break;
    }
    case RewardKind::GpRep: {
      RepPretrainConfig pre;
      pre.layers = cfg.kernel_layers;
      pre.width = cfg.kernel_width;
      table = rep_kernel_reward(space, graph_aggs, pre, reward_rng);
      break;
    }
  }

  Environment env{std::move(space), {}, {}, std::move(table)};
  for (auto& a : graph_aggs) env.graph_features.push_back(std::make_shared<AggregatedFeatures>(std::move(a)));
  for (auto& a : node_aggs) env.node_features.push_back(std::make_shared<AggregatedFeatures>(std::move(a)));
  return env;
}

struct BanditHyper {
  std::size_t layers = 2;
  std::size_t width = 512;
  double nu = 1.0;
  double beta = 1.0;
  TrainerConfig trainer{};
  UncertaintyMode uncertainty = UncertaintyMode::Diagonal;
  bool initial_gradients = false;
  std::size_t train_every = 1;
  // full mode only: evaluate both sides of the elliptical potential bound
  bool track_potential = false;

  double lambda() const { return trainer.l2_weight; }

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (layers < 2) out.push_back("model.layers must be >= 2");
    if (width < 2 || width % 2 != 0) out.push_back("model.width must be even and >= 2");
    if (!(nu >= 0.0)) out.push_back("model.nu must be >= 0");
    if (!(beta >= 0.0)) out.push_back("model.beta must be >= 0");
    if (!(trainer.learning_rate > 0.0)) out.push_back("model.learning_rate must be > 0");
    if (!(trainer.l2_weight > 0.0)) out.push_back("model.lambda must be > 0");
    if (trainer.epochs < 1) out.push_back("model.epochs must be >= 1");
    if (trainer.minibatch_size < 1) out.push_back("model.batch_size must be >= 1");
    if (train_every < 1) out.push_back("model.train_every must be >= 1");
    if (track_potential && uncertainty != UncertaintyMode::Full)
      out.push_back("potential tracking requires uncertainty = full");
    return out;
  }

  std::string fingerprint() const {
    std::ostringstream os;
    os << "L=" << layers << ";m=" << width << ";nu=" << format_double(nu)
       << ";beta=" << format_double(beta) << ";lr=" << format_double(trainer.learning_rate)
       << ";lambda=" << format_double(trainer.l2_weight) << ";epochs=" << trainer.epochs
       << ";batch=" << trainer.minibatch_size
       << ";unc=" << (uncertainty == UncertaintyMode::Full ? "full" : "diagonal")
       << ";grads=" << (initial_gradients ? "initial" : "current")
       << ";warm=" << (trainer.warm_start ? 1 : 0) << ";every=" << train_every
       << ";center=" << (trainer.ridge_center == RidgeCenter::Origin ? "origin" : "initial")
       << ";scaling="
       << (trainer.batch_scaling == BatchScaling::HistoryLength ? "history" : "batch");
    return os.str();
  }
};

struct RoundRecord {
  std::size_t t = 0;  // 1-based
  std::size_t choice = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
};

/// Both sides of sum_t min{1, sigma_t^2(G_t)} <= 2 log(det U_T / det U_0).
struct PotentialCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs; }
};

struct RunResult {
  Algorithm algorithm = Algorithm::Random;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::vector<RoundRecord> rounds;
  std::optional<PotentialCheck> potential;

  double final_regret() const { return rounds.empty() ? 0.0 : rounds.back().cum_regret; }
};

/// log det(I + X^T X / lambda) computed in the T x T form.
inline double log_det_growth(const Matrix& played, double lambda) {
  if (played.rows() == 0) return 0.0;
  Matrix gram = played * played.transpose() / lambda;
  gram.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(gram);
  require(llt.info() == Eigen::Success, ErrorCode::NotFactorizable, "I + X X^T / lambda");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// One bandit run. Each round: evaluate f and sigma for every action from
/// theta_{t-1} and U_{t-1}, select, observe, grow U with the chosen tangent
/// feature, append to history and retrain.
inline RunResult run_bandit(Algorithm alg, const Environment& env, const EnvConfig& cfg,
                            const BanditHyper& hp, std::uint64_t seed, std::size_t rep = 0) {
  {
    auto bad = hp.violations();
    for (auto& v : cfg.violations()) bad.push_back(v);
    if (!bad.empty()) {
      std::string msg;
      for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
      fail(ErrorCode::ValidationError, msg);
    }
  }
  RunResult result;
  result.algorithm = alg;
  result.rep = rep;
  result.seed = seed;
  result.fingerprint = std::string(to_string(alg)) + ";" + hp.fingerprint();

  const RandomStream base(seed);
  RandomStream init_rng = base.split(1);
  RandomStream policy_rng = base.split(2);
  RandomStream noise_rng = base.split(3);
  RandomStream train_rng = base.split(4);

  const auto& feats = env.features_for(alg);
  const std::size_t count = feats.size();
  const Rule rule = rule_of(alg);
  const double sqrt_m = std::sqrt(static_cast<double>(hp.width));

  const GnnParams theta0 = init_params(hp.layers, hp.width, env.space.feature_dim(), init_rng);
  GnnParams theta = theta0;
  UncertaintyState state(hp.uncertainty, theta0.total_dim(), hp.lambda(), hp.width);
  HistoryBuffer history;
  ActiveSet active(count);

  std::vector<TangentFeature> initial_tf;
  if (hp.initial_gradients && rule != Rule::Uniform)
    for (const auto& f : feats) initial_tf.push_back(tangent_feature(theta0, *f, ThetaTag::Initial));

  std::vector<double> means(count, 0.0), sigmas(count, 0.0);
  std::vector<TangentFeature> tfs(count);
  std::vector<char> wanted(count, 1);
  Matrix played;
  double potential_lhs = 0.0;
  if (hp.track_potential)
    played.resize(static_cast<Eigen::Index>(cfg.horizon), static_cast<Eigen::Index>(theta0.total_dim()));

  double cum = 0.0;
  result.rounds.reserve(cfg.horizon);
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    try {
      std::size_t choice = 0;
      if (rule == Rule::Uniform) {
        choice = random_select(count, policy_rng);
      } else {
        if (rule == Rule::Pe) {
          std::fill(wanted.begin(), wanted.end(), 0);
          for (auto i : active.members()) wanted[i] = 1;
        }
        for (std::size_t i = 0; i < count; ++i) {
          if (!wanted[i]) continue;
          if (hp.initial_gradients) {
            means[i] = forward_gnn(theta, *feats[i]);
            tfs[i] = initial_tf[i];
          } else {
            auto [value, grad] = value_and_grad_gnn(theta, *feats[i]);
            means[i] = value;
            tfs[i] = TangentFeature{std::move(grad) / sqrt_m, hp.width, ThetaTag::Current};
          }
          sigmas[i] = sigma(state, tfs[i]);
        }
        switch (rule) {
          case Rule::Ts: choice = ts_select(means, sigmas, hp.nu, policy_rng).index; break;
          case Rule::Ucb: choice = ucb_select(means, sigmas, hp.beta); break;
          case Rule::Pe: {
            auto step = pe_step(means, sigmas, hp.beta, active);
            choice = step.index;
            active = std::move(step.active);
            break;
          }
          case Rule::Uniform: break;
        }
      }

      const double y = pull(env.table, choice, cfg.noise_sd, noise_rng);

      if (rule != Rule::Uniform) {
        if (hp.track_potential) {
          potential_lhs += std::min(1.0, sigmas[choice] * sigmas[choice]);
          played.row(static_cast<Eigen::Index>(t - 1)) = tfs[choice].vec.transpose();
        }
        state.add(tfs[choice].vec);
        history.append(feats[choice], y);
        if (t % hp.train_every == 0) theta = train(theta, theta0, history, hp.trainer, train_rng);
      }

      const double inst = env.table.gap(choice);
      cum += inst;
      result.rounds.push_back({t, choice, y, inst, cum});
    } catch (const Error& e) {
      throw Error(e.code(), std::string("alg=") + std::string(to_string(alg)) +
                                " rep=" + std::to_string(rep) + " t=" + std::to_string(t) + ": " +
                                e.what());
    }
  }

  if (hp.track_potential && rule != Rule::Uniform)
    result.potential = PotentialCheck{potential_lhs, 2.0 * log_det_growth(played, hp.lambda())};
  return result;
}

inline void write_raw_header(std::ostream& os) {
  os << "rep,alg,t,choice,reward,inst_regret,cum_regret\n";
}

inline void write_raw_rows(std::ostream& os, const RunResult& run) {
  for (const auto& r : run.rounds)
    os << run.rep << ',' << to_string(run.algorithm) << ',' << r.t << ',' << r.choice << ','
       << format_double(r.reward) << ',' << format_double(r.inst_regret) << ','
       << format_double(r.cum_regret) << '\n';
}

}  // namespace gnts
