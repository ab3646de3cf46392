#pragma once

#include <algorithm>
#include <cmath>

#include "gnts/environment.hpp"
#include "gnts/experiment.hpp"
#include "gnts/gnn.hpp"
#include "gnts/graph.hpp"

namespace gnts {

/// max_k |analytic_k - numeric_k| / max(||analytic||_inf, ||numeric||_inf),
/// numeric from central differences of forward_gnn.
inline double gradient_check(const GnnParams& params, const AggregatedFeatures& agg,
                             double step = 1e-4) {
  const Vector analytic = grad_gnn(params, agg);
  GnnParams probe = params;
  Vector numeric(analytic.size());
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double saved = probe.flat()(k);
    probe.flat()(k) = saved + step;
    const double up = forward_gnn(probe, agg);
    probe.flat()(k) = saved - step;
    const double down = forward_gnn(probe, agg);
    probe.flat()(k) = saved;
    numeric(k) = (up - down) / (2.0 * step);
  }
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Gaussian parameters without the mirrored structure of init_params.
inline GnnParams random_params(std::size_t layers, std::size_t width, std::size_t input_dim,
                               RandomStream& rng) {
  GnnParams params(layers, width, input_dim);
  for (auto& v : params.flat()) v = std::sqrt(2.0) * rng.normal();
  return params;
}

struct GradcheckOptions {
  std::size_t layers = 2;
  std::size_t width = 32;
  std::size_t nodes = 20;
  std::size_t features = 10;
  std::size_t trials = 10;
  double step = 1e-4;
  std::uint64_t seed = 0;
};

/// Worst relative error over `trials` random (parameters, ER graph) draws.
inline double gradcheck(const GradcheckOptions& opt) {
  RandomStream rng(opt.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < opt.trials; ++k) {
    RandomStream draw = rng.split(k);
    const Graph g = gen_er(opt.nodes, 0.4, opt.features, draw);
    const GnnParams params = random_params(opt.layers, opt.width, opt.features, draw);
    worst = std::max(worst, gradient_check(params, aggregate(g, false), opt.step));
  }
  return worst;
}

/// One GNN-TS run of repetition 0 with full-mode uncertainty, reporting both
/// sides of the elliptical potential inequality.
inline PotentialCheck potential_run(const ExperimentConfig& cfg, Algorithm alg = Algorithm::GnnTs) {
  // hyperparameters of `alg` if configured, else of the first algorithm
  BanditHyper hp = cfg.algorithms.empty() ? default_hyper() : cfg.algorithms.front().hyper;
  for (const auto& spec : cfg.algorithms)
    if (spec.algorithm == alg) hp = spec.hyper;
  hp.uncertainty = UncertaintyMode::Full;
  hp.track_potential = true;
  const Environment env = make_environment(cfg.env, environment_stream(cfg.seed, 0));
  const RunResult run = run_bandit(alg, env, cfg.env, hp, run_seed(cfg.seed, 0, alg), 0);
  return *run.potential;
}

}  // namespace gnts
