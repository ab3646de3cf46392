#pragma once

#include <cmath>
#include <vector>

#include "gnts/gnn.hpp"
#include "gnts/graph.hpp"
#include "gnts/linalg.hpp"

namespace gnts {

enum class ThetaTag { Initial, Current };

/// g(G; theta) / sqrt(m), used as a linear feature for uncertainty.
struct TangentFeature {
  Vector vec;
  std::size_t width = 0;
  ThetaTag theta_tag = ThetaTag::Current;
};

inline TangentFeature tangent_feature(const GnnParams& params, const AggregatedFeatures& agg,
                                      ThetaTag tag = ThetaTag::Current) {
  Vector g = grad_gnn(params, agg);
  g /= std::sqrt(static_cast<double>(params.width()));
  return {std::move(g), params.width(), tag};
}

/// Rows are tangent features at params0, one per action.
inline Matrix tangent_feature_matrix(const std::vector<AggregatedFeatures>& aggs,
                                     const GnnParams& params0) {
  Matrix feats(static_cast<Eigen::Index>(aggs.size()),
               static_cast<Eigen::Index>(params0.total_dim()));
  for (std::size_t i = 0; i < aggs.size(); ++i)
    feats.row(static_cast<Eigen::Index>(i)) = tangent_feature(params0, aggs[i], ThetaTag::Initial).vec;
  return feats;
}

/// K[i][j] = <g_i, g_j> / m at the initial parameters, before symmetrizing.
inline Matrix empirical_gntk_raw(const std::vector<AggregatedFeatures>& aggs,
                                 const GnnParams& params0) {
  const Matrix feats = tangent_feature_matrix(aggs, params0);
  return feats * feats.transpose();
}

inline KernelMatrix empirical_gntk(const std::vector<AggregatedFeatures>& aggs,
                                   const GnnParams& params0) {
  const Matrix raw = empirical_gntk_raw(aggs, params0);
  return {0.5 * (raw + raw.transpose()), KernelKind::EmpiricalGntk};
}

inline KernelMatrix empirical_gntk(const ActionSpace& space, const GnnParams& params0,
                                   bool identity_mode) {
  return empirical_gntk(aggregate_all(space, identity_mode), params0);
}

/// Mean over all rows of the penultimate pre-activation f^(L-1).
inline Vector representation(const GnnParams& params, const AggregatedFeatures& agg) {
  const auto trace = detail::forward_rows(params, agg.rows);
  return trace.pre.back().colwise().mean().transpose();
}

inline KernelMatrix representation_kernel(const std::vector<AggregatedFeatures>& aggs,
                                          const GnnParams& params) {
  Matrix reps(static_cast<Eigen::Index>(aggs.size()), static_cast<Eigen::Index>(params.width()));
  for (std::size_t i = 0; i < aggs.size(); ++i)
    reps.row(static_cast<Eigen::Index>(i)) = representation(params, aggs[i]).transpose();
  Matrix k = reps * reps.transpose();
  return {0.5 * (k + k.transpose()), KernelKind::Representation};
}

inline KernelMatrix representation_kernel(const ActionSpace& space, const GnnParams& params,
                                          bool identity_mode = false) {
  return representation_kernel(aggregate_all(space, identity_mode), params);
}

}  // namespace gnts
