#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "gnts/error.hpp"
#include "gnts/random.hpp"
#include "gnts/tangent.hpp"

namespace gnts {

enum class UncertaintyMode { Full, Diagonal };

/// Regularized design matrix U_t = lambda I + sum x x^T over played tangent
/// features. Full mode keeps U^{-1} (Sherman-Morrison); diagonal mode keeps
/// only diag(U) and inverts it entrywise.
class UncertaintyState {
 public:
  UncertaintyState(UncertaintyMode mode, std::size_t dim, double lambda, std::size_t width)
      : mode_(mode), lambda_(lambda), width_(width) {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument,
            "lambda must be > 0");
    require(dim >= 1, ErrorCode::InvalidArgument, "dimension must be >= 1");
    const auto p = static_cast<Eigen::Index>(dim);
    if (mode == UncertaintyMode::Full)
      inverse_ = Matrix::Identity(p, p) / lambda;
    else
      diagonal_ = Vector::Constant(p, lambda);
  }

  UncertaintyMode mode() const { return mode_; }
  double lambda() const { return lambda_; }
  std::size_t width() const { return width_; }
  std::size_t rounds() const { return rounds_; }
  std::size_t dim() const {
    return static_cast<std::size_t>(mode_ == UncertaintyMode::Full ? inverse_.rows()
                                                                   : diagonal_.size());
  }

  /// U^{-1}; full mode only.
  const Matrix& inverse() const {
    require(mode_ == UncertaintyMode::Full, ErrorCode::InvalidArgument,
            "inverse is only kept in full mode");
    return inverse_;
  }
  /// diag(U); diagonal mode only.
  const Vector& diagonal() const {
    require(mode_ == UncertaintyMode::Diagonal, ErrorCode::InvalidArgument,
            "diagonal is only kept in diagonal mode");
    return diagonal_;
  }

  /// x^T U^{-1} x
  double quadratic(const Vector& x) const {
    require(static_cast<std::size_t>(x.size()) == dim(), ErrorCode::DimensionMismatch,
            "feature dimension " + std::to_string(x.size()) + " != " + std::to_string(dim()));
    double q = 0.0;
    if (mode_ == UncertaintyMode::Full)
      q = x.dot(inverse_.selfadjointView<Eigen::Lower>() * x);
    else
      q = (x.array().square() / diagonal_.array()).sum();
    return q > 0.0 ? q : 0.0;
  }

  void add(const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == dim(), ErrorCode::DimensionMismatch,
            "feature dimension " + std::to_string(x.size()) + " != " + std::to_string(dim()));
    if (mode_ == UncertaintyMode::Full) {
      const Vector ux = inverse_.selfadjointView<Eigen::Lower>() * x;
      const double denom = 1.0 + x.dot(ux);
      inverse_.selfadjointView<Eigen::Lower>().rankUpdate(ux, -1.0 / denom);
      inverse_.triangularView<Eigen::StrictlyUpper>() = inverse_.transpose().eval();
    } else {
      diagonal_.array() += x.array().square();
    }
    ++rounds_;
  }

 private:
  UncertaintyMode mode_;
  double lambda_;
  std::size_t width_;
  std::size_t rounds_ = 0;
  Matrix inverse_;
  Vector diagonal_;
};

/// sigma_t(G) = sqrt(tf^T U^{-1} tf); tf already carries the 1/sqrt(m).
inline double sigma(const UncertaintyState& state, const TangentFeature& tf) {
  return std::sqrt(state.quadratic(tf.vec));
}

inline UncertaintyState update(UncertaintyState state, const TangentFeature& tf) {
  state.add(tf.vec);
  return state;
}

/// First index of the maximum.
inline std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), ErrorCode::EmptyActions, "no actions to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

struct TsChoice {
  std::size_t index = 0;
  std::vector<double> samples;
};

/// Draws r(G) ~ N(mean(G), nu^2 sigma(G)^2) for every action, in order, and
/// plays the argmax.
inline TsChoice ts_select(std::span<const double> means, std::span<const double> sigmas, double nu,
                          RandomStream& rng) {
  require(!means.empty(), ErrorCode::EmptyActions, "no actions to choose from");
  require(means.size() == sigmas.size(), ErrorCode::DimensionMismatch,
          "means and sigmas differ in length");
  require(nu >= 0.0, ErrorCode::InvalidArgument, "nu must be >= 0");
  TsChoice out;
  out.samples.resize(means.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    out.samples[i] = means[i] + nu * sigmas[i] * rng.normal();
  out.index = argmax(out.samples);
  return out;
}

inline std::size_t ucb_select(std::span<const double> means, std::span<const double> sigmas,
                              double beta) {
  require(!means.empty(), ErrorCode::EmptyActions, "no actions to choose from");
  require(means.size() == sigmas.size(), ErrorCode::DimensionMismatch,
          "means and sigmas differ in length");
  require(beta >= 0.0, ErrorCode::InvalidArgument, "beta must be >= 0");
  std::vector<double> index(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) index[i] = means[i] + beta * sigmas[i];
  return argmax(index);
}

/// Surviving action indices for phased elimination, kept ascending.
class ActiveSet {
 public:
  explicit ActiveSet(std::size_t count) {
    require(count >= 1, ErrorCode::EmptyActiveSet, "active set must be nonempty");
    members_.resize(count);
    for (std::size_t i = 0; i < count; ++i) members_[i] = i;
  }
  explicit ActiveSet(std::vector<std::size_t> members) : members_(std::move(members)) {
    require(!members_.empty(), ErrorCode::EmptyActiveSet, "active set must be nonempty");
  }

  std::size_t size() const { return members_.size(); }
  bool contains(std::size_t i) const {
    return std::find(members_.begin(), members_.end(), i) != members_.end();
  }
  const std::vector<std::size_t>& members() const { return members_; }

 private:
  std::vector<std::size_t> members_;
};

struct PeStep {
  std::size_t index = 0;
  ActiveSet active;
};

/// Plays the most uncertain surviving action, then drops every survivor whose
/// UCB is below the best LCB among survivors. A singleton set is played as is.
inline PeStep pe_step(std::span<const double> means, std::span<const double> sigmas, double beta,
                      const ActiveSet& active) {
  require(active.size() >= 1, ErrorCode::EmptyActiveSet, "active set is empty");
  require(means.size() == sigmas.size(), ErrorCode::DimensionMismatch,
          "means and sigmas differ in length");
  require(beta >= 0.0, ErrorCode::InvalidArgument, "beta must be >= 0");
  for (auto i : active.members())
    require(i < means.size(), ErrorCode::IndexOutOfRange, "active index out of range");

  if (active.size() == 1) return {active.members().front(), active};

  std::size_t chosen = active.members().front();
  double best_lcb = means[chosen] - beta * sigmas[chosen];
  for (auto i : active.members()) {
    if (sigmas[i] > sigmas[chosen]) chosen = i;
    best_lcb = std::max(best_lcb, means[i] - beta * sigmas[i]);
  }
  std::vector<std::size_t> kept;
  for (auto i : active.members())
    if (means[i] + beta * sigmas[i] >= best_lcb) kept.push_back(i);
  return {chosen, ActiveSet(std::move(kept))};
}

inline std::size_t random_select(std::size_t count, RandomStream& rng) {
  require(count >= 1, ErrorCode::EmptyActions, "no actions to choose from");
  return rng.below(count);
}

}  // namespace gnts
