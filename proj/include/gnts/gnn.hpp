#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gnts/error.hpp"
#include "gnts/graph.hpp"
#include "gnts/random.hpp"

namespace gnts {

/// Weights of the L-layer, width-m MLP shared by every node, stored as one
/// flat vector. Layer l (0-based) is a row-major block: m x d for l = 0,
/// m x m for hidden layers, 1 x m for the output layer. No biases.
class GnnParams {
 public:
  GnnParams() = default;

  GnnParams(std::size_t layers, std::size_t width, std::size_t input_dim)
      : layers_(layers), width_(width), input_dim_(input_dim) {
    require(layers >= 2, ErrorCode::InvalidArgument, "need at least 2 layers");
    require(width >= 1 && input_dim >= 1, ErrorCode::InvalidArgument,
            "width and input dimension must be positive");
    theta_ = Vector::Zero(static_cast<Eigen::Index>(total_dim(layers, width, input_dim)));
  }

  /// p = d m + (L - 2) m^2 + m
  static std::size_t total_dim(std::size_t layers, std::size_t width, std::size_t input_dim) {
    return input_dim * width + (layers - 2) * width * width + width;
  }

  std::size_t layers() const { return layers_; }
  std::size_t width() const { return width_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t total_dim() const { return static_cast<std::size_t>(theta_.size()); }

  std::size_t rows(std::size_t l) const { return l + 1 == layers_ ? 1 : width_; }
  std::size_t cols(std::size_t l) const { return l == 0 ? input_dim_ : width_; }

  std::size_t offset(std::size_t l) const {
    if (l == 0) return 0;
    return input_dim_ * width_ + (l - 1) * width_ * width_;
  }

  Eigen::Map<RowMatrix> weight(std::size_t l) {
    return {theta_.data() + offset(l), static_cast<Eigen::Index>(rows(l)),
            static_cast<Eigen::Index>(cols(l))};
  }
  Eigen::Map<const RowMatrix> weight(std::size_t l) const {
    return {theta_.data() + offset(l), static_cast<Eigen::Index>(rows(l)),
            static_cast<Eigen::Index>(cols(l))};
  }

  Vector& flat() { return theta_; }
  const Vector& flat() const { return theta_; }

  /// Copy of this layout holding `theta`.
  GnnParams with_flat(Vector theta) const {
    require(theta.size() == theta_.size(), ErrorCode::DimensionMismatch,
            "flat vector length does not match the layout");
    GnnParams out = *this;
    out.theta_ = std::move(theta);
    return out;
  }

  bool same_layout(const GnnParams& o) const {
    return layers_ == o.layers_ && width_ == o.width_ && input_dim_ == o.input_dim_;
  }

  friend bool operator==(const GnnParams& a, const GnnParams& b) {
    return a.same_layout(b) && a.theta_ == b.theta_;
  }

 private:
  std::size_t layers_ = 0;
  std::size_t width_ = 0;
  std::size_t input_dim_ = 0;
  Vector theta_;
};

/// Gaussian init (entries N(0, 2)) arranged so the network output is exactly
/// zero everywhere: the first layer repeats one half-block of rows, hidden
/// layers are block-diagonal copies of one half-block, and the output layer
/// is [v, -v].
inline GnnParams init_params(std::size_t layers, std::size_t width, std::size_t input_dim,
                             RandomStream& rng) {
  require(width % 2 == 0, ErrorCode::OddWidth, "width must be even, got " + std::to_string(width));
  require(width >= 2, ErrorCode::OddWidth, "width must be at least 2");
  GnnParams params(layers, width, input_dim);
  const auto half = static_cast<Eigen::Index>(width / 2);
  const double scale = std::sqrt(2.0);
  auto gauss = [&] { return scale * rng.normal(); };

  auto first = params.weight(0);
  for (Eigen::Index r = 0; r < half; ++r)
    for (Eigen::Index c = 0; c < first.cols(); ++c) {
      first(r, c) = gauss();
      first(r + half, c) = first(r, c);
    }
  for (std::size_t l = 1; l + 1 < layers; ++l) {
    auto w = params.weight(l);
    for (Eigen::Index r = 0; r < half; ++r)
      for (Eigen::Index c = 0; c < half; ++c) {
        w(r, c) = gauss();
        w(r + half, c + half) = w(r, c);
      }
  }
  auto out = params.weight(layers - 1);
  for (Eigen::Index c = 0; c < half; ++c) {
    out(0, c) = gauss();
    out(0, c + half) = -out(0, c);
  }
  return params;
}

/// Result of pushing one input through the MLP: the scalar output plus the
/// pre-activations f^(1)..f^(L-1) kept for backprop.
struct MlpTrace {
  double value = 0.0;
  std::vector<Vector> pre_activations;
};

namespace detail {

inline void check_input(const GnnParams& params, Eigen::Index cols) {
  require(params.layers() >= 2, ErrorCode::InvalidArgument, "uninitialised parameters");
  require(static_cast<std::size_t>(cols) == params.input_dim(), ErrorCode::DimensionMismatch,
          "input dimension " + std::to_string(cols) + " != " + std::to_string(params.input_dim()));
}

// Row-batched pass: every row of `inputs` is one MLP input.
struct BatchTrace {
  std::vector<RowMatrix> pre;  // pre[l]: rows x m, l = 0..L-2
  Vector out;                  // rows
};

template <class Derived>
BatchTrace forward_rows(const GnnParams& params, const Eigen::MatrixBase<Derived>& inputs) {
  check_input(params, inputs.cols());
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(params.width()));
  const std::size_t depth = params.layers();
  BatchTrace trace;
  trace.pre.reserve(depth - 1);
  trace.pre.emplace_back(inputs * params.weight(0).transpose());
  for (std::size_t l = 1; l + 1 < depth; ++l) {
    RowMatrix z = (trace.pre.back().cwiseMax(0.0) * params.weight(l).transpose()) * inv_sqrt_m;
    trace.pre.push_back(std::move(z));
  }
  trace.out = (trace.pre.back().cwiseMax(0.0) * params.weight(depth - 1).transpose()) * inv_sqrt_m;
  return trace;
}

// grad += sum_r weights[r] * d out[r] / d theta
template <class Derived>
void backward_rows(const GnnParams& params, const Eigen::MatrixBase<Derived>& inputs,
                   const BatchTrace& trace, const Vector& weights, Vector& grad) {
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(params.width()));
  const std::size_t depth = params.layers();
  auto block = [&](std::size_t l) {
    return Eigen::Map<RowMatrix>(grad.data() + params.offset(l),
                                 static_cast<Eigen::Index>(params.rows(l)),
                                 static_cast<Eigen::Index>(params.cols(l)));
  };

  // Output layer: d out / d W(L) = relu(f^(L-1)) / sqrt(m)
  const RowMatrix& last = trace.pre.back();
  block(depth - 1).noalias() += (weights.transpose() * last.cwiseMax(0.0)) * inv_sqrt_m;
  // delta = d out / d f^(L-1), rows x m
  RowMatrix delta = (weights * params.weight(depth - 1)) * inv_sqrt_m;
  delta = delta.cwiseProduct((last.array() > 0.0).cast<double>().matrix());

  for (std::size_t l = depth - 2; l >= 1; --l) {
    const RowMatrix& prev = trace.pre[l - 1];
    block(l).noalias() += (delta.transpose() * prev.cwiseMax(0.0)) * inv_sqrt_m;
    RowMatrix next = (delta * params.weight(l)) * inv_sqrt_m;
    delta = next.cwiseProduct((prev.array() > 0.0).cast<double>().matrix());
  }
  block(0).noalias() += delta.transpose() * inputs;
}

}  // namespace detail

inline MlpTrace forward_mlp(const GnnParams& params, const Vector& h) {
  require(static_cast<std::size_t>(h.size()) == params.input_dim(), ErrorCode::DimensionMismatch,
          "input has length " + std::to_string(h.size()));
  const auto trace = detail::forward_rows(params, h.transpose());
  MlpTrace out;
  out.value = trace.out(0);
  for (const auto& z : trace.pre) out.pre_activations.emplace_back(z.row(0).transpose());
  return out;
}

/// f_gnn(G; theta) = mean over all (padded) nodes of the MLP output.
inline double forward_gnn(const GnnParams& params, const AggregatedFeatures& agg) {
  return detail::forward_rows(params, agg.rows).out.mean();
}

/// Exact gradient of forward_gnn w.r.t. the flat parameters (ReLU'(0) = 0).
inline Vector grad_gnn(const GnnParams& params, const AggregatedFeatures& agg) {
  const auto trace = detail::forward_rows(params, agg.rows);
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(params.total_dim()));
  const Vector weights = Vector::Constant(agg.rows.rows(), 1.0 / static_cast<double>(agg.rows.rows()));
  detail::backward_rows(params, agg.rows, trace, weights, grad);
  return grad;
}

/// Value and gradient in one pass.
inline std::pair<double, Vector> value_and_grad_gnn(const GnnParams& params,
                                                    const AggregatedFeatures& agg) {
  const auto trace = detail::forward_rows(params, agg.rows);
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(params.total_dim()));
  const Vector weights = Vector::Constant(agg.rows.rows(), 1.0 / static_cast<double>(agg.rows.rows()));
  detail::backward_rows(params, agg.rows, trace, weights, grad);
  return {trace.out.mean(), std::move(grad)};
}

/// Observed (graph, reward) pairs in arrival order.
class HistoryBuffer {
 public:
  struct Entry {
    std::shared_ptr<const AggregatedFeatures> features;
    double reward;
  };

  void append(std::shared_ptr<const AggregatedFeatures> features, double reward) {
    require(features != nullptr, ErrorCode::InvalidArgument, "null features");
    require(std::isfinite(reward), ErrorCode::NonFinite, "reward must be finite");
    entries_.push_back({std::move(features), reward});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

namespace detail {

inline double half_mean_squared_error(const GnnParams& params, const HistoryBuffer& history) {
  require(!history.empty(), ErrorCode::EmptyHistory, "loss needs at least one observation");
  double sq = 0.0;
  for (const auto& e : history.entries()) {
    const double r = forward_gnn(params, *e.features) - e.reward;
    sq += r * r;
  }
  return sq / (2.0 * static_cast<double>(history.size()));
}

}  // namespace detail

/// (1/2t) sum_i (f(G_i) - y_i)^2 + (m lambda / 2) ||theta||^2
inline double loss(const GnnParams& params, const HistoryBuffer& history, double lambda) {
  const double m = static_cast<double>(params.width());
  return detail::half_mean_squared_error(params, history) +
         0.5 * m * lambda * params.flat().squaredNorm();
}

/// Same objective with the penalty measured from `center`: ||theta - center||^2.
inline double loss(const GnnParams& params, const HistoryBuffer& history, double lambda,
                   const GnnParams& center) {
  require(params.same_layout(center), ErrorCode::DimensionMismatch, "layout mismatch");
  const double m = static_cast<double>(params.width());
  return detail::half_mean_squared_error(params, history) +
         0.5 * m * lambda * (params.flat() - center.flat()).squaredNorm();
}

struct Sgd {};
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};
using Optimizer = std::variant<Sgd, Adam>;

/// Weight of a minibatch's squared-error sum: 1/t with t the history length,
/// or 1/b with b the batch size (an unbiased estimate of the full data term).
enum class BatchScaling { HistoryLength, BatchSize };

/// Point the l2 penalty pulls towards: the origin or the initial parameters.
enum class RidgeCenter { Origin, Initial };

struct TrainerConfig {
  double learning_rate = 1e-2;
  double l2_weight = 1e-3;
  std::size_t epochs = 30;
  std::size_t minibatch_size = 5;
  Optimizer optimizer = Sgd{};
  bool warm_start = true;
  BatchScaling batch_scaling = BatchScaling::HistoryLength;
  RidgeCenter ridge_center = RidgeCenter::Origin;

  void validate() const {
    require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorCode::ValidationError,
            "learning_rate must be > 0");
    require(std::isfinite(l2_weight) && l2_weight > 0.0, ErrorCode::ValidationError,
            "l2_weight must be > 0");
    require(epochs >= 1, ErrorCode::ValidationError, "epochs must be >= 1");
    require(minibatch_size >= 1, ErrorCode::ValidationError, "minibatch_size must be >= 1");
  }
};

namespace detail {

class OptimizerState {
 public:
  OptimizerState(const Optimizer& opt, Eigen::Index dim) : opt_(opt) {
    if (std::holds_alternative<Adam>(opt_)) {
      m1_ = Vector::Zero(dim);
      m2_ = Vector::Zero(dim);
    }
  }

  void step(Vector& theta, const Vector& grad, double lr) {
    if (const auto* adam = std::get_if<Adam>(&opt_)) {
      ++steps_;
      m1_ = adam->beta1 * m1_ + (1.0 - adam->beta1) * grad;
      m2_ = adam->beta2 * m2_ + (1.0 - adam->beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(adam->beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(adam->beta2, static_cast<double>(steps_));
      theta.array() -=
          lr * (m1_.array() / c1) / ((m2_.array() / c2).sqrt() + adam->epsilon);
    } else {
      theta.noalias() -= lr * grad;
    }
  }

 private:
  Optimizer opt_;
  Vector m1_, m2_;
  long steps_ = 0;
};

// Stacks the node rows of a minibatch; returns per-graph mean outputs and
// writes sum_b residual_weight[b] * g(G_b) into grad.
struct StackedBatch {
  RowMatrix rows;
  std::vector<Eigen::Index> starts;
};

template <class FeatureOf>
StackedBatch stack_batch(std::size_t count, FeatureOf&& feature_of) {
  Eigen::Index total = 0;
  for (std::size_t b = 0; b < count; ++b) total += feature_of(b).rows.rows();
  StackedBatch out;
  out.rows.resize(total, feature_of(0).rows.cols());
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < count; ++b) {
    const auto& r = feature_of(b).rows;
    out.starts.push_back(at);
    out.rows.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  out.starts.push_back(at);
  return out;
}

// Gradient of sum_b 0.5 * scale * (f(G_b) - y_b)^2 over a stacked batch.
inline Vector batch_residual_gradient(const GnnParams& params, const StackedBatch& batch,
                                      const std::vector<double>& targets, double scale) {
  const auto trace = forward_rows(params, batch.rows);
  Vector weights(batch.rows.rows());
  for (std::size_t b = 0; b + 1 < batch.starts.size(); ++b) {
    const auto start = batch.starts[b];
    const auto n = batch.starts[b + 1] - start;
    const double f = trace.out.segment(start, n).mean();
    weights.segment(start, n).setConstant(scale * (f - targets[b]) / static_cast<double>(n));
  }
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(params.total_dim()));
  backward_rows(params, batch.rows, trace, weights, grad);
  return grad;
}

}  // namespace detail

/// Minibatch descent on the ridge objective (1/2t) sum (f - y)^2 +
/// (m lambda / 2) ||theta - c||^2, with c the origin or `initial` per
/// cfg.ridge_center. Each step adds the whole penalty to the batch's
/// squared-error sum weighted per cfg.batch_scaling. One shuffle per epoch
/// from `rng`. Starts from `current` when warm_start is set, otherwise from
/// `initial`.
inline GnnParams train(const GnnParams& current, const GnnParams& initial,
                       const HistoryBuffer& history, const TrainerConfig& cfg, RandomStream& rng) {
  cfg.validate();
  require(!history.empty(), ErrorCode::EmptyHistory, "cannot train on an empty history");
  require(current.same_layout(initial), ErrorCode::DimensionMismatch, "layout mismatch");
  GnnParams params = cfg.warm_start ? current : initial;
  const std::size_t t = history.size();
  const double data_scale = 1.0 / static_cast<double>(t);
  const double ridge = static_cast<double>(params.width()) * cfg.l2_weight;
  detail::OptimizerState opt(cfg.optimizer, params.flat().size());

  std::vector<double> targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(t);
    for (std::size_t start = 0; start < t; start += cfg.minibatch_size) {
      const std::size_t count = std::min(cfg.minibatch_size, t - start);
      const auto batch = detail::stack_batch(
          count, [&](std::size_t b) -> const AggregatedFeatures& {
            return *history[order[start + b]].features;
          });
      targets.clear();
      for (std::size_t b = 0; b < count; ++b) targets.push_back(history[order[start + b]].reward);
      const double scale = cfg.batch_scaling == BatchScaling::HistoryLength
                               ? data_scale
                               : 1.0 / static_cast<double>(count);
      Vector grad = detail::batch_residual_gradient(params, batch, targets, scale);
      if (cfg.ridge_center == RidgeCenter::Origin) {
        grad.noalias() += ridge * params.flat();
      } else {
        grad.noalias() += ridge * (params.flat() - initial.flat());
      }
      opt.step(params.flat(), grad, cfg.learning_rate);
    }
  }
  return params;
}

inline GnnParams train(const GnnParams& params, const HistoryBuffer& history,
                       const TrainerConfig& cfg, RandomStream& rng) {
  return train(params, params, history, cfg, rng);
}

struct LabeledGraph {
  std::shared_ptr<const AggregatedFeatures> features;
  double target;
};

/// Adam on the unregularised minibatch MSE, (1/2b) sum_batch (f - y)^2.
/// Used for pretraining the representation network.
inline GnnParams adam_train(const GnnParams& start, const std::vector<LabeledGraph>& dataset,
                            const TrainerConfig& cfg, RandomStream& rng) {
  require(cfg.learning_rate > 0.0 && cfg.epochs >= 1 && cfg.minibatch_size >= 1,
          ErrorCode::ValidationError, "invalid trainer configuration");
  require(!dataset.empty(), ErrorCode::EmptyHistory, "cannot train on an empty dataset");
  GnnParams params = start;
  const Optimizer adam = std::holds_alternative<Adam>(cfg.optimizer) ? cfg.optimizer : Adam{};
  detail::OptimizerState opt(adam, params.flat().size());
  const std::size_t n = dataset.size();
  std::vector<double> targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t start_at = 0; start_at < n; start_at += cfg.minibatch_size) {
      const std::size_t count = std::min(cfg.minibatch_size, n - start_at);
      const auto batch = detail::stack_batch(
          count, [&](std::size_t b) -> const AggregatedFeatures& {
            return *dataset[order[start_at + b]].features;
          });
      targets.clear();
      for (std::size_t b = 0; b < count; ++b) targets.push_back(dataset[order[start_at + b]].target);
      const Vector grad =
          detail::batch_residual_gradient(params, batch, targets, 1.0 / static_cast<double>(count));
      opt.step(params.flat(), grad, cfg.learning_rate);
    }
  }
  return params;
}

// Checkpoint: one line of JSON {"L":..,"m":..,"d":..} terminated by '\n',
// followed by p little-endian IEEE-754 doubles.
inline void save_checkpoint(std::ostream& os, const GnnParams& params) {
  const nlohmann::json header = {
      {"L", params.layers()}, {"m", params.width()}, {"d", params.input_dim()}};
  os << header.dump() << '\n';
  for (double v : params.flat()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffU);
    os.write(reinterpret_cast<const char*>(bytes), 8);
  }
  require(static_cast<bool>(os), ErrorCode::IoError, "failed to write checkpoint");
}

inline GnnParams load_checkpoint(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::ParseError, "missing header");
  std::size_t layers = 0, width = 0, input_dim = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    layers = header.at("L").get<std::size_t>();
    width = header.at("m").get<std::size_t>();
    input_dim = header.at("d").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad checkpoint header: ") + e.what());
  }
  GnnParams params(layers, width, input_dim);
  for (auto& v : params.flat()) {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    require(is.gcount() == 8, ErrorCode::ParseError, "truncated checkpoint");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    v = std::bit_cast<double>(bits);
  }
  return params;
}

}  // namespace gnts
