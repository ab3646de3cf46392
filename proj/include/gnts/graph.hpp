#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gnts/error.hpp"
#include "gnts/random.hpp"

namespace gnts {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Undirected attributed graph: symmetric 0/1 adjacency without self-loops
/// plus one feature row per node. Immutable once validated.
class Graph {
 public:
  static Graph create(Matrix adjacency, RowMatrix features) {
    const auto n = adjacency.rows();
    require(n >= 1, ErrorCode::DimensionMismatch, "graph needs at least one node");
    require(adjacency.cols() == n, ErrorCode::DimensionMismatch, "adjacency must be square");
    require(features.rows() == n, ErrorCode::DimensionMismatch,
            "feature rows (" + std::to_string(features.rows()) + ") != node count (" +
                std::to_string(n) + ")");
    require(features.cols() >= 1, ErrorCode::DimensionMismatch, "feature dimension must be >= 1");
    require(features.allFinite(), ErrorCode::NonFinite, "features must be finite");
    for (Eigen::Index i = 0; i < n; ++i) {
      require(adjacency(i, i) == 0.0, ErrorCode::SelfLoop,
              "self-loop at node " + std::to_string(i));
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = adjacency(i, j);
        require(a == 0.0 || a == 1.0, ErrorCode::NonBinaryEntry,
                "adjacency entry (" + std::to_string(i) + "," + std::to_string(j) + ") not 0/1");
        require(a == adjacency(j, i), ErrorCode::NotSymmetric,
                "adjacency asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    return Graph(std::move(adjacency), std::move(features));
  }

  std::size_t n_nodes() const { return static_cast<std::size_t>(adjacency_.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }
  const Matrix& adjacency() const { return adjacency_; }
  const RowMatrix& features() const { return features_; }

  std::size_t edge_count() const {
    return static_cast<std::size_t>(adjacency_.sum() / 2.0);
  }

  std::size_t degree(std::size_t i) const {
    return static_cast<std::size_t>(adjacency_.row(static_cast<Eigen::Index>(i)).sum());
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.adjacency_ == b.adjacency_ && a.features_ == b.features_;
  }

 private:
  Graph(Matrix adjacency, RowMatrix features)
      : adjacency_(std::move(adjacency)), features_(std::move(features)) {}

  Matrix adjacency_;
  RowMatrix features_;
};

inline Graph new_graph(Matrix adjacency, RowMatrix features) {
  return Graph::create(std::move(adjacency), std::move(features));
}

/// Appends isolated zero-feature nodes until the graph has `n` nodes.
inline Graph pad_to(const Graph& g, std::size_t n) {
  const auto cur = g.n_nodes();
  require(n >= cur, ErrorCode::TargetTooSmall,
          "cannot pad a " + std::to_string(cur) + "-node graph to " + std::to_string(n));
  if (n == cur) return g;
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ci = static_cast<Eigen::Index>(cur);
  Matrix adj = Matrix::Zero(ni, ni);
  adj.topLeftCorner(ci, ci) = g.adjacency();
  RowMatrix feat = RowMatrix::Zero(ni, static_cast<Eigen::Index>(g.feature_dim()));
  feat.topRows(ci) = g.features();
  return Graph::create(std::move(adj), std::move(feat));
}

inline RowMatrix gaussian_features(std::size_t n, std::size_t d, RandomStream& rng) {
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  return x;
}

namespace detail {

// Unordered pairs (i < j) are visited row-major, one uniform draw each.
template <class EdgeProbability>
Matrix sample_edges(std::size_t n, EdgeProbability&& prob, RandomStream& rng) {
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix adj = Matrix::Zero(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = i + 1; j < ni; ++j) {
      if (rng.uniform() < prob(i, j)) {
        adj(i, j) = 1.0;
        adj(j, i) = 1.0;
      }
    }
  }
  return adj;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

/// Erdos-Renyi graph with i.i.d. standard normal node features.
inline Graph gen_er(std::size_t n, double p, std::size_t d, RandomStream& rng) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorCode::InvalidProbability,
          "edge probability must lie in [0,1]");
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "ER needs n >= 1 and d >= 1");
  RowMatrix x = gaussian_features(n, d, rng);
  Matrix adj = detail::sample_edges(n, [p](Eigen::Index, Eigen::Index) { return p; }, rng);
  return Graph::create(std::move(adj), std::move(x));
}

/// Random dot product graph over fixed latent features, which double as the
/// node features: P(i ~ j) = sigmoid(<x_i, x_j>).
inline Graph gen_rdpg_from_features(RowMatrix features, RandomStream& rng) {
  const auto n = static_cast<std::size_t>(features.rows());
  require(n >= 1 && features.cols() >= 1, ErrorCode::InvalidArgument,
          "RDPG needs n >= 1 and d >= 1");
  Matrix adj = detail::sample_edges(
      n,
      [&features](Eigen::Index i, Eigen::Index j) {
        return detail::sigmoid(features.row(i).dot(features.row(j)));
      },
      rng);
  return Graph::create(std::move(adj), std::move(features));
}

inline Graph gen_rdpg(std::size_t n, std::size_t d, RandomStream& rng) {
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "RDPG needs n >= 1 and d >= 1");
  RowMatrix x = gaussian_features(n, d, rng);
  return gen_rdpg_from_features(std::move(x), rng);
}

/// Ordered, nonempty list of graphs sharing node count and feature dimension.
class ActionSpace {
 public:
  explicit ActionSpace(std::vector<Graph> graphs) : graphs_(std::move(graphs)) {
    require(!graphs_.empty(), ErrorCode::EmptyActions, "action space must be nonempty");
    const auto n = graphs_.front().n_nodes();
    const auto d = graphs_.front().feature_dim();
    for (const auto& g : graphs_) {
      require(g.n_nodes() == n, ErrorCode::DimensionMismatch,
              "all graphs must be padded to the same node count");
      require(g.feature_dim() == d, ErrorCode::DimensionMismatch,
              "all graphs must share the feature dimension");
    }
  }

  std::size_t size() const { return graphs_.size(); }
  std::size_t n_nodes() const { return graphs_.front().n_nodes(); }
  std::size_t feature_dim() const { return graphs_.front().feature_dim(); }
  const Graph& operator[](std::size_t i) const { return graphs_[i]; }
  const std::vector<Graph>& graphs() const { return graphs_; }
  auto begin() const { return graphs_.begin(); }
  auto end() const { return graphs_.end(); }

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  std::vector<Graph> graphs_;
};

struct ErdosRenyi {
  double p = 0.4;
};
struct DotProduct {};
using GraphKind = std::variant<ErdosRenyi, DotProduct>;

inline ActionSpace gen_action_space(const GraphKind& kind, std::size_t count, std::size_t n,
                                    std::size_t d, RandomStream& rng) {
  require(count >= 1, ErrorCode::InvalidArgument, "action space count must be >= 1");
  std::vector<Graph> graphs;
  graphs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (const auto* er = std::get_if<ErdosRenyi>(&kind))
      graphs.push_back(gen_er(n, er->p, d, rng));
    else
      graphs.push_back(gen_rdpg(n, d, rng));
  }
  return ActionSpace(std::move(graphs));
}

/// Per-node aggregated features h_i fed to the MLP. In identity mode the
/// adjacency is replaced by I (the NN baselines).
struct AggregatedFeatures {
  RowMatrix rows;
  bool identity_mode = false;

  std::size_t n_nodes() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
};

/// h_i = normalize(sum_{j in N(i)} x_j), or normalize(x_i) in identity mode.
/// normalize(0) = 0.
inline AggregatedFeatures aggregate(const Graph& g, bool identity_mode, bool normalize = true) {
  AggregatedFeatures out;
  out.identity_mode = identity_mode;
  if (identity_mode)
    out.rows = g.features();
  else
    out.rows = g.adjacency() * g.features();
  if (normalize) {
    for (Eigen::Index i = 0; i < out.rows.rows(); ++i) {
      const double norm = out.rows.row(i).norm();
      if (norm > 0.0) out.rows.row(i) /= norm;
    }
  }
  return out;
}

inline std::vector<AggregatedFeatures> aggregate_all(const ActionSpace& space, bool identity_mode,
                                                     bool normalize = true) {
  std::vector<AggregatedFeatures> out;
  out.reserve(space.size());
  for (const auto& g : space) out.push_back(aggregate(g, identity_mode, normalize));
  return out;
}

inline double average_degree(const Graph& g) {
  return g.adjacency().sum() / static_cast<double>(g.n_nodes());
}

// JSON form: {"n": int, "edges": [[i,j],...], "features": [[...],...]}, i < j.
inline nlohmann::json to_json(const Graph& g) {
  nlohmann::json edges = nlohmann::json::array();
  const auto n = static_cast<Eigen::Index>(g.n_nodes());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (g.adjacency()(i, j) != 0.0) edges.push_back({i, j});
  nlohmann::json feats = nlohmann::json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(g.features().row(i).begin(), g.features().row(i).end());
    feats.push_back(row);
  }
  return {{"n", g.n_nodes()}, {"edges", edges}, {"features", feats}};
}

inline Graph graph_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    const auto& feats = j.at("features");
    require(feats.size() == n, ErrorCode::DimensionMismatch, "features must have n rows");
    require(n >= 1, ErrorCode::DimensionMismatch, "graph needs at least one node");
    const auto d = feats.at(0).size();
    const auto ni = static_cast<Eigen::Index>(n);
    RowMatrix x(ni, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < ni; ++i) {
      const auto& row = feats.at(static_cast<std::size_t>(i));
      require(row.size() == d, ErrorCode::DimensionMismatch, "ragged feature rows");
      for (Eigen::Index k = 0; k < x.cols(); ++k)
        x(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    Matrix adj = Matrix::Zero(ni, ni);
    for (const auto& e : j.at("edges")) {
      const auto a = e.at(0).get<Eigen::Index>();
      const auto b = e.at(1).get<Eigen::Index>();
      require(a >= 0 && b >= 0 && a < ni && b < ni, ErrorCode::IndexOutOfRange,
              "edge endpoint out of range");
      require(a != b, ErrorCode::SelfLoop, "self-loop in edge list");
      adj(a, b) = 1.0;
      adj(b, a) = 1.0;
    }
    return Graph::create(std::move(adj), std::move(x));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
}

}  // namespace gnts
