#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gnts/error.hpp"
#include "gnts/graph.hpp"
#include "gnts/io.hpp"
#include "gnts/random.hpp"

namespace gnts {

enum class KernelKind { EmpiricalGntk, Representation, Other };

/// Symmetric PSD matrix over the action space.
struct KernelMatrix {
  Matrix entries;
  KernelKind kind = KernelKind::Other;

  std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

inline double max_asymmetry(const Matrix& k) { return (k - k.transpose()).cwiseAbs().maxCoeff(); }

inline Vector symmetric_eigenvalues(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(k, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorCode::NotFactorizable, "eigensolver failed");
  return solver.eigenvalues();
}

/// min eigenvalue >= -rel_tol * max |eigenvalue|
inline bool is_psd(const Matrix& k, double rel_tol = 1e-8) {
  const Vector ev = symmetric_eigenvalues(k);
  const double scale = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -rel_tol * scale;
}

/// log det(I + T K / lambda) / log(1 + T rho_max / lambda), eigenvalues of K
/// clipped at zero. Eigenvalues within n * eps * rho_max of zero count as
/// zero so rank deficiency is not blurred by rounding. Returns 0 for K = 0.
inline double effective_dimension(const Matrix& k, double horizon, double lambda) {
  require(horizon >= 1.0, ErrorCode::InvalidArgument, "horizon must be >= 1");
  require(lambda > 0.0, ErrorCode::InvalidArgument, "lambda must be > 0");
  require(k.rows() == k.cols() && k.rows() >= 1, ErrorCode::DimensionMismatch,
          "kernel must be square and nonempty");
  const Vector ev = symmetric_eigenvalues(k);
  const double top = ev.maxCoeff();
  const double scale = ev.cwiseAbs().maxCoeff();
  require(ev.minCoeff() >= -1e-8 * scale, ErrorCode::NonPSD,
          "kernel has eigenvalue " + format_double(ev.minCoeff()));
  if (top <= 0.0) return 0.0;
  const double zero_tol =
      static_cast<double>(k.rows()) * std::numeric_limits<double>::epsilon() * top;
  const double denom = std::log1p(horizon * top / lambda);
  double total = 0.0;
  for (double e : ev) {
    if (e <= zero_tol) continue;
    total += std::log1p(horizon * e / lambda) / denom;
  }
  return total;
}

inline double effective_dimension(const KernelMatrix& k, double horizon, double lambda) {
  return effective_dimension(k.entries, horizon, lambda);
}

struct JitterSchedule {
  double first = 1e-10;  // relative to trace / n
  double last = 1e-4;
  double growth = 10.0;
};

/// Lower-triangular L with L L^T = K + jitter I.
struct CholFactor {
  Matrix lower;
  double jitter = 0.0;
};

/// Cholesky with escalating diagonal jitter: 0, then first * trace/n growing
/// by `growth` up to last * trace/n.
inline CholFactor chol(const Matrix& k, const JitterSchedule& schedule = {}) {
  require(k.rows() == k.cols() && k.rows() >= 1, ErrorCode::DimensionMismatch,
          "matrix must be square and nonempty");
  require(k.allFinite(), ErrorCode::NonFinite, "matrix has non-finite entries");
  const double scale = std::max(k.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  require(max_asymmetry(k) <= 1e-10 * scale, ErrorCode::NotSymmetric, "matrix is not symmetric");
  const auto n = k.rows();
  if (k.isZero(0.0)) return {Matrix::Zero(n, n), 0.0};

  const double base = k.trace() / static_cast<double>(n);
  std::vector<double> jitters{0.0};
  if (base > 0.0) {
    for (double rel = schedule.first; rel <= schedule.last * (1.0 + 1e-9); rel *= schedule.growth)
      jitters.push_back(rel * base);
  }
  for (double jitter : jitters) {
    Matrix shifted = k;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), jitter};
    }
  }
  fail(ErrorCode::NotFactorizable, "Cholesky failed after exhausting the jitter schedule");
}

/// mean + L z, z ~ N(0, I)
inline Vector mvn_sample(const Vector& mean, const CholFactor& factor, RandomStream& rng) {
  require(factor.lower.rows() == mean.size() && factor.lower.cols() == mean.size(),
          ErrorCode::DimensionMismatch, "factor and mean dimensions disagree");
  Vector z(mean.size());
  for (auto& v : z) v = rng.normal();
  return mean + factor.lower.triangularView<Eigen::Lower>() * z;
}

struct GpPosterior {
  Vector mean;
  Matrix cov;
};

/// Posterior of a zero-mean GP with prior covariance K observed at every
/// point with noise variance noise_var.
inline GpPosterior gp_posterior(const Matrix& k, const Vector& y, double noise_var) {
  require(k.rows() == k.cols() && k.rows() == y.size(), ErrorCode::DimensionMismatch,
          "kernel and observation sizes disagree");
  require(noise_var > 0.0, ErrorCode::InvalidArgument, "noise variance must be > 0");
  Matrix a = k;
  a.diagonal().array() += noise_var;
  Eigen::LLT<Matrix> llt(a);
  require(llt.info() == Eigen::Success, ErrorCode::NotFactorizable,
          "K + noise I is not positive definite");
  GpPosterior out;
  out.mean = k * llt.solve(y);
  out.cov = k - k * llt.solve(k);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

// Row-major CSV with a header row of graph indices.
inline void write_kernel_csv(std::ostream& os, const Matrix& k) {
  for (Eigen::Index j = 0; j < k.cols(); ++j) os << (j ? "," : "") << j;
  os << '\n';
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) os << (j ? "," : "") << format_double(k(i, j));
    os << '\n';
  }
}

/// Reads the CSV form written by write_kernel_csv.
inline Matrix read_kernel_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::ParseError, "empty kernel CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      row.push_back(parse_double(std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  require(n >= 1, ErrorCode::ParseError, "kernel CSV has no rows");
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == n,
            ErrorCode::DimensionMismatch, "kernel CSV is not square");
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return k;
}

}  // namespace gnts
