#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "popgp/errors.hpp"

namespace popgp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Feature vector of one content; length Q. Binary features are encoded as
// 0.0/1.0, continuous features are unrestricted reals.
using FeatureVector = Eigen::VectorXd;
using Catalog = std::vector<FeatureVector>;

// ARD squared-exponential hyperparameters:
//   theta[0]      observation-level variance added to the diagonal
//   theta[1]      vertical scale
//   theta[2..Q+1] per-dimension inverse-square length scales
//
// Inference-side values come from exp(phi) and are strictly positive; the
// synthetic generator may pass exact zeros (a dimension with no influence),
// which are valid here.
struct KernelParams {
  Vec theta;

  int feature_dim() const { return static_cast<int>(theta.size()) - 2; }
  double noise() const { return theta[0]; }
  double vertical() const { return theta[1]; }
  double ard(int dim) const { return theta[2 + dim]; }

  void validate() const {
    if (theta.size() < 3)
      throw InvalidInputError("KernelParams: need Q >= 1, i.e. at least 3 entries");
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (!std::isfinite(theta[i]) || theta[i] < 0.0)
        throw InvalidInputError("KernelParams: theta[" + std::to_string(i) +
                                "] must be finite and nonnegative");
    }
  }
};

inline void validate_catalog(const Catalog& catalog, int feature_dim) {
  if (catalog.empty()) throw InvalidInputError("catalog: must hold at least one content");
  if (feature_dim < 1) throw InvalidInputError("catalog: feature dimension must be >= 1");
  for (std::size_t m = 0; m < catalog.size(); ++m) {
    if (catalog[m].size() != feature_dim)
      throw InvalidInputError("catalog: content " + std::to_string(m) +
                              " has feature dimension " + std::to_string(catalog[m].size()) +
                              ", expected " + std::to_string(feature_dim));
    if (!catalog[m].allFinite())
      throw InvalidInputError("catalog: content " + std::to_string(m) +
                              " has a non-finite feature");
  }
}

// Validates internal consistency, taking Q from the first content.
inline void validate_catalog(const Catalog& catalog) {
  if (catalog.empty()) throw InvalidInputError("catalog: must hold at least one content");
  validate_catalog(catalog, static_cast<int>(catalog.front().size()));
}

// ARD squared-exponential kernel:
//   k(a, b) = theta_1 * exp(-sum_d theta_{2+d} (a_d - b_d)^2)
// Identical inputs give exactly theta_1.
inline double sek(const FeatureVector& a, const FeatureVector& b, const KernelParams& params) {
  params.validate();
  if (a.size() != b.size() || a.size() != params.feature_dim())
    throw InvalidInputError("sek: feature vectors and params disagree on dimension");
  double exponent = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    exponent += params.ard(static_cast<int>(d)) * diff * diff;
  }
  return params.vertical() * std::exp(-exponent);
}

// M x M covariance with the applied diagonal regularization on record.
struct CovarianceMatrix {
  Mat entries;
  double jitter_applied = 0.0;
};

// Per-dimension squared feature differences, precomputed once per catalog so
// the covariance and its log-scale derivatives are cheap to reassemble for
// many hyperparameter values.
class SquaredDistances {
 public:
  explicit SquaredDistances(const Catalog& catalog) {
    if (catalog.empty()) throw InvalidInputError("SquaredDistances: empty catalog");
    q_ = static_cast<int>(catalog.front().size());
    validate_catalog(catalog, q_);
    const int m = static_cast<int>(catalog.size());
    dist_.reserve(q_);
    for (int d = 0; d < q_; ++d) {
      Mat dd = Mat::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          const double diff = catalog[i][d] - catalog[j][d];
          dd(i, j) = diff * diff;
          dd(j, i) = dd(i, j);
        }
      }
      dist_.push_back(std::move(dd));
    }
  }

  int feature_dim() const { return q_; }
  int content_count() const { return static_cast<int>(dist_.empty() ? 0 : dist_[0].rows()); }
  const Mat& dim(int d) const { return dist_[d]; }

  // Noise-free kernel matrix K(theta).
  Mat noise_free(const KernelParams& params) const {
    params.validate();
    if (params.feature_dim() != q_)
      throw InvalidInputError("SquaredDistances: params expect Q=" +
                              std::to_string(params.feature_dim()) + ", catalog has Q=" +
                              std::to_string(q_));
    const int m = content_count();
    Mat exponent = Mat::Zero(m, m);
    for (int d = 0; d < q_; ++d) exponent.noalias() += params.ard(d) * dist_[d];
    Mat k = (params.vertical() * (-exponent.array()).exp()).matrix();
    for (int i = 0; i < m; ++i) k(i, i) = params.vertical();
    return k;
  }

  // K(theta) + theta_0 I.
  CovarianceMatrix ktilde(const KernelParams& params) const {
    Mat k = noise_free(params);
    k.diagonal().array() += params.noise();
    if (!k.allFinite()) {
      for (int i = 0; i < k.rows(); ++i)
        for (int j = 0; j < k.cols(); ++j)
          if (!std::isfinite(k(i, j)))
            throw NumericalError("ktilde: non-finite entry at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
    }
    return CovarianceMatrix{std::move(k), 0.0};
  }

  // d Ktilde / d phi_q at theta = exp(phi), i.e. theta_q * d Ktilde / d theta_q:
  //   q = 0   -> theta_0 I
  //   q = 1   -> K (noise-free)
  //   q >= 2  -> -theta_q * D_{q-2} .* K   (elementwise)
  Mat derivative(const KernelParams& params, int q) const {
    params.validate();
    if (q < 0 || q >= q_ + 2)
      throw InvalidInputError("derivative: q=" + std::to_string(q) + " out of range [0, " +
                              std::to_string(q_ + 2) + ")");
    const int m = content_count();
    if (q == 0) return params.noise() * Mat::Identity(m, m);
    Mat k = noise_free(params);
    if (q == 1) return k;
    const int d = q - 2;
    return (-params.ard(d)) * dist_[d].cwiseProduct(k);
  }

 private:
  int q_ = 0;
  std::vector<Mat> dist_;
};

// Entry (i, j) = sek(x_i, x_j) + theta_0 [i = j]. Symmetric by construction,
// diagonal exactly theta_1 + theta_0.
inline CovarianceMatrix build_ktilde(const Catalog& catalog, const KernelParams& params) {
  return SquaredDistances(catalog).ktilde(params);
}

inline Mat dktilde_dphi(const Catalog& catalog, const KernelParams& params, int q) {
  return SquaredDistances(catalog).derivative(params, q);
}

// Cholesky factorization with an escalating diagonal jitter ladder
// (1e-10, 1e-8, 1e-6). Duplicate feature vectors make K singular when the
// observation variance is tiny; the jitter is recorded, never silent.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const Mat& sym) {
    if (sym.rows() != sym.cols()) throw InvalidInputError("CholeskyFactor: matrix not square");
    static constexpr double kLadder[] = {0.0, 1e-10, 1e-8, 1e-6};
    for (double jitter : kLadder) {
      Mat work = sym;
      if (jitter > 0.0) work.diagonal().array() += jitter;
      llt_.compute(work);
      if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().minCoeff() > 0.0) {
        jitter_applied_ = jitter;
        log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
        return;
      }
    }
    throw NumericalError("CholeskyFactor: not positive definite at maximum jitter 1e-6");
  }

  // Records any jitter used back on the covariance.
  explicit CholeskyFactor(CovarianceMatrix& k) : CholeskyFactor(k.entries) {
    k.jitter_applied = jitter_applied_;
  }

  double jitter_applied() const { return jitter_applied_; }
  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

  Vec solve(const Vec& rhs) const {
    check_rhs(rhs.size());
    return llt_.solve(rhs);
  }
  Mat solve(const Mat& rhs) const {
    check_rhs(rhs.rows());
    return llt_.solve(rhs);
  }
  Mat inverse() const { return llt_.solve(Mat::Identity(dim(), dim())); }
  Mat lower() const { return llt_.matrixL(); }

 private:
  void check_rhs(Eigen::Index rows) const {
    if (rows != dim())
      throw InvalidInputError("CholeskyFactor: rhs row count " + std::to_string(rows) +
                              " does not match dimension " + std::to_string(dim()));
  }

  Eigen::LLT<Mat> llt_;
  double jitter_applied_ = 0.0;
  double log_det_ = 0.0;
};

// One-shot solve K^{-1} rhs together with log det K, sharing a single
// factorization. Applied jitter is recorded on the covariance.
inline std::pair<Mat, double> chol_solve_logdet(CovarianceMatrix& k, const Mat& rhs) {
  CholeskyFactor factor(k.entries);
  k.jitter_applied = factor.jitter_applied();
  return {factor.solve(rhs), factor.log_det()};
}

inline std::pair<Vec, double> chol_solve_logdet(CovarianceMatrix& k, const Vec& rhs) {
  CholeskyFactor factor(k.entries);
  k.jitter_applied = factor.jitter_applied();
  return {factor.solve(rhs), factor.log_det()};
}

}  // namespace popgp
