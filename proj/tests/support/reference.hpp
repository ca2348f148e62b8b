#pragma once

// Hand-rolled reference implementations used as independent oracles in the
// test suites. Nothing here may call into the library's kernel, model or
// sampler code paths; overlap is limited to Eigen containers and basic
// arithmetic.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace refimpl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Gaussian elimination with partial pivoting. Returns the solution of
// A X = B and log|det A| (with sign), without any Cholesky machinery.
struct GaussResult {
  Mat solution;
  double log_abs_det = 0.0;
  double det_sign = 1.0;
};

inline GaussResult gauss_solve(Mat a, Mat b) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("gauss_solve: shape mismatch");
  double log_abs_det = 0.0;
  double det_sign = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("gauss_solve: singular matrix");
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      b.row(pivot).swap(b.row(col));
      det_sign = -det_sign;
    }
    log_abs_det += std::log(std::abs(a(col, col)));
    if (a(col, col) < 0.0) det_sign = -det_sign;
    for (int r = col + 1; r < n; ++r) {
      const double factor = a(r, col) / a(col, col);
      a.row(r).tail(n - col) -= factor * a.row(col).tail(n - col);
      b.row(r) -= factor * b.row(col);
    }
  }
  // back substitution
  Mat x = b;
  for (int col = n - 1; col >= 0; --col) {
    x.row(col) /= a(col, col);
    for (int r = 0; r < col; ++r) x.row(r) -= a(r, col) * x.row(col);
  }
  return {std::move(x), log_abs_det, det_sign};
}

// Scalar ARD squared-exponential kernel, plain loops.
// theta layout: [noise, vertical, scale_1..scale_Q].
inline double ref_sek(const std::vector<double>& xi, const std::vector<double>& xj,
                      const std::vector<double>& theta) {
  double exponent = 0.0;
  for (std::size_t d = 0; d < xi.size(); ++d) {
    const double diff = xi[d] - xj[d];
    exponent += theta[2 + d] * diff * diff;
  }
  return theta[1] * std::exp(-exponent);
}

inline Mat ref_build_ktilde(const std::vector<std::vector<double>>& catalog,
                            const std::vector<double>& theta) {
  const int m = static_cast<int>(catalog.size());
  Mat k(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      k(i, j) = ref_sek(catalog[i], catalog[j], theta) + (i == j ? theta[0] : 0.0);
  return k;
}

// Plain transcription of the negative log posterior: Poisson data terms,
// Gaussian quadratic form and log-determinant via Gaussian elimination,
// transformed-Gamma prior terms.
inline double ref_neg_log_posterior(const std::vector<double>& lambda,
                                    const std::vector<double>& phi,
                                    const std::vector<std::vector<long>>& counts,
                                    const std::vector<std::vector<double>>& catalog,
                                    const std::vector<double>& prior_shape,
                                    const std::vector<double>& prior_rate) {
  const int m_count = static_cast<int>(lambda.size());
  const int n_slots = static_cast<int>(counts[0].size());

  double data_term = 0.0;
  for (int m = 0; m < m_count; ++m) {
    long total = 0;
    for (int n = 0; n < n_slots; ++n) total += counts[m][n];
    data_term += -static_cast<double>(total) * lambda[m] + n_slots * std::exp(lambda[m]);
  }

  std::vector<double> theta(phi.size());
  for (std::size_t q = 0; q < phi.size(); ++q) theta[q] = std::exp(phi[q]);
  const Mat ktilde = ref_build_ktilde(catalog, theta);

  Vec lam(m_count);
  for (int m = 0; m < m_count; ++m) lam[m] = lambda[m];
  GaussResult solved = gauss_solve(ktilde, lam);
  const double quad = lam.dot(solved.solution.col(0));
  const double log_det = solved.log_abs_det;  // SPD in all test usages

  double prior_term = 0.0;
  for (std::size_t q = 0; q < phi.size(); ++q)
    prior_term += -prior_shape[q] * phi[q] + prior_rate[q] * theta[q];

  return data_term + 0.5 * log_det + 0.5 * quad + prior_term;
}

// Central finite differences with per-component step h_i = step * max(1, |x_i|).
inline Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x,
                        double step = 1e-6) {
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    Vec hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    grad[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return grad;
}

// Textbook leapfrog integrator, written independently of the library's.
inline std::pair<Vec, Vec> ref_leapfrog(Vec q, Vec p, double eps, int steps,
                                        const std::function<Vec(const Vec&)>& grad) {
  p -= 0.5 * eps * grad(q);
  for (int s = 0; s < steps - 1; ++s) {
    q += eps * p;
    p -= eps * grad(q);
  }
  q += eps * p;
  p -= 0.5 * eps * grad(q);
  return {q, p};
}

// Gaussian conditioning of the last coordinate on the first M, done the
// brute-force way: assemble the full (M+1)x(M+1) joint covariance and apply
// the Schur complement with the elimination solver above.
struct SchurResult {
  double mean = 0.0;
  double variance = 0.0;
};

inline SchurResult schur_conditional(const Mat& joint, const Vec& observed) {
  const int m = static_cast<int>(joint.rows()) - 1;
  if (observed.size() != m) throw std::invalid_argument("schur_conditional: dimension mismatch");
  const Mat top_left = joint.topLeftCorner(m, m);
  const Vec cross = joint.topRightCorner(m, 1);
  Mat rhs(m, 2);
  rhs.col(0) = observed;
  rhs.col(1) = cross;
  GaussResult solved = gauss_solve(top_left, rhs);
  SchurResult out;
  out.mean = cross.dot(solved.solution.col(0));
  out.variance = joint(m, m) - cross.dot(solved.solution.col(1));
  return out;
}

// Mean and covariance of a sample set, one observation per column.
inline std::pair<Vec, Mat> sample_moments(const Mat& draws) {
  const Vec mean = draws.rowwise().mean();
  Mat centered = draws.colwise() - mean;
  const Mat cov = centered * centered.transpose() / static_cast<double>(draws.cols());
  return {mean, cov};
}

}  // namespace refimpl
