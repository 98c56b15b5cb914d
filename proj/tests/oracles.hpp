#pragma once

// Independent reference computations used by the tests. Nothing here calls into the
// library's own numerics.

#include "rpost/model.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using rpost::Index;
using rpost::MatrixXd;
using rpost::VectorXd;

inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                            double h = 1e-6) {
  VectorXd g(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    VectorXd a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// Central differences of a gradient, symmetrized.
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& x,
                            double h = 1e-6) {
  MatrixXd J(x.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    VectorXd a = x, b = x;
    a(j) += h;
    b(j) -= h;
    J.col(j) = (g(a) - g(b)) / (2 * h);
  }
  return 0.5 * (J + J.transpose());
}

/// ||got - want|| / ||want||, with `floor` guarding an exactly zero reference.
inline double rel_err(const MatrixXd& got, const MatrixXd& want, double floor = 1e-12) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

/// Composite Simpson rule with `intervals` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals = 20000) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd * std::sqrt(2 * M_PI));
}

inline double normal_pdf(double x, double mean, double sd) {
  return std::exp(normal_logpdf(x, mean, sd));
}

/// Ordinary least squares through the normal equations.
inline VectorXd ols(const MatrixXd& Z, const VectorXd& x) {
  return (Z.transpose() * Z).ldlt().solve(Z.transpose() * x);
}

/// Logistic maximum likelihood by iteratively reweighted least squares.
inline VectorXd irls(const MatrixXd& Z, const VectorXd& y, int iterations = 100) {
  VectorXd beta = VectorXd::Zero(Z.cols());
  for (int it = 0; it < iterations; ++it) {
    const VectorXd eta = Z * beta;
    VectorXd w(eta.size()), work(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = p * (1 - p);
      work(i) = eta(i) + (y(i) - p) / w(i);
    }
    const MatrixXd ZtW = Z.transpose() * w.asDiagonal();
    const VectorXd next = (ZtW * Z).ldlt().solve(ZtW * work);
    if ((next - beta).norm() < 1e-14 * (1 + beta.norm())) return next;
    beta = next;
  }
  return beta;
}

/// Plain Gaussian-model log-likelihood sum.
inline double gaussian_loglik(const MatrixXd& Z, const VectorXd& x, const VectorXd& beta,
                              double sigma) {
  double s = 0;
  for (Index i = 0; i < x.size(); ++i) s += normal_logpdf(x(i), Z.row(i).dot(beta), sigma);
  return s;
}

}  // namespace oracle
