#pragma once

#include "rpost/alpha_likelihood.hpp"

#include <functional>
#include <optional>
#include <string>

namespace rpost {

struct FitOptions {
  std::optional<VectorXd> init;   // default: least squares (linear) or zeros
  int max_iterations = 200;
  double tolerance = 1e-8;        // on ||grad Q||, multiplied by n
  bool continuation = true;       // warm-start from alpha = 0 in steps of continuation_step
  double continuation_step = 0.1;
  bool allow_singular = false;    // report instead of throwing SingularHessian
};

struct MdpdeResult {
  VectorXd theta_hat;
  double q_value = kNaN;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = kNaN;
  MatrixXd neg_hessian;           // -grad^2 Q at theta_hat
  double alpha = 0.0;
  std::string message;
};

/// Objective for `maximize`: value and derivatives at theta.
using ObjectiveFn = std::function<AlphaLikelihoodValue(const VectorXd&, Derivatives)>;
using FeasibleFn = std::function<bool(const VectorXd&)>;

struct MaximizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // absolute, on ||grad||
  bool allow_singular = false;
};

/// Damped Newton ascent with Armijo backtracking. Falls back to a gradient step when
/// the negative Hessian is not positive definite. Infeasible trial points are treated
/// as failed steps.
MdpdeResult maximize(const ObjectiveFn& objective, const VectorXd& init,
                     const FeasibleFn& feasible, const MaximizeOptions& options);

/// Ordinary least-squares coefficients of the responses on the design.
VectorXd least_squares(const Dataset& data);

/// Default starting point for the family: least squares (plus residual scale when
/// sigma is estimated) for the linear families, zeros otherwise.
VectorXd default_start(const ModelFamily& family, const Dataset& data);

/// Minimum density power divergence estimate: the maximizer of q_alpha.
MdpdeResult fit(const ModelFamily& family, const Dataset& data, double alpha,
                const FitOptions& options = {});

/// Maximizer of q_alpha_functional, the minimum-DPD functional T_alpha(G).
MdpdeResult fit_functional(const ModelFamily& family, const MatrixXd& design,
                           const TrueDistributionSpec& spec, double alpha,
                           const VectorXd& init, const FitOptions& options = {});

struct SandwichMatrices {
  MatrixXd psi;
  MatrixXd omega;
  MatrixXd psi_hat;
  VectorXd at_theta;
};

/// Psi and Omega at theta with the model at theta taken as the truth, and
/// psi_hat = -grad^2 Q / n from the observed data.
SandwichMatrices sandwich(const ModelFamily& family, const Dataset& data, const VectorXd& theta,
                          double alpha);

/// Population version: Psi and Omega at theta when every response follows `spec`.
/// psi_hat equals psi here.
SandwichMatrices sandwich(const ModelFamily& family, const MatrixXd& design,
                          const TrueDistributionSpec& spec, const VectorXd& theta, double alpha);

/// Psi^{-1} Omega Psi^{-1} / n.
MatrixXd asymptotic_covariance(const SandwichMatrices& sw, Index n);

}  // namespace rpost
