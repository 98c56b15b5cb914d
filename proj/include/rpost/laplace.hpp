#pragma once

#include "rpost/posterior.hpp"

#include <vector>

namespace rpost {

/// First-order Laplace approximation of log int q(theta) exp(Q(theta)) dtheta.
struct LaplaceApproximation {
  double log_integral = kNaN;
  VectorXd mode;
  double neg_hessian_logdet = kNaN;
  double q_at_mode = kNaN;  // Q at the mode
};

/// Laplace approximation from the value of log q and Q at the mode and -grad^2 Q there.
/// Throws SingularHessian when the negative Hessian is not positive definite.
LaplaceApproximation laplace_from_mode(const VectorXd& mode, double log_q_at_mode,
                                       double objective_at_mode, const MatrixXd& neg_hessian);

/// log int q exp(Q_n^(alpha)) with the MDPDE as expansion point. q must be positive there.
LaplaceApproximation laplace_integral(const ModelFamily& family, const Dataset& data,
                                      const std::function<double(const VectorXd&)>& q_fn,
                                      double alpha, const FitOptions& options = {});

/// Leading-order Laplace value of the posterior expectation of h: h at the MDPDE.
/// The flat prior is rejected because the ratio needs a finite prior integral.
VectorXd laplace_expectation(const ModelFamily& family, const Dataset& data, const Prior& prior,
                             const std::function<VectorXd(const VectorXd&)>& h, double alpha,
                             const FitOptions& options = {});

struct BConditionsOptions {
  Index points = 10000;              // quasi-random grid size
  std::optional<VectorXd> lower;     // compact region; default theta_hat -/+ half_width
  std::optional<VectorXd> upper;
  double half_width = 5.0;
  double eta = 1e-6;                 // flat-direction threshold on eigenvalues of -grad^2 Q / n
};

struct BSupremum {
  double delta = 0.0;
  double sup_scaled_gap = kNaN;      // sup over ||theta - theta_hat|| > delta of (Q - Q(theta_hat)) / n
  Index points_used = 0;
  bool negative = false;
};

struct BConditionsReport {
  VectorXd theta_hat;
  bool fit_converged = false;
  double b2_determinant = kNaN;      // det(-grad^2 Q(theta_hat) / n)
  VectorXd b2_eigenvalues;
  bool flat_direction = false;
  std::vector<BSupremum> b3;
  std::string warning;
};

/// Grid diagnostics of the Laplace regularity conditions around the MDPDE.
BConditionsReport check_b_conditions(const ModelFamily& family, const Dataset& data, double alpha,
                                     const std::vector<double>& delta_grid,
                                     const BConditionsOptions& options = {});

/// Halton point with index k + 1 in (0, 1)^dim; index 0, the box corner, is skipped.
VectorXd halton_point(std::uint64_t k, Index dim);

}  // namespace rpost
