#pragma once

#include "rpost/model.hpp"

#include <optional>

namespace rpost {

enum class Derivatives { None, Gradient, Hessian };

/// Q_n^(alpha) at one parameter point, with optional derivatives in theta.
struct AlphaLikelihoodValue {
  double value = 0.0;
  std::optional<VectorXd> gradient;
  std::optional<MatrixXd> hessian;
  double alpha = 0.0;
};

/// Sum over i of (1/alpha) f^alpha(x_i) - (1/(1+alpha)) int f^{1+alpha} - 1/alpha.
/// alpha == 0 is evaluated exactly as the log-likelihood minus n.
AlphaLikelihoodValue q_alpha(const ModelFamily& family, const Dataset& data,
                             const VectorXd& theta, double alpha,
                             Derivatives derivatives = Derivatives::None);

/// The true distribution G_i of every response: f_{i,theta_g}, optionally mixed with a
/// point mass at points(i) with weight epsilon. `truth` selects a family for G other
/// than the fitted one.
struct TrueDistributionSpec {
  VectorXd theta_g;
  double epsilon = 0.0;
  VectorXd points;
  FamilyPtr truth;

  static TrueDistributionSpec in_model(VectorXd theta_g);
  static TrueDistributionSpec contaminated(VectorXd theta_g, double epsilon, VectorXd points);

  /// Throws DomainError unless epsilon is in [0, 1) and points cover all n rows.
  void validate(Index n) const;
};

/// int f_{i,theta}^alpha dG_i (alpha > 0) for row z with contamination point t.
double expected_density_power(const ModelFamily& family, RowRef z,
                              const TrueDistributionSpec& spec, double t,
                              const VectorXd& theta, double alpha);

/// Population version of q_alpha with each response distributed as G_i. At
/// alpha == 0 the per-row term is int g_i log f_{i,theta} - 1.
AlphaLikelihoodValue q_alpha_functional(const ModelFamily& family, const MatrixXd& design,
                                        const TrueDistributionSpec& spec, const VectorXd& theta,
                                        double alpha,
                                        Derivatives derivatives = Derivatives::None);

}  // namespace rpost
