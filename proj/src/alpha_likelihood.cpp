#include "rpost/alpha_likelihood.hpp"

#include <sstream>

namespace rpost {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
}

// (e^{alpha u} - 1) / alpha, accurate as alpha -> 0.
double scaled_power_minus_one(double log_f, double alpha) {
  return std::expm1(alpha * log_f) / alpha;
}

}  // namespace

AlphaLikelihoodValue q_alpha(const ModelFamily& family, const Dataset& data,
                             const VectorXd& theta, double alpha, Derivatives derivatives) {
  check_alpha(alpha);
  if (data.design.rows() != data.size())
    throw DomainError("design rows do not match the number of responses");
  family.check_parameter(theta, data.covariates());
  const Index n = data.size();
  const Index p = theta.size();
  const bool want_grad = derivatives != Derivatives::None;
  const bool want_hess = derivatives == Derivatives::Hessian;

  CompensatedSum<double> value;
  CompensatedSum<VectorXd> grad(VectorXd::Zero(p));
  CompensatedSum<MatrixXd> hess(MatrixXd::Zero(p, p));
  for (Index i = 0; i < n; ++i) {
    const auto z = data.design.row(i);
    const double x = data.responses(i);
    if (alpha == 0.0) {
      if (!want_grad) {
        value.add(family.log_density(z, x, theta) - 1.0);
        continue;
      }
      const LogDensityDerivatives d = family.log_density_derivatives(z, x, theta);
      value.add(d.value - 1.0);
      grad.add(d.gradient);
      if (want_hess) hess.add(d.hessian);
    } else {
      const double log_f = family.log_density(z, x, theta);
      value.add(scaled_power_minus_one(log_f, alpha) -
                family.integral_power(z, theta, alpha) / (1.0 + alpha));
      if (want_grad) grad.add(family.grad_v(z, x, theta, alpha));
      if (want_hess) hess.add(family.hess_v(z, x, theta, alpha));
    }
  }

  AlphaLikelihoodValue out;
  out.value = value.value();
  out.alpha = alpha;
  const double scale = alpha == 0.0 ? 1.0 : -1.0 / (1.0 + alpha);
  if (want_grad) out.gradient = scale * grad.value();
  if (want_hess) {
    MatrixXd h = scale * hess.value();
    out.hessian = 0.5 * (h + h.transpose());
  }
  return out;
}

TrueDistributionSpec TrueDistributionSpec::in_model(VectorXd theta_g) {
  TrueDistributionSpec spec;
  spec.theta_g = std::move(theta_g);
  return spec;
}

TrueDistributionSpec TrueDistributionSpec::contaminated(VectorXd theta_g, double epsilon,
                                                        VectorXd points) {
  TrueDistributionSpec spec;
  spec.theta_g = std::move(theta_g);
  spec.epsilon = epsilon;
  spec.points = std::move(points);
  return spec;
}

void TrueDistributionSpec::validate(Index n) const {
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw DomainError("contamination fraction must lie in [0, 1)");
  if (epsilon > 0.0) {
    if (points.size() != n) {
      std::ostringstream msg;
      msg << "expected " << n << " contamination points, got " << points.size();
      throw DomainError(msg.str());
    }
    if (!points.allFinite()) throw DomainError("contamination points must be finite");
  }
  if (!theta_g.allFinite()) throw DomainError("true parameter must be finite");
}

namespace {

const ModelFamily& truth_family(const ModelFamily& family, const TrueDistributionSpec& spec) {
  return spec.truth ? *spec.truth : family;
}

// int f_theta^alpha dG_i (alpha > 0) or int g_i log f_theta (alpha == 0) over the
// uncontaminated part of G_i.
double base_cross_term(const ModelFamily& family, RowRef z, const TrueDistributionSpec& spec,
                       const VectorXd& theta, double alpha) {
  if (!spec.truth) {
    return alpha > 0 ? family.cross_power(z, theta, spec.theta_g, alpha)
                     : family.cross_log(z, theta, spec.theta_g);
  }
  if (alpha > 0)
    return spec.truth->expectation(
        z, spec.theta_g, [&](double x) { return family.density_power(z, x, theta, alpha); });
  return spec.truth->expectation(z, spec.theta_g,
                                 [&](double x) { return family.log_density(z, x, theta); });
}

}  // namespace

double expected_density_power(const ModelFamily& family, RowRef z,
                              const TrueDistributionSpec& spec, double t, const VectorXd& theta,
                              double alpha) {
  if (!(alpha > 0)) throw DomainError("expected_density_power requires alpha > 0");
  double v = base_cross_term(family, z, spec, theta, alpha);
  if (spec.epsilon > 0)
    v = (1.0 - spec.epsilon) * v + spec.epsilon * family.density_power(z, t, theta, alpha);
  return v;
}

AlphaLikelihoodValue q_alpha_functional(const ModelFamily& family, const MatrixXd& design,
                                        const TrueDistributionSpec& spec, const VectorXd& theta,
                                        double alpha, Derivatives derivatives) {
  check_alpha(alpha);
  const Index n = design.rows();
  spec.validate(n);
  family.check_parameter(theta, design.cols());
  const Index p = theta.size();
  const bool want_grad = derivatives != Derivatives::None;
  const bool want_hess = derivatives == Derivatives::Hessian;
  const double eps = spec.epsilon;
  const ModelFamily& truth = truth_family(family, spec);

  // Per-observation contributions to the theta-derivatives: d/dtheta of the
  // per-row term is -(1/(1+alpha)) grad V at alpha > 0 and grad log f at 0.
  auto derivative_terms = [&](RowRef z, double x) -> VectorXd {
    VectorXd out(p + (want_hess ? p * p : 0));
    if (alpha > 0) {
      const double scale = -1.0 / (1.0 + alpha);
      out.head(p) = scale * family.grad_v(z, x, theta, alpha);
      if (want_hess) {
        const MatrixXd h = scale * family.hess_v(z, x, theta, alpha);
        out.tail(p * p) = Eigen::Map<const VectorXd>(h.data(), p * p);
      }
    } else {
      const LogDensityDerivatives d = family.log_density_derivatives(z, x, theta);
      out.head(p) = d.gradient;
      if (want_hess) out.tail(p * p) = Eigen::Map<const VectorXd>(d.hessian.data(), p * p);
    }
    return out;
  };

  CompensatedSum<double> value;
  CompensatedSum<VectorXd> deriv(VectorXd::Zero(p + (want_hess ? p * p : 0)));
  for (Index i = 0; i < n; ++i) {
    const auto z = design.row(i);
    const double base = base_cross_term(family, z, spec, theta, alpha);
    if (alpha > 0) {
      double powered = base;
      if (eps > 0)
        powered = (1.0 - eps) * base + eps * family.density_power(z, spec.points(i), theta, alpha);
      value.add((powered - 1.0) / alpha - family.integral_power(z, theta, alpha) / (1.0 + alpha));
    } else {
      double expected_log = base;
      if (eps > 0)
        expected_log = (1.0 - eps) * base + eps * family.log_density(z, spec.points(i), theta);
      value.add(expected_log - 1.0);
    }
    if (want_grad) {
      VectorXd d = truth.expectation(z, spec.theta_g, std::function<VectorXd(double)>(
                                                          [&](double x) { return derivative_terms(z, x); }));
      if (eps > 0) d = (1.0 - eps) * d + eps * derivative_terms(z, spec.points(i));
      deriv.add(d);
    }
  }

  AlphaLikelihoodValue out;
  out.value = value.value();
  out.alpha = alpha;
  if (want_grad) {
    const VectorXd d = deriv.value();
    out.gradient = d.head(p);
    if (want_hess) {
      const MatrixXd h = Eigen::Map<const MatrixXd>(d.data() + p, p, p);
      out.hessian = 0.5 * (h + h.transpose());
    }
  }
  return out;
}

}  // namespace rpost
