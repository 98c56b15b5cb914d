#include "rpost/laplace.hpp"

#include <array>
#include <sstream>

namespace rpost {

LaplaceApproximation laplace_from_mode(const VectorXd& mode, double log_q_at_mode,
                                       double objective_at_mode, const MatrixXd& neg_hessian) {
  Eigen::LLT<MatrixXd> llt(neg_hessian);
  if (llt.info() != Eigen::Success)
    throw SingularHessian("negative Hessian is not positive definite at the mode");
  LaplaceApproximation out;
  out.mode = mode;
  out.q_at_mode = objective_at_mode;
  out.neg_hessian_logdet = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  if (!std::isfinite(out.neg_hessian_logdet))
    throw SingularHessian("negative Hessian has a non-finite log-determinant");
  out.log_integral = log_q_at_mode + objective_at_mode +
                     0.5 * static_cast<double>(mode.size()) * kLogTwoPi -
                     0.5 * out.neg_hessian_logdet;
  return out;
}

LaplaceApproximation laplace_integral(const ModelFamily& family, const Dataset& data,
                                      const std::function<double(const VectorXd&)>& q_fn,
                                      double alpha, const FitOptions& options) {
  const MdpdeResult m = fit(family, data, alpha, options);
  const double q = q_fn(m.theta_hat);
  if (!(q > 0) || !std::isfinite(q)) throw DomainError("q must be positive and finite at the mode");
  return laplace_from_mode(m.theta_hat, std::log(q), m.q_value, m.neg_hessian);
}

VectorXd laplace_expectation(const ModelFamily& family, const Dataset& data, const Prior& prior,
                             const std::function<VectorXd(const VectorXd&)>& h, double alpha,
                             const FitOptions& options) {
  if (!prior.proper())
    throw DomainError("Laplace expectations need a proper prior (flat prior rejected)");
  const MdpdeResult m = fit(family, data, alpha, options);
  // Denominator validity: the prior must be positive at the mode and the Hessian PD.
  if (!std::isfinite(prior.log_density(m.theta_hat)))
    throw DomainError("prior density vanishes at the MDPDE");
  laplace_from_mode(m.theta_hat, prior.log_density(m.theta_hat), m.q_value, m.neg_hessian);
  return h(m.theta_hat);
}

VectorXd halton_point(std::uint64_t k, Index dim) {
  static constexpr std::array<int, 20> primes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                                 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  if (dim > static_cast<Index>(primes.size())) throw DomainError("Halton dimension too large");
  VectorXd u(dim);
  for (Index j = 0; j < dim; ++j) {
    const int b = primes[j];
    double f = 1.0;
    double r = 0.0;
    // Skip index 0, which maps to the corner of the box.
    for (std::uint64_t i = k + 1; i > 0; i /= b) {
      f /= b;
      r += f * static_cast<double>(i % b);
    }
    u(j) = r;
  }
  return u;
}

BConditionsReport check_b_conditions(const ModelFamily& family, const Dataset& data, double alpha,
                                     const std::vector<double>& delta_grid,
                                     const BConditionsOptions& options) {
  validate_dataset(family, data);
  const double n = static_cast<double>(data.size());
  FitOptions fopts;
  fopts.allow_singular = true;
  const MdpdeResult m = fit(family, data, alpha, fopts);
  const Index p = m.theta_hat.size();

  BConditionsReport report;
  report.theta_hat = m.theta_hat;
  report.fit_converged = m.converged;
  const MatrixXd scaled = m.neg_hessian / n;
  report.b2_determinant = scaled.determinant();
  report.b2_eigenvalues = Eigen::SelfAdjointEigenSolver<MatrixXd>(scaled).eigenvalues();
  report.flat_direction = report.b2_eigenvalues.minCoeff() < options.eta;
  std::ostringstream warn;
  if (!m.converged) warn << "MDPDE did not converge (" << m.message << "); ";
  if (report.flat_direction)
    warn << "near-zero eigenvalue " << report.b2_eigenvalues.minCoeff()
         << " of -grad^2 Q / n: flat direction at the optimum; ";

  const VectorXd lower = options.lower ? *options.lower
                                       : VectorXd(m.theta_hat.array() - options.half_width);
  const VectorXd upper = options.upper ? *options.upper
                                       : VectorXd(m.theta_hat.array() + options.half_width);
  if (lower.size() != p || upper.size() != p || !(lower.array() < upper.array()).all())
    throw DomainError("B-condition region must satisfy lower < upper in every coordinate");

  std::vector<double> distance;
  std::vector<double> gap;
  distance.reserve(options.points);
  gap.reserve(options.points);
  for (Index k = 0; k < options.points; ++k) {
    const VectorXd u = halton_point(static_cast<std::uint64_t>(k), p);
    const VectorXd theta = lower.array() + u.array() * (upper - lower).array();
    if (!family.valid_parameter(theta, data.covariates())) continue;
    const double q = q_alpha(family, data, theta, alpha).value;
    distance.push_back((theta - m.theta_hat).norm());
    gap.push_back((q - m.q_value) / n);
  }
  for (double delta : delta_grid) {
    BSupremum s;
    s.delta = delta;
    double best = -kInf;
    for (std::size_t k = 0; k < gap.size(); ++k) {
      if (distance[k] <= delta) continue;
      best = std::max(best, gap[k]);
      ++s.points_used;
    }
    s.sup_scaled_gap = s.points_used > 0 ? best : kNaN;
    s.negative = s.points_used > 0 && best < 0;
    if (s.points_used > 0 && !s.negative)
      warn << "sup of (Q - Q(theta_hat)) / n outside delta = " << delta << " is " << best
           << " (not negative); ";
    report.b3.push_back(s);
  }
  report.warning = warn.str();
  return report;
}

}  // namespace rpost
