#include "rpost/mdpde.hpp"

#include <sstream>

namespace rpost {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

bool singular(const MatrixXd& neg_hessian) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(neg_hessian, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  return !(top > 0) || eig.eigenvalues().minCoeff() <= 1e-12 * top;
}

}  // namespace

MdpdeResult maximize(const ObjectiveFn& objective, const VectorXd& init,
                     const FeasibleFn& feasible, const MaximizeOptions& options) {
  if (feasible && !feasible(init)) throw DomainError("starting point is outside the parameter space");
  MdpdeResult result;
  VectorXd theta = init;
  // Keep iterating past the reporting tolerance; Newton converges quadratically and
  // the extra digits make downstream finite-difference checks meaningful.
  const double stop_tolerance = 1e-3 * options.gradient_tolerance;
  AlphaLikelihoodValue current = objective(theta, Derivatives::Hessian);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const VectorXd& g = *current.gradient;
    const double gnorm = g.norm();
    if (!std::isfinite(current.value) || !std::isfinite(gnorm)) {
      result.message = "objective is not finite";
      break;
    }
    if (gnorm <= stop_tolerance) break;

    const MatrixXd h = -*current.hessian;
    Eigen::LLT<MatrixXd> llt(h);
    VectorXd direction;
    double step = 1.0;
    bool newton = llt.info() == Eigen::Success && !singular(h);
    if (newton) {
      direction = llt.solve(g);
      if (!direction.allFinite() || !(g.dot(direction) > 0)) newton = false;
    }
    if (!newton) {
      // Gradient step scaled by a curvature bound, capped to a unit-relative move.
      direction = g;
      const double curvature = h.cwiseAbs().rowwise().sum().maxCoeff();
      const double cap = std::max(1.0, theta.norm()) / gnorm;
      step = curvature > 0 ? std::min(1.0 / curvature, cap) : cap;
    }
    const double slope = g.dot(direction);

    bool accepted = false;
    // Near the optimum the predicted gain drops below the rounding error of Q; accept a
    // full Newton step there when it reduces the gradient instead.
    if (newton && 0.5 * slope <= 1e-10 * (1.0 + std::abs(current.value))) {
      const VectorXd trial = theta + direction;
      if (!feasible || feasible(trial)) {
        AlphaLikelihoodValue next = objective(trial, Derivatives::Hessian);
        if (std::isfinite(next.value) && next.gradient->allFinite() &&
            next.gradient->norm() < gnorm) {
          theta = trial;
          current = std::move(next);
          continue;
        }
      }
    }
    for (int k = 0; k < kMaxHalvings; ++k, step *= 0.5) {
      const VectorXd trial = theta + step * direction;
      if (feasible && !feasible(trial)) continue;
      const double v = objective(trial, Derivatives::None).value;
      if (std::isfinite(v) && v >= current.value + kArmijo * step * slope) {
        theta = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.message = "line search made no progress";
      break;
    }
    current = objective(theta, Derivatives::Hessian);
  }
  if (it == options.max_iterations) result.message = "iteration limit reached";

  result.theta_hat = theta;
  result.q_value = current.value;
  result.iterations = it;
  result.gradient_norm = current.gradient->norm();
  result.converged = result.gradient_norm <= options.gradient_tolerance;
  result.neg_hessian = -*current.hessian;
  if (result.converged) result.message.clear();
  if (result.converged && !options.allow_singular && singular(result.neg_hessian)) {
    std::ostringstream msg;
    msg << "negative Hessian of Q is singular at the optimum (gradient norm "
        << result.gradient_norm << ")";
    throw SingularHessian(msg.str());
  }
  return result;
}

VectorXd least_squares(const Dataset& data) {
  return data.design.colPivHouseholderQr().solve(data.responses);
}

VectorXd default_start(const ModelFamily& family, const Dataset& data) {
  const Index p = data.covariates();
  if (const auto* gauss = dynamic_cast<const GaussianRegression*>(&family)) {
    const VectorXd beta = least_squares(data);
    if (gauss->known_scale()) return beta;
    VectorXd theta(p + 1);
    theta.head(p) = beta;
    const double rss = (data.responses - data.design * beta).squaredNorm();
    const double dof = std::max<double>(1.0, static_cast<double>(data.size() - p));
    const double s = std::sqrt(rss / dof);
    theta(p) = s > 1e-8 ? s : 1.0;
    return theta;
  }
  return VectorXd::Zero(family.parameter_dim(p));
}

namespace {

using StageObjective = std::function<ObjectiveFn(double)>;

MdpdeResult continuation_fit(const StageObjective& stage, const FeasibleFn& feasible,
                             VectorXd start, double alpha, double n, const FitOptions& options) {
  MaximizeOptions mopts;
  mopts.max_iterations = options.max_iterations;
  mopts.gradient_tolerance = options.tolerance * std::max(1.0, n);
  mopts.allow_singular = options.allow_singular;

  std::vector<double> stages;
  if (options.continuation && alpha > 0) {
    if (!(options.continuation_step > 0 && options.continuation_step <= 0.1))
      throw DomainError("continuation step must lie in (0, 0.1]");
    const int k = static_cast<int>(std::ceil(alpha / options.continuation_step - 1e-12));
    for (int j = 0; j < k; ++j) stages.push_back(alpha * j / k);
  }
  stages.push_back(alpha);

  int iterations = 0;
  MaximizeOptions warm = mopts;
  warm.allow_singular = true;
  MdpdeResult result;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const bool last = s + 1 == stages.size();
    result = maximize(stage(stages[s]), start, feasible, last ? mopts : warm);
    iterations += result.iterations;
    if (result.theta_hat.allFinite()) start = result.theta_hat;
  }
  result.iterations = iterations;
  result.alpha = alpha;
  return result;
}

}  // namespace

MdpdeResult fit(const ModelFamily& family, const Dataset& data, double alpha,
                const FitOptions& options) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  validate_dataset(family, data);
  const Index p = data.covariates();
  VectorXd start = options.init ? *options.init : default_start(family, data);
  family.check_parameter(start, p);
  auto stage = [&](double a) -> ObjectiveFn {
    return [&family, &data, a](const VectorXd& theta, Derivatives d) {
      return q_alpha(family, data, theta, a, d);
    };
  };
  auto feasible = [&](const VectorXd& theta) { return family.valid_parameter(theta, p); };
  return continuation_fit(stage, feasible, start, alpha, static_cast<double>(data.size()),
                          options);
}

MdpdeResult fit_functional(const ModelFamily& family, const MatrixXd& design,
                           const TrueDistributionSpec& spec, double alpha, const VectorXd& init,
                           const FitOptions& options) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  spec.validate(design.rows());
  const Index p = design.cols();
  family.check_parameter(init, p);
  auto stage = [&](double a) -> ObjectiveFn {
    return [&family, &design, &spec, a](const VectorXd& theta, Derivatives d) {
      return q_alpha_functional(family, design, spec, theta, a, d);
    };
  };
  auto feasible = [&](const VectorXd& theta) { return family.valid_parameter(theta, p); };
  return continuation_fit(stage, feasible, init, alpha, static_cast<double>(design.rows()),
                          options);
}

namespace {

// Moments of the per-row score under a point mass at x: grad, grad grad', hess.
struct ScoreMoments {
  VectorXd mean;
  MatrixXd second;
  MatrixXd hess;
};

ScoreMoments point_moments(const ModelFamily& family, RowRef z, double x, const VectorXd& theta,
                           double alpha) {
  VectorXd g;
  MatrixXd h;
  if (alpha > 0) {
    g = family.grad_v(z, x, theta, alpha);
    h = family.hess_v(z, x, theta, alpha);
  } else {
    const LogDensityDerivatives d = family.log_density_derivatives(z, x, theta);
    g = d.gradient;
    h = d.hessian;
  }
  return {g, g * g.transpose(), h};
}

ScoreMoments base_moments(const ModelFamily& family, const ModelFamily& truth, RowRef z,
                          const VectorXd& theta_g, const VectorXd& theta, double alpha) {
  const Index p = theta.size();
  auto stacked = [&](double x) -> VectorXd {
    const ScoreMoments m = point_moments(family, z, x, theta, alpha);
    VectorXd out(p + 2 * p * p);
    out.head(p) = m.mean;
    out.segment(p, p * p) = Eigen::Map<const VectorXd>(m.second.data(), p * p);
    out.tail(p * p) = Eigen::Map<const VectorXd>(m.hess.data(), p * p);
    return out;
  };
  const VectorXd e = truth.expectation(z, theta_g, std::function<VectorXd(double)>(stacked));
  return {e.head(p), Eigen::Map<const MatrixXd>(e.data() + p, p, p),
          Eigen::Map<const MatrixXd>(e.data() + p + p * p, p, p)};
}

RowInformation information_from_moments(const ScoreMoments& m, double alpha) {
  RowInformation info;
  const MatrixXd var = m.second - m.mean * m.mean.transpose();
  if (alpha > 0) {
    info.psi = m.hess / (1.0 + alpha);
    info.omega = var / ((1.0 + alpha) * (1.0 + alpha));
  } else {
    info.psi = -m.hess;
    info.omega = var;
  }
  return info;
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

SandwichMatrices sandwich(const ModelFamily& family, const Dataset& data, const VectorXd& theta,
                          double alpha) {
  validate_dataset(family, data);
  const double n = static_cast<double>(data.size());
  SandwichMatrices sw = sandwich(family, data.design, TrueDistributionSpec::in_model(theta),
                                 theta, alpha);
  sw.psi_hat = symmetrize(-*q_alpha(family, data, theta, alpha, Derivatives::Hessian).hessian / n);
  return sw;
}

SandwichMatrices sandwich(const ModelFamily& family, const MatrixXd& design,
                          const TrueDistributionSpec& spec, const VectorXd& theta, double alpha) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  const Index n = design.rows();
  if (n < 1) throw DomainError("design is empty");
  spec.validate(n);
  family.check_parameter(theta, design.cols());
  const Index p = theta.size();
  const ModelFamily& truth = spec.truth ? *spec.truth : family;
  CompensatedSum<MatrixXd> psi(MatrixXd::Zero(p, p));
  CompensatedSum<MatrixXd> omega(MatrixXd::Zero(p, p));
  for (Index i = 0; i < n; ++i) {
    const auto z = design.row(i);
    RowInformation info;
    if (!spec.truth && spec.epsilon == 0.0) {
      info = family.row_information(z, theta, spec.theta_g, alpha);
    } else {
      ScoreMoments m = base_moments(family, truth, z, spec.theta_g, theta, alpha);
      if (spec.epsilon > 0) {
        const ScoreMoments pt = point_moments(family, z, spec.points(i), theta, alpha);
        const double e = spec.epsilon;
        m.mean = (1 - e) * m.mean + e * pt.mean;
        m.second = (1 - e) * m.second + e * pt.second;
        m.hess = (1 - e) * m.hess + e * pt.hess;
      }
      info = information_from_moments(m, alpha);
    }
    psi.add(info.psi);
    omega.add(info.omega);
  }
  SandwichMatrices sw;
  sw.psi = symmetrize(psi.value() / static_cast<double>(n));
  sw.omega = symmetrize(omega.value() / static_cast<double>(n));
  sw.psi_hat = sw.psi;
  sw.at_theta = theta;
  return sw;
}

MatrixXd asymptotic_covariance(const SandwichMatrices& sw, Index n) {
  if (n < 1) throw DomainError("sample size must be positive");
  if (singular(sw.psi)) throw SingularHessian("Psi is singular");
  const Eigen::LDLT<MatrixXd> ldlt(sw.psi);
  const MatrixXd left = ldlt.solve(sw.omega);
  const MatrixXd cov = ldlt.solve(left.transpose()).transpose() / static_cast<double>(n);
  return symmetrize(cov);
}

}  // namespace rpost
