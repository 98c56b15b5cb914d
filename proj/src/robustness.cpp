#include "rpost/robustness.hpp"

#include "rpost/simulate.hpp"

#include <sstream>

namespace rpost {

ContaminationScenario ContaminationScenario::one_direction(Index i0, double t) {
  ContaminationScenario s;
  s.mode = Mode::OneDirection;
  s.i0 = i0;
  s.points = VectorXd::Constant(1, t);
  return s;
}

ContaminationScenario ContaminationScenario::all_directions(VectorXd points) {
  ContaminationScenario s;
  s.mode = Mode::AllDirections;
  s.points = std::move(points);
  return s;
}

ContaminationScenario ContaminationScenario::all_directions(double t, Index n) {
  return all_directions(VectorXd::Constant(n, t));
}

void ContaminationScenario::validate(Index n) const {
  if (!points.allFinite()) throw DomainError("contamination points must be finite");
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw DomainError("epsilon must lie in [0, 0.5]");
  if (mode == Mode::OneDirection) {
    if (i0 < 0 || i0 >= n) throw DomainError("contaminated index out of range");
    if (points.size() != 1) throw DomainError("one-direction scenario needs one point");
  } else if (points.size() != n) {
    throw DomainError("all-direction scenario needs one point per row");
  }
}

double ContaminationScenario::point(Index i) const {
  return mode == Mode::OneDirection ? points(0) : points(i);
}

bool ContaminationScenario::contaminated(Index i) const {
  return mode == Mode::AllDirections || i == i0;
}

namespace {

// int f^alpha dG_i (alpha > 0) or int g_i log f (alpha == 0) for the base of spec.
double base_cross(const ModelFamily& family, const TrueDistributionSpec& spec, RowRef z,
                  const VectorXd& theta, double alpha) {
  TrueDistributionSpec base = spec;
  base.epsilon = 0.0;
  if (alpha > 0) return expected_density_power(family, z, base, 0.0, theta, alpha);
  if (spec.truth)
    return spec.truth->expectation(z, spec.theta_g,
                                   [&](double x) { return family.log_density(z, x, theta); });
  return family.cross_log(z, theta, spec.theta_g);
}

double k_from_cross(const ModelFamily& family, RowRef z, const VectorXd& theta, double t,
                    double alpha, double cross) {
  if (alpha > 0) return (family.density_power(z, t, theta, alpha) - cross) / alpha;
  return family.log_density(z, t, theta) - cross;
}

}  // namespace

double k_function(const ModelFamily& family, const TrueDistributionSpec& spec, RowRef z,
                  const VectorXd& theta, double t, double alpha) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  if (!std::isfinite(t)) throw DomainError("contamination point must be finite");
  family.check_parameter(theta, z.size());
  return k_from_cross(family, z, theta, t, alpha, base_cross(family, spec, z, theta, alpha));
}

// ---------------------------------------------------------------------------

FunctionalPosterior::FunctionalPosterior(FamilyPtr family, MatrixXd design,
                                         TrueDistributionSpec spec, Prior prior, double alpha,
                                         const FunctionalPosteriorConfig& config)
    : family_(std::move(family)),
      design_(std::move(design)),
      spec_(std::move(spec)),
      prior_(std::move(prior)),
      alpha_(alpha) {
  if (!family_) throw DomainError("functional posterior needs a family");
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  spec_.validate(design_.rows());
  const Index covariates = design_.cols();
  family_->check_parameter(spec_.theta_g, covariates);
  const Index p = spec_.theta_g.size();
  if (prior_.dim() >= 0 && prior_.dim() != p) throw DomainError("prior dimension mismatch");

  const ModelFamily& fam = *family_;
  auto objective = [&](const VectorXd& theta, Derivatives d) {
    AlphaLikelihoodValue v = q_alpha_functional(fam, design_, spec_, theta, alpha_, d);
    v.value += prior_.log_density(theta);
    if (v.gradient) *v.gradient += prior_.log_density_gradient(theta);
    if (v.hessian) *v.hessian += prior_.log_density_hessian(p);
    return v;
  };
  auto feasible = [&](const VectorXd& theta) {
    return fam.valid_parameter(theta, covariates) && std::isfinite(prior_.log_density(theta));
  };
  MaximizeOptions mopts;
  mopts.gradient_tolerance = 1e-8 * std::max<double>(1.0, static_cast<double>(design_.rows()));
  const MdpdeResult m = maximize(objective, spec_.theta_g, feasible, mopts);
  mode_ = m.theta_hat;
  Eigen::LLT<MatrixXd> llt(m.neg_hessian);
  if (llt.info() != Eigen::Success)
    throw SingularHessian("functional posterior is not log-concave at its mode");
  proposal_cov_ =
      config.inflation * config.inflation * llt.solve(MatrixXd::Identity(p, p));

  auto log_target = [&](const VectorXd& theta) {
    if (!feasible(theta)) return -kInf;
    return q_alpha_functional(fam, design_, spec_, theta, alpha_).value +
           prior_.log_density(theta);
  };
  sample_ = importance_sample(log_target, {mode_, proposal_cov_}, config.draws, config.seed);

  const Index draws = sample_.draws.rows();
  cross_.resize(draws, design_.rows());
  for (Index k = 0; k < draws; ++k) {
    const VectorXd theta = sample_.draws.row(k).transpose();
    if (!fam.valid_parameter(theta, covariates)) {
      cross_.row(k).setZero();  // zero weight draws
      continue;
    }
    for (Index i = 0; i < design_.rows(); ++i)
      cross_(k, i) = base_cross(fam, spec_, design_.row(i), theta, alpha_);
  }
}

VectorXd FunctionalPosterior::mean() const {
  return sample_.draws.transpose() * sample_.weights;
}

VectorXd FunctionalPosterior::k_sums(const ContaminationScenario& scenario) const {
  scenario.validate(design_.rows());
  const Index draws = sample_.draws.rows();
  VectorXd out = VectorXd::Zero(draws);
  for (Index k = 0; k < draws; ++k) {
    if (sample_.weights(k) == 0.0) continue;
    const VectorXd theta = sample_.draws.row(k).transpose();
    CompensatedSum<double> s;
    for (Index i = 0; i < design_.rows(); ++i) {
      if (!scenario.contaminated(i)) continue;
      s.add(k_from_cross(*family_, design_.row(i), theta, scenario.point(i), alpha_, cross_(k, i)));
    }
    out(k) = s.value();
  }
  return out;
}

double FunctionalPosterior::k_sum(const VectorXd& theta,
                                  const ContaminationScenario& scenario) const {
  scenario.validate(design_.rows());
  CompensatedSum<double> s;
  for (Index i = 0; i < design_.rows(); ++i) {
    if (!scenario.contaminated(i)) continue;
    s.add(k_function(*family_, spec_, design_.row(i), theta, scenario.point(i), alpha_));
  }
  return s.value();
}

// ---------------------------------------------------------------------------

namespace {

double weighted_mean(const VectorXd& w, const VectorXd& v) {
  CompensatedSum<double> s;
  for (Index k = 0; k < v.size(); ++k)
    if (w(k) > 0) s.add(w(k) * v(k));
  return s.value();
}

}  // namespace

InfluenceValue if_erpe(const FunctionalPosterior& posterior, const ContaminationScenario& scenario) {
  const ImportanceSample& is = posterior.sample();
  const VectorXd& w = is.weights;
  const VectorXd s = posterior.k_sums(scenario);
  const double s_mean = weighted_mean(w, s);
  const Index p = is.draws.cols();
  InfluenceValue out{VectorXd(p), VectorXd(p)};
  for (Index j = 0; j < p; ++j) {
    const VectorXd theta = is.draws.col(j);
    const double t_mean = weighted_mean(w, theta);
    const VectorXd prod = ((theta.array() - t_mean) * (s.array() - s_mean)).matrix();
    const double cov = weighted_mean(w, prod);
    out.value(j) = cov;
    out.std_error(j) = std::sqrt((w.array().square() * (prod.array() - cov).square()).sum());
  }
  return out;
}

double if_general_loss(const FunctionalPosterior& posterior, const LossFunction& loss,
                       const ContaminationScenario& scenario, Index component) {
  const ImportanceSample& is = posterior.sample();
  if (component < 0 || component >= is.draws.cols())
    throw DomainError("component index out of range");
  const VectorXd& w = is.weights;
  const VectorXd theta = is.draws.col(component);
  const double estimate = bayes_estimate_under_loss(theta, loss, w);
  const VectorXd s = posterior.k_sums(scenario);
  const double s_mean = weighted_mean(w, s);
  CompensatedSum<double> num;
  CompensatedSum<double> den;
  for (Index k = 0; k < theta.size(); ++k) {
    if (!(w(k) > 0)) continue;
    num.add(w(k) * loss.d1(theta(k), estimate) * (s(k) - s_mean));
    den.add(w(k) * loss.d2(theta(k), estimate));
  }
  if (!(den.value() > 0)) {
    std::ostringstream msg;
    msg << "ill-posed loss: E[L''] = " << den.value() << " is not positive";
    throw DomainError(msg.str());
  }
  return -num.value() / den.value();
}

double if_erpe_alpha0_linear(const MatrixXd& design, double beta_g, double sigma, double tau,
                             const ContaminationScenario& scenario) {
  if (design.cols() != 1) throw DomainError("closed form needs a scalar coefficient");
  if (!(sigma > 0) || !(tau > 0)) throw DomainError("sigma and tau must be positive");
  scenario.validate(design.rows());
  const double s2 = sigma * sigma;
  double slope = 0.0;
  for (Index i = 0; i < design.rows(); ++i) {
    if (!scenario.contaminated(i)) continue;
    const double z = design(i, 0);
    slope += z * (scenario.point(i) - z * beta_g) / s2;
  }
  const double precision = design.col(0).squaredNorm() / s2 + 1.0 / (tau * tau);
  return slope / precision;
}

PifResult pif(const FunctionalPosterior& posterior, const MatrixXd& theta_grid,
              const ContaminationScenario& scenario) {
  const ImportanceSample& is = posterior.sample();
  if (theta_grid.cols() != is.draws.cols()) throw DomainError("theta grid has the wrong width");
  const VectorXd& w = is.weights;
  const VectorXd s = posterior.k_sums(scenario);
  const double s_mean = weighted_mean(w, s);
  PifResult out;
  const VectorXd centred = (s.array() - s_mean).matrix();
  out.posterior_mean = weighted_mean(w, centred);
  out.posterior_mean_se = std::sqrt((w.array().square() * centred.array().square()).sum());
  out.posterior_variance = weighted_mean(w, centred.array().square().matrix());
  out.values.resize(theta_grid.rows());
  for (Index g = 0; g < theta_grid.rows(); ++g)
    out.values(g) = posterior.k_sum(theta_grid.row(g).transpose(), scenario) - s_mean;
  return out;
}

SensitivityReport sensitivities(const std::vector<PifResult>& surface, double phi_second_at_1,
                                double phi_first_at_1) {
  if (surface.empty()) throw DomainError("empty PIF surface");
  const Index nt = static_cast<Index>(surface.size());
  SensitivityReport r;
  r.gamma.resize(nt);
  r.s.resize(nt);
  r.first_order.resize(nt);
  for (Index k = 0; k < nt; ++k) {
    const PifResult& p = surface[static_cast<std::size_t>(k)];
    if (p.values.size() == 0) throw DomainError("empty theta grid in PIF surface");
    r.gamma(k) = p.values.cwiseAbs().maxCoeff();
    r.s(k) = phi_second_at_1 * p.posterior_variance;
    r.first_order(k) = phi_first_at_1 * p.posterior_mean;
  }
  r.gamma_star = r.gamma.maxCoeff();
  r.s_star = r.s.maxCoeff();
  return r;
}

MatrixXd scalar_grid(double centre, double half_width, Index points) {
  if (points < 2 || !(half_width > 0)) throw DomainError("grid needs >= 2 points and a positive width");
  MatrixXd g(points, 1);
  for (Index k = 0; k < points; ++k)
    g(k, 0) = centre - half_width + 2.0 * half_width * static_cast<double>(k) /
                                        static_cast<double>(points - 1);
  return g;
}

RobustnessReport influence_analysis(const FunctionalPosterior& posterior, const VectorXd& t_grid,
                                    const MatrixXd& theta_grid, double phi_second_at_1) {
  const Index nt = t_grid.size();
  if (nt < 1) throw DomainError("empty t grid");
  const Index p = posterior.sample().draws.cols();
  RobustnessReport r;
  r.alpha = posterior.alpha();
  r.t_grid = t_grid;
  r.theta_grid = theta_grid;
  r.if_values.resize(nt, p);
  r.if_std_error.resize(nt, p);
  r.pif_surface.resize(static_cast<std::size_t>(nt));
  r.ess = posterior.sample().ess;
  parallel_for(nt, [&](Index k) {
    const auto scenario = ContaminationScenario::all_directions(t_grid(k), posterior.rows());
    const InfluenceValue iv = if_erpe(posterior, scenario);
    r.if_values.row(k) = iv.value.transpose();
    r.if_std_error.row(k) = iv.std_error.transpose();
    r.pif_surface[static_cast<std::size_t>(k)] = pif(posterior, theta_grid, scenario);
  });
  r.sensitivity = sensitivities(r.pif_surface, phi_second_at_1);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<BreakdownPoint> breakdown_experiment(const BreakdownConfig& config) {
  if (!(config.epsilon >= 0.0 && config.epsilon <= 0.5))
    throw DomainError("epsilon must lie in [0, 0.5]");
  if (config.n < 1) throw DomainError("n must be positive");
  for (std::size_t k = 1; k < config.magnitudes.size(); ++k)
    if (!(config.magnitudes[k] > config.magnitudes[k - 1]))
      throw DomainError("magnitudes must be increasing");
  const auto family = std::make_shared<GaussianRegression>(config.sigma);
  const MatrixXd design = MatrixXd::Ones(config.n, 1);
  const VectorXd theta_g = VectorXd::Constant(1, config.mu_g);

  const FunctionalPosterior clean(family, design, TrueDistributionSpec::in_model(theta_g),
                                  config.prior, config.alpha, config.sampler);
  const double clean_erpe = clean.mean()(0);
  FitOptions fopts;
  fopts.continuation = false;
  fopts.allow_singular = true;
  const double clean_mdpde =
      fit_functional(*family, design, TrueDistributionSpec::in_model(theta_g), config.alpha,
                     theta_g, fopts)
          .theta_hat(0);

  std::vector<BreakdownPoint> curve(config.magnitudes.size());
  parallel_for(static_cast<Index>(curve.size()), [&](Index k) {
    const double m = config.magnitudes[static_cast<std::size_t>(k)];
    BreakdownPoint pt;
    pt.magnitude = m;
    if (config.epsilon == 0.0) {
      pt.erpe = clean_erpe;
      pt.mdpde = clean_mdpde;
      pt.ess = clean.sample().ess;
    } else {
      const auto spec = TrueDistributionSpec::contaminated(
          theta_g, config.epsilon, VectorXd::Constant(config.n, config.mu_g + m));
      const FunctionalPosterior post(family, design, spec, config.prior, config.alpha,
                                     config.sampler);
      pt.erpe = post.mean()(0);
      pt.ess = post.sample().ess;
      pt.mdpde = fit_functional(*family, design, spec, config.alpha, theta_g, fopts).theta_hat(0);
    }
    pt.erpe_shift = std::abs(pt.erpe - clean_erpe);
    pt.mdpde_shift = std::abs(pt.mdpde - clean_mdpde);
    curve[static_cast<std::size_t>(k)] = pt;
  });
  return curve;
}

double plateau_change(const std::vector<BreakdownPoint>& curve) {
  if (curve.size() < 4) throw DomainError("need at least four magnitudes");
  const double ref = curve[curve.size() - 4].erpe_shift;
  double worst = 0.0;
  for (std::size_t k = curve.size() - 3; k < curve.size(); ++k)
    worst = std::max(worst, std::abs(curve[k].erpe_shift - ref));
  return worst / std::max(std::abs(ref), 1e-12);
}

}  // namespace rpost
