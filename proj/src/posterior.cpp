#include "rpost/posterior.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace rpost {

// ---------------------------------------------------------------------------
// Prior

Prior Prior::gaussian(VectorXd mean, MatrixXd covariance) {
  if (mean.size() < 1 || covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw DomainError("Gaussian prior: mean and covariance sizes disagree");
  if (!mean.allFinite() || !covariance.allFinite())
    throw DomainError("Gaussian prior: non-finite mean or covariance");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw DomainError("Gaussian prior: covariance is not symmetric");
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw DomainError("Gaussian prior: covariance is not SPD");
  Prior prior;
  prior.kind_ = Kind::Gaussian;
  prior.mean_ = std::move(mean);
  prior.covariance_ = std::move(covariance);
  prior.chol_ = llt.matrixL();
  prior.precision_ = llt.solve(MatrixXd::Identity(prior.mean_.size(), prior.mean_.size()));
  const double logdet = 2.0 * prior.chol_.diagonal().array().log().sum();
  prior.log_norm_ = -0.5 * (static_cast<double>(prior.mean_.size()) * kLogTwoPi + logdet);
  return prior;
}

Prior Prior::uniform_box(VectorXd lower, VectorXd upper) {
  if (lower.size() < 1 || lower.size() != upper.size())
    throw DomainError("uniform prior: bound sizes disagree");
  if (!lower.allFinite() || !upper.allFinite() || !(lower.array() < upper.array()).all())
    throw DomainError("uniform prior: need finite lower < upper in every coordinate");
  Prior prior;
  prior.kind_ = Kind::UniformBox;
  prior.log_norm_ = -(upper - lower).array().log().sum();
  prior.lower_ = std::move(lower);
  prior.upper_ = std::move(upper);
  return prior;
}

Prior Prior::improper_flat() { return Prior(); }

Index Prior::dim() const {
  switch (kind_) {
    case Kind::Gaussian:
      return mean_.size();
    case Kind::UniformBox:
      return lower_.size();
    case Kind::ImproperFlat:
      break;
  }
  return -1;
}

double Prior::log_density(const VectorXd& theta) const {
  if (dim() >= 0 && theta.size() != dim()) throw DomainError("prior dimension mismatch");
  switch (kind_) {
    case Kind::Gaussian: {
      const VectorXd u = chol_.triangularView<Eigen::Lower>().solve(theta - mean_);
      return log_norm_ - 0.5 * u.squaredNorm();
    }
    case Kind::UniformBox:
      if ((theta.array() < lower_.array()).any() || (theta.array() > upper_.array()).any())
        return -kInf;
      return log_norm_;
    case Kind::ImproperFlat:
      break;
  }
  return 0.0;
}

VectorXd Prior::log_density_gradient(const VectorXd& theta) const {
  if (kind_ == Kind::Gaussian) return -precision_ * (theta - mean_);
  return VectorXd::Zero(theta.size());
}

MatrixXd Prior::log_density_hessian(Index d) const {
  if (kind_ == Kind::Gaussian) return -precision_;
  return MatrixXd::Zero(d, d);
}

VectorXd Prior::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Gaussian: {
      std::normal_distribution<double> normal;
      VectorXd u(mean_.size());
      for (Index j = 0; j < u.size(); ++j) u(j) = normal(rng);
      return mean_ + chol_ * u;
    }
    case Kind::UniformBox: {
      std::uniform_real_distribution<double> unif;
      VectorXd v(lower_.size());
      for (Index j = 0; j < v.size(); ++j) v(j) = lower_(j) + (upper_(j) - lower_(j)) * unif(rng);
      return v;
    }
    case Kind::ImproperFlat:
      break;
  }
  throw DomainError("cannot sample from an improper flat prior");
}

double log_r_posterior_unnorm(const ModelFamily& family, const Dataset& data, const Prior& prior,
                              const VectorXd& theta, double alpha) {
  if (!family.valid_parameter(theta, data.covariates())) return -kInf;
  const double lp = prior.log_density(theta);
  if (lp == -kInf) return -kInf;
  return q_alpha(family, data, theta, alpha).value + lp;
}

// ---------------------------------------------------------------------------
// Sampling

void SamplerConfig::validate() const {
  if (chain_length < 1) throw DomainError("chain length must be at least 1");
  if (burn_in < 0) throw DomainError("burn-in must be non-negative");
  if (thinning < 1) throw DomainError("thinning must be at least 1");
  if (!(proposal_scale > 0) || !std::isfinite(proposal_scale))
    throw DomainError("proposal scale must be positive");
}

AlphaPosteriorChain sample_target(const LogTarget& log_target, const VectorXd& start,
                                  const MatrixXd& proposal_covariance,
                                  const SamplerConfig& config) {
  config.validate();
  const Index p = start.size();
  if (proposal_covariance.rows() != p || proposal_covariance.cols() != p)
    throw DomainError("proposal covariance has the wrong size");
  Eigen::LLT<MatrixXd> llt(proposal_covariance);
  if (llt.info() != Eigen::Success) throw DomainError("proposal covariance is not SPD");
  const MatrixXd chol = llt.matrixL();

  double current_lp = log_target(start);
  if (!std::isfinite(current_lp))
    throw DomainError("log posterior is not finite at the starting point");

  Rng rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  const Index kept = config.chain_length / config.thinning;
  if (kept < 1) throw DomainError("thinning leaves no draws");
  AlphaPosteriorChain chain;
  chain.draws.resize(kept, p);
  chain.log_post_values.resize(kept);
  chain.seed = config.seed;
  chain.burn_in = config.burn_in;
  chain.thinning = config.thinning;

  VectorXd current = start;
  VectorXd noise(p);
  Index accepted = 0;
  Index stored = 0;
  const Index total = config.burn_in + kept * config.thinning;
  for (Index it = 0; it < total; ++it) {
    for (Index j = 0; j < p; ++j) noise(j) = normal(rng);
    const VectorXd proposal = current + chol * noise;
    const double lp = log_target(proposal);
    const double log_u = std::log(unif(rng));
    if (std::isfinite(lp) && log_u < lp - current_lp) {
      current = proposal;
      current_lp = lp;
      if (it >= config.burn_in) ++accepted;
    }
    if (it >= config.burn_in && (it - config.burn_in + 1) % config.thinning == 0) {
      chain.draws.row(stored) = current.transpose();
      chain.log_post_values(stored) = current_lp;
      ++stored;
    }
  }
  chain.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(kept * config.thinning);
  if (chain.acceptance_rate < 0.05 || chain.acceptance_rate > 0.7) {
    std::ostringstream msg;
    msg << "acceptance rate " << chain.acceptance_rate << " is outside [0.05, 0.7]";
    chain.warning = msg.str();
  }
  return chain;
}

AlphaPosteriorChain sample(const ModelFamily& family, const Dataset& data, const Prior& prior,
                           double alpha, const SamplerConfig& config) {
  config.validate();
  validate_dataset(family, data);
  const Index p = family.parameter_dim(data.covariates());
  if (prior.dim() >= 0 && prior.dim() != p) throw DomainError("prior dimension mismatch");

  VectorXd start;
  if (config.start) {
    start = *config.start;
    if (start.size() != p || !std::isfinite(log_r_posterior_unnorm(family, data, prior, start, alpha)))
      throw DomainError("no valid starting point: log posterior is -inf at the given start");
  }
  MatrixXd cov;
  if (!config.proposal_covariance || !config.start) {
    FitOptions fopts;
    fopts.allow_singular = true;
    const MdpdeResult fit_result = fit(family, data, alpha, fopts);
    if (!config.start) {
      start = fit_result.theta_hat;
      if (!std::isfinite(log_r_posterior_unnorm(family, data, prior, start, alpha)))
        throw DomainError("no valid starting point: log posterior is -inf at the MDPDE");
    }
    if (!config.proposal_covariance) {
      Eigen::LLT<MatrixXd> llt(fit_result.neg_hessian);
      if (llt.info() != Eigen::Success)
        throw SingularHessian("-grad^2 Q is not positive definite at the MDPDE");
      cov = (2.38 * 2.38 / static_cast<double>(p)) * llt.solve(MatrixXd::Identity(p, p));
    }
  }
  if (config.proposal_covariance) cov = *config.proposal_covariance;
  cov *= config.proposal_scale * config.proposal_scale;

  auto target = [&](const VectorXd& theta) {
    return log_r_posterior_unnorm(family, data, prior, theta, alpha);
  };
  AlphaPosteriorChain chain = sample_target(target, start, cov, config);
  chain.alpha = alpha;
  return chain;
}

void write_chain_csv(std::ostream& out, const AlphaPosteriorChain& chain) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << "draw";
  for (Index j = 0; j < chain.draws.cols(); ++j) out << ",theta_" << (j + 1);
  out << ",log_post\n";
  for (Index i = 0; i < chain.size(); ++i) {
    out << i;
    for (Index j = 0; j < chain.draws.cols(); ++j) out << ',' << chain.draws(i, j);
    out << ',' << chain.log_post_values(i) << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

// ---------------------------------------------------------------------------
// Estimates

double batch_means_se(const Eigen::Ref<const VectorXd>& series) {
  const Index m = series.size();
  const Index batches = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(m))));
  if (batches < 2) return kNaN;
  const Index size = m / batches;
  VectorXd means(batches);
  for (Index b = 0; b < batches; ++b) means(b) = series.segment(b * size, size).mean();
  const double centre = means.mean();
  const double var = (means.array() - centre).square().sum() / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

PosteriorMean erpe(const AlphaPosteriorChain& chain) {
  if (chain.size() < 1) throw InsufficientSample("chain is empty");
  const Index p = chain.draws.cols();
  PosteriorMean out{VectorXd(p), VectorXd(p)};
  for (Index j = 0; j < p; ++j) {
    CompensatedSum<double> sum;
    for (Index i = 0; i < chain.size(); ++i) sum.add(chain.draws(i, j));
    out.mean(j) = sum.value() / static_cast<double>(chain.size());
    out.std_error(j) = batch_means_se(chain.draws.col(j));
  }
  return out;
}

LossFunction LossFunction::squared() {
  return {"squared", [](double th, double t) { return (t - th) * (t - th); },
          [](double th, double t) { return 2.0 * (t - th); }, [](double, double) { return 2.0; }};
}

LossFunction LossFunction::absolute() {
  return {"absolute", [](double th, double t) { return std::abs(t - th); },
          [](double th, double t) { return t > th ? 1.0 : (t < th ? -1.0 : 0.0); },
          [](double, double) { return 0.0; }};
}

LossFunction LossFunction::huber(double delta) {
  if (!(delta > 0)) throw DomainError("Huber loss needs delta > 0");
  return {"huber",
          [delta](double th, double t) {
            const double r = std::abs(t - th);
            return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
          },
          [delta](double th, double t) { return std::clamp(t - th, -delta, delta); },
          [delta](double th, double t) { return std::abs(t - th) <= delta ? 1.0 : 0.0; }};
}

LossFunction LossFunction::custom(std::string name, std::function<double(double, double)> evaluate,
                                  std::function<double(double, double)> d1,
                                  std::function<double(double, double)> d2) {
  if (!evaluate || !d1 || !d2) throw DomainError("custom loss needs value and both derivatives");
  return {std::move(name), std::move(evaluate), std::move(d1), std::move(d2)};
}

double bayes_estimate_under_loss(const Eigen::Ref<const VectorXd>& draws, const LossFunction& loss,
                                 const Eigen::Ref<const VectorXd>& weights) {
  const Index m = draws.size();
  if (m < 1) throw InsufficientSample("no draws");
  const bool weighted = weights.size() > 0;
  if (weighted && weights.size() != m) throw DomainError("weights and draws differ in length");
  VectorXd w = weighted ? VectorXd(weights) : VectorXd::Ones(m);
  if ((w.array() < 0).any() || !(w.sum() > 0)) throw DomainError("weights must be non-negative");
  w /= w.sum();

  auto average = [&](const std::function<double(double, double)>& fn, double t) {
    CompensatedSum<double> s;
    for (Index j = 0; j < m; ++j)
      if (w(j) > 0) s.add(w(j) * fn(draws(j), t));
    return s.value();
  };

  CompensatedSum<double> mean_sum;
  for (Index j = 0; j < m; ++j) mean_sum.add(w(j) * draws(j));
  double t = mean_sum.value();
  double lo = draws.minCoeff();
  double hi = draws.maxCoeff();
  const double width0 = std::max(hi - lo, 1e-8 * std::max(1.0, std::abs(t)));
  // The average derivative is non-decreasing for convex losses; widen until it brackets 0.
  for (int k = 0; average(loss.d1, lo) > 0 && k < 60; ++k) lo -= width0 * std::ldexp(1.0, k);
  for (int k = 0; average(loss.d1, hi) < 0 && k < 60; ++k) hi += width0 * std::ldexp(1.0, k);
  if (!(average(loss.d1, lo) <= 0 && average(loss.d1, hi) >= 0))
    throw ConvergenceError("Bayes estimate: the average loss derivative never changes sign (" +
                           loss.name + " is not convex in t?)");

  std::ostringstream trace;
  trace << std::setprecision(10);
  const double grad_tol = 1e-13;
  for (int it = 0; it < 300; ++it) {
    const double g = average(loss.d1, t);
    trace << " [" << it << "] t=" << t << " d1=" << g;
    if (std::abs(g) <= grad_tol) return t;
    if (g > 0)
      hi = std::min(hi, t);
    else
      lo = std::max(lo, t);
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(t))) return 0.5 * (lo + hi);
    const double h = average(loss.d2, t);
    double next = 0.5 * (lo + hi);
    if (h > 0) {
      const double newton = t - g / h;
      if (newton > lo && newton < hi) next = newton;
    }
    if (next == t) return t;
    t = next;
  }
  throw ConvergenceError("Bayes estimate did not converge:" + trace.str());
}

double bayes_estimate_under_loss(const AlphaPosteriorChain& chain, Index component,
                                 const LossFunction& loss) {
  if (component < 0 || component >= chain.draws.cols())
    throw DomainError("component index out of range");
  return bayes_estimate_under_loss(chain.draws.col(component), loss);
}

// ---------------------------------------------------------------------------
// Importance sampling

ImportanceSample importance_sample(const LogTarget& log_target, const GaussianProposal& proposal,
                                   Index m, std::uint64_t seed) {
  if (m < 1000) throw DomainError("importance sampling needs at least 1000 draws");
  const Index p = proposal.mean.size();
  if (proposal.covariance.rows() != p || proposal.covariance.cols() != p)
    throw DomainError("proposal covariance has the wrong size");
  Eigen::LLT<MatrixXd> llt(proposal.covariance);
  if (llt.info() != Eigen::Success) throw DomainError("proposal covariance is not SPD");
  const MatrixXd chol = llt.matrixL();
  const double log_det = 2.0 * chol.diagonal().array().log().sum();

  Rng rng(seed);
  std::normal_distribution<double> normal;
  ImportanceSample out;
  out.draws.resize(m, p);
  out.log_target.resize(m);
  VectorXd log_w(m);
  VectorXd u(p);
  for (Index k = 0; k < m; ++k) {
    for (Index j = 0; j < p; ++j) u(j) = normal(rng);
    const VectorXd theta = proposal.mean + chol * u;
    out.draws.row(k) = theta.transpose();
    const double lt = log_target(theta);
    out.log_target(k) = lt;
    const double log_q = -0.5 * (static_cast<double>(p) * kLogTwoPi + log_det) - 0.5 * u.squaredNorm();
    log_w(k) = lt - log_q;
  }
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateWeights("all importance weights are zero");
  out.weights = (log_w.array() - top).exp();
  const double sum = out.weights.sum();
  out.weights /= sum;
  out.ess = 1.0 / out.weights.squaredNorm();
  if (out.ess < 50) {
    std::ostringstream msg;
    msg << "effective sample size " << out.ess << " is below 50";
    throw DegenerateWeights(msg.str());
  }
  return out;
}

ImportanceEstimate importance_expectation(const ImportanceSample& sample,
                                          const std::function<VectorXd(const VectorXd&)>& h) {
  const Index m = sample.draws.rows();
  if (m < 1) throw InsufficientSample("empty importance sample");
  std::vector<VectorXd> values(m);
  for (Index k = 0; k < m; ++k) values[k] = h(sample.draws.row(k).transpose());
  const Index d = values[0].size();
  CompensatedSum<VectorXd> num(VectorXd::Zero(d));
  CompensatedSum<double> den;
  for (Index k = 0; k < m; ++k) {
    num.add(sample.weights(k) * values[k]);
    den.add(sample.weights(k));
  }
  ImportanceEstimate out;
  out.estimate = num.value() / den.value();
  VectorXd var = VectorXd::Zero(d);
  for (Index k = 0; k < m; ++k) {
    const double wk = sample.weights(k) / den.value();
    var += (wk * wk) * (values[k] - out.estimate).array().square().matrix();
  }
  out.std_error = var.array().sqrt();
  out.ess = sample.ess;
  return out;
}

ImportanceEstimate importance_expectation(const ModelFamily& family, const Dataset& data,
                                          const Prior& prior, double alpha,
                                          const std::function<VectorXd(const VectorXd&)>& h,
                                          const GaussianProposal& proposal, Index m,
                                          std::uint64_t seed) {
  validate_dataset(family, data);
  auto target = [&](const VectorXd& theta) {
    return log_r_posterior_unnorm(family, data, prior, theta, alpha);
  };
  return importance_expectation(importance_sample(target, proposal, m, seed), h);
}

}  // namespace rpost
