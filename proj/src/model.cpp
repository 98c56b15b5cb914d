#include "rpost/model.hpp"

#include "rpost/quadrature.hpp"

#include <sstream>

namespace rpost {

namespace {

double relative_step(double v, double base) { return base * std::max(1.0, std::abs(v)); }

// Quadrature settings for integrals over the response space.
QuadratureOptions response_quadrature() {
  QuadratureOptions opts;
  opts.abs_tol = 1e-12;
  opts.rel_tol = 1e-10;
  return opts;
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelFamily generic fallbacks

void ModelFamily::check_parameter(const VectorXd& theta, Index covariates) const {
  if (theta.size() != parameter_dim(covariates)) {
    std::ostringstream msg;
    msg << name() << ": parameter has length " << theta.size() << ", expected "
        << parameter_dim(covariates);
    throw DomainError(msg.str());
  }
  if (!theta.allFinite()) throw DomainError(name() + ": parameter has non-finite entries");
}

bool ModelFamily::valid_parameter(const VectorXd& theta, Index covariates) const {
  try {
    check_parameter(theta, covariates);
  } catch (const DomainError&) {
    return false;
  }
  return true;
}

void ModelFamily::check_response(double x) const {
  const Support s = support();
  if (!std::isfinite(x)) throw DomainError(name() + ": non-finite response");
  if (s.kind == Support::Kind::Binary) {
    if (x != 0.0 && x != 1.0) throw DomainError(name() + ": response must be 0 or 1");
  } else if (x < s.lower || x > s.upper) {
    throw DomainError(name() + ": response outside the declared support");
  }
}

std::pair<double, double> ModelFamily::quadrature_frame(RowRef, const VectorXd&) const {
  return {0.0, 1.0};
}

double ModelFamily::integral_power(RowRef z, const VectorXd& theta, double alpha) const {
  const Support s = support();
  if (s.kind == Support::Kind::Binary) {
    return std::exp((1.0 + alpha) * log_density(z, 0.0, theta)) +
           std::exp((1.0 + alpha) * log_density(z, 1.0, theta));
  }
  const auto [center, scale] = quadrature_frame(z, theta);
  auto integrand = [&](double x) { return std::exp((1.0 + alpha) * log_density(z, x, theta)); };
  return integrate_range(integrand, s.lower, s.upper, center, scale, response_quadrature()).value;
}

double ModelFamily::v_term(RowRef z, double x, const VectorXd& theta, double alpha) const {
  if (!(alpha > 0)) throw DomainError("v_term requires alpha > 0");
  return integral_power(z, theta, alpha) - (1.0 + 1.0 / alpha) * density_power(z, x, theta, alpha);
}

VectorXd ModelFamily::grad_v(RowRef z, double x, const VectorXd& theta, double alpha) const {
  VectorXd g(theta.size());
  VectorXd probe = theta;
  for (Index j = 0; j < theta.size(); ++j) {
    const double h = relative_step(theta(j), 1e-5);
    probe(j) = theta(j) + h;
    const double up = v_term(z, x, probe, alpha);
    probe(j) = theta(j) - h;
    const double down = v_term(z, x, probe, alpha);
    probe(j) = theta(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

MatrixXd ModelFamily::hess_v(RowRef z, double x, const VectorXd& theta, double alpha) const {
  const Index p = theta.size();
  MatrixXd h(p, p);
  const double center = v_term(z, x, theta, alpha);
  VectorXd probe = theta;
  for (Index j = 0; j < p; ++j) {
    const double hj = relative_step(theta(j), 1e-4);
    probe(j) = theta(j) + hj;
    const double up = v_term(z, x, probe, alpha);
    probe(j) = theta(j) - hj;
    const double down = v_term(z, x, probe, alpha);
    probe(j) = theta(j);
    h(j, j) = (up - 2.0 * center + down) / (hj * hj);
    for (Index k = 0; k < j; ++k) {
      const double hk = relative_step(theta(k), 1e-4);
      auto eval = [&](double sj, double sk) {
        probe(j) = theta(j) + sj * hj;
        probe(k) = theta(k) + sk * hk;
        const double v = v_term(z, x, probe, alpha);
        probe(j) = theta(j);
        probe(k) = theta(k);
        return v;
      };
      h(j, k) = h(k, j) = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4 * hj * hk);
    }
  }
  return h;
}

LogDensityDerivatives ModelFamily::log_density_derivatives(RowRef z, double x,
                                                           const VectorXd& theta) const {
  const Index p = theta.size();
  LogDensityDerivatives out{log_density(z, x, theta), VectorXd(p), MatrixXd(p, p)};
  VectorXd probe = theta;
  for (Index j = 0; j < p; ++j) {
    const double h = relative_step(theta(j), 1e-5);
    probe(j) = theta(j) + h;
    const double up = log_density(z, x, probe);
    probe(j) = theta(j) - h;
    const double down = log_density(z, x, probe);
    probe(j) = theta(j);
    out.gradient(j) = (up - down) / (2.0 * h);
  }
  for (Index j = 0; j < p; ++j) {
    const double hj = relative_step(theta(j), 1e-4);
    for (Index k = 0; k <= j; ++k) {
      const double hk = relative_step(theta(k), 1e-4);
      auto eval = [&](double sj, double sk) {
        probe(j) += sj * hj;
        probe(k) += sk * hk;
        const double v = log_density(z, x, probe);
        probe = theta;
        return v;
      };
      out.hessian(j, k) = out.hessian(k, j) =
          (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4 * hj * hk);
    }
  }
  return out;
}

double ModelFamily::expectation(RowRef z, const VectorXd& truth,
                                const std::function<double(double)>& fn) const {
  const Support s = support();
  if (s.kind == Support::Kind::Binary) {
    const double p1 = density(z, 1.0, truth);
    return (1.0 - p1) * fn(0.0) + p1 * fn(1.0);
  }
  const auto [center, scale] = quadrature_frame(z, truth);
  auto integrand = [&](double x) {
    const double w = density(z, x, truth);
    return w > 0 ? w * fn(x) : 0.0;
  };
  return integrate_range(integrand, s.lower, s.upper, center, scale, response_quadrature()).value;
}

VectorXd ModelFamily::expectation(RowRef z, const VectorXd& truth,
                                  const std::function<VectorXd(double)>& fn) const {
  const Support s = support();
  if (s.kind == Support::Kind::Binary) {
    const double p1 = density(z, 1.0, truth);
    return (1.0 - p1) * fn(0.0) + p1 * fn(1.0);
  }
  const auto [center, scale] = quadrature_frame(z, truth);
  const Index size = fn(center).size();
  auto integrand = [&](double x) -> VectorXd {
    const double w = density(z, x, truth);
    if (!(w > 0)) return VectorXd::Zero(size);
    return w * fn(x);
  };
  return integrate_range(integrand, s.lower, s.upper, center, scale, response_quadrature()).value;
}

double ModelFamily::cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                double alpha) const {
  return expectation(z, truth, [&](double x) { return density_power(z, x, theta, alpha); });
}

double ModelFamily::cross_log(RowRef z, const VectorXd& theta, const VectorXd& truth) const {
  return expectation(z, truth, [&](double x) { return log_density(z, x, theta); });
}

RowInformation ModelFamily::row_information(RowRef z, const VectorXd& theta,
                                            const VectorXd& truth, double alpha) const {
  const Index p = theta.size();
  // Stack [grad, vec(grad grad'), vec(hess)] so one quadrature pass yields all moments.
  auto moments = [&](double x) -> VectorXd {
    VectorXd g;
    MatrixXd h;
    if (alpha > 0) {
      g = grad_v(z, x, theta, alpha);
      h = hess_v(z, x, theta, alpha);
    } else {
      auto d = log_density_derivatives(z, x, theta);
      g = d.gradient;
      h = d.hessian;
    }
    VectorXd out(p + 2 * p * p);
    out.head(p) = g;
    out.segment(p, p * p) = Eigen::Map<const VectorXd>(MatrixXd(g * g.transpose()).data(), p * p);
    out.tail(p * p) = Eigen::Map<const VectorXd>(h.data(), p * p);
    return out;
  };
  const VectorXd m = expectation(z, truth, std::function<VectorXd(double)>(moments));
  const VectorXd mean_grad = m.head(p);
  const MatrixXd second = Eigen::Map<const MatrixXd>(m.data() + p, p, p);
  const MatrixXd mean_hess = Eigen::Map<const MatrixXd>(m.data() + p + p * p, p, p);
  RowInformation info;
  if (alpha > 0) {
    info.psi = mean_hess / (1.0 + alpha);
    info.omega = (second - mean_grad * mean_grad.transpose()) / ((1.0 + alpha) * (1.0 + alpha));
  } else {
    info.psi = -mean_hess;
    info.omega = second - mean_grad * mean_grad.transpose();
  }
  return info;
}

double ModelFamily::draw(RowRef, const VectorXd&, Rng&) const {
  throw DomainError(name() + ": sampling is not available for this family");
}

// ---------------------------------------------------------------------------
// Gaussian regression

GaussianRegression::GaussianRegression(double known_sigma) : known_sigma_(known_sigma) {
  if (!(known_sigma > 0) || !std::isfinite(known_sigma))
    throw DomainError("linear: known sigma must be positive");
}

std::string GaussianRegression::name() const {
  return known_sigma_ ? "linear" : "linear-unknown-sigma";
}

void GaussianRegression::check_parameter(const VectorXd& theta, Index covariates) const {
  ModelFamily::check_parameter(theta, covariates);
  if (!known_sigma_ && !(theta(theta.size() - 1) > 0))
    throw DomainError("linear-unknown-sigma: sigma must be positive");
}

double GaussianRegression::mean(RowRef z, const VectorXd& theta) const {
  return z.dot(theta.head(z.size()).transpose());
}

double GaussianRegression::log_density(RowRef z, double x, const VectorXd& theta) const {
  const double s = sigma(theta);
  const double r = (x - mean(z, theta)) / s;
  return -0.5 * kLogTwoPi - std::log(s) - 0.5 * r * r;
}

std::pair<double, double> GaussianRegression::quadrature_frame(RowRef z,
                                                               const VectorXd& theta) const {
  return {mean(z, theta), sigma(theta)};
}

double GaussianRegression::integral_power(RowRef, const VectorXd& theta, double alpha) const {
  const double s = sigma(theta);
  return std::exp(-0.5 * alpha * kLogTwoPi - alpha * std::log(s) - 0.5 * std::log1p(alpha));
}

double GaussianRegression::v_term(RowRef z, double x, const VectorXd& theta, double alpha) const {
  if (!(alpha > 0)) throw DomainError("v_term requires alpha > 0");
  return integral_power(z, theta, alpha) - (1.0 + 1.0 / alpha) * density_power(z, x, theta, alpha);
}

namespace {

// Score and Hessian of log N(x; z'beta, sigma^2) in (beta[, sigma]).
void gaussian_log_derivatives(RowRef z, double r, double s, bool with_scale, VectorXd& grad,
                              MatrixXd& hess) {
  const Index p = z.size();
  const Index d = with_scale ? p + 1 : p;
  const double s2 = s * s;
  grad.resize(d);
  hess.resize(d, d);
  grad.head(p) = (r / s2) * z.transpose();
  hess.topLeftCorner(p, p) = (-1.0 / s2) * (z.transpose() * z);
  if (with_scale) {
    const double u = r / s;
    grad(p) = (u * u - 1.0) / s;
    hess.block(0, p, p, 1) = (-2.0 * r / (s2 * s)) * z.transpose();
    hess.block(p, 0, 1, p) = hess.block(0, p, p, 1).transpose();
    hess(p, p) = (1.0 - 3.0 * u * u) / s2;
  }
}

}  // namespace

VectorXd GaussianRegression::grad_v(RowRef z, double x, const VectorXd& theta,
                                    double alpha) const {
  const double s = sigma(theta);
  const double r = x - mean(z, theta);
  VectorXd gl;
  MatrixXd hl;
  gaussian_log_derivatives(z, r, s, !known_sigma_, gl, hl);
  const double fa = density_power(z, x, theta, alpha);
  VectorXd g = -(1.0 + alpha) * fa * gl;
  if (!known_sigma_) g(g.size() - 1) += -alpha * integral_power(z, theta, alpha) / s;
  return g;
}

MatrixXd GaussianRegression::hess_v(RowRef z, double x, const VectorXd& theta,
                                    double alpha) const {
  const double s = sigma(theta);
  const double r = x - mean(z, theta);
  VectorXd gl;
  MatrixXd hl;
  gaussian_log_derivatives(z, r, s, !known_sigma_, gl, hl);
  const double fa = density_power(z, x, theta, alpha);
  MatrixXd h = -(1.0 + alpha) * fa * (alpha * gl * gl.transpose() + hl);
  if (!known_sigma_) {
    const Index last = h.rows() - 1;
    h(last, last) += alpha * (1.0 + alpha) * integral_power(z, theta, alpha) / (s * s);
  }
  return h;
}

LogDensityDerivatives GaussianRegression::log_density_derivatives(RowRef z, double x,
                                                                  const VectorXd& theta) const {
  LogDensityDerivatives out;
  const double s = sigma(theta);
  const double r = x - mean(z, theta);
  out.value = -0.5 * kLogTwoPi - std::log(s) - 0.5 * (r / s) * (r / s);
  gaussian_log_derivatives(z, r, s, !known_sigma_, out.gradient, out.hessian);
  return out;
}

double GaussianRegression::cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                       double alpha) const {
  const double s = sigma(theta);
  const double sg = sigma(truth);
  const double d = mean(z, theta) - mean(z, truth);
  const double spread = s * s + alpha * sg * sg;
  // Gaussian convolution of exp(-alpha r^2 / 2 s^2) against N(0, sg^2).
  return std::exp(-0.5 * alpha * kLogTwoPi - alpha * std::log(s) -
                  0.5 * std::log(spread / (s * s)) - 0.5 * alpha * d * d / spread);
}

double GaussianRegression::cross_log(RowRef z, const VectorXd& theta,
                                     const VectorXd& truth) const {
  const double s = sigma(theta);
  const double sg = sigma(truth);
  const double d = mean(z, theta) - mean(z, truth);
  return -0.5 * kLogTwoPi - std::log(s) - 0.5 * (sg * sg + d * d) / (s * s);
}

RowInformation GaussianRegression::row_information(RowRef z, const VectorXd& theta,
                                                   const VectorXd& truth, double alpha) const {
  if (theta.size() != truth.size() || theta != truth)
    return ModelFamily::row_information(z, theta, truth, alpha);
  const Index p = z.size();
  const Index d = parameter_dim(p);
  const double s = sigma(theta);
  auto scale_const = [&](double a) { return std::exp(-0.5 * a * kLogTwoPi - a * std::log(s)); };
  const double c1 = scale_const(alpha);
  const double c2 = scale_const(2.0 * alpha);
  const MatrixXd zz = z.transpose() * z;
  RowInformation info{MatrixXd::Zero(d, d), MatrixXd::Zero(d, d)};
  info.psi.topLeftCorner(p, p) = c1 / (s * s) * std::pow(1.0 + alpha, -1.5) * zz;
  info.omega.topLeftCorner(p, p) = c2 / (s * s) * std::pow(1.0 + 2.0 * alpha, -1.5) * zz;
  if (!known_sigma_) {
    const double xi = -c1 * alpha / s * std::pow(1.0 + alpha, -1.5);
    info.psi(p, p) = c1 / (s * s) * std::pow(1.0 + alpha, -2.5) * (alpha * alpha + 2.0);
    info.omega(p, p) =
        c2 / (s * s) * std::pow(1.0 + 2.0 * alpha, -2.5) * (4.0 * alpha * alpha + 2.0) - xi * xi;
  }
  return info;
}

double GaussianRegression::draw(RowRef z, const VectorXd& theta, Rng& rng) const {
  std::normal_distribution<double> normal(mean(z, theta), sigma(theta));
  return normal(rng);
}

// ---------------------------------------------------------------------------
// Logistic regression

double LogisticRegression::probability(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

void LogisticRegression::check_response(double x) const {
  if (x != 0.0 && x != 1.0) throw DomainError("logistic: response must be 0 or 1");
}

namespace {

struct LogitTerms {
  double eta, pi, q, s;   // linear predictor, P(1), P(0), pi * q
  double log_pi, log_q;
};

LogitTerms logit_terms(RowRef z, const VectorXd& theta) {
  LogitTerms t;
  t.eta = z.dot(theta.transpose());
  t.pi = LogisticRegression::probability(t.eta);
  t.q = LogisticRegression::probability(-t.eta);
  t.s = t.pi * t.q;
  t.log_pi = -softplus(-t.eta);
  t.log_q = -softplus(t.eta);
  return t;
}

}  // namespace

double LogisticRegression::log_density(RowRef z, double x, const VectorXd& theta) const {
  const double eta = z.dot(theta.transpose());
  return x * eta - softplus(eta);
}

double LogisticRegression::integral_power(RowRef z, const VectorXd& theta, double alpha) const {
  const LogitTerms t = logit_terms(z, theta);
  return std::exp((1.0 + alpha) * t.log_pi) + std::exp((1.0 + alpha) * t.log_q);
}

double LogisticRegression::v_term(RowRef z, double x, const VectorXd& theta, double alpha) const {
  if (!(alpha > 0)) throw DomainError("v_term requires alpha > 0");
  const LogitTerms t = logit_terms(z, theta);
  const double fa = std::exp(alpha * (x > 0.5 ? t.log_pi : t.log_q));
  return std::exp((1.0 + alpha) * t.log_pi) + std::exp((1.0 + alpha) * t.log_q) -
         (1.0 + 1.0 / alpha) * fa;
}

// With h_x(eta) = f(x) the derivatives in eta are h_x' = h_x (x - pi) and
// h_x'' = h_x ((x - pi)^2 - pi q); V depends on beta only through eta = z'beta.
VectorXd LogisticRegression::grad_v(RowRef z, double x, const VectorXd& theta,
                                    double alpha) const {
  const LogitTerms t = logit_terms(z, theta);
  const double pa = std::exp(alpha * t.log_pi);
  const double qa = std::exp(alpha * t.log_q);
  const double fa = x > 0.5 ? pa : qa;
  const double d_int = (1.0 + alpha) * t.s * (pa - qa);
  const double d_v = d_int - (1.0 + alpha) * fa * (x - t.pi);
  return d_v * z.transpose();
}

MatrixXd LogisticRegression::hess_v(RowRef z, double x, const VectorXd& theta,
                                    double alpha) const {
  const LogitTerms t = logit_terms(z, theta);
  const double pa = std::exp(alpha * t.log_pi);
  const double qa = std::exp(alpha * t.log_q);
  const double fa = x > 0.5 ? pa : qa;
  const double d2_int =
      (1.0 + alpha) * t.s * ((1.0 - 2.0 * t.pi) * (pa - qa) + alpha * (pa * t.q + qa * t.pi));
  const double r = x - t.pi;
  const double d2_v = d2_int - (1.0 + alpha) * fa * (alpha * r * r - t.s);
  return d2_v * (z.transpose() * z);
}

LogDensityDerivatives LogisticRegression::log_density_derivatives(RowRef z, double x,
                                                                  const VectorXd& theta) const {
  const LogitTerms t = logit_terms(z, theta);
  LogDensityDerivatives out;
  out.value = x > 0.5 ? t.log_pi : t.log_q;
  out.gradient = (x - t.pi) * z.transpose();
  out.hessian = -t.s * (z.transpose() * z);
  return out;
}

double LogisticRegression::cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                       double alpha) const {
  const LogitTerms t = logit_terms(z, theta);
  const LogitTerms g = logit_terms(z, truth);
  return g.pi * std::exp(alpha * t.log_pi) + g.q * std::exp(alpha * t.log_q);
}

double LogisticRegression::cross_log(RowRef z, const VectorXd& theta,
                                     const VectorXd& truth) const {
  const LogitTerms t = logit_terms(z, theta);
  const LogitTerms g = logit_terms(z, truth);
  return g.pi * t.log_pi + g.q * t.log_q;
}

RowInformation LogisticRegression::row_information(RowRef z, const VectorXd& theta,
                                                   const VectorXd& truth, double alpha) const {
  if (theta.size() != truth.size() || theta != truth)
    return ModelFamily::row_information(z, theta, truth, alpha);
  const LogitTerms t = logit_terms(z, theta);
  // A = pi^alpha q + q^alpha pi
  const double a = std::exp(alpha * t.log_pi) * t.q + std::exp(alpha * t.log_q) * t.pi;
  const MatrixXd zz = z.transpose() * z;
  return {t.s * a * zz, t.s * a * a * zz};
}

double LogisticRegression::draw(RowRef z, const VectorXd& theta, Rng& rng) const {
  std::bernoulli_distribution coin(probability(z.dot(theta.transpose())));
  return coin(rng) ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Generic family

GenericFamily::GenericFamily(std::string name, Support support, LogDensity log_density,
                             Frame frame, Index extra_parameters)
    : name_(std::move(name)),
      support_(support),
      log_density_(std::move(log_density)),
      frame_(std::move(frame)),
      extra_(extra_parameters) {
  if (!log_density_) throw DomainError("generic family needs a log-density");
  if (extra_ < 0) throw DomainError("extra_parameters must be non-negative");
}

std::pair<double, double> GenericFamily::quadrature_frame(RowRef z, const VectorXd& theta) const {
  if (frame_) return frame_(z, theta);
  return ModelFamily::quadrature_frame(z, theta);
}

// ---------------------------------------------------------------------------

FamilyPtr make_family(FamilyKind kind, double sigma) {
  switch (kind) {
    case FamilyKind::LinearKnownSigma:
      return std::make_shared<GaussianRegression>(sigma);
    case FamilyKind::LinearUnknownSigma:
      return std::make_shared<GaussianRegression>();
    case FamilyKind::Logistic:
      return std::make_shared<LogisticRegression>();
  }
  throw DomainError("unknown family");
}

FamilyKind parse_family_kind(const std::string& text) {
  if (text == "linear" || text == "linear-known-sigma") return FamilyKind::LinearKnownSigma;
  if (text == "linear-unknown-sigma") return FamilyKind::LinearUnknownSigma;
  if (text == "logistic") return FamilyKind::Logistic;
  throw DomainError("unknown model '" + text + "' (linear, linear-unknown-sigma, logistic)");
}

namespace {
void check_index(const Dataset& data, Index i) {
  if (i < 0 || i >= data.size()) throw DomainError("observation index out of range");
}
}  // namespace

double v_term(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
              double alpha) {
  check_index(data, i);
  family.check_parameter(theta, data.covariates());
  return family.v_term(data.design.row(i), data.responses(i), theta, alpha);
}

VectorXd grad_v(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
                double alpha) {
  check_index(data, i);
  family.check_parameter(theta, data.covariates());
  if (!(alpha > 0)) throw DomainError("grad_v requires alpha > 0");
  return family.grad_v(data.design.row(i), data.responses(i), theta, alpha);
}

MatrixXd hess_v(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
                double alpha) {
  check_index(data, i);
  family.check_parameter(theta, data.covariates());
  if (!(alpha > 0)) throw DomainError("hess_v requires alpha > 0");
  return family.hess_v(data.design.row(i), data.responses(i), theta, alpha);
}

void validate_dataset(const ModelFamily& family, const Dataset& data) {
  if (data.size() < 1) throw DomainError("dataset is empty");
  if (data.design.rows() != data.size())
    throw DomainError("design rows do not match the number of responses");
  if (data.covariates() < 1) throw DomainError("design has no columns");
  if (!data.design.allFinite()) throw DomainError("design has non-finite entries");
  for (Index i = 0; i < data.size(); ++i) family.check_response(data.responses(i));
}

DesignConditionReport check_design_conditions(const MatrixXd& design) {
  if (design.size() == 0) throw DomainError("design is empty");
  const double n = static_cast<double>(design.rows());
  DesignConditionReport report;
  report.max_abs_entry = design.cwiseAbs().maxCoeff();
  const MatrixXd gram = design.transpose() * design;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram / n);
  const double largest = eig.eigenvalues().maxCoeff();
  report.min_eigenvalue_scaled = eig.eigenvalues().minCoeff();
  report.full_column_rank = design.rows() >= design.cols() && largest > 0 &&
                            report.min_eigenvalue_scaled > 1e-12 * largest;
  if (report.full_column_rank) {
    const MatrixXd inv = gram.ldlt().solve(MatrixXd::Identity(gram.rows(), gram.cols()));
    report.max_leverage = (design * inv).cwiseProduct(design).rowwise().sum().maxCoeff();
  }
  return report;
}

}  // namespace rpost
