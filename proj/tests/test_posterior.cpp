#include "oracles.hpp"

#include "rpost/posterior.hpp"
#include "rpost/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace rpost;

namespace {

struct Problem1d {
  Dataset data;
  double sigma = 1.0;
  double prior_mean = 0.0;
  double prior_sd = 2.0;

  // Exact conjugate posterior of beta at alpha = 0.
  double posterior_mean() const {
    const double prec = data.design.col(0).squaredNorm() / (sigma * sigma) + 1 / (prior_sd * prior_sd);
    return (data.design.col(0).dot(data.responses) / (sigma * sigma) +
            prior_mean / (prior_sd * prior_sd)) /
           prec;
  }
};

Problem1d problem(Index n, double beta, std::uint64_t seed) {
  Problem1d p;
  Rng rng(seed);
  const MatrixXd z = gaussian_design(n, 1, 1.0, 1.0, false, rng);
  p.data = simulate_dataset(*make_family(FamilyKind::LinearKnownSigma, 1.0), z,
                            VectorXd::Constant(1, beta), rng);
  return p;
}

Prior gaussian1(double mean, double sd) {
  return Prior::gaussian(VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, sd * sd));
}

// Posterior mean of the scalar R^(alpha)-posterior by Simpson quadrature over [lo, hi].
double quadrature_mean(const ModelFamily& fam, const Dataset& d, const Prior& prior, double alpha,
                       double lo, double hi) {
  const double centre = log_r_posterior_unnorm(fam, d, prior, VectorXd::Constant(1, 0.5 * (lo + hi)), alpha);
  auto dens = [&](double b) {
    return std::exp(log_r_posterior_unnorm(fam, d, prior, VectorXd::Constant(1, b), alpha) - centre);
  };
  const double z = oracle::simpson(dens, lo, hi, 4000);
  return oracle::simpson([&](double b) { return b * dens(b); }, lo, hi, 4000) / z;
}

SamplerConfig config(std::uint64_t seed, Index length = 40000) {
  SamplerConfig c;
  c.seed = seed;
  c.chain_length = length;
  c.burn_in = 2000;
  return c;
}

}  // namespace

TEST_CASE("priors") {
  MatrixXd cov(2, 2);
  cov << 2.0, 0.3, 0.3, 0.5;
  VectorXd mean(2);
  mean << 1.0, -1.0;
  const Prior g = Prior::gaussian(mean, cov);
  VectorXd th(2);
  th << 0.2, 0.4;
  const VectorXd r = th - mean;
  const double ref = -0.5 * r.dot(cov.ldlt().solve(r)) - std::log(2 * M_PI) -
                     0.5 * std::log(cov.determinant());
  CHECK(g.log_density(th) == doctest::Approx(ref).epsilon(1e-13));
  CHECK(oracle::rel_err(g.log_density_gradient(th),
                        oracle::fd_gradient([&](const VectorXd& x) { return g.log_density(x); }, th)) <
        1e-7);
  CHECK(oracle::rel_err(g.log_density_hessian(2), -cov.inverse()) < 1e-12);

  Rng rng(3);
  MatrixXd draws(20000, 2);
  for (Index k = 0; k < draws.rows(); ++k) draws.row(k) = g.sample(rng).transpose();
  const VectorXd m = draws.colwise().mean();
  const MatrixXd c = (draws.rowwise() - m.transpose()).transpose() * (draws.rowwise() - m.transpose()) /
                     19999.0;
  CHECK((m - mean).norm() < 0.05);
  CHECK(oracle::rel_err(c, cov) < 0.05);

  const Prior box = Prior::uniform_box(VectorXd::Zero(2), VectorXd::Constant(2, 2.0));
  CHECK(box.log_density(VectorXd::Constant(2, 1.0)) == doctest::Approx(-std::log(4.0)));
  CHECK(box.log_density(VectorXd::Constant(2, 3.0)) == -kInf);

  const Prior flat = Prior::improper_flat();
  CHECK(flat.log_density(th) == 0.0);
  CHECK_FALSE(flat.proper());
  CHECK_THROWS_AS(flat.sample(rng), DomainError);
  CHECK_THROWS_AS(Prior::gaussian(mean, -cov), DomainError);
  CHECK_THROWS_AS(Prior::uniform_box(VectorXd::Ones(2), VectorXd::Zero(2)), DomainError);
}

TEST_CASE("log_r_posterior_unnorm") {
  const Problem1d p = problem(30, 1.5, 1);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const VectorXd b = VectorXd::Constant(1, 1.3);
  const Prior prior = gaussian1(0.0, 2.0);
  const double ll = oracle::gaussian_loglik(p.data.design, p.data.responses, b, 1.0);
  CHECK(log_r_posterior_unnorm(*fam, p.data, prior, b, 0.0) ==
        doctest::Approx(ll - 30 + oracle::normal_logpdf(1.3, 0.0, 2.0)).epsilon(1e-13));
  CHECK(log_r_posterior_unnorm(*fam, p.data, Prior::improper_flat(), b, 0.7) ==
        q_alpha(*fam, p.data, b, 0.7).value);

  // Ratio at two points against the quadrature-normalized density from an independent Q.
  const double a = 0.5;
  auto oracle_log = [&](double beta) {
    double s = 0;
    const double integral = std::pow(2 * M_PI, -a / 2) / std::sqrt(1 + a);
    for (Index i = 0; i < 30; ++i) {
      const double f = oracle::normal_pdf(p.data.responses(i), p.data.design(i, 0) * beta, 1.0);
      s += (std::pow(f, a) - 1) / a - integral / (1 + a);
    }
    return s + oracle::normal_logpdf(beta, 0.0, 2.0);
  };
  const double norm = oracle::simpson([&](double x) { return std::exp(oracle_log(x)); }, -5, 8, 20000);
  const double d1 = std::exp(oracle_log(1.2)) / norm, d2 = std::exp(oracle_log(1.6)) / norm;
  const double ratio = std::exp(log_r_posterior_unnorm(*fam, p.data, prior, VectorXd::Constant(1, 1.2), a) -
                                log_r_posterior_unnorm(*fam, p.data, prior, VectorXd::Constant(1, 1.6), a));
  CHECK(std::abs(ratio - d1 / d2) < 1e-8 * (d1 / d2));
}

TEST_CASE("alpha = 0 chain matches the conjugate posterior") {
  const Problem1d p = problem(40, 2.0, 7);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Prior prior = gaussian1(p.prior_mean, p.prior_sd);
  const AlphaPosteriorChain c1 = sample(*fam, p.data, prior, 0.0, config(11));
  const PosteriorMean m1 = erpe(c1);
  CHECK(std::abs(m1.mean(0) - p.posterior_mean()) < 3 * m1.std_error(0));
  CHECK(c1.acceptance_rate > 0.2);
  CHECK(c1.acceptance_rate < 0.7);
  CHECK(c1.warning.empty());

  const AlphaPosteriorChain c2 = sample(*fam, p.data, prior, 0.0, config(12));
  const PosteriorMean m2 = erpe(c2);
  CHECK(std::abs(m1.mean(0) - m2.mean(0)) <
        4 * std::hypot(m1.std_error(0), m2.std_error(0)));

  // Geweke-style halves
  const Index h = c1.size() / 2;
  const VectorXd first = c1.draws.col(0).head(h), second = c1.draws.col(0).tail(h);
  const double zstat = (first.mean() - second.mean()) /
                       std::hypot(batch_means_se(first), batch_means_se(second));
  CHECK(std::abs(zstat) < 3);
}

TEST_CASE("seeded chains are bit-identical") {
  const Problem1d p = problem(20, 1.0, 2);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Prior prior = gaussian1(0, 2);
  const auto a = sample(*fam, p.data, prior, 0.4, config(5, 3000));
  const auto b = sample(*fam, p.data, prior, 0.4, config(5, 3000));
  CHECK(a.draws == b.draws);
  CHECK(a.log_post_values == b.log_post_values);
  std::ostringstream sa, sb;
  write_chain_csv(sa, a);
  write_chain_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("draw,theta_1,log_post\n", 0) == 0);

  SamplerConfig thin = config(5, 3000);
  thin.thinning = 3;
  CHECK(sample(*fam, p.data, prior, 0.4, thin).size() == 1000);
}

TEST_CASE("robust chain stays bounded under contamination") {
  Problem1d p = problem(50, 1.0, 3);
  std::vector<Index> rows;
  for (Index i = 0; i < 10; ++i) rows.push_back(i);
  contaminate(p.data, rows, 60.0);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Prior prior = gaussian1(0.0, 2.0);
  const auto robust = sample(*fam, p.data, prior, 0.5, config(1, 20000));
  CHECK(robust.draws.cwiseAbs().maxCoeff() < 0.0 + 10 * 2.0);
  CHECK(std::abs(erpe(robust).mean(0) - 1.0) < 0.3);
  const auto classic = sample(*fam, p.data, prior, 0.0, config(1, 20000));
  // least squares pulled by 10 responses at 60
  const double ols = oracle::ols(p.data.design, p.data.responses)(0);
  CHECK(ols > 3.0);
  CHECK(std::abs(erpe(classic).mean(0) - ols) < 0.2);
}

TEST_CASE("ERPE against MDPDE and quadrature") {
  {
    Rng rng(9);
    const MatrixXd z = gaussian_design(200, 2, 1.0, 1.0, true, rng);
    VectorXd beta(2);
    beta << 1.0, 2.0;
    const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
    const Dataset d = simulate_dataset(*fam, z, beta, rng);
    const Prior prior = Prior::gaussian(VectorXd::Zero(2), 100 * MatrixXd::Identity(2, 2));
    const auto chain = sample(*fam, d, prior, 0.3, config(3));
    const MdpdeResult m = fit(*fam, d, 0.3);
    const MatrixXd cov = asymptotic_covariance(sandwich(*fam, d, m.theta_hat, 0.3), 200);
    CHECK((erpe(chain).mean - m.theta_hat).norm() < 3 * cov.diagonal().cwiseSqrt().norm());
  }
  {
    const Problem1d p = problem(25, 1.0, 4);
    const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
    const Prior prior = gaussian1(0.0, 2.0);
    const double q = quadrature_mean(*fam, p.data, prior, 0.5, -3, 5);
    const PosteriorMean pm = erpe(sample(*fam, p.data, prior, 0.5, config(21)));
    CHECK(std::abs(pm.mean(0) - q) < 3 * pm.std_error(0));
  }
}

TEST_CASE("erpe of a constant chain") {
  AlphaPosteriorChain c;
  c.draws = MatrixXd::Constant(100, 2, 0.0);
  c.draws.col(0).setConstant(1.25);
  c.draws.col(1).setConstant(-3.0);
  c.log_post_values = VectorXd::Zero(100);
  const PosteriorMean m = erpe(c);
  CHECK(m.mean(0) == 1.25);
  CHECK(m.mean(1) == -3.0);
  CHECK(m.std_error.norm() == 0.0);
  AlphaPosteriorChain empty;
  CHECK_THROWS_AS(erpe(empty), InsufficientSample);
}

TEST_CASE("Bayes estimates under losses") {
  Rng rng(17);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  VectorXd draws(2001);
  for (Index k = 0; k < draws.size(); ++k) draws(k) = ud(rng) < 0.35 ? 4 + nd(rng) : nd(rng);

  CHECK(bayes_estimate_under_loss(draws, LossFunction::squared()) ==
        doctest::Approx(draws.mean()).epsilon(1e-13));

  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[1000];
  const double gap = std::max(sorted[1001] - sorted[1000], sorted[1000] - sorted[999]);
  CHECK(std::abs(bayes_estimate_under_loss(draws, LossFunction::absolute()) - median) <= gap);

  const LossFunction huber = LossFunction::huber(1.0);
  const double step = 1e-4;
  double best = kInf, arg = 0;
  for (double t = -1; t <= 5; t += step) {
    double s = 0;
    for (Index k = 0; k < draws.size(); ++k) s += huber.evaluate(draws(k), t);
    if (s < best) best = s, arg = t;
  }
  CHECK(std::abs(bayes_estimate_under_loss(draws, huber) - arg) <= step);

  const LossFunction concave = LossFunction::custom(
      "concave", [](double th, double t) { return -(th - t) * (th - t); },
      [](double th, double t) { return 2 * (th - t); }, [](double, double) { return -2.0; });
  CHECK_THROWS_AS(bayes_estimate_under_loss(draws, concave), ConvergenceError);

  AlphaPosteriorChain c;
  c.draws = draws;
  c.log_post_values = VectorXd::Zero(draws.size());
  CHECK(bayes_estimate_under_loss(c, 0, LossFunction::squared()) ==
        doctest::Approx(draws.mean()).epsilon(1e-13));
  CHECK_THROWS_AS(bayes_estimate_under_loss(c, 1, LossFunction::squared()), DomainError);
}

TEST_CASE("importance sampling") {
  const Problem1d p = problem(30, 1.5, 8);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Prior prior = gaussian1(p.prior_mean, p.prior_sd);
  const double mean = p.posterior_mean();
  const double sd = 1 / std::sqrt(p.data.design.squaredNorm() + 1 / (p.prior_sd * p.prior_sd));
  GaussianProposal prop{VectorXd::Constant(1, mean + 0.3 * sd), MatrixXd::Constant(1, 1, 2.0 * sd * sd)};

  const auto one = importance_expectation(
      *fam, p.data, prior, 0.0, [](const VectorXd&) { return VectorXd::Ones(1); }, prop, 5000, 3);
  CHECK(std::abs(one.estimate(0) - 1.0) < 1e-14);

  const auto est = importance_expectation(
      *fam, p.data, prior, 0.0, [](const VectorXd& th) { return th; }, prop, 5000, 3);
  CHECK(std::abs(est.estimate(0) - mean) < 3 * est.std_error(0));
  CHECK(est.ess > 1000);

  CHECK_THROWS_AS(importance_expectation(
                      *fam, p.data, prior, 0.0, [](const VectorXd& th) { return th; }, prop, 500, 3),
                  DomainError);
  GaussianProposal far{VectorXd::Constant(1, mean + 60 * sd), MatrixXd::Constant(1, 1, sd * sd / 100)};
  CHECK_THROWS_AS(importance_expectation(
                      *fam, p.data, prior, 0.0, [](const VectorXd& th) { return th; }, far, 2000, 3),
                  DegenerateWeights);
}

TEST_CASE("importance sampling agrees with MCMC on a 2-d problem") {
  Rng rng(31);
  const MatrixXd z = gaussian_design(60, 2, 1.0, 1.0, true, rng);
  VectorXd beta(2);
  beta << 0.5, 1.0;
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Dataset d = simulate_dataset(*fam, z, beta, rng);
  const Prior prior = Prior::gaussian(VectorXd::Zero(2), 25 * MatrixXd::Identity(2, 2));
  const double a = 0.4;
  const PosteriorMean mc = erpe(sample(*fam, d, prior, a, config(2)));
  const MdpdeResult m = fit(*fam, d, a);
  GaussianProposal prop{m.theta_hat, 1.5 * m.neg_hessian.inverse()};
  const auto is = importance_expectation(
      *fam, d, prior, a, [](const VectorXd& th) { return th; }, prop, 20000, 4);
  for (Index j = 0; j < 2; ++j)
    CHECK(std::abs(is.estimate(j) - mc.mean(j)) < 4 * std::hypot(is.std_error(j), mc.std_error(j)));
}

TEST_CASE("sampler configuration and warnings") {
  SamplerConfig c;
  c.chain_length = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.chain_length = 10;
  c.thinning = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.thinning = 1;
  c.proposal_scale = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);

  const Problem1d p = problem(20, 1.0, 5);
  const auto fam = make_family(FamilyKind::LinearKnownSigma, 1.0);
  SamplerConfig wide = config(1, 5000);
  wide.proposal_scale = 60.0;
  const auto chain = sample(*fam, p.data, gaussian1(0, 2), 0.2, wide);
  CHECK(chain.acceptance_rate < 0.05);
  CHECK_FALSE(chain.warning.empty());

  // explicit start outside the prior box
  SamplerConfig bad = config(1, 100);
  bad.start = VectorXd::Constant(1, 5.0);
  const Prior box = Prior::uniform_box(VectorXd::Constant(1, -1), VectorXd::Constant(1, 1));
  CHECK_THROWS_AS(sample(*fam, p.data, box, 0.2, bad), DomainError);
}
