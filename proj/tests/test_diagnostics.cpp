#include "oracles.hpp"

#include "rpost/diagnostics.hpp"
#include "rpost/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace rpost;

namespace {

MatrixXd gaussian_draws(Index m, const VectorXd& mean, const MatrixXd& cov, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  const MatrixXd l = cov.llt().matrixL();
  MatrixXd out(m, mean.size());
  VectorXd e(mean.size());
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < e.size(); ++j) e(j) = z(gen);
    out.row(i) = (mean + l * e).transpose();
  }
  return out;
}

// A^2 straight from the textbook formula.
double anderson_darling_oracle(VectorXd x) {
  const double m = static_cast<double>(x.size());
  const double mu = x.mean();
  const double sd = std::sqrt((x.array() - mu).square().sum() / (m - 1));
  std::sort(x.begin(), x.end());
  auto cdf = [&](double v) { return 0.5 * std::erfc(-(v - mu) / sd / std::sqrt(2.0)); };
  double s = 0;
  for (Index i = 0; i < x.size(); ++i)
    s += (2.0 * i + 1) * (std::log(cdf(x(i))) + std::log1p(-cdf(x(x.size() - 1 - i))));
  return -m - s / m;
}

}  // namespace

TEST_CASE("efficiency examples") {
  const EfficiencyReport e0 = efficiency(0.0);
  CHECK(e0.are_beta_percent == 100.0);
  CHECK(e0.are_sigma_percent == 100.0);

  const EfficiencyReport e1 = efficiency(0.10);
  CHECK(std::abs(e1.are_beta_percent - 98.76) <= 0.005);
  CHECK(std::abs(e1.are_sigma_percent - 97.56) <= 0.005);

  const EfficiencyReport e2 = efficiency(1.0);
  CHECK(std::abs(e2.are_beta_percent - 64.95) <= 0.005);
  CHECK(std::abs(e2.are_sigma_percent - 54.11) <= 0.005);

  // the ratios do not depend on sigma
  const EfficiencyReport s = efficiency(0.5, 3.0);
  CHECK(s.are_beta_percent == doctest::Approx(efficiency(0.5).are_beta_percent).epsilon(1e-14));
  CHECK(s.zeta_alpha == doctest::Approx(zeta(0.5, 3.0)).epsilon(1e-14));

  CHECK_THROWS_AS(efficiency(-0.1), DomainError);
  CHECK_THROWS_AS(efficiency(0.1, 0.0), DomainError);
}

TEST_CASE("ARE table reproduces the published values") {
  const auto& published = published_are_table();
  REQUIRE(published.size() == 10);
  const auto table = are_table(standard_are_alphas());
  REQUIRE(table.size() == published.size());
  double worst = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(table[i].alpha == published[i].alpha);
    worst = std::max({worst, std::abs(table[i].are_beta_percent - published[i].beta),
                      std::abs(table[i].are_sigma_percent - published[i].sigma)});
  }
  CHECK(worst <= 0.01);

  for (double a : {0.0, 0.3, 2.0}) {
    const auto one = are_table({a});
    const EfficiencyReport e = efficiency(a);
    CHECK(one.at(0).are_beta_percent == e.are_beta_percent);
    CHECK(one.at(0).are_sigma_percent == e.are_sigma_percent);
    CHECK(one.at(0).upsilon_sigma == e.upsilon_sigma);
  }
  CHECK_THROWS_AS(are_table({}), DomainError);
}

TEST_CASE("ARE is monotone and upsilon matches the zeta identity") {
  double prev_b = 100.0, prev_s = 100.0;
  for (int k = 1; k <= 2000; ++k) {
    const double a = k * 0.001;
    const EfficiencyReport e = efficiency(a);
    CHECK(e.are_beta_percent < prev_b);
    CHECK(e.are_sigma_percent < prev_s);
    CHECK(e.are_beta_percent > 0);
    prev_b = e.are_beta_percent;
    prev_s = e.are_sigma_percent;
    for (double sigma : {0.5, 1.0, 2.0}) {
      const double id = zeta(2 * a, sigma) / (zeta(a, sigma) * zeta(a, sigma)) / (sigma * sigma);
      CHECK(std::abs(id - upsilon_beta_ratio(a)) < 1e-12 * id);
    }
  }
}

TEST_CASE("BVM distance of exact Gaussian draws") {
  const Index n = 100;
  VectorXd theta_hat(2);
  theta_hat << 1.0, -2.0;
  MatrixXd psi(2, 2);
  psi << 2.0, 0.6, 0.6, 1.0;
  const MatrixXd draws = gaussian_draws(50000, theta_hat, psi.inverse() / n, 11);
  const BvmReport r = bvm_distance(draws, theta_hat, psi, n);
  CHECK(r.tv_estimate < 0.03);
  CHECK(r.tv_estimate >= 0);
  CHECK(r.product_of_marginals);
  CHECK(r.marginal_tv.size() == 2);
  CHECK(r.n == n);

  // wrong scale is detected
  CHECK(bvm_distance(draws, theta_hat, 4.0 * psi, n).tv_estimate > 0.2);

  // theta -> A theta + b with Psi -> A^{-T} Psi A^{-1}
  MatrixXd a(2, 2);
  a << 2.0, 0.5, -0.3, 0.7;
  VectorXd b(2);
  b << 3.0, 1.0;
  const MatrixXd moved = (draws * a.transpose()).rowwise() + b.transpose();
  const MatrixXd ainv = a.inverse();
  const BvmReport t = bvm_distance(moved, a * theta_hat + b, ainv.transpose() * psi * ainv, n);
  CHECK(std::abs(t.tv_estimate - r.tv_estimate) < 0.01);

  CHECK_THROWS_AS(bvm_distance(draws.topRows(999), theta_hat, psi, n), InsufficientSample);
  CHECK_THROWS_AS(bvm_distance(draws, theta_hat, -psi, n), DomainError);
  CHECK_THROWS_AS(bvm_distance(draws, VectorXd::Zero(3), psi, n), DomainError);
}

TEST_CASE("BVM distance shrinks with n") {
  SimulationSetup s;
  s.family = make_family(FamilyKind::LinearKnownSigma, 1.0);
  s.theta_g = VectorXd::Constant(1, 5.0);
  s.prior = Prior::gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  s.alpha = 0.3;
  s.sampler.chain_length = 10000;
  s.sampler.burn_in = 1000;
  const auto rows = bvm_experiment(s, {25, 400}, 1, 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].n == 25);
  CHECK(rows[1].tv_psi < rows[0].tv_psi);
  CHECK(rows[1].tv_psi < 0.15);
  CHECK(std::abs(rows[1].tv_psi_hat - rows[1].tv_psi) < 0.05);
  CHECK(rows[0].seed != rows[1].seed);

  const auto again = bvm_experiment(s, {25, 400}, 1, 5);
  CHECK(again[1].tv_psi == rows[1].tv_psi);
}

TEST_CASE("ERPE distribution at alpha 0 recovers sigma^2 I") {
  SimulationSetup s;
  s.family = make_family(FamilyKind::LinearKnownSigma, 1.0);
  s.theta_g = VectorXd::Constant(2, 1.0);
  s.covariates = 2;
  s.prior = Prior::gaussian(VectorXd::Zero(2), 100.0 * MatrixXd::Identity(2, 2));
  s.alpha = 0.0;
  s.sampler.chain_length = 1000;
  s.sampler.burn_in = 200;
  const ErpeDistributionReport r = monte_carlo_erpe_distribution(s, 200, 500, 17);
  CHECK(r.failures == 0);
  CHECK(r.estimates.rows() == 500);
  CHECK(oracle::rel_err(r.target_covariance, MatrixXd::Identity(2, 2)) < 1e-10);
  CHECK(r.frobenius_relative_error < 0.15);
  CHECK(r.anderson_darling.size() == 2);
  CHECK_FALSE(r.has_scale);

  CHECK_THROWS_AS(monte_carlo_erpe_distribution(s, 200, 99, 17), DomainError);
}

TEST_CASE("small helpers") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(-40.0) >= 0.0);

  MatrixXd m(2, 2);
  m << 4.0, 1.0, 1.0, 3.0;
  const MatrixXd r = spd_sqrt(m);
  CHECK(oracle::rel_err(r * r, m) < 1e-14);
  CHECK(oracle::rel_err(r, r.transpose()) < 1e-15);
  CHECK_THROWS_AS(spd_sqrt(-m), DomainError);

  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> ex;
  VectorXd normal(500), skewed(500);
  for (Index i = 0; i < 500; ++i) {
    normal(i) = 2.0 + 3.0 * z(gen);
    skewed(i) = ex(gen);
  }
  const double a_normal = anderson_darling_normal(normal);
  CHECK(a_normal == doctest::Approx(anderson_darling_oracle(normal)).epsilon(1e-10));
  CHECK(a_normal < 1.0);
  CHECK(anderson_darling_normal(skewed) > 10.0);
  CHECK_THROWS_AS(anderson_darling_normal(normal.head(7)), InsufficientSample);
}
