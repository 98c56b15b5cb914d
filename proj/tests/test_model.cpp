#include "oracles.hpp"

#include "rpost/model.hpp"

#include <doctest.h>

#include <limits>
#include <random>
#include <sstream>

using namespace rpost;

namespace {

struct Probe {
  Eigen::RowVectorXd z;
  double x;
  VectorXd theta;
  double alpha;
};

// Random (z, x, theta, alpha) for the given family. Responses are placed within a few
// scale units of the mean so the density powers are not all underflowed.
Probe random_probe(const ModelFamily& fam, Index covariates, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.05, 1.0);
  Probe p;
  p.z = Eigen::RowVectorXd(covariates);
  for (Index j = 0; j < covariates; ++j) p.z(j) = nd(rng);
  p.theta = VectorXd(fam.parameter_dim(covariates));
  for (Index j = 0; j < covariates; ++j) p.theta(j) = nd(rng);
  if (p.theta.size() > covariates) p.theta(covariates) = 0.5 + 1.5 * ud(rng);
  p.alpha = ud(rng);
  if (fam.support().kind == Support::Kind::Binary) {
    p.x = ud(rng) < 0.5 ? 0.0 : 1.0;
  } else {
    const auto [centre, scale] = fam.quadrature_frame(p.z, p.theta);
    p.x = centre + 2.0 * scale * nd(rng);
  }
  return p;
}

std::vector<FamilyPtr> builtins() {
  return {make_family(FamilyKind::LinearKnownSigma, 1.3),
          make_family(FamilyKind::LinearUnknownSigma), make_family(FamilyKind::Logistic)};
}

}  // namespace

TEST_CASE("v_term closed-form examples") {
  const auto lin = make_family(FamilyKind::LinearKnownSigma, 1.0);
  const Eigen::RowVectorXd one = Eigen::RowVectorXd::Ones(1);
  const VectorXd zero = VectorXd::Zero(1);
  // int f^2 = (2 pi)^{-1/2} 2^{-1/2}; (1 + 1/alpha) f(0) = 2 (2 pi)^{-1/2}
  const double c = 1.0 / std::sqrt(2 * M_PI);
  const double expected = c / std::sqrt(2.0) - 2 * c;
  CHECK(lin->v_term(one, 0.0, zero, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(lin->v_term(one, 0.0, zero, 1.0) == doctest::Approx(-0.5157897689).epsilon(1e-9));

  const double quad = oracle::simpson(
      [](double x) { return std::pow(oracle::normal_pdf(x, 0, 1), 2.0); }, -40, 40);
  CHECK(lin->integral_power(one, zero, 1.0) == doctest::Approx(quad).epsilon(1e-10));

  const auto logit = make_family(FamilyKind::Logistic);
  const Eigen::RowVectorXd zz = Eigen::RowVectorXd::Zero(1);
  for (double b : {-3.0, 0.0, 2.5})
    CHECK(logit->v_term(zz, 1.0, VectorXd::Constant(1, b), 1.0) == doctest::Approx(-0.5));
}

TEST_CASE("grad_v vanishes at stationary points") {
  const auto lin = make_family(FamilyKind::LinearKnownSigma, 0.7);
  Eigen::RowVectorXd z(2);
  z << 0.3, -1.2;
  VectorXd beta(2);
  beta << 1.5, 0.4;
  const double x = z.dot(beta);
  for (double a : {0.2, 0.5, 1.0}) CHECK(lin->grad_v(z, x, beta, a).norm() < 1e-15);

  const auto logit = make_family(FamilyKind::Logistic);
  const Eigen::RowVectorXd zz = Eigen::RowVectorXd::Zero(2);
  CHECK(logit->grad_v(zz, 1.0, beta, 0.5).norm() == 0.0);
  CHECK(logit->grad_v(zz, 0.0, beta, 0.5).norm() == 0.0);
}

TEST_CASE("analytic derivatives match central finite differences") {
  std::mt19937_64 rng(20240611);
  for (const FamilyPtr& fam : builtins()) {
    CAPTURE(fam->name());
    double worst_g = 0, worst_h = 0, worst_lg = 0, worst_lh = 0;
    for (int k = 0; k < 100; ++k) {
      const Probe p = random_probe(*fam, 2, rng);
      auto v = [&](const VectorXd& th) { return fam->v_term(p.z, p.x, th, p.alpha); };
      auto g = [&](const VectorXd& th) { return fam->grad_v(p.z, p.x, th, p.alpha); };
      worst_g = std::max(worst_g, oracle::rel_err(g(p.theta), oracle::fd_gradient(v, p.theta)));
      worst_h = std::max(worst_h, oracle::rel_err(fam->hess_v(p.z, p.x, p.theta, p.alpha),
                                                  oracle::fd_jacobian(g, p.theta)));

      const LogDensityDerivatives d = fam->log_density_derivatives(p.z, p.x, p.theta);
      auto lf = [&](const VectorXd& th) { return fam->log_density(p.z, p.x, th); };
      auto lg = [&](const VectorXd& th) {
        return fam->log_density_derivatives(p.z, p.x, th).gradient;
      };
      CHECK(d.value == doctest::Approx(lf(p.theta)).epsilon(1e-14));
      worst_lg = std::max(worst_lg, oracle::rel_err(d.gradient, oracle::fd_gradient(lf, p.theta)));
      worst_lh = std::max(worst_lh, oracle::rel_err(d.hessian, oracle::fd_jacobian(lg, p.theta)));
    }
    CHECK(worst_g < 1e-6);
    CHECK(worst_h < 1e-6);
    CHECK(worst_lg < 1e-6);
    CHECK(worst_lh < 1e-6);
  }
}

TEST_CASE("integral_power: normalization and quadrature agreement") {
  std::mt19937_64 rng(7);
  for (const FamilyPtr& fam : builtins()) {
    CAPTURE(fam->name());
    for (int k = 0; k < 20; ++k) {
      const Probe p = random_probe(*fam, 3, rng);
      CHECK(fam->integral_power(p.z, p.theta, 0.0) == doctest::Approx(1.0).epsilon(1e-10));
      for (double a : {0.1, 0.5, 1.0}) {
        double ref;
        if (fam->support().kind == Support::Kind::Binary) {
          ref = std::exp((1 + a) * fam->log_density(p.z, 0.0, p.theta)) +
                std::exp((1 + a) * fam->log_density(p.z, 1.0, p.theta));
        } else {
          const auto [c, s] = fam->quadrature_frame(p.z, p.theta);
          ref = oracle::simpson(
              [&](double x) { return std::exp((1 + a) * fam->log_density(p.z, x, p.theta)); },
              c - 40 * s, c + 40 * s, 40000);
        }
        CHECK(fam->integral_power(p.z, p.theta, a) == doctest::Approx(ref).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("logistic probabilities") {
  const auto logit = make_family(FamilyKind::Logistic);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 10);
  for (int k = 0; k < 200; ++k) {
    Eigen::RowVectorXd z(2);
    z << nd(rng), nd(rng);
    VectorXd b(2);
    b << nd(rng), nd(rng);
    const double p = LogisticRegression::probability(z.dot(b));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    const double f0 = logit->density(z, 0.0, b), f1 = logit->density(z, 1.0, b);
    // exact up to the rounding of exp(log f)
    CHECK(std::abs(f0 + f1 - 1.0) <= 16 * std::numeric_limits<double>::epsilon());
    CHECK(std::abs(p + LogisticRegression::probability(-z.dot(b)) - 1.0) <=
          std::numeric_limits<double>::epsilon());
  }
  CHECK(LogisticRegression::probability(0.0) == 0.5);
  CHECK_THROWS_AS(logit->check_response(0.5), DomainError);
}

TEST_CASE("cross terms against quadrature") {
  const auto lin = make_family(FamilyKind::LinearUnknownSigma);
  Eigen::RowVectorXd z(2);
  z << 1.0, 0.4;
  VectorXd theta(3), truth(3);
  theta << 0.2, 1.0, 0.8;
  truth << 0.5, 0.7, 1.3;
  const double mg = z.dot(truth.head(2));
  const double mf = z.dot(theta.head(2));
  for (double a : {0.25, 1.0}) {
    const double ref = oracle::simpson(
        [&](double x) {
          return std::pow(oracle::normal_pdf(x, mf, 0.8), a) * oracle::normal_pdf(x, mg, 1.3);
        },
        mg - 40, mg + 40, 40000);
    CHECK(lin->cross_power(z, theta, truth, a) == doctest::Approx(ref).epsilon(1e-10));
  }
  const double ref_log = oracle::simpson(
      [&](double x) {
        return oracle::normal_logpdf(x, mf, 0.8) * oracle::normal_pdf(x, mg, 1.3);
      },
      mg - 40, mg + 40, 40000);
  CHECK(lin->cross_log(z, theta, truth) == doctest::Approx(ref_log).epsilon(1e-10));
}

TEST_CASE("generic family reproduces the Gaussian closed forms") {
  const auto gauss = make_family(FamilyKind::LinearUnknownSigma);
  const auto generic = std::make_shared<GenericFamily>(
      "generic-normal", Support::real_line(),
      [](RowRef z, double x, const VectorXd& th) {
        const double s = th(th.size() - 1);
        const double r = (x - z.dot(th.head(th.size() - 1))) / s;
        return -0.5 * r * r - std::log(s) - 0.5 * kLogTwoPi;
      },
      [](RowRef z, const VectorXd& th) {
        return std::pair{z.dot(th.head(th.size() - 1)), th(th.size() - 1)};
      },
      1);
  Eigen::RowVectorXd z(2);
  z << 1.0, -0.6;
  VectorXd theta(3), truth(3);
  theta << 0.3, 0.9, 1.1;
  truth << 0.2, 1.0, 0.9;
  CHECK(generic->parameter_dim(2) == 3);
  for (double a : {0.2, 0.7}) {
    CHECK(generic->integral_power(z, theta, a) ==
          doctest::Approx(gauss->integral_power(z, theta, a)).epsilon(1e-9));
    CHECK(generic->v_term(z, 0.4, theta, a) ==
          doctest::Approx(gauss->v_term(z, 0.4, theta, a)).epsilon(1e-9));
    CHECK(oracle::rel_err(generic->grad_v(z, 0.4, theta, a), gauss->grad_v(z, 0.4, theta, a)) <
          1e-6);
    CHECK(oracle::rel_err(generic->hess_v(z, 0.4, theta, a), gauss->hess_v(z, 0.4, theta, a)) <
          1e-4);
    const RowInformation gi = generic->row_information(z, theta, truth, a);
    const RowInformation ci = gauss->row_information(z, theta, truth, a);
    CHECK(oracle::rel_err(gi.psi, ci.psi) < 1e-4);
    CHECK(oracle::rel_err(gi.omega, ci.omega) < 1e-4);
  }
  Rng rng(1);
  CHECK_THROWS(generic->draw(z, theta, rng));
}

TEST_CASE("parameter and response validation") {
  const auto lin = make_family(FamilyKind::LinearUnknownSigma);
  VectorXd theta(3);
  theta << 0.0, 1.0, -1.0;
  CHECK_THROWS_AS(lin->check_parameter(theta, 2), DomainError);
  theta(2) = 0.0;
  CHECK_THROWS_AS(lin->check_parameter(theta, 2), DomainError);
  theta(2) = 1.0;
  CHECK_NOTHROW(lin->check_parameter(theta, 2));
  CHECK_THROWS_AS(lin->check_parameter(VectorXd::Ones(2), 2), DomainError);
  CHECK_THROWS_AS(make_family(FamilyKind::LinearKnownSigma, 0.0), DomainError);
  CHECK_THROWS_AS(parse_family_kind("poisson"), DomainError);
  CHECK(parse_family_kind("linear-unknown-sigma") == FamilyKind::LinearUnknownSigma);

  Dataset d;
  d.responses = VectorXd::Constant(3, 0.5);
  d.design = MatrixXd::Ones(3, 1);
  CHECK_THROWS_AS(validate_dataset(*make_family(FamilyKind::Logistic), d), DomainError);
  CHECK_NOTHROW(validate_dataset(*make_family(FamilyKind::LinearKnownSigma), d));
}

TEST_CASE("design conditions") {
  {
    const DesignConditionReport r = check_design_conditions(MatrixXd::Identity(2, 2));
    CHECK(r.min_eigenvalue_scaled == doctest::Approx(0.5));
    CHECK(r.max_leverage == doctest::Approx(1.0));
    CHECK(r.full_column_rank);
  }
  {
    const DesignConditionReport r = check_design_conditions(MatrixXd::Ones(4, 1));
    CHECK(r.min_eigenvalue_scaled == doctest::Approx(1.0));
    CHECK(r.max_leverage == doctest::Approx(0.25));
    CHECK(r.max_abs_entry == 1.0);
  }
  {
    MatrixXd z(5, 2);
    z.col(0) << 1, 2, 3, 4, 5;
    z.col(1) = z.col(0);
    CHECK_FALSE(check_design_conditions(z).full_column_rank);
  }
  {
    CHECK_FALSE(check_design_conditions(MatrixXd::Ones(2, 3)).full_column_rank);
  }
}

TEST_CASE("CSV reading") {
  {
    std::istringstream in("x,z1,z2\n1.5, 1, 2\n\n-2e-1,1,3\n");
    const Dataset d = read_dataset_csv(in, true);
    CHECK(d.size() == 2);
    CHECK(d.covariates() == 2);
    CHECK(d.responses(1) == -0.2);
    CHECK(d.design(1, 1) == 3.0);
  }
  {
    std::istringstream in("1,2\n3,x4\n");
    try {
      read_dataset_csv(in, false);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 2);
      CHECK(std::string(e.what()).find("line 2, column 2") != std::string::npos);
    }
  }
  {
    std::istringstream in("h\n1,2\n3,4,5\n");
    CHECK_THROWS_AS(read_dataset_csv(in, true), ParseError);
  }
  {
    std::istringstream in("1,nan\n");
    CHECK_THROWS_AS(read_dataset_csv(in, false), ParseError);
  }
  {
    Dataset d;
    d.responses = VectorXd::LinSpaced(4, 0.1, 0.7);
    d.design = MatrixXd::Random(4, 2);
    std::stringstream io;
    write_dataset_csv(io, d);
    const Dataset back = read_dataset_csv(io, true);
    CHECK(back.responses == d.responses);
    CHECK(back.design == d.design);
  }
  CHECK_THROWS(load_dataset_csv("/nonexistent/file.csv", true));
}
