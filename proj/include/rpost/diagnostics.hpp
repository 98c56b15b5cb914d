#pragma once

#include "rpost/posterior.hpp"

#include <cmath>
#include <vector>

namespace rpost {

/// zeta_alpha = (2 pi)^{-alpha/2} sigma^{-(alpha+2)} (1+alpha)^{-3/2}.
template <typename Scalar>
Scalar zeta(Scalar alpha, Scalar sigma) {
  using std::exp;
  using std::log;
  using std::log1p;
  return exp(-alpha / 2 * Scalar(kLogTwoPi) - (alpha + 2) * log(sigma) - Scalar(1.5) * log1p(alpha));
}

/// upsilon_alpha^(beta) / sigma^2 = (1 + alpha^2 / (1 + 2 alpha))^{3/2}.
template <typename Scalar>
Scalar upsilon_beta_ratio(Scalar alpha) {
  using std::pow;
  return pow(Scalar(1) + alpha * alpha / (Scalar(1) + 2 * alpha), Scalar(1.5));
}

/// upsilon_alpha^(sigma) / sigma^2
///   = [2 (1 + 2 alpha^2)(1 + alpha^2 / (1 + 2 alpha))^{5/2} - alpha^2 (1 + alpha)^2] / (2 + alpha^2)^2.
template <typename Scalar>
Scalar upsilon_sigma_ratio(Scalar alpha) {
  using std::pow;
  const Scalar a2 = alpha * alpha;
  const Scalar inner = pow(Scalar(1) + a2 / (Scalar(1) + 2 * alpha), Scalar(2.5));
  const Scalar num = 2 * (Scalar(1) + 2 * a2) * inner - a2 * (Scalar(1) + alpha) * (Scalar(1) + alpha);
  return num / ((Scalar(2) + a2) * (Scalar(2) + a2));
}

struct EfficiencyReport {
  double alpha = 0.0;
  double zeta_alpha = 0.0;
  double upsilon_beta = 0.0;   // upsilon^(beta) / sigma^2
  double upsilon_sigma = 0.0;  // upsilon^(sigma) / sigma^2
  double are_beta_percent = 100.0;
  double are_sigma_percent = 100.0;
};

/// Asymptotic variances and relative efficiencies of the ERPEs of (beta, sigma) in the
/// normal linear model.
EfficiencyReport efficiency(double alpha, double sigma = 1.0);

std::vector<EfficiencyReport> are_table(const std::vector<double>& alphas);

struct PublishedAre {
  double alpha;
  double beta;
  double sigma;
};

/// Published two-decimal ARE values on the standard alpha grid.
const std::vector<PublishedAre>& published_are_table();
std::vector<double> standard_are_alphas();

enum class BvmScaling { PsiAtThetaG, PsiHatAtThetaHat };
const char* to_string(BvmScaling scaling);

struct BvmReport {
  Index n = 0;
  double alpha = 0.0;
  double tv_estimate = kNaN;
  BvmScaling scaling_used = BvmScaling::PsiAtThetaG;
  bool product_of_marginals = false;  // p > 1: TV of marginal products, an approximation
  VectorXd marginal_tv;
};

/// Binned total-variation distance between the draws of t = sqrt(n)(theta - theta_hat)
/// and N(0, psi^{-1}). Freedman-Diaconis bins on psi^{1/2}-standardized coordinates.
/// Throws InsufficientSample below 1000 draws.
BvmReport bvm_distance(const MatrixXd& draws, const VectorXd& theta_hat, const MatrixXd& psi,
                       Index n, BvmScaling scaling = BvmScaling::PsiAtThetaG);
BvmReport bvm_distance(const AlphaPosteriorChain& chain, const VectorXd& theta_hat,
                       const MatrixXd& psi, Index n, BvmScaling scaling = BvmScaling::PsiAtThetaG);

/// Data-generating setup shared by the replication experiments: z_i iid N(mean, sd^2)
/// (optionally with an intercept column), responses from f_{theta_g}.
struct SimulationSetup {
  FamilyPtr family;
  VectorXd theta_g;
  Index covariates = 1;
  double design_mean = 1.0;
  double design_sd = 1.0;
  bool intercept = false;
  Prior prior = Prior::improper_flat();
  double alpha = 0.0;
  SamplerConfig sampler;
};

struct BvmExperimentRow {
  Index n = 0;
  Index replicate = 0;
  std::uint64_t seed = 0;
  double tv_psi = kNaN;
  double tv_psi_hat = kNaN;
  double acceptance_rate = kNaN;
};

/// For each n and replicate: simulate data, sample the posterior, and measure the BVM
/// distance under both scalings. Seeds derive from `seed` by (n index, replicate).
std::vector<BvmExperimentRow> bvm_experiment(const SimulationSetup& setup,
                                             const std::vector<Index>& n_grid, Index replicates,
                                             std::uint64_t seed, unsigned threads = 0);

struct ErpeDistributionReport {
  Index n = 0;
  double alpha = 0.0;
  Index replications = 0;
  Index failures = 0;
  MatrixXd estimates;                // one row per successful replication
  MatrixXd standardized_covariance;  // empirical Cov of (Z'Z)^{1/2}(beta_hat - beta_g)
  MatrixXd target_covariance;        // (Z'Z)^{1/2} Psi^{-1} Omega Psi^{-1} (Z'Z)^{1/2} / n
  double frobenius_relative_error = kNaN;
  VectorXd anderson_darling;         // per coefficient, sample-standardized
  bool has_scale = false;
  double scale_variance = kNaN;      // empirical Var of sqrt(n)(sigma_hat - sigma_g)
  double scale_target = kNaN;        // n * asymptotic Var(sigma_hat)
  double scale_relative_error = kNaN;
};

/// Replicated ERPEs (posterior means of seeded chains) on one fixed design.
ErpeDistributionReport monte_carlo_erpe_distribution(const SimulationSetup& setup, Index n,
                                                     Index replications, std::uint64_t seed,
                                                     unsigned threads = 0);

/// Anderson-Darling A^2 of a sample against the normal law with the sample's own mean
/// and standard deviation.
double anderson_darling_normal(const Eigen::Ref<const VectorXd>& sample);

double normal_cdf(double x);

/// Symmetric square root of an SPD matrix.
MatrixXd spd_sqrt(const MatrixXd& m);

}  // namespace rpost
