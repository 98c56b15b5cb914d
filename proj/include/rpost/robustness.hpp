#pragma once

#include "rpost/posterior.hpp"

#include <vector>

namespace rpost {

/// Where the contamination sits. OneDirection contaminates only G_{i0} at t;
/// AllDirections contaminates every G_i at points(i).
struct ContaminationScenario {
  enum class Mode { OneDirection, AllDirections };
  Mode mode = Mode::AllDirections;
  Index i0 = 0;
  VectorXd points;
  double epsilon = 0.0;  // used by breakdown only

  static ContaminationScenario one_direction(Index i0, double t);
  static ContaminationScenario all_directions(VectorXd points);
  /// The same point t for all n rows.
  static ContaminationScenario all_directions(double t, Index n);

  void validate(Index n) const;
  /// Contamination point of row i (only meaningful if contaminated(i)).
  double point(Index i) const;
  bool contaminated(Index i) const;
};

/// k_{i,alpha}(theta, t) = (1/alpha)[f^alpha(t) - int f^alpha dG_i]; at alpha = 0,
/// log f(t) - int g_i log f. G_i is the uncontaminated part of `spec`.
double k_function(const ModelFamily& family, const TrueDistributionSpec& spec, RowRef z,
                  const VectorXd& theta, double t, double alpha);

struct FunctionalPosteriorConfig {
  Index draws = 20000;
  std::uint64_t seed = 0;
  double inflation = 1.25;  // proposal sd relative to the Laplace sd
};

/// Importance sample of the functional posterior, proportional to
/// exp(Q^(alpha)(theta; G)) pi(theta), where the data are replaced by G.
/// The cross terms int f^alpha dG_i are cached per draw and row.
class FunctionalPosterior {
 public:
  FunctionalPosterior(FamilyPtr family, MatrixXd design, TrueDistributionSpec spec, Prior prior,
                      double alpha, const FunctionalPosteriorConfig& config = {});

  const ImportanceSample& sample() const { return sample_; }
  const VectorXd& mode() const { return mode_; }
  const MatrixXd& proposal_covariance() const { return proposal_cov_; }
  double alpha() const { return alpha_; }
  Index rows() const { return design_.rows(); }
  const MatrixXd& design() const { return design_; }
  const TrueDistributionSpec& spec() const { return spec_; }
  const ModelFamily& family() const { return *family_; }

  /// Posterior mean (the ERPE functional).
  VectorXd mean() const;

  /// Sum of k_{i,alpha}(theta_k, t_i) over contaminated rows, for every draw theta_k.
  VectorXd k_sums(const ContaminationScenario& scenario) const;
  /// Same sum at an arbitrary theta.
  double k_sum(const VectorXd& theta, const ContaminationScenario& scenario) const;

 private:
  FamilyPtr family_;
  MatrixXd design_;
  TrueDistributionSpec spec_;
  Prior prior_;
  double alpha_;
  VectorXd mode_;
  MatrixXd proposal_cov_;
  ImportanceSample sample_;
  MatrixXd cross_;  // draws x rows: int f^alpha dG_i, or int g_i log f at alpha = 0
};

struct InfluenceValue {
  VectorXd value;
  VectorXd std_error;
};

/// IF of the ERPE: posterior covariance of theta with the summed k-functions.
InfluenceValue if_erpe(const FunctionalPosterior& posterior, const ContaminationScenario& scenario);

/// IF of the Bayes estimate under a general loss for a scalar parameter:
/// -E[L'(theta, T) k] / E[L''(theta, T)] with T the functional Bayes estimate.
/// Throws DomainError when E[L''] <= 0.
double if_general_loss(const FunctionalPosterior& posterior, const LossFunction& loss,
                       const ContaminationScenario& scenario, Index component = 0);

/// Closed-form IF of the posterior mean at alpha = 0 for the normal linear model with
/// known sigma, scalar beta, and prior N(m, tau^2):
/// sum_i z_i (t_i - z_i beta_g) / sigma^2 divided by (sum_i z_i^2 / sigma^2 + 1/tau^2).
double if_erpe_alpha0_linear(const MatrixXd& design, double beta_g, double sigma, double tau,
                             const ContaminationScenario& scenario);

struct PifResult {
  VectorXd values;          // PIF at each theta-grid point
  double posterior_mean = 0.0;   // E_posterior[PIF], zero up to rounding
  double posterior_mean_se = 0.0;
  double posterior_variance = 0.0;
};

/// Pseudo influence function sum_i k_i(theta, t_i) - E_posterior[sum_i k_i] on a theta grid
/// (one grid point per row).
PifResult pif(const FunctionalPosterior& posterior, const MatrixXd& theta_grid,
              const ContaminationScenario& scenario);

struct SensitivityReport {
  VectorXd gamma;      // per t: sup over the theta grid of |PIF|
  double gamma_star = 0.0;
  VectorXd s;          // per t: phi''(1) Var_posterior[PIF]
  double s_star = 0.0;
  VectorXd first_order;  // per t: phi'(1) E_posterior[PIF], expected to vanish
};

/// Sensitivities from PIF results computed on a shared theta grid over a t grid.
SensitivityReport sensitivities(const std::vector<PifResult>& surface, double phi_second_at_1,
                                double phi_first_at_1 = 0.0);

/// theta grid of `points` values spanning centre -/+ half_width in a scalar parameter.
MatrixXd scalar_grid(double centre, double half_width, Index points);

struct RobustnessReport {
  double alpha = 0.0;
  VectorXd t_grid;
  MatrixXd theta_grid;
  MatrixXd if_values;     // t x p
  MatrixXd if_std_error;  // t x p
  std::vector<PifResult> pif_surface;  // per t
  SensitivityReport sensitivity;
  double ess = 0.0;
};

/// IF curve, PIF surface and sensitivities for common all-direction contamination t
/// over `t_grid`.
RobustnessReport influence_analysis(const FunctionalPosterior& posterior, const VectorXd& t_grid,
                                    const MatrixXd& theta_grid, double phi_second_at_1 = 1.0);

struct BreakdownConfig {
  Index n = 50;               // observations in the location model
  double sigma = 1.0;         // known scale
  double mu_g = 0.0;          // true location
  double alpha = 0.5;
  double epsilon = 0.3;
  std::vector<double> magnitudes = {1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  Prior prior = Prior::gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1) * 100.0);
  FunctionalPosteriorConfig sampler;
};

struct BreakdownPoint {
  double magnitude = 0.0;
  double erpe = kNaN;        // ERPE functional under H_m
  double erpe_shift = kNaN;  // |erpe(H_m) - erpe(G)|
  double mdpde = kNaN;       // minimum-DPD functional under H_m
  double mdpde_shift = kNaN;
  double ess = kNaN;
};

/// Location model x_i ~ N(mu, sigma^2) with H_m = (1 - eps) G + eps delta_{mu_g + m}.
/// Common random numbers across magnitudes.
std::vector<BreakdownPoint> breakdown_experiment(const BreakdownConfig& config);

/// max over the last three magnitudes of |shift - shift at the fourth-last magnitude|,
/// relative to that fourth-last shift.
double plateau_change(const std::vector<BreakdownPoint>& curve);

}  // namespace rpost
