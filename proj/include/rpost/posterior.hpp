#pragma once

#include "rpost/mdpde.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace rpost {

class Prior {
 public:
  enum class Kind { Gaussian, UniformBox, ImproperFlat };

  static Prior gaussian(VectorXd mean, MatrixXd covariance);
  static Prior uniform_box(VectorXd lower, VectorXd upper);
  /// Flat on the whole parameter space. Not usable where a finite integral is needed.
  static Prior improper_flat();

  Kind kind() const { return kind_; }
  bool proper() const { return kind_ != Kind::ImproperFlat; }
  /// -1 for the flat prior, which accepts any dimension.
  Index dim() const;

  /// Normalized log-density for proper priors, 0 for the flat prior, -inf outside
  /// the box.
  double log_density(const VectorXd& theta) const;
  /// Gradient and Hessian of log_density (zero for the box and flat priors).
  VectorXd log_density_gradient(const VectorXd& theta) const;
  MatrixXd log_density_hessian(Index dim) const;
  VectorXd sample(Rng& rng) const;

  const VectorXd& mean() const { return mean_; }
  const MatrixXd& covariance() const { return covariance_; }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }

 private:
  Kind kind_ = Kind::ImproperFlat;
  VectorXd mean_, lower_, upper_;
  MatrixXd covariance_, precision_, chol_;
  double log_norm_ = 0.0;
};

/// Q_n^(alpha)(theta) + log pi(theta); -inf outside the prior support or parameter space.
double log_r_posterior_unnorm(const ModelFamily& family, const Dataset& data, const Prior& prior,
                              const VectorXd& theta, double alpha);

using LogTarget = std::function<double(const VectorXd&)>;

struct SamplerConfig {
  Index chain_length = 50000;  // iterations after burn-in
  Index burn_in = 5000;
  Index thinning = 1;
  std::uint64_t seed = 0;
  double proposal_scale = 1.0;              // multiplies the automatic covariance
  std::optional<MatrixXd> proposal_covariance;
  std::optional<VectorXd> start;            // default: the MDPDE
  void validate() const;
};

struct AlphaPosteriorChain {
  MatrixXd draws;            // one row per retained draw
  VectorXd log_post_values;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  Index burn_in = 0;
  Index thinning = 1;
  std::string warning;       // set when the acceptance rate is outside [0.05, 0.7]

  Index size() const { return draws.rows(); }
};

/// Random-walk Metropolis on an arbitrary log target with a Gaussian proposal.
AlphaPosteriorChain sample_target(const LogTarget& log_target, const VectorXd& start,
                                  const MatrixXd& proposal_covariance,
                                  const SamplerConfig& config);

/// Random-walk Metropolis on the R^(alpha)-posterior. The automatic proposal covariance
/// is 2.38^2 / p * (-grad^2 Q(theta_hat))^{-1}.
AlphaPosteriorChain sample(const ModelFamily& family, const Dataset& data, const Prior& prior,
                           double alpha, const SamplerConfig& config);

void write_chain_csv(std::ostream& out, const AlphaPosteriorChain& chain);

struct PosteriorMean {
  VectorXd mean;
  VectorXd std_error;  // batch means
};

/// Posterior mean of the chain (the ERPE) with batch-means Monte Carlo standard errors.
PosteriorMean erpe(const AlphaPosteriorChain& chain);

/// Batch-means standard error of the mean of a series.
double batch_means_se(const Eigen::Ref<const VectorXd>& series);

/// Loss L(theta, t) for a scalar parameter with derivatives in t.
struct LossFunction {
  std::string name;
  std::function<double(double, double)> evaluate;
  std::function<double(double, double)> d1;
  std::function<double(double, double)> d2;

  static LossFunction squared();
  static LossFunction absolute();
  static LossFunction huber(double delta);
  static LossFunction custom(std::string name, std::function<double(double, double)> evaluate,
                             std::function<double(double, double)> d1,
                             std::function<double(double, double)> d2);
};

/// argmin_t of the (weighted) average of L(theta_j, t) over draws. Safeguarded Newton
/// on the average derivative, started at the (weighted) mean. Throws ConvergenceError.
double bayes_estimate_under_loss(const Eigen::Ref<const VectorXd>& draws, const LossFunction& loss,
                                 const Eigen::Ref<const VectorXd>& weights = VectorXd());
double bayes_estimate_under_loss(const AlphaPosteriorChain& chain, Index component,
                                 const LossFunction& loss);

struct GaussianProposal {
  VectorXd mean;
  MatrixXd covariance;
};

/// Draws from a Gaussian proposal with self-normalized importance weights.
struct ImportanceSample {
  MatrixXd draws;
  VectorXd weights;       // normalized to sum to one
  VectorXd log_target;    // log target value at each draw
  double ess = 0.0;       // (sum w)^2 / sum w^2
};

/// Throws DegenerateWeights when the effective sample size is below 50.
ImportanceSample importance_sample(const LogTarget& log_target, const GaussianProposal& proposal,
                                   Index m, std::uint64_t seed);

struct ImportanceEstimate {
  VectorXd estimate;
  VectorXd std_error;
  double ess = 0.0;
};

ImportanceEstimate importance_expectation(const ImportanceSample& sample,
                                          const std::function<VectorXd(const VectorXd&)>& h);
ImportanceEstimate importance_expectation(const ModelFamily& family, const Dataset& data,
                                          const Prior& prior, double alpha,
                                          const std::function<VectorXd(const VectorXd&)>& h,
                                          const GaussianProposal& proposal, Index m,
                                          std::uint64_t seed);

}  // namespace rpost
