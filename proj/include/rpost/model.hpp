#pragma once

#include "rpost/common.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace rpost {

using Rng = std::mt19937_64;

/// Responses x_1..x_n paired with the fixed design rows z_1..z_n.
struct Dataset {
  VectorXd responses;
  MatrixXd design;

  Index size() const { return responses.size(); }
  Index covariates() const { return design.cols(); }
};

/// Where a family's responses live: an interval (Lebesgue measure) or {0, 1}
/// (counting measure).
struct Support {
  enum class Kind { Continuous, Binary };
  Kind kind = Kind::Continuous;
  double lower = -kInf;
  double upper = kInf;

  static Support real_line() { return {}; }
  static Support binary() { return {Kind::Binary, 0.0, 1.0}; }
};

/// Per-row score/Hessian of log f.
struct LogDensityDerivatives {
  double value;
  VectorXd gradient;
  MatrixXd hessian;
};

/// Per-row sandwich contributions under a true density from the model family.
struct RowInformation {
  MatrixXd psi;    // E_g[hess V] / (1 + alpha)
  MatrixXd omega;  // Var_g[grad V] / (1 + alpha)^2
};

/// An independent non-homogeneous parametric family {f_{i,theta}}: the density of the
/// i-th response depends on the index only through its design row z_i.
///
/// Subclasses must supply `log_density` and `support`; everything else has a generic
/// fallback (quadrature over the support, central finite differences). The built-in
/// families override the fallbacks with closed forms.
///
/// Instances are immutable and may be shared between threads.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual std::string name() const = 0;
  virtual Support support() const = 0;
  virtual double log_density(RowRef z, double x, const VectorXd& theta) const = 0;

  /// Length of theta for a design with `covariates` columns.
  virtual Index parameter_dim(Index covariates) const { return covariates; }
  /// Throws DomainError for a wrong length or a non-finite or out-of-range coordinate.
  virtual void check_parameter(const VectorXd& theta, Index covariates) const;
  /// Non-throwing form of check_parameter.
  bool valid_parameter(const VectorXd& theta, Index covariates) const;
  /// Throws DomainError when a response is outside the family's support.
  virtual void check_response(double x) const;

  /// Centre and length scale of f_{i,theta}, used to place quadrature nodes.
  virtual std::pair<double, double> quadrature_frame(RowRef z, const VectorXd& theta) const;

  double density(RowRef z, double x, const VectorXd& theta) const {
    return std::exp(log_density(z, x, theta));
  }
  /// f_{i,theta}(x)^alpha.
  double density_power(RowRef z, double x, const VectorXd& theta, double alpha) const {
    return std::exp(alpha * log_density(z, x, theta));
  }
  /// Integral of f_{i,theta}^{1+alpha} over the support.
  virtual double integral_power(RowRef z, const VectorXd& theta, double alpha) const;

  /// V_i(x, theta) = int f^{1+alpha} - (1 + 1/alpha) f^alpha(x), alpha > 0.
  virtual double v_term(RowRef z, double x, const VectorXd& theta, double alpha) const;
  virtual VectorXd grad_v(RowRef z, double x, const VectorXd& theta, double alpha) const;
  virtual MatrixXd hess_v(RowRef z, double x, const VectorXd& theta, double alpha) const;

  /// log f and its first two theta-derivatives (used by the alpha = 0 branch).
  virtual LogDensityDerivatives log_density_derivatives(RowRef z, double x,
                                                        const VectorXd& theta) const;

  /// E_{f_{i,truth}}[fn(X)].
  double expectation(RowRef z, const VectorXd& truth,
                     const std::function<double(double)>& fn) const;
  VectorXd expectation(RowRef z, const VectorXd& truth,
                       const std::function<VectorXd(double)>& fn) const;

  /// int f_{i,theta}^alpha dG_i with g_i = f_{i,truth}.
  virtual double cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                             double alpha) const;
  /// int g_i log f_{i,theta} with g_i = f_{i,truth}.
  virtual double cross_log(RowRef z, const VectorXd& theta, const VectorXd& truth) const;

  /// Psi_i and Omega_i at theta when the i-th response follows f_{i,truth}.
  virtual RowInformation row_information(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                         double alpha) const;

  /// One draw from f_{i,theta}. The generic family cannot sample.
  virtual double draw(RowRef z, const VectorXd& theta, Rng& rng) const;

  virtual bool analytic_derivatives() const { return false; }
  /// Whether a uniform bound on third derivatives of V_i is known in closed form.
  virtual bool third_derivative_bound() const { return false; }
};

using FamilyPtr = std::shared_ptr<const ModelFamily>;

/// Normal linear regression x_i ~ N(z_i' beta, sigma^2). With `known_sigma` the
/// parameter is beta; otherwise it is (beta, sigma) with sigma > 0 last.
class GaussianRegression final : public ModelFamily {
 public:
  GaussianRegression() = default;
  explicit GaussianRegression(double known_sigma);

  bool known_scale() const { return known_sigma_.has_value(); }
  double sigma(const VectorXd& theta) const {
    return known_sigma_ ? *known_sigma_ : theta(theta.size() - 1);
  }

  std::string name() const override;
  Support support() const override { return Support::real_line(); }
  Index parameter_dim(Index covariates) const override {
    return known_sigma_ ? covariates : covariates + 1;
  }
  void check_parameter(const VectorXd& theta, Index covariates) const override;
  double log_density(RowRef z, double x, const VectorXd& theta) const override;
  std::pair<double, double> quadrature_frame(RowRef z, const VectorXd& theta) const override;
  double integral_power(RowRef z, const VectorXd& theta, double alpha) const override;
  double v_term(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  VectorXd grad_v(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  MatrixXd hess_v(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  LogDensityDerivatives log_density_derivatives(RowRef z, double x,
                                                const VectorXd& theta) const override;
  double cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                     double alpha) const override;
  double cross_log(RowRef z, const VectorXd& theta, const VectorXd& truth) const override;
  RowInformation row_information(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                 double alpha) const override;
  double draw(RowRef z, const VectorXd& theta, Rng& rng) const override;
  bool analytic_derivatives() const override { return true; }
  bool third_derivative_bound() const override { return true; }

 private:
  double mean(RowRef z, const VectorXd& theta) const;
  std::optional<double> known_sigma_;
};

/// Bernoulli-logit regression P(x_i = 1) = 1 / (1 + exp(-z_i' beta)).
class LogisticRegression final : public ModelFamily {
 public:
  std::string name() const override { return "logistic"; }
  Support support() const override { return Support::binary(); }
  void check_response(double x) const override;
  double log_density(RowRef z, double x, const VectorXd& theta) const override;
  double integral_power(RowRef z, const VectorXd& theta, double alpha) const override;
  double v_term(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  VectorXd grad_v(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  MatrixXd hess_v(RowRef z, double x, const VectorXd& theta, double alpha) const override;
  LogDensityDerivatives log_density_derivatives(RowRef z, double x,
                                                const VectorXd& theta) const override;
  double cross_power(RowRef z, const VectorXd& theta, const VectorXd& truth,
                     double alpha) const override;
  double cross_log(RowRef z, const VectorXd& theta, const VectorXd& truth) const override;
  RowInformation row_information(RowRef z, const VectorXd& theta, const VectorXd& truth,
                                 double alpha) const override;
  double draw(RowRef z, const VectorXd& theta, Rng& rng) const override;
  bool analytic_derivatives() const override { return true; }
  bool third_derivative_bound() const override { return true; }

  /// Success probability pi_i(beta).
  static double probability(double eta);
};

/// A family defined only by a user-supplied log-density on a declared support.
/// Integrals use adaptive quadrature and derivatives use finite differences.
class GenericFamily final : public ModelFamily {
 public:
  using LogDensity = std::function<double(RowRef, double, const VectorXd&)>;
  using Frame = std::function<std::pair<double, double>(RowRef, const VectorXd&)>;

  /// theta has one coordinate per covariate plus `extra_parameters` trailing ones.
  GenericFamily(std::string name, Support support, LogDensity log_density, Frame frame = {},
                Index extra_parameters = 0);

  std::string name() const override { return name_; }
  Support support() const override { return support_; }
  Index parameter_dim(Index covariates) const override { return covariates + extra_; }
  double log_density(RowRef z, double x, const VectorXd& theta) const override {
    return log_density_(z, x, theta);
  }
  std::pair<double, double> quadrature_frame(RowRef z, const VectorXd& theta) const override;

 private:
  std::string name_;
  Support support_;
  LogDensity log_density_;
  Frame frame_;
  Index extra_;
};

enum class FamilyKind { LinearKnownSigma, LinearUnknownSigma, Logistic };

FamilyPtr make_family(FamilyKind kind, double sigma = 1.0);
/// Parses "linear", "linear-unknown-sigma" or "logistic".
FamilyKind parse_family_kind(const std::string& text);

/// V_i evaluated at observation i of `data`.
double v_term(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
              double alpha);
VectorXd grad_v(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
                double alpha);
MatrixXd hess_v(const ModelFamily& family, const Dataset& data, Index i, const VectorXd& theta,
                double alpha);

/// Throws DomainError when the data are unusable with the family.
void validate_dataset(const ModelFamily& family, const Dataset& data);

struct DesignConditionReport {
  double max_abs_entry = 0.0;
  double min_eigenvalue_scaled = 0.0;  // smallest eigenvalue of Z'Z / n
  double max_leverage = kNaN;          // max_i z_i'(Z'Z)^{-1} z_i
  bool full_column_rank = false;
};

/// Boundedness, eigenvalue and leverage diagnostics of a fixed design. Rank is judged
/// with tolerance 1e-12 relative to the largest eigenvalue of Z'Z / n.
DesignConditionReport check_design_conditions(const MatrixXd& design);

/// CSV with the response in the first column and covariates after it.
Dataset read_dataset_csv(std::istream& in, bool header);
Dataset load_dataset_csv(const std::string& path, bool header);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Thrown by the CSV readers; carries the 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace rpost
