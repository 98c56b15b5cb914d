#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace rpost {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A single design row z_i. Accepts rows of column-major matrices without a copy.
using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// Invalid parameter, index or argument value (e.g. sigma <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The negative Hessian of the objective is singular at the reported point.
class SingularHessian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Importance weights collapsed onto too few draws.
class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientSample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neumaier compensated summation. Works for scalars and fixed-shape Eigen objects.
template <typename T>
class CompensatedSum {
 public:
  CompensatedSum() = default;
  explicit CompensatedSum(const T& zero) : sum_(zero), comp_(zero) {}

  void add(const T& x) {
    if constexpr (std::is_arithmetic_v<T>) {
      const T t = sum_ + x;
      if (std::abs(sum_) >= std::abs(x))
        comp_ += (sum_ - t) + x;
      else
        comp_ += (x - t) + sum_;
      sum_ = t;
    } else {
      const T t = sum_ + x;
      const auto big = (sum_.array().abs() >= x.array().abs());
      comp_.array() += big.select((sum_ - t).array() + x.array(), (x - t).array() + sum_.array());
      sum_ = t;
    }
  }

  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// splitmix64 step, used to derive independent per-task seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rpost
