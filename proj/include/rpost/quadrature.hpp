#pragma once

#include "rpost/common.hpp"

#include <array>
#include <algorithm>
#include <vector>

namespace rpost {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_intervals = 4000;
};

template <typename Value>
struct QuadratureResult {
  Value value;
  double error = 0.0;
  int evaluations = 0;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
template <typename Derived>
double magnitude(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? 0.0 : v.template lpNorm<Eigen::Infinity>();
}

template <typename Value>
Value zero_like(const Value& v) {
  if constexpr (std::is_arithmetic_v<Value>)
    return Value(0);
  else
    return Value::Zero(v.rows(), v.cols());
}

template <typename Value>
struct Segment {
  double a, b;
  Value integral;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
auto kronrod15(F& f, double a, double b) {
  using Value = std::decay_t<decltype(f(a))>;
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const Value fc = f(center);
  Value kronrod = fc * kKronrodWeights[7];
  Value gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const Value fl = f(center - dx);
    const Value fr = f(center + dx);
    const Value pair = fl + fr;
    kronrod = kronrod + pair * kKronrodWeights[j];
    if (j % 2 == 1) gauss = gauss + pair * kGaussWeights[j / 2];
  }
  kronrod = kronrod * half;
  gauss = gauss * half;
  const Value diff = kronrod - gauss;
  return Segment<Value>{a, b, kronrod, magnitude(diff)};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature over a finite interval. `f` may return a
/// double or any Eigen dense object; the error test uses the max-norm.
template <typename F>
auto integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  using Value = std::decay_t<decltype(f(a))>;
  using detail::Segment;
  std::vector<Segment<Value>> heap;
  heap.push_back(detail::kronrod15(f, a, b));
  int evals = 15;
  Value total = heap.front().integral;
  double err = heap.front().error;
  while (err > std::max(opts.abs_tol, opts.rel_tol * detail::magnitude(total)) &&
         static_cast<int>(heap.size()) < opts.max_intervals) {
    std::pop_heap(heap.begin(), heap.end());
    const Segment<Value> worst = heap.back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      std::push_heap(heap.begin(), heap.end());
      break;
    }
    heap.back() = detail::kronrod15(f, worst.a, mid);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(detail::kronrod15(f, mid, worst.b));
    std::push_heap(heap.begin(), heap.end());
    evals += 30;
    // Re-sum from scratch; incremental updates drift when segments nearly cancel.
    total = detail::zero_like(total);
    err = 0.0;
    for (const auto& s : heap) {
      total = total + s.integral;
      err += s.error;
    }
  }
  return QuadratureResult<Value>{total, err, evals};
}

/// Integral over (lower, upper) where either end may be infinite. Infinite ends are
/// mapped onto a finite interval around `center` with length scale `scale`.
template <typename F>
auto integrate_range(F&& f, double lower, double upper, double center, double scale,
                     const QuadratureOptions& opts = {}) {
  using Value = std::decay_t<decltype(f(center))>;
  if (std::isfinite(lower) && std::isfinite(upper)) return integrate(f, lower, upper, opts);
  if (!std::isfinite(lower) && !std::isfinite(upper)) {
    // x = center + scale * u / (1 - u^2), u in (-1, 1)
    auto g = [&](double u) -> Value {
      const double d = 1.0 - u * u;
      const double x = center + scale * u / d;
      const double jac = scale * (1.0 + u * u) / (d * d);
      return f(x) * jac;
    };
    return integrate(g, -1.0, 1.0, opts);
  }
  if (std::isfinite(lower)) {
    // x = lower + scale * u / (1 - u), u in [0, 1)
    auto g = [&](double u) -> Value {
      const double d = 1.0 - u;
      return f(lower + scale * u / d) * (scale / (d * d));
    };
    return integrate(g, 0.0, 1.0, opts);
  }
  auto g = [&](double u) -> Value {
    const double d = 1.0 - u;
    return f(upper - scale * u / d) * (scale / (d * d));
  };
  return integrate(g, 0.0, 1.0, opts);
}

}  // namespace rpost
