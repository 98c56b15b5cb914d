#include "rpost/diagnostics.hpp"

#include "rpost/simulate.hpp"

#include <algorithm>
#include <numeric>

namespace rpost {

EfficiencyReport efficiency(double alpha, double sigma) {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive");
  EfficiencyReport r;
  r.alpha = alpha;
  r.zeta_alpha = zeta(alpha, sigma);
  r.upsilon_beta = upsilon_beta_ratio(alpha);
  r.upsilon_sigma = upsilon_sigma_ratio(alpha);
  // The alpha = 0 variances are sigma^2 and sigma^2 / 2.
  r.are_beta_percent = 100.0 / r.upsilon_beta;
  r.are_sigma_percent = 50.0 / r.upsilon_sigma;
  return r;
}

std::vector<EfficiencyReport> are_table(const std::vector<double>& alphas) {
  if (alphas.empty()) throw DomainError("need at least one alpha");
  std::vector<EfficiencyReport> rows;
  rows.reserve(alphas.size());
  for (double a : alphas) rows.push_back(efficiency(a));
  return rows;
}

const std::vector<PublishedAre>& published_are_table() {
  static const std::vector<PublishedAre> table = {
      {0.00, 100.00, 100.00}, {0.01, 99.99, 99.97}, {0.02, 99.94, 99.88}, {0.05, 99.66, 99.32},
      {0.10, 98.76, 97.56},   {0.15, 97.46, 95.05}, {0.25, 94.06, 88.84}, {0.50, 83.81, 73.06},
      {0.75, 73.76, 61.53},   {1.00, 64.95, 54.11}};
  return table;
}

std::vector<double> standard_are_alphas() {
  std::vector<double> a;
  for (const auto& row : published_are_table()) a.push_back(row.alpha);
  return a;
}

const char* to_string(BvmScaling scaling) {
  return scaling == BvmScaling::PsiAtThetaG ? "psi_at_theta_g" : "psi_hat_at_theta_hat";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

MatrixXd spd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < 0)
    throw DomainError("matrix is not positive semi-definite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct MarginalBins {
  std::vector<double> empirical;  // bin probabilities of the draws
  std::vector<double> gaussian;   // N(0, 1) probabilities of the same bins
  double gaussian_inside = 0.0;
};

MarginalBins bin_marginal(const VectorXd& u) {
  std::vector<double> v(u.data(), u.data() + u.size());
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  const double lo = v.front();
  const double hi = v.back();
  double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  if (!(iqr > 0)) iqr = 1.349;  // N(0,1) value; draws are standardized
  double width = 2.0 * iqr / std::cbrt(m);
  std::size_t bins = 1;
  if (hi > lo) bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  bins = std::clamp<std::size_t>(bins, 1, 100000);
  width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;

  MarginalBins out;
  out.empirical.assign(bins, 0.0);
  out.gaussian.resize(bins);
  for (double x : v) {
    std::size_t b = hi > lo ? static_cast<std::size_t>((x - lo) / width) : 0;
    out.empirical[std::min(b, bins - 1)] += 1.0 / m;
  }
  const double left = hi > lo ? lo : lo - 0.5;
  for (std::size_t b = 0; b < bins; ++b)
    out.gaussian[b] = normal_cdf(left + width * static_cast<double>(b + 1)) -
                      normal_cdf(left + width * static_cast<double>(b));
  out.gaussian_inside = normal_cdf(left + width * static_cast<double>(bins)) - normal_cdf(left);
  return out;
}

double marginal_tv(const MarginalBins& b) {
  double l1 = 1.0 - b.gaussian_inside;
  for (std::size_t k = 0; k < b.empirical.size(); ++k) l1 += std::abs(b.empirical[k] - b.gaussian[k]);
  return std::min(1.0, 0.5 * l1);
}

// Sum over the product grid of |prod_j e_j - prod_j g_j|.
double product_l1(const std::vector<MarginalBins>& bins, std::size_t j, double e, double g) {
  if (j == bins.size()) return std::abs(e - g);
  double total = 0.0;
  for (std::size_t k = 0; k < bins[j].empirical.size(); ++k)
    total += product_l1(bins, j + 1, e * bins[j].empirical[k], g * bins[j].gaussian[k]);
  return total;
}

}  // namespace

BvmReport bvm_distance(const MatrixXd& draws, const VectorXd& theta_hat, const MatrixXd& psi,
                       Index n, BvmScaling scaling) {
  const Index m = draws.rows();
  const Index p = draws.cols();
  if (m < 1000) throw InsufficientSample("BVM distance needs at least 1000 draws");
  if (theta_hat.size() != p || psi.rows() != p || psi.cols() != p)
    throw DomainError("BVM distance: dimension mismatch");
  if (n < 1) throw DomainError("sample size must be positive");
  Eigen::LLT<MatrixXd> llt(psi);
  if (llt.info() != Eigen::Success) throw DomainError("psi is not positive definite");
  // With psi = L L', L' t ~ N(0, I) when t ~ N(0, psi^{-1}).
  const MatrixXd lt = MatrixXd(llt.matrixL()).transpose();
  const MatrixXd t = std::sqrt(static_cast<double>(n)) * (draws.rowwise() - theta_hat.transpose());
  const MatrixXd u = t * lt.transpose();

  BvmReport report;
  report.n = n;
  report.scaling_used = scaling;
  report.product_of_marginals = p > 1;
  report.marginal_tv.resize(p);
  std::vector<MarginalBins> bins;
  double cells = 1.0;
  double inside = 1.0;
  for (Index j = 0; j < p; ++j) {
    bins.push_back(bin_marginal(u.col(j)));
    report.marginal_tv(j) = marginal_tv(bins.back());
    cells *= static_cast<double>(bins.back().empirical.size());
    inside *= bins.back().gaussian_inside;
  }
  if (p == 1) {
    report.tv_estimate = report.marginal_tv(0);
  } else if (cells <= 4e6) {
    report.tv_estimate = std::min(1.0, 0.5 * (product_l1(bins, 0, 1.0, 1.0) + 1.0 - inside));
  } else {
    // Too many cells for the exact product grid; use the subadditive bound.
    report.tv_estimate = std::min(1.0, report.marginal_tv.sum());
  }
  return report;
}

BvmReport bvm_distance(const AlphaPosteriorChain& chain, const VectorXd& theta_hat,
                       const MatrixXd& psi, Index n, BvmScaling scaling) {
  BvmReport r = bvm_distance(chain.draws, theta_hat, psi, n, scaling);
  r.alpha = chain.alpha;
  return r;
}

std::vector<BvmExperimentRow> bvm_experiment(const SimulationSetup& setup,
                                             const std::vector<Index>& n_grid, Index replicates,
                                             std::uint64_t seed, unsigned threads) {
  if (!setup.family) throw DomainError("simulation setup needs a family");
  if (replicates < 1 || n_grid.empty()) throw DomainError("need at least one n and one replicate");
  const ModelFamily& family = *setup.family;
  const Index tasks = static_cast<Index>(n_grid.size()) * replicates;
  std::vector<BvmExperimentRow> rows(static_cast<std::size_t>(tasks));
  parallel_for(
      tasks,
      [&](Index task) {
        const Index a = task / replicates;
        const Index r = task % replicates;
        const Index n = n_grid[static_cast<std::size_t>(a)];
        BvmExperimentRow row;
        row.n = n;
        row.replicate = r;
        row.seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(a)),
                               static_cast<std::uint64_t>(r));
        Rng rng(row.seed);
        const MatrixXd design = gaussian_design(n, setup.covariates, setup.design_mean,
                                                setup.design_sd, setup.intercept, rng);
        const Dataset data = simulate_dataset(family, design, setup.theta_g, rng);
        const MdpdeResult fitted = fit(family, data, setup.alpha);
        SamplerConfig cfg = setup.sampler;
        cfg.seed = derive_seed(row.seed, 1);
        cfg.start = fitted.theta_hat;
        const AlphaPosteriorChain chain = sample(family, data, setup.prior, setup.alpha, cfg);
        row.acceptance_rate = chain.acceptance_rate;
        const MatrixXd psi =
            sandwich(family, design, TrueDistributionSpec::in_model(setup.theta_g), setup.theta_g,
                     setup.alpha)
                .psi;
        const MatrixXd psi_hat = fitted.neg_hessian / static_cast<double>(n);
        row.tv_psi = bvm_distance(chain, fitted.theta_hat, psi, n).tv_estimate;
        row.tv_psi_hat =
            bvm_distance(chain, fitted.theta_hat, psi_hat, n, BvmScaling::PsiHatAtThetaHat)
                .tv_estimate;
        rows[static_cast<std::size_t>(task)] = row;
      },
      threads);
  return rows;
}

double anderson_darling_normal(const Eigen::Ref<const VectorXd>& sample) {
  const Index m = sample.size();
  if (m < 8) throw InsufficientSample("Anderson-Darling needs at least 8 values");
  std::vector<double> v(sample.data(), sample.data() + m);
  std::sort(v.begin(), v.end());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  if (!(sd > 0)) return kInf;
  double s = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double lo = std::clamp(normal_cdf((v[i] - mean) / sd), 1e-300, 1.0 - 1e-16);
    const double hi = std::clamp(normal_cdf((v[m - 1 - i] - mean) / sd), 1e-300, 1.0 - 1e-16);
    s += static_cast<double>(2 * i + 1) * (std::log(lo) + std::log1p(-hi));
  }
  return -static_cast<double>(m) - s / static_cast<double>(m);
}

ErpeDistributionReport monte_carlo_erpe_distribution(const SimulationSetup& setup, Index n,
                                                     Index replications, std::uint64_t seed,
                                                     unsigned threads) {
  if (!setup.family) throw DomainError("simulation setup needs a family");
  if (replications < 100) throw DomainError("need at least 100 replications");
  const ModelFamily& family = *setup.family;
  Rng design_rng(derive_seed(seed, 0));
  const MatrixXd design = gaussian_design(n, setup.covariates, setup.design_mean, setup.design_sd,
                                          setup.intercept, design_rng);
  const Index p = family.parameter_dim(design.cols());
  const Index q = design.cols();

  MatrixXd estimates(replications, p);
  std::vector<char> ok(static_cast<std::size_t>(replications), 0);
  parallel_for(
      replications,
      [&](Index r) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r) + 1);
        Rng rng(s);
        const Dataset data = simulate_dataset(family, design, setup.theta_g, rng);
        SamplerConfig cfg = setup.sampler;
        cfg.seed = derive_seed(s, 1);
        try {
          const AlphaPosteriorChain chain = sample(family, data, setup.prior, setup.alpha, cfg);
          estimates.row(r) = erpe(chain).mean.transpose();
          ok[static_cast<std::size_t>(r)] = estimates.row(r).allFinite();
        } catch (const std::exception&) {
          ok[static_cast<std::size_t>(r)] = 0;
        }
      },
      threads);

  ErpeDistributionReport rep;
  rep.n = n;
  rep.alpha = setup.alpha;
  rep.replications = replications;
  const Index good = std::count(ok.begin(), ok.end(), 1);
  rep.failures = replications - good;
  rep.estimates.resize(good, p);
  for (Index r = 0, k = 0; r < replications; ++r)
    if (ok[static_cast<std::size_t>(r)]) rep.estimates.row(k++) = estimates.row(r);
  if (good < 2) return rep;

  const SandwichMatrices sw = sandwich(family, design, TrueDistributionSpec::in_model(setup.theta_g),
                                       setup.theta_g, setup.alpha);
  const MatrixXd acov = asymptotic_covariance(sw, n);
  const MatrixXd root = spd_sqrt(design.transpose() * design);
  rep.target_covariance = root * acov.topLeftCorner(q, q) * root;

  const MatrixXd y = (rep.estimates.leftCols(q).rowwise() - setup.theta_g.head(q).transpose()) * root;
  const MatrixXd centred = y.rowwise() - y.colwise().mean();
  rep.standardized_covariance = centred.transpose() * centred / static_cast<double>(good - 1);
  rep.frobenius_relative_error = (rep.standardized_covariance - rep.target_covariance).norm() /
                                 rep.target_covariance.norm();
  rep.anderson_darling.resize(q);
  if (good >= 8)
    for (Index j = 0; j < q; ++j) rep.anderson_darling(j) = anderson_darling_normal(y.col(j));

  if (p > q) {
    rep.has_scale = true;
    const VectorXd s = std::sqrt(static_cast<double>(n)) *
                       (rep.estimates.col(q).array() - setup.theta_g(q)).matrix();
    const double mean = s.mean();
    rep.scale_variance = (s.array() - mean).square().sum() / static_cast<double>(good - 1);
    rep.scale_target = static_cast<double>(n) * acov(q, q);
    rep.scale_relative_error = std::abs(rep.scale_variance - rep.scale_target) / rep.scale_target;
  }
  return rep;
}

}  // namespace rpost
