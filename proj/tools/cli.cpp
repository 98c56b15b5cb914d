#include "cli.hpp"

#include "rpost/diagnostics.hpp"
#include "rpost/laplace.hpp"
#include "rpost/robustness.hpp"
#include "rpost/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <variant>
#include <vector>

namespace rpost::cli {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shortest representation that reads back to the same double.
std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Canonical configuration

std::string canonical(double v) { return format_double(v); }
std::string canonical(std::int64_t v) { return std::to_string(v); }
std::string canonical(std::uint64_t v) { return std::to_string(v); }
std::string canonical(const std::string& v) { return v; }
std::string canonical(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string canonical(const std::vector<T>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += canonical(v[k]);
  }
  return s;
}

/// Options of one subcommand together with their canonical key=value form.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
    fields_.emplace_back(name, [&var] { return canonical(var); });
    return app_->add_option("--" + name, var, desc)->capture_default_str();
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    fields_.emplace_back(name, [&var] { return canonical(var); });
    return app_->add_flag("--" + name, var, desc);
  }
  /// Adds a value computed after parsing (e.g. a digest of the input file).
  void extra(const std::string& name, std::function<std::string()> fn) {
    fields_.emplace_back(name, std::move(fn));
  }

  std::string text() const {
    std::map<std::string, std::string> sorted;
    for (const auto& [k, fn] : fields_) sorted[k] = fn();
    std::string s = "[" + app_->get_name() + "]\n";
    for (const auto& [k, v] : sorted) s += k + "=" + v + "\n";
    return s;
  }
  std::string hash() const { return hex64(fnv1a64(text())); }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> fields_;
};

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::monostate, std::string, double, std::int64_t>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_csv(std::ostream& out, const Table& t) {
  for (std::size_t j = 0; j < t.columns.size(); ++j) out << (j ? "," : "") << t.columns[j];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>)
              out << "NA";
            else if constexpr (std::is_same_v<V, std::string>)
              out << csv_escape(v);
            else if constexpr (std::is_same_v<V, double>)
              out << format_double(v);
            else
              out << v;
          },
          row[j]);
    }
    out << '\n';
  }
}

void write_json(std::ostream& out, const Table& t) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < row.size(); ++j) {
      auto& slot = obj[t.columns[j]];
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>)
              slot = nullptr;
            else if constexpr (std::is_same_v<V, double>)
              slot = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
            else
              slot = v;
          },
          row[j]);
    }
    rows.push_back(std::move(obj));
  }
  out << rows.dump(2) << '\n';
}

struct Global {
  std::string format = "csv";
  std::string output_dir;
  unsigned threads = 0;
};

std::string resolved_output_dir(const Global& g) {
  const char* env = std::getenv(kOutputDirEnv);
  if (env && *env) return env;
  return g.output_dir;
}

void emit(const Table& t, const std::string& stem, const Global& g, std::ostream& out) {
  std::ostringstream buf;
  if (g.format == "json")
    write_json(buf, t);
  else
    write_csv(buf, t);
  const std::string dir = resolved_output_dir(g);
  if (dir.empty()) {
    out << buf.str();
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path path =
      std::filesystem::path(dir) / (stem + (g.format == "json" ? ".json" : ".csv"));
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  file << buf.str();
  file.close();
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  out << path.string() << '\n';
}

// ---------------------------------------------------------------------------
// Shared argument groups

std::vector<double> broadcast(const std::vector<double>& v, Index p, const char* what) {
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(p), v[0]);
  if (static_cast<Index>(v.size()) != p)
    throw DomainError(std::string(what) + ": expected 1 or " + std::to_string(p) + " values, got " +
                      std::to_string(v.size()));
  return v;
}

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw DomainError("alpha list is empty");
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("alpha must be finite and >= 0");
}

struct ModelArgs {
  std::string data;
  std::string model = "linear";
  double sigma = 1.0;
  bool no_header = false;
  double alpha = 0.0;
  std::string digest;

  void attach(OptionSet& o) {
    o.app()->add_option("data", data, "CSV file: response first, covariates after")->required();
    o.extra("data", [this] { return data; });
    o.extra("data_digest", [this] { return digest; });
    o.add("model", model, "linear | linear-unknown-sigma | logistic");
    o.add("sigma", sigma, "known scale of the linear model");
    o.flag("no-header", no_header, "the CSV has no header line");
    o.add("alpha", alpha, "DPD tuning parameter (>= 0)");
  }
};

struct Loaded {
  FamilyPtr family;
  Dataset data;
};

Loaded load(ModelArgs& m) {
  std::ifstream in(m.data, std::ios::binary);
  if (!in) throw IoError("cannot open '" + m.data + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  m.digest = hex64(fnv1a64(text));
  std::istringstream stream(text);
  Loaded l;
  try {
    l.data = read_dataset_csv(stream, !m.no_header);
  } catch (const ParseError& e) {
    throw ParseError(m.data + ": " + e.what(), e.line(), e.column());
  }
  check_alphas({m.alpha});
  l.family = make_family(parse_family_kind(m.model), m.sigma);
  validate_dataset(*l.family, l.data);
  return l;
}

struct PriorArgs {
  std::string kind = "gaussian";
  std::vector<double> mean{0.0};
  std::vector<double> sd{10.0};
  std::vector<double> lower{-10.0};
  std::vector<double> upper{10.0};

  void attach(OptionSet& o) {
    o.add("prior", kind, "gaussian | uniform | flat")
        ->check(CLI::IsMember({"gaussian", "uniform", "flat"}));
    o.add("prior-mean", mean, "Gaussian prior mean (one value or one per parameter)")
        ->delimiter(',');
    o.add("prior-sd", sd, "Gaussian prior standard deviation")->delimiter(',');
    o.add("prior-lower", lower, "uniform prior lower bounds")->delimiter(',');
    o.add("prior-upper", upper, "uniform prior upper bounds")->delimiter(',');
  }

  Prior build(Index p) const {
    if (kind == "flat") return Prior::improper_flat();
    if (kind == "uniform")
      return Prior::uniform_box(to_vector(broadcast(lower, p, "prior-lower")),
                                to_vector(broadcast(upper, p, "prior-upper")));
    const VectorXd s = to_vector(broadcast(sd, p, "prior-sd"));
    return Prior::gaussian(to_vector(broadcast(mean, p, "prior-mean")),
                           s.array().square().matrix().asDiagonal());
  }
};

struct SamplerArgs {
  std::uint64_t seed = 0;
  std::int64_t chain_length = 50000;
  std::int64_t burn_in = 5000;
  std::int64_t thin = 1;
  double proposal_scale = 1.0;

  void attach(OptionSet& o) {
    o.add("seed", seed, "random seed (required)")->required();
    o.add("chain-length", chain_length, "iterations kept after burn-in");
    o.add("burn-in", burn_in, "discarded initial iterations");
    o.add("thin", thin, "keep every k-th iteration");
    o.add("proposal-scale", proposal_scale, "multiplier of the proposal standard deviation");
  }

  SamplerConfig build() const {
    SamplerConfig c;
    c.chain_length = chain_length;
    c.burn_in = burn_in;
    c.thinning = thin;
    c.seed = seed;
    c.proposal_scale = proposal_scale;
    c.validate();
    return c;
  }
};

std::string parameter_name(Index j) { return "theta_" + std::to_string(j + 1); }

// ---------------------------------------------------------------------------
// Subcommands

struct FitArgs {
  ModelArgs model;
  std::int64_t max_iterations = 200;
  double tolerance = 1e-8;
  bool no_continuation = false;
};

int run_fit(FitArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
            std::ostream& err) {
  Loaded l = load(a.model);
  FitOptions fo;
  fo.max_iterations = static_cast<int>(a.max_iterations);
  fo.tolerance = a.tolerance;
  fo.continuation = !a.no_continuation;
  const MdpdeResult r = fit(*l.family, l.data, a.model.alpha, fo);
  const std::string hash = opts.hash();

  Table t;
  t.columns = {"alpha", "seed", "config_hash", "quantity", "row", "col", "value"};
  const double alpha = a.model.alpha;
  auto scalar = [&](const char* q, double v) {
    t.add({alpha, std::monostate{}, hash, std::string(q), std::monostate{}, std::monostate{}, v});
  };
  auto matrix = [&](const char* q, const MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        t.add({alpha, std::monostate{}, hash, std::string(q), std::int64_t(i + 1),
               std::int64_t(j + 1), m(i, j)});
  };
  for (Index i = 0; i < r.theta_hat.size(); ++i)
    t.add({alpha, std::monostate{}, hash, std::string("theta_hat"), std::int64_t(i + 1),
           std::monostate{}, r.theta_hat(i)});
  scalar("q_value", r.q_value);
  scalar("iterations", r.iterations);
  scalar("converged", r.converged ? 1.0 : 0.0);
  scalar("gradient_norm", r.gradient_norm);
  if (r.converged) {
    const SandwichMatrices sw = sandwich(*l.family, l.data, r.theta_hat, alpha);
    matrix("psi", sw.psi);
    matrix("omega", sw.omega);
    matrix("psi_hat", sw.psi_hat);
    matrix("asymptotic_covariance", asymptotic_covariance(sw, l.data.size()));
  }
  emit(t, "fit", g, out);
  if (!r.converged) {
    err << "error: fit did not converge: " << r.message << '\n';
    return 2;
  }
  return 0;
}

struct SampleArgs {
  ModelArgs model;
  PriorArgs prior;
  SamplerArgs sampler;
};

AlphaPosteriorChain run_chain(const Loaded& l, const SampleArgs& a, std::ostream& err) {
  const Prior prior = a.prior.build(l.family->parameter_dim(l.data.covariates()));
  AlphaPosteriorChain chain = sample(*l.family, l.data, prior, a.model.alpha, a.sampler.build());
  if (!chain.warning.empty()) err << "warning: " << chain.warning << '\n';
  return chain;
}

int run_sample(SampleArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
               std::ostream& err) {
  const Loaded l = load(a.model);
  const AlphaPosteriorChain chain = run_chain(l, a, err);
  const std::string hash = opts.hash();
  const std::string seed = std::to_string(a.sampler.seed);
  Table t;
  t.columns = {"alpha", "seed", "config_hash", "draw"};
  for (Index j = 0; j < chain.draws.cols(); ++j) t.columns.push_back(parameter_name(j));
  t.columns.push_back("log_post");
  for (Index k = 0; k < chain.size(); ++k) {
    std::vector<Cell> row{a.model.alpha, seed, hash, std::int64_t(k + 1)};
    for (Index j = 0; j < chain.draws.cols(); ++j) row.emplace_back(chain.draws(k, j));
    row.emplace_back(chain.log_post_values(k));
    t.add(std::move(row));
  }
  emit(t, "chain", g, out);
  return 0;
}

struct ErpeArgs {
  SampleArgs base;
  bool laplace = false;
};

int run_erpe(ErpeArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
             std::ostream& err) {
  const Loaded l = load(a.base.model);
  const std::string hash = opts.hash();
  const std::string seed = std::to_string(a.base.sampler.seed);
  const double alpha = a.base.model.alpha;
  Table t;
  t.columns = {"alpha",    "seed",      "config_hash",     "method", "parameter",
               "estimate", "std_error", "acceptance_rate", "note"};
  if (a.laplace) {
    const Prior prior = a.base.prior.build(l.family->parameter_dim(l.data.covariates()));
    const VectorXd est = laplace_expectation(
        *l.family, l.data, prior, [](const VectorXd& th) { return th; }, alpha);
    for (Index j = 0; j < est.size(); ++j)
      t.add({alpha, seed, hash, std::string("laplace"), parameter_name(j), est(j), std::monostate{},
             std::monostate{},
             std::string("leading-order Laplace approximation: the MDPDE, error O(1/n)")});
  } else {
    const AlphaPosteriorChain chain = run_chain(l, a.base, err);
    const PosteriorMean pm = erpe(chain);
    for (Index j = 0; j < pm.mean.size(); ++j)
      t.add({alpha, seed, hash, std::string("mcmc"), parameter_name(j), pm.mean(j),
             pm.std_error(j), chain.acceptance_rate,
             std::string("random-walk Metropolis posterior mean, batch-means standard error")});
  }
  emit(t, "erpe", g, out);
  return 0;
}

struct AreArgs {
  std::vector<double> alphas = standard_are_alphas();
  bool check = false;
};

int run_are(AreArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
            std::ostream& err) {
  check_alphas(a.alphas);
  const std::string hash = opts.hash();
  const auto rows = are_table(a.alphas);
  Table t;
  t.columns = {"alpha",         "seed",         "config_hash", "are_beta", "are_sigma",
               "upsilon_beta", "upsilon_sigma", "zeta"};
  for (const auto& r : rows)
    t.add({r.alpha, std::monostate{}, hash, r.are_beta_percent, r.are_sigma_percent, r.upsilon_beta,
           r.upsilon_sigma, r.zeta_alpha});
  emit(t, "are_table", g, out);
  if (!a.check) return 0;
  int deviations = 0;
  for (const auto& r : rows) {
    const auto& table = published_are_table();
    const auto it = std::find_if(table.begin(), table.end(), [&](const PublishedAre& p) {
      return std::abs(p.alpha - r.alpha) < 1e-12;
    });
    if (it == table.end()) {
      err << "note: no published value for alpha = " << format_double(r.alpha) << '\n';
      continue;
    }
    for (const auto& [got, want, what] :
         {std::tuple{r.are_beta_percent, it->beta, "beta"},
          std::tuple{r.are_sigma_percent, it->sigma, "sigma"}}) {
      if (std::abs(got - want) > 0.01) {
        ++deviations;
        err << "check failed: alpha = " << format_double(r.alpha) << ", ARE(" << what
            << ") = " << format_double(got) << ", published " << format_double(want)
            << '\n';
      }
    }
  }
  if (deviations) return 2;
  err << "check passed\n";
  return 0;
}

struct InfluenceArgs {
  std::uint64_t seed = 0;
  std::int64_t n = 20;
  double beta_g = 5.0;
  double sigma = 1.0;
  double design_mean = 1.0;
  double design_sd = 1.0;
  double prior_mean = 5.0;
  double prior_sd = 1.0;
  std::vector<double> alphas{0.0, 0.1, 0.5, 0.8};
  double t_min = -100.0;
  double t_max = 100.0;
  double t_step = 0.5;
  std::int64_t theta_points = 201;
  double theta_half_width = 0.0;
  std::int64_t draws = 20000;
  double inflation = 1.25;
  double phi2 = 1.0;
  bool surface = false;
};

VectorXd range_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw DomainError("invalid grid range");
  const auto count = static_cast<Index>(std::floor((hi - lo) / step + 1e-9)) + 1;
  VectorXd g(count);
  for (Index k = 0; k < count; ++k) g(k) = lo + step * static_cast<double>(k);
  return g;
}

int run_influence(InfluenceArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
                  std::ostream&) {
  check_alphas(a.alphas);
  if (a.n < 1) throw DomainError("n must be positive");
  if (!(a.prior_sd > 0.0)) throw DomainError("prior-sd must be positive");
  const std::string hash = opts.hash();
  const std::string seed = std::to_string(a.seed);

  Rng rng(derive_seed(a.seed, 0));
  const MatrixXd design = gaussian_design(a.n, 1, a.design_mean, a.design_sd, false, rng);
  const FamilyPtr family = make_family(FamilyKind::LinearKnownSigma, a.sigma);
  const VectorXd theta_g = VectorXd::Constant(1, a.beta_g);
  const Prior prior = Prior::gaussian(VectorXd::Constant(1, a.prior_mean),
                                      MatrixXd::Constant(1, 1, a.prior_sd * a.prior_sd));
  FunctionalPosteriorConfig fc;
  fc.draws = a.draws;
  fc.seed = derive_seed(a.seed, 1);
  fc.inflation = a.inflation;

  const auto count = static_cast<Index>(a.alphas.size());
  std::vector<std::optional<FunctionalPosterior>> posts(a.alphas.size());
  parallel_for(
      count,
      [&](Index k) {
        posts[static_cast<std::size_t>(k)].emplace(family, design,
                                                   TrueDistributionSpec::in_model(theta_g), prior,
                                                   a.alphas[static_cast<std::size_t>(k)], fc);
      },
      g.threads);

  double half = a.theta_half_width;
  if (!(half > 0.0)) {
    for (const auto& p : posts)
      half = std::max(half, 5.0 * std::sqrt(p->proposal_covariance()(0, 0)) / a.inflation);
  }
  const MatrixXd theta_grid = scalar_grid(a.beta_g, half, a.theta_points);
  const VectorXd t_grid = range_grid(a.t_min, a.t_max, a.t_step);

  std::vector<RobustnessReport> reports(a.alphas.size());
  parallel_for(
      count,
      [&](Index k) {
        const auto kk = static_cast<std::size_t>(k);
        reports[kk] = influence_analysis(*posts[kk], t_grid, theta_grid, a.phi2);
      },
      g.threads);

  Table t;
  t.columns = {"alpha", "seed", "config_hash", "quantity", "theta", "t", "value", "std_error"};
  const Cell na = std::monostate{};
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const RobustnessReport& r = reports[k];
    const double alpha = a.alphas[k];
    auto row = [&](const char* q, Cell theta, Cell tv, double value, Cell se) {
      t.add({alpha, seed, hash, std::string(q), std::move(theta), std::move(tv), value,
             std::move(se)});
    };
    for (Index i = 0; i < t_grid.size(); ++i) {
      const double tv = t_grid(i);
      row("if", na, tv, r.if_values(i, 0), r.if_std_error(i, 0));
      if (alpha == 0.0)
        row("if_closed_form", na, tv,
            if_erpe_alpha0_linear(design, a.beta_g, a.sigma, a.prior_sd,
                                  ContaminationScenario::all_directions(tv, a.n)),
            na);
      row("pif_posterior_mean", na, tv, r.pif_surface[static_cast<std::size_t>(i)].posterior_mean,
          r.pif_surface[static_cast<std::size_t>(i)].posterior_mean_se);
      row("gamma", na, tv, r.sensitivity.gamma(i), na);
      row("s", na, tv, r.sensitivity.s(i), na);
    }
    row("gamma_star", na, na, r.sensitivity.gamma_star, na);
    row("s_star", na, na, r.sensitivity.s_star, na);
    row("ess", na, na, r.ess, na);
    if (a.surface) {
      for (Index i = 0; i < t_grid.size(); ++i) {
        const VectorXd& v = r.pif_surface[static_cast<std::size_t>(i)].values;
        for (Index j = 0; j < theta_grid.rows(); ++j)
          row("pif", theta_grid(j, 0), t_grid(i), v(j), na);
      }
    }
  }
  emit(t, "influence", g, out);
  return 0;
}

struct BreakdownArgs {
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.0, 0.5};
  double epsilon = 0.3;
  std::vector<double> magnitudes{1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  std::int64_t n = 50;
  double sigma = 1.0;
  double mu_g = 0.0;
  double prior_mean = 0.0;
  double prior_sd = 10.0;
  std::int64_t draws = 20000;
};

int run_breakdown(BreakdownArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
                  std::ostream&) {
  check_alphas(a.alphas);
  if (!(a.prior_sd > 0.0)) throw DomainError("prior-sd must be positive");
  const std::string hash = opts.hash();
  const std::string seed = std::to_string(a.seed);
  std::vector<std::vector<BreakdownPoint>> curves(a.alphas.size());
  parallel_for(
      static_cast<Index>(a.alphas.size()),
      [&](Index k) {
        BreakdownConfig c;
        c.n = a.n;
        c.sigma = a.sigma;
        c.mu_g = a.mu_g;
        c.alpha = a.alphas[static_cast<std::size_t>(k)];
        c.epsilon = a.epsilon;
        c.magnitudes = a.magnitudes;
        c.prior = Prior::gaussian(VectorXd::Constant(1, a.prior_mean),
                                  MatrixXd::Constant(1, 1, a.prior_sd * a.prior_sd));
        c.sampler.draws = a.draws;
        c.sampler.seed = derive_seed(a.seed, 1);
        curves[static_cast<std::size_t>(k)] = breakdown_experiment(c);
      },
      g.threads);
  Table t;
  t.columns = {"alpha", "seed",      "config_hash", "epsilon",     "magnitude",
               "erpe",  "erpe_shift", "mdpde",      "mdpde_shift", "ess"};
  for (std::size_t k = 0; k < curves.size(); ++k)
    for (const BreakdownPoint& p : curves[k])
      t.add({a.alphas[k], seed, hash, a.epsilon, p.magnitude, p.erpe, p.erpe_shift, p.mdpde,
             p.mdpde_shift, p.ess});
  emit(t, "breakdown", g, out);
  return 0;
}

struct BvmArgs {
  std::uint64_t seed = 0;
  std::vector<std::int64_t> n_grid{25, 100, 400};
  std::int64_t replicates = 3;
  double alpha = 0.3;
  std::string model = "linear";
  double sigma = 1.0;
  std::vector<double> theta_g{5.0};
  std::int64_t covariates = 1;
  bool intercept = false;
  double design_mean = 1.0;
  double design_sd = 1.0;
  std::vector<double> prior_mean{0.0};
  std::vector<double> prior_sd{1.0};
  std::int64_t chain_length = 20000;
  std::int64_t burn_in = 2000;
  std::int64_t thin = 1;
};

int run_bvm(BvmArgs& a, const OptionSet& opts, const Global& g, std::ostream& out,
            std::ostream&) {
  check_alphas({a.alpha});
  const std::string hash = opts.hash();
  SimulationSetup s;
  s.family = make_family(parse_family_kind(a.model), a.sigma);
  const Index p = s.family->parameter_dim(a.covariates);
  s.theta_g = to_vector(broadcast(a.theta_g, p, "theta-g"));
  s.family->check_parameter(s.theta_g, a.covariates);
  s.covariates = a.covariates;
  s.intercept = a.intercept;
  s.design_mean = a.design_mean;
  s.design_sd = a.design_sd;
  const VectorXd sd = to_vector(broadcast(a.prior_sd, p, "prior-sd"));
  s.prior = Prior::gaussian(to_vector(broadcast(a.prior_mean, p, "prior-mean")),
                            sd.array().square().matrix().asDiagonal());
  s.alpha = a.alpha;
  s.sampler.chain_length = a.chain_length;
  s.sampler.burn_in = a.burn_in;
  s.sampler.thinning = a.thin;
  s.sampler.validate();
  std::vector<Index> n_grid(a.n_grid.begin(), a.n_grid.end());
  const auto rows = bvm_experiment(s, n_grid, a.replicates, a.seed, g.threads);
  Table t;
  t.columns = {"alpha",          "seed",   "config_hash", "n",
               "replicate",      "replicate_seed", "tv_psi", "tv_psi_hat",
               "acceptance_rate"};
  const std::string seed = std::to_string(a.seed);
  for (const auto& r : rows)
    t.add({a.alpha, seed, hash, std::int64_t(r.n), std::int64_t(r.replicate + 1),
           std::to_string(r.seed), r.tv_psi, r.tv_psi_hat, r.acceptance_rate});
  emit(t, "bvm", g, out);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust R^(alpha)-posterior inference for independent non-homogeneous models",
               "rpost"};
  app.set_config("--config", "", "INI file; [subcommand] sections, flags override file values");
  app.require_subcommand(1);
  app.fallthrough();
  Global global;
  app.add_option("--format", global.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--output-dir", global.output_dir,
                 std::string("write <subcommand>.<format> here instead of stdout; ") +
                     kOutputDirEnv + " overrides it");
  app.add_option("--threads", global.threads, "worker threads (0: hardware concurrency)");

  FitArgs fit_args;
  OptionSet fit_opts(app.add_subcommand("fit", "minimum DPD estimate and sandwich matrices"));
  fit_args.model.attach(fit_opts);
  fit_opts.add("max-iter", fit_args.max_iterations, "Newton iteration cap");
  fit_opts.add("tolerance", fit_args.tolerance, "gradient tolerance per observation");
  fit_opts.flag("no-continuation", fit_args.no_continuation, "start directly at the target alpha");

  SampleArgs sample_args;
  OptionSet sample_opts(app.add_subcommand("sample", "random-walk Metropolis chain as CSV"));
  sample_args.model.attach(sample_opts);
  sample_args.prior.attach(sample_opts);
  sample_args.sampler.attach(sample_opts);

  ErpeArgs erpe_args;
  OptionSet erpe_opts(app.add_subcommand("erpe", "expected R^(alpha)-posterior estimate"));
  erpe_args.base.model.attach(erpe_opts);
  erpe_args.base.prior.attach(erpe_opts);
  erpe_args.base.sampler.attach(erpe_opts);
  erpe_opts.flag("laplace", erpe_args.laplace, "use the Laplace approximation instead of MCMC");

  AreArgs are_args;
  OptionSet are_opts(
      app.add_subcommand("are-table", "asymptotic relative efficiencies, normal linear model"));
  are_opts.add("alphas", are_args.alphas, "comma-separated alpha values")->delimiter(',');
  are_opts.flag("check", are_args.check, "compare with the published two-decimal values");

  InfluenceArgs inf;
  OptionSet inf_opts(app.add_subcommand(
      "influence", "influence function, PIF and sensitivities, normal linear model"));
  inf_opts.add("seed", inf.seed, "random seed (required)")->required();
  inf_opts.add("n", inf.n, "number of design rows");
  inf_opts.add("beta-g", inf.beta_g, "true regression coefficient");
  inf_opts.add("sigma", inf.sigma, "known scale");
  inf_opts.add("design-mean", inf.design_mean, "mean of the generated covariate");
  inf_opts.add("design-sd", inf.design_sd, "sd of the generated covariate");
  inf_opts.add("prior-mean", inf.prior_mean, "normal prior mean");
  inf_opts.add("prior-sd", inf.prior_sd, "normal prior sd");
  inf_opts.add("alphas", inf.alphas, "comma-separated alpha values")->delimiter(',');
  inf_opts.add("t-min", inf.t_min, "contamination grid start");
  inf_opts.add("t-max", inf.t_max, "contamination grid end");
  inf_opts.add("t-step", inf.t_step, "contamination grid step");
  inf_opts.add("theta-points", inf.theta_points, "theta grid size");
  inf_opts.add("theta-half-width", inf.theta_half_width,
               "theta grid half width around beta-g (0: five posterior sd)");
  inf_opts.add("draws", inf.draws, "importance draws per alpha");
  inf_opts.add("inflation", inf.inflation, "proposal sd relative to the Laplace sd");
  inf_opts.add("phi2", inf.phi2, "phi''(1) of the divergence used for s");
  inf_opts.flag("surface", inf.surface, "also emit the full PIF surface");

  BreakdownArgs bd;
  OptionSet bd_opts(app.add_subcommand("breakdown", "contamination breakdown curves, location model"));
  bd_opts.add("seed", bd.seed, "random seed (required)")->required();
  bd_opts.add("alphas", bd.alphas, "comma-separated alpha values")->delimiter(',');
  bd_opts.add("epsilon", bd.epsilon, "contamination proportion");
  bd_opts.add("magnitudes", bd.magnitudes, "increasing outlier distances")->delimiter(',');
  bd_opts.add("n", bd.n, "number of observations");
  bd_opts.add("sigma", bd.sigma, "known scale");
  bd_opts.add("mu-g", bd.mu_g, "true location");
  bd_opts.add("prior-mean", bd.prior_mean, "normal prior mean");
  bd_opts.add("prior-sd", bd.prior_sd, "normal prior sd");
  bd_opts.add("draws", bd.draws, "importance draws per magnitude");

  BvmArgs bvm;
  OptionSet bvm_opts(app.add_subcommand("bvm", "total-variation distance to the normal limit"));
  bvm_opts.add("seed", bvm.seed, "random seed (required)")->required();
  bvm_opts.add("n-grid", bvm.n_grid, "comma-separated sample sizes")->delimiter(',');
  bvm_opts.add("replicates", bvm.replicates, "replicates per sample size");
  bvm_opts.add("alpha", bvm.alpha, "DPD tuning parameter");
  bvm_opts.add("model", bvm.model, "linear | linear-unknown-sigma | logistic");
  bvm_opts.add("sigma", bvm.sigma, "known scale of the linear model");
  bvm_opts.add("theta-g", bvm.theta_g, "true parameter (one value or one per parameter)")
      ->delimiter(',');
  bvm_opts.add("covariates", bvm.covariates, "design columns");
  bvm_opts.flag("intercept", bvm.intercept, "first design column is ones");
  bvm_opts.add("design-mean", bvm.design_mean, "mean of generated covariates");
  bvm_opts.add("design-sd", bvm.design_sd, "sd of generated covariates");
  bvm_opts.add("prior-mean", bvm.prior_mean, "normal prior mean")->delimiter(',');
  bvm_opts.add("prior-sd", bvm.prior_sd, "normal prior sd")->delimiter(',');
  bvm_opts.add("chain-length", bvm.chain_length, "iterations kept after burn-in");
  bvm_opts.add("burn-in", bvm.burn_in, "discarded initial iterations");
  bvm_opts.add("thin", bvm.thin, "keep every k-th iteration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (fit_opts.app()->parsed()) return run_fit(fit_args, fit_opts, global, out, err);
    if (sample_opts.app()->parsed()) return run_sample(sample_args, sample_opts, global, out, err);
    if (erpe_opts.app()->parsed()) return run_erpe(erpe_args, erpe_opts, global, out, err);
    if (are_opts.app()->parsed()) return run_are(are_args, are_opts, global, out, err);
    if (inf_opts.app()->parsed()) return run_influence(inf, inf_opts, global, out, err);
    if (bd_opts.app()->parsed()) return run_breakdown(bd, bd_opts, global, out, err);
    if (bvm_opts.app()->parsed()) return run_bvm(bvm, bvm_opts, global, out, err);
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const SingularHessian& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rpost::cli
