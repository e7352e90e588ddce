#include "gppm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gppm/errors.hpp"
#include "gppm/rng.hpp"

namespace gppm {

std::vector<Eigen::VectorXd> PosteriorDraws::coordinate(int i) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.col(i));
  return out;
}

Eigen::VectorXd PosteriorDraws::pooled(int i) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(chains.size()) * draws_per_chain());
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    out.segment(at, c.rows()) = c.col(i);
    at += c.rows();
  }
  return out;
}

namespace {

struct ChainState {
  Eigen::VectorXd q;
  double lp = 0.0;
  Eigen::VectorXd grad;
};

struct StepResult {
  double alpha = 0.0;  // Metropolis acceptance probability
  bool divergent = false;
};

// Dual averaging of log step size toward a target acceptance rate
// (Hoffman & Gelman 2014, Algorithm 5 constants).
struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int t = 0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  void reset(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    t = 0;
  }
  void update(double alpha, double target) {
    ++t;
    const double td = static_cast<double>(t);
    h_bar += (target - alpha - h_bar) / (td + kT0);
    log_eps = mu - std::sqrt(td) / kGamma * h_bar;
    const double w = std::pow(td, -kKappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
};

StepResult hmc_step(const HmcTarget& target, ChainState& state, double eps,
                    const Eigen::VectorXd& inv_mass, int max_leapfrog, Rng& rng) {
  const int d = target.dim;
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) p[i] = rng.normal() / std::sqrt(inv_mass[i]);
  const double h0 = -state.lp + 0.5 * p.cwiseAbs2().dot(inv_mass);

  const int steps = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(max_leapfrog)));
  Eigen::VectorXd q = state.q;
  Eigen::VectorXd g = state.grad;
  double lp = state.lp;
  StepResult res;
  try {
    p += 0.5 * eps * g;
    for (int l = 0; l < steps; ++l) {
      q += eps * inv_mass.cwiseProduct(p);
      lp = target.logp_grad(q, g);
      if (!std::isfinite(lp) || !g.allFinite())
        throw NumericalError("hmc: non-finite density inside trajectory");
      if (l + 1 < steps) p += eps * g;
    }
    p += 0.5 * eps * g;
  } catch (const NumericalError&) {
    res.divergent = true;
    return res;
  }

  const double h1 = -lp + 0.5 * p.cwiseAbs2().dot(inv_mass);
  const double dh = h1 - h0;
  if (!std::isfinite(dh) || std::abs(dh) > 1000.0) {
    res.divergent = true;
    return res;
  }
  res.alpha = std::min(1.0, std::exp(-dh));
  if (rng.uniform() < res.alpha) {
    state.q = std::move(q);
    state.lp = lp;
    state.grad = std::move(g);
  }
  return res;
}

ChainState initialize_chain(const HmcTarget& target, double radius, Rng& rng) {
  ChainState s;
  s.q.resize(target.dim);
  s.grad.resize(target.dim);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (int i = 0; i < target.dim; ++i) s.q[i] = radius * (2.0 * rng.uniform() - 1.0);
    try {
      s.lp = target.logp_grad(s.q, s.grad);
    } catch (const NumericalError&) {
      continue;
    }
    if (std::isfinite(s.lp) && s.grad.allFinite()) return s;
  }
  throw NumericalError("hmc: no finite starting point after 100 attempts");
}

}  // namespace

PosteriorDraws hmc_sample(const HmcTarget& target, const HmcOptions& opts,
                          std::vector<std::string> names) {
  if (target.dim < 1 || !target.logp_grad)
    throw ValidationError("hmc: target must provide a dimension and a gradient");
  if (opts.chains < 1 || opts.iterations < 1)
    throw ValidationError("hmc: chains and iterations must be positive");
  if (opts.warmup > 0 && opts.warmup < 100)
    throw ValidationError("hmc: warmup must be 0 or at least 100");
  if (opts.max_leapfrog < 1) throw ValidationError("hmc: max_leapfrog must be >= 1");
  if (!(opts.initial_step_size > 0.0))
    throw ValidationError("hmc: initial_step_size must be positive");
  if (!(opts.target_accept > 0.0 && opts.target_accept < 1.0))
    throw ValidationError("hmc: target_accept must lie in (0, 1)");
  if (!names.empty() && static_cast<int>(names.size()) != target.dim)
    throw ValidationError("hmc: names/dimension mismatch");
  if (names.empty())
    for (int i = 0; i < target.dim; ++i) names.push_back("theta[" + std::to_string(i + 1) + "]");

  PosteriorDraws out;
  out.names = std::move(names);
  out.seed = opts.seed;

  for (int chain = 0; chain < opts.chains; ++chain) {
    Rng rng = Rng::stream(opts.seed, static_cast<std::uint64_t>(chain));
    ChainState state = initialize_chain(target, opts.init_radius, rng);

    Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(target.dim);
    double eps = opts.initial_step_size;
    DualAveraging da;
    da.reset(eps);

    const int W = opts.warmup;
    const int mass_begin = static_cast<int>(0.5 * W);
    const int mass_end = static_cast<int>(0.9 * W);  // exclusive window bound
    Eigen::MatrixXd window(std::max(0, mass_end - mass_begin), target.dim);

    for (int it = 0; it < W; ++it) {
      if (opts.adapt_mass && it == mass_end && mass_end > mass_begin + 1) {
        const int n = mass_end - mass_begin;
        const Eigen::RowVectorXd mean = window.colwise().mean();
        for (int i = 0; i < target.dim; ++i) {
          const double v =
              (window.col(i).array() - mean[i]).square().sum() / static_cast<double>(n - 1);
          // shrink toward a small scale, as a regularized variance estimate
          inv_mass[i] = v * n / (n + 5.0) + 1e-3 * 5.0 / (n + 5.0);
        }
        da.reset(std::exp(da.log_eps_bar));  // re-adapt the step under the new metric
      }
      eps = std::exp(da.log_eps);
      const StepResult r =
          hmc_step(target, state, eps, inv_mass, opts.max_leapfrog, rng);
      da.update(r.alpha, opts.target_accept);
      if (opts.adapt_mass && it >= mass_begin && it < mass_end)
        window.row(it - mass_begin) = state.q;
    }
    if (W > 0) eps = std::exp(da.log_eps_bar);

    Eigen::MatrixXd draws(opts.iterations, target.dim);
    ChainStats stats;
    stats.step_size = eps;
    stats.inv_mass = inv_mass;
    double alpha_sum = 0.0;
    for (int it = 0; it < opts.iterations; ++it) {
      const StepResult r =
          hmc_step(target, state, eps, inv_mass, opts.max_leapfrog, rng);
      alpha_sum += r.alpha;
      if (r.divergent) ++stats.divergences;
      draws.row(it) = state.q;
    }
    stats.accept_rate = alpha_sum / opts.iterations;
    if (4 * stats.divergences > opts.iterations)
      throw NumericalError("hmc: chain " + std::to_string(chain) +
                           " diverged on more than a quarter of its iterations");
    out.chains.push_back(std::move(draws));
    out.stats.push_back(std::move(stats));
  }
  return out;
}

namespace {

void check_chain_shapes(const std::vector<Eigen::VectorXd>& chains, int min_len) {
  if (chains.size() < 2)
    throw ValidationError("diagnostics: at least two chains are required");
  for (const auto& c : chains)
    if (c.size() != chains[0].size())
      throw ValidationError("diagnostics: chains must share a common length");
  if (chains[0].size() < min_len)
    throw ValidationError("diagnostics: chains are too short");
}

}  // namespace

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  check_chain_shapes(chains, 4);
  const Eigen::Index half = chains[0].size() / 2;
  std::vector<Eigen::VectorXd> sub;
  for (const auto& c : chains) {
    sub.push_back(c.head(half));
    sub.push_back(c.tail(half));
  }
  const double n = static_cast<double>(half);
  const double m = static_cast<double>(sub.size());
  Eigen::VectorXd means(sub.size()), vars(sub.size());
  for (std::size_t j = 0; j < sub.size(); ++j) {
    means[static_cast<Eigen::Index>(j)] = sub[j].mean();
    vars[static_cast<Eigen::Index>(j)] =
        (sub[j].array() - means[static_cast<Eigen::Index>(j)]).square().sum() / (n - 1.0);
  }
  const double w = vars.mean();
  const double grand = means.mean();
  const double b = n * (means.array() - grand).square().sum() / (m - 1.0);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double ess(const std::vector<Eigen::VectorXd>& chains) {
  check_chain_shapes(chains, 4);
  const Eigen::Index n = chains[0].size();
  const double nd = static_cast<double>(n);
  const double m = static_cast<double>(chains.size());

  std::vector<Eigen::VectorXd> centered;
  Eigen::VectorXd chain_means(static_cast<Eigen::Index>(chains.size()));
  for (std::size_t j = 0; j < chains.size(); ++j) {
    const double mu = chains[j].mean();
    chain_means[static_cast<Eigen::Index>(j)] = mu;
    centered.push_back(chains[j].array() - mu);
  }
  // biased (divide-by-n) autocovariance averaged across chains
  auto mean_acov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (const auto& xc : centered)
      s += xc.head(n - lag).dot(xc.tail(n - lag)) / nd;
    return s / m;
  };

  const double w = mean_acov(0) * nd / (nd - 1.0);
  double b_over_n = 0.0;
  if (chains.size() > 1) {
    const double grand = chain_means.mean();
    b_over_n = (chain_means.array() - grand).square().sum() / (m - 1.0);
  }
  const double var_plus = w * (nd - 1.0) / nd + b_over_n;

  auto rho = [&](Eigen::Index lag) { return 1.0 - (w - mean_acov(lag)) / var_plus; };

  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev);
    tau += 2.0 * pair;
    prev = pair;
  }
  return m * nd / tau;
}

}  // namespace gppm
