#include "gppm/loglogistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gppm/errors.hpp"
#include "gppm/rng.hpp"
#include "gppm/stats.hpp"

namespace gppm {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kLogHalfNormalConst = -0.22579135264472743;
constexpr double kLog7 = 1.9459101090932196;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(expm1(g)) for g > 0 without overflow
double log_expm1(double g) { return g > 30.0 ? g : std::log(std::expm1(g)); }

}  // namespace

double loglogistic_logit_hazard(int t, double shape, double scale) {
  if (t < 1) throw ValidationError("loglogistic_hazard: t must be >= 1");
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ValidationError("loglogistic_hazard: shape and scale must be positive");
  if (t == 1) return -shape * std::log(scale);
  // h(t) = (A - B) / (1 + A) with A = (t/s)^k, B = ((t-1)/s)^k; the difference
  // is taken through expm1 so nearby powers at large t keep their precision
  const double log_b = shape * std::log((t - 1.0) / scale);
  const double g = shape * std::log(t / (t - 1.0));
  return log_b + log_expm1(g) - softplus(log_b);
}

double loglogistic_hazard(int t, double shape, double scale, double shift) {
  return sigmoid(loglogistic_logit_hazard(t, shape, scale) + shift);
}

LogLogisticModel::LogLogisticModel(SpendPanel panel, LogLogisticOptions opts)
    : panel_(std::move(panel)), opts_(std::move(opts)) {
  if (opts_.purchase_number && opts_.purchase_number_cap < 2)
    throw ValidationError("loglogistic: purchase_number_cap must be >= 2");
  for (const auto& w : opts_.event_windows)
    if (w.first < 1 || w.second < w.first || w.first > panel_.horizon())
      throw ValidationError("loglogistic: event window outside the horizon");

  const auto all_obs = derive_triples(panel_);
  for (std::size_t i = 0; i < all_obs.size(); ++i) {
    for (std::size_t k = 0; k < all_obs[i].triples.size(); ++k) {
      const auto& tr = all_obs[i].triples[k];
      obs_cust_.push_back(static_cast<int>(i));
      obs_t_.push_back(tr.t);
      obs_r_.push_back(tr.r);
      obs_pn_.push_back(std::min(tr.purchase_number, opts_.purchase_number_cap) - 1);
      obs_y_.push_back(all_obs[i].y[k]);
      n_recency_ = std::max(n_recency_, tr.r);
    }
  }

  LogLogisticLayout& L = layout_;
  int at = 0;
  auto scalar = [&](int& slot, const std::string& name) {
    slot = at++;
    L.names.push_back(name);
  };
  scalar(L.shape, "log_shape");
  scalar(L.scale, "log_scale");
  if (opts_.heterogeneity) scalar(L.sigma_delta, "log_sigma_delta");
  auto block = [&](int& slot, int n, const std::string& stem,
                   const std::vector<std::string>* labels = nullptr) {
    slot = at;
    for (int i = 0; i < n; ++i)
      L.names.push_back(stem + "[" +
                        (labels ? (*labels)[static_cast<std::size_t>(i)]
                                : std::to_string(i + 1)) +
                        "]");
    at += n;
  };
  if (opts_.purchase_number) {
    L.n_beta = opts_.purchase_number_cap - 1;
    std::vector<std::string> labels;
    for (int j = 2; j <= opts_.purchase_number_cap; ++j)
      labels.push_back("pn" + std::to_string(j));
    block(L.beta, L.n_beta, "beta", &labels);
  }
  if (opts_.channel && panel_.channel_levels().size() > 1) {
    L.n_gamma = static_cast<int>(panel_.channel_levels().size()) - 1;
    std::vector<std::string> labels(panel_.channel_levels().begin() + 1,
                                    panel_.channel_levels().end());
    block(L.gamma, L.n_gamma, "gamma", &labels);
  }
  if (!opts_.event_windows.empty()) {
    L.n_window = static_cast<int>(opts_.event_windows.size());
    std::vector<std::string> labels;
    for (const auto& w : opts_.event_windows)
      labels.push_back(std::to_string(w.first) + ".." + std::to_string(w.second));
    block(L.window, L.n_window, "window", &labels);
  }
  if (opts_.heterogeneity) block(L.delta, static_cast<int>(panel_.size()), "delta");
  L.dim = at;
}

LogLogisticParams LogLogisticModel::constrain(const Eigen::VectorXd& u) const {
  if (u.size() != layout_.dim)
    throw ValidationError("loglogistic: parameter vector has wrong dimension");
  const LogLogisticLayout& L = layout_;
  LogLogisticParams p;
  p.shape = std::exp(u[L.shape]);
  p.scale = std::exp(u[L.scale]);
  if (L.beta >= 0) p.beta = u.segment(L.beta, L.n_beta);
  if (L.gamma >= 0) p.gamma = u.segment(L.gamma, L.n_gamma);
  if (L.window >= 0) p.window_effects = u.segment(L.window, L.n_window);
  if (L.delta >= 0) {
    p.sigma_delta = std::exp(u[L.sigma_delta]);
    p.delta = p.sigma_delta * u.segment(L.delta, static_cast<int>(panel_.size()));
  }
  return p;
}

double LogLogisticModel::log_posterior(const Eigen::VectorXd& u) const {
  return eval(u, nullptr);
}

double LogLogisticModel::log_posterior_grad(const Eigen::VectorXd& u,
                                            Eigen::VectorXd& grad) const {
  grad.setZero(layout_.dim);
  const double lp = eval(u, &grad);
  if (!grad.allFinite()) throw NumericalError("loglogistic: non-finite gradient");
  return lp;
}

double LogLogisticModel::eval(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
  if (u.size() != layout_.dim)
    throw ValidationError("loglogistic: parameter vector has wrong dimension");
  const LogLogisticLayout& L = layout_;
  double lp = 0.0;

  const double shape = std::exp(u[L.shape]);
  // priors: log shape standard normal, log scale centered on a weekly span
  lp += -0.5 * u[L.shape] * u[L.shape] - 0.5 * kLog2Pi;
  if (grad) (*grad)[L.shape] += -u[L.shape];
  {
    const double z = u[L.scale] - kLog7;
    lp += -0.5 * z * z - 0.5 * kLog2Pi;
    if (grad) (*grad)[L.scale] += -z;
  }
  double sigma_delta = 0.0;
  if (L.sigma_delta >= 0) {
    sigma_delta = std::exp(u[L.sigma_delta]);
    lp += kLogHalfNormalConst + u[L.sigma_delta] - 0.5 * sigma_delta * sigma_delta;
    if (grad) (*grad)[L.sigma_delta] += 1.0 - sigma_delta * sigma_delta;
  }
  auto coef_prior = [&](int at, int n) {
    if (at < 0) return;
    const auto b = u.segment(at, n);
    lp += -b.squaredNorm() / 8.0 - n * (std::log(2.0) + 0.5 * kLog2Pi);
    if (grad) grad->segment(at, n) -= b / 4.0;
  };
  coef_prior(L.beta, L.n_beta);
  coef_prior(L.gamma, L.n_gamma);
  coef_prior(L.window, L.n_window);
  if (L.delta >= 0) {
    const auto z = u.segment(L.delta, static_cast<int>(panel_.size()));
    lp += -0.5 * z.squaredNorm() -
          0.5 * static_cast<double>(panel_.size()) * kLog2Pi;
    if (grad) grad->segment(L.delta, static_cast<int>(panel_.size())) -= z;
  }
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();

  // baseline logit hazard and its shape/scale sensitivities per recency value
  Eigen::VectorXd base(n_recency_), d_shape(n_recency_), d_scale(n_recency_);
  const double log_scale = u[L.scale];
  for (int rec = 1; rec <= n_recency_; ++rec) {
    const int i = rec - 1;
    if (rec == 1) {
      base[i] = -shape * log_scale;
      d_shape[i] = -shape * log_scale;
      d_scale[i] = -shape;
    } else {
      const double log_b = shape * (std::log(rec - 1.0) - log_scale);
      const double g = shape * std::log(static_cast<double>(rec) / (rec - 1.0));
      base[i] = log_b + log_expm1(g) - softplus(log_b);
      const double sig_b = sigmoid(log_b);
      // d/d(log shape): both powers scale with shape, as does the gap term
      d_shape[i] = shape * (std::log(rec - 1.0) - log_scale) * (1.0 - sig_b) +
                   g / (1.0 - std::exp(-g));
      d_scale[i] = -shape * (1.0 - sig_b);
    }
  }
  if (!base.allFinite()) return -std::numeric_limits<double>::infinity();

  // calendar-day window lookup
  std::vector<int> day_window(static_cast<std::size_t>(panel_.horizon()) + 1, -1);
  for (int j = 0; j < L.n_window; ++j) {
    const auto& w = opts_.event_windows[static_cast<std::size_t>(j)];
    for (int t = w.first; t <= std::min(w.second, panel_.horizon()); ++t)
      day_window[static_cast<std::size_t>(t)] = j;
  }

  Eigen::VectorXd wc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(panel_.size()));
  Eigen::VectorXd wrec = Eigen::VectorXd::Zero(n_recency_);
  double loglik = 0.0;
  for (std::size_t k = 0; k < obs_t_.size(); ++k) {
    const int rec = obs_r_[k];
    double eta = base[rec - 1];
    const int pn_idx = obs_pn_[k];
    if (L.beta >= 0 && pn_idx > 0) eta += u[L.beta + pn_idx - 1];
    if (L.gamma >= 0) {
      const int ch = panel_.channel_index(static_cast<std::size_t>(obs_cust_[k]));
      if (ch > 0) eta += u[L.gamma + ch - 1];
    }
    const int win = L.window >= 0 ? day_window[static_cast<std::size_t>(obs_t_[k])] : -1;
    if (win >= 0) eta += u[L.window + win];
    if (L.delta >= 0) eta += sigma_delta * u[L.delta + obs_cust_[k]];

    loglik += obs_y_[k] ? -softplus(-eta) : -softplus(eta);
    if (grad) {
      const double w = static_cast<double>(obs_y_[k]) - sigmoid(eta);
      wrec[rec - 1] += w;
      wc[obs_cust_[k]] += w;
      if (L.beta >= 0 && pn_idx > 0) (*grad)[L.beta + pn_idx - 1] += w;
      if (win >= 0) (*grad)[L.window + win] += w;
    }
  }
  lp += loglik;
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  if (!grad) return lp;

  (*grad)[L.shape] += wrec.dot(d_shape);
  (*grad)[L.scale] += wrec.dot(d_scale);
  double acc_sd = 0.0;
  for (std::size_t i = 0; i < panel_.size(); ++i) {
    const double wci = wc[static_cast<Eigen::Index>(i)];
    if (wci == 0.0) continue;
    if (L.gamma >= 0) {
      const int ch = panel_.channel_index(i);
      if (ch > 0) (*grad)[L.gamma + ch - 1] += wci;
    }
    if (L.delta >= 0) {
      (*grad)[L.delta + static_cast<int>(i)] += sigma_delta * wci;
      acc_sd += wci * u[L.delta + static_cast<int>(i)];
    }
  }
  if (L.sigma_delta >= 0) (*grad)[L.sigma_delta] += sigma_delta * acc_sd;
  return lp;
}

LogLogisticFit loglogistic_fit(const SpendPanel& panel, const LogLogisticOptions& opts,
                               const HmcOptions& hmc) {
  LogLogisticModel model(panel, opts);
  HmcTarget target;
  target.dim = model.dim();
  target.logp_grad = [&model](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    return model.log_posterior_grad(u, g);
  };
  LogLogisticFit fit;
  fit.draws = hmc_sample(target, hmc, model.param_names());
  fit.layout = model.layout();
  Eigen::VectorXd med(model.dim());
  for (int i = 0; i < model.dim(); ++i) med[i] = median(fit.draws.pooled(i));
  fit.median = model.constrain(med);
  return fit;
}

std::vector<double> loglogistic_daily_forecast(const LogLogisticParams& p,
                                               const LogLogisticOptions& opts,
                                               const SpendPanel& panel, int horizon,
                                               int replications, std::uint64_t seed) {
  if (replications < 1)
    throw ValidationError("loglogistic_daily_forecast: need replications");
  if (horizon < panel.horizon())
    throw ValidationError("loglogistic_daily_forecast: horizon shorter than the panel");
  const bool use_delta = opts.heterogeneity;
  if (use_delta && p.delta.size() != static_cast<Eigen::Index>(panel.size()))
    throw ValidationError("loglogistic_daily_forecast: deltas do not match the panel");

  // same lookup rule as the likelihood: the last window containing a day wins
  std::vector<int> day_window(static_cast<std::size_t>(horizon) + 1, -1);
  for (std::size_t j = 0; j < opts.event_windows.size(); ++j) {
    const auto& w = opts.event_windows[j];
    for (int t = w.first; t <= std::min(w.second, horizon); ++t)
      day_window[static_cast<std::size_t>(t)] = static_cast<int>(j);
  }

  std::vector<double> counts(static_cast<std::size_t>(horizon), 0.0);
  for (const auto& c : panel.customers())
    counts[static_cast<std::size_t>(c.first_spend_day) - 1] += 1.0;

  std::vector<double> repeats(static_cast<std::size_t>(horizon), 0.0);
  for (int rep = 0; rep < replications; ++rep) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(rep));
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const auto& c = panel.customers()[i];
      const int ch = panel.channel_index(i);
      int last = c.first_spend_day;
      int n_spends = 1;
      for (int t = c.first_spend_day + 1; t <= horizon; ++t) {
        const int pn = std::min(n_spends, opts.purchase_number_cap);
        double eta = loglogistic_logit_hazard(t - last, p.shape, p.scale);
        if (pn > 1 && p.beta.size() > 0) eta += p.beta[pn - 2];
        if (ch > 0 && p.gamma.size() > 0) eta += p.gamma[ch - 1];
        const int win = day_window[static_cast<std::size_t>(t)];
        if (win >= 0 && p.window_effects.size() > 0) eta += p.window_effects[win];
        if (use_delta) eta += p.delta[static_cast<Eigen::Index>(i)];
        if (rng.uniform() < sigmoid(eta)) {
          repeats[static_cast<std::size_t>(t) - 1] += 1.0;
          last = t;
          ++n_spends;
        }
      }
    }
  }
  for (std::size_t d = 0; d < counts.size(); ++d)
    counts[d] += repeats[d] / static_cast<double>(replications);
  return counts;
}

}  // namespace gppm
