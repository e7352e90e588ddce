#include "gppm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gppm/errors.hpp"

namespace gppm {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
// log sqrt(2/pi), the half-normal normalizing constant
constexpr double kLogHalfNormalConst = -0.22579135264472743;
constexpr double kJitterFloor = kGpJitterFloor;
constexpr double kLog7 = 1.9459101090932196;
constexpr double kLog14 = 2.6390573296152584;
constexpr double kPi = 3.141592653589793;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log density terms on the unconstrained scale, Jacobians included

// x = exp(u), x ~ half-normal(0, 1)
double half_normal_lp(double u, double x, double* g) {
  if (g) *g += 1.0 - x * x;
  return kLogHalfNormalConst + u - 0.5 * x * x;
}

// u ~ normal(m, sd) (equivalently exp(u) log-normal)
double normal_lp(double u, double m, double sd, double* g) {
  const double zq = (u - m) / sd;
  if (g) *g += -zq / sd;
  return -0.5 * zq * zq - std::log(sd) - 0.5 * kLog2Pi;
}

Eigen::VectorXd iota_grid(int n) {
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g[i] = static_cast<double>(i + 1);
  return g;
}

}  // namespace

ModelSpec ModelSpec::reduced() {
  ModelSpec s;
  s.long_run = s.short_run = s.cyclic = false;
  return s;
}

ModelSpec ModelSpec::reduced_cyclic() {
  ModelSpec s;
  s.long_run = s.short_run = false;
  return s;
}

void ModelSpec::validate() const {
  if (purchase_number && purchase_number_cap < 2)
    throw ValidationError("model spec: purchase_number_cap must be >= 2");
  if (cyclic && (cyclic_period < 2 || cyclic_period != std::floor(cyclic_period)))
    throw ValidationError("model spec: cyclic_period must be an integer >= 2");
}

GppmLayout build_layout(const ModelSpec& spec, const ModelDims& dims) {
  spec.validate();
  if (dims.horizon < 1) throw ValidationError("layout: horizon must be >= 1");
  GppmLayout L;
  int at = 0;
  auto scalar = [&](int& slot, const std::string& name) {
    slot = at++;
    L.names.push_back(name);
  };
  scalar(L.mu, "mu");
  if (spec.long_run) {
    scalar(L.eta_long, "log_eta_long");
    scalar(L.gap, "log_rho_gap");
  }
  if (spec.short_run) {
    scalar(L.eta_short, "log_eta_short");
    scalar(L.rho_short, "log_rho_short");
  }
  if (spec.cyclic) {
    scalar(L.eta_cyclic, "log_eta_cyclic");
    scalar(L.rho_cyclic, "log_rho_cyclic");
  }
  if (spec.recency) {
    scalar(L.eta_recency, "log_eta_recency");
    scalar(L.rho_recency, "log_rho_recency");
    scalar(L.l1_recency, "log_lambda1_recency");
    scalar(L.l2_recency, "log_lambda2_recency");
  }
  if (spec.lifetime) {
    scalar(L.eta_lifetime, "log_eta_lifetime");
    scalar(L.rho_lifetime, "log_rho_lifetime");
    scalar(L.l1_lifetime, "log_lambda1_lifetime");
    scalar(L.l2_lifetime, "log_lambda2_lifetime");
  }
  if (spec.heterogeneity) scalar(L.sigma_delta, "log_sigma_delta");
  if (spec.day_effects) {
    scalar(L.sigma_fs, "log_sigma_first_spend");
    scalar(L.sigma_inst, "log_sigma_install");
  }
  L.scalars = at;

  auto block = [&](int& slot, int n, const std::string& stem,
                   const std::vector<std::string>* labels = nullptr) {
    slot = at;
    for (int i = 0; i < n; ++i) {
      if (labels)
        L.names.push_back(stem + "[" + (*labels)[static_cast<std::size_t>(i)] + "]");
      else
        L.names.push_back(stem + "[" + std::to_string(i + 1) + "]");
    }
    at += n;
  };
  if (spec.long_run) block(L.z_long, dims.horizon, "z_long");
  if (spec.short_run) block(L.z_short, dims.horizon, "z_short");
  if (spec.cyclic) {
    L.n_cyclic = static_cast<int>(spec.cyclic_period);
    block(L.z_cyclic, L.n_cyclic, "z_cyclic");
  }
  if (spec.recency) block(L.z_recency, dims.n_recency, "z_recency");
  if (spec.lifetime) block(L.z_lifetime, dims.n_lifetime, "z_lifetime");
  if (spec.purchase_number) {
    L.n_beta = spec.purchase_number_cap - 1;
    std::vector<std::string> labels;
    for (int j = 2; j <= spec.purchase_number_cap; ++j)
      labels.push_back("pn" + std::to_string(j));
    block(L.beta, L.n_beta, "beta", &labels);
  }
  if (spec.channel && dims.channel_levels.size() > 1) {
    L.n_gamma = static_cast<int>(dims.channel_levels.size()) - 1;
    std::vector<std::string> labels(dims.channel_levels.begin() + 1, dims.channel_levels.end());
    block(L.gamma, L.n_gamma, "gamma", &labels);
  }
  if (spec.heterogeneity) block(L.delta, dims.n_customers, "delta");
  if (spec.day_effects) {
    std::vector<std::string> fs_labels, inst_labels;
    for (int dday : dims.first_spend_days) fs_labels.push_back("day" + std::to_string(dday));
    for (int dday : dims.install_days) inst_labels.push_back("day" + std::to_string(dday));
    block(L.fs, static_cast<int>(dims.first_spend_days.size()), "first_spend_effect",
          &fs_labels);
    block(L.inst, static_cast<int>(dims.install_days.size()), "install_effect", &inst_labels);
  }
  L.dim = at;
  return L;
}

GppmParams apply_identification(GppmParams p) {
  auto pin = [](GppmComponent& c) {
    if (!c.active || c.gp.values.size() == 0) return;
    const double a = c.gp.values[0];
    c.gp.values.array() -= a;
    c.anchor += a;
  };
  pin(p.short_run);
  pin(p.cyclic);
  pin(p.recency);
  pin(p.lifetime);
  p.identified = true;
  return p;
}

GppmModel::GppmModel(SpendPanel panel, ModelSpec spec)
    : panel_(std::move(panel)), spec_(spec) {
  spec_.validate();
  if (panel_.size() == 0) throw ValidationError("model: panel has no customers");
  const auto all_obs = derive_triples(panel_);

  int max_r = 1, max_l = 1;
  for (std::size_t i = 0; i < all_obs.size(); ++i) {
    const auto& o = all_obs[i];
    for (std::size_t k = 0; k < o.triples.size(); ++k) {
      const auto& tr = o.triples[k];
      obs_cust_.push_back(static_cast<int>(i));
      obs_t_.push_back(tr.t);
      obs_r_.push_back(tr.r);
      obs_l_.push_back(tr.l);
      obs_pn_.push_back(std::min(tr.purchase_number, spec_.purchase_number_cap) - 1);
      obs_y_.push_back(o.y[k]);
      max_r = std::max(max_r, tr.r);
      max_l = std::max(max_l, tr.l);
    }
  }

  dims_.horizon = panel_.horizon();
  dims_.n_recency = max_r;
  dims_.n_lifetime = max_l;
  dims_.n_customers = static_cast<int>(panel_.size());
  dims_.channel_levels = panel_.channel_levels();
  std::set<int> fs_days, inst_days;
  for (const auto& c : panel_.customers()) {
    fs_days.insert(c.first_spend_day);
    inst_days.insert(c.install_day);
  }
  dims_.first_spend_days.assign(fs_days.begin(), fs_days.end());
  dims_.install_days.assign(inst_days.begin(), inst_days.end());

  fs_idx_.reserve(panel_.size());
  inst_idx_.reserve(panel_.size());
  for (const auto& c : panel_.customers()) {
    fs_idx_.push_back(static_cast<int>(
        std::lower_bound(dims_.first_spend_days.begin(), dims_.first_spend_days.end(),
                         c.first_spend_day) -
        dims_.first_spend_days.begin()));
    inst_idx_.push_back(static_cast<int>(
        std::lower_bound(dims_.install_days.begin(), dims_.install_days.end(), c.install_day) -
        dims_.install_days.begin()));
  }

  layout_ = build_layout(spec_, dims_);
}

void GppmModel::check_dim(const Eigen::VectorXd& u) const {
  if (u.size() != layout_.dim)
    throw ValidationError("model: parameter vector has wrong dimension");
}

GppmParams constrain_point(const ModelSpec& spec, const ModelDims& dims, const GppmLayout& L,
                           const Eigen::VectorXd& u) {
  if (u.size() != L.dim)
    throw ValidationError("model: parameter vector has wrong dimension");
  GppmParams p;
  p.mu = u[L.mu];

  const double rho_short = spec.short_run ? std::exp(u[L.rho_short]) : 0.0;

  auto make = [&](int eta_at, double rho, int z_at, int n, const MeanFunction& mean,
                  bool cyclic_kernel) {
    GppmComponent c;
    c.active = true;
    const double eta = std::exp(u[eta_at]);
    c.gp.grid = iota_grid(n);
    c.gp.mean = mean;
    c.gp.kernel = cyclic_kernel
                      ? KernelSpec::cyclic(eta, rho, static_cast<double>(spec.cyclic_period))
                      : KernelSpec::se(eta, rho);
    WhitenedComponent w;
    w.grid = c.gp.grid;
    w.z = u.segment(z_at, n);
    w.mean = mean;
    w.kernel = c.gp.kernel;
    w.jitter = kJitterFloor * eta * eta;
    c.gp.values = unwhiten(w).values;
    return c;
  };

  if (spec.long_run) {
    const double rho_long = rho_short + std::exp(u[L.gap]);
    p.long_run = make(L.eta_long, spec.short_run ? rho_long : std::exp(u[L.gap]), L.z_long,
                      dims.horizon, MeanFunction::constant(p.mu), false);
  }
  if (spec.short_run)
    p.short_run =
        make(L.eta_short, rho_short, L.z_short, dims.horizon, MeanFunction::zero(), false);
  if (spec.cyclic)
    p.cyclic = make(L.eta_cyclic, std::exp(u[L.rho_cyclic]), L.z_cyclic, L.n_cyclic,
                    MeanFunction::zero(), true);
  if (spec.recency)
    p.recency = make(L.eta_recency, std::exp(u[L.rho_recency]), L.z_recency, dims.n_recency,
                     MeanFunction::power_decay(std::exp(u[L.l1_recency]),
                                               std::exp(u[L.l2_recency])),
                     false);
  if (spec.lifetime)
    p.lifetime = make(L.eta_lifetime, std::exp(u[L.rho_lifetime]), L.z_lifetime,
                      dims.n_lifetime,
                      MeanFunction::power_decay(std::exp(u[L.l1_lifetime]),
                                                std::exp(u[L.l2_lifetime])),
                      false);

  if (L.beta >= 0) p.beta = u.segment(L.beta, L.n_beta);
  if (L.gamma >= 0) p.gamma = u.segment(L.gamma, L.n_gamma);
  if (spec.heterogeneity) {
    p.sigma_delta = std::exp(u[L.sigma_delta]);
    p.delta = p.sigma_delta * u.segment(L.delta, dims.n_customers);
  } else {
    p.delta = Eigen::VectorXd::Zero(dims.n_customers);
  }
  if (spec.day_effects) {
    p.sigma_first_spend = std::exp(u[L.sigma_fs]);
    p.sigma_install = std::exp(u[L.sigma_inst]);
    p.first_spend_effects =
        p.sigma_first_spend * u.segment(L.fs, static_cast<int>(dims.first_spend_days.size()));
    p.install_effects =
        p.sigma_install * u.segment(L.inst, static_cast<int>(dims.install_days.size()));
  }
  return p;
}

GppmParams GppmModel::constrain_raw(const Eigen::VectorXd& u) const {
  check_dim(u);
  return constrain_point(spec_, dims_, layout_, u);
}

GppmParams GppmModel::constrain(const Eigen::VectorXd& u) const {
  return apply_identification(constrain_raw(u));
}

double GppmModel::latent_propensity(const GppmParams& p, std::size_t customer,
                                    const ObservationTriple& tr) const {
  double eta = p.mu;
  if (p.long_run.active) eta += p.long_run.gp.values[tr.t - 1] - p.mu;
  // the long-run curve already carries mu as its level; adding mu separately
  // and removing it here keeps the expression valid when long_run is absent
  if (p.short_run.active) eta += p.short_run.gp.values[tr.t - 1];
  if (p.cyclic.active)
    eta += p.cyclic.gp.values[(tr.t - 1) % static_cast<int>(p.cyclic.gp.values.size())];
  if (p.recency.active) eta += p.recency.gp.values[tr.r - 1];
  if (p.lifetime.active) eta += p.lifetime.gp.values[tr.l - 1];
  if (p.beta.size() > 0) {
    const int pn_idx = std::min(tr.purchase_number, spec_.purchase_number_cap) - 1;
    if (pn_idx > 0) eta += p.beta[pn_idx - 1];
  }
  if (p.gamma.size() > 0) {
    const int ch = panel_.channel_index(customer);
    if (ch > 0) eta += p.gamma[ch - 1];
  }
  if (p.delta.size() > 0) eta += p.delta[static_cast<Eigen::Index>(customer)];
  if (p.first_spend_effects.size() > 0) eta += p.first_spend_effects[fs_idx_[customer]];
  if (p.install_effects.size() > 0) eta += p.install_effects[inst_idx_[customer]];
  return eta;
}

double GppmModel::log_likelihood(const GppmParams& p) const {
  if (!p.identified)
    throw ValidationError("log_likelihood: parameters must be identified first");
  double ll = 0.0;
  const auto obs = derive_triples(panel_);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t k = 0; k < obs[i].triples.size(); ++k) {
      const double eta = latent_propensity(p, i, obs[i].triples[k]);
      ll += obs[i].y[k] ? -softplus(-eta) : -softplus(eta);
    }
  }
  return ll;
}

double GppmModel::log_prior(const Eigen::VectorXd& u) const {
  return eval(u, nullptr, false);
}

double GppmModel::log_posterior(const Eigen::VectorXd& u) const { return eval(u, nullptr); }

double GppmModel::log_posterior_grad(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  grad.setZero(layout_.dim);
  const double lp = eval(u, &grad);
  if (!grad.allFinite())
    throw NumericalError("log_posterior_grad: non-finite gradient");
  return lp;
}

double GppmModel::eval(const Eigen::VectorXd& u, Eigen::VectorXd* grad,
                       bool include_likelihood) const {
  check_dim(u);
  const GppmLayout& L = layout_;
  if (grad) grad->setZero(L.dim);
  double lp = 0.0;

  // ---- scalar transforms and priors ----
  const double mu = u[L.mu];
  lp += -mu * mu / 8.0 - std::log(2.0) - 0.5 * kLog2Pi;
  if (grad) (*grad)[L.mu] += -mu / 4.0;

  struct Comp {
    bool on = false;
    bool identified = true;
    int n = 0;
    int z_at = -1, eta_at = -1;
    double eta = 0.0, rho = 0.0;
    // mean function state (recency/lifetime)
    bool has_mean = false;
    double l1 = 0.0, l2 = 0.0;
    int l1_at = -1, l2_at = -1;
    bool cyclic = false;
  };
  Comp cl, cs, cw, cr, cf;

  double rho_short = 0.0, gap = 0.0;
  if (spec_.short_run) rho_short = std::exp(u[L.rho_short]);
  if (spec_.long_run) gap = std::exp(u[L.gap]);

  if (spec_.long_run) {
    cl.on = true;
    cl.identified = false;
    cl.n = dims_.horizon;
    cl.z_at = L.z_long;
    cl.eta_at = L.eta_long;
    cl.eta = std::exp(u[L.eta_long]);
    cl.rho = spec_.short_run ? rho_short + gap : gap;
    lp += half_normal_lp(u[L.eta_long], cl.eta, grad ? &(*grad)[L.eta_long] : nullptr);
    lp += normal_lp(u[L.gap], kLog14, 1.0, grad ? &(*grad)[L.gap] : nullptr);
  }
  if (spec_.short_run) {
    cs.on = true;
    cs.n = dims_.horizon;
    cs.z_at = L.z_short;
    cs.eta_at = L.eta_short;
    cs.eta = std::exp(u[L.eta_short]);
    cs.rho = rho_short;
    lp += half_normal_lp(u[L.eta_short], cs.eta, grad ? &(*grad)[L.eta_short] : nullptr);
    lp += normal_lp(u[L.rho_short], kLog14, 1.0, grad ? &(*grad)[L.rho_short] : nullptr);
  }
  if (spec_.cyclic) {
    cw.on = true;
    cw.cyclic = true;
    cw.n = L.n_cyclic;
    cw.z_at = L.z_cyclic;
    cw.eta_at = L.eta_cyclic;
    cw.eta = std::exp(u[L.eta_cyclic]);
    cw.rho = std::exp(u[L.rho_cyclic]);
    lp += half_normal_lp(u[L.eta_cyclic], cw.eta, grad ? &(*grad)[L.eta_cyclic] : nullptr);
    lp += normal_lp(u[L.rho_cyclic], kLog7, 1.0, grad ? &(*grad)[L.rho_cyclic] : nullptr);
  }
  if (spec_.recency) {
    cr.on = true;
    cr.n = dims_.n_recency;
    cr.z_at = L.z_recency;
    cr.eta_at = L.eta_recency;
    cr.eta = std::exp(u[L.eta_recency]);
    cr.rho = std::exp(u[L.rho_recency]);
    cr.has_mean = true;
    cr.l1 = std::exp(u[L.l1_recency]);
    cr.l2 = std::exp(u[L.l2_recency]);
    cr.l1_at = L.l1_recency;
    cr.l2_at = L.l2_recency;
    lp += half_normal_lp(u[L.eta_recency], cr.eta, grad ? &(*grad)[L.eta_recency] : nullptr);
    lp += normal_lp(u[L.rho_recency], kLog7, 1.0, grad ? &(*grad)[L.rho_recency] : nullptr);
    lp += half_normal_lp(u[L.l1_recency], cr.l1, grad ? &(*grad)[L.l1_recency] : nullptr);
    lp += normal_lp(u[L.l2_recency], 0.0, 0.5, grad ? &(*grad)[L.l2_recency] : nullptr);
  }
  if (spec_.lifetime) {
    cf.on = true;
    cf.n = dims_.n_lifetime;
    cf.z_at = L.z_lifetime;
    cf.eta_at = L.eta_lifetime;
    cf.eta = std::exp(u[L.eta_lifetime]);
    cf.rho = std::exp(u[L.rho_lifetime]);
    cf.has_mean = true;
    cf.l1 = std::exp(u[L.l1_lifetime]);
    cf.l2 = std::exp(u[L.l2_lifetime]);
    cf.l1_at = L.l1_lifetime;
    cf.l2_at = L.l2_lifetime;
    lp += half_normal_lp(u[L.eta_lifetime], cf.eta, grad ? &(*grad)[L.eta_lifetime] : nullptr);
    lp += normal_lp(u[L.rho_lifetime], kLog7, 1.0, grad ? &(*grad)[L.rho_lifetime] : nullptr);
    lp += half_normal_lp(u[L.l1_lifetime], cf.l1, grad ? &(*grad)[L.l1_lifetime] : nullptr);
    lp += normal_lp(u[L.l2_lifetime], 0.0, 0.5, grad ? &(*grad)[L.l2_lifetime] : nullptr);
  }

  double sigma_delta = 0.0, sigma_fs = 0.0, sigma_inst = 0.0;
  if (spec_.heterogeneity) {
    sigma_delta = std::exp(u[L.sigma_delta]);
    lp += half_normal_lp(u[L.sigma_delta], sigma_delta,
                         grad ? &(*grad)[L.sigma_delta] : nullptr);
  }
  if (spec_.day_effects) {
    sigma_fs = std::exp(u[L.sigma_fs]);
    sigma_inst = std::exp(u[L.sigma_inst]);
    lp += half_normal_lp(u[L.sigma_fs], sigma_fs, grad ? &(*grad)[L.sigma_fs] : nullptr);
    lp += half_normal_lp(u[L.sigma_inst], sigma_inst, grad ? &(*grad)[L.sigma_inst] : nullptr);
  }

  // ---- whitened coordinate priors (standard normal blocks) ----
  auto z_prior = [&](int at, int n) {
    if (at < 0) return;
    const auto z = u.segment(at, n);
    lp += -0.5 * z.squaredNorm() - 0.5 * n * kLog2Pi;
    if (grad) grad->segment(at, n) -= z;
  };
  z_prior(L.z_long, cl.n);
  z_prior(L.z_short, cs.n);
  z_prior(L.z_cyclic, cw.n);
  z_prior(L.z_recency, cr.n);
  z_prior(L.z_lifetime, cf.n);
  if (L.delta >= 0) z_prior(L.delta, dims_.n_customers);
  if (L.fs >= 0) z_prior(L.fs, static_cast<int>(dims_.first_spend_days.size()));
  if (L.inst >= 0) z_prior(L.inst, static_cast<int>(dims_.install_days.size()));

  // ---- fixed-effect priors, normal(0, 2) ----
  auto coef_prior = [&](int at, int n) {
    if (at < 0) return;
    const auto b = u.segment(at, n);
    lp += -b.squaredNorm() / 8.0 - n * (std::log(2.0) + 0.5 * kLog2Pi);
    if (grad) grad->segment(at, n) -= b / 4.0;
  };
  coef_prior(L.beta, L.n_beta);
  coef_prior(L.gamma, L.n_gamma);

  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  if (!include_likelihood) return lp;

  // ---- latent curves on their grids ----
  struct Work {
    Eigen::MatrixXd Lhat;
    Eigen::VectorXd v, dv, val, w;
    Eigen::VectorXd pw, lgpw;  // (tau-1)^l2 and its log-weighted version
  };
  Work wk_l, wk_s, wk_w, wk_r, wk_f;

  auto prepare = [&](Comp& c, Work& w) {
    if (!c.on) return;
    const Eigen::VectorXd grid = iota_grid(c.n);
    Eigen::MatrixXd Khat(c.n, c.n);
    Eigen::MatrixXd dK(grad ? c.n : 0, grad ? c.n : 0);
    for (int j = 0; j < c.n; ++j) {
      for (int i = j; i < c.n; ++i) {
        const double d = grid[i] - grid[j];
        double q;  // squared scaled distance
        if (c.cyclic) {
          const double s = std::sin(kPi * d / static_cast<double>(spec_.cyclic_period));
          q = s * s;
        } else {
          q = d * d;
        }
        const double k = std::exp(-q / (c.rho * c.rho));
        Khat(i, j) = Khat(j, i) = k;
        if (grad) dK(i, j) = dK(j, i) = k * 2.0 * q / (c.rho * c.rho * c.rho);
      }
    }
    Khat.diagonal().array() += kJitterFloor;
    w.Lhat = stable_cholesky(Khat, 1.0);
    const auto z = u.segment(c.z_at, c.n);
    w.v = w.Lhat.triangularView<Eigen::Lower>() * z;
    if (grad) w.dv = cholesky_forward_diff(w.Lhat, dK).triangularView<Eigen::Lower>() * z;

    w.val.resize(c.n);
    if (c.has_mean) {
      w.pw.resize(c.n);
      w.lgpw.resize(c.n);
      w.pw[0] = 0.0;
      w.lgpw[0] = 0.0;
      for (int g2 = 1; g2 < c.n; ++g2) {
        const double tau = grid[g2] - 1.0;
        w.pw[g2] = std::pow(tau, c.l2);
        w.lgpw[g2] = w.pw[g2] * std::log(tau);
      }
    }
    const double base = c.identified ? w.v[0] : 0.0;
    for (int g2 = 0; g2 < c.n; ++g2) {
      double x = c.eta * (w.v[g2] - base);
      if (c.has_mean) x += -c.l1 * w.pw[g2];
      w.val[g2] = x;
    }
    if (grad) w.w = Eigen::VectorXd::Zero(c.n);
  };
  prepare(cl, wk_l);
  prepare(cs, wk_s);
  prepare(cw, wk_w);
  prepare(cr, wk_r);
  prepare(cf, wk_f);

  // ---- per-customer bases ----
  const std::size_t N = panel_.size();
  Eigen::VectorXd cust_base = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    double b = 0.0;
    if (L.gamma >= 0) {
      const int ch = panel_.channel_index(i);
      if (ch > 0) b += u[L.gamma + ch - 1];
    }
    if (L.delta >= 0) b += sigma_delta * u[L.delta + static_cast<int>(i)];
    if (L.fs >= 0) b += sigma_fs * u[L.fs + fs_idx_[i]];
    if (L.inst >= 0) b += sigma_inst * u[L.inst + inst_idx_[i]];
    cust_base[static_cast<Eigen::Index>(i)] = b;
  }

  // ---- likelihood over the risk set ----
  Eigen::VectorXd wc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  Eigen::VectorXd wbeta = Eigen::VectorXd::Zero(L.n_beta > 0 ? L.n_beta + 1 : 0);
  double wmu = 0.0;
  double loglik = 0.0;
  const std::size_t M = obs_t_.size();
  for (std::size_t k = 0; k < M; ++k) {
    const int t = obs_t_[k];
    double eta = mu;
    if (cl.on) eta += wk_l.val[t - 1];
    if (cs.on) eta += wk_s.val[t - 1];
    const int widx = cw.on ? (t - 1) % cw.n : 0;
    if (cw.on) eta += wk_w.val[widx];
    if (cr.on) eta += wk_r.val[obs_r_[k] - 1];
    if (cf.on) eta += wk_f.val[obs_l_[k] - 1];
    const int pn_idx = obs_pn_[k];
    if (L.beta >= 0 && pn_idx > 0) eta += u[L.beta + pn_idx - 1];
    eta += cust_base[obs_cust_[k]];

    loglik += obs_y_[k] ? -softplus(-eta) : -softplus(eta);
    if (grad) {
      const double w = static_cast<double>(obs_y_[k]) - sigmoid(eta);
      wmu += w;
      if (cl.on) wk_l.w[t - 1] += w;
      if (cs.on) wk_s.w[t - 1] += w;
      if (cw.on) wk_w.w[widx] += w;
      if (cr.on) wk_r.w[obs_r_[k] - 1] += w;
      if (cf.on) wk_f.w[obs_l_[k] - 1] += w;
      if (L.beta >= 0) wbeta[pn_idx] += w;
      wc[obs_cust_[k]] += w;
    }
  }
  lp += loglik;
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  if (!grad) return lp;

  // ---- gradient assembly ----
  (*grad)[L.mu] += wmu;

  auto scatter = [&](Comp& c, Work& w, double* rho_sink) {
    if (!c.on) return;
    Eigen::VectorXd ut = w.w;
    if (c.identified) ut[0] -= w.w.sum();
    grad->segment(c.z_at, c.n) += c.eta * (w.Lhat.transpose() * ut);
    (*grad)[c.eta_at] += c.eta * ut.dot(w.v);
    *rho_sink = c.eta * ut.dot(w.dv);  // d loglik / d rho
    if (c.has_mean) {
      (*grad)[c.l1_at] += c.l1 * (-w.pw.dot(w.w));
      (*grad)[c.l2_at] += c.l2 * (-c.l1 * w.lgpw.dot(w.w));
    }
  };
  double Gl = 0.0, Gs = 0.0, Gw = 0.0, Gr = 0.0, Gf = 0.0;
  scatter(cl, wk_l, &Gl);
  scatter(cs, wk_s, &Gs);
  scatter(cw, wk_w, &Gw);
  scatter(cr, wk_r, &Gr);
  scatter(cf, wk_f, &Gf);

  // rho chain rules; the long-run length-scale is rho_short + gap so both
  // unconstrained coordinates receive its likelihood sensitivity
  if (spec_.long_run && spec_.short_run) {
    (*grad)[L.gap] += Gl * gap;
    (*grad)[L.rho_short] += (Gl + Gs) * rho_short;
  } else if (spec_.long_run) {
    (*grad)[L.gap] += Gl * gap;
  } else if (spec_.short_run) {
    (*grad)[L.rho_short] += Gs * rho_short;
  }
  if (cw.on) (*grad)[L.rho_cyclic] += Gw * cw.rho;
  if (cr.on) (*grad)[L.rho_recency] += Gr * cr.rho;
  if (cf.on) (*grad)[L.rho_lifetime] += Gf * cf.rho;

  if (L.beta >= 0)
    for (int j = 1; j <= L.n_beta; ++j) (*grad)[L.beta + j - 1] += wbeta[j];

  double acc_sd = 0.0, acc_sfs = 0.0, acc_sinst = 0.0;
  Eigen::VectorXd wfs, winst;
  if (L.fs >= 0) wfs = Eigen::VectorXd::Zero(static_cast<int>(dims_.first_spend_days.size()));
  if (L.inst >= 0) winst = Eigen::VectorXd::Zero(static_cast<int>(dims_.install_days.size()));
  for (std::size_t i = 0; i < N; ++i) {
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
    if (L.fs >= 0) wfs[fs_idx_[i]] += wci;
    if (L.inst >= 0) winst[inst_idx_[i]] += wci;
  }
  if (L.sigma_delta >= 0) (*grad)[L.sigma_delta] += sigma_delta * acc_sd;
  if (L.fs >= 0) {
    grad->segment(L.fs, wfs.size()) += sigma_fs * wfs;
    for (Eigen::Index d = 0; d < wfs.size(); ++d) acc_sfs += wfs[d] * u[L.fs + d];
    (*grad)[L.sigma_fs] += sigma_fs * acc_sfs;
  }
  if (L.inst >= 0) {
    grad->segment(L.inst, winst.size()) += sigma_inst * winst;
    for (Eigen::Index d = 0; d < winst.size(); ++d) acc_sinst += winst[d] * u[L.inst + d];
    (*grad)[L.sigma_inst] += sigma_inst * acc_sinst;
  }

  return lp;
}

}  // namespace gppm
