#include "gppm/bgnbd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gppm/errors.hpp"
#include "gppm/optim.hpp"
#include "gppm/rng.hpp"

namespace gppm {
namespace {

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double logsumexp2(double u, double v) {
  const double hi = std::max(u, v);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(std::min(u, v) - hi));
}

bool summary_valid(const RfmSummary& s) {
  if (s.x < 0) return false;
  if (!(s.t_x >= 0.0) || !(s.t_obs >= s.t_x)) return false;
  if (s.x == 0 && s.t_x != 0.0) return false;
  return std::isfinite(s.t_obs);
}

}  // namespace

void BgnbdParams::validate() const {
  if (!(r > 0.0) || !(alpha > 0.0) || !(a > 0.0) || !(b > 0.0) ||
      !std::isfinite(r + alpha + a + b))
    throw ValidationError("bgnbd: parameters must be positive and finite");
}

double bgnbd_loglik(const BgnbdParams& p, const RfmSummary& s) {
  p.validate();
  if (!summary_valid(s)) return -std::numeric_limits<double>::infinity();
  const double x = static_cast<double>(s.x);
  const double shared =
      std::lgamma(p.r + x) - std::lgamma(p.r) + p.r * std::log(p.alpha) - lbeta(p.a, p.b);
  const double term1 =
      shared + lbeta(p.a, p.b + x) - (p.r + x) * std::log(p.alpha + s.t_obs);
  if (s.x == 0) return term1;
  const double term2 =
      shared + lbeta(p.a + 1.0, p.b + x - 1.0) - (p.r + x) * std::log(p.alpha + s.t_x);
  return logsumexp2(term1, term2);
}

double bgnbd_loglik(const BgnbdParams& p, const std::vector<RfmSummary>& s) {
  p.validate();
  if (s.empty()) return 0.0;
  int max_x = 0;
  for (const auto& one : s) max_x = std::max(max_x, one.x);
  // the gamma/beta pieces depend on x alone, so share them across customers
  const double lb0 = lbeta(p.a, p.b);
  const double lg_r = std::lgamma(p.r);
  const double r_log_alpha = p.r * std::log(p.alpha);
  std::vector<double> c1(static_cast<std::size_t>(max_x) + 1);
  std::vector<double> c2(static_cast<std::size_t>(max_x) + 1, 0.0);
  for (int x = 0; x <= max_x; ++x) {
    const double shared = std::lgamma(p.r + x) - lg_r + r_log_alpha - lb0;
    c1[static_cast<std::size_t>(x)] = shared + lbeta(p.a, p.b + x);
    if (x > 0) c2[static_cast<std::size_t>(x)] = shared + lbeta(p.a + 1.0, p.b + x - 1.0);
  }
  double total = 0.0;
  for (const auto& one : s) {
    if (!summary_valid(one)) return -std::numeric_limits<double>::infinity();
    const double rx = p.r + one.x;
    const double term1 =
        c1[static_cast<std::size_t>(one.x)] - rx * std::log(p.alpha + one.t_obs);
    if (one.x == 0) {
      total += term1;
    } else {
      const double term2 =
          c2[static_cast<std::size_t>(one.x)] - rx * std::log(p.alpha + one.t_x);
      total += logsumexp2(term1, term2);
    }
  }
  return total;
}

BgnbdFit bgnbd_fit(const std::vector<RfmSummary>& summaries, std::uint64_t seed) {
  if (summaries.empty()) throw ValidationError("bgnbd_fit: no summaries");
  for (const auto& s : summaries)
    if (!summary_valid(s)) throw ValidationError("bgnbd_fit: invalid summary");

  BgnbdFit fit;
  const bool any_repeat =
      std::any_of(summaries.begin(), summaries.end(), [](const RfmSummary& s) { return s.x > 0; });
  if (!any_repeat)
    fit.warning = "no repeat transactions: dropout parameters are unidentified";

  auto objective = [&](const Eigen::VectorXd& theta) {
    BgnbdParams p;
    p.r = std::exp(theta[0]);
    p.alpha = std::exp(theta[1]);
    p.a = std::exp(theta[2]);
    p.b = std::exp(theta[3]);
    const double ll = bgnbd_loglik(p, summaries);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 5; ++start) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
    if (start > 0)
      for (int i = 0; i < 4; ++i) x0[i] = 4.0 * rng.uniform() - 2.0;
    const NelderMeadResult res = nelder_mead(objective, x0);
    fit.evaluations += res.evaluations;
    if (res.value < best) {
      best = res.value;
      fit.params.r = std::exp(res.x[0]);
      fit.params.alpha = std::exp(res.x[1]);
      fit.params.a = std::exp(res.x[2]);
      fit.params.b = std::exp(res.x[3]);
      fit.loglik = -res.value;
      fit.converged = res.converged;
    }
  }
  return fit;
}

BgnbdPanel bgnbd_simulate(const BgnbdParams& p, int n_customers, int acquisition_days,
                          int horizon, std::uint64_t seed) {
  p.validate();
  if (n_customers < 1) throw ValidationError("bgnbd_simulate: need at least one customer");
  if (acquisition_days < 1 || horizon < acquisition_days)
    throw ValidationError("bgnbd_simulate: horizon must cover the acquisition window");

  Rng rng(seed);
  std::vector<CustomerRecord> cs;
  std::vector<RfmSummary> rfm;
  cs.reserve(static_cast<std::size_t>(n_customers));
  for (int i = 0; i < n_customers; ++i) {
    CustomerRecord c;
    c.customer_id = "b" + std::to_string(i);
    c.channel = "sim";
    c.install_day = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(acquisition_days)));
    c.first_spend_day = c.install_day;
    c.spend_days = {c.first_spend_day};

    const double lambda = rng.gamma(p.r, p.alpha);
    const double q = rng.beta(p.a, p.b);
    const double t_end = static_cast<double>(horizon - c.first_spend_day);
    RfmSummary s;
    s.t_obs = t_end;
    double t = 0.0;
    while (true) {
      t += rng.exponential(lambda);
      if (!(t <= t_end)) break;
      ++s.x;
      s.t_x = t;
      const int day = c.first_spend_day + static_cast<int>(std::ceil(t));
      if (c.spend_days.back() != day) c.spend_days.push_back(day);
      // dropout opportunity follows each repeat transaction; none at trial,
      // so x = 0 carries no dropout factor, matching the likelihood
      if (rng.uniform() < q) break;
    }
    rfm.push_back(s);
    cs.push_back(std::move(c));
  }
  return BgnbdPanel{SpendPanel(cs, horizon), std::move(rfm)};
}

std::vector<RfmSummary> rfm_from_panel(const SpendPanel& panel) {
  std::vector<RfmSummary> out;
  out.reserve(panel.size());
  for (const auto& c : panel.customers()) {
    RfmSummary s;
    s.x = static_cast<int>(c.spend_days.size()) - 1;
    s.t_x = s.x > 0 ? static_cast<double>(c.spend_days.back() - c.first_spend_day) : 0.0;
    s.t_obs = static_cast<double>(panel.horizon() - c.first_spend_day);
    out.push_back(s);
  }
  return out;
}

std::vector<double> bgnbd_daily_forecast(const BgnbdParams& p, const SpendPanel& panel,
                                         int horizon, int replications,
                                         std::uint64_t seed) {
  p.validate();
  if (replications < 1) throw ValidationError("bgnbd_daily_forecast: need replications");
  if (horizon < panel.horizon())
    throw ValidationError("bgnbd_daily_forecast: horizon shorter than the panel");

  std::vector<double> counts(static_cast<std::size_t>(horizon), 0.0);
  for (const auto& c : panel.customers())
    counts[static_cast<std::size_t>(c.first_spend_day) - 1] += 1.0;

  std::vector<double> repeats(static_cast<std::size_t>(horizon), 0.0);
  for (int rep = 0; rep < replications; ++rep) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(rep));
    for (const auto& c : panel.customers()) {
      const double lambda = rng.gamma(p.r, p.alpha);
      const double q = rng.beta(p.a, p.b);
      const double t_end = static_cast<double>(horizon - c.first_spend_day);
      double t = 0.0;
      int last_day = c.first_spend_day;
      while (true) {
        t += rng.exponential(lambda);
        if (!(t <= t_end)) break;
        const int day = c.first_spend_day + static_cast<int>(std::ceil(t));
        if (day != last_day) {
          repeats[static_cast<std::size_t>(day) - 1] += 1.0;
          last_day = day;
        }
        if (rng.uniform() < q) break;
      }
    }
  }
  for (std::size_t d = 0; d < counts.size(); ++d)
    counts[d] += repeats[d] / static_cast<double>(replications);
  return counts;
}

}  // namespace gppm
