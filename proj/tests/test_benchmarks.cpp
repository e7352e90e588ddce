#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gppm/bgnbd.hpp"
#include "gppm/data.hpp"
#include "gppm/errors.hpp"
#include "gppm/inference.hpp"
#include "gppm/loglogistic.hpp"
#include "gppm/optim.hpp"
#include "gppm/rng.hpp"
#include "gppm/stats.hpp"

using namespace gppm;

namespace {

const BgnbdParams kFhl{0.243, 4.414, 0.793, 2.426};

// hazard-only panel: every day after the first spend is an independent
// Bernoulli draw with probability h(recency)
SpendPanel simulate_hazard_panel(int n, int horizon, double shape, double scale,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CustomerRecord> cs;
  for (int i = 0; i < n; ++i) {
    CustomerRecord c;
    c.customer_id = "h" + std::to_string(i);
    c.channel = "sim";
    c.install_day = 1 + static_cast<int>(rng.integer(5));
    c.first_spend_day = c.install_day;
    c.spend_days = {c.first_spend_day};
    int rec = 1;
    for (int t = c.first_spend_day + 1; t <= horizon; ++t) {
      if (rng.uniform() < loglogistic_hazard(rec, shape, scale)) {
        c.spend_days.push_back(t);
        rec = 1;
      } else {
        ++rec;
      }
    }
    cs.push_back(std::move(c));
  }
  return SpendPanel(cs, horizon);
}

}  // namespace

TEST_CASE("nelder mead minimizes standard objectives") {
  auto quad = [](const Eigen::VectorXd& x) {
    return (x[0] - 2.0) * (x[0] - 2.0) + 3.0 * (x[1] + 1.0) * (x[1] + 1.0);
  };
  auto r = nelder_mead(quad, Eigen::VectorXd::Zero(2));
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(-1.0).epsilon(1e-5));

  auto rosen = [](const Eigen::VectorXd& x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  NelderMeadOptions o;
  o.max_evaluations = 10000;
  r = nelder_mead(rosen, Eigen::VectorXd::Zero(2), o);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-4);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-4);

  // NaN regions behave like +infinity
  auto guarded = [](const Eigen::VectorXd& x) {
    if (x[0] < 0.5) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 3.0) * (x[0] - 3.0);
  };
  Eigen::VectorXd x0(1);
  x0[0] = 4.0;
  r = nelder_mead(guarded, x0);
  CHECK(std::abs(r.x[0] - 3.0) < 1e-4);

  auto budget = nelder_mead(rosen, Eigen::VectorXd::Zero(2), {20, 1e-10, 1e-8, 0.5});
  CHECK(budget.evaluations <= 22);  // one step may finish in flight
  CHECK_THROWS_AS((void)nelder_mead({}, Eigen::VectorXd::Zero(1)), ValidationError);
}

TEST_CASE("bgnbd log likelihood matches frozen references") {
  RfmSummary s{2, 30.0, 50.0};
  CHECK(bgnbd_loglik(kFhl, s) == doctest::Approx(-9.792967643384378).epsilon(1e-13));

  // x = 0 collapses to the closed form r (log alpha - log(alpha + T))
  RfmSummary s0{0, 0.0, 70.0};
  const double closed = kFhl.r * (std::log(kFhl.alpha) - std::log(kFhl.alpha + 70.0));
  CHECK(bgnbd_loglik(kFhl, s0) == doctest::Approx(-0.6864416575679259).epsilon(1e-14));
  CHECK(std::abs(bgnbd_loglik(kFhl, s0) - closed) < 1e-12);

  // a -> 0 removes dropout, leaving the gamma-mixed Poisson timing likelihood
  BgnbdParams nbd{1.0, 1.0, 1e-8, 1.0};
  RfmSummary sn{3, 12.5, 20.0};
  const double expected = std::lgamma(nbd.r + 3) - std::lgamma(nbd.r) +
                          nbd.r * std::log(nbd.alpha) -
                          (nbd.r + 3) * std::log(nbd.alpha + 20.0);
  CHECK(bgnbd_loglik(nbd, sn) == doctest::Approx(expected).epsilon(1e-5));

  // pooled fast path equals the per-summary reference path
  std::vector<RfmSummary> many;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    RfmSummary m;
    m.x = static_cast<int>(rng.integer(6));
    m.t_obs = 20.0 + 80.0 * rng.uniform();
    m.t_x = m.x > 0 ? m.t_obs * rng.uniform() : 0.0;
    many.push_back(m);
  }
  double slow = 0.0;
  for (const auto& m : many) slow += bgnbd_loglik(kFhl, m);
  CHECK(bgnbd_loglik(kFhl, many) == doctest::Approx(slow).epsilon(1e-12));
}

TEST_CASE("bgnbd rejects bad inputs the prescribed way") {
  CHECK_THROWS_AS((void)bgnbd_loglik(BgnbdParams{0.0, 1, 1, 1}, RfmSummary{}),
                  ValidationError);
  CHECK_THROWS_AS((void)bgnbd_loglik(BgnbdParams{1, -1, 1, 1}, RfmSummary{}),
                  ValidationError);
  // out-of-support summaries yield -infinity rather than throwing
  CHECK(bgnbd_loglik(kFhl, RfmSummary{2, 60.0, 50.0}) ==
        -std::numeric_limits<double>::infinity());
  CHECK(bgnbd_loglik(kFhl, RfmSummary{0, 5.0, 50.0}) ==
        -std::numeric_limits<double>::infinity());
  CHECK(bgnbd_loglik(kFhl, RfmSummary{-1, 0.0, 50.0}) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("panel-derived summaries match hand derivation") {
  CustomerRecord c;
  c.customer_id = "x";
  c.channel = "a";
  c.install_day = 2;
  c.first_spend_day = 3;
  c.spend_days = {3, 5, 9};
  CustomerRecord d;
  d.customer_id = "y";
  d.channel = "a";
  d.install_day = 1;
  d.first_spend_day = 4;
  d.spend_days = {4};
  SpendPanel panel({c, d}, 12);
  const auto rfm = rfm_from_panel(panel);
  REQUIRE(rfm.size() == 2);
  CHECK(rfm[0].x == 2);
  CHECK(rfm[0].t_x == 6.0);  // day 9 minus first spend day 3
  CHECK(rfm[0].t_obs == 9.0);
  CHECK(rfm[1].x == 0);
  CHECK(rfm[1].t_x == 0.0);
  CHECK(rfm[1].t_obs == 8.0);
  CHECK(std::isfinite(bgnbd_loglik(kFhl, rfm)));
}

TEST_CASE("bgnbd simulation is deterministic and respects its contract") {
  const auto a = bgnbd_simulate(kFhl, 50, 30, 100, 11);
  const auto b = bgnbd_simulate(kFhl, 50, 30, 100, 11);
  CHECK(a.panel.size() == 50);
  REQUIRE(a.summaries.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.panel.customers()[i].spend_days == b.panel.customers()[i].spend_days);
    CHECK(a.summaries[i].t_x == b.summaries[i].t_x);
    CHECK(a.summaries[i].x >= 0);
    CHECK(a.summaries[i].t_x <= a.summaries[i].t_obs);
    CHECK(a.panel.customers()[i].install_day == a.panel.customers()[i].first_spend_day);
    CHECK(a.panel.customers()[i].first_spend_day <= 30);
  }
  const auto c = bgnbd_simulate(kFhl, 50, 30, 100, 12);
  bool any_diff = false;
  for (std::size_t i = 0; i < 50; ++i)
    any_diff = any_diff || a.panel.customers()[i].spend_days != c.panel.customers()[i].spend_days;
  CHECK(any_diff);

  // near-certain dropout kills the repeat process at its first opportunity:
  // at most one repeat each (vs ~99 expected without dropout at these rates)
  const auto dead = bgnbd_simulate(BgnbdParams{1.0, 1.0, 1.0, 0.01}, 2000, 1, 100, 5);
  double mean_x = 0.0;
  int multi = 0;
  for (const auto& s : dead.summaries) {
    mean_x += s.x;
    if (s.x >= 2) ++multi;
  }
  mean_x /= 2000.0;
  CHECK(mean_x < 1.1);
  CHECK(multi < 60);  // expected share is b/(a+b) ~ 1%

  CHECK_THROWS_AS((void)bgnbd_simulate(kFhl, 0, 30, 100, 1), ValidationError);
  CHECK_THROWS_AS((void)bgnbd_simulate(kFhl, 10, 30, 20, 1), ValidationError);
}

TEST_CASE("simulated repeat counts match the analytic expectation") {
  // all customers acquired on day 1 so every observation length is 99
  const auto sim = bgnbd_simulate(kFhl, 10000, 1, 100, 99);
  Eigen::VectorXd xs(10000);
  for (int i = 0; i < 10000; ++i) xs[i] = sim.summaries[static_cast<std::size_t>(i)].x;
  const double se = std::sqrt(variance(xs) / 10000.0);
  INFO("mean ", xs.mean(), " expected 2.1412110901648074 se ", se);
  CHECK(std::abs(xs.mean() - 2.1412110901648074) < 3.0 * se);

  const auto sim70 = bgnbd_simulate(kFhl, 10000, 1, 71, 7);
  Eigen::VectorXd xs70(10000);
  for (int i = 0; i < 10000; ++i) xs70[i] = sim70.summaries[static_cast<std::size_t>(i)].x;
  const double se70 = std::sqrt(variance(xs70) / 10000.0);
  CHECK(std::abs(xs70.mean() - 1.74234682046107) < 3.0 * se70);
}

TEST_CASE("bgnbd fit recovers generating parameters") {
  const auto sim = bgnbd_simulate(kFhl, 2000, 1, 101, 7);
  const auto fit = bgnbd_fit(sim.summaries, 1);
  INFO("fit r=", fit.params.r, " alpha=", fit.params.alpha, " a=", fit.params.a,
       " b=", fit.params.b);
  CHECK(fit.warning.empty());
  CHECK(std::abs(fit.params.r / kFhl.r - 1.0) < 0.25);
  CHECK(std::abs(fit.params.alpha / kFhl.alpha - 1.0) < 0.25);
  CHECK(std::abs(fit.params.a / kFhl.a - 1.0) < 0.25);
  CHECK(std::abs(fit.params.b / kFhl.b - 1.0) < 0.25);

  // restarting the search at the optimum cannot improve it meaningfully
  auto objective = [&](const Eigen::VectorXd& theta) {
    BgnbdParams p{std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2]),
                  std::exp(theta[3])};
    return -bgnbd_loglik(p, sim.summaries);
  };
  Eigen::VectorXd at_opt(4);
  at_opt << std::log(fit.params.r), std::log(fit.params.alpha), std::log(fit.params.a),
      std::log(fit.params.b);
  NelderMeadOptions small;
  small.initial_step = 0.05;
  const auto again = nelder_mead(objective, at_opt, small);
  CHECK(fit.loglik - (-again.value) <= 1e-6 + 1e-9 * std::abs(fit.loglik));

  // no repeat purchases leaves the dropout pair unidentified
  std::vector<RfmSummary> zeros(50, RfmSummary{0, 0.0, 40.0});
  const auto flat = bgnbd_fit(zeros, 1);
  CHECK_FALSE(flat.warning.empty());
}

TEST_CASE("bgnbd daily forecast is deterministic and anchored on first spends") {
  const auto sim = bgnbd_simulate(kFhl, 200, 10, 40, 3);
  const auto f1 = bgnbd_daily_forecast(kFhl, sim.panel, 60, 25, 9);
  const auto f2 = bgnbd_daily_forecast(kFhl, sim.panel, 60, 25, 9);
  REQUIRE(f1.size() == 60);
  CHECK(f1 == f2);
  // first-spend days contribute their observed counts exactly
  std::vector<double> first(60, 0.0);
  for (const auto& c : sim.panel.customers()) first[static_cast<std::size_t>(c.first_spend_day - 1)] += 1.0;
  for (int d = 0; d < 60; ++d) CHECK(f1[static_cast<std::size_t>(d)] >= first[static_cast<std::size_t>(d)]);
  double total_first = 0.0;
  for (double v : first) total_first += v;
  CHECK(total_first == 200.0);
  CHECK_THROWS_AS((void)bgnbd_daily_forecast(kFhl, sim.panel, 30, 10, 1), ValidationError);
}

TEST_CASE("log-logistic hazard matches frozen values and telescopes") {
  CHECK(loglogistic_hazard(1, 1.0, 1.0) == 0.5);
  CHECK(loglogistic_hazard(5, 2.0, 10.0) ==
        doctest::Approx(0.07199999999999984).epsilon(1e-14));
  CHECK(loglogistic_logit_hazard(400, 1.2, 20.0) ==
        doctest::Approx(-5.833563483289369).epsilon(1e-12));

  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const double k = std::exp(2.0 * rng.uniform() - 0.5);
    const double s = std::exp(3.0 * rng.uniform() - 0.5);
    double surv = 1.0;
    for (int t = 1; t <= 50; ++t) {
      surv *= 1.0 - loglogistic_hazard(t, k, s);
      const double direct = 1.0 / (1.0 + std::pow(t / s, k));
      CHECK(surv == doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("log-logistic hazard stays in the unit interval") {
  Rng rng(23);
  for (int rep = 0; rep < 10000; ++rep) {
    const double k = std::exp(4.0 * rng.uniform() - 2.0);
    const double s = std::exp(5.0 * rng.uniform() - 2.0);
    const int t = 1 + static_cast<int>(rng.integer(1000));
    const double h = loglogistic_hazard(t, k, s);
    CHECK(std::isfinite(h));
    CHECK(h > 0.0);
    CHECK(h < 1.0);
  }
  CHECK_THROWS_AS((void)loglogistic_hazard(0, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS((void)loglogistic_hazard(1, -1.0, 1.0), ValidationError);
}

TEST_CASE("shape above one gives a rise-then-fall hazard") {
  std::vector<double> h;
  for (int t = 1; t <= 100; ++t) h.push_back(loglogistic_hazard(t, 2.0, 10.0));
  const auto peak = std::max_element(h.begin(), h.end()) - h.begin();
  CHECK(peak > 0);
  CHECK(peak < 99);
  int sign_changes = 0;
  for (std::size_t i = 2; i < h.size(); ++i) {
    const double d1 = h[i - 1] - h[i - 2];
    const double d2 = h[i] - h[i - 1];
    if (d1 > 0 && d2 < 0) ++sign_changes;
  }
  CHECK(sign_changes == 1);
}

TEST_CASE("log-logistic model gradient matches finite differences") {
  auto panel = simulate_hazard_panel(20, 25, 1.5, 8.0, 31);
  LogLogisticOptions opts;
  opts.event_windows = {{5, 9}, {15, 18}};
  LogLogisticModel m(panel, opts);
  CHECK(m.layout().n_window == 2);
  Eigen::VectorXd grad(m.dim());
  const double h = 1e-3;
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    Rng rng(500 + static_cast<std::uint64_t>(rep));
    Eigen::VectorXd u(m.dim());
    for (int i = 0; i < m.dim(); ++i) u[i] = 2.0 * rng.uniform() - 1.0;
    m.log_posterior_grad(u, grad);
    for (int i = 0; i < m.dim(); ++i) {
      auto at = [&](double step) {
        Eigen::VectorXd v = u;
        v[i] += step;
        return m.log_posterior(v);
      };
      const double fd =
          (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
      worst = std::max(worst,
                       std::abs(grad[i] - fd) / std::max({1.0, std::abs(grad[i]), std::abs(fd)}));
    }
  }
  INFO("worst relative error ", worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("log-logistic layout derives from its options") {
  auto panel = simulate_hazard_panel(10, 15, 1.5, 8.0, 42);
  LogLogisticOptions full;
  full.event_windows = {{3, 6}};
  LogLogisticModel m(panel, full);
  const auto& L = m.layout();
  CHECK(L.shape == 0);
  CHECK(L.scale == 1);
  CHECK(L.sigma_delta == 2);
  CHECK(L.n_beta == 9);
  CHECK(L.n_window == 1);
  CHECK(L.dim == 3 + L.n_beta + L.n_gamma + 1 + 10);
  CHECK(m.param_names().size() == static_cast<std::size_t>(L.dim));
  CHECK(m.param_names()[0] == "log_shape");

  LogLogisticOptions bare;
  bare.purchase_number = false;
  bare.channel = false;
  bare.heterogeneity = false;
  LogLogisticModel b(panel, bare);
  CHECK(b.dim() == 2);
  CHECK(b.layout().sigma_delta == -1);

  LogLogisticOptions bad = bare;
  bad.event_windows = {{9, 3}};
  CHECK_THROWS_AS((LogLogisticModel(panel, bad)), ValidationError);
}

TEST_CASE("log-logistic fit recovers a known hazard") {
  auto panel = simulate_hazard_panel(1000, 30, 1.6, 9.0, 61);
  LogLogisticOptions opts;
  opts.purchase_number = false;
  opts.channel = false;
  opts.heterogeneity = false;
  HmcOptions hmc;
  hmc.chains = 2;
  hmc.warmup = 200;
  hmc.iterations = 200;
  hmc.max_leapfrog = 16;
  hmc.seed = 71;
  const auto fit = loglogistic_fit(panel, opts, hmc);
  INFO("shape ", fit.median.shape, " scale ", fit.median.scale);
  CHECK(std::abs(fit.median.shape / 1.6 - 1.0) < 0.2);
  CHECK(std::abs(fit.median.scale / 9.0 - 1.0) < 0.2);
  CHECK(split_rhat(fit.draws.coordinate(fit.layout.shape)) < 1.1);
}

TEST_CASE("hazard daily forecast matches the two-step closed form") {
  // everyone starts on day 1 with a bare hazard model: the first repeat day
  // has mass h(1), the second h(1)^2 + (1-h(1))h(2)
  const int n = 4000;
  std::vector<CustomerRecord> recs;
  for (int i = 0; i < n; ++i) {
    CustomerRecord c;
    c.customer_id = "h" + std::to_string(i);
    c.install_day = c.first_spend_day = 1;
    c.spend_days = {1};
    c.channel = "x";
    recs.push_back(std::move(c));
  }
  SpendPanel panel(std::move(recs), 1);

  LogLogisticParams p;
  p.shape = 1.6;
  p.scale = 9.0;
  LogLogisticOptions opts;
  opts.purchase_number = false;
  opts.channel = false;
  opts.heterogeneity = false;

  const auto fc = loglogistic_daily_forecast(p, opts, panel, 3, 40, 5);
  REQUIRE(fc.size() == 3);
  CHECK(fc[0] == static_cast<double>(n));  // anchored on the observed first spends

  const double h1 = loglogistic_hazard(1, 1.6, 9.0);
  const double h2 = loglogistic_hazard(2, 1.6, 9.0);
  const double e2 = n * h1;
  const double e3 = n * (h1 * h1 + (1.0 - h1) * h2);
  // 3 standard errors of the replication-averaged Bernoulli counts
  const double se2 = std::sqrt(n * h1 * (1 - h1) / 40.0);
  INFO("day2 ", fc[1], " expected ", e2, " day3 ", fc[2], " expected ", e3);
  CHECK(std::abs(fc[1] - e2) < 3.0 * se2);
  CHECK(std::abs(fc[2] - e3) < 3.0 * std::sqrt(e3 / 40.0));

  CHECK(loglogistic_daily_forecast(p, opts, panel, 3, 40, 5) == fc);
  CHECK(loglogistic_daily_forecast(p, opts, panel, 3, 40, 6) != fc);
  CHECK_THROWS_AS(loglogistic_daily_forecast(p, opts, panel, 0, 40, 5), ValidationError);
}

TEST_CASE("null event window is covered by its posterior interval") {
  int covered = 0;
  for (int rep = 0; rep < 20; ++rep) {
    auto panel = simulate_hazard_panel(300, 25, 1.5, 8.0,
                                       900 + static_cast<std::uint64_t>(rep));
    LogLogisticOptions opts;
    opts.purchase_number = false;
    opts.channel = false;
    opts.heterogeneity = false;
    opts.event_windows = {{10, 15}};
    HmcOptions hmc;
    hmc.chains = 2;
    hmc.warmup = 150;
    hmc.iterations = 150;
    hmc.max_leapfrog = 16;
    hmc.seed = 1000 + static_cast<std::uint64_t>(rep);
    const auto fit = loglogistic_fit(panel, opts, hmc);
    const Eigen::VectorXd w = fit.draws.pooled(fit.layout.window);
    const double lo = quantile(w, 0.025);
    const double hi = quantile(w, 0.975);
    if (lo <= 0.0 && 0.0 <= hi) ++covered;
  }
  INFO("covered ", covered, " of 20");
  CHECK(covered >= 18);
}
