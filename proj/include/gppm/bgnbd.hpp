#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gppm/data.hpp"

namespace gppm {

struct BgnbdParams {
  double r = 1.0;      // gamma shape of the purchase rate
  double alpha = 1.0;  // gamma rate of the purchase rate
  double a = 1.0;      // beta parameters of the dropout probability
  double b = 1.0;
  void validate() const;
};

// Per-customer sufficient statistics, clocked from the first purchase.
struct RfmSummary {
  int x = 0;          // repeat transactions
  double t_x = 0.0;   // time of the last repeat transaction (0 when x = 0)
  double t_obs = 0.0; // observation length since first purchase
};

// Individual log likelihood of the gamma-mixed Poisson purchase process with
// beta-geometric dropout, in log space throughout.
double bgnbd_loglik(const BgnbdParams& p, const RfmSummary& s);
double bgnbd_loglik(const BgnbdParams& p, const std::vector<RfmSummary>& s);

struct BgnbdFit {
  BgnbdParams params;
  double loglik = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::string warning;  // non-empty when a flat direction was detected
};

// Maximum likelihood via simplex search on log parameters, 5 deterministic
// multi-starts, best result returned.
BgnbdFit bgnbd_fit(const std::vector<RfmSummary>& summaries, std::uint64_t seed = 1);

struct BgnbdPanel {
  SpendPanel panel;
  std::vector<RfmSummary> summaries;  // continuous-time, one per customer
};

// Forward generator: acquisition day uniform on 1..acquisition_days, then
// exponential interpurchase waits with per-customer rate lambda ~
// Gamma(r, alpha) and dropout probability q ~ Beta(a, b) applied after every
// repeat transaction (never at the trial purchase, so x = 0 carries no
// dropout factor). Continuous times map to days by ceiling; several
// transactions in one day collapse to a single spend day.
BgnbdPanel bgnbd_simulate(const BgnbdParams& p, int n_customers, int acquisition_days,
                          int horizon, std::uint64_t seed);

// Integer-day summaries derived from an observed panel.
std::vector<RfmSummary> rfm_from_panel(const SpendPanel& panel);

// Expected daily total spend counts (first + repeat) from forward simulation
// of the fitted process over the panel's acquisition days; averaged over
// replications. Element d is day d+1.
std::vector<double> bgnbd_daily_forecast(const BgnbdParams& p, const SpendPanel& panel,
                                         int horizon, int replications,
                                         std::uint64_t seed);

}  // namespace gppm
