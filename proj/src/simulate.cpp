#include "gppm/simulate.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "gppm/errors.hpp"
#include "gppm/rng.hpp"
#include "gppm/stats.hpp"

namespace gppm {

namespace {
constexpr double kPi = 3.141592653589793;
}

double cyclic_amplitude(CyclicLevel level) {
  switch (level) {
    case CyclicLevel::Nocyc: return 0.0;
    case CyclicLevel::Weakcyc: return 0.15;
    case CyclicLevel::Strongcyc: return 0.4;
  }
  throw ValidationError("cyclic_amplitude: unknown level");
}

double peak_effect(int t) {
  if (t <= 20) return 0.0;
  if (t <= 40) return 0.5 * (t - 20);
  if (t <= 50) return 0.1 * (50 - t);
  return 0.0;
}

double calendar_effect(CalendarLevel level, int t, double peak_scale) {
  switch (level) {
    case CalendarLevel::Nocal: return 0.0;
    case CalendarLevel::NonlinDeccal: return -0.2 * std::pow(static_cast<double>(t), 0.3);
    case CalendarLevel::Peakcal: return peak_scale * peak_effect(t);
  }
  throw ValidationError("calendar_effect: unknown level");
}

void SimDesign::validate() const {
  if (n_customers < 1) throw ValidationError("SimDesign: need at least one customer");
  if (horizon < 2) throw ValidationError("SimDesign: horizon too short");
  if (acquisition_window < 1 || acquisition_window > horizon)
    throw ValidationError("SimDesign: acquisition window outside the horizon");
  if (!(sigma_delta >= 0.0) || !std::isfinite(sigma_delta))
    throw ValidationError("SimDesign: sigma_delta must be non-negative");
  if (!std::isfinite(base_propensity) || !std::isfinite(peak_scale) ||
      !std::isfinite(spike_effect))
    throw ValidationError("SimDesign: non-finite effect");
  if (spike_day < 0 || spike_day > horizon)
    throw ValidationError("SimDesign: spike day outside the horizon");
  const auto check_override = [&](const std::vector<double>& v, const char* what) {
    if (v.empty()) return;
    if (v.size() < static_cast<std::size_t>(horizon))
      throw ValidationError(std::string("SimDesign: ") + what +
                            " override shorter than the horizon");
    for (double x : v)
      if (!std::isfinite(x))
        throw ValidationError(std::string("SimDesign: non-finite ") + what + " override");
  };
  check_override(recency_override, "recency");
  check_override(lifetime_override, "lifetime");
}

std::vector<int> acquisition_sampler(int n, int window, std::uint64_t seed) {
  if (n < 1) throw ValidationError("acquisition_sampler: need at least one customer");
  if (window < 1) throw ValidationError("acquisition_sampler: window must be positive");
  Rng rng(seed);
  std::vector<int> days(static_cast<std::size_t>(n));
  for (auto& d : days) d = rng.integer_range(1, window);
  return days;
}

SimResult gppm_simulate(const SimDesign& d) {
  d.validate();

  SimTruth truth;
  truth.base = d.base_propensity;
  const double theta = cyclic_amplitude(d.cyclic_level);
  truth.calendar.resize(d.horizon);
  truth.cyclic.resize(d.horizon);
  truth.recency.resize(d.horizon);
  truth.lifetime.resize(d.horizon);
  for (int t = 1; t <= d.horizon; ++t) {
    truth.calendar[t - 1] = calendar_effect(d.calendar_level, t, d.peak_scale);
    truth.cyclic[t - 1] = theta * std::sin(2.0 * kPi * t / 7.0);
    truth.recency[t - 1] = d.recency_override.empty()
                               ? d.recency_truth(t)
                               : d.recency_override[static_cast<std::size_t>(t) - 1];
    truth.lifetime[t - 1] = d.lifetime_override.empty()
                                ? d.lifetime_truth(t)
                                : d.lifetime_override[static_cast<std::size_t>(t) - 1];
  }

  const std::vector<int> first_days =
      acquisition_sampler(d.n_customers, d.acquisition_window, d.seed);
  Rng rng = Rng::stream(d.seed, 1);  // disjoint from the acquisition stream

  truth.delta.resize(d.n_customers);
  std::vector<CustomerRecord> cs;
  cs.reserve(static_cast<std::size_t>(d.n_customers));
  for (int i = 0; i < d.n_customers; ++i) {
    CustomerRecord c;
    c.customer_id = "s" + std::to_string(i);
    c.channel = "sim";
    c.install_day = first_days[static_cast<std::size_t>(i)];
    c.first_spend_day = c.install_day;
    c.spend_days = {c.first_spend_day};
    const double delta = d.sigma_delta * rng.normal();
    truth.delta[i] = delta;

    int last_spend = c.first_spend_day;
    for (int t = c.first_spend_day + 1; t <= d.horizon; ++t) {
      const int r = t - last_spend;
      const int l = t - c.first_spend_day;
      double eta = d.base_propensity + truth.calendar[t - 1] + truth.cyclic[t - 1] +
                   truth.recency[r - 1] + truth.lifetime[l - 1] + delta;
      if (t == d.spike_day) eta += d.spike_effect;
      if (rng.bernoulli(invlogit(eta))) {
        c.spend_days.push_back(t);
        last_spend = t;
      }
    }
    cs.push_back(std::move(c));
  }
  return SimResult{SpendPanel(std::move(cs), d.horizon), std::move(truth)};
}

}  // namespace gppm
