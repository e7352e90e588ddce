#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "gppm/data.hpp"
#include "gppm/gp.hpp"

namespace gppm {

enum class CyclicLevel { Nocyc, Weakcyc, Strongcyc };
enum class CalendarLevel { Nocal, NonlinDeccal, Peakcal };

// Weekly sinusoid amplitude on the logit scale: 0 / 0.15 / 0.4.
double cyclic_amplitude(CyclicLevel level);

// Piecewise calendar peak, as printed in its source: 0 through day 20, then
// 0.5(t-20) up to day 40, 0.1(50-t) on days 41..50, 0 afterwards. The raw
// ramp reaches 10 logit units, which saturates probabilities; callers that
// want a usable effect pass a scale factor well below 1.
double peak_effect(int t);

double calendar_effect(CalendarLevel level, int t, double peak_scale = 1.0);

struct SimDesign {
  CyclicLevel cyclic_level = CyclicLevel::Nocyc;
  CalendarLevel calendar_level = CalendarLevel::Nocal;
  int n_customers = 1000;
  int horizon = 100;
  int acquisition_window = 30;
  double base_propensity = -2.0;
  double sigma_delta = 0.8;
  double peak_scale = 1.0;  // multiplies the Peakcal piecewise values
  MeanFunction recency_truth = MeanFunction::power_decay(0.5, 0.5);
  MeanFunction lifetime_truth = MeanFunction::power_decay(0.3, 0.4);
  // value at input index+1 when non-empty; overrides the MeanFunction
  std::vector<double> recency_override;
  std::vector<double> lifetime_override;
  int spike_day = 0;  // one-day additive logit spike; 0 disables
  double spike_effect = 1.5;
  std::uint64_t seed = 1;
  void validate() const;
};

// Per-day and per-input ground truth emitted with each simulated panel so
// recovery tests compare fitted curves against it directly.
struct SimTruth {
  double base = 0.0;
  Eigen::VectorXd calendar;  // trend at t = 1..horizon, spike excluded
  Eigen::VectorXd cyclic;    // amplitude * sin(2 pi t / 7) at t = 1..horizon
  Eigen::VectorXd recency;   // value at r = 1..horizon
  Eigen::VectorXd lifetime;  // value at l = 1..horizon
  Eigen::VectorXd delta;     // per customer
};

struct SimResult {
  SpendPanel panel;
  SimTruth truth;
};

// First-spend day for each of n customers, uniform over days 1..window.
std::vector<int> acquisition_sampler(int n, int window, std::uint64_t seed);

// Sequential Bernoulli spend generator. Each customer enters the risk set
// the day after their first spend; recency and lifetime evolve with the
// simulated history exactly as derive_triples computes them from a panel.
SimResult gppm_simulate(const SimDesign& d);

}  // namespace gppm
