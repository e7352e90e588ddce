#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "gppm/inference.hpp"
#include "gppm/model.hpp"

namespace gppm {

// Components to replace by their time-mean in predictive simulation: zero
// for the identified curves, mu for long_run, zeroed coefficients for
// purchase_number. Muting never re-estimates anything.
struct MuteMask {
  bool long_run = false;
  bool short_run = false;
  bool cyclic = false;
  bool recency = false;
  bool lifetime = false;
  bool purchase_number = false;
};

struct PredictOptions {
  int horizon = 0;  // 0 means the panel horizon; larger values forecast
  MuteMask mask;
  int max_draws = 500;  // posterior draws are thinned evenly to this cap
  // draw fresh heterogeneity from the fitted sigma_delta instead of reusing
  // each customer's fitted effect
  bool redraw_delta = false;
  std::uint64_t seed = 1;
};

// Daily repeat-spend counts simulated from the posterior: one Bernoulli
// sweep per retained draw. Per-day median and central 95% interval across
// draws; samples holds the raw draw-by-day counts.
struct DailyCountSummary {
  Eigen::VectorXd median, lower, upper;
  Eigen::MatrixXd samples;  // draws by days
};

// Per-draw generator protocol (relied on by the equivalence tests): draw k
// uses Rng::stream(seed, k); fresh deltas are drawn first when redraw_delta,
// then GP extension sub-seeds when forecasting, then exactly one uniform per
// risk-set day in customer-major, day-minor order.
DailyCountSummary posterior_predictive(const GppmModel& model, const PosteriorDraws& draws,
                                       const PredictOptions& opts);

// Exact GP extension of one identified component to new inputs: the raw
// curve (values plus anchor) is conditioned through the component's own
// kernel and mean, then re-anchored onto the identified scale.
struct ComponentForecast {
  Eigen::VectorXd inputs;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};
ComponentForecast forecast_component(const GppmComponent& c, const Eigen::VectorXd& new_inputs);

// Pointwise posterior summary of one latent curve across draws, training
// grid plus conditional-mean extension when the horizon exceeds it.
struct CurveSummary {
  bool active = false;
  Eigen::VectorXd inputs;
  Eigen::VectorXd median, lower, upper;
};

struct ComponentCurves {
  CurveSummary long_run, short_run, cyclic, recency, lifetime, purchase_number;
};

ComponentCurves component_curve_summaries(const GppmModel& model, const PosteriorDraws& draws,
                                          int horizon = 0, int max_draws = 500);
// Panel-free variant for draws reloaded from disk: the structural dims
// carried alongside the draws are enough to rebuild every curve.
ComponentCurves component_curve_summaries(const ModelSpec& spec, const ModelDims& dims,
                                          const PosteriorDraws& draws, int horizon = 0,
                                          int max_draws = 500);

// Fit metrics over daily series. mape skips days with zero actuals and
// reports how many were skipped; rmse uses every day.
double mape(const std::vector<double>& actual, const std::vector<double>& predicted,
            int* excluded_days = nullptr);
double rmse(const std::vector<double>& actual, const std::vector<double>& predicted);

// Expanding-window refits for event detection. Each cutoff gets a truncated
// panel, a fresh fit, and the posterior-median calendar curves; failures are
// recorded per cutoff without aborting the schedule.
struct DetectConfig {
  ModelSpec spec = ModelSpec::full();
  HmcOptions hmc;
  int max_draws = 500;
  int min_window = 30;  // smallest admissible cutoff
};

struct DetectSnapshot {
  int cutoff = 0;
  bool ok = false;
  std::string error;
  Eigen::VectorXd long_run;   // posterior-median curve on days 1..cutoff
  Eigen::VectorXd short_run;  // likewise
  double short_run_amplitude = 0.0;  // posterior-median eta of the short-run GP
};

std::vector<DetectSnapshot> detect_events(const SpendPanel& panel,
                                          const std::vector<int>& cutoffs,
                                          const DetectConfig& cfg);

}  // namespace gppm
