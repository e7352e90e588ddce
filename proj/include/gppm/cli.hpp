#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gppm/inference.hpp"
#include "gppm/model.hpp"
#include "gppm/predict.hpp"
#include "gppm/simulate.hpp"
#include "gppm/svg.hpp"

namespace gppm {

// model.* keys that are present in the config; unset fields fall back to the
// chosen variant preset.
struct ModelOverrides {
  std::optional<bool> long_run, short_run, cyclic, recency, lifetime;
  std::optional<bool> purchase_number, channel, heterogeneity, day_effects;
  std::optional<int> purchase_number_cap;
  std::optional<double> cyclic_period;
};

// One JSON config file drives every subcommand; unknown keys are fatal with
// their dotted path. Command-line --seed/--holdout-days/--out override the
// corresponding fields after parsing.
struct RunConfig {
  std::string events_path, customers_path;
  int data_horizon = 0;  // 0 means the last observed event day

  std::string variant = "full";  // full | reduced | reduced_cyclic
  ModelOverrides model;

  HmcOptions hmc;  // hmc.seed is always the top-level seed

  int holdout_days = 30;
  std::uint64_t seed = 1;
  std::string out = "out";
  int max_draws = 500;

  MuteMask mask;
  int forecast_horizon = 0;  // 0 means the panel horizon
  bool redraw_delta = false;

  SimDesign simulate;  // simulate.seed is always the top-level seed

  std::vector<int> detect_cutoffs;
  int detect_min_window = 30;

  std::string draws_path;  // dashboard input
  std::vector<EventWindow> event_windows;

  int benchmark_replications = 200;  // forward-simulation averaging in compare
};

RunConfig load_run_config(const std::string& path);

// Variant preset plus overrides. components_from_variant keeps the calendar
// component set (long_run/short_run/cyclic) exactly as the variant defines
// it, which is how the comparison refits are built.
ModelSpec make_spec(const std::string& variant, const ModelOverrides& o,
                    bool components_from_variant = false);

// Full command-line entry point: parses arguments, runs one subcommand, and
// maps failures to exit codes (0 success, 2 validation, 3 numerical) with a
// one-line error JSON on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace gppm
