#include "gppm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gppm/bgnbd.hpp"
#include "gppm/data.hpp"
#include "gppm/errors.hpp"
#include "gppm/io.hpp"
#include "gppm/loglogistic.hpp"
#include "gppm/stats.hpp"
#include "json.hpp"

namespace gppm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config parsing

std::string dotted(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ValidationError("config: '" + (path.empty() ? std::string("<top>") : path) +
                          "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ValidationError("config: unknown key '" + dotted(path, it.key()) + "'");
  }
}

const json* child(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

int get_int(const json& j, const char* key, const std::string& path, int def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_number_integer() && !it->is_number_unsigned())
    throw ValidationError("config: key '" + dotted(path, key) + "' must be an integer");
  return it->get<int>();
}

double get_double(const json& j, const char* key, const std::string& path, double def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_number())
    throw ValidationError("config: key '" + dotted(path, key) + "' must be a number");
  return it->get<double>();
}

bool get_bool(const json& j, const char* key, const std::string& path, bool def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_boolean())
    throw ValidationError("config: key '" + dotted(path, key) + "' must be a boolean");
  return it->get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       const std::string& def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_string())
    throw ValidationError("config: key '" + dotted(path, key) + "' must be a string");
  return it->get<std::string>();
}

std::uint64_t get_seed(const json& j, const char* key, const std::string& path,
                       std::uint64_t def) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
    throw ValidationError("config: key '" + dotted(path, key) +
                          "' must be a non-negative integer");
  return it->get<std::uint64_t>();
}

std::optional<bool> opt_bool(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  if (!it->is_boolean())
    throw ValidationError("config: key '" + dotted(path, key) + "' must be a boolean");
  return it->get<bool>();
}

CyclicLevel parse_cyclic_level(const std::string& s) {
  if (s == "none") return CyclicLevel::Nocyc;
  if (s == "weak") return CyclicLevel::Weakcyc;
  if (s == "strong") return CyclicLevel::Strongcyc;
  throw ValidationError("config: simulate.cyclic must be none|weak|strong, got '" + s + "'");
}

CalendarLevel parse_calendar_level(const std::string& s) {
  if (s == "none") return CalendarLevel::Nocal;
  if (s == "nonlinear_decline") return CalendarLevel::NonlinDeccal;
  if (s == "peak") return CalendarLevel::Peakcal;
  throw ValidationError("config: simulate.calendar must be none|nonlinear_decline|peak, got '" +
                        s + "'");
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  check_keys(root, "", {"data", "model", "hmc", "holdout_days", "seed", "out", "max_draws",
                        "mask", "forecast", "simulate", "detect", "draws", "event_windows",
                        "compare"});
  RunConfig cfg;

  if (const json* d = child(root, "data")) {
    check_keys(*d, "data", {"events", "customers", "horizon"});
    cfg.events_path = get_string(*d, "events", "data", "");
    cfg.customers_path = get_string(*d, "customers", "data", "");
    cfg.data_horizon = get_int(*d, "horizon", "data", 0);
  }

  if (const json* m = child(root, "model")) {
    check_keys(*m, "model",
               {"variant", "long_run", "short_run", "cyclic", "recency", "lifetime",
                "purchase_number", "channel", "heterogeneity", "day_effects",
                "purchase_number_cap", "cyclic_period"});
    cfg.variant = get_string(*m, "variant", "model", cfg.variant);
    cfg.model.long_run = opt_bool(*m, "long_run", "model");
    cfg.model.short_run = opt_bool(*m, "short_run", "model");
    cfg.model.cyclic = opt_bool(*m, "cyclic", "model");
    cfg.model.recency = opt_bool(*m, "recency", "model");
    cfg.model.lifetime = opt_bool(*m, "lifetime", "model");
    cfg.model.purchase_number = opt_bool(*m, "purchase_number", "model");
    cfg.model.channel = opt_bool(*m, "channel", "model");
    cfg.model.heterogeneity = opt_bool(*m, "heterogeneity", "model");
    cfg.model.day_effects = opt_bool(*m, "day_effects", "model");
    if (m->contains("purchase_number_cap"))
      cfg.model.purchase_number_cap = get_int(*m, "purchase_number_cap", "model", 10);
    if (m->contains("cyclic_period"))
      cfg.model.cyclic_period = get_double(*m, "cyclic_period", "model", 7.0);
  }

  if (const json* h = child(root, "hmc")) {
    check_keys(*h, "hmc",
               {"chains", "warmup", "iterations", "max_leapfrog", "target_accept",
                "initial_step_size", "init_radius", "adapt_mass"});
    cfg.hmc.chains = get_int(*h, "chains", "hmc", cfg.hmc.chains);
    cfg.hmc.warmup = get_int(*h, "warmup", "hmc", cfg.hmc.warmup);
    cfg.hmc.iterations = get_int(*h, "iterations", "hmc", cfg.hmc.iterations);
    cfg.hmc.max_leapfrog = get_int(*h, "max_leapfrog", "hmc", cfg.hmc.max_leapfrog);
    cfg.hmc.target_accept = get_double(*h, "target_accept", "hmc", cfg.hmc.target_accept);
    cfg.hmc.initial_step_size =
        get_double(*h, "initial_step_size", "hmc", cfg.hmc.initial_step_size);
    cfg.hmc.init_radius = get_double(*h, "init_radius", "hmc", cfg.hmc.init_radius);
    cfg.hmc.adapt_mass = get_bool(*h, "adapt_mass", "hmc", cfg.hmc.adapt_mass);
  }

  cfg.holdout_days = get_int(root, "holdout_days", "", cfg.holdout_days);
  cfg.seed = get_seed(root, "seed", "", cfg.seed);
  cfg.out = get_string(root, "out", "", cfg.out);
  cfg.max_draws = get_int(root, "max_draws", "", cfg.max_draws);

  if (const json* m = child(root, "mask")) {
    check_keys(*m, "mask",
               {"long_run", "short_run", "cyclic", "recency", "lifetime", "purchase_number"});
    cfg.mask.long_run = get_bool(*m, "long_run", "mask", false);
    cfg.mask.short_run = get_bool(*m, "short_run", "mask", false);
    cfg.mask.cyclic = get_bool(*m, "cyclic", "mask", false);
    cfg.mask.recency = get_bool(*m, "recency", "mask", false);
    cfg.mask.lifetime = get_bool(*m, "lifetime", "mask", false);
    cfg.mask.purchase_number = get_bool(*m, "purchase_number", "mask", false);
  }

  if (const json* f = child(root, "forecast")) {
    check_keys(*f, "forecast", {"horizon", "redraw_delta"});
    cfg.forecast_horizon = get_int(*f, "horizon", "forecast", 0);
    cfg.redraw_delta = get_bool(*f, "redraw_delta", "forecast", false);
  }

  if (const json* s = child(root, "simulate")) {
    check_keys(*s, "simulate",
               {"cyclic", "calendar", "n_customers", "horizon", "acquisition_window",
                "base_propensity", "sigma_delta", "peak_scale", "spike_day", "spike_effect"});
    cfg.simulate.cyclic_level = parse_cyclic_level(get_string(*s, "cyclic", "simulate", "none"));
    cfg.simulate.calendar_level =
        parse_calendar_level(get_string(*s, "calendar", "simulate", "none"));
    cfg.simulate.n_customers = get_int(*s, "n_customers", "simulate", 1000);
    cfg.simulate.horizon = get_int(*s, "horizon", "simulate", 100);
    cfg.simulate.acquisition_window = get_int(*s, "acquisition_window", "simulate", 30);
    cfg.simulate.base_propensity = get_double(*s, "base_propensity", "simulate", -2.0);
    cfg.simulate.sigma_delta = get_double(*s, "sigma_delta", "simulate", 0.8);
    cfg.simulate.peak_scale = get_double(*s, "peak_scale", "simulate", 1.0);
    cfg.simulate.spike_day = get_int(*s, "spike_day", "simulate", 0);
    cfg.simulate.spike_effect = get_double(*s, "spike_effect", "simulate", 1.5);
  }

  if (const json* d = child(root, "detect")) {
    check_keys(*d, "detect", {"cutoffs", "min_window"});
    if (const json* c = child(*d, "cutoffs")) {
      if (!c->is_array())
        throw ValidationError("config: key 'detect.cutoffs' must be an array of integers");
      for (const auto& v : *c) {
        if (!v.is_number_integer() && !v.is_number_unsigned())
          throw ValidationError("config: key 'detect.cutoffs' must be an array of integers");
        cfg.detect_cutoffs.push_back(v.get<int>());
      }
    }
    cfg.detect_min_window = get_int(*d, "min_window", "detect", cfg.detect_min_window);
  }

  cfg.draws_path = get_string(root, "draws", "", "");

  if (const json* w = child(root, "event_windows")) {
    if (!w->is_array()) throw ValidationError("config: key 'event_windows' must be an array");
    for (std::size_t i = 0; i < w->size(); ++i) {
      const std::string p = "event_windows[" + std::to_string(i) + "]";
      check_keys((*w)[i], p, {"start", "end", "label"});
      EventWindow win;
      win.start = get_int((*w)[i], "start", p, 0);
      win.end = get_int((*w)[i], "end", p, 0);
      win.label = get_string((*w)[i], "label", p, "");
      cfg.event_windows.push_back(std::move(win));
    }
  }

  if (const json* c = child(root, "compare")) {
    check_keys(*c, "compare", {"replications"});
    cfg.benchmark_replications =
        get_int(*c, "replications", "compare", cfg.benchmark_replications);
  }

  cfg.hmc.seed = cfg.seed;
  cfg.simulate.seed = cfg.seed;
  return cfg;
}

ModelSpec make_spec(const std::string& variant, const ModelOverrides& o,
                    bool components_from_variant) {
  ModelSpec s;
  if (variant == "full")
    s = ModelSpec::full();
  else if (variant == "reduced")
    s = ModelSpec::reduced();
  else if (variant == "reduced_cyclic")
    s = ModelSpec::reduced_cyclic();
  else
    throw ValidationError("config: model.variant must be full|reduced|reduced_cyclic, got '" +
                          variant + "'");
  if (!components_from_variant) {
    if (o.long_run) s.long_run = *o.long_run;
    if (o.short_run) s.short_run = *o.short_run;
    if (o.cyclic) s.cyclic = *o.cyclic;
  }
  if (o.recency) s.recency = *o.recency;
  if (o.lifetime) s.lifetime = *o.lifetime;
  if (o.purchase_number) s.purchase_number = *o.purchase_number;
  if (o.channel) s.channel = *o.channel;
  if (o.heterogeneity) s.heterogeneity = *o.heterogeneity;
  if (o.day_effects) s.day_effects = *o.day_effects;
  if (o.purchase_number_cap) s.purchase_number_cap = *o.purchase_number_cap;
  if (o.cyclic_period) s.cyclic_period = *o.cyclic_period;
  s.validate();
  return s;
}

namespace {

// ---------------------------------------------------------------------------
// shared command plumbing

std::string out_file(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << content;
  if (!out.flush()) throw ValidationError("write failed: " + path);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

SpendPanel load_data(const RunConfig& cfg) {
  if (cfg.events_path.empty() || cfg.customers_path.empty())
    throw ValidationError("config: data.events and data.customers are required "
                          "for this command");
  for (const std::string& p : {cfg.events_path, cfg.customers_path})
    if (!fs::exists(p)) throw ValidationError("config: data path '" + p + "' does not exist");
  int dups = 0;
  SpendPanel panel = load_panel(cfg.events_path, cfg.customers_path, cfg.data_horizon, &dups);
  if (dups > 0)
    std::cerr << "warning: collapsed " << dups << " duplicate spend rows\n";
  return panel;
}

PosteriorDraws fit_hmc(const GppmModel& model, const HmcOptions& hmc) {
  HmcTarget target;
  target.dim = model.dim();
  target.logp_grad = [&model](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    return model.log_posterior_grad(u, g);
  };
  return hmc_sample(target, hmc, model.param_names());
}

int holdout_cutoff(const RunConfig& cfg, int horizon) {
  if (cfg.holdout_days < 1 || cfg.holdout_days >= horizon)
    throw ValidationError("config: holdout_days must be in [1, horizon), got " +
                          std::to_string(cfg.holdout_days) + " against horizon " +
                          std::to_string(horizon));
  return horizon - cfg.holdout_days;
}

std::vector<double> first_spend_counts(const SpendPanel& cohort, int horizon) {
  std::vector<double> counts(static_cast<std::size_t>(horizon), 0.0);
  for (const auto& c : cohort.customers())
    counts[static_cast<std::size_t>(c.first_spend_day) - 1] += 1.0;
  return counts;
}

// Daily total predictions: simulated repeat medians plus the cohort's known
// first spends. First spends after the training cutoff belong to customers
// the model never saw, so they are absent from every model's prediction.
std::vector<double> gppm_total_forecast(const GppmModel& model, const PosteriorDraws& draws,
                                        const PredictOptions& opts,
                                        DailyCountSummary* summary_out = nullptr) {
  DailyCountSummary s = posterior_predictive(model, draws, opts);
  const int horizon = static_cast<int>(s.median.size());
  std::vector<double> total = first_spend_counts(model.panel(), horizon);
  for (int t = 0; t < horizon; ++t) total[static_cast<std::size_t>(t)] += s.median[t];
  if (summary_out) *summary_out = std::move(s);
  return total;
}

struct SeriesMetrics {
  double mape_all = 0, mape_train = 0, mape_hold = 0;
  double rmse_all = 0, rmse_train = 0, rmse_hold = 0;
};

std::vector<double> slice(const std::vector<double>& v, int from, int to) {
  return std::vector<double>(v.begin() + from, v.begin() + to);
}

SeriesMetrics series_metrics(const std::vector<double>& actual,
                             const std::vector<double>& predicted, int cutoff) {
  if (actual.size() != predicted.size())
    throw ValidationError("metrics: series length mismatch");
  const int n = static_cast<int>(actual.size());
  SeriesMetrics m;
  m.mape_all = mape(actual, predicted);
  m.rmse_all = rmse(actual, predicted);
  m.mape_train = mape(slice(actual, 0, cutoff), slice(predicted, 0, cutoff));
  m.rmse_train = rmse(slice(actual, 0, cutoff), slice(predicted, 0, cutoff));
  m.mape_hold = mape(slice(actual, cutoff, n), slice(predicted, cutoff, n));
  m.rmse_hold = rmse(slice(actual, cutoff, n), slice(predicted, cutoff, n));
  return m;
}

void print_metrics_header() {
  std::printf("%-12s %12s %12s %12s %12s %12s %12s\n", "model", "mape_all", "mape_train",
              "mape_hold", "rmse_all", "rmse_train", "rmse_hold");
}

void print_metrics_row(const std::string& name, const SeriesMetrics& m) {
  std::printf("%-12s %12.4f %12.4f %12.4f %12.4f %12.4f %12.4f\n", name.c_str(), m.mape_all,
              m.mape_train, m.mape_hold, m.rmse_all, m.rmse_train, m.rmse_hold);
}

std::string metrics_csv_row(const std::string& name, const SeriesMetrics& m) {
  std::ostringstream out;
  out << name << ',' << num(m.mape_all) << ',' << num(m.mape_train) << ','
      << num(m.mape_hold) << ',' << num(m.rmse_all) << ',' << num(m.rmse_train) << ','
      << num(m.rmse_hold) << '\n';
  return out.str();
}

constexpr const char* kMetricsCsvHeader =
    "model,mape_all,mape_train,mape_hold,rmse_all,rmse_train,rmse_hold\n";

// Hyperparameter table: scalar coordinates, log-scale ones mapped back to
// their natural scale (monotone, so quantiles transform exactly); R-hat and
// ESS are computed on the sampled coordinates.
std::string diagnostics_table(const GppmModel& model, const PosteriorDraws& draws,
                              std::string* csv_out) {
  std::ostringstream text, csv;
  csv << "param,median,q2.5,q97.5,rhat,ess\n";
  text << "  " << std::left;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %10s %10s %10s %8s %8s\n", "param", "median",
                "q2.5", "q97.5", "rhat", "ess");
  text << line;
  for (int i = 0; i < model.scalar_count(); ++i) {
    std::string name = model.param_names()[static_cast<std::size_t>(i)];
    const bool log_scale = name.rfind("log_", 0) == 0;
    if (log_scale) name = name.substr(4);
    const Eigen::VectorXd pooled = draws.pooled(i);
    double med = median(pooled);
    double lo = quantile(pooled, 0.025);
    double hi = quantile(pooled, 0.975);
    if (log_scale) {
      med = std::exp(med);
      lo = std::exp(lo);
      hi = std::exp(hi);
    }
    const double rhat = split_rhat(draws.coordinate(i));
    const double n_eff = ess(draws.coordinate(i));
    std::snprintf(line, sizeof(line), "%-24s %10.4f %10.4f %10.4f %8.3f %8.1f\n",
                  name.c_str(), med, lo, hi, rhat, n_eff);
    text << "  " << line;
    csv << name << ',' << num(med) << ',' << num(lo) << ',' << num(hi) << ',' << num(rhat)
        << ',' << num(n_eff) << '\n';
  }
  if (csv_out) *csv_out = csv.str();
  return text.str();
}

// ---------------------------------------------------------------------------
// commands

void cmd_fit(const RunConfig& cfg) {
  SpendPanel panel = load_data(cfg);
  GppmModel model(std::move(panel), make_spec(cfg.variant, cfg.model));
  std::printf("fit: %zu customers, horizon %d, %d parameters\n", model.panel().size(),
              model.panel().horizon(), model.dim());
  PosteriorDraws draws = fit_hmc(model, cfg.hmc);

  DrawsMeta meta{model.spec(), model.dims(), cfg.seed};
  save_draws(draws, meta, out_file(cfg, "draws.bin"));

  std::string csv;
  const std::string table = diagnostics_table(model, draws, &csv);
  std::fputs(table.c_str(), stdout);
  write_text_file(out_file(cfg, "fit_summary.csv"), csv);
  std::printf("fit: wrote %s and %s\n", out_file(cfg, "draws.bin").c_str(),
              out_file(cfg, "fit_summary.csv").c_str());
}

void cmd_forecast(const RunConfig& cfg) {
  SpendPanel panel = load_data(cfg);
  const int horizon = panel.horizon();
  const int cutoff = holdout_cutoff(cfg, horizon);
  GppmModel model(panel.truncated(cutoff), make_spec(cfg.variant, cfg.model));
  std::printf("forecast: training on days 1..%d, holdout %d days\n", cutoff,
              cfg.holdout_days);
  PosteriorDraws draws = fit_hmc(model, cfg.hmc);
  save_draws(draws, DrawsMeta{model.spec(), model.dims(), cfg.seed},
             out_file(cfg, "draws.bin"));

  PredictOptions opts;
  opts.horizon = cfg.forecast_horizon > 0 ? cfg.forecast_horizon : horizon;
  if (opts.horizon < horizon)
    throw ValidationError("config: forecast.horizon is shorter than the panel");
  opts.mask = cfg.mask;
  opts.max_draws = cfg.max_draws;
  opts.redraw_delta = cfg.redraw_delta;
  opts.seed = cfg.seed;
  DailyCountSummary summary;
  const std::vector<double> predicted = gppm_total_forecast(model, draws, opts, &summary);
  const std::vector<double> fs = first_spend_counts(model.panel(), opts.horizon);

  std::vector<double> actual = daily_total_counts(panel);
  actual.resize(static_cast<std::size_t>(opts.horizon), 0.0);
  const SeriesMetrics m = series_metrics(actual, predicted, cutoff);
  print_metrics_header();
  print_metrics_row(cfg.variant, m);
  write_text_file(out_file(cfg, "forecast_metrics.csv"),
                  kMetricsCsvHeader + metrics_csv_row(cfg.variant, m));

  std::ostringstream daily;
  daily << "day,actual,predicted,lower,upper\n";
  for (int t = 0; t < opts.horizon; ++t) {
    const auto d = static_cast<std::size_t>(t);
    daily << (t + 1) << ',' << num(actual[d]) << ',' << num(predicted[d]) << ','
          << num(summary.lower[t] + fs[d]) << ',' << num(summary.upper[t] + fs[d]) << '\n';
  }
  write_text_file(out_file(cfg, "predicted_daily.csv"), daily.str());
  std::printf("forecast: wrote %s and %s\n", out_file(cfg, "forecast_metrics.csv").c_str(),
              out_file(cfg, "predicted_daily.csv").c_str());
}

void cmd_simulate(const RunConfig& cfg) {
  SimResult sim = gppm_simulate(cfg.simulate);
  save_panel(sim.panel, out_file(cfg, "events.csv"), out_file(cfg, "customers.csv"));

  json truth;
  truth["base"] = sim.truth.base;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  truth["calendar"] = vec(sim.truth.calendar);
  truth["cyclic"] = vec(sim.truth.cyclic);
  truth["recency"] = vec(sim.truth.recency);
  truth["lifetime"] = vec(sim.truth.lifetime);
  truth["delta"] = vec(sim.truth.delta);
  write_text_file(out_file(cfg, "truth.json"), truth.dump(2) + "\n");

  json manifest;
  manifest["horizon"] = sim.panel.horizon();
  manifest["n_customers"] = sim.panel.size();
  manifest["seed"] = cfg.seed;
  write_text_file(out_file(cfg, "manifest.json"), manifest.dump(2) + "\n");

  double spends = 0;
  for (const double v : daily_total_counts(sim.panel)) spends += v;
  std::printf("simulate: %zu customers, horizon %d, %.0f spend events\n", sim.panel.size(),
              sim.panel.horizon(), spends);
  std::printf("simulate: wrote %s, %s, %s, %s\n", out_file(cfg, "events.csv").c_str(),
              out_file(cfg, "customers.csv").c_str(), out_file(cfg, "truth.json").c_str(),
              out_file(cfg, "manifest.json").c_str());
}

void cmd_compare(const RunConfig& cfg) {
  SpendPanel panel = load_data(cfg);
  const int horizon = panel.horizon();
  const int cutoff = holdout_cutoff(cfg, horizon);
  SpendPanel training = panel.truncated(cutoff);
  std::vector<double> actual = daily_total_counts(panel);

  std::string csv = kMetricsCsvHeader;
  print_metrics_header();
  auto evaluate = [&](const std::string& name, const std::vector<double>& predicted) {
    const SeriesMetrics m = series_metrics(actual, predicted, cutoff);
    print_metrics_row(name, m);
    std::fflush(stdout);
    csv += metrics_csv_row(name, m);
  };

  // the three propensity variants are separate refits on the training window
  const std::vector<std::pair<std::string, std::string>> variants = {
      {"GPPM", "full"}, {"rGPPM", "reduced"}, {"rGPPM-c", "reduced_cyclic"}};
  for (const auto& [name, variant] : variants) {
    GppmModel model(training, make_spec(variant, cfg.model, true));
    PosteriorDraws draws = fit_hmc(model, cfg.hmc);
    PredictOptions opts;
    opts.horizon = horizon;
    opts.max_draws = cfg.max_draws;
    opts.seed = cfg.seed;
    evaluate(name, gppm_total_forecast(model, draws, opts));
  }

  {
    const BgnbdFit fit = bgnbd_fit(rfm_from_panel(training), cfg.seed);
    if (!fit.warning.empty()) std::cerr << "warning: BGNBD fit: " << fit.warning << "\n";
    evaluate("BGNBD", bgnbd_daily_forecast(fit.params, training, horizon,
                                           cfg.benchmark_replications, cfg.seed));
  }

  {
    const ModelSpec spec = make_spec(cfg.variant, cfg.model);
    LogLogisticOptions opts;
    opts.purchase_number = spec.purchase_number;
    opts.purchase_number_cap = spec.purchase_number_cap;
    opts.channel = spec.channel;
    opts.heterogeneity = spec.heterogeneity;
    const LogLogisticFit fit = loglogistic_fit(training, opts, cfg.hmc);
    evaluate("loglogistic",
             loglogistic_daily_forecast(fit.median, opts, training, horizon,
                                        cfg.benchmark_replications, cfg.seed));
  }

  write_text_file(out_file(cfg, "compare.csv"), csv);
  std::printf("compare: wrote %s\n", out_file(cfg, "compare.csv").c_str());
}

void cmd_detect(const RunConfig& cfg) {
  SpendPanel panel = load_data(cfg);
  if (cfg.detect_cutoffs.empty())
    throw ValidationError("config: detect.cutoffs is required for this command");
  DetectConfig dc;
  dc.spec = make_spec(cfg.variant, cfg.model);
  dc.hmc = cfg.hmc;
  dc.max_draws = cfg.max_draws;
  dc.min_window = cfg.detect_min_window;
  const auto snaps = detect_events(panel, cfg.detect_cutoffs, dc);

  std::string summary = "cutoff,status,short_run_peak_day,short_run_amplitude,error\n";
  std::printf("%-8s %-8s %-18s %-18s\n", "cutoff", "status", "short_run_peak_day",
              "short_run_amplitude");
  for (const auto& s : snaps) {
    if (!s.ok) {
      std::printf("%-8d %-8s %-18s %-18s\n", s.cutoff, "failed", "-", "-");
      summary += std::to_string(s.cutoff) + ",failed,,," + s.error + "\n";
      continue;
    }
    int peak = 0;
    for (int t = 1; t < s.short_run.size(); ++t)
      if (s.short_run[t] > s.short_run[peak]) peak = t;
    std::printf("%-8d %-8s %-18d %-18.4f\n", s.cutoff, "ok", peak + 1,
                s.short_run_amplitude);
    summary += std::to_string(s.cutoff) + ",ok," + std::to_string(peak + 1) + "," +
               num(s.short_run_amplitude) + ",\n";

    std::ostringstream curves;
    curves << "day,long_run,short_run\n";
    for (int t = 0; t < s.long_run.size(); ++t)
      curves << (t + 1) << ',' << num(s.long_run[t]) << ',' << num(s.short_run[t]) << '\n';
    write_text_file(out_file(cfg, "detect_" + std::to_string(s.cutoff) + ".csv"),
                    curves.str());
  }
  write_text_file(out_file(cfg, "detect_summary.csv"), summary);
  std::printf("detect: wrote %s\n", out_file(cfg, "detect_summary.csv").c_str());
}

void cmd_dashboard(const RunConfig& cfg) {
  if (cfg.draws_path.empty())
    throw ValidationError("config: 'draws' is required for the dashboard command");
  if (!fs::exists(cfg.draws_path))
    throw ValidationError("config: draws path '" + cfg.draws_path + "' does not exist");
  const LoadedDraws ld = load_draws(cfg.draws_path);
  DashboardSpec spec;
  spec.curves = component_curve_summaries(ld.meta.spec, ld.meta.dims, ld.draws,
                                          cfg.forecast_horizon, cfg.max_draws);
  spec.windows = cfg.event_windows;
  const auto written = render_dashboard(spec, out_file(cfg, "dashboard"));
  for (const auto& p : written) std::printf("dashboard: wrote %s\n", p.c_str());
}

void emit_error(const char* type, const std::string& message) {
  json err;
  err["error"] = json{{"type", type}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

constexpr const char* kConfigHelp = R"(Config file keys (JSON; defaults in parentheses):
  data.events, data.customers   CSV paths; required by fit/forecast/compare/detect
  data.horizon (0)              observation end; 0 means the last event day
  model.variant ("full")        full | reduced | reduced_cyclic
  model.long_run/short_run/cyclic/recency/lifetime/purchase_number/
    channel/heterogeneity/day_effects (variant preset)   component toggles
  model.purchase_number_cap (10), model.cyclic_period (7)
  hmc.chains (4), hmc.warmup (500), hmc.iterations (500),
    hmc.max_leapfrog (32), hmc.target_accept (0.8),
    hmc.initial_step_size (0.1), hmc.init_radius (1.0), hmc.adapt_mass (true)
  holdout_days (30)             final days held out by forecast/compare
  seed (1)                      drives sampling, prediction, and simulation
  out ("out")                   output directory
  max_draws (500)               posterior draws kept for prediction/curves
  mask.long_run/... (false)     components muted in forecast's prediction
  forecast.horizon (0)          prediction horizon; 0 means the panel horizon
  forecast.redraw_delta (false) draw fresh heterogeneity per prediction draw
  simulate.cyclic ("none")      none | weak | strong
  simulate.calendar ("none")    none | nonlinear_decline | peak
  simulate.n_customers (1000), simulate.horizon (100),
    simulate.acquisition_window (30), simulate.base_propensity (-2),
    simulate.sigma_delta (0.8), simulate.peak_scale (1),
    simulate.spike_day (0 = off), simulate.spike_effect (1.5)
  detect.cutoffs ([])           expanding-window refit days; required by detect
  detect.min_window (30)        smallest admissible cutoff
  draws ("")                    draws file; required by dashboard
  event_windows ([])            [{start, end, label}] shading for dashboards
  compare.replications (200)    forward-simulation averaging for benchmarks
Unknown keys are fatal and reported with their dotted path.)";

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Gaussian process spend-propensity toolkit"};
  app.require_subcommand(1);
  app.footer(kConfigHelp);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> holdout_override;
  std::optional<std::string> out_override;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "estimate the propensity model and save posterior draws"},
      {"forecast", "fit on a training window and score holdout predictions"},
      {"simulate", "generate a synthetic spend panel with known truth"},
      {"compare", "refit GPPM/rGPPM/rGPPM-c and benchmarks on one dataset"},
      {"detect", "expanding-window refits for event detection"},
      {"dashboard", "render component curves from saved draws"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--holdout-days", holdout_override,
                    "override holdout_days (default 30)");
    sub->add_option("--out", out_override, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    emit_error("validation", e.what());
    return 2;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.hmc.seed = *seed_override;
      cfg.simulate.seed = *seed_override;
    }
    if (holdout_override) cfg.holdout_days = *holdout_override;
    if (out_override) cfg.out = *out_override;
    fs::create_directories(cfg.out);

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "fit")
      cmd_fit(cfg);
    else if (command == "forecast")
      cmd_forecast(cfg);
    else if (command == "simulate")
      cmd_simulate(cfg);
    else if (command == "compare")
      cmd_compare(cfg);
    else if (command == "detect")
      cmd_detect(cfg);
    else
      cmd_dashboard(cfg);
    return 0;
  } catch (const ValidationError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const NumericalError& e) {
    emit_error("numerical", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 2;
  }
}

}  // namespace gppm
