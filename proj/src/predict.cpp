#include "gppm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "gppm/errors.hpp"
#include "gppm/rng.hpp"
#include "gppm/stats.hpp"

namespace gppm {

namespace {

// evenly spaced pooled row indices, at most cap of them
std::vector<int> thin_indices(const PosteriorDraws& draws, int cap) {
  const int total = static_cast<int>(draws.chains.size()) * draws.draws_per_chain();
  if (total < 1) throw ValidationError("posterior draws are empty");
  if (cap < 1) throw ValidationError("draw cap must be positive");
  const int n_sel = std::min(cap, total);
  const int stride = total / n_sel;
  std::vector<int> idx(static_cast<std::size_t>(n_sel));
  for (int i = 0; i < n_sel; ++i) idx[static_cast<std::size_t>(i)] = i * stride;
  return idx;
}

Eigen::VectorXd pooled_row(const PosteriorDraws& draws, int row) {
  const int per = draws.draws_per_chain();
  return draws.chains[static_cast<std::size_t>(row / per)].row(row % per).transpose();
}

Eigen::VectorXd range_inputs(int from, int to) {
  Eigen::VectorXd v(to - from + 1);
  for (int i = from; i <= to; ++i) v[i - from] = static_cast<double>(i);
  return v;
}

GPComponent raw_curve(const GppmComponent& c) {
  GPComponent raw = c.gp;
  raw.values.array() += c.anchor;
  return raw;
}

// appends a conditional draw (or the conditional mean) at inputs beyond the
// component's grid, back on the identified scale
void extend_component(GppmComponent& c, int max_input, bool sample, std::uint64_t seed) {
  const int have = static_cast<int>(c.gp.values.size());
  if (max_input <= have) return;
  const Eigen::VectorXd inputs = range_inputs(have + 1, max_input);
  const GPComponent raw = raw_curve(c);
  const double jitter = kGpJitterFloor * c.gp.kernel.amplitude2();
  Eigen::VectorXd ext;
  if (sample) {
    ext = gp_sample_conditional(raw, inputs, seed, jitter);
  } else {
    ext = gp_conditional(raw, inputs, jitter).mean;
  }
  ext.array() -= c.anchor;
  Eigen::VectorXd grown(max_input);
  grown.head(have) = c.gp.values;
  grown.tail(inputs.size()) = ext;
  c.gp.values = std::move(grown);
  c.gp.grid = range_inputs(1, max_input);
}

void flatten(GppmComponent& c, int needed, double level) {
  if (!c.active) return;
  c.gp.values = Eigen::VectorXd::Constant(std::max(needed, 1), level);
  c.gp.grid = range_inputs(1, std::max(needed, 1));
  c.anchor = 0.0;
}

}  // namespace

DailyCountSummary posterior_predictive(const GppmModel& model, const PosteriorDraws& draws,
                                       const PredictOptions& opts) {
  if (draws.dim() != model.dim())
    throw ValidationError("posterior_predictive: draws do not match the model");
  const int T = model.panel().horizon();
  const int H = opts.horizon == 0 ? T : opts.horizon;
  if (H < T) throw ValidationError("posterior_predictive: horizon shorter than the panel");

  const auto idx = thin_indices(draws, opts.max_draws);
  const int n_sel = static_cast<int>(idx.size());
  const auto& panel = model.panel();
  const auto& spec = model.spec();

  Eigen::MatrixXd samples(n_sel, H);
  for (int k = 0; k < n_sel; ++k) {
    GppmParams p = model.constrain(pooled_row(draws, idx[static_cast<std::size_t>(k)]));
    Rng rng = Rng::stream(opts.seed, static_cast<std::uint64_t>(k));

    if (opts.redraw_delta && spec.heterogeneity)
      for (Eigen::Index i = 0; i < p.delta.size(); ++i)
        p.delta[i] = p.sigma_delta * rng.normal();

    // extensions for the components the sweep will index beyond their grids;
    // muted components are flattened instead, never extended, and sub-seeds
    // are consumed only by extensions that actually happen
    const auto extend = [&rng](GppmComponent& c, int needed) {
      if (needed <= static_cast<int>(c.gp.values.size())) return;
      extend_component(c, needed, true,
                       rng.integer(std::numeric_limits<std::uint64_t>::max()));
    };
    if (spec.long_run) {
      if (opts.mask.long_run)
        flatten(p.long_run, H, p.mu);
      else
        extend(p.long_run, H);
    }
    if (spec.short_run) {
      if (opts.mask.short_run)
        flatten(p.short_run, H, 0.0);
      else
        extend(p.short_run, H);
    }
    if (spec.cyclic && opts.mask.cyclic) flatten(p.cyclic, 1, 0.0);
    if (spec.recency) {
      if (opts.mask.recency)
        flatten(p.recency, H - 1, 0.0);
      else
        extend(p.recency, H - 1);
    }
    if (spec.lifetime) {
      if (opts.mask.lifetime)
        flatten(p.lifetime, H - 1, 0.0);
      else
        extend(p.lifetime, H - 1);
    }
    if (opts.mask.purchase_number && p.beta.size() > 0) p.beta.setZero();

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(H);
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const auto& c = panel.customers()[i];
      int last_spend = c.first_spend_day;
      int purchases = 1;
      for (int t = c.first_spend_day + 1; t <= H; ++t) {
        ObservationTriple tr;
        tr.t = t;
        tr.r = t - last_spend;
        tr.l = t - c.first_spend_day;
        tr.purchase_number = purchases;
        const double eta = model.latent_propensity(p, i, tr);
        if (rng.bernoulli(invlogit(eta))) {
          counts[t - 1] += 1.0;
          last_spend = t;
          ++purchases;
        }
      }
    }
    samples.row(k) = counts.transpose();
  }

  DailyCountSummary out;
  out.samples = std::move(samples);
  out.median.resize(H);
  out.lower.resize(H);
  out.upper.resize(H);
  for (int d = 0; d < H; ++d) {
    const Eigen::VectorXd col = out.samples.col(d);
    out.median[d] = median(col);
    out.lower[d] = quantile(col, 0.025);
    out.upper[d] = quantile(col, 0.975);
  }
  return out;
}

ComponentForecast forecast_component(const GppmComponent& c, const Eigen::VectorXd& new_inputs) {
  if (!c.active) throw ValidationError("forecast_component: inactive component");
  const GPConditional cond =
      gp_conditional(raw_curve(c), new_inputs, kGpJitterFloor * c.gp.kernel.amplitude2());
  ComponentForecast out;
  out.inputs = new_inputs;
  out.mean = cond.mean.array() - c.anchor;
  out.sd = cond.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

namespace {

CurveSummary summarize_rows(const Eigen::MatrixXd& rows, Eigen::VectorXd inputs) {
  CurveSummary s;
  s.active = true;
  s.inputs = std::move(inputs);
  const Eigen::Index n = rows.cols();
  s.median.resize(n);
  s.lower.resize(n);
  s.upper.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd col = rows.col(j);
    s.median[j] = median(col);
    s.lower[j] = quantile(col, 0.025);
    s.upper[j] = quantile(col, 0.975);
  }
  return s;
}

}  // namespace

ComponentCurves component_curve_summaries(const GppmModel& model, const PosteriorDraws& draws,
                                          int horizon, int max_draws) {
  return component_curve_summaries(model.spec(), model.dims(), draws, horizon, max_draws);
}

ComponentCurves component_curve_summaries(const ModelSpec& spec, const ModelDims& dims,
                                          const PosteriorDraws& draws, int horizon,
                                          int max_draws) {
  const GppmLayout L = build_layout(spec, dims);
  if (draws.dim() != L.dim)
    throw ValidationError("component_curve_summaries: draws do not match the model");
  const int T = dims.horizon;
  const int H = horizon == 0 ? T : horizon;
  if (H < T) throw ValidationError("component_curve_summaries: horizon shorter than the panel");

  const auto idx = thin_indices(draws, max_draws);
  const int n_sel = static_cast<int>(idx.size());

  const int n_rl = std::max(1, H - 1);
  Eigen::MatrixXd longr(n_sel, H), shortr(n_sel, H), cyc(n_sel, L.n_cyclic),
      rec(n_sel, n_rl), life(n_sel, n_rl), pn(n_sel, L.n_beta + 1);

  for (int k = 0; k < n_sel; ++k) {
    GppmParams p = apply_identification(
        constrain_point(spec, dims, L, pooled_row(draws, idx[static_cast<std::size_t>(k)])));
    if (spec.long_run) {
      extend_component(p.long_run, H, false, 0);
      longr.row(k) = p.long_run.gp.values.transpose();
    }
    if (spec.short_run) {
      extend_component(p.short_run, H, false, 0);
      shortr.row(k) = p.short_run.gp.values.transpose();
    }
    if (spec.cyclic) cyc.row(k) = p.cyclic.gp.values.transpose();
    if (spec.recency) {
      extend_component(p.recency, n_rl, false, 0);
      rec.row(k) = p.recency.gp.values.transpose();
    }
    if (spec.lifetime) {
      extend_component(p.lifetime, n_rl, false, 0);
      life.row(k) = p.lifetime.gp.values.transpose();
    }
    if (spec.purchase_number) {
      pn(k, 0) = 0.0;  // first purchase is the reference level
      pn.row(k).tail(L.n_beta) = p.beta.transpose();
    }
  }

  ComponentCurves out;
  if (spec.long_run) out.long_run = summarize_rows(longr, range_inputs(1, H));
  if (spec.short_run) out.short_run = summarize_rows(shortr, range_inputs(1, H));
  if (spec.cyclic) out.cyclic = summarize_rows(cyc, range_inputs(1, L.n_cyclic));
  if (spec.recency) out.recency = summarize_rows(rec, range_inputs(1, n_rl));
  if (spec.lifetime) out.lifetime = summarize_rows(life, range_inputs(1, n_rl));
  if (spec.purchase_number) out.purchase_number = summarize_rows(pn, range_inputs(1, L.n_beta + 1));
  return out;
}

double mape(const std::vector<double>& actual, const std::vector<double>& predicted,
            int* excluded_days) {
  if (actual.empty() || actual.size() != predicted.size())
    throw ValidationError("mape: series must be non-empty and equal length");
  double sum = 0.0;
  int used = 0, skipped = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      ++skipped;
      continue;
    }
    sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
    ++used;
  }
  if (excluded_days) *excluded_days = skipped;
  if (used == 0) throw ValidationError("mape: every day has zero actuals");
  return sum / used;
}

double rmse(const std::vector<double>& actual, const std::vector<double>& predicted) {
  if (actual.empty() || actual.size() != predicted.size())
    throw ValidationError("rmse: series must be non-empty and equal length");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

std::vector<DetectSnapshot> detect_events(const SpendPanel& panel,
                                          const std::vector<int>& cutoffs,
                                          const DetectConfig& cfg) {
  if (cutoffs.empty()) throw ValidationError("detect_events: empty schedule");
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] < cfg.min_window)
      throw ValidationError("detect_events: cutoff below the minimum fitting window");
    if (cutoffs[i] > panel.horizon())
      throw ValidationError("detect_events: cutoff beyond the panel horizon");
    if (i > 0 && cutoffs[i] <= cutoffs[i - 1])
      throw ValidationError("detect_events: cutoffs must increase");
  }

  std::vector<DetectSnapshot> out;
  for (int cutoff : cutoffs) {
    DetectSnapshot snap;
    snap.cutoff = cutoff;
    try {
      GppmModel model(panel.truncated(cutoff), cfg.spec);
      HmcTarget target;
      target.dim = model.dim();
      target.logp_grad = [&model](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
        return model.log_posterior_grad(u, g);
      };
      const PosteriorDraws draws = hmc_sample(target, cfg.hmc, model.param_names());
      const ComponentCurves curves =
          component_curve_summaries(model, draws, 0, cfg.max_draws);
      if (curves.long_run.active) snap.long_run = curves.long_run.median;
      if (curves.short_run.active) snap.short_run = curves.short_run.median;
      if (cfg.spec.short_run) {
        std::vector<double> etas;
        const Eigen::VectorXd pooled = draws.pooled(model.layout().eta_short);
        etas.reserve(static_cast<std::size_t>(pooled.size()));
        for (Eigen::Index j = 0; j < pooled.size(); ++j)
          etas.push_back(std::exp(pooled[j]));
        snap.short_run_amplitude = median(etas);
      }
      snap.ok = true;
    } catch (const std::exception& e) {
      snap.ok = false;
      snap.error = e.what();
    }
    out.push_back(std::move(snap));
  }
  return out;
}

}  // namespace gppm
