#include "storm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "storm/error.hpp"
#include "storm/rng.hpp"

namespace storm {

void validate(const SimConfig& cfg) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kBadConfig, msg); };
  if (cfg.side < 2) bad("side must be at least 2");
  if (cfg.total_steps < 1) bad("total_steps must be positive");
  if (cfg.opt_window_end < 1 || cfg.opt_window_end > cfg.total_steps) {
    bad("opt_window_end must lie in [1, total_steps]");
  }
  if (cfg.refine_steps.size() != cfg.refine_thresholds.size()) {
    bad("refine_steps and refine_thresholds must align one to one");
  }
  if (cfg.max_refine_iters < 1) bad("max_refine_iters must be positive");
  if (cfg.scale_start < cfg.scale_end) bad("scale range must be non-increasing");
  if (!(cfg.scale_factor > 0.0)) bad("scale_factor must be positive");
  if (!(cfg.temperature_start > 0.0 && cfg.temperature_end > 0.0)) bad("temperatures must be positive");
  if (cfg.line_search_halvings < 0) bad("line_search_halvings must be >= 0");
  if (!(cfg.logit_gain > 0.0) || !std::isfinite(cfg.logit_gain)) bad("logit_gain must be positive");
  const int end = cfg.window_end < 0 ? cfg.opt_window_end : cfg.window_end;
  if (cfg.window_start < 0 || cfg.window_start >= end || end > cfg.total_steps) {
    throw Error(ErrorCode::kBadWindow, "guidance window [" + std::to_string(cfg.window_start) +
                                           ", " + std::to_string(end) + ") is invalid");
  }
  validate(cfg.sto.cost);
  validate(cfg.omega);
}

double step_size(int t, const SimConfig& cfg) {
  if (t < 0 || t >= cfg.opt_window_end) {
    throw Error(ErrorCode::kOutOfWindow, "step " + std::to_string(t) +
                                             " is outside the optimization window");
  }
  const double frac = cfg.opt_window_end > 1 ? double(t) / (cfg.opt_window_end - 1) : 0.0;
  return cfg.scale_factor * (cfg.scale_start + (cfg.scale_end - cfg.scale_start) * frac);
}

double temperature_at(int t, const SimConfig& cfg) {
  const double frac = std::clamp(double(t) / cfg.total_steps, 0.0, 1.0);
  if (frac == 1.0) return cfg.temperature_end;
  return cfg.temperature_start * std::pow(cfg.temperature_end / cfg.temperature_start, frac);
}

std::vector<Field> background_anneal(const std::vector<Field>& latents, int /*t*/,
                                     const SimConfig& /*cfg*/) {
  return latents;
}

std::vector<Field> init_latents(int tokens, int side, std::uint64_t seed, const InitConfig& init) {
  if (tokens < 1) throw Error(ErrorCode::kBadConfig, "need at least one token");
  const double width = init.bump_width > 0.0 ? init.bump_width : side / 4.0;
  const double lo = 0.25 * (side - 1);
  const double hi = 0.75 * (side - 1);
  std::vector<Field> out;
  out.reserve(tokens);
  for (int k = 0; k < tokens; ++k) {
    rng::Stream s(rng::derive(seed, "latent", static_cast<std::uint64_t>(k)));
    const double cj = s.uniform(lo, hi);
    const double ci = s.uniform(lo, hi);
    Field z(side, side);
    for (int i = 0; i < side; ++i) {
      for (int j = 0; j < side; ++j) {
        const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
        z(i, j) = init.bump_amplitude * std::exp(-d2 / (2.0 * width * width)) + init.noise * s.normal();
      }
    }
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<std::pair<Centroid, Centroid>> draw_none_centers(const std::vector<SpatialSpec>& specs,
                                                             int side, std::uint64_t seed) {
  // Uniform over the central P/2 x P/2 sub-grid.
  const double lo = side / 4.0;
  const double hi = 3.0 * side / 4.0 - 1.0;
  std::vector<std::pair<Centroid, Centroid>> out;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    rng::Stream s(rng::derive(seed, "none_target", p));
    Centroid a{s.uniform(lo, hi), s.uniform(lo, hi)};
    Centroid b{s.uniform(lo, hi), s.uniform(lo, hi)};
    out.emplace_back(a, b);
  }
  return out;
}

int token_count(const std::vector<SpatialSpec>& specs, const SimConfig& cfg) {
  int needed = 0;
  for (const auto& s : specs) needed = std::max({needed, s.source + 1, s.reference + 1});
  if (cfg.tokens > 0) {
    if (cfg.tokens < needed) throw Error(ErrorCode::kBadConfig, "spec refers to a missing token");
    return cfg.tokens;
  }
  return std::max(needed, 2);
}

namespace {

std::vector<GridMap> maps_at(const std::vector<Field>& latents, double temperature,
                             const SmoothingConfig& smoothing) {
  std::vector<GridMap> maps;
  maps.reserve(latents.size());
  for (const auto& z : latents) maps.push_back(attention_map(z, temperature, smoothing));
  return maps;
}

void describe(TraceRow& row, const std::vector<GridMap>& maps, const std::vector<SpatialSpec>& specs) {
  row.centroids.clear();
  for (const auto& m : maps) row.centroids.push_back(compute_centroid(m));
  if (!specs.empty()) {
    const RunMetrics m = evaluate_run(maps, specs);
    row.centroid_ok = m.centroid_ok;
    row.miou = m.miou;
  }
}

bool keep_refining(double normalized, double threshold, RefineRule rule) {
  return rule == RefineRule::kAboveOneMinusThreshold ? normalized > 1.0 - threshold
                                                     : normalized > threshold;
}

}  // namespace

SimState run_denoise_loop(const std::vector<SpatialSpec>& specs, const SimConfig& cfg) {
  validate(cfg);
  const int tokens = token_count(specs, cfg);
  for (const auto& s : specs) validate(s, tokens);

  SimState state;
  state.latents = init_latents(tokens, cfg.side, cfg.seed, cfg.init);
  for (auto& z : state.latents) z /= cfg.logit_gain;
  state.updates_per_step.assign(cfg.total_steps, 0);
  StoConfig sto = cfg.sto;
  sto.smoothing.logit_gain = cfg.logit_gain;
  StoEngine engine(cfg.side, sto, specs, draw_none_centers(specs, cfg.side, cfg.seed));
  const int window_end = cfg.window_end < 0 ? cfg.opt_window_end : cfg.window_end;

  try {
    for (int t = 0; t < cfg.total_steps; ++t) {
      state.step = t;
      state.latents = background_anneal(state.latents, t, cfg);
      const double tau = temperature_at(t, cfg);
      const bool active =
          cfg.sto_enabled && !specs.empty() && t >= cfg.window_start && t < window_end;
      if (!active) {
        TraceRow row;
        row.step = t;
        row.temperature = tau;
        describe(row, maps_at(state.latents, tau, sto.smoothing), specs);
        state.trace.push_back(std::move(row));
        continue;
      }

      const double omega = omega_at(t, cfg.omega);
      const double alpha = step_size(std::min(t, cfg.opt_window_end - 1), cfg);
      std::optional<double> threshold;
      const auto hit = std::find(cfg.refine_steps.begin(), cfg.refine_steps.end(), t);
      if (hit != cfg.refine_steps.end()) {
        threshold = cfg.refine_thresholds[hit - cfg.refine_steps.begin()];
      }

      StoLossReport report = engine.evaluate(state.latents, tau, omega);
      const double baseline = report.total;
      for (int iter = 0;; ++iter) {
        TraceRow row;
        row.step = t;
        row.iter = iter;
        row.temperature = tau;
        row.omega = omega;
        row.step_size = alpha;
        row.threshold = threshold;
        row.loss_before = report.total;

        // Backtracking: halve the step until the loss drops.
        bool accepted = false;
        double scale = 1.0;
        std::vector<Field> candidate;
        StoLossReport next;
        for (int h = 0; h <= cfg.line_search_halvings; ++h, scale *= 0.5) {
          candidate = sto_update(state.latents, report.latent_gradients, alpha * scale);
          next = engine.evaluate(candidate, tau, omega);
          if (next.total < report.total) {
            accepted = true;
            break;
          }
        }
        ++state.updates_per_step[t];
        if (accepted) {
          state.latents = std::move(candidate);
          report = std::move(next);
        }
        row.alpha = accepted ? alpha * scale : 0.0;
        row.loss_after = report.total;
        row.normalized = baseline > 0.0 ? std::clamp(report.total / baseline, 0.0, 1.0) : 0.0;
        row.converged = report.converged;
        describe(row, maps_at(state.latents, tau, sto.smoothing), specs);
        const double normalized = *row.normalized;
        state.trace.push_back(std::move(row));

        if (!accepted || !threshold) break;
        if (iter + 1 >= cfg.max_refine_iters) break;
        if (!keep_refining(normalized, *threshold, cfg.refine_rule)) break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFinite) throw;
    state.aborted = true;
    state.abort_reason = e.what();
  }

  const double final_tau = temperature_at(cfg.total_steps, cfg);
  if (!state.aborted) {
    state.maps = maps_at(state.latents, final_tau, sto.smoothing);
    if (!specs.empty()) state.metrics = evaluate_run(state.maps, specs);
  }
  return state;
}

SimState ablation_window(const std::vector<SpatialSpec>& specs, const SimConfig& cfg,
                         std::pair<int, int> window) {
  if (window.first < 0 || window.first >= window.second || window.second > cfg.total_steps) {
    throw Error(ErrorCode::kBadWindow, "window [" + std::to_string(window.first) + ", " +
                                           std::to_string(window.second) + ") is invalid");
  }
  SimConfig c = cfg;
  c.window_start = window.first;
  c.window_end = window.second;
  return run_denoise_loop(specs, c);
}

}  // namespace storm
