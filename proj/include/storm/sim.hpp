#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "storm/cost.hpp"
#include "storm/eval.hpp"
#include "storm/sto.hpp"

namespace storm {

// How refinement compares the normalized loss against T_t.
enum class RefineRule {
  kAboveOneMinusThreshold,  // keep refining while L_norm > 1 - T_t
  kAboveThreshold,          // keep refining while L_norm > T_t
};

struct InitConfig {
  double bump_amplitude = 2.5;
  double bump_width = 0.0;  // <= 0 selects side / 4
  double noise = 0.25;
};

struct SimConfig {
  int side = kDefaultGridSide;
  int total_steps = 50;
  int opt_window_end = 25;
  std::vector<int> refine_steps{5, 10, 15, 20};
  std::vector<double> refine_thresholds{0.05, 0.01, 0.005, 0.001};
  int max_refine_iters = 30;
  double scale_factor = 20.0;
  double scale_start = 1.0;
  double scale_end = 0.5;
  double temperature_start = 2.0;
  double temperature_end = 0.5;
  std::uint64_t seed = 0;
  int tokens = 0;  // 0: one more than the largest token id in the specs

  bool sto_enabled = true;
  int window_start = 0;
  int window_end = -1;  // < 0: opt_window_end
  RefineRule refine_rule = RefineRule::kAboveOneMinusThreshold;
  int line_search_halvings = 6;
  // Stand-in for the latent-to-logit Jacobian of a denoiser. Overrides
  // sto.smoothing.logit_gain; init amplitudes are given in logit units.
  double logit_gain = 2.0;

  InitConfig init;
  StoConfig sto;
  OmegaSchedule omega;
};

void validate(const SimConfig& cfg);

// alpha_t = scale_factor * lerp(scale_start, scale_end, t / (opt_window_end - 1)).
double step_size(int t, const SimConfig& cfg);

// Log-linear anneal from temperature_start (t = 0) to temperature_end (t = total_steps).
double temperature_at(int t, const SimConfig& cfg);

// Background dynamic between guidance updates. Sharpening acts only through
// the softmax temperature, so the latents come back unchanged.
std::vector<Field> background_anneal(const std::vector<Field>& latents, int t, const SimConfig& cfg);

// Token k draws from sub-stream ("latent", k): a broad Gaussian bump at a
// uniform centre in the middle half of the grid plus white noise.
std::vector<Field> init_latents(int tokens, int side, std::uint64_t seed, const InitConfig& init = {});

// Random target centres for relation-None pairs, sub-stream ("none_target", pair).
std::vector<std::pair<Centroid, Centroid>> draw_none_centers(const std::vector<SpatialSpec>& specs,
                                                             int side, std::uint64_t seed);

struct TraceRow {
  int step = 0;
  int iter = 0;  // refinement iteration within the step
  double temperature = 0.0;
  std::optional<double> omega;
  std::optional<double> step_size;  // scheduled alpha_t
  std::optional<double> alpha;      // step actually taken after line search
  std::optional<double> threshold;
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  std::optional<double> normalized;  // loss_after / first loss of the step
  bool converged = true;
  std::vector<Centroid> centroids;  // of the maps after this row's update
  bool centroid_ok = false;
  double miou = 0.0;
};

struct SimState {
  int step = 0;
  std::vector<Field> latents;
  std::vector<GridMap> maps;  // at the final temperature
  std::vector<TraceRow> trace;
  std::vector<int> updates_per_step;  // accepted + rejected update attempts
  RunMetrics metrics;
  bool aborted = false;
  std::string abort_reason;
};

int token_count(const std::vector<SpatialSpec>& specs, const SimConfig& cfg);

SimState run_denoise_loop(const std::vector<SpatialSpec>& specs, const SimConfig& cfg);

// Guidance restricted to [start, end) in forward step indices.
SimState ablation_window(const std::vector<SpatialSpec>& specs, const SimConfig& cfg,
                         std::pair<int, int> window);

}  // namespace storm
