#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "storm/eval.hpp"
#include "storm/sim.hpp"

namespace storm {

inline constexpr int kSchemaVersion = 1;

struct ExportFlags {
  bool dump_pgm = false;
};

struct ExperimentConfig {
  SimConfig sim;  // its seed field is ignored; runs take theirs from `seeds`
  std::vector<SpatialSpec> specs;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "out";
  ExportFlags exports;
};

// Strict JSON: schema_version must match, unknown keys and mistyped values
// raise kParse, semantic problems raise kBadConfig. Absent keys keep defaults.
ExperimentConfig parse_experiment(const std::string& text);
std::string dump_experiment(const ExperimentConfig& cfg);

std::string_view to_string(TargetFrame frame);
TargetFrame parse_target_frame(std::string_view text);
std::string_view to_string(RefineRule rule);
RefineRule parse_refine_rule(std::string_view text);

// ---- run outputs ----

std::string trace_csv(const SimState& state);
std::string summary_json(const SimState& state, const std::vector<SpatialSpec>& specs,
                         std::uint64_t seed);

// summary.json, trace.csv, map_<k>.csv for every final map and, when asked,
// step_<t>_token_<k>.pgm for every step.
void write_run(const std::filesystem::path& dir, const SimState& state,
               const std::vector<SpatialSpec>& specs, std::uint64_t seed, bool dump_pgm,
               const SimConfig& cfg);

// ---- metrics tables ----

struct MetricsRow {
  std::string config;
  std::uint64_t seed = 0;
  bool aborted = false;
  RunMetrics metrics;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

// One aggregate per distinct config label, in first-appearance order.
std::vector<std::pair<std::string, AggregateMetrics>> aggregate_by_config(
    const std::vector<MetricsRow>& rows, int group_size = 4);
std::string aggregate_csv(const std::vector<std::pair<std::string, AggregateMetrics>>& aggs);
std::string aggregate_json(const std::vector<std::pair<std::string, AggregateMetrics>>& aggs);

// Re-judges every run directory below `dir` (or `dir` itself) from its final
// maps and the specs recorded in summary.json. Ordered by path.
std::vector<MetricsRow> evaluate_trace_dir(const std::filesystem::path& dir);

// ---- sweeps ----

enum class SweepAxis { kWindow, kOmega, kCost };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepVariant {
  std::string label;
  SimConfig sim;
};

// window: (18,25) (12,25) (6,25) (0,25); omega: fixed 1, 50, 100, dynamic;
// cost: B0..B4.
std::vector<SweepVariant> sweep_variants(SweepAxis axis, const SimConfig& base);

// Runs every variant x seed on `jobs` worker threads. Rows come back in
// (variant, seed) order whatever the scheduling. When `out_dir` is non-empty
// each cell writes its run into out_dir/<variant>/seed_<s>.
std::vector<MetricsRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, int jobs,
                                  const std::filesystem::path& out_dir = {});

}  // namespace storm
