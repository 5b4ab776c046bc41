#pragma once

#include <array>
#include <optional>
#include <vector>

#include "storm/grid.hpp"
#include "storm/sto.hpp"

namespace storm {

// Inclusive cell bounds.
struct Box {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  int width() const { return right - left + 1; }
  int height() const { return bottom - top + 1; }
  int area() const { return width() * height(); }
  double center_x() const { return 0.5 * (left + right); }
  double center_y() const { return 0.5 * (top + bottom); }
  bool operator==(const Box&) const = default;
};

bool centroid_relation(const GridMap& a, const GridMap& b, SpatialRelation relation);

// Greedy shrink from the full grid: repeatedly drop the edge row or column
// carrying the least mass while the box keeps at least `mass_fraction`.
Box bbox_from_grid(const GridMap& g, double mass_fraction = 0.9);

double box_iou(const Box& a, const Box& b);
double overlap_miou(const GridMap& a, const GridMap& b, double mass_fraction = 0.9);
// IoU of the raw supports {w >= 1/N}.
double support_iou(const GridMap& a, const GridMap& b);

bool compbench_relation(const GridMap& a, const GridMap& b, SpatialRelation relation,
                        double mass_fraction = 0.9);

// Object-presence proxy: the top ceil(q * N) cells hold at least `tau` of the mass.
bool oa_proxy(const GridMap& g, double q = 0.1, double tau = 0.5);

// Fraction of groups with at least n correct trials.
double visor_n(const std::vector<std::vector<bool>>& groups, int n);

struct RelationJudgment {
  SpatialRelation relation = SpatialRelation::kLeft;
  bool centroid_ok = false;
  bool compbench_ok = false;
  Centroid centroid_a, centroid_b;
  Box box_a, box_b;
  double miou = 0.0;
};

RelationJudgment judge_relation(const GridMap& a, const GridMap& b, SpatialRelation relation,
                                double mass_fraction = 0.9);

struct EvalConfig {
  double bbox_mass_fraction = 0.9;
  double oa_top_fraction = 0.1;
  double oa_concentration = 0.5;
  int visor_group_size = 4;
};

// Metrics of one run, judged on the first spec's pair; spatial correctness is
// the conjunction over every spatial spec (vacuously true without any).
struct RunMetrics {
  SpatialRelation relation = SpatialRelation::kNone;
  bool centroid_ok = false;
  bool compbench_ok = false;
  bool oa_a = false;
  bool oa_b = false;
  bool visor_uncond = false;
  std::optional<bool> visor_cond;  // defined only when both objects are present
  double miou = 0.0;
  double support_iou = 0.0;
};

RunMetrics evaluate_run(const std::vector<GridMap>& maps, const std::vector<SpatialSpec>& specs,
                        const EvalConfig& cfg = {});

struct AggregateMetrics {
  int runs = 0;
  double oa_rate = 0.0;
  double centroid_rate = 0.0;
  double compbench_rate = 0.0;
  double visor_uncond = 0.0;
  std::optional<double> visor_cond;
  std::array<std::optional<double>, 4> visor_n{};  // VISOR_1..VISOR_4
  double mean_miou = 0.0;
  double mean_support_iou = 0.0;
};

// Runs are grouped in consecutive blocks of `group_size` for VISOR_n;
// a trailing partial block is ignored.
AggregateMetrics aggregate_metrics(const std::vector<RunMetrics>& runs, int group_size = 4);

}  // namespace storm
