#pragma once

#include <Eigen/Core>
#include <string_view>

#include "storm/grid.hpp"

namespace storm {

// N x N transport cost between flattened cells, N = P * P.
using CostMatrix = Eigen::MatrixXd;

struct OmegaSchedule {
  enum class Mode { kDynamic, kFixed };

  double omega_max = 100.0;
  double k = 0.2;  // rate constant of the exponential ramp
  Mode mode = Mode::kDynamic;
  double fixed_value = 100.0;
};

// Which side of the outer product C_flat (x) 1_N carries the per-cell cost.
enum class StOrientation { kSourceIndexed, kTargetIndexed };

// Cost ablation ladder.
//   kManhattan        (B0) distance cost, p = 1, no spatial-transport term
//   kEuclidean        (B1) distance cost, p = 2, no spatial-transport term
//   kMixedDistance    (B2) mean of B0 and B1
//   kPositionalOnly   (B3) spatial-transport cost with A_ij replaced by 1/N
//   kSpatialTransport (B4) full cost
enum class CostVariant { kManhattan, kEuclidean, kMixedDistance, kPositionalOnly, kSpatialTransport };

std::string_view to_string(CostVariant variant);
CostVariant parse_cost_variant(std::string_view text);
std::string_view to_string(StOrientation orientation);
StOrientation parse_orientation(std::string_view text);

struct CostConfig {
  double lambda_mix = 0.01;
  double p_norm = 2.0;
  double eps_stab = 1e-3;
  StOrientation orientation = StOrientation::kSourceIndexed;
  CostVariant variant = CostVariant::kSpatialTransport;
};

void validate(const CostConfig& cfg);
void validate(const OmegaSchedule& sched);

// Signed distances from a cell to the reference point along each direction.
struct Deltas {
  double left;   // j_ref - j
  double right;  // j - j_ref
  double up;     // i_ref - i
  double down;   // i - i_ref
};

Deltas delta_values(int i, int j, const Centroid& ref);

// (desired, restricted) pair for a spatial relation.
std::pair<double, double> select_deltas(SpatialRelation relation, const Deltas& d);

double positional_delta_cost(double delta_des, double delta_res, double omega, double eps_stab);

double st_cell_cost(const GridMap& ref_map, int i, int j, SpatialRelation relation,
                    const Centroid& ref, double omega, double eps_stab);

// Positional factor Delta_ij for every cell, flattened (length N).
Eigen::VectorXd positional_field(int side, SpatialRelation relation, const Centroid& ref,
                                 double omega, double eps_stab);

CostMatrix outer_with_ones(const Eigen::VectorXd& per_cell, StOrientation orientation);

CostMatrix st_cost_matrix(const GridMap& ref_map, SpatialRelation relation, const Centroid& ref,
                          double omega, double eps_stab,
                          StOrientation orientation = StOrientation::kSourceIndexed);

CostMatrix dist_cost_matrix(int side, double p_norm);

CostMatrix combined_cost(const CostMatrix& c_dist, const CostMatrix& c_st, double lambda_mix);

CostMatrix object_overlap_cost(const GridMap& ref_map,
                               StOrientation orientation = StOrientation::kSourceIndexed);

CostMatrix attribute_cost(int side);

double omega_at(double t, const OmegaSchedule& sched);

}  // namespace storm
