#include "storm/cost.hpp"

#include <cmath>
#include <string>

#include "storm/error.hpp"

namespace storm {

std::string_view to_string(CostVariant variant) {
  switch (variant) {
    case CostVariant::kManhattan: return "B0";
    case CostVariant::kEuclidean: return "B1";
    case CostVariant::kMixedDistance: return "B2";
    case CostVariant::kPositionalOnly: return "B3";
    case CostVariant::kSpatialTransport: return "B4";
  }
  return "B4";
}

CostVariant parse_cost_variant(std::string_view text) {
  for (auto v : {CostVariant::kManhattan, CostVariant::kEuclidean, CostVariant::kMixedDistance,
                 CostVariant::kPositionalOnly, CostVariant::kSpatialTransport}) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::kBadConfig, "unknown cost variant '" + std::string(text) + "'");
}

std::string_view to_string(StOrientation orientation) {
  return orientation == StOrientation::kSourceIndexed ? "source" : "target";
}

StOrientation parse_orientation(std::string_view text) {
  if (text == "source") return StOrientation::kSourceIndexed;
  if (text == "target") return StOrientation::kTargetIndexed;
  throw Error(ErrorCode::kBadConfig, "unknown orientation '" + std::string(text) + "'");
}

void validate(const CostConfig& cfg) {
  if (!(cfg.lambda_mix >= 0.0 && cfg.lambda_mix <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "lambda_mix must lie in [0, 1]");
  }
  if (!(cfg.p_norm >= 1.0)) throw Error(ErrorCode::kBadConfig, "p_norm must be >= 1");
  if (!(cfg.eps_stab > 0.0)) throw Error(ErrorCode::kBadConfig, "eps_stab must be positive");
}

void validate(const OmegaSchedule& sched) {
  if (!(sched.omega_max > 1.0)) throw Error(ErrorCode::kBadConfig, "omega_max must exceed 1");
  if (!(sched.k > 0.0)) throw Error(ErrorCode::kBadConfig, "omega rate k must be positive");
  if (sched.mode == OmegaSchedule::Mode::kFixed && !(sched.fixed_value > 0.0)) {
    throw Error(ErrorCode::kBadConfig, "fixed omega must be positive");
  }
}

Deltas delta_values(int i, int j, const Centroid& ref) {
  return {ref.j - j, j - ref.j, ref.i - i, i - ref.i};
}

std::pair<double, double> select_deltas(SpatialRelation relation, const Deltas& d) {
  switch (relation) {
    case SpatialRelation::kLeft: return {d.left, d.right};
    case SpatialRelation::kRight: return {d.right, d.left};
    case SpatialRelation::kAbove: return {d.up, d.down};
    case SpatialRelation::kBelow: return {d.down, d.up};
    default:
      throw Error(ErrorCode::kBadRelation,
                  "positional cost needs a spatial relation, got " + std::string(to_string(relation)));
  }
}

double positional_delta_cost(double delta_des, double delta_res, double omega, double eps_stab) {
  double cost = 0.0;
  if (delta_des > 0.0) cost += 1.0 / (omega * (delta_des + eps_stab));
  if (delta_res > 0.0) cost += omega * (delta_res + eps_stab);
  return cost;
}

double st_cell_cost(const GridMap& ref_map, int i, int j, SpatialRelation relation,
                    const Centroid& ref, double omega, double eps_stab) {
  const auto [des, res] = select_deltas(relation, delta_values(i, j, ref));
  return ref_map(i, j) * positional_delta_cost(des, res, omega, eps_stab);
}

Eigen::VectorXd positional_field(int side, SpatialRelation relation, const Centroid& ref,
                                 double omega, double eps_stab) {
  Eigen::VectorXd out(side * side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const auto [des, res] = select_deltas(relation, delta_values(i, j, ref));
      out(i * side + j) = positional_delta_cost(des, res, omega, eps_stab);
    }
  }
  return out;
}

CostMatrix outer_with_ones(const Eigen::VectorXd& per_cell, StOrientation orientation) {
  const Eigen::Index n = per_cell.size();
  if (orientation == StOrientation::kSourceIndexed) return per_cell.replicate(1, n);
  return per_cell.transpose().replicate(n, 1);
}

CostMatrix st_cost_matrix(const GridMap& ref_map, SpatialRelation relation, const Centroid& ref,
                          double omega, double eps_stab, StOrientation orientation) {
  const Eigen::VectorXd delta = positional_field(ref_map.side(), relation, ref, omega, eps_stab);
  return outer_with_ones(ref_map.flat().cwiseProduct(delta), orientation);
}

CostMatrix dist_cost_matrix(int side, double p_norm) {
  if (!(p_norm >= 1.0)) throw Error(ErrorCode::kBadConfig, "p_norm must be >= 1");
  const int n = side * side;
  CostMatrix c(n, n);
  for (int v = 0; v < n; ++v) {
    const int k = v / side;
    const int l = v % side;
    for (int u = 0; u < n; ++u) {
      const int di = std::abs(u / side - k);
      const int dj = std::abs(u % side - l);
      c(u, v) = p_norm == 2.0 ? double(di * di + dj * dj)
                              : std::pow(double(di), p_norm) + std::pow(double(dj), p_norm);
    }
  }
  return c;
}

CostMatrix combined_cost(const CostMatrix& c_dist, const CostMatrix& c_st, double lambda_mix) {
  if (c_dist.rows() != c_st.rows() || c_dist.cols() != c_st.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cost shapes differ: " + std::to_string(c_dist.rows()) + "x" +
                    std::to_string(c_dist.cols()) + " vs " + std::to_string(c_st.rows()) + "x" +
                    std::to_string(c_st.cols()));
  }
  return lambda_mix * c_dist + (1.0 - lambda_mix) * c_st;
}

CostMatrix object_overlap_cost(const GridMap& ref_map, StOrientation orientation) {
  return outer_with_ones(Eigen::VectorXd(ref_map.flat()), orientation);
}

CostMatrix attribute_cost(int side) { return dist_cost_matrix(side, 2.0); }

double omega_at(double t, const OmegaSchedule& sched) {
  if (sched.mode == OmegaSchedule::Mode::kFixed) return sched.fixed_value;
  return 1.0 + (sched.omega_max - 1.0) * (1.0 - std::exp(-sched.k * t));
}

}  // namespace storm
