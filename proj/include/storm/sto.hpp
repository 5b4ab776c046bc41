#pragma once

#include <optional>
#include <vector>

#include "storm/cost.hpp"
#include "storm/grid.hpp"
#include "storm/ot.hpp"

namespace storm {

struct SpatialSpec {
  int source = 0;
  int reference = 1;
  SpatialRelation relation = SpatialRelation::kLeft;
};

void validate(const SpatialSpec& spec, int token_count);

struct SolverConfig {
  double eps_reg = 0.05;
  double tol = 1e-6;
  int max_iter = 10000;
};

struct SmoothingConfig {
  int kernel = 3;
  double sigma = 0.5;
  double logit_gain = 1.0;  // maps read softmax(gain * z / tau)
};

struct StoConfig {
  CostConfig cost;
  SolverConfig solver;
  SmoothingConfig smoothing;
  double target_sigma = 0.0;  // <= 0 selects side / 8
  TargetFrame frame = TargetFrame::kImage;
};

double resolved_target_sigma(const StoConfig& cfg, int side);

// Everything needed to differentiate one transport direction with respect to
// the two attention maps. The reference map enters either through the cost
// (per-cell factor times the plan marginal) or, for attribute pairs, as the
// target marginal itself.
struct PairProblem {
  TransportProblem problem;
  Eigen::VectorXd ref_cost_factor;  // dC_flat/dA_ref per cell, may be all zero
  bool ref_is_target = false;
};

// Distance matrices a pair needs; built once per grid side and variant.
struct DistanceCache {
  CostMatrix variant;    // distance term of the configured cost variant
  CostMatrix attribute;  // squared Euclidean, for attribute pairs
};

DistanceCache make_distance_cache(int side, const CostConfig& cfg);

PairProblem build_pair(const GridMap& src, const GridMap& ref, SpatialRelation relation,
                       double omega, const StoConfig& cfg, const Centroid& ref_centroid,
                       const DistanceCache& dist,
                       const std::optional<Centroid>& none_center = std::nullopt);

TransportProblem build_pair_problem(const GridMap& src, const GridMap& ref,
                                    SpatialRelation relation, double omega, const StoConfig& cfg,
                                    const std::optional<Centroid>& none_center = std::nullopt);

SpatialRelation reverse_relation(SpatialRelation relation);

struct PairLoss {
  double forward = 0.0;  // source moved relative to reference
  double reverse = 0.0;  // reference moved relative to source
  double transport_forward = 0.0;  // <P, C> parts, for reporting
  double transport_reverse = 0.0;
  double sum() const { return forward + reverse; }
};

PairLoss bidirectional_loss(const GridMap& a, const GridMap& b, SpatialRelation relation,
                            double omega, const StoConfig& cfg);

struct LossAggregate {
  double total = 0.0;
  double normalized = 0.0;
};

// normalized = total / baseline clamped to [0, 1]; baseline is the first
// evaluation of the current timestep.
LossAggregate aggregate_loss(const std::vector<PairLoss>& pairs, double baseline);

struct StoLossReport {
  std::vector<PairLoss> pairs;
  double total = 0.0;
  std::vector<Field> map_gradients;     // dL/dA per token
  std::vector<Field> latent_gradients;  // dL/dz per token
  std::vector<Centroid> centroids;      // per token, as used by the costs
  bool converged = true;
};

// The simulator's attention map: normalize(smooth(softmax(z / tau))).
GridMap attention_map(const Field& latent, double temperature, const SmoothingConfig& smoothing);

// Chain rule from map-space gradients back to latents, with centroids held
// fixed. Tokens without a gradient get zeros.
std::vector<Field> latent_gradient(const std::vector<Field>& map_gradients,
                                   const std::vector<Field>& latents, double temperature,
                                   const SmoothingConfig& smoothing);

std::vector<Field> sto_update(const std::vector<Field>& latents, const std::vector<Field>& gradients,
                              double alpha);

// Evaluates the summed bidirectional loss of a set of pairs and its latent
// gradient. Keeps the previous dual potentials per pair and direction to
// warm-start the next solve.
class StoEngine {
 public:
  StoEngine(int side, StoConfig cfg, std::vector<SpatialSpec> specs,
            std::vector<std::pair<Centroid, Centroid>> none_centers = {});

  StoLossReport evaluate(const std::vector<Field>& latents, double temperature, double omega,
                         bool with_gradient = true,
                         const std::vector<Centroid>* frozen_centroids = nullptr);

  const StoConfig& config() const { return cfg_; }
  const std::vector<SpatialSpec>& specs() const { return specs_; }
  void reset_warm_start();

 private:
  int side_;
  StoConfig cfg_;
  std::vector<SpatialSpec> specs_;
  std::vector<std::pair<Centroid, Centroid>> none_centers_;
  DistanceCache dist_;
  std::vector<std::optional<Eigen::VectorXd>> warm_;
};

}  // namespace storm
