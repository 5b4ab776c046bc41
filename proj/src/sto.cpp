#include "storm/sto.hpp"

#include <algorithm>
#include <string>

#include "storm/error.hpp"

namespace storm {

void validate(const SpatialSpec& spec, int token_count) {
  auto in_range = [&](int t) { return t >= 0 && t < token_count; };
  if (!in_range(spec.source) || !in_range(spec.reference)) {
    throw Error(ErrorCode::kBadConfig, "token id out of range (" + std::to_string(token_count) +
                                           " tokens)");
  }
  if (spec.source == spec.reference) {
    throw Error(ErrorCode::kBadConfig, "source and reference must be different tokens");
  }
}

double resolved_target_sigma(const StoConfig& cfg, int side) {
  return cfg.target_sigma > 0.0 ? cfg.target_sigma : default_target_sigma(side);
}

DistanceCache make_distance_cache(int side, const CostConfig& cfg) {
  DistanceCache cache;
  cache.attribute = dist_cost_matrix(side, 2.0);
  switch (cfg.variant) {
    case CostVariant::kManhattan: cache.variant = dist_cost_matrix(side, 1.0); break;
    case CostVariant::kEuclidean: cache.variant = cache.attribute; break;
    case CostVariant::kMixedDistance:
      cache.variant = 0.5 * (dist_cost_matrix(side, 1.0) + cache.attribute);
      break;
    case CostVariant::kPositionalOnly:
    case CostVariant::kSpatialTransport:
      cache.variant = cfg.p_norm == 2.0 ? cache.attribute : dist_cost_matrix(side, cfg.p_norm);
      break;
  }
  return cache;
}

PairProblem build_pair(const GridMap& src, const GridMap& ref, SpatialRelation relation,
                       double omega, const StoConfig& cfg, const Centroid& ref_centroid,
                       const DistanceCache& dist, const std::optional<Centroid>& none_center) {
  if (src.side() != ref.side()) {
    throw Error(ErrorCode::kShapeMismatch, "source and reference grids differ in size");
  }
  const int side = src.side();
  const int n = side * side;
  const double lambda = cfg.cost.lambda_mix;
  const double sigma_t = resolved_target_sigma(cfg, side);

  PairProblem out;
  out.problem.eps_reg = cfg.solver.eps_reg;
  out.problem.mu = normalize(src).flat();
  out.ref_cost_factor = Eigen::VectorXd::Zero(n);

  if (relation == SpatialRelation::kAttributeOf) {
    out.problem.nu = normalize(ref).flat();
    out.problem.cost = dist.attribute;
    out.ref_is_target = true;
    return out;
  }

  const GridMap ref_map = normalize(ref);
  GridMap target;
  Eigen::VectorXd per_cell;  // A_ij * Delta_ij or its variant
  if (relation == SpatialRelation::kNone) {
    const Centroid center = none_center.value_or(Centroid{(side - 1) / 2.0, (side - 1) / 2.0});
    target = gaussian_bump(center, side, sigma_t);
    per_cell = Eigen::VectorXd::Ones(n);
  } else {
    target = build_target_distribution(relation, ref_centroid, side, sigma_t, cfg.frame);
    per_cell = positional_field(side, relation, ref_centroid, omega, cfg.cost.eps_stab);
  }
  out.problem.nu = target.flat();

  switch (cfg.cost.variant) {
    case CostVariant::kSpatialTransport:
      out.ref_cost_factor = (1.0 - lambda) * per_cell;
      per_cell = per_cell.cwiseProduct(ref_map.flat());
      break;
    case CostVariant::kPositionalOnly:
      per_cell /= static_cast<double>(n);
      break;
    default:
      per_cell.setZero();
      break;
  }
  out.problem.cost = combined_cost(dist.variant, outer_with_ones(per_cell, cfg.cost.orientation),
                                   lambda);
  return out;
}

TransportProblem build_pair_problem(const GridMap& src, const GridMap& ref,
                                    SpatialRelation relation, double omega, const StoConfig& cfg,
                                    const std::optional<Centroid>& none_center) {
  const DistanceCache dist = make_distance_cache(src.side(), cfg.cost);
  return build_pair(src, ref, relation, omega, cfg, compute_centroid(ref), dist, none_center)
      .problem;
}

SpatialRelation reverse_relation(SpatialRelation relation) {
  switch (relation) {
    case SpatialRelation::kLeft: return SpatialRelation::kRight;
    case SpatialRelation::kRight: return SpatialRelation::kLeft;
    case SpatialRelation::kAbove: return SpatialRelation::kBelow;
    case SpatialRelation::kBelow: return SpatialRelation::kAbove;
    default: return relation;
  }
}

namespace {

SinkhornOptions solver_options(const SolverConfig& s) {
  SinkhornOptions o;
  o.tol = s.tol;
  o.max_iter = s.max_iter;
  return o;
}

}  // namespace

PairLoss bidirectional_loss(const GridMap& a, const GridMap& b, SpatialRelation relation,
                            double omega, const StoConfig& cfg) {
  const DistanceCache dist = make_distance_cache(a.side(), cfg.cost);
  PairLoss out;
  const PairProblem fwd = build_pair(a, b, relation, omega, cfg, compute_centroid(b), dist);
  const PairProblem rev =
      build_pair(b, a, reverse_relation(relation), omega, cfg, compute_centroid(a), dist);
  const SinkhornResult rf = sinkhorn(fwd.problem, solver_options(cfg.solver));
  const SinkhornResult rr = sinkhorn(rev.problem, solver_options(cfg.solver));
  out.forward = entropic_loss(rf, fwd.problem);
  out.reverse = entropic_loss(rr, rev.problem);
  out.transport_forward = transport_loss(rf.plan, fwd.problem.cost);
  out.transport_reverse = transport_loss(rr.plan, rev.problem.cost);
  return out;
}

LossAggregate aggregate_loss(const std::vector<PairLoss>& pairs, double baseline) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyPairs, "no pair losses to aggregate");
  LossAggregate out;
  for (const auto& p : pairs) out.total += p.sum();
  if (baseline > 0.0) {
    out.normalized = std::clamp(out.total / baseline, 0.0, 1.0);
  } else {
    out.normalized = out.total > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

GridMap attention_map(const Field& latent, double temperature, const SmoothingConfig& smoothing) {
  return normalize(gaussian_smooth(softmax_from_latent(latent * smoothing.logit_gain, temperature),
                                   smoothing.kernel, smoothing.sigma));
}

std::vector<Field> latent_gradient(const std::vector<Field>& map_gradients,
                                   const std::vector<Field>& latents, double temperature,
                                   const SmoothingConfig& smoothing) {
  if (map_gradients.size() != latents.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one gradient field per latent expected");
  }
  std::vector<Field> out;
  out.reserve(latents.size());
  for (std::size_t k = 0; k < latents.size(); ++k) {
    const Field& up = map_gradients[k];
    if (up.rows() != latents[k].rows() || up.cols() != latents[k].cols()) {
      throw Error(ErrorCode::kShapeMismatch, "gradient field " + std::to_string(k) +
                                                 " does not match its latent");
    }
    const GridMap soft = softmax_from_latent(latents[k] * smoothing.logit_gain, temperature);
    const GridMap smoothed = gaussian_smooth(soft, smoothing.kernel, smoothing.sigma);
    const double mass = smoothed.total();
    const Field& a = smoothed.weights();
    // through A = m / sum(m)
    const double proj = up.cwiseProduct(a).sum() / mass;
    const Field g_m = (up.array() - proj).matrix() / mass;
    // through m = S s
    const Field g_s = gaussian_smooth_adjoint(g_m, smoothing.kernel, smoothing.sigma);
    // through s = softmax(z / tau)
    const Field& s = soft.weights();
    const double inner = g_s.cwiseProduct(s).sum();
    out.push_back((s.array() * (g_s.array() - inner) * (smoothing.logit_gain / temperature)).matrix());
  }
  return out;
}

std::vector<Field> sto_update(const std::vector<Field>& latents, const std::vector<Field>& gradients,
                              double alpha) {
  if (latents.size() != gradients.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one gradient per latent expected");
  }
  std::vector<Field> out(latents.size());
  for (std::size_t k = 0; k < latents.size(); ++k) out[k] = latents[k] - alpha * gradients[k];
  return out;
}

StoEngine::StoEngine(int side, StoConfig cfg, std::vector<SpatialSpec> specs,
                     std::vector<std::pair<Centroid, Centroid>> none_centers)
    : side_(side),
      cfg_(std::move(cfg)),
      specs_(std::move(specs)),
      none_centers_(std::move(none_centers)),
      dist_(make_distance_cache(side, cfg_.cost)),
      warm_(2 * specs_.size()) {
  validate(cfg_.cost);
}

void StoEngine::reset_warm_start() {
  for (auto& w : warm_) w.reset();
}

StoLossReport StoEngine::evaluate(const std::vector<Field>& latents, double temperature,
                                  double omega, bool with_gradient,
                                  const std::vector<Centroid>* frozen_centroids) {
  const int tokens = static_cast<int>(latents.size());
  StoLossReport report;
  std::vector<GridMap> maps;
  maps.reserve(tokens);
  for (const auto& z : latents) {
    if (z.rows() != side_ || z.cols() != side_) {
      throw Error(ErrorCode::kShapeMismatch, "latent is not " + std::to_string(side_) + "x" +
                                                 std::to_string(side_));
    }
    maps.push_back(attention_map(z, temperature, cfg_.smoothing));
  }
  if (frozen_centroids) {
    if (static_cast<int>(frozen_centroids->size()) != tokens) {
      throw Error(ErrorCode::kShapeMismatch, "one frozen centroid per token expected");
    }
    report.centroids = *frozen_centroids;
  } else {
    for (const auto& m : maps) report.centroids.push_back(compute_centroid(m));
  }

  report.map_gradients.assign(tokens, Field::Zero(side_, side_));
  const auto opts = solver_options(cfg_.solver);

  auto run_direction = [&](std::size_t slot, int src, int ref, SpatialRelation rel,
                           const std::optional<Centroid>& none_center, double& loss,
                           double& transport) {
    const PairProblem pp = build_pair(maps[src], maps[ref], rel, omega, cfg_,
                                      report.centroids[ref], dist_, none_center);
    SinkhornOptions o = opts;
    o.warm_g = warm_[slot];
    const SinkhornResult r = sinkhorn(pp.problem, o);
    if (!r.converged) report.converged = false;
    warm_[slot] = r.dual_g;
    loss = entropic_loss(r, pp.problem);
    transport = transport_loss(r.plan, pp.problem.cost);
    if (!with_gradient) return;

    const Eigen::VectorXd f = r.dual_f.array() - r.dual_f.mean();
    report.map_gradients[src] += Eigen::Map<const Field>(f.data(), side_, side_);
    if (pp.ref_is_target) {
      const Eigen::VectorXd g = r.dual_g.array() - r.dual_g.mean();
      report.map_gradients[ref] += Eigen::Map<const Field>(g.data(), side_, side_);
    } else if (pp.ref_cost_factor.any()) {
      // dL/dC = plan; C_uv depends on A_ref through the per-cell factor on
      // the indexed side of the outer product.
      const Eigen::VectorXd marg = cfg_.cost.orientation == StOrientation::kSourceIndexed
                                       ? Eigen::VectorXd(r.plan.rowwise().sum())
                                       : Eigen::VectorXd(r.plan.colwise().sum().transpose());
      const Eigen::VectorXd ga = pp.ref_cost_factor.cwiseProduct(marg);
      report.map_gradients[ref] += Eigen::Map<const Field>(ga.data(), side_, side_);
    }
  };

  for (std::size_t p = 0; p < specs_.size(); ++p) {
    const SpatialSpec& spec = specs_[p];
    validate(spec, tokens);
    std::optional<Centroid> fwd_center, rev_center;
    if (spec.relation == SpatialRelation::kNone && p < none_centers_.size()) {
      fwd_center = none_centers_[p].first;
      rev_center = none_centers_[p].second;
    }
    PairLoss pl;
    run_direction(2 * p, spec.source, spec.reference, spec.relation, fwd_center, pl.forward,
                  pl.transport_forward);
    run_direction(2 * p + 1, spec.reference, spec.source, reverse_relation(spec.relation),
                  rev_center, pl.reverse, pl.transport_reverse);
    report.pairs.push_back(pl);
    report.total += pl.sum();
  }

  if (with_gradient) {
    report.latent_gradients =
        latent_gradient(report.map_gradients, latents, temperature, cfg_.smoothing);
    for (const auto& g : report.latent_gradients) {
      if (!g.allFinite()) throw Error(ErrorCode::kNonFinite, "latent gradient is not finite");
    }
  }
  return report;
}

}  // namespace storm
