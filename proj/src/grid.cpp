#include "storm/grid.hpp"

#include <cmath>
#include <string>

#include "storm/error.hpp"

namespace storm {

GridMap::GridMap(int side) : weights_(Field::Zero(side, side)) {}

GridMap::GridMap(Field weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "grid must be square, got " + std::to_string(weights_.rows()) + "x" +
                    std::to_string(weights_.cols()));
  }
  if (!weights_.allFinite()) throw Error(ErrorCode::kNonFinite, "grid weights must be finite");
  if ((weights_.array() < 0.0).any()) {
    throw Error(ErrorCode::kBadConfig, "grid weights must be nonnegative");
  }
}

GridMap GridMap::from_flat(const Eigen::VectorXd& flat, int side) {
  if (flat.size() != static_cast<Eigen::Index>(side) * side) {
    throw Error(ErrorCode::kShapeMismatch, "flat vector of length " +
                                               std::to_string(flat.size()) +
                                               " does not fill a side-" + std::to_string(side) +
                                               " grid");
  }
  Field w = Eigen::Map<const Field>(flat.data(), side, side);
  return GridMap(std::move(w));
}

std::string_view to_string(SpatialRelation relation) {
  switch (relation) {
    case SpatialRelation::kLeft: return "left";
    case SpatialRelation::kRight: return "right";
    case SpatialRelation::kAbove: return "above";
    case SpatialRelation::kBelow: return "below";
    case SpatialRelation::kNone: return "none";
    case SpatialRelation::kAttributeOf: return "attribute_of";
  }
  return "none";
}

SpatialRelation parse_relation(std::string_view text) {
  for (auto r : {SpatialRelation::kLeft, SpatialRelation::kRight, SpatialRelation::kAbove,
                 SpatialRelation::kBelow, SpatialRelation::kNone,
                 SpatialRelation::kAttributeOf}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::kBadRelation, "unknown relation '" + std::string(text) + "'");
}

bool is_spatial(SpatialRelation relation) {
  return relation == SpatialRelation::kLeft || relation == SpatialRelation::kRight ||
         relation == SpatialRelation::kAbove || relation == SpatialRelation::kBelow;
}

GridMap normalize(const GridMap& g) {
  const double mass = g.total();
  if (!(mass > 0.0)) throw Error(ErrorCode::kZeroMass, "cannot normalize a grid without mass");
  return GridMap(Field(g.weights() / mass));
}

Centroid compute_centroid(const GridMap& g) {
  const double mass = g.total();
  if (!(mass > 0.0)) throw Error(ErrorCode::kZeroMass, "centroid of an empty grid");
  const Eigen::VectorXd col_mass = g.weights().colwise().sum().transpose();
  const Eigen::VectorXd row_mass = g.weights().rowwise().sum();
  const auto idx = Eigen::VectorXd::LinSpaced(g.side(), 0.0, g.side() - 1.0);
  return {idx.dot(col_mass) / mass, idx.dot(row_mass) / mass};
}

namespace {

// 1-D smoothing operator with half-sample symmetric boundary. The out-of-grid
// tail folds back onto the grid, so the matrix is symmetric and doubly
// stochastic: mass is preserved and constants are fixed points.
Eigen::MatrixXd smoothing_matrix(int side, int kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorCode::kBadKernel, "kernel size must be odd and >= 1, got " +
                                           std::to_string(kernel));
  }
  if (!(sigma > 0.0)) throw Error(ErrorCode::kBadKernel, "sigma must be positive");
  const int radius = kernel / 2;
  Eigen::VectorXd w(kernel);
  for (int k = -radius; k <= radius; ++k) w(k + radius) = std::exp(-(k * k) / (2.0 * sigma * sigma));
  w /= w.sum();

  auto reflect = [side](int x) {
    const int period = 2 * side;
    x %= period;
    if (x < 0) x += period;
    return x < side ? x : period - 1 - x;
  };

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(side, side);
  for (int x = 0; x < side; ++x) {
    for (int k = -radius; k <= radius; ++k) m(x, reflect(x + k)) += w(k + radius);
  }
  return m;
}

}  // namespace

GridMap gaussian_smooth(const GridMap& g, int kernel, double sigma) {
  const Eigen::MatrixXd m = smoothing_matrix(g.side(), kernel, sigma);
  Field out = m * g.weights() * m.transpose();
  // Round-off can leave -0.0 or tiny negatives on exactly-zero inputs.
  out = out.cwiseMax(0.0);
  return GridMap(std::move(out));
}

Field gaussian_smooth_adjoint(const Field& upstream, int kernel, double sigma) {
  const Eigen::MatrixXd m = smoothing_matrix(static_cast<int>(upstream.rows()), kernel, sigma);
  return m.transpose() * upstream * m;
}

Centroid target_center(SpatialRelation relation, const Centroid& ref, int side,
                       TargetFrame frame) {
  const double lo = frame == TargetFrame::kImage ? 0.0 : -0.5;
  const double hi = frame == TargetFrame::kImage ? side : side - 0.5;
  const double mid = 0.5 * (lo + hi);
  switch (relation) {
    case SpatialRelation::kLeft: return {(lo + ref.j) / 2.0, mid};
    case SpatialRelation::kRight: return {(hi + ref.j) / 2.0, mid};
    case SpatialRelation::kAbove: return {mid, (lo + ref.i) / 2.0};
    case SpatialRelation::kBelow: return {mid, (hi + ref.i) / 2.0};
    default:
      throw Error(ErrorCode::kBadRelation, "target distribution needs a spatial relation, got " +
                                               std::string(to_string(relation)));
  }
}

GridMap gaussian_bump(const Centroid& center, int side, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kBadConfig, "target sigma must be positive");
  Field w(side, side);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double dx = j - center.j;
      const double dy = i - center.i;
      w(i, j) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return normalize(GridMap(std::move(w)));
}

GridMap build_target_distribution(SpatialRelation relation, const Centroid& ref, int side,
                                  double sigma_t, TargetFrame frame) {
  return gaussian_bump(target_center(relation, ref, side, frame), side, sigma_t);
}

GridMap softmax_from_latent(const Field& latent, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kBadConfig, "temperature must be positive");
  if (!latent.allFinite()) throw Error(ErrorCode::kNonFinite, "latent contains non-finite values");
  const Field scaled = latent / temperature;
  Field e = (scaled.array() - scaled.maxCoeff()).exp().matrix();
  e /= e.sum();
  return GridMap(std::move(e));
}

double entropy(const GridMap& g) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < g.weights().size(); ++k) {
    const double p = g.weights().data()[k];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace storm
