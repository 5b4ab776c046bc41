#pragma once

#include <Eigen/Core>
#include <string_view>

namespace storm {

// Row-major so that a P x P field flattens to cell index u = i * P + j.
using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDefaultGridSide = 16;

// Nonnegative P x P weight field standing in for one token's attention map.
// Row index i grows downward, column index j grows rightward.
class GridMap {
 public:
  GridMap() = default;
  explicit GridMap(int side);  // all zeros
  explicit GridMap(Field weights);

  int side() const { return static_cast<int>(weights_.rows()); }
  int cells() const { return side() * side(); }
  const Field& weights() const { return weights_; }
  double operator()(int i, int j) const { return weights_(i, j); }
  double total() const { return weights_.sum(); }

  // Flattened view, cell u = i * P + j.
  Eigen::Map<const Eigen::VectorXd> flat() const {
    return {weights_.data(), weights_.size()};
  }
  static GridMap from_flat(const Eigen::VectorXd& flat, int side);

 private:
  Field weights_;
};

struct Centroid {
  double j = 0.0;  // column (horizontal)
  double i = 0.0;  // row (vertical)
};

enum class SpatialRelation { kLeft, kRight, kAbove, kBelow, kNone, kAttributeOf };

std::string_view to_string(SpatialRelation relation);
SpatialRelation parse_relation(std::string_view text);
bool is_spatial(SpatialRelation relation);

// How the direction centroids map the image extent onto cell coordinates.
//   kImage:      image spans [0, P], centre P/2 (literal substitution).
//   kCellCenter: image spans [-0.5, P - 0.5], centre (P - 1)/2; exactly
//                mirror-symmetric on the cell lattice.
enum class TargetFrame { kImage, kCellCenter };

GridMap normalize(const GridMap& g);
Centroid compute_centroid(const GridMap& g);

GridMap gaussian_smooth(const GridMap& g, int kernel = 3, double sigma = 0.5);
// Adjoint of gaussian_smooth as a linear map; used for backpropagation.
Field gaussian_smooth_adjoint(const Field& upstream, int kernel = 3, double sigma = 0.5);

Centroid target_center(SpatialRelation relation, const Centroid& ref, int side,
                       TargetFrame frame = TargetFrame::kImage);
// Normalized circular Gaussian evaluated at integer cell centres.
GridMap gaussian_bump(const Centroid& center, int side, double sigma);
GridMap build_target_distribution(SpatialRelation relation, const Centroid& ref, int side,
                                  double sigma_t, TargetFrame frame = TargetFrame::kImage);

inline double default_target_sigma(int side) { return side / 8.0; }

GridMap softmax_from_latent(const Field& latent, double temperature);

// Shannon entropy in nats.
double entropy(const GridMap& g);

}  // namespace storm
