#include <gtest/gtest.h>

#include <cmath>

#include "storm/error.hpp"
#include "storm/rng.hpp"
#include "storm/sim.hpp"
#include "storm/sto.hpp"

using namespace storm;

namespace {

Field random_latent(int side, rng::Stream& s, double scale = 1.0) {
  Field z(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) z(i, j) = scale * s.normal();
  return z;
}

Field flip_horizontal(const Field& f) { return f.rowwise().reverse(); }

StoConfig tight_config() {
  StoConfig cfg;
  cfg.solver.tol = 1e-11;
  cfg.solver.max_iter = 200000;
  return cfg;
}

GridMap bump_map(int side, double j, double i, double sigma) {
  return gaussian_bump(Centroid{j, i}, side, sigma);
}

}  // namespace

TEST(ReverseRelation, Pairs) {
  EXPECT_EQ(reverse_relation(SpatialRelation::kLeft), SpatialRelation::kRight);
  EXPECT_EQ(reverse_relation(SpatialRelation::kRight), SpatialRelation::kLeft);
  EXPECT_EQ(reverse_relation(SpatialRelation::kAbove), SpatialRelation::kBelow);
  EXPECT_EQ(reverse_relation(SpatialRelation::kBelow), SpatialRelation::kAbove);
  EXPECT_EQ(reverse_relation(SpatialRelation::kNone), SpatialRelation::kNone);
  EXPECT_EQ(reverse_relation(SpatialRelation::kAttributeOf), SpatialRelation::kAttributeOf);
}

TEST(BuildPair, LeftTargetSitsHalfwayToReference) {
  const int side = 16;
  const GridMap src = normalize(bump_map(side, 8, 8, 3.0));
  const GridMap ref = normalize(bump_map(side, 10, 8, 3.0));
  StoConfig cfg;
  const auto prob = build_pair_problem(src, ref, SpatialRelation::kLeft, 50.0, cfg);
  const Centroid ref_c = compute_centroid(ref);
  const Centroid nu_c = compute_centroid(GridMap::from_flat(prob.nu, side));
  EXPECT_NEAR(nu_c.j, ref_c.j / 2.0, 0.05);
  EXPECT_NEAR(nu_c.i, 8.0, 0.05);
  EXPECT_NEAR(prob.mu.sum(), 1.0, 1e-12);
  EXPECT_NEAR(prob.nu.sum(), 1.0, 1e-12);
  EXPECT_EQ(prob.cost.rows(), side * side);
}

TEST(BuildPair, NonePairHasNoPositionalFactor) {
  const int side = 8;
  const GridMap src = normalize(bump_map(side, 2, 2, 1.5));
  const GridMap ref = normalize(bump_map(side, 5, 5, 1.5));
  StoConfig cfg;
  const auto a = build_pair_problem(src, ref, SpatialRelation::kNone, 1.0, cfg, Centroid{3, 4});
  const auto b = build_pair_problem(src, ref, SpatialRelation::kNone, 100.0, cfg, Centroid{3, 4});
  EXPECT_LE((a.cost - b.cost).cwiseAbs().maxCoeff(), 1e-15);
  const Centroid nu_c = compute_centroid(GridMap::from_flat(a.nu, side));
  EXPECT_NEAR(nu_c.j, 3.0, 0.2);
  EXPECT_NEAR(nu_c.i, 4.0, 0.2);
}

TEST(BuildPair, AttributeOfIdenticalMapsLossVanishes) {
  const int side = 6;
  const GridMap m = normalize(bump_map(side, 2.5, 3.0, 1.2));
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.5, 0.1, 0.02}) {
    StoConfig cfg = tight_config();
    cfg.solver.eps_reg = eps;
    const auto p = build_pair_problem(m, m, SpatialRelation::kAttributeOf, 1.0, cfg);
    EXPECT_LE((p.nu - p.mu).cwiseAbs().maxCoeff(), 1e-15);
    const auto r = sinkhorn(p, SinkhornOptions{1e-10, 200000, std::nullopt});
    ASSERT_TRUE(r.converged);
    const double loss = transport_loss(r.plan, p.cost);
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(BuildPair, ShapeMismatch) {
  StoConfig cfg;
  EXPECT_THROW(build_pair_problem(normalize(bump_map(8, 3, 3, 1)), normalize(bump_map(6, 3, 3, 1)),
                                  SpatialRelation::kLeft, 1.0, cfg),
               Error);
}

TEST(BuildPair, ZeroMassSourceRejected) {
  StoConfig cfg;
  try {
    build_pair_problem(GridMap(8), normalize(bump_map(8, 3, 3, 1)), SpatialRelation::kLeft, 1.0,
                       cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroMass);
  }
}

TEST(BidirectionalLoss, MirroredMapsGiveEqualDirections) {
  const int side = 16;
  StoConfig cfg = tight_config();
  cfg.frame = TargetFrame::kCellCenter;
  const GridMap a = normalize(bump_map(side, 4.0, 7.0, 2.0));
  const GridMap b = normalize(bump_map(side, 11.0, 7.0, 2.0));  // mirror of a about 7.5
  const PairLoss l = bidirectional_loss(a, b, SpatialRelation::kLeft, 20.0, cfg);
  EXPECT_NEAR(l.forward, l.reverse, 1e-6);
}

TEST(BidirectionalLoss, CorrectLayoutBeatsColocated) {
  const int side = 16;
  StoConfig cfg;
  const double omega = 50.0;
  const GridMap left = normalize(bump_map(side, 3.0, 7.5, 1.5));
  const GridMap right = normalize(bump_map(side, 12.0, 7.5, 1.5));
  const GridMap mid = normalize(bump_map(side, 7.5, 7.5, 1.5));
  const PairLoss good = bidirectional_loss(left, right, SpatialRelation::kLeft, omega, cfg);
  const PairLoss same = bidirectional_loss(mid, mid, SpatialRelation::kLeft, omega, cfg);
  EXPECT_LT(good.forward, same.forward);
  EXPECT_LT(good.reverse, same.reverse);
}

TEST(BidirectionalLoss, NoneDisjointOverlapTermVanishesAtMass) {
  const int side = 8;
  Field a = Field::Constant(side, side, 1e-12);
  Field b = Field::Constant(side, side, 1e-12);
  a(1, 1) = 1.0;
  b(6, 6) = 1.0;
  const GridMap ref = normalize(GridMap(b));
  const CostMatrix overlap = object_overlap_cost(ref);
  const int u = 1 * side + 1;
  EXPECT_LT(overlap.row(u).cwiseAbs().maxCoeff(), 1e-10);
  StoConfig cfg;
  const auto prob = build_pair_problem(normalize(GridMap(a)), ref, SpatialRelation::kNone, 1.0, cfg);
  const CostMatrix dist = dist_cost_matrix(side, cfg.cost.p_norm);
  const CostMatrix st_part = prob.cost - cfg.cost.lambda_mix * dist;
  EXPECT_LT(st_part.row(u).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AggregateLoss, Examples) {
  PairLoss p;
  p.forward = 1.5;
  p.reverse = 2.0;
  auto one = aggregate_loss({p}, 7.0);
  EXPECT_DOUBLE_EQ(one.total, 3.5);
  EXPECT_DOUBLE_EQ(one.normalized, 0.5);

  auto two = aggregate_loss({p, p}, 14.0);
  EXPECT_DOUBLE_EQ(two.total, 7.0);
  EXPECT_DOUBLE_EQ(two.normalized, one.normalized);

  rng::Stream s(3);
  std::vector<PairLoss> three(3);
  double sum = 0.0;
  for (auto& q : three) {
    q.forward = s.uniform();
    q.reverse = s.uniform();
    sum += q.forward + q.reverse;
  }
  EXPECT_NEAR(aggregate_loss(three, sum).total, sum, 1e-15);
  EXPECT_DOUBLE_EQ(aggregate_loss(three, sum).normalized, 1.0);
  EXPECT_DOUBLE_EQ(aggregate_loss(three, sum / 4).normalized, 1.0);  // clamped

  try {
    aggregate_loss({}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPairs);
  }
}

TEST(StoUpdate, Arithmetic) {
  rng::Stream s(1);
  const std::vector<Field> z{random_latent(4, s), random_latent(4, s)};
  const std::vector<Field> g{random_latent(4, s), random_latent(4, s)};
  const std::vector<Field> zero{Field::Zero(4, 4), Field::Zero(4, 4)};
  EXPECT_TRUE(sto_update(z, zero, 3.0)[1] == z[1]);
  EXPECT_TRUE(sto_update(z, g, 0.0)[0] == z[0]);
  const auto out = sto_update(z, g, 2.0);
  for (int k = 0; k < 2; ++k) EXPECT_TRUE(out[k] == (z[k] - 2.0 * g[k]).eval());
  EXPECT_THROW(sto_update(z, {g[0]}, 1.0), Error);
}

TEST(LatentGradient, SumsToZeroPerToken) {
  const int side = 8;
  rng::Stream s(5);
  StoEngine engine(side, tight_config(), {SpatialSpec{0, 1, SpatialRelation::kLeft}});
  const std::vector<Field> z{random_latent(side, s), random_latent(side, s)};
  const auto rep = engine.evaluate(z, 1.0, 20.0);
  for (const auto& g : rep.latent_gradients) {
    EXPECT_NEAR(g.sum(), 0.0, 1e-10);
    EXPECT_TRUE(g.allFinite());
  }
  // Uniform latents as well.
  const std::vector<Field> flat{Field::Zero(side, side), Field::Zero(side, side)};
  for (const auto& g : engine.evaluate(flat, 1.0, 20.0).latent_gradients) EXPECT_NEAR(g.sum(), 0.0, 1e-10);
}

TEST(LatentGradient, MatchesFiniteDifferences) {
  const int side = 8;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rng::Stream s(100 + seed);
    StoConfig cfg = tight_config();
    cfg.smoothing.logit_gain = 2.0;
    StoEngine engine(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kLeft}});
    const std::vector<Field> z{random_latent(side, s), random_latent(side, s)};
    const double tau = 1.0, omega = 20.0;
    const auto rep = engine.evaluate(z, tau, omega);
    const auto frozen = rep.centroids;

    const double h = 1e-5;
    double err2 = 0.0, ref2 = 0.0;
    for (int k = 0; k < 2; ++k) {
      for (int c = 0; c < side * side; ++c) {
        auto plus = z, minus = z;
        plus[k].data()[c] += h;
        minus[k].data()[c] -= h;
        engine.reset_warm_start();
        const double lp = engine.evaluate(plus, tau, omega, false, &frozen).total;
        engine.reset_warm_start();
        const double lm = engine.evaluate(minus, tau, omega, false, &frozen).total;
        const double fd = (lp - lm) / (2 * h);
        const double an = rep.latent_gradients[k].data()[c];
        err2 += (fd - an) * (fd - an);
        ref2 += an * an;
      }
    }
    EXPECT_LT(std::sqrt(err2 / ref2), 1e-2) << "seed " << seed;
  }
}

TEST(LatentGradient, MirrorEquivariance) {
  const int side = 8;
  rng::Stream s(77);
  StoConfig cfg = tight_config();
  cfg.frame = TargetFrame::kCellCenter;
  const std::vector<Field> z{random_latent(side, s), random_latent(side, s)};
  const std::vector<Field> zf{flip_horizontal(z[0]), flip_horizontal(z[1])};
  StoEngine left(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kLeft}});
  StoEngine right(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kRight}});
  const auto a = left.evaluate(z, 1.0, 30.0);
  const auto b = right.evaluate(zf, 1.0, 30.0);
  EXPECT_NEAR(a.total, b.total, 1e-9);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE((flip_horizontal(a.latent_gradients[k]) - b.latent_gradients[k]).cwiseAbs().maxCoeff(),
              1e-9);
  }
}

TEST(LatentGradient, SatisfiedLayoutHasSmallGradient) {
  const int side = 16;
  StoConfig cfg = tight_config();
  cfg.smoothing.kernel = 1;
  const double tau = 1.0, omega = 20.0;
  auto latent_for = [&](double j, double i) {
    // softmax(log w) = w, so the map is exactly the bump.
    return Field(bump_map(side, j, i, 1.5).weights().array().max(1e-300).log().matrix());
  };
  StoEngine engine(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kLeft}});

  // Reference on the right; the source bump sits where the left target is,
  // and the reference sits where its own reverse target is.
  const Field zr = latent_for(12.0, 7.5);
  const Centroid rc = compute_centroid(attention_map(zr, tau, cfg.smoothing));
  const Centroid src_target = target_center(SpatialRelation::kLeft, rc, side, cfg.frame);
  const Field zs = latent_for(src_target.j, src_target.i);
  const auto good = engine.evaluate({zs, zr}, tau, omega);

  const Field zc = latent_for(7.5, 7.5);
  engine.reset_warm_start();
  const auto same = engine.evaluate({zc, zc}, tau, omega);
  EXPECT_LT(good.latent_gradients[0].norm(), same.latent_gradients[0].norm());
  EXPECT_LT(good.total, same.total);
}

TEST(StoEngine, LineSearchUpdateDecreasesLoss) {
  const int side = 16;
  SimConfig sim;
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    StoConfig cfg = sim.sto;
    cfg.smoothing.logit_gain = sim.logit_gain;
    StoEngine engine(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kLeft}});
    auto z = init_latents(2, side, seed, sim.init);
    for (auto& f : z) f /= sim.logit_gain;
    const double tau = temperature_at(5, sim);
    const double omega = omega_at(5.0, sim.omega);
    const auto rep = engine.evaluate(z, tau, omega);
    double alpha = step_size(5, sim);
    bool ok = false;
    for (int h = 0; h <= sim.line_search_halvings; ++h, alpha /= 2) {
      const auto next = sto_update(z, rep.latent_gradients, alpha);
      if (engine.evaluate(next, tau, omega, false).total < rep.total) {
        ok = true;
        break;
      }
    }
    decreased += ok ? 1 : 0;
  }
  EXPECT_EQ(decreased, 20);
}

TEST(StoEngine, RejectsBadShapesAndSpecs) {
  StoEngine engine(8, StoConfig{}, {SpatialSpec{0, 3, SpatialRelation::kLeft}});
  rng::Stream s(2);
  EXPECT_THROW(engine.evaluate({random_latent(8, s), random_latent(8, s)}, 1.0, 1.0), Error);
  StoEngine ok(8, StoConfig{}, {SpatialSpec{0, 1, SpatialRelation::kLeft}});
  EXPECT_THROW(ok.evaluate({random_latent(8, s), random_latent(6, s)}, 1.0, 1.0), Error);
  EXPECT_THROW(validate(SpatialSpec{1, 1, SpatialRelation::kAbove}, 2), Error);
}

TEST(StoEngine, WarmStartDoesNotChangeResult) {
  const int side = 8;
  rng::Stream s(9);
  const std::vector<Field> z{random_latent(side, s), random_latent(side, s)};
  StoConfig cfg = tight_config();
  StoEngine engine(side, cfg, {SpatialSpec{0, 1, SpatialRelation::kAbove}});
  const auto cold = engine.evaluate(z, 1.0, 10.0);
  const auto warm = engine.evaluate(z, 1.0, 10.0);
  EXPECT_NEAR(cold.total, warm.total, 1e-9);
  EXPECT_LE((cold.latent_gradients[0] - warm.latent_gradients[0]).cwiseAbs().maxCoeff(), 1e-7);
}
