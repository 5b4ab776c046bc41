#include <gtest/gtest.h>

#include <cmath>

#include "storm/error.hpp"
#include "storm/eval.hpp"
#include "storm/rng.hpp"

using namespace storm;

namespace {

GridMap point_mass(int side, int i, int j) {
  Field f = Field::Zero(side, side);
  f(i, j) = 1.0;
  return GridMap(f);
}

GridMap box_map(int side, const Box& b) {
  Field f = Field::Zero(side, side);
  for (int i = b.top; i <= b.bottom; ++i)
    for (int j = b.left; j <= b.right; ++j) f(i, j) = 1.0;
  return normalize(GridMap(f));
}

GridMap random_map(int side, rng::Stream& s) {
  Field f(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) f(i, j) = std::pow(s.uniform(), 4.0);
  return normalize(GridMap(f));
}

template <typename Fn>
void expect_zero_mass(Fn fn) {
  try {
    fn();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroMass);
  }
}

}  // namespace

TEST(CentroidRelation, Rules) {
  const int side = 16;
  const GridMap a = gaussian_bump({4, 8}, side, 1.5);
  const GridMap b = gaussian_bump({12, 8}, side, 1.5);
  EXPECT_TRUE(centroid_relation(a, b, SpatialRelation::kLeft));
  EXPECT_FALSE(centroid_relation(a, b, SpatialRelation::kRight));
  EXPECT_TRUE(centroid_relation(b, a, SpatialRelation::kRight));

  const GridMap up = gaussian_bump({8, 3}, side, 1.5);
  const GridMap down = gaussian_bump({8, 11}, side, 1.5);
  EXPECT_TRUE(centroid_relation(up, down, SpatialRelation::kAbove));
  EXPECT_TRUE(centroid_relation(down, up, SpatialRelation::kBelow));

  for (auto r : {SpatialRelation::kLeft, SpatialRelation::kRight, SpatialRelation::kAbove,
                 SpatialRelation::kBelow}) {
    EXPECT_FALSE(centroid_relation(a, a, r));
  }
  expect_zero_mass([&] { centroid_relation(GridMap(side), a, SpatialRelation::kLeft); });
}

TEST(Bbox, Examples) {
  EXPECT_EQ(bbox_from_grid(point_mass(16, 3, 9)), (Box{3, 9, 3, 9}));
  const GridMap uniform(Field::Constant(16, 16, 1.0));
  EXPECT_EQ(bbox_from_grid(uniform, 1.0), (Box{0, 0, 15, 15}));

  const Box g = bbox_from_grid(gaussian_bump({7.5, 7.5}, 16, 2.0), 0.9);
  EXPECT_GE(g.width(), 5);
  EXPECT_LE(g.width(), 9);
  EXPECT_GE(g.height(), 5);
  EXPECT_LE(g.height(), 9);
  expect_zero_mass([] { bbox_from_grid(GridMap(8)); });
}

TEST(Bbox, EnclosesRequestedMass) {
  rng::Stream s(4);
  for (int trial = 0; trial < 20; ++trial) {
    const GridMap m = random_map(12, s);
    const Box b = bbox_from_grid(m, 0.8);
    double inside = 0.0;
    for (int i = b.top; i <= b.bottom; ++i)
      for (int j = b.left; j <= b.right; ++j) inside += m(i, j);
    EXPECT_GE(inside, 0.8 - 1e-12);
  }
}

TEST(BoxIou, Examples) {
  const Box a{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(box_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(a, Box{5, 5, 6, 6}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou(a, Box{1, 1, 2, 2}), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(overlap_miou(box_map(16, a), box_map(16, Box{1, 1, 2, 2}), 1.0), 1.0 / 7.0);
}

TEST(BoxIou, Symmetric) {
  rng::Stream s(8);
  for (int trial = 0; trial < 20; ++trial) {
    const GridMap a = random_map(10, s), b = random_map(10, s);
    EXPECT_DOUBLE_EQ(overlap_miou(a, b), overlap_miou(b, a));
    const double v = overlap_miou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SupportIou, Basics) {
  const GridMap a = box_map(8, Box{0, 0, 3, 3});
  const GridMap b = box_map(8, Box{0, 2, 3, 5});
  EXPECT_DOUBLE_EQ(support_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(support_iou(a, b), 8.0 / 24.0);
  EXPECT_DOUBLE_EQ(support_iou(a, box_map(8, Box{5, 5, 7, 7})), 0.0);
}

TEST(Compbench, Examples) {
  const int side = 16;
  const GridMap a = box_map(side, Box{7, 3, 9, 5});    // centre (j=4, i=8)
  const GridMap b = box_map(side, Box{7, 11, 9, 13});  // centre (j=12, i=8)
  EXPECT_TRUE(compbench_relation(a, b, SpatialRelation::kLeft, 1.0));
  EXPECT_FALSE(compbench_relation(a, a, SpatialRelation::kLeft, 1.0));
  const GridMap c = box_map(side, Box{0, 2, 1, 3});    // centre (j=2.5, i=0.5)
  const GridMap d = box_map(side, Box{13, 5, 14, 6});  // centre (j=5.5, i=13.5)
  EXPECT_FALSE(compbench_relation(c, d, SpatialRelation::kLeft, 1.0));
  EXPECT_TRUE(compbench_relation(c, d, SpatialRelation::kAbove, 1.0));
}

TEST(Compbench, LeftRightSymmetry) {
  rng::Stream s(15);
  for (int trial = 0; trial < 30; ++trial) {
    const GridMap a = gaussian_bump({s.uniform(0, 15), s.uniform(0, 15)}, 16, 1.5);
    const GridMap b = gaussian_bump({s.uniform(0, 15), s.uniform(0, 15)}, 16, 1.5);
    EXPECT_EQ(compbench_relation(a, b, SpatialRelation::kLeft),
              compbench_relation(b, a, SpatialRelation::kRight));
    EXPECT_EQ(compbench_relation(a, b, SpatialRelation::kAbove),
              compbench_relation(b, a, SpatialRelation::kBelow));
  }
}

TEST(OaProxy, Examples) {
  EXPECT_TRUE(oa_proxy(point_mass(16, 4, 4)));
  EXPECT_FALSE(oa_proxy(GridMap(Field::Constant(16, 16, 1.0))));
  EXPECT_TRUE(oa_proxy(gaussian_bump({7, 7}, 16, 1.0)));
  expect_zero_mass([] { oa_proxy(GridMap(4)); });
}

TEST(VisorN, Examples) {
  const std::vector<std::vector<bool>> g{{true, true, false, false}};
  EXPECT_DOUBLE_EQ(visor_n(g, 2), 1.0);
  EXPECT_DOUBLE_EQ(visor_n(g, 3), 0.0);
  const std::vector<std::vector<bool>> all(5, std::vector<bool>(4, true));
  for (int n = 1; n <= 4; ++n) EXPECT_DOUBLE_EQ(visor_n(all, n), 1.0);
  try {
    visor_n({{true, false}}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadGroupSize);
  }
}

TEST(VisorN, FairCoinsMatchBinomial) {
  rng::Stream s(2024);
  std::vector<std::vector<bool>> groups(100, std::vector<bool>(4));
  for (auto& g : groups)
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = s.uniform() < 0.5;
  EXPECT_NEAR(visor_n(groups, 1), 0.9375, 0.05);
  double prev = 1.0;
  for (int n = 1; n <= 4; ++n) {
    EXPECT_LE(visor_n(groups, n), prev);
    prev = visor_n(groups, n);
  }
}

TEST(EvaluateRun, ConditionalRateDominates) {
  rng::Stream s(6);
  std::vector<RunMetrics> runs;
  const std::vector<SpatialSpec> specs{SpatialSpec{0, 1, SpatialRelation::kLeft}};
  for (int r = 0; r < 40; ++r) {
    const double width = s.uniform() < 0.3 ? 6.0 : 1.0;  // some maps too diffuse for OA
    const GridMap a = gaussian_bump({s.uniform(0, 15), s.uniform(0, 15)}, 16, width);
    const GridMap b = gaussian_bump({s.uniform(0, 15), s.uniform(0, 15)}, 16, 1.0);
    const RunMetrics m = evaluate_run({a, b}, specs);
    EXPECT_EQ(m.visor_uncond, m.centroid_ok && m.oa_a && m.oa_b);
    EXPECT_EQ(m.visor_cond.has_value(), m.oa_a && m.oa_b);
    runs.push_back(m);
  }
  const AggregateMetrics agg = aggregate_metrics(runs);
  EXPECT_EQ(agg.runs, 40);
  ASSERT_TRUE(agg.visor_cond.has_value());
  EXPECT_GE(*agg.visor_cond, agg.visor_uncond);
  for (int n = 1; n < 4; ++n) {
    ASSERT_TRUE(agg.visor_n[n].has_value());
    EXPECT_LE(*agg.visor_n[n], *agg.visor_n[n - 1]);
  }
}

TEST(EvaluateRun, ConjunctionOverSpatialSpecs) {
  const int side = 16;
  const GridMap a = gaussian_bump({3, 3}, side, 1.0);
  const GridMap b = gaussian_bump({12, 3}, side, 1.0);
  const GridMap c = gaussian_bump({7, 12}, side, 1.0);
  const RunMetrics ok = evaluate_run({a, b, c}, {SpatialSpec{0, 1, SpatialRelation::kLeft},
                                                 SpatialSpec{2, 0, SpatialRelation::kBelow}});
  EXPECT_TRUE(ok.centroid_ok);
  const RunMetrics bad = evaluate_run({a, b, c}, {SpatialSpec{0, 1, SpatialRelation::kLeft},
                                                  SpatialSpec{2, 0, SpatialRelation::kAbove}});
  EXPECT_FALSE(bad.centroid_ok);
  EXPECT_EQ(bad.relation, SpatialRelation::kLeft);
}

TEST(JudgeRelation, Deterministic) {
  const GridMap a = gaussian_bump({4, 8}, 16, 1.5);
  const GridMap b = gaussian_bump({12, 8}, 16, 1.5);
  const auto x = judge_relation(a, b, SpatialRelation::kLeft);
  const auto y = judge_relation(a, b, SpatialRelation::kLeft);
  EXPECT_TRUE(x.centroid_ok);
  EXPECT_TRUE(x.compbench_ok);
  EXPECT_EQ(x.box_a, y.box_a);
  EXPECT_EQ(x.miou, y.miou);
  EXPECT_DOUBLE_EQ(x.miou, 0.0);
}
