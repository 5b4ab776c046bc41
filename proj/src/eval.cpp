#include "storm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <tuple>

#include "storm/error.hpp"

namespace storm {

namespace {

void require_mass(const GridMap& g) {
  if (!(g.total() > 0.0)) throw Error(ErrorCode::kZeroMass, "map has no mass");
}

void require_spatial(SpatialRelation relation) {
  if (!is_spatial(relation)) {
    throw Error(ErrorCode::kBadRelation,
                "only left/right/above/below are judged, got " + std::string(to_string(relation)));
  }
}

}  // namespace

bool centroid_relation(const GridMap& a, const GridMap& b, SpatialRelation relation) {
  require_spatial(relation);
  const Centroid ca = compute_centroid(a);
  const Centroid cb = compute_centroid(b);
  switch (relation) {
    case SpatialRelation::kLeft: return ca.j < cb.j;
    case SpatialRelation::kRight: return ca.j > cb.j;
    case SpatialRelation::kAbove: return ca.i < cb.i;
    case SpatialRelation::kBelow: return ca.i > cb.i;
    default: return false;
  }
}

Box bbox_from_grid(const GridMap& g, double mass_fraction) {
  require_mass(g);
  const Field w = g.weights() / g.total();
  const int side = g.side();
  Box box{0, 0, side - 1, side - 1};
  double mass = 1.0;
  constexpr double kSlack = 1e-12;

  auto row_mass = [&](int i, const Box& b) { return w.row(i).segment(b.left, b.width()).sum(); };
  auto col_mass = [&](int j, const Box& b) { return w.col(j).segment(b.top, b.height()).sum(); };

  for (;;) {
    struct Candidate {
      Box box;
      double mass;
    };
    std::vector<Candidate> options;
    if (box.height() > 1) {
      options.push_back({{box.top + 1, box.left, box.bottom, box.right}, mass - row_mass(box.top, box)});
      options.push_back({{box.top, box.left, box.bottom - 1, box.right}, mass - row_mass(box.bottom, box)});
    }
    if (box.width() > 1) {
      options.push_back({{box.top, box.left + 1, box.bottom, box.right}, mass - col_mass(box.left, box)});
      options.push_back({{box.top, box.left, box.bottom, box.right - 1}, mass - col_mass(box.right, box)});
    }
    const Candidate* best = nullptr;
    for (const auto& c : options) {
      if (c.mass < mass_fraction - kSlack) continue;
      if (!best) {
        best = &c;
        continue;
      }
      const auto key = [](const Candidate& x) {
        return std::make_tuple(-x.mass, x.box.area(), x.box.top, x.box.left);
      };
      if (key(c) < key(*best)) best = &c;
    }
    if (!best) return box;
    box = best->box;
    mass = best->mass;
  }
}

double box_iou(const Box& a, const Box& b) {
  const int top = std::max(a.top, b.top);
  const int left = std::max(a.left, b.left);
  const int bottom = std::min(a.bottom, b.bottom);
  const int right = std::min(a.right, b.right);
  const int inter = (bottom >= top && right >= left) ? (bottom - top + 1) * (right - left + 1) : 0;
  return static_cast<double>(inter) / (a.area() + b.area() - inter);
}

double overlap_miou(const GridMap& a, const GridMap& b, double mass_fraction) {
  return box_iou(bbox_from_grid(a, mass_fraction), bbox_from_grid(b, mass_fraction));
}

double support_iou(const GridMap& a, const GridMap& b) {
  require_mass(a);
  require_mass(b);
  const double ta = a.total() / a.cells();
  const double tb = b.total() / b.cells();
  int inter = 0;
  int uni = 0;
  for (int i = 0; i < a.side(); ++i) {
    for (int j = 0; j < a.side(); ++j) {
      const bool in_a = a(i, j) >= ta;
      const bool in_b = b(i, j) >= tb;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

bool compbench_relation(const GridMap& a, const GridMap& b, SpatialRelation relation,
                        double mass_fraction) {
  require_spatial(relation);
  const Box ba = bbox_from_grid(a, mass_fraction);
  const Box bb = bbox_from_grid(b, mass_fraction);
  const double dx = std::abs(ba.center_x() - bb.center_x());
  const double dy = std::abs(ba.center_y() - bb.center_y());
  bool order = false;
  bool dominant = false;
  switch (relation) {
    case SpatialRelation::kLeft: order = ba.center_x() < bb.center_x(); dominant = dx > dy; break;
    case SpatialRelation::kRight: order = ba.center_x() > bb.center_x(); dominant = dx > dy; break;
    case SpatialRelation::kAbove: order = ba.center_y() < bb.center_y(); dominant = dy > dx; break;
    case SpatialRelation::kBelow: order = ba.center_y() > bb.center_y(); dominant = dy > dx; break;
    default: break;
  }
  return order && dominant && box_iou(ba, bb) < 0.1;
}

bool oa_proxy(const GridMap& g, double q, double tau) {
  require_mass(g);
  std::vector<double> w(g.weights().data(), g.weights().data() + g.cells());
  const auto top = static_cast<std::size_t>(std::ceil(q * g.cells()));
  const auto k = std::min(top, w.size());
  std::partial_sort(w.begin(), w.begin() + k, w.end(), std::greater<>());
  double held = 0.0;
  for (std::size_t idx = 0; idx < k; ++idx) held += w[idx];
  return held >= tau * g.total();
}

double visor_n(const std::vector<std::vector<bool>>& groups, int n) {
  if (groups.empty()) throw Error(ErrorCode::kBadGroupSize, "no groups");
  int hit = 0;
  for (const auto& grp : groups) {
    if (static_cast<int>(grp.size()) < n) {
      throw Error(ErrorCode::kBadGroupSize, "group of " + std::to_string(grp.size()) +
                                                " trials cannot score VISOR_" + std::to_string(n));
    }
    hit += std::count(grp.begin(), grp.end(), true) >= n;
  }
  return static_cast<double>(hit) / groups.size();
}

RelationJudgment judge_relation(const GridMap& a, const GridMap& b, SpatialRelation relation,
                                double mass_fraction) {
  RelationJudgment out;
  out.relation = relation;
  out.centroid_ok = centroid_relation(a, b, relation);
  out.compbench_ok = compbench_relation(a, b, relation, mass_fraction);
  out.centroid_a = compute_centroid(a);
  out.centroid_b = compute_centroid(b);
  out.box_a = bbox_from_grid(a, mass_fraction);
  out.box_b = bbox_from_grid(b, mass_fraction);
  out.miou = box_iou(out.box_a, out.box_b);
  return out;
}

RunMetrics evaluate_run(const std::vector<GridMap>& maps, const std::vector<SpatialSpec>& specs,
                        const EvalConfig& cfg) {
  if (specs.empty()) throw Error(ErrorCode::kEmptyPairs, "no specs to evaluate");
  for (const auto& s : specs) validate(s, static_cast<int>(maps.size()));

  RunMetrics out;
  const SpatialSpec& first = specs.front();
  const GridMap& a = maps[first.source];
  const GridMap& b = maps[first.reference];
  out.relation = first.relation;
  out.oa_a = oa_proxy(a, cfg.oa_top_fraction, cfg.oa_concentration);
  out.oa_b = oa_proxy(b, cfg.oa_top_fraction, cfg.oa_concentration);
  out.miou = overlap_miou(a, b, cfg.bbox_mass_fraction);
  out.support_iou = support_iou(a, b);
  out.centroid_ok = true;
  out.compbench_ok = true;
  for (const auto& s : specs) {
    if (!is_spatial(s.relation)) continue;
    const auto& ma = maps[s.source];
    const auto& mb = maps[s.reference];
    out.centroid_ok = out.centroid_ok && centroid_relation(ma, mb, s.relation);
    out.compbench_ok =
        out.compbench_ok && compbench_relation(ma, mb, s.relation, cfg.bbox_mass_fraction);
  }
  const bool present = out.oa_a && out.oa_b;
  out.visor_uncond = out.centroid_ok && present;
  if (present) out.visor_cond = out.centroid_ok;
  return out;
}

AggregateMetrics aggregate_metrics(const std::vector<RunMetrics>& runs, int group_size) {
  AggregateMetrics out;
  out.runs = static_cast<int>(runs.size());
  if (runs.empty()) return out;
  int oa = 0, cent = 0, comp = 0, unc = 0, cond_hits = 0;
  for (const auto& r : runs) {
    oa += r.oa_a && r.oa_b;
    cent += r.centroid_ok;
    comp += r.compbench_ok;
    unc += r.visor_uncond;
    cond_hits += r.visor_cond.value_or(false);
    out.mean_miou += r.miou;
    out.mean_support_iou += r.support_iou;
  }
  const double n = static_cast<double>(runs.size());
  out.oa_rate = oa / n;
  out.centroid_rate = cent / n;
  out.compbench_rate = comp / n;
  out.visor_uncond = unc / n;
  if (oa > 0) out.visor_cond = static_cast<double>(cond_hits) / oa;
  out.mean_miou /= n;
  out.mean_support_iou /= n;

  if (group_size > 0) {
    std::vector<std::vector<bool>> groups;
    for (std::size_t start = 0; start + group_size <= runs.size(); start += group_size) {
      std::vector<bool> grp;
      for (int k = 0; k < group_size; ++k) grp.push_back(runs[start + k].visor_uncond);
      groups.push_back(std::move(grp));
    }
    if (!groups.empty()) {
      for (int k = 1; k <= 4 && k <= group_size; ++k) out.visor_n[k - 1] = visor_n(groups, k);
    }
  }
  return out;
}

}  // namespace storm
