#pragma once

// Center-boundary-aware confidence attention. Per axis, with
// u = |local coordinate| / extent, the raw attention is |4u - 1|: it is 1
// at the center, falls to 0 at a quarter extent and returns to 1 at the
// face. The normalized value clamps 2*ca - 0.5 into [0, 1] and the scalar
// score is the mean of the three normalized components.

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"

namespace lidet {

struct AttentionTriple {
  std::array<double, 3> ca{};  // raw per-axis attention, >= 0
  std::array<double, 3> na{};  // normalized per-axis attention, in [0, 1]
  double score = 0;            // mean of na
};

/// min(1, max(0, 2*ca - 0.5))
inline double normalize_attention(double ca) { return std::clamp(2.0 * ca - 0.5, 0.0, 1.0); }

inline AttentionTriple confidence_attention(const LocalPoint& p, double l, double w, double h) {
  if (!(l > 0 && w > 0 && h > 0))
    throw std::invalid_argument("confidence_attention: extents must be positive");
  AttentionTriple t;
  const double coord[3] = {p.x, p.y, p.z};
  const double extent[3] = {l, w, h};
  for (int i = 0; i < 3; ++i) {
    const double u = std::abs(coord[i]) / extent[i];
    t.ca[i] = std::abs(4.0 * u - 1.0);
    t.na[i] = normalize_attention(t.ca[i]);
  }
  t.score = (t.na[0] + t.na[1] + t.na[2]) / 3.0;
  return t;
}

inline AttentionTriple confidence_attention(const LocalPoint& p, const Box7& box) {
  return confidence_attention(p, box.l, box.w, box.h);
}

/// Weight a predicted confidence by an attention score. Both arguments are
/// expected in [0, 1]; the product keeps the result there and preserves
/// ordering among equal-score detections.
inline double adjust_confidence(double conf, double score) { return conf * score; }

/// Per-point attention training target: the score of the point in its
/// enclosing box's local frame, the maximum over boxes when several contain
/// it, and 0 for points outside every box.
inline std::vector<double> attention_targets(const PointCloud& cloud,
                                             const std::vector<Box7>& gt_boxes) {
  std::vector<double> out(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud[i].xyz();
    double best = 0.0;
    for (const Box7& b : gt_boxes) {
      if (!point_in_box(p, b)) continue;
      best = std::max(best, confidence_attention(to_local(p, b), b).score);
    }
    out[i] = best;
  }
  return out;
}

}  // namespace lidet
