#pragma once

// Label-consistent scene augmentation: global flip / rotate / scale,
// ground-truth sampling from a cropped-object database, and the
// minimum-inner-points filter. Every randomized operation is a pure
// function of (input, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"
#include "lidet/rng.hpp"

namespace lidet {

struct Scene {
  PointCloud cloud;
  std::vector<Box7> boxes;
};

/// Mirror across the XZ plane: y -> -y, yaw -> -yaw.
inline Scene flip_x(Scene s) {
  for (Point& p : s.cloud) p.y = -p.y;
  for (Box7& b : s.boxes) {
    b.cy = -b.cy;
    b.yaw = wrap_angle(-b.yaw);
  }
  return s;
}

/// Rotate everything about +Z by theta.
inline Scene rotate_z(Scene s, double theta) {
  const double c = std::cos(theta), si = std::sin(theta);
  for (Point& p : s.cloud) {
    const double x = p.x, y = p.y;
    p.x = c * x - si * y;
    p.y = si * x + c * y;
  }
  for (Box7& b : s.boxes) {
    const double x = b.cx, y = b.cy;
    b.cx = c * x - si * y;
    b.cy = si * x + c * y;
    b.yaw = wrap_angle(b.yaw + theta);
  }
  return s;
}

/// Uniform scaling about the origin; yaw is unchanged.
inline Scene scale(Scene s, double factor) {
  if (!(factor > 0)) throw std::invalid_argument("scale: factor must be positive");
  for (Point& p : s.cloud) {
    p.x *= factor;
    p.y *= factor;
    p.z *= factor;
  }
  for (Box7& b : s.boxes) {
    b.cx *= factor;
    b.cy *= factor;
    b.cz *= factor;
    b.l *= factor;
    b.w *= factor;
    b.h *= factor;
  }
  return s;
}

/// One cropped ground-truth object: its box and the points inside it.
struct GtSample {
  Box7 box;
  PointCloud points;
};

struct GtDatabase {
  std::map<int, std::vector<GtSample>> by_class;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [cls, v] : by_class) n += v.size();
    return n;
  }
};

/// Crop every labeled object of a scene into database samples.
inline std::vector<GtSample> crop_objects(const Scene& s) {
  std::vector<GtSample> out;
  out.reserve(s.boxes.size());
  for (const Box7& b : s.boxes) {
    GtSample g;
    g.box = b;
    for (const Point& p : s.cloud)
      if (point_in_box(p, b)) g.points.push_back(p);
    out.push_back(std::move(g));
  }
  return out;
}

inline void add_scene(GtDatabase& db, const Scene& s) {
  for (auto& g : crop_objects(s)) db.by_class[g.box.label].push_back(std::move(g));
}

/// Paste database objects into the scene until each class reaches its
/// target count (counting boxes already present) or the database runs out.
/// A candidate is accepted only when its BEV IoU with every existing and
/// already-pasted box is exactly zero. Candidate order is a seeded shuffle,
/// classes in ascending label order. When remove_overlapping_points is set,
/// original cloud points inside a pasted box are dropped.
inline Scene gt_sample(Scene s, const GtDatabase& db, const std::map<int, int>& per_class_target,
                       std::uint64_t seed, bool remove_overlapping_points = false) {
  Rng rng(seed);
  std::vector<Box7> pasted;
  const std::size_t original_points = s.cloud.size();
  for (const auto& [cls, target] : per_class_target) {
    auto it = db.by_class.find(cls);
    if (it == db.by_class.end()) continue;
    int have = 0;
    for (const Box7& b : s.boxes)
      if (b.label == cls) ++have;

    std::vector<std::size_t> order(it->second.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    for (std::size_t k : order) {
      if (have >= target) break;
      const GtSample& cand = it->second[k];
      bool collides = false;
      for (const Box7& b : s.boxes)
        if (iou_bev(cand.box, b) > 0) { collides = true; break; }
      if (!collides)
        for (const Box7& b : pasted)
          if (iou_bev(cand.box, b) > 0) { collides = true; break; }
      if (collides) continue;
      pasted.push_back(cand.box);
      s.cloud.insert(s.cloud.end(), cand.points.begin(), cand.points.end());
      ++have;
    }
  }
  if (remove_overlapping_points && !pasted.empty()) {
    PointCloud cleaned;
    cleaned.reserve(s.cloud.size());
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
      bool drop = false;
      if (i < original_points)  // appended object points are always kept
        for (const Box7& b : pasted)
          if (point_in_box(s.cloud[i], b)) { drop = true; break; }
      if (!drop) cleaned.push_back(s.cloud[i]);
    }
    s.cloud = std::move(cleaned);
  }
  s.boxes.insert(s.boxes.end(), pasted.begin(), pasted.end());
  return s;
}

/// Drop boxes with strictly fewer than min_n inner points; the cloud is
/// untouched.
inline Scene min_points_filter(Scene s, int min_n = 5) {
  if (min_n < 0) throw std::invalid_argument("min_points_filter: min_n must be >= 0");
  std::vector<Box7> kept;
  kept.reserve(s.boxes.size());
  for (const Box7& b : s.boxes) {
    int n = 0;
    for (const Point& p : s.cloud)
      if (point_in_box(p, b) && ++n >= min_n) break;
    if (n >= min_n) kept.push_back(b);
  }
  s.boxes = std::move(kept);
  return s;
}

}  // namespace lidet
