#pragma once

// Oriented-box geometry: corner enumeration, local-frame transforms,
// containment tests and rotated IoU in BEV and 3D. The rotated rectangle
// intersection is exact convex clipping (Sutherland-Hodgman), not a grid
// approximation.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lidet/core.hpp"

namespace lidet {

/// Point expressed in a box's local frame (origin at the box center,
/// x along heading, z up). Distinct from Vec3 so world and local
/// coordinates cannot be mixed accidentally.
struct LocalPoint {
  double x = 0, y = 0, z = 0;
};

struct Vec2 {
  double x = 0, y = 0;
};

/// The 8 corners of an oriented box. Ordering is fixed: bottom face
/// counterclockwise viewed from +Z starting at (+l/2, +w/2, -h/2), then the
/// top face in the same XY order.
inline std::array<Vec3, 8> box_corners(const Box7& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = b.l / 2, hw = b.w / 2, hh = b.h / 2;
  // CCW in the local XY plane
  const double ox[4] = {hl, -hl, -hl, hl};
  const double oy[4] = {hw, hw, -hw, -hw};
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    double wx = b.cx + c * ox[i] - s * oy[i];
    double wy = b.cy + s * ox[i] + c * oy[i];
    out[i] = {wx, wy, b.cz - hh};
    out[i + 4] = {wx, wy, b.cz + hh};
  }
  return out;
}

/// BEV footprint of the box, counterclockwise.
inline std::array<Vec2, 4> bev_corners(const Box7& b) {
  auto c3 = box_corners(b);
  return {Vec2{c3[0].x, c3[0].y}, Vec2{c3[1].x, c3[1].y},
          Vec2{c3[2].x, c3[2].y}, Vec2{c3[3].x, c3[3].y}};
}

/// Translate by -center, rotate by -yaw about Z.
inline LocalPoint to_local(const Vec3& p, const Box7& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = p.x - b.cx, dy = p.y - b.cy;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - b.cz};
}

/// Inverse of to_local.
inline Vec3 from_local(const LocalPoint& p, const Box7& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  return {b.cx + c * p.x - s * p.y, b.cy + s * p.x + c * p.y, b.cz + p.z};
}

/// Boundary-inclusive containment: all local magnitudes <= half extents.
inline bool point_in_box(const Vec3& p, const Box7& b) {
  LocalPoint q = to_local(p, b);
  return std::abs(q.x) <= b.l / 2 && std::abs(q.y) <= b.w / 2 && std::abs(q.z) <= b.h / 2;
}

inline bool point_in_box(const Point& p, const Box7& b) { return point_in_box(p.xyz(), b); }

namespace detail {

// Collinearity tolerance for the clipper, in meters of signed distance.
inline constexpr double kClipTol = 1e-9;

inline double shoelace(const std::vector<Vec2>& poly) {
  double s = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    s += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
  return 0.5 * s;
}

inline double shoelace(const std::array<Vec2, 4>& poly) {
  double s = 0;
  for (int i = 0, j = 3; i < 4; j = i++)
    s += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
  return 0.5 * s;
}

/// Clip a polygon against one convex CCW quad (Sutherland-Hodgman).
/// Points within kClipTol of an edge count as inside, so a polygon clipped
/// against itself comes back vertex-for-vertex unchanged.
inline std::vector<Vec2> clip_quad(const std::array<Vec2, 4>& subject,
                                   const std::array<Vec2, 4>& clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  std::vector<Vec2> in;
  for (int e = 0; e < 4; ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % 4];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double elen = std::hypot(ex, ey);
    const double tol = kClipTol * elen;

    in.swap(out);
    out.clear();
    const std::size_t n = in.size();
    if (n == 0) break;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2& prev = in[j];
      const Vec2& cur = in[i];
      const double dp = ex * (prev.y - a.y) - ey * (prev.x - a.x);
      const double dc = ex * (cur.y - a.y) - ey * (cur.x - a.x);
      const bool pin = dp >= -tol;
      const bool cin = dc >= -tol;
      if (cin) {
        if (!pin) {
          double t = dp / (dp - dc);
          out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        }
        out.push_back(cur);
      } else if (pin) {
        double t = dp / (dp - dc);
        out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
    }
  }
  return out;
}

/// Lexicographic order on geometric fields; used to canonicalize the
/// clip/subject roles so iou(a, b) and iou(b, a) run the same arithmetic.
inline bool box_before(const Box7& a, const Box7& b) {
  if (a.cx != b.cx) return a.cx < b.cx;
  if (a.cy != b.cy) return a.cy < b.cy;
  if (a.cz != b.cz) return a.cz < b.cz;
  if (a.l != b.l) return a.l < b.l;
  if (a.w != b.w) return a.w < b.w;
  if (a.h != b.h) return a.h < b.h;
  return a.yaw < b.yaw;
}

}  // namespace detail

/// BEV footprint area via the same shoelace evaluation the clipper uses.
inline double bev_area(const Box7& b) { return detail::shoelace(bev_corners(b)); }

/// Intersection area of the two yaw-rotated BEV rectangles.
inline double bev_intersection_area(const Box7& a, const Box7& b) {
  if (detail::box_before(b, a)) return bev_intersection_area(b, a);
  // cheap reject on circumscribed circles
  const double dx = a.cx - b.cx, dy = a.cy - b.cy;
  const double ra = 0.5 * std::hypot(a.l, a.w), rb = 0.5 * std::hypot(b.l, b.w);
  if (dx * dx + dy * dy > (ra + rb) * (ra + rb)) return 0.0;
  auto poly = detail::clip_quad(bev_corners(a), bev_corners(b));
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, detail::shoelace(poly));
}

/// Area IoU of the yaw-rotated rectangles in the XY plane.
inline double iou_bev(const Box7& a, const Box7& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0.0;
  const double uni = bev_area(a) + bev_area(b) - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Volume IoU: BEV intersection area times vertical overlap over the union
/// of volumes. Both boxes rotate about Z only.
inline double iou_3d(const Box7& a, const Box7& b) {
  const double za0 = a.cz - a.h / 2, za1 = a.cz + a.h / 2;
  const double zb0 = b.cz - b.h / 2, zb1 = b.cz + b.h / 2;
  const double overlap = std::min(za1, zb1) - std::max(za0, zb0);
  if (overlap <= 0) return 0.0;
  const double inter_area = bev_intersection_area(a, b);
  if (inter_area <= 0) return 0.0;
  const double inter = inter_area * overlap;
  // volumes from the same shoelace/extent expressions so identical boxes
  // give exactly 1
  const double va = bev_area(a) * (za1 - za0);
  const double vb = bev_area(b) * (zb1 - zb0);
  const double uni = va + vb - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace lidet
