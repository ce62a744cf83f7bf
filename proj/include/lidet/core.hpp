#pragma once

// Core value types shared by every module: 3D vectors, LiDAR points,
// oriented boxes, angle helpers and error types.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lidet {

inline constexpr double kPi = 3.14159265358979323846;

/// Thrown when an input file or byte stream does not match its format.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a configuration or self-check invariant is violated.
struct invariant_error : std::logic_error {
  using std::logic_error::logic_error;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// One LiDAR return: position in the sensor frame plus reflectance.
struct Point {
  double x = 0, y = 0, z = 0, r = 0;

  Vec3 xyz() const { return {x, y, z}; }
};

using PointCloud = std::vector<Point>;

/// Normalize an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Oriented 3D box: gravity center, extents (l along heading, w lateral,
/// h vertical) and yaw about +Z (counterclockwise seen from above).
/// label/score are optional payload carried through the pipeline; they do
/// not affect geometry.
struct Box7 {
  double cx = 0, cy = 0, cz = 0;
  double l = 1, w = 1, h = 1;
  double yaw = 0;
  int label = -1;
  double score = 0;

  Box7() = default;

  Box7(double cx_, double cy_, double cz_, double l_, double w_, double h_, double yaw_,
       int label_ = -1, double score_ = 0)
      : cx(cx_), cy(cy_), cz(cz_), l(l_), w(w_), h(h_), yaw(wrap_angle(yaw_)),
        label(label_), score(score_) {
    if (!(l > 0) || !(w > 0) || !(h > 0))
      throw std::invalid_argument("Box7: extents must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz) ||
        !std::isfinite(l) || !std::isfinite(w) || !std::isfinite(h) || !std::isfinite(yaw))
      throw std::invalid_argument("Box7: non-finite field");
  }

  Vec3 center() const { return {cx, cy, cz}; }
  double volume() const { return l * w * h; }
};

}  // namespace lidet
