#pragma once

// Bit-exact ingestion of KITTI artifacts: velodyne point binaries, label
// files and calibration files, plus the camera <-> LiDAR box conversion the
// pipeline needs because KITTI labels live in the rectified camera frame
// (bottom-center origin) while detection runs in the LiDAR frame.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"

namespace lidet::kitti {

struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  /// Adjugate inverse; throws on a singular matrix.
  Mat3 inverse() const {
    const double d = det();
    if (std::abs(d) < 1e-12) throw std::invalid_argument("Mat3: singular matrix");
    Mat3 r;
    r.m = {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
           (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
           (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
           (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
           (m[0] * m[4] - m[1] * m[3]) / d};
    return r;
  }

  /// Max deviation of M^T M from identity.
  double orthonormality_error() const {
    Mat3 t;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t(i, j) = (*this)(j, i);
    Mat3 p = t * (*this);
    double err = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) err = std::max(err, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
    return err;
  }
};

struct Calibration {
  std::array<double, 12> P2{};  // 3x4 camera projection, row-major
  Mat3 R0;                      // rectification rotation
  Mat3 Tr_rot;                  // velo->cam rotation part
  Vec3 Tr_t;                    // velo->cam translation

  void validate() const {
    if (R0.orthonormality_error() > 1e-3 || Tr_rot.orthonormality_error() > 1e-3)
      throw format_error("Calibration: rotation parts are not orthonormal within 1e-3");
  }

  Vec3 cam_from_velo(const Vec3& v) const { return R0 * (Tr_rot * v + Tr_t); }

  Vec3 velo_from_cam(const Vec3& c) const {
    return Tr_rot.inverse() * (R0.inverse() * c - Tr_t);
  }

  /// Pixel coordinates and rectified-camera depth of a LiDAR point.
  struct Projection {
    double u = 0, v = 0, depth = 0;
  };

  Projection project(const Vec3& velo) const {
    const Vec3 c = cam_from_velo(velo);
    const double hx = P2[0] * c.x + P2[1] * c.y + P2[2] * c.z + P2[3];
    const double hy = P2[4] * c.x + P2[5] * c.y + P2[6] * c.z + P2[7];
    const double hz = P2[8] * c.x + P2[9] * c.y + P2[10] * c.z + P2[11];
    Projection p;
    p.depth = c.z;
    if (hz != 0) {
      p.u = hx / hz;
      p.v = hy / hz;
    }
    return p;
  }
};

/// Parse "KEY: v1 v2 ..." calibration text. P2, R0_rect and Tr_velo_to_cam
/// are required.
inline Calibration parse_calib(std::istream& is) {
  std::map<std::string, std::vector<double>> fields;
  std::string line;
  while (std::getline(is, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    std::istringstream vals(line.substr(colon + 1));
    std::vector<double> v;
    double x;
    while (vals >> x) v.push_back(x);
    fields[key] = std::move(v);
  }
  auto get = [&](const std::string& key, std::size_t n) -> const std::vector<double>& {
    auto it = fields.find(key);
    if (it == fields.end()) throw format_error("calib: missing key " + key);
    if (it->second.size() != n)
      throw format_error("calib: key " + key + " needs " + std::to_string(n) + " values");
    return it->second;
  };

  Calibration c;
  const auto& p2 = get("P2", 12);
  std::copy(p2.begin(), p2.end(), c.P2.begin());
  const auto& r0 = get("R0_rect", 9);
  std::copy(r0.begin(), r0.end(), c.R0.m.begin());
  const auto& tr = get("Tr_velo_to_cam", 12);
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) c.Tr_rot(r, col) = tr[static_cast<std::size_t>(r * 4 + col)];
  }
  c.Tr_t = {tr[3], tr[7], tr[11]};
  c.validate();
  return c;
}

inline Calibration parse_calib_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("calib: cannot open " + path);
  return parse_calib(f);
}

inline std::string format_calib(const Calibration& c) {
  std::ostringstream os;
  os.precision(12);
  os << "P2:";
  for (double v : c.P2) os << " " << v;
  os << "\nR0_rect:";
  for (double v : c.R0.m) os << " " << v;
  os << "\nTr_velo_to_cam:";
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) os << " " << c.Tr_rot(r, col);
    os << " " << (r == 0 ? c.Tr_t.x : r == 1 ? c.Tr_t.y : c.Tr_t.z);
  }
  os << "\n";
  return os.str();
}

/// A camera calibration in the usual KITTI ballpark, used as the built-in
/// fixture for synthetic scenes and tests.
inline Calibration default_calibration() {
  Calibration c;
  c.P2 = {721.5377, 0.0, 609.5593, 44.85728,
          0.0, 721.5377, 172.854, 0.2163791,
          0.0, 0.0, 1.0, 0.002745884};
  c.R0.m = {0.9999239, 0.00983776, -0.00744505,
            -0.0098698, 0.9999421, -0.00427846,
            0.00740253, 0.00435161, 0.9999631};
  c.Tr_rot.m = {0.00753374, -0.9999714, -0.000616602,
                0.01480249, 0.000728073, -0.9998902,
                0.9998621, 0.00752379, 0.01480755};
  c.Tr_t = {-0.00406977, -0.0763162, -0.2717806};
  return c;
}

inline constexpr int kDefaultImageWidth = 1242;
inline constexpr int kDefaultImageHeight = 375;

/// One object line of a KITTI label file (15 fields, 16 with a trailing
/// score). Location is the bottom-center in the rectified camera frame.
struct KittiLabel {
  std::string type;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // 2D bbox, pixels
  double h = 0, w = 0, l = 0;             // extents, meters
  double x = 0, y = 0, z = 0;             // camera-frame location
  double rotation_y = 0;
  bool has_score = false;
  double score = 0;

  bool is_dontcare() const { return type == "DontCare"; }
  bool is_evaluable() const { return !is_dontcare() && h > 0 && w > 0 && l > 0; }
  double bbox_height() const { return y2 - y1; }
};

inline KittiLabel parse_label_line(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> tok;
  std::string t;
  while (is >> t) tok.push_back(t);
  if (tok.size() != 15 && tok.size() != 16)
    throw format_error("label: expected 15 or 16 fields, got " + std::to_string(tok.size()));

  auto num = [&](std::size_t i) {
    try {
      std::size_t pos = 0;
      double v = std::stod(tok[i], &pos);
      if (pos != tok[i].size()) throw std::invalid_argument("trailing chars");
      return v;
    } catch (const std::exception&) {
      throw format_error("label: unparseable number '" + tok[i] + "'");
    }
  };

  KittiLabel l;
  l.type = tok[0];
  l.truncation = num(1);
  l.occlusion = static_cast<int>(std::llround(num(2)));
  l.alpha = num(3);
  l.x1 = num(4);
  l.y1 = num(5);
  l.x2 = num(6);
  l.y2 = num(7);
  l.h = num(8);
  l.w = num(9);
  l.l = num(10);
  l.x = num(11);
  l.y = num(12);
  l.z = num(13);
  l.rotation_y = num(14);
  if (tok.size() == 16) {
    l.has_score = true;
    l.score = num(15);
  }
  return l;
}

/// Inverse of parse_label_line with fixed precision: 2 decimals for
/// truncation and score, 6 for geometry.
inline std::string format_label(const KittiLabel& l) {
  char buf[512];
  int n = std::snprintf(buf, sizeof buf,
                        "%s %.2f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f",
                        l.type.c_str(), l.truncation, l.occlusion, l.alpha, l.x1, l.y1, l.x2,
                        l.y2, l.h, l.w, l.l, l.x, l.y, l.z, l.rotation_y);
  std::string out(buf, static_cast<std::size_t>(n));
  if (l.has_score) {
    n = std::snprintf(buf, sizeof buf, " %.2f", l.score);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline std::vector<KittiLabel> parse_labels(std::istream& is) {
  std::vector<KittiLabel> out;
  std::string line;
  while (std::getline(is, line)) {
    bool blank = true;
    for (char ch : line)
      if (!std::isspace(static_cast<unsigned char>(ch))) { blank = false; break; }
    if (!blank) out.push_back(parse_label_line(line));
  }
  return out;
}

inline std::vector<KittiLabel> read_label_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("label: cannot open " + path);
  return parse_labels(f);
}

inline void write_label_file(const std::string& path, const std::vector<KittiLabel>& labels) {
  std::ofstream f(path);
  if (!f) throw format_error("label: cannot open for write " + path);
  for (const auto& l : labels) f << format_label(l) << "\n";
}

inline const std::map<std::string, int>& default_class_map() {
  static const std::map<std::string, int> m = {{"Car", 0}, {"Pedestrian", 1}, {"Cyclist", 2}};
  return m;
}

inline std::string class_name(int label) {
  for (const auto& [name, id] : default_class_map())
    if (id == label) return name;
  return "Unknown";
}

/// Lift the camera-frame bottom-center label to a LiDAR-frame gravity-center
/// box. yaw = -rotation_y - pi/2 is the standard heading conversion between
/// the rectified camera frame (x right, z forward) and the LiDAR frame
/// (x forward, y left); sign errors here are the classic failure mode, see
/// the round-trip test for a worked example.
inline Box7 label_to_lidar_box(const KittiLabel& l, const Calibration& calib,
                               const std::map<std::string, int>& classes = default_class_map()) {
  if (!l.is_evaluable())
    throw std::invalid_argument("label_to_lidar_box: non-evaluable label (DontCare or bad dims)");
  const Vec3 cam_center{l.x, l.y - l.h / 2, l.z};
  const Vec3 velo = calib.velo_from_cam(cam_center);
  auto it = classes.find(l.type);
  const int cls = it == classes.end() ? -1 : it->second;
  return Box7(velo.x, velo.y, velo.z, l.l, l.w, l.h, wrap_angle(-l.rotation_y - kPi / 2), cls,
              l.has_score ? l.score : 0);
}

/// Inverse of label_to_lidar_box. The 2D bbox is the projection of the 3D
/// corners clamped to the image; boxes that do not project in front of the
/// camera get the sentinel bbox (-1, -1, -1, -1).
inline KittiLabel lidar_box_to_label(const Box7& box, const Calibration& calib,
                                     const std::string& type, bool with_score = false,
                                     int image_w = kDefaultImageWidth,
                                     int image_h = kDefaultImageHeight) {
  KittiLabel l;
  l.type = type;
  l.h = box.h;
  l.w = box.w;
  l.l = box.l;
  const Vec3 cam = calib.cam_from_velo(box.center());
  l.x = cam.x;
  l.y = cam.y + box.h / 2;
  l.z = cam.z;
  l.rotation_y = wrap_angle(-box.yaw - kPi / 2);
  l.alpha = wrap_angle(l.rotation_y - std::atan2(cam.x, cam.z));
  l.has_score = with_score;
  l.score = box.score;

  double u0 = 1e30, v0 = 1e30, u1 = -1e30, v1 = -1e30;
  bool any = false;
  for (const Vec3& c : box_corners(box)) {
    const auto p = calib.project(c);
    if (p.depth <= 0.1) continue;
    any = true;
    u0 = std::min(u0, p.u);
    v0 = std::min(v0, p.v);
    u1 = std::max(u1, p.u);
    v1 = std::max(v1, p.v);
  }
  if (any) {
    l.x1 = std::clamp(u0, 0.0, static_cast<double>(image_w - 1));
    l.y1 = std::clamp(v0, 0.0, static_cast<double>(image_h - 1));
    l.x2 = std::clamp(u1, 0.0, static_cast<double>(image_w - 1));
    l.y2 = std::clamp(v1, 0.0, static_cast<double>(image_h - 1));
  } else {
    l.x1 = l.y1 = l.x2 = l.y2 = -1;
  }
  return l;
}

/// Decode a velodyne byte blob: packed little-endian float32 quadruples
/// (x, y, z, reflectance), order preserved. Points with any non-finite
/// component are dropped and counted rather than failing the frame.
inline PointCloud read_velodyne(const std::string& bytes, std::size_t* dropped = nullptr) {
  if (bytes.size() % 16 != 0)
    throw format_error("velodyne: byte length " + std::to_string(bytes.size()) +
                       " not divisible by 16");
  static_assert(sizeof(float) == 4);
  PointCloud cloud;
  cloud.reserve(bytes.size() / 16);
  std::size_t bad = 0;
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    float f[4];
    std::memcpy(f, bytes.data() + off, 16);
    if (!std::isfinite(f[0]) || !std::isfinite(f[1]) || !std::isfinite(f[2]) ||
        !std::isfinite(f[3])) {
      ++bad;
      continue;
    }
    cloud.push_back(Point{f[0], f[1], f[2], f[3]});
  }
  if (dropped) *dropped = bad;
  return cloud;
}

/// Encode a cloud as packed little-endian float32 quadruples.
inline std::string write_velodyne(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 16);
  for (const Point& p : cloud) {
    const float f[4] = {static_cast<float>(p.x), static_cast<float>(p.y),
                        static_cast<float>(p.z), static_cast<float>(p.r)};
    char buf[16];
    std::memcpy(buf, f, 16);
    out.append(buf, 16);
  }
  return out;
}

inline PointCloud read_velodyne_file(const std::string& path, std::size_t* dropped = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("velodyne: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return read_velodyne(ss.str(), dropped);
}

inline void write_velodyne_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw format_error("velodyne: cannot open for write " + path);
  const std::string bytes = write_velodyne(cloud);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Keep points whose image projection lands inside [0, W) x [0, H) with
/// positive depth; order preserved.
inline PointCloud frustum_filter(const PointCloud& cloud, const Calibration& calib,
                                 int image_w = kDefaultImageWidth,
                                 int image_h = kDefaultImageHeight) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point& p : cloud) {
    const auto prj = calib.project(p.xyz());
    if (prj.depth > 0 && prj.u >= 0 && prj.u < image_w && prj.v >= 0 && prj.v < image_h)
      out.push_back(p);
  }
  return out;
}

}  // namespace lidet::kitti
