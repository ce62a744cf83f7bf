#pragma once

// Seeded synthetic-scene generator: LiDAR-like clouds built by sampling the
// sensor-visible faces of randomly placed boxes (a scanner only ever sees
// surfaces), plus uniform background clutter. Scenes are the desk-scale
// substrate for exercising the full pipeline, and an oracle detector
// (perturb_detections) turns their ground truth into scored detections.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lidet/augment.hpp"
#include "lidet/core.hpp"
#include "lidet/geometry.hpp"
#include "lidet/rng.hpp"
#include "lidet/targets.hpp"

namespace lidet::synth {

struct ClassSpec {
  int label = 0;
  ClassSize mean_size;
  int min_count = 1, max_count = 3;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<ClassSpec> classes = {
      {0, {3.9, 1.6, 1.56}, 2, 5},
      {1, {0.8, 0.6, 1.73}, 1, 3},
      {2, {1.76, 0.6, 1.73}, 1, 3},
  };
  double size_jitter = 0.1;  // relative, in [0, 0.5)
  // Extra inward offset of surface points from the face plane, meters.
  // Zero keeps points within 1e-9 of the faces; writers that round through
  // float32 files set a few mm so containment survives quantization.
  double surface_inset = 0.0;
  int min_points_per_object = 60;
  int max_points_per_object = 160;
  Vec3 sensor_origin{0, 0, 0};
  int background_points = 2000;
  Vec3 place_min{4.0, -36.0, -3.0};
  Vec3 place_max{66.0, 36.0, 1.0};
  double ground_z = -1.7;
  int max_retries = 100;

  void validate() const {
    if (!(size_jitter >= 0 && size_jitter < 0.5))
      throw invariant_error("SynthConfig: size_jitter must be in [0, 0.5)");
    if (!(surface_inset >= 0))
      throw invariant_error("SynthConfig: surface_inset must be >= 0");
    if (background_points < 0 || min_points_per_object < 0 ||
        max_points_per_object < min_points_per_object)
      throw invariant_error("SynthConfig: bad point counts");
    for (const auto& c : classes)
      if (c.min_count < 0 || c.max_count < c.min_count)
        throw invariant_error("SynthConfig: bad object count range");
  }
};

struct GenerateResult {
  Scene scene;
  int requested_objects = 0;
  int placed_objects = 0;
};

namespace detail {

// Offset generated points from the face plane into the box by a relative
// margin so containment survives the world<->local round trip in doubles.
inline constexpr double kInwardMargin = 1e-10;

/// Sample n points on the faces of a box that are visible from the sensor,
/// proportionally to face area.
inline void sample_surface_points(const Box7& box, const Vec3& sensor, int n, double inset,
                                  Rng& rng, PointCloud& out) {
  struct Face {
    int axis;     // 0 = x(l), 1 = y(w), 2 = z(h)
    double sign;  // which side
    double area;
  };
  const double ext[3] = {box.l, box.w, box.h};
  std::vector<Face> visible;
  double total_area = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      LocalPoint face_center_loc{0, 0, 0};
      (axis == 0 ? face_center_loc.x : axis == 1 ? face_center_loc.y : face_center_loc.z) =
          sign * ext[axis] / 2;
      const Vec3 fc = from_local(face_center_loc, box);
      // outward normal in world coordinates
      LocalPoint n_loc{0, 0, 0};
      (axis == 0 ? n_loc.x : axis == 1 ? n_loc.y : n_loc.z) = sign;
      const Vec3 nw = from_local(n_loc, box) - box.center();
      if (dot(nw, sensor - fc) <= 0) continue;
      const double area = axis == 0 ? box.w * box.h : axis == 1 ? box.l * box.h : box.l * box.w;
      visible.push_back({axis, sign, area});
      total_area += area;
    }
  }
  if (visible.empty() || total_area <= 0) return;

  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform() * total_area;
    const Face* face = &visible.back();
    for (const Face& f : visible) {
      if (pick < f.area) { face = &f; break; }
      pick -= f.area;
    }
    LocalPoint lp;
    const double a = (rng.uniform() - 0.5) * (1.0 - kInwardMargin);
    const double b = (rng.uniform() - 0.5) * (1.0 - kInwardMargin);
    const double off = std::max(inset, ext[face->axis] / 2 * kInwardMargin);
    const double fixed = face->sign * (ext[face->axis] / 2 - std::min(off, ext[face->axis] / 4));
    if (face->axis == 0) lp = {fixed, a * box.w, b * box.h};
    else if (face->axis == 1) lp = {a * box.l, fixed, b * box.h};
    else lp = {a * box.l, b * box.w, fixed};
    const Vec3 wp = from_local(lp, box);
    out.push_back(Point{wp.x, wp.y, wp.z, rng.uniform(0.05, 0.95)});
  }
}

}  // namespace detail

/// Generate one scene. Boxes never overlap in BEV; object points lie on
/// sensor-visible faces; everything is a pure function of the config
/// (including its seed). Placement failures after bounded retries reduce
/// the object count and are reported in the result.
inline GenerateResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  GenerateResult res;

  for (const ClassSpec& cls : cfg.classes) {
    const int count =
        cls.min_count +
        static_cast<int>(cls.max_count > cls.min_count
                             ? rng.uniform_int(static_cast<std::uint64_t>(cls.max_count -
                                                                          cls.min_count + 1))
                             : 0);
    res.requested_objects += count;
    for (int i = 0; i < count; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
        const double jl = 1.0 + cfg.size_jitter * (2 * rng.uniform() - 1);
        const double jw = 1.0 + cfg.size_jitter * (2 * rng.uniform() - 1);
        const double jh = 1.0 + cfg.size_jitter * (2 * rng.uniform() - 1);
        const double l = cls.mean_size.l * jl;
        const double w = cls.mean_size.w * jw;
        const double h = cls.mean_size.h * jh;
        const double margin = 0.5 * std::hypot(l, w);
        const double cx = rng.uniform(cfg.place_min.x + margin, cfg.place_max.x - margin);
        const double cy = rng.uniform(cfg.place_min.y + margin, cfg.place_max.y - margin);
        const double yaw = rng.uniform(-kPi, kPi);
        Box7 box(cx, cy, cfg.ground_z + h / 2, l, w, h, yaw, cls.label);

        bool collides = false;
        for (const Box7& other : res.scene.boxes)
          if (iou_bev(box, other) > 0) { collides = true; break; }
        if (collides) continue;

        const int npts =
            cfg.min_points_per_object +
            static_cast<int>(cfg.max_points_per_object > cfg.min_points_per_object
                                 ? rng.uniform_int(static_cast<std::uint64_t>(
                                       cfg.max_points_per_object - cfg.min_points_per_object + 1))
                                 : 0);
        detail::sample_surface_points(box, cfg.sensor_origin, npts, cfg.surface_inset, rng,
                                      res.scene.cloud);
        res.scene.boxes.push_back(box);
        ++res.placed_objects;
        placed = true;
      }
    }
  }

  for (int i = 0; i < cfg.background_points; ++i) {
    res.scene.cloud.push_back(Point{rng.uniform(cfg.place_min.x, cfg.place_max.x),
                                    rng.uniform(cfg.place_min.y, cfg.place_max.y),
                                    rng.uniform(cfg.place_min.z, cfg.place_max.z),
                                    rng.uniform(0.05, 0.95)});
  }
  return res;
}

struct PerturbConfig {
  double center_sigma = 0;  // meters
  double size_sigma = 0;    // relative
  double yaw_sigma = 0;     // radians
  double drop_rate = 0;
  double ghost_rate = 0;
  Vec3 ghost_min{4.0, -36.0, -3.0};
  Vec3 ghost_max{66.0, 36.0, 1.0};

  void validate() const {
    if (!(drop_rate >= 0 && drop_rate <= 1 && ghost_rate >= 0 && ghost_rate <= 1))
      throw invariant_error("PerturbConfig: rates must be in [0, 1]");
  }

  /// Scale every noise knob from a single level (demo --noise).
  static PerturbConfig from_level(double level) {
    PerturbConfig p;
    p.center_sigma = 0.25 * level;
    p.size_sigma = 0.05 * level;
    p.yaw_sigma = 0.1 * level;
    return p;
  }
};

/// An oracle detection: the (possibly jittered) box plus the center of the
/// ground-truth object it came from. The source center stands in for the
/// proposal point a learned head would predict from; the demo weighs
/// confidence by its attention inside the detection box.
struct OracleDetection {
  Box7 box;  // label and score filled in
  Vec3 source_center;
};

/// Jitter ground-truth boxes into scored detections, drop some, and add
/// ghosts. With all knobs at zero the output is the ground truth with score
/// exactly 1. Scores decay with the noise actually applied to each box.
inline std::vector<OracleDetection> perturb_detections(const std::vector<Box7>& gts,
                                                       const PerturbConfig& cfg,
                                                       std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::vector<OracleDetection> out;
  out.reserve(gts.size());

  for (const Box7& gt : gts) {
    if (cfg.drop_rate > 0 && rng.uniform() < cfg.drop_rate) continue;
    const double dx = cfg.center_sigma > 0 ? rng.normal(0, cfg.center_sigma) : 0;
    const double dy = cfg.center_sigma > 0 ? rng.normal(0, cfg.center_sigma) : 0;
    const double dz = cfg.center_sigma > 0 ? rng.normal(0, 0.5 * cfg.center_sigma) : 0;
    const double sl = cfg.size_sigma > 0 ? rng.normal(0, cfg.size_sigma) : 0;
    const double sw = cfg.size_sigma > 0 ? rng.normal(0, cfg.size_sigma) : 0;
    const double sh = cfg.size_sigma > 0 ? rng.normal(0, cfg.size_sigma) : 0;
    const double dyaw = cfg.yaw_sigma > 0 ? rng.normal(0, cfg.yaw_sigma) : 0;
    auto stretch = [](double e, double rel) { return e * std::max(0.2, 1.0 + rel); };

    const double magnitude =
        std::sqrt(dx * dx + dy * dy + dz * dz) + std::abs(dyaw) +
        (std::abs(sl) + std::abs(sw) + std::abs(sh)) / 3.0;
    OracleDetection det;
    det.box = Box7(gt.cx + dx, gt.cy + dy, gt.cz + dz, stretch(gt.l, sl), stretch(gt.w, sw),
                   stretch(gt.h, sh), gt.yaw + dyaw, gt.label, std::exp(-magnitude));
    det.source_center = gt.center();
    out.push_back(det);
  }

  if (cfg.ghost_rate > 0) {
    for (const Box7& gt : gts) {
      if (rng.uniform() >= cfg.ghost_rate) continue;
      const double l = std::max(0.2, gt.l * rng.uniform(0.8, 1.2));
      const double w = std::max(0.2, gt.w * rng.uniform(0.8, 1.2));
      const double h = std::max(0.2, gt.h * rng.uniform(0.8, 1.2));
      OracleDetection ghost;
      ghost.box = Box7(rng.uniform(cfg.ghost_min.x, cfg.ghost_max.x),
                       rng.uniform(cfg.ghost_min.y, cfg.ghost_max.y),
                       cfg.ghost_min.z + h / 2 + 1.0, l, w, h, rng.uniform(-kPi, kPi), gt.label,
                       rng.uniform(0.05, 0.45));
      ghost.source_center = ghost.box.center();
      out.push_back(ghost);
    }
  }
  return out;
}

}  // namespace lidet::synth
