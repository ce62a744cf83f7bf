#pragma once

// Anchor tiling and box target encoding. Residuals follow the common
// diagonal-normalized convention: center offsets divided by the reference
// BEV diagonal (z by the reference height), log-ratio extents, and a
// wrapped yaw difference. The point-based variant replaces the reference
// center with the point itself and the reference size with a class prior.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidet/attention.hpp"
#include "lidet/core.hpp"
#include "lidet/geometry.hpp"
#include "lidet/voxelizer.hpp"

namespace lidet {

struct ClassSize {
  double l = 1, w = 1, h = 1;
};

struct AnchorClass {
  int label = 0;
  ClassSize size;
  double z_center = -1.0;  // anchor plane height; not a benchmark value
  double iou_pos = 0.6;    // matching thresholds for the auxiliary task
  double iou_neg = 0.45;
};

struct AnchorConfig {
  std::vector<AnchorClass> classes = {
      {0, {3.9, 1.6, 1.56}, -1.0, 0.6, 0.45},   // car
      {1, {0.8, 0.6, 1.73}, -1.0, 0.5, 0.35},   // pedestrian
      {2, {1.76, 0.6, 1.73}, -1.0, 0.5, 0.35},  // cyclist
  };
  std::vector<double> yaws = {0.0, kPi / 2};
  int bev_stride = 8;

  void validate() const {
    if (bev_stride < 1) throw invariant_error("AnchorConfig: stride must be >= 1");
    for (const auto& c : classes)
      if (!(c.size.l > 0 && c.size.w > 0 && c.size.h > 0))
        throw invariant_error("AnchorConfig: class sizes must be positive");
  }

  const AnchorClass* find_class(int label) const {
    for (const auto& c : classes)
      if (c.label == label) return &c;
    return nullptr;
  }
};

/// Number of anchors tiled over a WxH BEV grid: ceil(W/stride) *
/// ceil(H/stride) * #sizes * #yaws.
inline std::size_t anchor_count(int bev_w, int bev_h, const AnchorConfig& cfg) {
  const auto cells_x = static_cast<std::size_t>((bev_w + cfg.bev_stride - 1) / cfg.bev_stride);
  const auto cells_y = static_cast<std::size_t>((bev_h + cfg.bev_stride - 1) / cfg.bev_stride);
  return cells_x * cells_y * cfg.classes.size() * cfg.yaws.size();
}

/// Tile one anchor per (strided BEV cell center, class size, yaw). Cell
/// centers are placed in world coordinates using the voxel grid origin and
/// cell size; each anchor carries its class label.
inline std::vector<Box7> anchor_grid(int bev_w, int bev_h, const AnchorConfig& cfg,
                                     const VoxelConfig& voxel_cfg = VoxelConfig{}) {
  if (bev_w < 1 || bev_h < 1) throw std::invalid_argument("anchor_grid: dims must be >= 1");
  cfg.validate();
  const int stride = cfg.bev_stride;
  const int cells_x = (bev_w + stride - 1) / stride;
  const int cells_y = (bev_h + stride - 1) / stride;
  const double step_x = voxel_cfg.voxel_size.x * stride;
  const double step_y = voxel_cfg.voxel_size.y * stride;

  std::vector<Box7> anchors;
  anchors.reserve(anchor_count(bev_w, bev_h, cfg));
  for (int iy = 0; iy < cells_y; ++iy) {
    const double cy = voxel_cfg.range_min.y + (iy + 0.5) * step_y;
    for (int ix = 0; ix < cells_x; ++ix) {
      const double cx = voxel_cfg.range_min.x + (ix + 0.5) * step_x;
      for (const AnchorClass& cls : cfg.classes)
        for (double yaw : cfg.yaws)
          anchors.emplace_back(cx, cy, cls.z_center, cls.size.l, cls.size.w, cls.size.h, yaw,
                               cls.label);
    }
  }
  return anchors;
}

enum class YawEncoding { wrapped_diff, sin_cos };

/// Regression target. dyaw holds the wrapped yaw difference, or its sine
/// when sin_cos encoding is selected (dyaw_cos then holds the cosine and is
/// unused otherwise).
struct BoxResidual {
  double dx = 0, dy = 0, dz = 0;
  double dl = 0, dw = 0, dh = 0;
  double dyaw = 0;
  double dyaw_cos = 1;
};

namespace detail {
inline BoxResidual encode_against(double rcx, double rcy, double rcz, const ClassSize& rs,
                                  double ryaw, const Box7& gt, YawEncoding enc) {
  if (!(rs.l > 0 && rs.w > 0 && rs.h > 0))
    throw std::invalid_argument("encode: reference extents must be positive");
  const double d = std::hypot(rs.l, rs.w);
  BoxResidual r;
  r.dx = (gt.cx - rcx) / d;
  r.dy = (gt.cy - rcy) / d;
  r.dz = (gt.cz - rcz) / rs.h;
  r.dl = std::log(gt.l / rs.l);
  r.dw = std::log(gt.w / rs.w);
  r.dh = std::log(gt.h / rs.h);
  const double diff = wrap_angle(gt.yaw - ryaw);
  if (enc == YawEncoding::wrapped_diff) {
    r.dyaw = diff;
  } else {
    r.dyaw = std::sin(diff);
    r.dyaw_cos = std::cos(diff);
  }
  return r;
}

inline Box7 decode_against(const BoxResidual& r, double rcx, double rcy, double rcz,
                           const ClassSize& rs, double ryaw, YawEncoding enc, int label) {
  const double d = std::hypot(rs.l, rs.w);
  const double diff =
      enc == YawEncoding::wrapped_diff ? r.dyaw : std::atan2(r.dyaw, r.dyaw_cos);
  return Box7(rcx + r.dx * d, rcy + r.dy * d, rcz + r.dz * rs.h, rs.l * std::exp(r.dl),
              rs.w * std::exp(r.dw), rs.h * std::exp(r.dh), wrap_angle(ryaw + diff), label);
}
}  // namespace detail

/// Residual of a ground-truth box against an anchor box.
inline BoxResidual encode_voxel(const Box7& ref, const Box7& gt,
                                YawEncoding enc = YawEncoding::wrapped_diff) {
  return detail::encode_against(ref.cx, ref.cy, ref.cz, {ref.l, ref.w, ref.h}, ref.yaw, gt, enc);
}

inline Box7 decode_voxel(const BoxResidual& r, const Box7& ref,
                         YawEncoding enc = YawEncoding::wrapped_diff) {
  return detail::decode_against(r, ref.cx, ref.cy, ref.cz, {ref.l, ref.w, ref.h}, ref.yaw, enc,
                                ref.label);
}

/// Residual of a ground-truth box against a raw point with a class size
/// prior (reference yaw 0).
inline BoxResidual encode_point(const Vec3& p, const ClassSize& prior, const Box7& gt,
                                YawEncoding enc = YawEncoding::wrapped_diff) {
  return detail::encode_against(p.x, p.y, p.z, prior, 0.0, gt, enc);
}

inline Box7 decode_point(const BoxResidual& r, const Vec3& p, const ClassSize& prior,
                         YawEncoding enc = YawEncoding::wrapped_diff, int label = -1) {
  return detail::decode_against(r, p.x, p.y, p.z, prior, 0.0, enc, label);
}

/// IoU-derived soft confidence label: min(1, max(0, 2*iou - 0.5)).
inline double soft_iou_label(double iou) { return std::clamp(2.0 * iou - 0.5, 0.0, 1.0); }

struct PointTarget {
  bool foreground = false;
  int class_label = -1;             // -1 for background
  int gt_index = -1;                // assigned ground-truth box
  std::optional<BoxResidual> residual;
  double attention = 0;
};

/// Per-point first-stage targets. A point inside at least one ground-truth
/// box is foreground: it takes the class and point-encoded residual of the
/// box whose center is nearest (deterministic tie-break for overlapping
/// boxes) and the attention target of the attention module (maximum over
/// all containing boxes). Boxes whose label has no size prior in the
/// anchor config are rejected.
inline std::vector<PointTarget> assign_point_targets(const PointCloud& cloud,
                                                     const std::vector<Box7>& gts,
                                                     const AnchorConfig& cfg = AnchorConfig{},
                                                     YawEncoding enc = YawEncoding::wrapped_diff) {
  for (const Box7& g : gts)
    if (!cfg.find_class(g.label))
      throw std::invalid_argument("assign_point_targets: no size prior for class " +
                                  std::to_string(g.label));

  std::vector<PointTarget> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud[i].xyz();
    PointTarget& t = out[i];
    double best_dist = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!point_in_box(p, gts[g])) continue;
      const double d2 = dot(p - gts[g].center(), p - gts[g].center());
      t.attention = std::max(t.attention, confidence_attention(to_local(p, gts[g]), gts[g]).score);
      if (!t.foreground || d2 < best_dist) {
        t.foreground = true;
        t.gt_index = static_cast<int>(g);
        best_dist = d2;
      }
    }
    if (t.foreground) {
      const Box7& g = gts[static_cast<std::size_t>(t.gt_index)];
      t.class_label = g.label;
      t.residual = encode_point(p, cfg.find_class(g.label)->size, g, enc);
    }
  }
  return out;
}

/// Auxiliary anchor classification labels: 1 positive, 0 negative,
/// -1 ignored. An anchor is matched against same-class ground truth by BEV
/// IoU and compared with its class thresholds.
inline std::vector<int> assign_anchor_labels(const std::vector<Box7>& anchors,
                                             const std::vector<Box7>& gts,
                                             const AnchorConfig& cfg = AnchorConfig{}) {
  std::vector<int> labels(anchors.size(), 0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const AnchorClass* cls = cfg.find_class(anchors[i].label);
    if (!cls) throw std::invalid_argument("assign_anchor_labels: unknown anchor class");
    double best = 0;
    for (const Box7& g : gts)
      if (g.label == anchors[i].label) best = std::max(best, iou_bev(anchors[i], g));
    labels[i] = best >= cls->iou_pos ? 1 : (best < cls->iou_neg ? 0 : -1);
  }
  return labels;
}

}  // namespace lidet
