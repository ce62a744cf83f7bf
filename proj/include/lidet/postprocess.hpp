#pragma once

// Prediction-side geometry: class-wise score prefiltering, greedy 3D-IoU
// NMS, top-K selection, RoI grid-point sampling and sparse-voxel
// neighborhood queries.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"
#include "lidet/voxelizer.hpp"

namespace lidet {

/// Detections are boxes carrying their class label and a score in [0, 1].
using Detection = Box7;

/// Keep detections whose score is at or above their class threshold
/// (boundary inclusive). A detection whose class has no threshold is an
/// error.
inline std::vector<Detection> score_filter(const std::vector<Detection>& dets,
                                           const std::map<int, double>& thresholds) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    auto it = thresholds.find(d.label);
    if (it == thresholds.end())
      throw std::invalid_argument("score_filter: no threshold for class " +
                                  std::to_string(d.label));
    if (d.score >= it->second) kept.push_back(d);
  }
  return kept;
}

namespace detail {
/// Indices ordered by descending score, ties by input index.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}
}  // namespace detail

/// Greedy 3D-IoU NMS, run per class independently: repeatedly keep the
/// highest-score remaining detection and suppress everything of the same
/// class with iou_3d strictly above the threshold. Output is ordered by
/// descending score (ties by input index).
inline std::vector<Detection> nms_3d(const std::vector<Detection>& dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("nms_3d: threshold must be in [0,1]");
  const auto order = detail::score_order(dets);
  std::vector<char> suppressed(dets.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (suppressed[j] || dets[j].label != dets[i].label) continue;
      if (iou_3d(dets[i], dets[j]) > iou_threshold) suppressed[j] = 1;
    }
  }
  return kept;
}

/// The k highest-score detections, ties broken by earlier input index;
/// output in that order.
inline std::vector<Detection> top_k(const std::vector<Detection>& dets, std::size_t k = 128) {
  auto order = detail::score_order(dets);
  if (order.size() > k) order.resize(k);
  std::vector<Detection> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(dets[i]);
  return out;
}

struct RoiGridSpec {
  std::array<int, 3> subdivisions{6, 6, 6};
  std::vector<std::array<int, 3>> search_ranges{{4, 4, 4}, {8, 8, 8}};

  void validate() const {
    for (int s : subdivisions)
      if (s < 1) throw invariant_error("RoiGridSpec: subdivisions must be >= 1");
    for (const auto& r : search_ranges)
      for (int v : r)
        if (v < 0) throw invariant_error("RoiGridSpec: search range must be >= 0");
  }
};

/// Centers of a uniform nx x ny x nz subdivision of the oriented box, in
/// world coordinates. All points are strictly inside the box.
inline std::vector<Vec3> roi_grid_points(const Box7& roi, const std::array<int, 3>& subdivisions) {
  for (int s : subdivisions)
    if (s < 1) throw std::invalid_argument("roi_grid_points: subdivisions must be >= 1");
  const int nx = subdivisions[0], ny = subdivisions[1], nz = subdivisions[2];
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int i = 0; i < nx; ++i) {
    const double lx = -roi.l / 2 + (i + 0.5) * roi.l / nx;
    for (int j = 0; j < ny; ++j) {
      const double ly = -roi.w / 2 + (j + 0.5) * roi.w / ny;
      for (int k = 0; k < nz; ++k) {
        const double lz = -roi.h / 2 + (k + 0.5) * roi.h / nz;
        out.push_back(from_local({lx, ly, lz}, roi));
      }
    }
  }
  return out;
}

inline std::vector<Vec3> roi_grid_points(const Box7& roi, const RoiGridSpec& spec) {
  spec.validate();
  return roi_grid_points(roi, spec.subdivisions);
}

/// Occupied cells whose index differs from the center point's cell by at
/// most range per axis. A center outside the grid range yields an empty
/// result. Output is in ascending index order.
inline std::vector<VoxelIndex> neighbor_query(const SparseVoxelGrid& grid, const Vec3& center,
                                              const std::array<int, 3>& range) {
  std::vector<VoxelIndex> out;
  auto c = voxel_index(center, grid.config, grid.dims);
  if (!c) return out;
  const int x0 = std::max(0, c->ix - range[0]), x1 = std::min(grid.dims[0] - 1, c->ix + range[0]);
  const int y0 = std::max(0, c->iy - range[1]), y1 = std::min(grid.dims[1] - 1, c->iy + range[1]);
  const int z0 = std::max(0, c->iz - range[2]), z1 = std::min(grid.dims[2] - 1, c->iz + range[2]);
  for (int ix = x0; ix <= x1; ++ix)
    for (int iy = y0; iy <= y1; ++iy)
      for (int iz = z0; iz <= z1; ++iz) {
        VoxelIndex v{ix, iy, iz};
        if (grid.find(v)) out.push_back(v);
      }
  return out;
}

/// One result list per configured search range (the two RoI pooling scales
/// by default), not a union.
inline std::vector<std::vector<VoxelIndex>> neighbor_query(const SparseVoxelGrid& grid,
                                                           const Vec3& center,
                                                           const RoiGridSpec& spec) {
  spec.validate();
  std::vector<std::vector<VoxelIndex>> out;
  out.reserve(spec.search_ranges.size());
  for (const auto& r : spec.search_ranges) out.push_back(neighbor_query(grid, center, r));
  return out;
}

}  // namespace lidet
