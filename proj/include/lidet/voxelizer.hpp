#pragma once

// Sparse voxelization of a cropped scene: bucket points into a regular
// grid, cap the retained points per voxel, reduce each cell to a mean
// feature, and expose strided-downsample / BEV index maps plus a stable
// binary serialization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/rng.hpp"

namespace lidet {

struct VoxelConfig {
  enum class CapPolicy { keep_first, random_sample };

  Vec3 range_min{0.0, -40.0, -3.0};
  Vec3 range_max{70.4, 40.0, 1.0};
  Vec3 voxel_size{0.05, 0.05, 0.1};
  int max_points_per_voxel = 5;
  CapPolicy cap_policy = CapPolicy::keep_first;
  std::uint64_t sample_seed = 0;  // only used by random_sample

  void validate() const {
    if (!(range_max.x > range_min.x && range_max.y > range_min.y && range_max.z > range_min.z))
      throw invariant_error("VoxelConfig: range_max must exceed range_min componentwise");
    if (!(voxel_size.x > 0 && voxel_size.y > 0 && voxel_size.z > 0))
      throw invariant_error("VoxelConfig: voxel_size must be positive");
    if (max_points_per_voxel < 1)
      throw invariant_error("VoxelConfig: max_points_per_voxel must be >= 1");
  }
};

struct VoxelIndex {
  int ix = 0, iy = 0, iz = 0;
  bool operator==(const VoxelIndex& o) const { return ix == o.ix && iy == o.iy && iz == o.iz; }
  bool operator<(const VoxelIndex& o) const {
    if (ix != o.ix) return ix < o.ix;
    if (iy != o.iy) return iy < o.iy;
    return iz < o.iz;
  }
};

namespace detail {

// Floor with a snap window of 1e-9 cells: coordinates that land within the
// window below a cell boundary (decimal configs rarely divide exactly in
// binary) go to the upper cell, matching exact-arithmetic floor on the
// nominal values.
inline long long snapped_floor(double f) {
  long long k = static_cast<long long>(std::floor(f));
  if (f - static_cast<double>(k) > 1.0 - 1e-9) ++k;
  return k;
}

inline long long axis_cells(double lo, double hi, double size, const char* axis) {
  const double q = (hi - lo) / size;
  const long long n = std::llround(q);
  if (n <= 0 || std::abs(q - static_cast<double>(n)) > 1e-6 * static_cast<double>(n))
    throw invariant_error(std::string("VoxelConfig: range/") + axis +
                          " is not an integer number of voxels");
  return n;
}

}  // namespace detail

/// Grid dimensions; throws invariant_error when the range does not divide
/// evenly by the voxel size.
inline std::array<int, 3> grid_dims(const VoxelConfig& cfg) {
  cfg.validate();
  return {static_cast<int>(detail::axis_cells(cfg.range_min.x, cfg.range_max.x, cfg.voxel_size.x, "x")),
          static_cast<int>(detail::axis_cells(cfg.range_min.y, cfg.range_max.y, cfg.voxel_size.y, "y")),
          static_cast<int>(detail::axis_cells(cfg.range_min.z, cfg.range_max.z, cfg.voxel_size.z, "z"))};
}

/// Cell index of a point, or nullopt when the point lies outside
/// [range_min, range_max) (lower bound inclusive, upper exclusive).
inline std::optional<VoxelIndex> voxel_index(const Vec3& p, const VoxelConfig& cfg,
                                             const std::array<int, 3>& dims) {
  const long long ix = detail::snapped_floor((p.x - cfg.range_min.x) / cfg.voxel_size.x);
  const long long iy = detail::snapped_floor((p.y - cfg.range_min.y) / cfg.voxel_size.y);
  const long long iz = detail::snapped_floor((p.z - cfg.range_min.z) / cfg.voxel_size.z);
  if (ix < 0 || iy < 0 || iz < 0 || ix >= dims[0] || iy >= dims[1] || iz >= dims[2])
    return std::nullopt;
  return VoxelIndex{static_cast<int>(ix), static_cast<int>(iy), static_cast<int>(iz)};
}

inline std::optional<VoxelIndex> voxel_index(const Vec3& p, const VoxelConfig& cfg) {
  return voxel_index(p, cfg, grid_dims(cfg));
}

inline std::optional<VoxelIndex> voxel_index(const Point& p, const VoxelConfig& cfg) {
  return voxel_index(p.xyz(), cfg);
}

/// Componentwise floor division by the stride factor.
inline VoxelIndex downsample_index(const VoxelIndex& idx, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample_index: factor must be >= 1");
  auto fdiv = [factor](int v) {
    int q = v / factor;
    if (v % factor != 0 && v < 0) --q;
    return q;
  };
  return {fdiv(idx.ix), fdiv(idx.iy), fdiv(idx.iz)};
}

/// Drop the vertical component.
inline std::array<int, 2> bev_index(const VoxelIndex& idx) { return {idx.ix, idx.iy}; }

struct VoxelCell {
  std::vector<Point> points;        // retained points, at most T
  std::uint32_t total_count = 0;    // all points that mapped here, pre-cap
  std::array<double, 4> mean_feature{};  // mean x, y, z, r over retained
};

struct SparseVoxelGrid {
  VoxelConfig config;
  std::array<int, 3> dims{};
  std::unordered_map<std::uint64_t, VoxelCell> cells;

  std::uint64_t linear(const VoxelIndex& v) const {
    return (static_cast<std::uint64_t>(v.ix) * dims[1] + static_cast<std::uint64_t>(v.iy)) *
               dims[2] +
           static_cast<std::uint64_t>(v.iz);
  }

  VoxelIndex delinear(std::uint64_t k) const {
    const auto dz = static_cast<std::uint64_t>(dims[2]);
    const auto dy = static_cast<std::uint64_t>(dims[1]);
    return {static_cast<int>(k / (dy * dz)), static_cast<int>((k / dz) % dy),
            static_cast<int>(k % dz)};
  }

  const VoxelCell* find(const VoxelIndex& v) const {
    auto it = cells.find(linear(v));
    return it == cells.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return cells.size(); }
};

/// Bucket the in-range points of a cloud. Per cell at most T points are
/// retained (first-in-input-order by default, seeded reservoir sample when
/// cap_policy is random_sample); total_count tracks the pre-cap count and
/// mean_feature averages the retained points only.
inline SparseVoxelGrid voxelize(const PointCloud& cloud, const VoxelConfig& cfg) {
  SparseVoxelGrid grid;
  grid.config = cfg;
  grid.dims = grid_dims(cfg);
  grid.cells.reserve(cloud.size());
  const std::size_t cap = static_cast<std::size_t>(cfg.max_points_per_voxel);
  Rng rng(cfg.sample_seed);

  for (const Point& p : cloud) {
    auto idx = voxel_index(p.xyz(), cfg, grid.dims);
    if (!idx) continue;
    VoxelCell& cell = grid.cells[grid.linear(*idx)];
    ++cell.total_count;
    if (cell.points.size() < cap) {
      cell.points.push_back(p);
    } else if (cfg.cap_policy == VoxelConfig::CapPolicy::random_sample) {
      const std::uint64_t j = rng.uniform_int(cell.total_count);
      if (j < cap) cell.points[static_cast<std::size_t>(j)] = p;
    }
  }

  for (auto& [key, cell] : grid.cells) {
    double sx = 0, sy = 0, sz = 0, sr = 0;
    for (const Point& p : cell.points) {
      sx += p.x;
      sy += p.y;
      sz += p.z;
      sr += p.r;
    }
    const double n = static_cast<double>(cell.points.size());
    cell.mean_feature = {sx / n, sy / n, sz / n, sr / n};
  }
  return grid;
}

namespace detail {
template <typename T>
inline void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));  // little-endian hosts only
}
}  // namespace detail

/// Stable binary layout for golden-file tests: int32 dims[3], uint64 cell
/// count, then records sorted by (ix, iy, iz): int32 index[3], uint32
/// total_count, uint32 retained count, retained points as float64
/// (x, y, z, r). All fields little-endian.
inline std::string serialize_grid(const SparseVoxelGrid& grid) {
  static_assert(sizeof(double) == 8);
  std::string out;
  for (int d : grid.dims) detail::put_le(out, static_cast<std::int32_t>(d));
  detail::put_le(out, static_cast<std::uint64_t>(grid.cells.size()));

  std::vector<std::uint64_t> keys;
  keys.reserve(grid.cells.size());
  for (const auto& [k, cell] : grid.cells) keys.push_back(k);
  std::sort(keys.begin(), keys.end());

  for (std::uint64_t k : keys) {
    const VoxelCell& cell = grid.cells.at(k);
    const VoxelIndex idx = grid.delinear(k);
    detail::put_le(out, static_cast<std::int32_t>(idx.ix));
    detail::put_le(out, static_cast<std::int32_t>(idx.iy));
    detail::put_le(out, static_cast<std::int32_t>(idx.iz));
    detail::put_le(out, cell.total_count);
    detail::put_le(out, static_cast<std::uint32_t>(cell.points.size()));
    for (const Point& p : cell.points) {
      detail::put_le(out, p.x);
      detail::put_le(out, p.y);
      detail::put_le(out, p.z);
      detail::put_le(out, p.r);
    }
  }
  return out;
}

}  // namespace lidet
