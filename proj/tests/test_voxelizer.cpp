#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "lidet/rng.hpp"
#include "lidet/voxelizer.hpp"

using namespace lidet;

namespace {

PointCloud random_cloud(Rng& rng, int n, const VoxelConfig& cfg, double spill = 0.1) {
  PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(n));
  // sample a bit beyond the range so some points fall outside
  const Vec3 lo = cfg.range_min, hi = cfg.range_max;
  const double mx = spill * (hi.x - lo.x), my = spill * (hi.y - lo.y), mz = spill * (hi.z - lo.z);
  for (int i = 0; i < n; ++i)
    cloud.push_back(Point{rng.uniform(lo.x - mx, hi.x + mx), rng.uniform(lo.y - my, hi.y + my),
                          rng.uniform(lo.z - mz, hi.z + mz), rng.uniform(0, 1)});
  return cloud;
}

}  // namespace

TEST_CASE("grid_dims of the default config", "[voxelizer]") {
  VoxelConfig cfg;
  REQUIRE(grid_dims(cfg) == std::array<int, 3>{1408, 1600, 40});
}

TEST_CASE("grid_dims unit case and non-integer rejection", "[voxelizer]") {
  VoxelConfig cfg;
  cfg.range_min = {0, 0, 0};
  cfg.range_max = {1, 1, 1};
  cfg.voxel_size = {1, 1, 1};
  REQUIRE(grid_dims(cfg) == std::array<int, 3>{1, 1, 1});

  cfg.voxel_size = {0.3, 1, 1};
  REQUIRE_THROWS_AS(grid_dims(cfg), invariant_error);
}

TEST_CASE("voxel_index at the corners of the range", "[voxelizer]") {
  VoxelConfig cfg;
  auto at_min = voxel_index(Vec3{0.0, -40.0, -3.0}, cfg);
  REQUIRE(at_min.has_value());
  REQUIRE(*at_min == VoxelIndex{0, 0, 0});

  auto one_cell_in = voxel_index(Vec3{0.05, -39.95, -2.9}, cfg);
  REQUIRE(one_cell_in.has_value());
  REQUIRE(*one_cell_in == VoxelIndex{1, 1, 1});

  REQUIRE_FALSE(voxel_index(Vec3{70.4, 0.0, 0.0}, cfg).has_value());  // upper bound exclusive
  REQUIRE_FALSE(voxel_index(Vec3{-0.01, 0.0, 0.0}, cfg).has_value());
}

TEST_CASE("voxelize a single point", "[voxelizer]") {
  VoxelConfig cfg;
  PointCloud cloud{{1.0, 2.0, 0.0, 0.7}};
  auto grid = voxelize(cloud, cfg);
  REQUIRE(grid.size() == 1);
  const VoxelCell& cell = grid.cells.begin()->second;
  REQUIRE(cell.total_count == 1);
  REQUIRE(cell.points.size() == 1);
  REQUIRE(cell.mean_feature == std::array<double, 4>{1.0, 2.0, 0.0, 0.7});
}

TEST_CASE("cap keeps the first T points and counts the rest", "[voxelizer]") {
  VoxelConfig cfg;
  // seven points in one cell with distinct reflectances
  PointCloud cloud;
  for (int i = 0; i < 7; ++i) cloud.push_back(Point{10.01, 0.01, 0.01, 0.1 * (i + 1)});
  auto grid = voxelize(cloud, cfg);
  REQUIRE(grid.size() == 1);
  const VoxelCell& cell = grid.cells.begin()->second;
  REQUIRE(cell.total_count == 7);
  REQUIRE(cell.points.size() == 5);
  for (int i = 0; i < 5; ++i) REQUIRE(cell.points[i].r == Catch::Approx(0.1 * (i + 1)));
  // mean over the retained five: (0.1+0.2+0.3+0.4+0.5)/5
  REQUIRE(cell.mean_feature[3] == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("all points out of range yields an empty grid", "[voxelizer]") {
  VoxelConfig cfg;
  PointCloud cloud{{-5, 0, 0, 0}, {100, 0, 0, 0}, {10, 45, 0, 0}};
  REQUIRE(voxelize(cloud, cfg).size() == 0);
}

TEST_CASE("conservation: total counts add up to in-range points", "[voxelizer]") {
  Rng rng(21);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.25, 0.25, 0.5};
  for (int trial = 0; trial < 20; ++trial) {
    auto cloud = random_cloud(rng, 2000, cfg);
    std::size_t in_range = 0;
    for (const Point& p : cloud)
      if (voxel_index(p, cfg)) ++in_range;
    auto grid = voxelize(cloud, cfg);
    std::size_t total = 0;
    for (const auto& [k, cell] : grid.cells) total += cell.total_count;
    REQUIRE(total == in_range);
  }
}

TEST_CASE("retained points map back to their cell", "[voxelizer]") {
  Rng rng(22);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.5, 0.5, 0.5};
  auto cloud = random_cloud(rng, 3000, cfg);
  auto grid = voxelize(cloud, cfg);
  for (const auto& [key, cell] : grid.cells) {
    const VoxelIndex idx = grid.delinear(key);
    REQUIRE(idx.ix >= 0);
    REQUIRE(idx.ix < grid.dims[0]);
    REQUIRE(idx.iy < grid.dims[1]);
    REQUIRE(idx.iz < grid.dims[2]);
    for (const Point& p : cell.points) {
      auto back = voxel_index(p, cfg);
      REQUIRE(back.has_value());
      REQUIRE(*back == idx);
    }
  }
}

TEST_CASE("mean feature stays inside the cell bounds", "[voxelizer]") {
  Rng rng(23);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.5, 0.5, 0.5};
  auto grid = voxelize(random_cloud(rng, 3000, cfg), cfg);
  const double eps = 1e-9;
  for (const auto& [key, cell] : grid.cells) {
    const VoxelIndex idx = grid.delinear(key);
    const double x0 = cfg.range_min.x + idx.ix * cfg.voxel_size.x;
    const double y0 = cfg.range_min.y + idx.iy * cfg.voxel_size.y;
    const double z0 = cfg.range_min.z + idx.iz * cfg.voxel_size.z;
    REQUIRE(cell.mean_feature[0] >= x0 - eps);
    REQUIRE(cell.mean_feature[0] <= x0 + cfg.voxel_size.x + eps);
    REQUIRE(cell.mean_feature[1] >= y0 - eps);
    REQUIRE(cell.mean_feature[1] <= y0 + cfg.voxel_size.y + eps);
    REQUIRE(cell.mean_feature[2] >= z0 - eps);
    REQUIRE(cell.mean_feature[2] <= z0 + cfg.voxel_size.z + eps);
  }
}

TEST_CASE("downsample_index floors componentwise", "[voxelizer]") {
  REQUIRE(downsample_index({0, 0, 0}, 8) == VoxelIndex{0, 0, 0});
  REQUIRE(downsample_index({15, 16, 7}, 8) == VoxelIndex{1, 2, 0});
  REQUIRE(downsample_index({1407, 1599, 39}, 8) == VoxelIndex{175, 199, 4});
  REQUIRE_THROWS_AS(downsample_index({1, 1, 1}, 0), std::invalid_argument);
}

TEST_CASE("downsampled indices stay within the coarse grid", "[voxelizer]") {
  Rng rng(24);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.25, 0.25, 0.5};
  const auto dims = grid_dims(cfg);
  auto grid = voxelize(random_cloud(rng, 2000, cfg), cfg);
  const int factor = 8;
  for (const auto& [key, cell] : grid.cells) {
    const VoxelIndex coarse = downsample_index(grid.delinear(key), factor);
    REQUIRE(coarse.ix <= (dims[0] - 1) / factor);
    REQUIRE(coarse.iy <= (dims[1] - 1) / factor);
    REQUIRE(coarse.iz <= (dims[2] - 1) / factor);
  }
}

TEST_CASE("bev_index drops the vertical component", "[voxelizer]") {
  REQUIRE(bev_index({3, 5, 9}) == std::array<int, 2>{3, 5});
  REQUIRE(bev_index({0, 0, 0}) == std::array<int, 2>{0, 0});
}

TEST_CASE("bev projection never grows the cell set", "[voxelizer]") {
  Rng rng(25);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.5, 0.5, 0.5};
  auto grid = voxelize(random_cloud(rng, 2000, cfg), cfg);
  std::set<std::array<int, 2>> bev;
  for (const auto& [key, cell] : grid.cells) bev.insert(bev_index(grid.delinear(key)));
  REQUIRE(bev.size() <= grid.size());
}

TEST_CASE("serialization is deterministic", "[voxelizer]") {
  Rng rng(26);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {0.5, 0.5, 0.5};
  auto cloud = random_cloud(rng, 2000, cfg);
  const std::string a = serialize_grid(voxelize(cloud, cfg));
  const std::string b = serialize_grid(voxelize(cloud, cfg));
  REQUIRE(a == b);
  REQUIRE(a.size() > 12u);
}

TEST_CASE("random-sample cap policy conserves counts and is seeded", "[voxelizer]") {
  Rng rng(27);
  VoxelConfig cfg;
  cfg.range_min = {0, -8, -2};
  cfg.range_max = {16, 8, 2};
  cfg.voxel_size = {2, 2, 2};
  cfg.max_points_per_voxel = 3;
  cfg.cap_policy = VoxelConfig::CapPolicy::random_sample;
  cfg.sample_seed = 99;
  auto cloud = random_cloud(rng, 4000, cfg, 0.0);
  auto g1 = voxelize(cloud, cfg);
  auto g2 = voxelize(cloud, cfg);
  REQUIRE(serialize_grid(g1) == serialize_grid(g2));
  std::size_t total = 0;
  for (const auto& [k, cell] : g1.cells) {
    REQUIRE(cell.points.size() <= 3u);
    total += cell.total_count;
  }
  REQUIRE(total == cloud.size());
}
