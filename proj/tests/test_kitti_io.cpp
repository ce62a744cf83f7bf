#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <vector>

#include "lidet/kitti_io.hpp"
#include "lidet/rng.hpp"

using namespace lidet;
using namespace lidet::kitti;

namespace {

std::string pack_floats(const std::vector<float>& v) {
  std::string out(v.size() * 4, '\0');
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

KittiLabel sample_label() {
  KittiLabel l;
  l.type = "Car";
  l.truncation = 0.15;
  l.occlusion = 1;
  l.alpha = -1.57;
  l.x1 = 100.25;
  l.y1 = 120.5;
  l.x2 = 300.75;
  l.y2 = 240.0;
  l.h = 1.56;
  l.w = 1.6;
  l.l = 3.9;
  l.x = 2.5;
  l.y = 1.65;
  l.z = 12.0;
  l.rotation_y = 0.7;
  return l;
}

}  // namespace

TEST_CASE("velodyne blobs decode in order", "[kitti]") {
  const std::string bytes = pack_floats({1, 2, 3, 0.5f, 4, 5, 6, 0.25f});
  auto cloud = read_velodyne(bytes);
  REQUIRE(cloud.size() == 2);
  REQUIRE(cloud[0].x == 1.0);
  REQUIRE(cloud[0].r == 0.5);
  REQUIRE(cloud[1].z == 6.0);

  REQUIRE(read_velodyne("").empty());
  REQUIRE_THROWS_AS(read_velodyne(std::string(15, 'x')), format_error);
}

TEST_CASE("velodyne write/read round trips byte-for-byte", "[kitti]") {
  Rng rng(101);
  PointCloud cloud;
  for (int i = 0; i < 500; ++i) {
    // values that are exactly float32
    cloud.push_back(Point{static_cast<float>(rng.uniform(-80, 80)),
                          static_cast<float>(rng.uniform(-80, 80)),
                          static_cast<float>(rng.uniform(-5, 5)),
                          static_cast<float>(rng.uniform(0, 1))});
  }
  const std::string bytes = write_velodyne(cloud);
  REQUIRE(write_velodyne(read_velodyne(bytes)) == bytes);
}

TEST_CASE("non-finite points are dropped and counted", "[kitti]") {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const std::string bytes = pack_floats({1, 2, 3, 0.5f, nan, 5, 6, 0.25f, 7, 8, 9, 0.75f});
  std::size_t dropped = 0;
  auto cloud = read_velodyne(bytes, &dropped);
  REQUIRE(cloud.size() == 2);
  REQUIRE(dropped == 1);
  REQUIRE(cloud[1].x == 7.0);
}

TEST_CASE("label lines parse field-for-field", "[kitti]") {
  const std::string line =
      "Pedestrian 0.10 2 -1.234567 10.000000 20.000000 30.000000 60.000000 "
      "1.730000 0.600000 0.800000 -3.500000 1.400000 8.250000 1.234567";
  KittiLabel l = parse_label_line(line);
  REQUIRE(l.type == "Pedestrian");
  REQUIRE(l.truncation == 0.10);
  REQUIRE(l.occlusion == 2);
  REQUIRE(l.y2 == 60.0);
  REQUIRE(l.h == 1.73);
  REQUIRE(l.l == 0.8);
  REQUIRE(l.z == 8.25);
  REQUIRE_FALSE(l.has_score);
  REQUIRE(l.bbox_height() == 40.0);

  KittiLabel scored = parse_label_line(line + " 0.87");
  REQUIRE(scored.has_score);
  REQUIRE(scored.score == 0.87);

  REQUIRE_THROWS_AS(parse_label_line("Car 1 2 3"), format_error);
  REQUIRE_THROWS_AS(
      parse_label_line("Car 0.0 0 abc 1 2 3 4 1.5 1.6 3.9 1 2 3 0.5"),
      format_error);
}

TEST_CASE("DontCare rows parse but are not evaluable", "[kitti]") {
  KittiLabel l = parse_label_line(
      "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10");
  REQUIRE(l.is_dontcare());
  REQUIRE_FALSE(l.is_evaluable());
  Calibration calib = default_calibration();
  REQUIRE_THROWS_AS(label_to_lidar_box(l, calib), std::invalid_argument);
}

TEST_CASE("format/parse reaches a fixed point", "[kitti]") {
  KittiLabel l = sample_label();
  l.has_score = true;
  l.score = 0.87;
  const std::string once = format_label(l);
  const std::string twice = format_label(parse_label_line(once));
  REQUIRE(once == twice);

  KittiLabel back = parse_label_line(once);
  REQUIRE(back.type == l.type);
  REQUIRE(back.occlusion == l.occlusion);
  REQUIRE(back.h == Catch::Approx(l.h).margin(1e-6));
  REQUIRE(back.rotation_y == Catch::Approx(l.rotation_y).margin(1e-6));
  REQUIRE(back.score == Catch::Approx(l.score).margin(1e-2));
}

TEST_CASE("calibration text round trips through the parser", "[kitti]") {
  const Calibration c = default_calibration();
  std::istringstream is(format_calib(c));
  const Calibration parsed = parse_calib(is);
  REQUIRE(parsed.P2 == c.P2);
  REQUIRE(parsed.R0.m == c.R0.m);
  REQUIRE(parsed.Tr_rot.m == c.Tr_rot.m);

  std::istringstream missing("P2: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  REQUIRE_THROWS_AS(parse_calib(missing), format_error);

  // a wildly non-orthonormal rotation part must be rejected
  std::istringstream skewed(
      "P2: 700 0 600 0 0 700 170 0 0 0 1 0\n"
      "R0_rect: 1 0.5 0 0 1 0 0 0 1\n"
      "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0\n");
  REQUIRE_THROWS_AS(parse_calib(skewed), format_error);
}

TEST_CASE("camera-to-lidar conversion on a pure axis permutation", "[kitti]") {
  // cam x = -velo y, cam y = -velo z, cam z = velo x; identity rectification
  Calibration calib;
  calib.P2 = {700, 0, 600, 0, 0, 700, 170, 0, 0, 0, 1, 0};
  calib.R0.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  calib.Tr_rot.m = {0, -1, 0, 0, 0, -1, 1, 0, 0};
  calib.Tr_t = {0, 0, 0};

  KittiLabel l;
  l.type = "Car";
  l.h = 2.0;
  l.w = 1.6;
  l.l = 3.9;
  l.x = 0.0;
  l.y = 1.0;  // bottom sits one meter below the camera axis
  l.z = 10.0;
  l.rotation_y = -kPi / 2;

  const Box7 box = label_to_lidar_box(l, calib);
  // gravity center in camera coords is (0, 0, 10) -> velo (10, 0, 0)
  REQUIRE(box.cx == Catch::Approx(10.0).margin(1e-12));
  REQUIRE(box.cy == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(box.cz == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(box.l == 3.9);
  REQUIRE(box.w == 1.6);
  REQUIRE(box.h == 2.0);
  // yaw = -rotation_y - pi/2 = 0: heading straight along +x
  REQUIRE(box.yaw == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(box.label == 0);
}

TEST_CASE("the bottom-center lift is exactly h/2 along camera y", "[kitti]") {
  const Calibration calib = default_calibration();
  KittiLabel l = sample_label();
  const Box7 box = label_to_lidar_box(l, calib);
  const Vec3 cam = calib.cam_from_velo(box.center());
  REQUIRE(cam.y == Catch::Approx(l.y - l.h / 2).margin(1e-9));
  REQUIRE(cam.x == Catch::Approx(l.x).margin(1e-9));
  REQUIRE(cam.z == Catch::Approx(l.z).margin(1e-9));
}

TEST_CASE("lidar-camera-lidar round trip stays within 1e-6", "[kitti]") {
  const Calibration calib = default_calibration();
  Rng rng(102);
  for (int trial = 0; trial < 1000; ++trial) {
    const Box7 box(rng.uniform(3, 65), rng.uniform(-35, 35), rng.uniform(-2.2, 0.5),
                   rng.uniform(0.5, 5), rng.uniform(0.4, 2.5), rng.uniform(0.8, 2.2),
                   rng.uniform(-kPi, kPi), 0, 0.5);
    const KittiLabel label = lidar_box_to_label(box, calib, "Car", true);
    const Box7 back = label_to_lidar_box(label, calib);
    REQUIRE(std::abs(back.cx - box.cx) < 1e-6);
    REQUIRE(std::abs(back.cy - box.cy) < 1e-6);
    REQUIRE(std::abs(back.cz - box.cz) < 1e-6);
    REQUIRE(std::abs(wrap_angle(back.yaw - box.yaw)) < 1e-9);
    REQUIRE(back.l == box.l);
    REQUIRE(back.h == box.h);
  }
}

TEST_CASE("singular rectification is rejected", "[kitti]") {
  Calibration calib = default_calibration();
  calib.R0.m = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  KittiLabel l = sample_label();
  REQUIRE_THROWS_AS(label_to_lidar_box(l, calib), std::invalid_argument);
}

TEST_CASE("frustum filter keeps forward points inside the image", "[kitti]") {
  const Calibration calib = default_calibration();
  PointCloud cloud;
  cloud.push_back(Point{10, 0, 0, 0});    // straight ahead
  cloud.push_back(Point{-10, 0, 0, 0});   // behind the camera
  cloud.push_back(Point{5, 30, 0, 0});    // far off to the side
  auto kept = frustum_filter(cloud, calib);
  REQUIRE(kept.size() == 1);
  REQUIRE(kept[0].x == 10.0);

  const auto prj = calib.project(Vec3{10, 0, 0});
  REQUIRE(prj.depth > 0);
  REQUIRE(prj.u >= 0);
  REQUIRE(prj.u < kDefaultImageWidth);

  REQUIRE(frustum_filter({}, calib).empty());
}
