#pragma once

// Whole-pipeline configuration: one JSON document covering voxelization,
// anchors, RoI sampling, post-processing, evaluation, loss weights and
// augmentation. Unknown keys are rejected so typos cannot silently fall
// back to defaults, and the effective config can be echoed into reports.

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidet/augment.hpp"
#include "lidet/core.hpp"
#include "lidet/eval.hpp"
#include "lidet/postprocess.hpp"
#include "lidet/targets.hpp"
#include "lidet/voxelizer.hpp"

namespace lidet {

struct AugmentOptions {
  bool flip = true;
  double rotation_range = kPi / 4;  // uniform in [-range, range]
  double scale_min = 0.95, scale_max = 1.05;
  int min_points = 5;
  std::map<int, int> gt_sample_targets;  // per-class totals, must be configured

  void validate() const {
    if (!(rotation_range >= 0)) throw invariant_error("augment: rotation_range must be >= 0");
    if (!(scale_min > 0 && scale_max >= scale_min))
      throw invariant_error("augment: bad scale range");
    if (min_points < 0) throw invariant_error("augment: min_points must be >= 0");
  }
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> class_names = {"Car", "Pedestrian", "Cyclist"};
  VoxelConfig voxel;
  AnchorConfig anchors;
  YawEncoding yaw_encoding = YawEncoding::wrapped_diff;
  RoiGridSpec roi;
  std::map<int, double> score_thresholds = {{0, 0.7}, {1, 0.3}, {2, 0.3}};
  double nms_iou = 0.1;
  int top_k = 128;
  EvalConfig eval;
  std::array<double, 6> loss_weights{1, 1, 1, 1, 1, 1};
  AugmentOptions augment;

  void validate() const {
    voxel.validate();
    anchors.validate();
    roi.validate();
    augment.validate();
    if (!(nms_iou >= 0 && nms_iou <= 1)) throw invariant_error("config: nms_iou must be in [0,1]");
    if (top_k < 0) throw invariant_error("config: top_k must be >= 0");
    for (const auto& [cls, t] : score_thresholds)
      if (!(t >= 0 && t <= 1)) throw invariant_error("config: score threshold out of [0,1]");
    for (double w : loss_weights)
      if (!(w > 0)) throw invariant_error("config: loss weights must be positive");
    (void)grid_dims(voxel);  // range/voxel divisibility
  }

  int class_id(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == name) return static_cast<int>(i);
    throw invariant_error("config: unknown class name '" + name + "'");
  }

  std::string class_name(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= class_names.size()) return "Unknown";
    return class_names[static_cast<std::size_t>(id)];
  }

  std::map<std::string, int> class_map() const {
    std::map<std::string, int> m;
    for (std::size_t i = 0; i < class_names.size(); ++i) m[class_names[i]] = static_cast<int>(i);
    return m;
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known) throw invariant_error("config: unknown key '" + ctx + it.key() + "'");
  }
}

inline Vec3 vec3_from(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw format_error("config: " + ctx + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <typename T>
inline std::map<int, T> class_keyed_map(const json& j, const PipelineConfig& cfg) {
  std::map<int, T> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[cfg.class_id(it.key())] = it.value().get<T>();
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  json j;
  j["seed"] = c.seed;
  j["classes"] = c.class_names;

  json v;
  v["range_min"] = detail::vec3_to(c.voxel.range_min);
  v["range_max"] = detail::vec3_to(c.voxel.range_max);
  v["voxel_size"] = detail::vec3_to(c.voxel.voxel_size);
  v["max_points_per_voxel"] = c.voxel.max_points_per_voxel;
  v["cap_policy"] =
      c.voxel.cap_policy == VoxelConfig::CapPolicy::keep_first ? "keep_first" : "random_sample";
  v["sample_seed"] = c.voxel.sample_seed;
  j["voxel"] = v;

  j["targets"] = {{"yaw_encoding",
                   c.yaw_encoding == YawEncoding::wrapped_diff ? "wrapped_diff" : "sin_cos"}};

  json a;
  a["stride"] = c.anchors.bev_stride;
  a["yaws"] = c.anchors.yaws;
  a["classes"] = json::array();
  for (const auto& cls : c.anchors.classes) {
    json jc;
    jc["label"] = cls.label;
    jc["size"] = json::array({cls.size.l, cls.size.w, cls.size.h});
    jc["z_center"] = cls.z_center;
    jc["iou_pos"] = cls.iou_pos;
    jc["iou_neg"] = cls.iou_neg;
    a["classes"].push_back(jc);
  }
  j["anchors"] = a;

  json r;
  r["subdivisions"] = c.roi.subdivisions;
  r["search_ranges"] = c.roi.search_ranges;
  j["roi"] = r;

  json p;
  for (const auto& [cls, t] : c.score_thresholds) p["score_thresholds"][c.class_name(cls)] = t;
  p["nms_iou"] = c.nms_iou;
  p["top_k"] = c.top_k;
  j["post"] = p;

  json e;
  for (const auto& [cls, t] : c.eval.iou_min) e["iou_min"][c.class_name(cls)] = t;
  e["metric"] = c.eval.metric == EvalMetric::box3d ? "3d" : "bev";
  j["eval"] = e;

  j["loss_weights"] = c.loss_weights;

  json g;
  g["flip"] = c.augment.flip;
  g["rotation_range"] = c.augment.rotation_range;
  g["scale_min"] = c.augment.scale_min;
  g["scale_max"] = c.augment.scale_max;
  g["min_points"] = c.augment.min_points;
  for (const auto& [cls, n] : c.augment.gt_sample_targets)
    g["gt_sample_targets"][c.class_name(cls)] = n;
  if (c.augment.gt_sample_targets.empty()) g["gt_sample_targets"] = nlohmann::json::object();
  j["augment"] = g;
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  PipelineConfig c;
  check_keys(j, {"seed", "classes", "voxel", "anchors", "targets", "roi", "post", "eval",
                 "loss_weights", "augment"},
             "");
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("classes")) c.class_names = j["classes"].get<std::vector<std::string>>();

  if (j.contains("voxel")) {
    const auto& v = j["voxel"];
    check_keys(v, {"range_min", "range_max", "voxel_size", "max_points_per_voxel", "cap_policy",
                   "sample_seed"},
               "voxel.");
    if (v.contains("range_min")) c.voxel.range_min = detail::vec3_from(v["range_min"], "voxel.range_min");
    if (v.contains("range_max")) c.voxel.range_max = detail::vec3_from(v["range_max"], "voxel.range_max");
    if (v.contains("voxel_size")) c.voxel.voxel_size = detail::vec3_from(v["voxel_size"], "voxel.voxel_size");
    if (v.contains("max_points_per_voxel"))
      c.voxel.max_points_per_voxel = v["max_points_per_voxel"].get<int>();
    if (v.contains("cap_policy")) {
      const std::string p = v["cap_policy"].get<std::string>();
      if (p == "keep_first") c.voxel.cap_policy = VoxelConfig::CapPolicy::keep_first;
      else if (p == "random_sample") c.voxel.cap_policy = VoxelConfig::CapPolicy::random_sample;
      else throw invariant_error("config: unknown cap_policy '" + p + "'");
    }
    if (v.contains("sample_seed")) c.voxel.sample_seed = v["sample_seed"].get<std::uint64_t>();
  }

  if (j.contains("anchors")) {
    const auto& a = j["anchors"];
    check_keys(a, {"stride", "yaws", "classes"}, "anchors.");
    if (a.contains("stride")) c.anchors.bev_stride = a["stride"].get<int>();
    if (a.contains("yaws")) c.anchors.yaws = a["yaws"].get<std::vector<double>>();
    if (a.contains("classes")) {
      c.anchors.classes.clear();
      for (const auto& jc : a["classes"]) {
        check_keys(jc, {"label", "size", "z_center", "iou_pos", "iou_neg"}, "anchors.classes.");
        AnchorClass cls;
        cls.label = jc.at("label").get<int>();
        const auto& s = jc.at("size");
        if (!s.is_array() || s.size() != 3)
          throw format_error("config: anchor size must be [l, w, h]");
        cls.size = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
        if (jc.contains("z_center")) cls.z_center = jc["z_center"].get<double>();
        if (jc.contains("iou_pos")) cls.iou_pos = jc["iou_pos"].get<double>();
        if (jc.contains("iou_neg")) cls.iou_neg = jc["iou_neg"].get<double>();
        c.anchors.classes.push_back(cls);
      }
    }
  }

  if (j.contains("targets")) {
    const auto& t = j["targets"];
    check_keys(t, {"yaw_encoding"}, "targets.");
    if (t.contains("yaw_encoding")) {
      const std::string e = t["yaw_encoding"].get<std::string>();
      if (e == "wrapped_diff") c.yaw_encoding = YawEncoding::wrapped_diff;
      else if (e == "sin_cos") c.yaw_encoding = YawEncoding::sin_cos;
      else throw invariant_error("config: unknown yaw_encoding '" + e + "'");
    }
  }

  if (j.contains("roi")) {
    const auto& r = j["roi"];
    check_keys(r, {"subdivisions", "search_ranges"}, "roi.");
    if (r.contains("subdivisions")) c.roi.subdivisions = r["subdivisions"].get<std::array<int, 3>>();
    if (r.contains("search_ranges"))
      c.roi.search_ranges = r["search_ranges"].get<std::vector<std::array<int, 3>>>();
  }

  if (j.contains("post")) {
    const auto& p = j["post"];
    check_keys(p, {"score_thresholds", "nms_iou", "top_k"}, "post.");
    if (p.contains("score_thresholds"))
      c.score_thresholds = detail::class_keyed_map<double>(p["score_thresholds"], c);
    if (p.contains("nms_iou")) c.nms_iou = p["nms_iou"].get<double>();
    if (p.contains("top_k")) c.top_k = p["top_k"].get<int>();
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"iou_min", "metric"}, "eval.");
    if (e.contains("iou_min"))
      c.eval.iou_min = detail::class_keyed_map<double>(e["iou_min"], c);
    if (e.contains("metric")) {
      const std::string m = e["metric"].get<std::string>();
      if (m == "3d") c.eval.metric = EvalMetric::box3d;
      else if (m == "bev") c.eval.metric = EvalMetric::bev;
      else throw invariant_error("config: unknown metric '" + m + "'");
    }
  }

  if (j.contains("loss_weights")) c.loss_weights = j["loss_weights"].get<std::array<double, 6>>();

  if (j.contains("augment")) {
    const auto& g = j["augment"];
    check_keys(g, {"flip", "rotation_range", "scale_min", "scale_max", "min_points",
                   "gt_sample_targets"},
               "augment.");
    if (g.contains("flip")) c.augment.flip = g["flip"].get<bool>();
    if (g.contains("rotation_range")) c.augment.rotation_range = g["rotation_range"].get<double>();
    if (g.contains("scale_min")) c.augment.scale_min = g["scale_min"].get<double>();
    if (g.contains("scale_max")) c.augment.scale_max = g["scale_max"].get<double>();
    if (g.contains("min_points")) c.augment.min_points = g["min_points"].get<int>();
    if (g.contains("gt_sample_targets"))
      c.augment.gt_sample_targets = detail::class_keyed_map<int>(g["gt_sample_targets"], c);
  }

  c.validate();
  return c;
}

inline PipelineConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace lidet
