#pragma once

// End-to-end demo on synthetic scenes: generate, crop, voxelize, compute
// attention targets, run the oracle detector, adjust confidences, filter,
// NMS, top-K, and evaluate. Frames are independent; the --threads option
// only partitions work and never changes the report bytes.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lidet/attention.hpp"
#include "lidet/config.hpp"
#include "lidet/core.hpp"
#include "lidet/dataset.hpp"
#include "lidet/eval.hpp"
#include "lidet/postprocess.hpp"
#include "lidet/rng.hpp"
#include "lidet/synth.hpp"
#include "lidet/voxelizer.hpp"

namespace lidet {

struct DemoOptions {
  int frames = 20;
  double noise = 0;
  double drop_rate = 0;
  double ghost_rate = 0;
  int threads = 1;
};

struct DemoFrameStats {
  int points = 0;
  int in_range = 0;
  int voxels = 0;
  int objects = 0;
  int foreground_points = 0;
  int detections_raw = 0;
  int detections_kept = 0;
};

struct DemoResult {
  std::vector<DemoFrameStats> frames;
  std::map<int, std::array<ApEntry, 3>> metrics_3d;
  std::map<int, std::array<ApEntry, 3>> metrics_bev;
  std::string report_json;
};

inline nlohmann::json metrics_to_json(const std::map<int, std::array<ApEntry, 3>>& metrics,
                                      const PipelineConfig& cfg) {
  static const char* kDifficulty[3] = {"easy", "moderate", "hard"};
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [cls, entries] : metrics) {
    nlohmann::json per_diff;
    for (int d = 0; d < 3; ++d) {
      const ApEntry& e = entries[static_cast<std::size_t>(d)];
      per_diff[kDifficulty[d]] = {{"ap11", e.ap11}, {"ap40", e.ap40}, {"gt_count", e.gt_count}};
    }
    out[cfg.class_name(cls)] = per_diff;
  }
  return out;
}

namespace detail {

struct DemoFrameOutput {
  DemoFrameStats stats;
  FrameRecord record;
};

inline DemoFrameOutput run_demo_frame(const PipelineConfig& cfg, const DemoOptions& opt,
                                      int frame) {
  DemoFrameOutput out;

  synth::SynthConfig scfg;
  scfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(2 * frame));
  scfg.classes.clear();
  for (std::size_t i = 0; i < cfg.anchors.classes.size(); ++i) {
    const AnchorClass& a = cfg.anchors.classes[i];
    synth::ClassSpec spec;
    spec.label = a.label;
    spec.mean_size = a.size;
    spec.min_count = i == 0 ? 2 : 1;
    spec.max_count = i == 0 ? 5 : 3;
    scfg.classes.push_back(spec);
  }
  scfg.place_min = {cfg.voxel.range_min.x + 4.0, cfg.voxel.range_min.y + 4.0,
                    cfg.voxel.range_min.z};
  scfg.place_max = {cfg.voxel.range_max.x - 4.0, cfg.voxel.range_max.y - 4.0,
                    cfg.voxel.range_max.z};
  Scene scene = synth::generate(scfg).scene;
  out.stats.points = static_cast<int>(scene.cloud.size());
  out.stats.objects = static_cast<int>(scene.boxes.size());

  // range crop
  PointCloud cropped;
  cropped.reserve(scene.cloud.size());
  const auto dims = grid_dims(cfg.voxel);
  for (const Point& p : scene.cloud)
    if (voxel_index(p.xyz(), cfg.voxel, dims)) cropped.push_back(p);
  out.stats.in_range = static_cast<int>(cropped.size());

  const SparseVoxelGrid grid = voxelize(cropped, cfg.voxel);
  out.stats.voxels = static_cast<int>(grid.size());

  const std::vector<double> att = attention_targets(cropped, scene.boxes);
  for (double a : att)
    if (a > 0) ++out.stats.foreground_points;

  synth::PerturbConfig pc = synth::PerturbConfig::from_level(opt.noise);
  pc.drop_rate = opt.drop_rate;
  pc.ghost_rate = opt.ghost_rate;
  pc.ghost_min = scfg.place_min;
  pc.ghost_max = scfg.place_max;
  const auto oracle =
      synth::perturb_detections(scene.boxes, pc, mix_seed(cfg.seed, static_cast<std::uint64_t>(2 * frame + 1)));
  out.stats.detections_raw = static_cast<int>(oracle.size());

  // The source point stands in for the proposal point of a learned head:
  // its attention inside the detection box weights the confidence.
  std::vector<Detection> dets;
  dets.reserve(oracle.size());
  for (const auto& od : oracle) {
    Detection d = od.box;
    const double s = confidence_attention(to_local(od.source_center, d), d).score;
    d.score = adjust_confidence(d.score, s);
    dets.push_back(d);
  }

  dets = score_filter(dets, cfg.score_thresholds);
  dets = nms_3d(dets, cfg.nms_iou);
  dets = top_k(dets, static_cast<std::size_t>(cfg.top_k));
  out.stats.detections_kept = static_cast<int>(dets.size());

  // Synthetic objects are fully visible by construction: every ground truth
  // is an easy-bin object.
  for (const Box7& b : scene.boxes)
    out.record.gts.push_back(GtObject{b, 100.0, 0, 0.0});
  out.record.dets = std::move(dets);
  return out;
}

}  // namespace detail

inline DemoResult run_demo(const PipelineConfig& cfg, const DemoOptions& opt) {
  cfg.validate();
  if (opt.frames < 0) throw invariant_error("demo: frames must be >= 0");
  if (!(opt.noise >= 0)) throw invariant_error("demo: noise must be >= 0");

  const int threads = std::max(1, opt.threads);
  std::vector<detail::DemoFrameOutput> outputs(static_cast<std::size_t>(opt.frames));
  {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int f = t; f < opt.frames; f += threads)
          outputs[static_cast<std::size_t>(f)] = detail::run_demo_frame(cfg, opt, f);
      });
    }
    for (auto& th : pool) th.join();
  }

  DemoResult res;
  std::vector<FrameRecord> records;
  records.reserve(outputs.size());
  for (auto& o : outputs) {
    res.frames.push_back(o.stats);
    records.push_back(std::move(o.record));
  }

  EvalConfig eval_3d = cfg.eval;
  eval_3d.metric = EvalMetric::box3d;
  EvalConfig eval_bev = cfg.eval;
  eval_bev.metric = EvalMetric::bev;
  res.metrics_3d = evaluate(records, eval_3d);
  res.metrics_bev = evaluate(records, eval_bev);

  nlohmann::json report;
  report["config"] = to_json(cfg);
  // threads deliberately not echoed: reports are byte-identical at any
  // thread count
  report["demo"] = {{"frames", opt.frames},
                    {"noise", opt.noise},
                    {"drop_rate", opt.drop_rate},
                    {"ghost_rate", opt.ghost_rate}};
  nlohmann::json jframes = nlohmann::json::array();
  for (std::size_t f = 0; f < res.frames.size(); ++f) {
    const DemoFrameStats& s = res.frames[f];
    jframes.push_back({{"id", f},
                       {"points", s.points},
                       {"in_range", s.in_range},
                       {"voxels", s.voxels},
                       {"objects", s.objects},
                       {"foreground_points", s.foreground_points},
                       {"detections_raw", s.detections_raw},
                       {"detections_kept", s.detections_kept}});
  }
  report["frames"] = jframes;
  report["metrics"] = {{"3d", metrics_to_json(res.metrics_3d, cfg)},
                       {"bev", metrics_to_json(res.metrics_bev, cfg)}};
  res.report_json = report.dump(2) + "\n";
  return res;
}

}  // namespace lidet
