// lidet command-line surface: per-stage subcommands plus an end-to-end demo
// on synthetic scenes. Inputs are KITTI-format directories; outputs are JSON
// reports, CSV tables and KITTI-format files. Every randomized path takes an
// explicit seed.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 invariant
// violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lidet/lidet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

lidet::PipelineConfig load_config(const std::string& path) {
  lidet::PipelineConfig cfg;
  if (!path.empty()) cfg = lidet::load_config_file(path);
  cfg.validate();
  return cfg;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw lidet::format_error("cannot open for write: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

lidet::kitti::Calibration calib_for_frame(const std::string& calib_dir, const std::string& id) {
  return lidet::kitti::parse_calib_file(calib_dir + "/" + id + ".txt");
}

int cmd_voxelize(const std::string& config_path, const std::string& velodyne,
                 const std::string& calib_path, const std::string& out) {
  auto cfg = load_config(config_path);
  std::size_t dropped = 0;
  lidet::PointCloud cloud = lidet::kitti::read_velodyne_file(velodyne, &dropped);
  if (dropped > 0)
    std::cerr << "warning: dropped " << dropped << " non-finite points from " << velodyne << "\n";
  const std::size_t raw = cloud.size();
  if (!calib_path.empty()) {
    const auto calib = lidet::kitti::parse_calib_file(calib_path);
    cloud = lidet::kitti::frustum_filter(cloud, calib);
  }
  const auto grid = lidet::voxelize(cloud, cfg.voxel);
  write_text_file(out, lidet::serialize_grid(grid));
  std::size_t in_range = 0;
  for (const auto& [k, cell] : grid.cells) in_range += cell.total_count;
  std::cout << "points=" << raw << " in_frustum=" << cloud.size() << " in_range=" << in_range
            << " voxels=" << grid.size() << " out=" << out << "\n";
  return 0;
}

int cmd_attention(const std::string& config_path, const std::string& velodyne,
                  const std::string& labels, const std::string& calib_path,
                  const std::string& out) {
  auto cfg = load_config(config_path);
  const auto calib = lidet::kitti::parse_calib_file(calib_path);
  const lidet::Scene scene = lidet::read_scene(velodyne, labels, calib, cfg.class_map());
  const auto scores = lidet::attention_targets(scene.cloud, scene.boxes);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw lidet::format_error("cannot open for write: " + out);
  lidet::write_attention_csv(f, scores);
  std::cout << "points=" << scores.size() << " boxes=" << scene.boxes.size() << " out=" << out
            << "\n";
  return 0;
}

int cmd_targets(const std::string& config_path, const std::string& velodyne,
                const std::string& labels, const std::string& calib_path,
                const std::string& out) {
  auto cfg = load_config(config_path);
  const auto calib = lidet::kitti::parse_calib_file(calib_path);
  const lidet::Scene scene = lidet::read_scene(velodyne, labels, calib, cfg.class_map());
  const auto targets =
      lidet::assign_point_targets(scene.cloud, scene.boxes, cfg.anchors, cfg.yaw_encoding);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw lidet::format_error("cannot open for write: " + out);
  lidet::write_targets_csv(f, targets);
  std::size_t fg = 0;
  for (const auto& t : targets)
    if (t.foreground) ++fg;
  std::cout << "points=" << targets.size() << " foreground=" << fg << " out=" << out << "\n";
  return 0;
}

struct AugmentFlags {
  bool flip = false;
  double rotate = 0;
  bool has_rotate = false;
  double scale = 1;
  bool has_scale = false;
  bool randomize = false;
  std::uint64_t seed = 0;
  int min_points = -1;
  std::string db_bin, db_index;
};

int cmd_augment(const std::string& config_path, const std::string& velodyne,
                const std::string& labels, const std::string& calib_path,
                const std::string& out_velodyne, const std::string& out_labels,
                const AugmentFlags& flags) {
  auto cfg = load_config(config_path);
  const auto calib = lidet::kitti::parse_calib_file(calib_path);
  lidet::Scene scene = lidet::read_scene(velodyne, labels, calib, cfg.class_map());

  if (!flags.db_bin.empty()) {
    const auto db = lidet::load_database(flags.db_bin, flags.db_index);
    if (cfg.augment.gt_sample_targets.empty())
      throw lidet::invariant_error("augment: gt sampling requires augment.gt_sample_targets in the config");
    scene = lidet::gt_sample(std::move(scene), db, cfg.augment.gt_sample_targets, flags.seed);
  }
  if (flags.randomize) {
    lidet::Rng rng(flags.seed);
    if (cfg.augment.flip && rng.uniform() < 0.5) scene = lidet::flip_x(std::move(scene));
    scene = lidet::rotate_z(std::move(scene),
                            rng.uniform(-cfg.augment.rotation_range, cfg.augment.rotation_range));
    scene = lidet::scale(std::move(scene), rng.uniform(cfg.augment.scale_min, cfg.augment.scale_max));
  } else {
    if (flags.flip) scene = lidet::flip_x(std::move(scene));
    if (flags.has_rotate) scene = lidet::rotate_z(std::move(scene), flags.rotate);
    if (flags.has_scale) scene = lidet::scale(std::move(scene), flags.scale);
  }
  const int min_points = flags.min_points >= 0 ? flags.min_points : cfg.augment.min_points;
  scene = lidet::min_points_filter(std::move(scene), min_points);

  lidet::kitti::write_velodyne_file(out_velodyne, scene.cloud);
  std::vector<lidet::kitti::KittiLabel> out;
  for (const auto& b : scene.boxes)
    out.push_back(lidet::kitti::lidar_box_to_label(b, calib, cfg.class_name(b.label)));
  lidet::kitti::write_label_file(out_labels, out);
  std::cout << "points=" << scene.cloud.size() << " boxes=" << scene.boxes.size() << " out="
            << out_velodyne << "\n";
  return 0;
}

int cmd_build_db(const std::string& config_path, const std::string& velodyne_dir,
                 const std::string& label_dir, const std::string& calib_dir,
                 const std::string& db_bin, const std::string& db_index) {
  auto cfg = load_config(config_path);
  lidet::GtDatabase db;
  for (const std::string& id : lidet::list_frame_ids(velodyne_dir, ".bin")) {
    const auto calib = calib_for_frame(calib_dir, id);
    const lidet::Scene scene = lidet::read_scene(velodyne_dir + "/" + id + ".bin",
                                                 label_dir + "/" + id + ".txt", calib,
                                                 cfg.class_map());
    lidet::add_scene(db, scene);
  }
  lidet::save_database(db, db_bin, db_index);
  std::cout << "objects=" << db.size() << " bin=" << db_bin << " index=" << db_index << "\n";
  return 0;
}

int cmd_synth(const std::string& config_path, std::uint64_t seed, int frames,
              const std::string& out_dir, int background, double surface_inset) {
  auto cfg = load_config(config_path);
  fs::create_directories(out_dir + "/velodyne");
  fs::create_directories(out_dir + "/label_2");
  fs::create_directories(out_dir + "/calib");
  const auto calib = lidet::kitti::default_calibration();
  const std::string calib_text = lidet::kitti::format_calib(calib);

  for (int f = 0; f < frames; ++f) {
    lidet::synth::SynthConfig scfg;
    scfg.seed = lidet::mix_seed(seed, static_cast<std::uint64_t>(f));
    scfg.surface_inset = surface_inset;
    if (background >= 0) scfg.background_points = background;
    scfg.classes.clear();
    for (std::size_t i = 0; i < cfg.anchors.classes.size(); ++i) {
      lidet::synth::ClassSpec spec;
      spec.label = cfg.anchors.classes[i].label;
      spec.mean_size = cfg.anchors.classes[i].size;
      spec.min_count = i == 0 ? 2 : 1;
      spec.max_count = i == 0 ? 5 : 3;
      scfg.classes.push_back(spec);
    }
    const lidet::Scene scene = lidet::synth::generate(scfg).scene;
    const std::string id = frame_name(f);
    lidet::kitti::write_velodyne_file(out_dir + "/velodyne/" + id + ".bin", scene.cloud);
    std::vector<lidet::kitti::KittiLabel> labels;
    for (const auto& b : scene.boxes)
      labels.push_back(lidet::kitti::lidar_box_to_label(b, calib, cfg.class_name(b.label)));
    lidet::kitti::write_label_file(out_dir + "/label_2/" + id + ".txt", labels);
    write_text_file(out_dir + "/calib/" + id + ".txt", calib_text);
  }
  std::cout << "frames=" << frames << " out=" << out_dir << "\n";
  return 0;
}

int cmd_nms(const std::string& config_path, const std::string& input, const std::string& out,
            double iou, bool prefilter, int topk) {
  auto cfg = load_config(config_path);
  const double threshold = iou >= 0 ? iou : cfg.nms_iou;
  std::ifstream f(input);
  if (!f) throw lidet::format_error("cannot open: " + input);
  const auto rows = lidet::read_detections_csv(f);

  // group by frame, preserving first-appearance order
  std::vector<std::string> frame_order;
  std::map<std::string, std::vector<lidet::Detection>> by_frame;
  for (const auto& r : rows) {
    if (!by_frame.count(r.frame)) frame_order.push_back(r.frame);
    by_frame[r.frame].push_back(r.box);
  }

  std::vector<lidet::CsvDetection> kept;
  for (const auto& id : frame_order) {
    auto dets = by_frame[id];
    if (prefilter) dets = lidet::score_filter(dets, cfg.score_thresholds);
    dets = lidet::nms_3d(dets, threshold);
    if (topk >= 0) dets = lidet::top_k(dets, static_cast<std::size_t>(topk));
    for (const auto& d : dets) kept.push_back({id, d});
  }
  std::ofstream of(out, std::ios::binary);
  if (!of) throw lidet::format_error("cannot open for write: " + out);
  lidet::write_detections_csv(of, kept);
  std::cout << "in=" << rows.size() << " kept=" << kept.size() << " out=" << out << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& gt_dir,
             const std::string& det_dir, const std::string& calib_dir,
             const std::string& metric, const std::string& out_json,
             const std::string& out_pr) {
  auto cfg = load_config(config_path);
  lidet::EvalConfig ecfg = cfg.eval;
  if (metric == "3d") ecfg.metric = lidet::EvalMetric::box3d;
  else if (metric == "bev") ecfg.metric = lidet::EvalMetric::bev;
  else if (!metric.empty()) throw lidet::invariant_error("eval: metric must be 3d or bev");

  std::vector<lidet::FrameRecord> records;
  for (const std::string& id : lidet::list_frame_ids(gt_dir, ".txt")) {
    const auto calib = calib_for_frame(calib_dir, id);
    lidet::FrameRecord fr;
    fr.gts = lidet::read_gt_objects(gt_dir + "/" + id + ".txt", calib, cfg.class_map());
    const std::string det_path = det_dir + "/" + id + ".txt";
    if (fs::exists(det_path))
      fr.dets = lidet::read_detections_kitti(det_path, calib, cfg.class_map());
    records.push_back(std::move(fr));
  }
  const auto result = lidet::evaluate(records, ecfg);

  json report;
  report["config"] = lidet::to_json(cfg);
  report["metric"] = ecfg.metric == lidet::EvalMetric::box3d ? "3d" : "bev";
  report["frames"] = records.size();
  report["ap"] = lidet::metrics_to_json(result, cfg);
  write_text_file(out_json, report.dump(2) + "\n");

  if (!out_pr.empty()) {
    std::ofstream pf(out_pr, std::ios::binary);
    if (!pf) throw lidet::format_error("cannot open for write: " + out_pr);
    lidet::write_pr_csv(pf, result, cfg.class_names);
  }
  std::cout << "frames=" << records.size() << " report=" << out_json << "\n";
  return 0;
}

int cmd_demo(const std::string& config_path, std::uint64_t seed, bool has_seed, int frames,
             double noise, double drop, double ghost, int threads, const std::string& out_dir) {
  auto cfg = load_config(config_path);
  if (has_seed) cfg.seed = seed;
  lidet::DemoOptions opt;
  opt.frames = frames;
  opt.noise = noise;
  opt.drop_rate = drop;
  opt.ghost_rate = ghost;
  opt.threads = threads;
  const auto result = lidet::run_demo(cfg, opt);

  fs::create_directories(out_dir);
  write_text_file(out_dir + "/report.json", result.report_json);
  {
    std::ofstream pf(out_dir + "/pr_3d.csv", std::ios::binary);
    lidet::write_pr_csv(pf, result.metrics_3d, cfg.class_names);
  }
  std::cout << "report=" << out_dir << "/report.json\n";
  for (const auto& [cls, entries] : result.metrics_3d)
    std::cout << cfg.class_name(cls) << " ap40(3d) easy=" << entries[0].ap40
              << " moderate=" << entries[1].ap40 << " hard=" << entries[2].ap40 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR 3D object detection pipeline toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config JSON (defaults used when absent)");

  // voxelize
  auto* voxelize = app.add_subcommand("voxelize", "voxelize one velodyne scan to a sparse grid");
  std::string vox_in, vox_calib, vox_out = "grid.bin";
  voxelize->add_option("--velodyne", vox_in, "input .bin")->required();
  voxelize->add_option("--calib", vox_calib, "apply the image-frustum crop first (optional)");
  voxelize->add_option("--out", vox_out, "output grid file");

  // attention
  auto* attention = app.add_subcommand("attention", "per-point attention target scores as CSV");
  std::string att_velo, att_labels, att_calib, att_out = "attention.csv";
  attention->add_option("--velodyne", att_velo)->required();
  attention->add_option("--labels", att_labels)->required();
  attention->add_option("--calib", att_calib)->required();
  attention->add_option("--out", att_out);

  // targets
  auto* targets = app.add_subcommand("targets", "per-point class/residual/attention targets as CSV");
  std::string tgt_velo, tgt_labels, tgt_calib, tgt_out = "targets.csv";
  targets->add_option("--velodyne", tgt_velo)->required();
  targets->add_option("--labels", tgt_labels)->required();
  targets->add_option("--calib", tgt_calib)->required();
  targets->add_option("--out", tgt_out);

  // augment
  auto* augment = app.add_subcommand("augment", "label-consistent scene augmentation / gt database");
  std::string aug_velo, aug_labels, aug_calib, aug_out_velo, aug_out_labels;
  AugmentFlags aug;
  bool build_db = false;
  std::string db_velo_dir, db_label_dir, db_calib_dir;
  augment->add_flag("--build-db", build_db, "build a gt sample database from a dataset");
  augment->add_option("--velodyne", aug_velo);
  augment->add_option("--labels", aug_labels);
  augment->add_option("--calib", aug_calib);
  augment->add_option("--out-velodyne", aug_out_velo);
  augment->add_option("--out-labels", aug_out_labels);
  augment->add_flag("--flip", aug.flip, "mirror across the XZ plane");
  auto* rot_opt = augment->add_option("--rotate", aug.rotate, "rotate about Z (radians)");
  auto* scale_opt = augment->add_option("--scale", aug.scale, "uniform scale factor");
  augment->add_flag("--random", aug.randomize, "seeded random flip/rotate/scale from config ranges");
  augment->add_option("--seed", aug.seed, "seed for --random and gt sampling");
  augment->add_option("--min-points", aug.min_points, "min inner points per box (config default)");
  augment->add_option("--db-bin", aug.db_bin, "gt database points file");
  augment->add_option("--db-index", aug.db_index, "gt database index CSV");
  augment->add_option("--velodyne-dir", db_velo_dir);
  augment->add_option("--label-dir", db_label_dir);
  augment->add_option("--calib-dir", db_calib_dir);

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic KITTI-format frames");
  std::uint64_t synth_seed = 0;
  int synth_frames = 10, synth_background = -1;
  std::string synth_out = "synth_out";
  synth->add_option("--seed", synth_seed)->required();
  synth->add_option("--frames", synth_frames);
  synth->add_option("--out", synth_out);
  synth->add_option("--background", synth_background, "background points per frame");
  double synth_inset = 0.005;
  synth->add_option("--surface-inset", synth_inset,
                    "inward offset of surface points, meters; keeps containment exact across "
                    "the float32 file round trip");

  // nms
  auto* nms = app.add_subcommand("nms", "score filter + 3D-IoU NMS over a detections CSV");
  std::string nms_in, nms_out = "kept.csv";
  double nms_iou = -1;
  bool nms_prefilter = false;
  int nms_topk = -1;
  nms->add_option("--input", nms_in)->required();
  nms->add_option("--out", nms_out);
  nms->add_option("--iou", nms_iou, "IoU threshold (config default)");
  nms->add_flag("--prefilter", nms_prefilter, "apply class-wise score thresholds first");
  nms->add_option("--top-k", nms_topk, "keep at most K per frame");

  // eval
  auto* eval = app.add_subcommand("eval", "KITTI-protocol AP@11/AP@40 evaluation");
  std::string eval_gt, eval_det, eval_calib, eval_metric, eval_json = "eval.json", eval_pr;
  eval->add_option("--gt", eval_gt, "ground-truth label directory")->required();
  eval->add_option("--det", eval_det, "detection label directory")->required();
  eval->add_option("--calib", eval_calib, "calibration directory")->required();
  eval->add_option("--metric", eval_metric, "3d or bev (config default)");
  eval->add_option("--out-json", eval_json);
  eval->add_option("--out-pr", eval_pr, "PR curve CSV");

  // demo
  auto* demo = app.add_subcommand("demo", "end-to-end pipeline demo on synthetic scenes");
  std::uint64_t demo_seed = 0;
  int demo_frames = 20, demo_threads = 1;
  double demo_noise = 0, demo_drop = 0, demo_ghost = 0;
  std::string demo_out = "demo_out";
  auto* demo_seed_opt = demo->add_option("--seed", demo_seed)->required();
  demo->add_option("--frames", demo_frames);
  demo->add_option("--noise", demo_noise, "oracle detector noise level");
  demo->add_option("--drop", demo_drop, "oracle drop rate");
  demo->add_option("--ghost", demo_ghost, "oracle ghost rate");
  demo->add_option("--threads", demo_threads, "frame-level worker threads");
  demo->add_option("--out", demo_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (voxelize->parsed()) return cmd_voxelize(config_path, vox_in, vox_calib, vox_out);
    if (attention->parsed())
      return cmd_attention(config_path, att_velo, att_labels, att_calib, att_out);
    if (targets->parsed()) return cmd_targets(config_path, tgt_velo, tgt_labels, tgt_calib, tgt_out);
    if (augment->parsed()) {
      if (build_db) {
        if (db_velo_dir.empty() || db_label_dir.empty() || db_calib_dir.empty() ||
            aug.db_bin.empty() || aug.db_index.empty())
          throw lidet::invariant_error(
              "augment --build-db needs --velodyne-dir --label-dir --calib-dir --db-bin --db-index");
        return cmd_build_db(config_path, db_velo_dir, db_label_dir, db_calib_dir, aug.db_bin,
                            aug.db_index);
      }
      if (aug_velo.empty() || aug_labels.empty() || aug_calib.empty() || aug_out_velo.empty() ||
          aug_out_labels.empty())
        throw lidet::invariant_error(
            "augment needs --velodyne --labels --calib --out-velodyne --out-labels");
      aug.has_rotate = rot_opt->count() > 0;
      aug.has_scale = scale_opt->count() > 0;
      return cmd_augment(config_path, aug_velo, aug_labels, aug_calib, aug_out_velo,
                         aug_out_labels, aug);
    }
    if (synth->parsed())
      return cmd_synth(config_path, synth_seed, synth_frames, synth_out, synth_background,
                       synth_inset);
    if (nms->parsed())
      return cmd_nms(config_path, nms_in, nms_out, nms_iou, nms_prefilter, nms_topk);
    if (eval->parsed())
      return cmd_eval(config_path, eval_gt, eval_det, eval_calib, eval_metric, eval_json, eval_pr);
    if (demo->parsed())
      return cmd_demo(config_path, demo_seed, demo_seed_opt->count() > 0, demo_frames, demo_noise,
                      demo_drop, demo_ghost, demo_threads, demo_out);
  } catch (const lidet::format_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const lidet::invariant_error& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
