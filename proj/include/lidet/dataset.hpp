#pragma once

// Directory-level helpers around kitti_io: reading and writing whole frames
// (velodyne + labels + calib), the ground-truth sample database files, and
// the CSV table formats the CLI exchanges (detections, per-point attention,
// per-point targets, PR curves).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lidet/augment.hpp"
#include "lidet/core.hpp"
#include "lidet/eval.hpp"
#include "lidet/kitti_io.hpp"
#include "lidet/targets.hpp"

namespace lidet {

/// %.17g keeps doubles round-trippable through text.
inline std::string csv_double(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

/// Frame ids (file stems) in a directory with the given extension, sorted.
inline std::vector<std::string> list_frame_ids(const std::string& dir, const std::string& ext) {
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) throw format_error("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ext) ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Load a frame's cloud and LiDAR-frame ground-truth boxes. Labels whose
/// type is not in the class map (and DontCare entries) are skipped.
inline Scene read_scene(const std::string& velodyne_path, const std::string& label_path,
                        const kitti::Calibration& calib,
                        const std::map<std::string, int>& classes = kitti::default_class_map()) {
  Scene s;
  s.cloud = kitti::read_velodyne_file(velodyne_path);
  for (const auto& l : kitti::read_label_file(label_path)) {
    if (!l.is_evaluable() || !classes.count(l.type)) continue;
    s.boxes.push_back(kitti::label_to_lidar_box(l, calib, classes));
  }
  return s;
}

/// Ground-truth records for the evaluator, difficulty attributes included.
inline std::vector<GtObject> read_gt_objects(
    const std::string& label_path, const kitti::Calibration& calib,
    const std::map<std::string, int>& classes = kitti::default_class_map()) {
  std::vector<GtObject> out;
  for (const auto& l : kitti::read_label_file(label_path)) {
    if (!l.is_evaluable() || !classes.count(l.type)) continue;
    GtObject g;
    g.box = kitti::label_to_lidar_box(l, calib, classes);
    g.bbox_height_px = l.bbox_height();
    g.occlusion = l.occlusion;
    g.truncation = l.truncation;
    out.push_back(g);
  }
  return out;
}

inline std::vector<Box7> read_detections_kitti(
    const std::string& label_path, const kitti::Calibration& calib,
    const std::map<std::string, int>& classes = kitti::default_class_map()) {
  std::vector<Box7> out;
  for (const auto& l : kitti::read_label_file(label_path)) {
    if (!l.is_evaluable() || !classes.count(l.type)) continue;
    if (!l.has_score) throw format_error("detection label without score: " + label_path);
    out.push_back(kitti::label_to_lidar_box(l, calib, classes));
  }
  return out;
}

// ---------------------------------------------------------------------------
// detections CSV: frame,class,cx,cy,cz,l,w,h,yaw,score

struct CsvDetection {
  std::string frame;
  Box7 box;
};

inline void write_detections_csv(std::ostream& os, const std::vector<CsvDetection>& rows) {
  os << "frame,class,cx,cy,cz,l,w,h,yaw,score\n";
  for (const auto& r : rows) {
    os << r.frame << "," << r.box.label << "," << csv_double(r.box.cx) << ","
       << csv_double(r.box.cy) << "," << csv_double(r.box.cz) << "," << csv_double(r.box.l) << ","
       << csv_double(r.box.w) << "," << csv_double(r.box.h) << "," << csv_double(r.box.yaw) << ","
       << csv_double(r.box.score) << "\n";
  }
}

inline std::vector<CsvDetection> read_detections_csv(std::istream& is) {
  std::vector<CsvDetection> out;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("frame,", 0) == 0) continue;  // header
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 10) throw format_error("detections csv: expected 10 columns");
    try {
      CsvDetection d;
      d.frame = f[0];
      d.box = Box7(std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                   std::stod(f[6]), std::stod(f[7]), std::stod(f[8]), std::stoi(f[1]),
                   std::stod(f[9]));
      out.push_back(std::move(d));
    } catch (const std::invalid_argument& e) {
      throw format_error(std::string("detections csv: ") + e.what());
    } catch (const std::out_of_range&) {
      throw format_error("detections csv: number out of range");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-point attention CSV: point_index,score

inline void write_attention_csv(std::ostream& os, const std::vector<double>& scores) {
  os << "point_index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    os << i << "," << csv_double(scores[i]) << "\n";
}

// ---------------------------------------------------------------------------
// per-point target CSV: point_index,class,dx,dy,dz,dl,dw,dh,dyaw,attention
// (background rows carry class -1 and zero residuals)

inline void write_targets_csv(std::ostream& os, const std::vector<PointTarget>& targets) {
  os << "point_index,class,dx,dy,dz,dl,dw,dh,dyaw,attention\n";
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const PointTarget& t = targets[i];
    const BoxResidual r = t.residual.value_or(BoxResidual{});
    os << i << "," << t.class_label << "," << csv_double(r.dx) << "," << csv_double(r.dy) << ","
       << csv_double(r.dz) << "," << csv_double(r.dl) << "," << csv_double(r.dw) << ","
       << csv_double(r.dh) << "," << csv_double(r.dyaw) << "," << csv_double(t.attention) << "\n";
  }
}

// ---------------------------------------------------------------------------
// PR curve CSV: class,difficulty,recall,precision,score

inline void write_pr_csv(std::ostream& os,
                         const std::map<int, std::array<ApEntry, 3>>& result,
                         const std::vector<std::string>& class_names) {
  static const char* kDifficulty[3] = {"easy", "moderate", "hard"};
  os << "class,difficulty,recall,precision,score\n";
  for (const auto& [cls, entries] : result) {
    const std::string name = cls >= 0 && static_cast<std::size_t>(cls) < class_names.size()
                                 ? class_names[static_cast<std::size_t>(cls)]
                                 : std::to_string(cls);
    for (int d = 0; d < 3; ++d)
      for (const PrPoint& p : entries[static_cast<std::size_t>(d)].curve)
        os << name << "," << kDifficulty[d] << "," << csv_double(p.recall) << ","
           << csv_double(p.precision) << "," << csv_double(p.score) << "\n";
  }
}

// ---------------------------------------------------------------------------
// ground-truth sample database: one packed velodyne-format point blob plus a
// CSV index (class,cx,cy,cz,l,w,h,yaw,point_count,point_offset)

inline void save_database(const GtDatabase& db, const std::string& bin_path,
                          const std::string& index_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw format_error("gt db: cannot open for write " + bin_path);
  std::ofstream idx(index_path);
  if (!idx) throw format_error("gt db: cannot open for write " + index_path);
  idx << "class,cx,cy,cz,l,w,h,yaw,point_count,point_offset\n";
  std::size_t offset = 0;
  for (const auto& [cls, samples] : db.by_class) {
    for (const GtSample& g : samples) {
      const std::string bytes = kitti::write_velodyne(g.points);
      bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      idx << cls << "," << csv_double(g.box.cx) << "," << csv_double(g.box.cy) << ","
          << csv_double(g.box.cz) << "," << csv_double(g.box.l) << "," << csv_double(g.box.w)
          << "," << csv_double(g.box.h) << "," << csv_double(g.box.yaw) << "," << g.points.size()
          << "," << offset << "\n";
      offset += g.points.size();
    }
  }
}

inline GtDatabase load_database(const std::string& bin_path, const std::string& index_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw format_error("gt db: cannot open " + bin_path);
  std::ostringstream ss;
  ss << bin.rdbuf();
  const PointCloud all = kitti::read_velodyne(ss.str());

  std::ifstream idx(index_path);
  if (!idx) throw format_error("gt db: cannot open " + index_path);
  GtDatabase db;
  std::string line;
  bool first = true;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("class,", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::stringstream fs(line);
    std::string tok;
    while (std::getline(fs, tok, ',')) f.push_back(tok);
    if (f.size() != 10) throw format_error("gt db index: expected 10 columns");
    try {
      const int cls = std::stoi(f[0]);
      GtSample g;
      g.box = Box7(std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                   std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), cls);
      const std::size_t count = std::stoul(f[8]);
      const std::size_t offset = std::stoul(f[9]);
      if (offset + count > all.size()) throw format_error("gt db index: offset out of range");
      g.points.assign(all.begin() + static_cast<long>(offset),
                      all.begin() + static_cast<long>(offset + count));
      db.by_class[cls].push_back(std::move(g));
    } catch (const std::invalid_argument& e) {
      throw format_error(std::string("gt db index: ") + e.what());
    } catch (const std::out_of_range&) {
      throw format_error("gt db index: number out of range");
    }
  }
  return db;
}

}  // namespace lidet
