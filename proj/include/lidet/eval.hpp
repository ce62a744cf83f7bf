#pragma once

// KITTI-protocol detection evaluation: difficulty binning, greedy per-frame
// matching, precision-recall construction from the full score sweep, and
// interpolated AP at 11 or 40 recall positions for the 3D and BEV metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"

namespace lidet {

enum class Difficulty { easy = 0, moderate = 1, hard = 2, ignored = 3 };

/// Ground-truth annotation with the attributes difficulty binning needs.
struct GtObject {
  Box7 box;  // class in box.label
  double bbox_height_px = 0;
  int occlusion = 0;
  double truncation = 0;
};

struct FrameRecord {
  std::vector<GtObject> gts;
  std::vector<Box7> dets;  // class in label, score in score
};

/// Difficulty thresholds (2D box height in px, max occlusion, max
/// truncation) follow the benchmark devkit convention.
inline Difficulty difficulty_of(double height_px, int occlusion, double truncation) {
  if (height_px >= 40 && occlusion <= 0 && truncation <= 0.15) return Difficulty::easy;
  if (height_px >= 25 && occlusion <= 1 && truncation <= 0.30) return Difficulty::moderate;
  if (height_px >= 25 && occlusion <= 2 && truncation <= 0.50) return Difficulty::hard;
  return Difficulty::ignored;
}

inline Difficulty difficulty_of(const GtObject& g) {
  return difficulty_of(g.bbox_height_px, g.occlusion, g.truncation);
}

enum class MatchOutcome { true_positive, false_positive, ignored_match };

struct DetMatch {
  int det_index = -1;
  MatchOutcome outcome = MatchOutcome::false_positive;
  int gt_index = -1;
  double score = 0;
};

struct FrameMatchResult {
  std::vector<DetMatch> matches;     // one entry per same-class detection
  std::vector<char> gt_matched;     // per ground-truth flag
  int valid_gt_count = 0;
};

using IouFn = std::function<double(const Box7&, const Box7&)>;

/// Greedy per-frame matching for one class at one difficulty level.
/// Detections are visited by descending score (ties by input index); each
/// takes the unmatched same-class ground truth of highest IoU when that IoU
/// reaches iou_min, otherwise it is a false positive. Ground truths binned
/// harder than `level` are ignored: they are not counted as misses and a
/// detection matched to one is discarded from both TP and FP.
inline FrameMatchResult match_frame(const std::vector<GtObject>& gts,
                                    const std::vector<Box7>& dets, int class_id,
                                    const IouFn& iou_fn, double iou_min, Difficulty level) {
  FrameMatchResult res;
  res.gt_matched.assign(gts.size(), 0);

  std::vector<char> gt_is_class(gts.size(), 0);
  std::vector<char> gt_valid(gts.size(), 0);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gts[g].box.label != class_id) continue;
    gt_is_class[g] = 1;
    if (static_cast<int>(difficulty_of(gts[g])) <= static_cast<int>(level)) {
      gt_valid[g] = 1;
      ++res.valid_gt_count;
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < dets.size(); ++d)
    if (dets[d].label == class_id) order.push_back(d);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  for (std::size_t d : order) {
    int best_gt = -1;
    double best_iou = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gt_is_class[g] || res.gt_matched[g]) continue;
      const double iou = iou_fn(dets[d], gts[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    DetMatch m;
    m.det_index = static_cast<int>(d);
    m.score = dets[d].score;
    if (best_gt >= 0 && best_iou >= iou_min) {
      res.gt_matched[static_cast<std::size_t>(best_gt)] = 1;
      m.gt_index = best_gt;
      m.outcome = gt_valid[static_cast<std::size_t>(best_gt)] ? MatchOutcome::true_positive
                                                              : MatchOutcome::ignored_match;
    } else {
      m.outcome = MatchOutcome::false_positive;
    }
    res.matches.push_back(m);
  }
  return res;
}

struct PrPoint {
  double recall = 0;
  double precision = 0;
  double score = 0;  // threshold producing this point
};

/// Build the precision-recall curve from accumulated matches. Every
/// distinct score is a threshold; equal scores collapse into one sweep step
/// so the curve is independent of frame and input ordering.
inline std::vector<PrPoint> pr_curve(std::vector<DetMatch> matches, int total_valid_gt) {
  std::vector<PrPoint> curve;
  matches.erase(std::remove_if(matches.begin(), matches.end(),
                               [](const DetMatch& m) {
                                 return m.outcome == MatchOutcome::ignored_match;
                               }),
                matches.end());
  if (matches.empty() || total_valid_gt <= 0) return curve;
  std::sort(matches.begin(), matches.end(),
            [](const DetMatch& a, const DetMatch& b) { return a.score > b.score; });

  int tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < matches.size()) {
    const double s = matches[i].score;
    for (; i < matches.size() && matches[i].score == s; ++i) {
      if (matches[i].outcome == MatchOutcome::true_positive) ++tp;
      else ++fp;
    }
    PrPoint p;
    p.recall = static_cast<double>(tp) / total_valid_gt;
    p.precision = static_cast<double>(tp) / (tp + fp);
    p.score = s;
    curve.push_back(p);
  }
  return curve;
}

enum class ApMode { ap11, ap40 };

/// Interpolated average precision: the mean over the recall samples of the
/// maximum precision at recall >= r. AP11 samples r in {0, 0.1, ..., 1},
/// AP40 in {1/40, ..., 40/40}.
inline double average_precision(const std::vector<PrPoint>& curve, ApMode mode) {
  const int n = mode == ApMode::ap11 ? 11 : 40;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double r = mode == ApMode::ap11 ? i / 10.0 : (i + 1) / 40.0;
    double best = 0;
    for (const PrPoint& p : curve)
      if (p.recall >= r) best = std::max(best, p.precision);
    sum += best;
  }
  return sum / n;
}

enum class EvalMetric { box3d, bev };

struct EvalConfig {
  std::map<int, double> iou_min = {{0, 0.7}, {1, 0.5}, {2, 0.5}};
  EvalMetric metric = EvalMetric::box3d;
};

struct ApEntry {
  double ap11 = 0, ap40 = 0;
  int gt_count = 0;
  int det_count = 0;  // TP+FP after ignoring
  std::vector<PrPoint> curve;
};

/// AP per (class, difficulty) for one metric. Classes evaluated are the
/// keys of config.iou_min; difficulty bins are cumulative (a moderate bin
/// counts easy and moderate ground truth as valid).
inline std::map<int, std::array<ApEntry, 3>> evaluate(const std::vector<FrameRecord>& records,
                                                      const EvalConfig& config) {
  const IouFn iou = config.metric == EvalMetric::box3d
                        ? IouFn([](const Box7& a, const Box7& b) { return iou_3d(a, b); })
                        : IouFn([](const Box7& a, const Box7& b) { return iou_bev(a, b); });

  std::map<int, std::array<ApEntry, 3>> out;
  for (const auto& [cls, iou_min] : config.iou_min) {
    for (int d = 0; d < 3; ++d) {
      const auto level = static_cast<Difficulty>(d);
      std::vector<DetMatch> all;
      int total_gt = 0;
      for (const FrameRecord& fr : records) {
        auto res = match_frame(fr.gts, fr.dets, cls, iou, iou_min, level);
        total_gt += res.valid_gt_count;
        all.insert(all.end(), res.matches.begin(), res.matches.end());
      }
      ApEntry& e = out[cls][d];
      e.gt_count = total_gt;
      for (const DetMatch& m : all)
        if (m.outcome != MatchOutcome::ignored_match) ++e.det_count;
      e.curve = pr_curve(std::move(all), total_gt);
      e.ap11 = average_precision(e.curve, ApMode::ap11);
      e.ap40 = average_precision(e.curve, ApMode::ap40);
    }
  }
  return out;
}

}  // namespace lidet
