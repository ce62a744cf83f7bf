#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "lidet/eval.hpp"
#include "lidet/rng.hpp"

using namespace lidet;

namespace {

GtObject gt_at(double x, double y, int cls = 0, double height = 100, int occ = 0,
               double trunc = 0) {
  return GtObject{Box7(x, y, 0, 3.9, 1.6, 1.56, 0.2, cls), height, occ, trunc};
}

Box7 det_at(double x, double y, double score, int cls = 0) {
  return Box7(x, y, 0, 3.9, 1.6, 1.56, 0.2, cls, score);
}

const IouFn iou3d_fn = [](const Box7& a, const Box7& b) { return iou_3d(a, b); };

/// ap over a synthetic outcome list (score desc implied by order)
double ap_of(const std::vector<char>& outcomes, int num_gt, ApMode mode) {
  std::vector<DetMatch> ms;
  double score = 1.0;
  for (char o : outcomes) {
    DetMatch m;
    m.outcome = o ? MatchOutcome::true_positive : MatchOutcome::false_positive;
    m.score = score;
    score -= 1e-3;
    ms.push_back(m);
  }
  return average_precision(pr_curve(std::move(ms), num_gt), mode);
}

}  // namespace

TEST_CASE("difficulty binning follows the devkit thresholds", "[eval]") {
  REQUIRE(difficulty_of(50, 0, 0.0) == Difficulty::easy);
  REQUIRE(difficulty_of(30, 1, 0.2) == Difficulty::moderate);
  REQUIRE(difficulty_of(26, 2, 0.45) == Difficulty::hard);
  REQUIRE(difficulty_of(20, 3, 0.9) == Difficulty::ignored);
  // boundary rows of the rule table
  REQUIRE(difficulty_of(40, 0, 0.15) == Difficulty::easy);
  REQUIRE(difficulty_of(39.9, 0, 0.0) == Difficulty::moderate);
  REQUIRE(difficulty_of(25, 1, 0.30) == Difficulty::moderate);
  REQUIRE(difficulty_of(25, 2, 0.50) == Difficulty::hard);
  REQUIRE(difficulty_of(24.9, 0, 0.0) == Difficulty::ignored);
}

TEST_CASE("perfect detections all match", "[eval]") {
  std::vector<GtObject> gts{gt_at(10, 0), gt_at(20, 5), gt_at(30, -5)};
  std::vector<Box7> dets{det_at(10, 0, 0.9), det_at(20, 5, 0.8), det_at(30, -5, 0.7)};
  auto res = match_frame(gts, dets, 0, iou3d_fn, 0.7, Difficulty::hard);
  REQUIRE(res.valid_gt_count == 3);
  REQUIRE(res.matches.size() == 3);
  for (const auto& m : res.matches) REQUIRE(m.outcome == MatchOutcome::true_positive);
}

TEST_CASE("no detections leaves every ground truth unmatched", "[eval]") {
  std::vector<GtObject> gts{gt_at(10, 0), gt_at(20, 5)};
  auto res = match_frame(gts, {}, 0, iou3d_fn, 0.7, Difficulty::hard);
  REQUIRE(res.matches.empty());
  REQUIRE(res.valid_gt_count == 2);
  REQUIRE(std::count(res.gt_matched.begin(), res.gt_matched.end(), 1) == 0);
}

TEST_CASE("a ground truth matches at most once", "[eval]") {
  std::vector<GtObject> gts{gt_at(10, 0)};
  std::vector<Box7> dets{det_at(10, 0, 0.9), det_at(10, 0, 0.8)};
  auto res = match_frame(gts, dets, 0, iou3d_fn, 0.7, Difficulty::hard);
  REQUIRE(res.matches.size() == 2);
  REQUIRE(res.matches[0].outcome == MatchOutcome::true_positive);
  REQUIRE(res.matches[1].outcome == MatchOutcome::false_positive);
}

TEST_CASE("matching never crosses classes", "[eval]") {
  std::vector<GtObject> gts{gt_at(10, 0, 1)};
  std::vector<Box7> dets{det_at(10, 0, 0.9, 0)};
  auto res = match_frame(gts, dets, 0, iou3d_fn, 0.7, Difficulty::hard);
  REQUIRE(res.valid_gt_count == 0);  // the class-1 gt is not in this sweep
  REQUIRE(res.matches.size() == 1);
  REQUIRE(res.matches[0].outcome == MatchOutcome::false_positive);
}

TEST_CASE("detections on ignored ground truth are discarded", "[eval]") {
  // a hard-bin object evaluated at the easy level: matching it costs nothing
  std::vector<GtObject> gts{gt_at(10, 0, 0, 26, 2, 0.4), gt_at(30, 0, 0)};
  std::vector<Box7> dets{det_at(10, 0, 0.9), det_at(30, 0, 0.8)};
  auto res = match_frame(gts, dets, 0, iou3d_fn, 0.7, Difficulty::easy);
  REQUIRE(res.valid_gt_count == 1);
  REQUIRE(res.matches[0].outcome == MatchOutcome::ignored_match);
  REQUIRE(res.matches[1].outcome == MatchOutcome::true_positive);

  auto curve = pr_curve(res.matches, res.valid_gt_count);
  REQUIRE(curve.size() == 1);  // the ignored match contributes nothing
  REQUIRE(curve[0].precision == 1.0);
  REQUIRE(curve[0].recall == 1.0);
}

TEST_CASE("ap of the four-detection worked example", "[eval]") {
  // outcomes TP, FP, TP, TP over 3 ground truths
  const double ap11 = ap_of({1, 0, 1, 1}, 3, ApMode::ap11);
  const double ap40 = ap_of({1, 0, 1, 1}, 3, ApMode::ap40);
  REQUIRE(ap11 == Catch::Approx(37.0 / 44.0).margin(1e-12));
  REQUIRE(ap40 == Catch::Approx(133.0 / 160.0).margin(1e-12));
}

TEST_CASE("perfect and empty detectors bound the ap", "[eval]") {
  REQUIRE(ap_of({1, 1, 1, 1}, 4, ApMode::ap11) == 1.0);
  REQUIRE(ap_of({1, 1, 1, 1}, 4, ApMode::ap40) == 1.0);
  REQUIRE(ap_of({}, 4, ApMode::ap11) == 0.0);
  REQUIRE(ap_of({0, 0}, 4, ApMode::ap40) == 0.0);
}

TEST_CASE("equal scores collapse into one sweep step", "[eval]") {
  // one TP and one FP sharing a score: a single PR point at precision 1/2
  std::vector<DetMatch> ms(2);
  ms[0].outcome = MatchOutcome::true_positive;
  ms[0].score = 0.5;
  ms[1].outcome = MatchOutcome::false_positive;
  ms[1].score = 0.5;
  auto curve = pr_curve(ms, 1);
  REQUIRE(curve.size() == 1);
  REQUIRE(curve[0].precision == 0.5);
  std::swap(ms[0], ms[1]);
  auto swapped = pr_curve(ms, 1);
  REQUIRE(swapped.size() == 1);
  REQUIRE(swapped[0].precision == 0.5);
}

namespace {

/// The hand-built ten-frame fixture: 12 valid ground truths, 16 detections
/// whose global score order realizes the outcome sequence
/// TP TP FP TP TP FP TP TP TP FP TP TP FP TP TP FP.
std::vector<FrameRecord> ten_frame_fixture() {
  std::vector<FrameRecord> frames(10);
  auto add_gt = [&](int f, double x) { frames[f].gts.push_back(gt_at(x, 0)); };
  auto add_tp = [&](int f, double x, double score) {
    frames[f].dets.push_back(det_at(x, 0, score));
  };
  auto add_fp = [&](int f, double score) { frames[f].dets.push_back(det_at(60, 25, score)); };

  add_gt(0, 10); add_gt(0, 20);
  add_gt(1, 10); add_gt(1, 20);
  for (int f = 2; f <= 9; ++f) add_gt(f, 10);

  add_tp(0, 10, 0.95); add_tp(0, 20, 0.90); add_fp(0, 0.85);
  add_tp(1, 10, 0.80); add_tp(1, 20, 0.75);
  add_fp(2, 0.70);     add_tp(2, 10, 0.65);
  add_tp(3, 10, 0.60);
  add_tp(4, 10, 0.55); add_fp(4, 0.50);
  add_tp(5, 10, 0.45);
  add_tp(6, 10, 0.40); add_fp(6, 0.35);
  add_tp(7, 10, 0.30);
  add_tp(8, 10, 0.25); add_fp(8, 0.20);
  // frame 9: the twelfth ground truth stays undetected
  return frames;
}

}  // namespace

TEST_CASE("ten-frame fixture reproduces the hand-computed AP", "[eval]") {
  const auto frames = ten_frame_fixture();
  for (EvalMetric metric : {EvalMetric::box3d, EvalMetric::bev}) {
    EvalConfig cfg;
    cfg.metric = metric;
    auto result = evaluate(frames, cfg);
    for (int d = 0; d < 3; ++d) {
      const ApEntry& e = result[0][d];
      REQUIRE(e.gt_count == 12);
      REQUIRE(e.ap11 == Catch::Approx(731.0 / 990.0).margin(1e-12));
      REQUIRE(e.ap40 == Catch::Approx(209.0 / 288.0).margin(1e-12));
    }
    // no class-1/2 objects anywhere
    REQUIRE(result[1][0].gt_count == 0);
    REQUIRE(result[1][0].ap40 == 0.0);
  }
}

TEST_CASE("no overlap at all scores zero everywhere", "[eval]") {
  std::vector<FrameRecord> frames(3);
  for (int f = 0; f < 3; ++f) {
    frames[static_cast<std::size_t>(f)].gts = {gt_at(10, 0), gt_at(20, 10)};
    frames[static_cast<std::size_t>(f)].dets = {det_at(50, -30, 0.9), det_at(60, 30, 0.8)};
  }
  EvalConfig cfg;
  auto result = evaluate(frames, cfg);
  for (int d = 0; d < 3; ++d) {
    REQUIRE(result[0][d].gt_count == 6);
    REQUIRE(result[0][d].ap11 == 0.0);
    REQUIRE(result[0][d].ap40 == 0.0);
  }
}

TEST_CASE("ap40 stays within the sampling bound of the exact area", "[eval]") {
  Rng rng(93);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(25));
    std::vector<char> outcomes;
    int tp = 0;
    for (int i = 0; i < n; ++i) {
      outcomes.push_back(rng.uniform() < 0.5 ? 1 : 0);
      tp += outcomes.back();
    }
    if (tp == 0) continue;
    const int num_gt = tp + static_cast<int>(rng.uniform_int(5));

    std::vector<DetMatch> ms;
    double score = 1.0;
    for (char o : outcomes) {
      DetMatch m;
      m.outcome = o ? MatchOutcome::true_positive : MatchOutcome::false_positive;
      m.score = score;
      score -= 1e-3;
      ms.push_back(m);
    }
    const auto curve = pr_curve(ms, num_gt);
    const double ap40 = average_precision(curve, ApMode::ap40);

    // exact area under the interpolated (max-precision-at-recall >= r) step
    // function, integrated between consecutive distinct recall breakpoints
    auto interp = [&](double r) {
      double best = 0;
      for (const auto& p : curve)
        if (p.recall >= r) best = std::max(best, p.precision);
      return best;
    };
    std::vector<double> breaks{0.0};
    for (const auto& p : curve) breaks.push_back(p.recall);
    breaks.push_back(1.0);
    std::sort(breaks.begin(), breaks.end());
    double area = 0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double lo = breaks[k], hi = breaks[k + 1];
      if (hi > lo) area += (hi - lo) * interp((lo + hi) / 2);
    }
    REQUIRE(ap40 >= area - 1.0 / 40.0 - 1e-12);
    REQUIRE(ap40 >= 0.0);
    REQUIRE(ap40 <= 1.0);
    REQUIRE(average_precision(curve, ApMode::ap11) <= 1.0);
  }
}

TEST_CASE("evaluate is invariant to frame order", "[eval]") {
  auto frames = ten_frame_fixture();
  EvalConfig cfg;
  auto base = evaluate(frames, cfg);
  std::reverse(frames.begin(), frames.end());
  auto reversed = evaluate(frames, cfg);
  REQUIRE(base[0][1].ap11 == reversed[0][1].ap11);
  REQUIRE(base[0][1].ap40 == reversed[0][1].ap40);
}

TEST_CASE("flipping a TP to FP never raises the ap", "[eval]") {
  Rng rng(91);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_int(20));
    std::vector<char> outcomes;
    int tp = 0;
    for (int i = 0; i < n; ++i) {
      const char o = rng.uniform() < 0.6 ? 1 : 0;
      tp += o;
      outcomes.push_back(o);
    }
    if (tp == 0) continue;
    const int num_gt = tp + static_cast<int>(rng.uniform_int(4));

    // flip a random TP
    int pick = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(tp)));
    auto flipped = outcomes;
    for (std::size_t i = 0; i < flipped.size(); ++i) {
      if (flipped[i] && pick-- == 0) {
        flipped[i] = 0;
        break;
      }
    }
    for (ApMode mode : {ApMode::ap11, ApMode::ap40}) {
      REQUIRE(ap_of(flipped, num_gt, mode) <= ap_of(outcomes, num_gt, mode) + 1e-15);
    }
  }
}

TEST_CASE("evaluate on identical detections gives AP 1 in every bin", "[eval]") {
  std::vector<FrameRecord> frames(3);
  Rng rng(92);
  for (auto& fr : frames) {
    for (int i = 0; i < 4; ++i) {
      const double x = 8.0 * (i + 1), y = rng.uniform(-20, 20);
      const int cls = static_cast<int>(rng.uniform_int(3));
      const double h = i == 0 ? 50 : i == 1 ? 30 : 26;  // spread over difficulties
      fr.gts.push_back(gt_at(x, y, cls, h, i == 2 ? 2 : 0, 0));
      fr.dets.push_back(det_at(x, y, rng.uniform(0.5, 1.0), cls));
    }
  }
  EvalConfig cfg;
  auto result = evaluate(frames, cfg);
  for (const auto& [cls, entries] : result)
    for (int d = 0; d < 3; ++d) {
      if (entries[d].gt_count == 0) continue;
      REQUIRE(entries[d].ap11 == 1.0);
      REQUIRE(entries[d].ap40 == 1.0);
    }
}
