#pragma once

// The training loss family as scalar functions with analytic gradients:
// focal, smooth-L1, binary cross-entropy, corner regularization, and the
// weighted six-term composition. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before any logarithm; the clamp is part of the contract.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "lidet/core.hpp"
#include "lidet/geometry.hpp"

namespace lidet {

struct ValueGrad {
  double value = 0;
  double grad = 0;
};

inline constexpr double kProbClamp = 1e-7;

namespace detail {
inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
}  // namespace detail

/// Focal loss for a binary label. value = -alpha_t (1 - p_t)^gamma ln p_t
/// with p_t = y p + (1-y)(1-p); gradient is with respect to p.
inline ValueGrad focal_loss(double p, int y, double alpha = 0.25, double gamma = 2.0) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("focal_loss: p must be in (0,1)");
  if (y != 0 && y != 1) throw std::invalid_argument("focal_loss: y must be 0 or 1");
  p = detail::clamp_prob(p);
  const double pt = y == 1 ? p : 1.0 - p;
  const double at = y == 1 ? alpha : 1.0 - alpha;
  const double one_m = 1.0 - pt;
  const double pow_g = std::pow(one_m, gamma);
  const double log_pt = std::log(pt);
  ValueGrad out;
  out.value = -at * pow_g * log_pt;
  // d/dpt, then chain through dpt/dp = 2y - 1
  const double pow_gm1 = gamma == 0.0 ? 0.0 : gamma * std::pow(one_m, gamma - 1.0);
  const double dv_dpt = at * (pow_gm1 * log_pt - pow_g / pt);
  out.grad = dv_dpt * (y == 1 ? 1.0 : -1.0);
  return out;
}

/// Huber-style regression loss: 0.5 d^2 / beta for |d| < beta, else
/// |d| - 0.5 beta.
inline ValueGrad smooth_l1(double d, double beta = 1.0) {
  if (!(beta > 0)) throw std::invalid_argument("smooth_l1: beta must be positive");
  ValueGrad out;
  const double ad = std::abs(d);
  if (ad < beta) {
    out.value = 0.5 * d * d / beta;
    out.grad = d / beta;
  } else {
    out.value = ad - 0.5 * beta;
    out.grad = d > 0 ? 1.0 : -1.0;
  }
  return out;
}

/// Binary cross-entropy with a (possibly soft) target y in [0, 1].
inline ValueGrad bce(double p, double y) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("bce: p must be in (0,1)");
  if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("bce: y must be in [0,1]");
  p = detail::clamp_prob(p);
  ValueGrad out;
  out.value = -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
  out.grad = -y / p + (1.0 - y) / (1.0 - p);
  return out;
}

struct CornerLossGrad {
  double value = 0;
  // with respect to the predicted box parameters (cx, cy, cz, l, w, h, yaw)
  std::array<double, 7> grad{};
};

/// Corner regularization with gradient: mean over the 8 corners of the
/// smooth-L1 of the corner distance, against the closer of the ground truth
/// and its heading-flipped twin so a pi heading error is not penalized.
inline CornerLossGrad corner_loss_grad(const Box7& pred, const Box7& gt, double beta = 1.0) {
  const auto pc = box_corners(pred);
  const auto gc = box_corners(gt);
  const auto gc_flip = box_corners(Box7(gt.cx, gt.cy, gt.cz, gt.l, gt.w, gt.h, gt.yaw + kPi));

  auto total = [&](const std::array<Vec3, 8>& target) {
    double s = 0;
    for (int i = 0; i < 8; ++i) s += smooth_l1(norm(pc[i] - target[i]), beta).value;
    return s / 8.0;
  };
  const double v_plain = total(gc);
  const double v_flip = total(gc_flip);
  const auto& target = v_plain <= v_flip ? gc : gc_flip;

  CornerLossGrad out;
  out.value = std::min(v_plain, v_flip);

  const double c = std::cos(pred.yaw), s = std::sin(pred.yaw);
  const double sx[4] = {0.5, -0.5, -0.5, 0.5};
  const double sy[4] = {0.5, 0.5, -0.5, -0.5};
  for (int i = 0; i < 8; ++i) {
    const Vec3 diff = pc[i] - target[i];
    const double dist = norm(diff);
    if (dist <= 0) continue;  // smooth-L1 slope vanishes at zero distance
    const double gscale = smooth_l1(dist, beta).grad / (8.0 * dist);
    const Vec3 g = diff * gscale;  // dLoss/dcorner_i
    const double ox = sx[i % 4] * pred.l;
    const double oy = sy[i % 4] * pred.w;
    out.grad[0] += g.x;
    out.grad[1] += g.y;
    out.grad[2] += g.z;
    out.grad[3] += g.x * c * sx[i % 4] + g.y * s * sx[i % 4];
    out.grad[4] += -g.x * s * sy[i % 4] + g.y * c * sy[i % 4];
    out.grad[5] += g.z * (i < 4 ? -0.5 : 0.5);
    out.grad[6] += g.x * (-s * ox - c * oy) + g.y * (c * ox - s * oy);
  }
  return out;
}

inline double corner_loss(const Box7& pred, const Box7& gt, double beta = 1.0) {
  return corner_loss_grad(pred, gt, beta).value;
}

/// The six loss terms: auxiliary, classification, localization, attention,
/// confidence refinement, localization refinement.
struct LossTerms {
  enum Index { aux = 0, cls, loc, cam, cref, lref };
  std::array<double, 6> values{};
  std::array<double, 6> weights{1, 1, 1, 1, 1, 1};
};

inline double total_loss(const LossTerms& t) {
  double sum = 0;
  for (int i = 0; i < 6; ++i) {
    if (!std::isfinite(t.values[i])) throw std::invalid_argument("total_loss: non-finite term");
    sum += t.weights[i] * t.values[i];
  }
  return sum;
}

}  // namespace lidet
