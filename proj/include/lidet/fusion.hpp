#pragma once

// Feature-space math of the voxel-to-point fusion path: position-vector
// combination, gated concatenation of semantic and geometric halves, and a
// deterministic affine-stack evaluator standing in for trained
// Linear-BN-ReLU blocks (BatchNorm folds into the affine weights at
// inference, so no separate normalization state is needed).

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lidet/core.hpp"

namespace lidet {

enum class FeatureRole {
  generic,
  point,      // raw point-wise feature
  voxel,      // raw voxel-wise feature
  point_geo,  // point-wise geometric
  voxel_sem,  // voxel-wise semantic
  point_sem,  // point-wise semantic
  gate_sem,   // semantic part-attention gate
  gate_geo,   // geometric part-attention gate
  fused,      // combined semantic-geometric feature
  position,   // encoded position vector
};

struct FeatureVector {
  std::vector<double> values;
  FeatureRole role = FeatureRole::generic;

  FeatureVector() = default;
  FeatureVector(std::vector<double> v, FeatureRole r = FeatureRole::generic)
      : values(std::move(v)), role(r) {}

  static FeatureVector filled(std::size_t n, double value,
                              FeatureRole r = FeatureRole::generic) {
    return FeatureVector(std::vector<double>(n, value), r);
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Default channel widths of the fusion path. The fused width must equal
/// the sum of the semantic and geometric widths, and the position vector
/// must match the voxel feature it enhances.
struct FeatureDims {
  int f_p = 64;
  int f_v = 256;
  int f_pgeo = 128;
  int f_psem = 128;
  int s_sem = 128;
  int s_geo = 128;
  int f_csg = 256;
  int position = 256;

  void validate() const {
    if (f_p < 1 || f_v < 1 || f_pgeo < 1 || f_psem < 1 || s_sem < 1 || s_geo < 1)
      throw invariant_error("FeatureDims: widths must be positive");
    if (s_sem != f_psem || s_geo != f_pgeo)
      throw invariant_error("FeatureDims: gate widths must match their features");
    if (f_csg != f_psem + f_pgeo)
      throw invariant_error("FeatureDims: fused width must be f_psem + f_pgeo");
    if (position != f_v)
      throw invariant_error("FeatureDims: position vector width must match f_v");
  }
};

/// Enhance voxel-derived semantics with an encoded position vector
/// (elementwise addition; both vectors share one width).
inline FeatureVector combine_position(const FeatureVector& f_vsem, const FeatureVector& pos) {
  if (f_vsem.size() != pos.size())
    throw std::invalid_argument("combine_position: length mismatch");
  FeatureVector out(f_vsem.values, FeatureRole::voxel_sem);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += pos.values[i];
  return out;
}

/// Gated concatenation: [f_psem * s_sem, f_pgeo * s_geo], semantic half
/// first. Gates must match their feature lengths and lie in [0, 1].
inline FeatureVector fuse(const FeatureVector& f_psem, const FeatureVector& s_sem,
                          const FeatureVector& f_pgeo, const FeatureVector& s_geo) {
  if (f_psem.size() != s_sem.size() || f_pgeo.size() != s_geo.size())
    throw std::invalid_argument("fuse: gate/feature length mismatch");
  for (double g : s_sem.values)
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("fuse: semantic gate out of [0,1]");
  for (double g : s_geo.values)
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("fuse: geometric gate out of [0,1]");

  FeatureVector out = FeatureVector::filled(f_psem.size() + f_pgeo.size(), 0.0, FeatureRole::fused);
  for (std::size_t i = 0; i < f_psem.size(); ++i) out.values[i] = f_psem[i] * s_sem[i];
  for (std::size_t i = 0; i < f_pgeo.size(); ++i)
    out.values[f_psem.size() + i] = f_pgeo[i] * s_geo[i];
  return out;
}

/// Inverse of the concatenation in fuse: split at the semantic width.
inline std::pair<FeatureVector, FeatureVector> split_fused(const FeatureVector& fused,
                                                           std::size_t sem_len) {
  if (sem_len > fused.size()) throw std::invalid_argument("split_fused: semantic length too large");
  FeatureVector sem(std::vector<double>(fused.values.begin(),
                                        fused.values.begin() + static_cast<long>(sem_len)),
                    FeatureRole::point_sem);
  FeatureVector geo(std::vector<double>(fused.values.begin() + static_cast<long>(sem_len),
                                        fused.values.end()),
                    FeatureRole::point_geo);
  return {std::move(sem), std::move(geo)};
}

enum class Activation { none, relu, sigmoid };

struct AffineLayer {
  std::size_t in_dim = 0, out_dim = 0;
  std::vector<double> weights;  // row-major, out_dim x in_dim
  std::vector<double> bias;     // out_dim
  Activation activation = Activation::none;
};

struct AffineStack {
  std::vector<AffineLayer> layers;

  void validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const AffineLayer& l = layers[i];
      if (l.weights.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim)
        throw invariant_error("AffineStack: layer weight/bias shape mismatch");
      if (i > 0 && layers[i - 1].out_dim != l.in_dim)
        throw invariant_error("AffineStack: adjacent layer dimensions do not chain");
    }
  }
};

inline FeatureVector apply_stack(const AffineStack& stack, const FeatureVector& v) {
  stack.validate();
  std::vector<double> cur = v.values;
  for (const AffineLayer& l : stack.layers) {
    if (cur.size() != l.in_dim) throw std::invalid_argument("apply_stack: dimension mismatch");
    std::vector<double> next(l.out_dim, 0.0);
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      double acc = l.bias[r];
      const double* row = &l.weights[r * l.in_dim];
      for (std::size_t c = 0; c < l.in_dim; ++c) acc += row[c] * cur[c];
      switch (l.activation) {
        case Activation::none: break;
        case Activation::relu: acc = acc > 0 ? acc : 0; break;
        case Activation::sigmoid: acc = 1.0 / (1.0 + std::exp(-acc)); break;
      }
      next[r] = acc;
    }
    cur = std::move(next);
  }
  return FeatureVector(std::move(cur), v.role);
}

namespace detail {
inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    default: return "none";
  }
}
}  // namespace detail

/// Text weight format, one stack per file:
///   line 1: layer count
///   per layer: "<in_dim> <out_dim> <activation>" followed by
///   out_dim*in_dim row-major weights and out_dim biases, whitespace
///   separated.
inline void save_affine_stack(const AffineStack& stack, std::ostream& os) {
  os << stack.layers.size() << "\n";
  os.precision(17);
  for (const AffineLayer& l : stack.layers) {
    os << l.in_dim << " " << l.out_dim << " " << detail::activation_name(l.activation) << "\n";
    for (std::size_t i = 0; i < l.weights.size(); ++i)
      os << l.weights[i] << (i + 1 == l.weights.size() ? "\n" : " ");
    for (std::size_t i = 0; i < l.bias.size(); ++i)
      os << l.bias[i] << (i + 1 == l.bias.size() ? "\n" : " ");
  }
}

inline AffineStack load_affine_stack(std::istream& is) {
  AffineStack stack;
  std::size_t n_layers = 0;
  if (!(is >> n_layers)) throw format_error("affine stack: missing layer count");
  for (std::size_t i = 0; i < n_layers; ++i) {
    AffineLayer l;
    std::string act;
    if (!(is >> l.in_dim >> l.out_dim >> act))
      throw format_error("affine stack: bad layer header");
    if (act == "relu")
      l.activation = Activation::relu;
    else if (act == "sigmoid")
      l.activation = Activation::sigmoid;
    else if (act == "none")
      l.activation = Activation::none;
    else
      throw format_error("affine stack: unknown activation '" + act + "'");
    l.weights.resize(l.in_dim * l.out_dim);
    l.bias.resize(l.out_dim);
    for (double& w : l.weights)
      if (!(is >> w)) throw format_error("affine stack: truncated weights");
    for (double& b : l.bias)
      if (!(is >> b)) throw format_error("affine stack: truncated biases");
    stack.layers.push_back(std::move(l));
  }
  stack.validate();
  return stack;
}

inline AffineStack load_affine_stack_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("affine stack: cannot open " + path);
  return load_affine_stack(f);
}

}  // namespace lidet
