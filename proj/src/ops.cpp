#include "lf4d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

#include "lf4d/parallel.hpp"

namespace lf4d {

namespace {

template <typename T>
T sum(const T* a, Index n) {
  constexpr int kLanes = 8;
  T lanes[kLanes] = {};
  Index k = 0;
  for (; k + kLanes <= n; k += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += a[k + l];
  for (int l = 0; k < n; ++k, ++l) lanes[l] += a[k];
  T s = T(0);
  for (int l = 0; l < kLanes; ++l) s += lanes[l];
  return s;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv4DLayer

template <typename T>
Conv4DLayerT<T>::Conv4DLayerT(Index in_channels, Index out_channels, Index a1, Index a2, Index s1, Index s2,
                              std::array<Index, 4> pad)
    : weights({out_channels, in_channels, a1, a2, s1, s2}), bias(static_cast<std::size_t>(out_channels), T(0)),
      padding(pad) {
  validate();
}

template <typename T>
Conv4DLayerT<T> Conv4DLayerT<T>::same(Index in_channels, Index out_channels, Index a1, Index a2, Index s1, Index s2) {
  for (Index k : {a1, a2, s1, s2})
    require(k % 2 == 1, "Conv4DLayer::same: kernel extents must be odd for same-size padding");
  return Conv4DLayerT(in_channels, out_channels, a1, a2, s1, s2, {a1 / 2, a2 / 2, s1 / 2, s2 / 2});
}

template <typename T>
void Conv4DLayerT<T>::validate() const {
  require(!weights.empty(), "Conv4DLayer: weights not set");
  require(static_cast<Index>(bias.size()) == out_channels(),
          "Conv4DLayer: bias length " + std::to_string(bias.size()) + " != out channels " +
              std::to_string(out_channels()));
  for (Index p : padding) require(p >= 0, "Conv4DLayer: negative padding");
}

template <typename T>
Extents<6> Conv4DLayerT<T>::output_shape(const Extents<6>& in) const {
  validate();
  require(in[1] == in_channels(), "conv4d: input has " + std::to_string(in[1]) + " channels, layer expects " +
                                      std::to_string(in_channels()));
  Extents<6> out{in[0], out_channels(), 0, 0, 0, 0};
  for (std::size_t a = 0; a < 4; ++a) {
    const Index padded = in[a + 2] + 2 * padding[a];
    const Index k = weights.extent(a + 2);
    require(padded >= k, "conv4d: kernel extent " + std::to_string(k) + " exceeds padded input extent " +
                             std::to_string(padded) + " on axis " + std::to_string(a));
    out[a + 2] = padded - k + 1;
  }
  return out;
}

namespace {

// The correlation kernels work on a zero-padded copy of the input in which
// every (s, t) plane is stored at padded width. A spatial tap (m, q) is then a
// constant offset into the flattened plane, so each output plane is computed
// over a flat index k = y * padded_width + x; columns x >= out width are
// discarded afterwards.
template <typename T>
struct PaddedInput {
  std::vector<T> data;
  Index n, c, s, t, y, x;  // padded extents
  Index plane() const { return y * x; }
};

template <typename T>
PaddedInput<T> pad_input(const FeatureTensorT<T>& in, const std::array<Index, 4>& pad, Index slack) {
  const auto& e = in.shape();
  PaddedInput<T> p{{}, e[0], e[1], e[2] + 2 * pad[0], e[3] + 2 * pad[1], e[4] + 2 * pad[2], e[5] + 2 * pad[3]};
  p.data.assign(static_cast<std::size_t>(p.n * p.c * p.s * p.t * p.plane() + slack), T(0));
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index s = 0; s < e[2]; ++s)
        for (Index t = 0; t < e[3]; ++t) {
          T* dst = p.data.data() + (((n * p.c + c) * p.s + s + pad[0]) * p.t + t + pad[1]) * p.plane();
          for (Index y = 0; y < e[4]; ++y) {
            const T* src = &in(n, c, s, t, y, 0);
            std::copy(src, src + e[5], dst + (y + pad[2]) * p.x + pad[3]);
          }
        }
  return p;
}

// 512-bit vector of T (GCC/Clang vector extension; lowered to the host ISA).
template <typename T>
struct Simd {
  typedef T type __attribute__((vector_size(64)));
  static constexpr Index lanes = 64 / static_cast<Index>(sizeof(T));
};
template <typename T>
using Vec = typename Simd<T>::type;

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}
template <typename T>
inline void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof(v));
}

// Vectors per accumulator row and output channels per register block.
constexpr int kRowVecs = 1;
constexpr int kBlockJ = 8;

// Elements per flattened-plane chunk.
template <typename T>
constexpr Index kChunk = kRowVecs * Simd<T>::lanes;

// Offsets of every kernel tap (i, u, v, m, q), in weight order, relative to
// the first padded plane of a given (n, s, t).
template <typename T>
std::vector<Index> tap_offsets(const PaddedInput<T>& p, Index I, Index KS, Index KT, Index KY, Index KX) {
  std::vector<Index> off;
  off.reserve(static_cast<std::size_t>(I * KS * KT * KY * KX));
  for (Index i = 0; i < I; ++i)
    for (Index u = 0; u < KS; ++u)
      for (Index v = 0; v < KT; ++v)
        for (Index m = 0; m < KY; ++m)
          for (Index q = 0; q < KX; ++q) off.push_back(((i * p.s + u) * p.t + v) * p.plane() + m * p.x + q);
  return off;
}

// acc[jb] = sum over taps k of panel[k * JB + jb] * src[offs[k] + (0 .. chunk)]
// for one chunk of the flattened plane. The panel holds JB output channels'
// weights interleaved per tap.
template <typename T, int JB>
void correlate_chunk(const T* src, const Index* offs, Index taps, const T* panel, T* const* dst) {
  constexpr Index L = Simd<T>::lanes;
  Vec<T> acc[JB][kRowVecs] = {};
  for (Index k = 0; k < taps; ++k) {
    const T* s = src + offs[k];
    Vec<T> in[kRowVecs];
    for (int r = 0; r < kRowVecs; ++r) in[r] = load(s + r * L);
    const T* wk = panel + k * JB;
    for (int jb = 0; jb < JB; ++jb)
      for (int r = 0; r < kRowVecs; ++r) acc[jb][r] += wk[jb] * in[r];
  }
  for (int jb = 0; jb < JB; ++jb)
    for (int r = 0; r < kRowVecs; ++r) store(dst[jb] + r * L, acc[jb][r]);
}

template <typename T, int JB = kBlockJ>
void correlate_chunk_n(int jn, const T* src, const Index* offs, Index taps, const T* panel, T* const* dst) {
  if constexpr (JB > 1) {
    if (jn < JB) return correlate_chunk_n<T, JB - 1>(jn, src, offs, taps, panel, dst);
  }
  correlate_chunk<T, JB>(src, offs, taps, panel, dst);
}

// Blocked dot products for the weight gradient:
//   out[tb] = sum over planes p, k < len of g[p * len + k] * bases[p][offs[tb] + k]
// with a fixed lane layout; len is a multiple of the chunk size.
template <typename T, int TB>
void dot_block(const T* g, const T* const* bases, Index planes, const Index* offs, Index len, T* out) {
  constexpr Index L = Simd<T>::lanes;
  Vec<T> acc[TB][kRowVecs] = {};
  for (Index p = 0; p < planes; ++p) {
    const T* gp = g + p * len;
    const T* base = bases[p];
    for (Index k = 0; k < len; k += kRowVecs * L) {
      Vec<T> gv[kRowVecs];
      for (int r = 0; r < kRowVecs; ++r) gv[r] = load(gp + k + r * L);
      for (int tb = 0; tb < TB; ++tb) {
        const T* s = base + offs[tb] + k;
        for (int r = 0; r < kRowVecs; ++r) acc[tb][r] += gv[r] * load(s + r * L);
      }
    }
  }
  for (int tb = 0; tb < TB; ++tb) {
    T total = T(0);
    for (int r = 0; r < kRowVecs; ++r)
      for (Index l = 0; l < L; ++l) total += acc[tb][r][l];
    out[tb] = total;
  }
}

// Valid (unpadded-output) cross-correlation of a padded input with weights
// (J, I, KS, KT, KY, KX). Output extents follow from the padded extents.
template <typename T>
FeatureTensorT<T> correlate(const PaddedInput<T>& p, const Grid<T, 6>& W, const std::vector<T>& bias) {
  const Index J = W.extent(0), I = W.extent(1);
  const Index KS = W.extent(2), KT = W.extent(3), KY = W.extent(4), KX = W.extent(5);
  const Index OS = p.s - KS + 1, OT = p.t - KT + 1, OY = p.y - KY + 1, OX = p.x - KX + 1;
  FeatureTensorT<T> out({p.n, J, OS, OT, OY, OX});
  const auto offs = tap_offsets(p, I, KS, KT, KY, KX);
  const Index taps = static_cast<Index>(offs.size());
  constexpr Index V = kChunk<T>;
  const Index flat = OY * p.x;
  const Index chunks = (flat + V - 1) / V;
  const Index jblocks = (J + kBlockJ - 1) / kBlockJ;

  // Weight panels: for each block of output channels, taps outer, channels inner.
  std::vector<T> panels(static_cast<std::size_t>(J * taps));
  for (Index j = 0; j < J; ++j) {
    const Index j0 = j / kBlockJ * kBlockJ, width = std::min<Index>(kBlockJ, J - j0);
    for (Index k = 0; k < taps; ++k)
      panels[static_cast<std::size_t>(j0 * taps + k * width + (j - j0))] = W.data()[j * taps + k];
  }

  parallel_for(p.n * jblocks, [&](Index job) {
    const Index n = job / jblocks, j0 = (job % jblocks) * kBlockJ;
    const int jn = static_cast<int>(std::min<Index>(kBlockJ, J - j0));
    std::vector<T> work(static_cast<std::size_t>(kBlockJ * chunks * V));
    const T* panel = panels.data() + j0 * taps;
    T* d[kBlockJ];
    for (Index os = 0; os < OS; ++os)
      for (Index ot = 0; ot < OT; ++ot) {
        const T* base = p.data.data() + ((n * p.c * p.s + os) * p.t + ot) * p.plane();
        for (Index c = 0; c < chunks; ++c) {
          for (int jb = 0; jb < jn; ++jb) d[jb] = work.data() + (jb * chunks + c) * V;
          correlate_chunk_n<T>(jn, base + c * V, offs.data(), taps, panel, d);
        }
        for (Index jb = 0; jb < jn; ++jb) {
          const T b = bias[static_cast<std::size_t>(j0 + jb)];
          const T* w = work.data() + jb * chunks * V;
          for (Index oy = 0; oy < OY; ++oy) {
            T* orow = &out(n, j0 + jb, os, ot, oy, 0);
            const T* wrow = w + oy * p.x;
            for (Index ox = 0; ox < OX; ++ox) orow[ox] = wrow[ox] + b;
          }
        }
      }
  });
  return out;
}

}  // namespace

template <typename T>
FeatureTensorT<T> conv4d_forward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer) {
  layer.output_shape(input.shape());
  const auto p = pad_input(input, layer.padding, layer.kernel_x() + 2 * kChunk<T>);
  return correlate(p, layer.weights, layer.bias);
}

template <typename T>
Conv4DGradsT<T> conv4d_backward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer,
                                const FeatureTensorT<T>& grad_output, bool skip_input) {
  const auto oe = layer.output_shape(input.shape());
  if (grad_output.shape() != oe)
    throw std::invalid_argument("conv4d_backward: grad_output shape " + to_string(grad_output.shape()) +
                                " does not match forward output " + to_string(oe));
  const auto& ie = input.shape();
  const Index N = oe[0], J = oe[1], I = ie[1];
  const Index OS = oe[2], OT = oe[3], OY = oe[4], OX = oe[5];
  const Index KS = layer.kernel_s(), KT = layer.kernel_t(), KY = layer.kernel_y(), KX = layer.kernel_x();
  const auto& W = layer.weights;
  const auto& G = grad_output;

  Conv4DGradsT<T> grads;
  grads.bias.assign(static_cast<std::size_t>(J), T(0));
  const Index volume = OS * OT * OY * OX;
  for (Index j = 0; j < J; ++j) {
    T acc = T(0);
    for (Index n = 0; n < N; ++n) acc += sum(&G(n, j, 0, 0, 0, 0), volume);
    grads.bias[static_cast<std::size_t>(j)] = acc;
  }

  // Weight gradient: dot products of the gradient plane, laid out at padded
  // width with zeros in the discarded columns, against shifted input planes.
  constexpr Index V = kChunk<T>;
  const auto p = pad_input(input, layer.padding, KX + 2 * V);
  const auto offs = tap_offsets(p, I, KS, KT, KY, KX);
  const Index taps = static_cast<Index>(offs.size());
  const Index flat = OY * p.x;
  const Index glen = (flat + V - 1) / V * V;
  grads.weights = Grid<T, 6>(W.shape());
  const Index planes = N * OS * OT;
  parallel_for(J, [&](Index j) {
    std::vector<T> gplanes(static_cast<std::size_t>(planes * glen), T(0));
    std::vector<const T*> bases(static_cast<std::size_t>(planes));
    for (Index n = 0, k = 0; n < N; ++n)
      for (Index os = 0; os < OS; ++os)
        for (Index ot = 0; ot < OT; ++ot, ++k) {
          for (Index oy = 0; oy < OY; ++oy) {
            const T* grow = &G(n, j, os, ot, oy, 0);
            std::copy(grow, grow + OX, gplanes.data() + k * glen + oy * p.x);
          }
          bases[static_cast<std::size_t>(k)] = p.data.data() + ((n * p.c * p.s + os) * p.t + ot) * p.plane();
        }
    T* gw = &grads.weights(j, 0, 0, 0, 0, 0);
    constexpr int TB = 8;
    Index k = 0;
    for (; k + TB <= taps; k += TB) dot_block<T, TB>(gplanes.data(), bases.data(), planes, offs.data() + k, glen, gw + k);
    for (; k < taps; ++k) dot_block<T, 1>(gplanes.data(), bases.data(), planes, offs.data() + k, glen, gw + k);
  });

  if (skip_input) return grads;

  // Input gradient: correlation of the gradient with the transposed, flipped
  // kernel under complementary padding (kernel - 1 - pad).
  bool complementary = true;
  for (std::size_t a = 0; a < 4; ++a) complementary = complementary && layer.padding[a] <= W.extent(a + 2) - 1;
  if (!complementary)
    throw std::invalid_argument("conv4d_backward: padding must be smaller than the kernel extent");
  Grid<T, 6> flipped({I, J, KS, KT, KY, KX});
  for (Index j = 0; j < J; ++j)
    for (Index i = 0; i < I; ++i)
      for (Index u = 0; u < KS; ++u)
        for (Index v = 0; v < KT; ++v)
          for (Index m = 0; m < KY; ++m)
            for (Index q = 0; q < KX; ++q)
              flipped(i, j, KS - 1 - u, KT - 1 - v, KY - 1 - m, KX - 1 - q) = W(j, i, u, v, m, q);
  const std::array<Index, 4> pad{KS - 1 - layer.padding[0], KT - 1 - layer.padding[1], KY - 1 - layer.padding[2],
                                 KX - 1 - layer.padding[3]};
  const auto gp = pad_input(G, pad, KX + 2 * V);
  grads.input = correlate(gp, flipped, std::vector<T>(static_cast<std::size_t>(I), T(0)));
  return grads;
}

// ---------------------------------------------------------------------------
// LeakyReLU

template <typename T>
FeatureTensorT<T> leaky_relu(const FeatureTensorT<T>& input, T alpha) {
  FeatureTensorT<T> out = input;
  for (auto& v : out) v = v >= T(0) ? v : alpha * v;
  return out;
}

template <typename T>
FeatureTensorT<T> leaky_relu_backward(const FeatureTensorT<T>& input, const FeatureTensorT<T>& grad_output, T alpha) {
  input.require_same_shape(grad_output, "leaky_relu_backward");
  FeatureTensorT<T> out = grad_output;
  const T* x = input.data();
  T* g = out.data();
  for (Index k = 0; k < out.size(); ++k) g[k] = x[k] >= T(0) ? g[k] : alpha * g[k];
  return out;
}

// ---------------------------------------------------------------------------
// Aperture group batch normalization

template <typename T>
void AgbnStateT<T>::validate() const {
  require(epsilon > T(0), "AgbnState: epsilon must be positive");
  const auto c = gamma.size();
  require(beta.size() == c && running_mean.size() == c && running_var.size() == c,
          "AgbnState: parameter lengths differ");
}

namespace {

struct GroupStats {
  std::vector<double> mean, var;
};

// Per-channel statistics pooled over (n, s, t, y, x); two-pass, double accumulation.
template <typename T>
GroupStats group_stats(const FeatureTensorT<T>& input) {
  const auto& e = input.shape();
  const Index N = e[0], C = e[1], block = e[2] * e[3] * e[4] * e[5];
  const double count = static_cast<double>(N * block);
  GroupStats st{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  for (Index c = 0; c < C; ++c) {
    double s = 0.0;
    for (Index n = 0; n < N; ++n) {
      const T* p = &input(n, c, 0, 0, 0, 0);
      for (Index k = 0; k < block; ++k) s += p[k];
    }
    const double mean = s / count;
    double v = 0.0;
    for (Index n = 0; n < N; ++n) {
      const T* p = &input(n, c, 0, 0, 0, 0);
      for (Index k = 0; k < block; ++k) {
        const double d = p[k] - mean;
        v += d * d;
      }
    }
    st.mean[c] = mean;
    st.var[c] = v / count;
  }
  return st;
}

template <typename T>
void check_agbn(const FeatureTensorT<T>& input, const AgbnStateT<T>& state, NormMode mode) {
  state.validate();
  require(input.extent(1) == state.channels(), "agbn: input has " + std::to_string(input.extent(1)) +
                                                   " channels, state has " + std::to_string(state.channels()));
  if (mode == NormMode::train) {
    const auto& e = input.shape();
    require(e[0] * e[2] * e[3] * e[4] * e[5] >= 2, "agbn: train mode needs at least 2 values per channel group");
  }
}

}  // namespace

template <typename T>
FeatureTensorT<T> agbn_forward(const FeatureTensorT<T>& input, AgbnStateT<T>& state, NormMode mode) {
  check_agbn(input, state, mode);
  const auto& e = input.shape();
  const Index N = e[0], C = e[1], block = e[2] * e[3] * e[4] * e[5];
  std::vector<double> mean(C), var(C);
  if (mode == NormMode::train) {
    auto st = group_stats(input);
    mean = st.mean;
    var = st.var;
    const double count = static_cast<double>(N * block);
    const double m = state.momentum;
    for (Index c = 0; c < C; ++c) {
      const double unbiased = var[c] * count / (count - 1.0);
      state.running_mean[c] = static_cast<T>(m * state.running_mean[c] + (1.0 - m) * mean[c]);
      state.running_var[c] = static_cast<T>(m * state.running_var[c] + (1.0 - m) * unbiased);
    }
  } else {
    for (Index c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      var[c] = state.running_var[c];
    }
  }
  FeatureTensorT<T> out(e);
  for (Index c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + static_cast<double>(state.epsilon));
    const double g = state.gamma[c], b = state.beta[c];
    for (Index n = 0; n < N; ++n) {
      const T* p = &input(n, c, 0, 0, 0, 0);
      T* o = &out(n, c, 0, 0, 0, 0);
      for (Index k = 0; k < block; ++k) o[k] = static_cast<T>(g * (p[k] - mean[c]) * inv_std + b);
    }
  }
  return out;
}

template <typename T>
AgbnGradsT<T> agbn_backward(const FeatureTensorT<T>& input, const AgbnStateT<T>& state,
                            const FeatureTensorT<T>& grad_output, NormMode mode) {
  check_agbn(input, state, mode);
  input.require_same_shape(grad_output, "agbn_backward");
  const auto& e = input.shape();
  const Index N = e[0], C = e[1], block = e[2] * e[3] * e[4] * e[5];
  const double count = static_cast<double>(N * block);
  GroupStats st;
  if (mode == NormMode::train) {
    st = group_stats(input);
  } else {
    st.mean.assign(state.running_mean.begin(), state.running_mean.end());
    st.var.assign(state.running_var.begin(), state.running_var.end());
  }
  AgbnGradsT<T> grads{FeatureTensorT<T>(e), std::vector<T>(C), std::vector<T>(C)};
  for (Index c = 0; c < C; ++c) {
    const double mean = st.mean[c];
    const double inv_std = 1.0 / std::sqrt(st.var[c] + static_cast<double>(state.epsilon));
    double sum_g = 0.0, sum_gx = 0.0;
    for (Index n = 0; n < N; ++n) {
      const T* p = &input(n, c, 0, 0, 0, 0);
      const T* g = &grad_output(n, c, 0, 0, 0, 0);
      for (Index k = 0; k < block; ++k) {
        sum_g += g[k];
        sum_gx += g[k] * (p[k] - mean) * inv_std;
      }
    }
    grads.beta[c] = static_cast<T>(sum_g);
    grads.gamma[c] = static_cast<T>(sum_gx);
    const double gamma = state.gamma[c];
    for (Index n = 0; n < N; ++n) {
      const T* p = &input(n, c, 0, 0, 0, 0);
      const T* g = &grad_output(n, c, 0, 0, 0, 0);
      T* d = &grads.input(n, c, 0, 0, 0, 0);
      if (mode == NormMode::train) {
        const double scale = gamma * inv_std / count;
        for (Index k = 0; k < block; ++k) {
          const double xhat = (p[k] - mean) * inv_std;
          d[k] = static_cast<T>(scale * (count * g[k] - sum_g - xhat * sum_gx));
        }
      } else {
        for (Index k = 0; k < block; ++k) d[k] = static_cast<T>(gamma * inv_std * g[k]);
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Angular interpolation

Index interpolated_extent(Index extent, Index r_a) {
  require(r_a >= 1, "angular_interpolate: r_a must be >= 1");
  return r_a * (extent - 1) + 1;
}

namespace {

// Output view k samples input position k / r: base index and weight of the next view.
struct Lerp {
  Index base;
  double frac;
};
inline Lerp lerp_at(Index k, Index r) { return {k / r, static_cast<double>(k % r) / static_cast<double>(r)}; }

}  // namespace

template <typename T>
FeatureTensorT<T> angular_interpolate(const FeatureTensorT<T>& input, Index r_a) {
  require(r_a >= 1, "angular_interpolate: r_a must be >= 1");
  if (r_a == 1) return input;
  const auto& e = input.shape();
  require(e[2] >= 2 && e[3] >= 2, "angular_interpolate: S and T must be >= 2 when r_a > 1");
  const Index OS = interpolated_extent(e[2], r_a), OT = interpolated_extent(e[3], r_a);
  const Index plane = e[4] * e[5];

  // Along s.
  FeatureTensorT<T> mid({e[0], e[1], OS, e[3], e[4], e[5]});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index os = 0; os < OS; ++os) {
        const auto [b, f] = lerp_at(os, r_a);
        for (Index t = 0; t < e[3]; ++t) {
          T* dst = &mid(n, c, os, t, 0, 0);
          const T* a0 = &input(n, c, b, t, 0, 0);
          if (f == 0.0) {
            std::copy(a0, a0 + plane, dst);
          } else {
            const T* a1 = &input(n, c, b + 1, t, 0, 0);
            const T w1 = static_cast<T>(f), w0 = static_cast<T>(1.0 - f);
            for (Index k = 0; k < plane; ++k) dst[k] = w0 * a0[k] + w1 * a1[k];
          }
        }
      }
  // Along t.
  FeatureTensorT<T> out({e[0], e[1], OS, OT, e[4], e[5]});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index s = 0; s < OS; ++s)
        for (Index ot = 0; ot < OT; ++ot) {
          const auto [b, f] = lerp_at(ot, r_a);
          T* dst = &out(n, c, s, ot, 0, 0);
          const T* a0 = &mid(n, c, s, b, 0, 0);
          if (f == 0.0) {
            std::copy(a0, a0 + plane, dst);
          } else {
            const T* a1 = &mid(n, c, s, b + 1, 0, 0);
            const T w1 = static_cast<T>(f), w0 = static_cast<T>(1.0 - f);
            for (Index k = 0; k < plane; ++k) dst[k] = w0 * a0[k] + w1 * a1[k];
          }
        }
  return out;
}

template <typename T>
FeatureTensorT<T> angular_interpolate_backward(const FeatureTensorT<T>& grad_output, Index r_a, Index in_s,
                                               Index in_t) {
  require(r_a >= 1, "angular_interpolate_backward: r_a must be >= 1");
  const auto& e = grad_output.shape();
  require(e[2] == interpolated_extent(in_s, r_a) && e[3] == interpolated_extent(in_t, r_a),
          "angular_interpolate_backward: gradient extents do not match input extents");
  if (r_a == 1) return grad_output;
  const Index plane = e[4] * e[5];

  FeatureTensorT<T> mid({e[0], e[1], e[2], in_t, e[4], e[5]});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index s = 0; s < e[2]; ++s)
        for (Index ot = 0; ot < e[3]; ++ot) {
          const auto [b, f] = lerp_at(ot, r_a);
          const T* g = &grad_output(n, c, s, ot, 0, 0);
          T* d0 = &mid(n, c, s, b, 0, 0);
          if (f == 0.0) {
            for (Index k = 0; k < plane; ++k) d0[k] += g[k];
          } else {
            T* d1 = &mid(n, c, s, b + 1, 0, 0);
            const T w1 = static_cast<T>(f), w0 = static_cast<T>(1.0 - f);
            for (Index k = 0; k < plane; ++k) {
              d0[k] += w0 * g[k];
              d1[k] += w1 * g[k];
            }
          }
        }
  FeatureTensorT<T> out({e[0], e[1], in_s, in_t, e[4], e[5]});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index os = 0; os < e[2]; ++os) {
        const auto [b, f] = lerp_at(os, r_a);
        for (Index t = 0; t < in_t; ++t) {
          const T* g = &mid(n, c, os, t, 0, 0);
          T* d0 = &out(n, c, b, t, 0, 0);
          if (f == 0.0) {
            for (Index k = 0; k < plane; ++k) d0[k] += g[k];
          } else {
            T* d1 = &out(n, c, b + 1, t, 0, 0);
            const T w1 = static_cast<T>(f), w0 = static_cast<T>(1.0 - f);
            for (Index k = 0; k < plane; ++k) {
              d0[k] += w0 * g[k];
              d1[k] += w1 * g[k];
            }
          }
        }
      }
  return out;
}

// ---------------------------------------------------------------------------
// Channel <-> space shuffle

template <typename T>
FeatureTensorT<T> channel_to_space(const FeatureTensorT<T>& input, Index r_s) {
  require(r_s >= 1, "channel_to_space: r_s must be >= 1");
  if (r_s == 1) return input;
  const auto& e = input.shape();
  const Index r2 = r_s * r_s;
  require(e[1] % r2 == 0, "channel_to_space: channel count " + std::to_string(e[1]) + " not divisible by r_s^2 = " +
                              std::to_string(r2));
  const Index C = e[1] / r2, Y = e[4], X = e[5];
  FeatureTensorT<T> out({e[0], C, e[2], e[3], Y * r_s, X * r_s});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index s = 0; s < e[2]; ++s)
        for (Index t = 0; t < e[3]; ++t)
          for (Index dy = 0; dy < r_s; ++dy)
            for (Index dx = 0; dx < r_s; ++dx) {
              const Index ic = c * r2 + dy * r_s + dx;
              for (Index y = 0; y < Y; ++y) {
                const T* src = &input(n, ic, s, t, y, 0);
                T* dst = &out(n, c, s, t, r_s * y + dy, dx);
                for (Index x = 0; x < X; ++x) dst[r_s * x] = src[x];
              }
            }
  return out;
}

template <typename T>
FeatureTensorT<T> space_to_channel(const FeatureTensorT<T>& input, Index r_s) {
  require(r_s >= 1, "space_to_channel: r_s must be >= 1");
  if (r_s == 1) return input;
  const auto& e = input.shape();
  require(e[4] % r_s == 0 && e[5] % r_s == 0, "space_to_channel: spatial extents not divisible by r_s");
  const Index r2 = r_s * r_s, Y = e[4] / r_s, X = e[5] / r_s;
  FeatureTensorT<T> out({e[0], e[1] * r2, e[2], e[3], Y, X});
  for (Index n = 0; n < e[0]; ++n)
    for (Index c = 0; c < e[1]; ++c)
      for (Index s = 0; s < e[2]; ++s)
        for (Index t = 0; t < e[3]; ++t)
          for (Index dy = 0; dy < r_s; ++dy)
            for (Index dx = 0; dx < r_s; ++dx) {
              const Index oc = c * r2 + dy * r_s + dx;
              for (Index y = 0; y < Y; ++y) {
                const T* src = &input(n, c, s, t, r_s * y + dy, dx);
                T* dst = &out(n, oc, s, t, y, 0);
                for (Index x = 0; x < X; ++x) dst[x] = src[r_s * x];
              }
            }
  return out;
}

// ---------------------------------------------------------------------------
// Upscale

template <typename T>
FeatureTensorT<T> upscale(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer, Index r_s, Index r_a) {
  require(r_s >= 1 && r_a >= 1, "upscale: factors must be >= 1");
  require(layer.out_channels() % (r_s * r_s) == 0, "upscale: layer out channels must be a multiple of r_s^2");
  return channel_to_space(angular_interpolate(conv4d_forward(input, layer), r_a), r_s);
}

template <typename T>
Conv4DGradsT<T> upscale_backward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer, Index r_s, Index r_a,
                                 const FeatureTensorT<T>& grad_output, bool skip_input) {
  const auto conv_shape = layer.output_shape(input.shape());
  auto g = space_to_channel(grad_output, r_s);
  g = angular_interpolate_backward(g, r_a, conv_shape[2], conv_shape[3]);
  return conv4d_backward(input, layer, g, skip_input);
}

// ---------------------------------------------------------------------------
// Glorot initialization

double glorot_bound(Index in_channels, Index out_channels, Index taps) {
  const double fan_in = static_cast<double>(in_channels * taps);
  const double fan_out = static_cast<double>(out_channels * taps);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Conv4DLayerT<T> glorot_init(Conv4DLayerT<T> layer, std::uint64_t seed) {
  layer.validate();
  const double b = glorot_bound(layer.in_channels(), layer.out_channels(), layer.taps());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-b, b);
  for (auto& w : layer.weights) w = static_cast<T>(dist(rng));
  std::fill(layer.bias.begin(), layer.bias.end(), T(0));
  return layer;
}

#define LF4D_INSTANTIATE_OPS(T)                                                                                      \
  template struct Conv4DLayerT<T>;                                                                                   \
  template struct AgbnStateT<T>;                                                                                     \
  template FeatureTensorT<T> conv4d_forward(const FeatureTensorT<T>&, const Conv4DLayerT<T>&);                       \
  template Conv4DGradsT<T> conv4d_backward(const FeatureTensorT<T>&, const Conv4DLayerT<T>&, const FeatureTensorT<T>&, \
                                           bool);                                                                    \
  template FeatureTensorT<T> leaky_relu(const FeatureTensorT<T>&, T);                                                \
  template FeatureTensorT<T> leaky_relu_backward(const FeatureTensorT<T>&, const FeatureTensorT<T>&, T);             \
  template FeatureTensorT<T> agbn_forward(const FeatureTensorT<T>&, AgbnStateT<T>&, NormMode);                       \
  template AgbnGradsT<T> agbn_backward(const FeatureTensorT<T>&, const AgbnStateT<T>&, const FeatureTensorT<T>&,     \
                                       NormMode);                                                                    \
  template FeatureTensorT<T> angular_interpolate(const FeatureTensorT<T>&, Index);                                   \
  template FeatureTensorT<T> angular_interpolate_backward(const FeatureTensorT<T>&, Index, Index, Index);            \
  template FeatureTensorT<T> channel_to_space(const FeatureTensorT<T>&, Index);                                      \
  template FeatureTensorT<T> space_to_channel(const FeatureTensorT<T>&, Index);                                      \
  template FeatureTensorT<T> upscale(const FeatureTensorT<T>&, const Conv4DLayerT<T>&, Index, Index);                \
  template Conv4DGradsT<T> upscale_backward(const FeatureTensorT<T>&, const Conv4DLayerT<T>&, Index, Index,          \
                                            const FeatureTensorT<T>&, bool);                                         \
  template Conv4DLayerT<T> glorot_init(Conv4DLayerT<T>, std::uint64_t);

LF4D_INSTANTIATE_OPS(float)
LF4D_INSTANTIATE_OPS(double)

#undef LF4D_INSTANTIATE_OPS

}  // namespace lf4d
