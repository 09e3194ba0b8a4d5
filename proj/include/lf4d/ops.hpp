#pragma once

// Differentiable primitives over FeatureTensors: 4D cross-correlation,
// LeakyReLU, aperture-group batch normalization, angular interpolation,
// channel-to-space shuffle and the composed upscaling operator.
//
// Every backward is the exact adjoint of its forward. Reductions run in a
// fixed order per output element, so results do not depend on the worker
// count.

#include <array>
#include <cstdint>
#include <vector>

#include "lf4d/tensor.hpp"

namespace lf4d {

template <typename T>
struct Conv4DLayerT {
  // (out, in, angular s, angular t, spatial y, spatial x)
  Grid<T, 6> weights;
  std::vector<T> bias;
  // Zero padding per axis (s, t, y, x), applied on both sides.
  std::array<Index, 4> padding{0, 0, 0, 0};

  Conv4DLayerT() = default;
  Conv4DLayerT(Index in_channels, Index out_channels, Index a1, Index a2, Index s1, Index s2,
               std::array<Index, 4> pad = {0, 0, 0, 0});

  // Centered kernel with output extents equal to input extents. All kernel
  // extents must be odd.
  static Conv4DLayerT same(Index in_channels, Index out_channels, Index a1, Index a2, Index s1, Index s2);

  Index out_channels() const { return weights.extent(0); }
  Index in_channels() const { return weights.extent(1); }
  Index kernel_s() const { return weights.extent(2); }
  Index kernel_t() const { return weights.extent(3); }
  Index kernel_y() const { return weights.extent(4); }
  Index kernel_x() const { return weights.extent(5); }
  Index taps() const { return kernel_s() * kernel_t() * kernel_y() * kernel_x(); }

  void validate() const;
  Extents<6> output_shape(const Extents<6>& input) const;
};

template <typename T>
struct Conv4DGradsT {
  FeatureTensorT<T> input;
  Grid<T, 6> weights;
  std::vector<T> bias;
};

template <typename T>
FeatureTensorT<T> conv4d_forward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer);

// Set skip_input to avoid computing the input gradient (first layer of a network).
template <typename T>
Conv4DGradsT<T> conv4d_backward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer,
                                const FeatureTensorT<T>& grad_output, bool skip_input = false);

inline constexpr double kLeakySlope = 0.2;

template <typename T>
FeatureTensorT<T> leaky_relu(const FeatureTensorT<T>& input, T alpha);

// Gradient with respect to the pre-activation input; slope 1 at exactly 0.
template <typename T>
FeatureTensorT<T> leaky_relu_backward(const FeatureTensorT<T>& input, const FeatureTensorT<T>& grad_output, T alpha);

enum class NormMode { train, eval };

template <typename T>
struct AgbnStateT {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T epsilon = T(1e-3);
  // running <- momentum * running + (1 - momentum) * batch
  T momentum = T(0.9);

  AgbnStateT() = default;
  explicit AgbnStateT(Index channels)
      : gamma(channels, T(1)), beta(channels, T(0)), running_mean(channels, T(0)), running_var(channels, T(1)) {}

  Index channels() const { return static_cast<Index>(gamma.size()); }
  void validate() const;
};

// Train mode pools mean and variance per channel over the whole aperture
// group: batch, both angular axes and both spatial axes. It also updates the
// running statistics. Eval mode normalizes with the running statistics.
template <typename T>
FeatureTensorT<T> agbn_forward(const FeatureTensorT<T>& input, AgbnStateT<T>& state, NormMode mode);

template <typename T>
struct AgbnGradsT {
  FeatureTensorT<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
AgbnGradsT<T> agbn_backward(const FeatureTensorT<T>& input, const AgbnStateT<T>& state,
                            const FeatureTensorT<T>& grad_output, NormMode mode);

// Endpoint-preserving angular upsampling: S -> r_a (S - 1) + 1 per axis.
// Input view k lands exactly on output view r_a k.
Index interpolated_extent(Index extent, Index r_a);

template <typename T>
FeatureTensorT<T> angular_interpolate(const FeatureTensorT<T>& input, Index r_a);

template <typename T>
FeatureTensorT<T> angular_interpolate_backward(const FeatureTensorT<T>& grad_output, Index r_a, Index in_s,
                                               Index in_t);

// out(n, c, s, t, r y + dy, r x + dx) = in(n, c r^2 + dy r + dx, s, t, y, x)
template <typename T>
FeatureTensorT<T> channel_to_space(const FeatureTensorT<T>& input, Index r_s);

template <typename T>
FeatureTensorT<T> space_to_channel(const FeatureTensorT<T>& input, Index r_s);

// conv (channel expansion by r_s^2) -> angular_interpolate(r_a) -> channel_to_space(r_s)
template <typename T>
FeatureTensorT<T> upscale(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer, Index r_s, Index r_a);

template <typename T>
Conv4DGradsT<T> upscale_backward(const FeatureTensorT<T>& input, const Conv4DLayerT<T>& layer, Index r_s, Index r_a,
                                 const FeatureTensorT<T>& grad_output, bool skip_input = false);

// Uniform on [-b, b] with b = sqrt(6 / (fan_in + fan_out)); fans count every
// kernel tap. Bias is zeroed.
template <typename T>
Conv4DLayerT<T> glorot_init(Conv4DLayerT<T> layer, std::uint64_t seed);

double glorot_bound(Index in_channels, Index out_channels, Index taps);

using Conv4DLayer = Conv4DLayerT<double>;
using Conv4DGrads = Conv4DGradsT<double>;
using AgbnState = AgbnStateT<double>;
using AgbnGrads = AgbnGradsT<double>;

}  // namespace lf4d
