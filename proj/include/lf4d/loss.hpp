#pragma once

// Training objective: weighted sum of a perceptual spatial loss and a raw
// squared-error angular loss.
//
//   angular  = sum over (n, c, s, t, y, x) of (pred - truth)^2
//   spatial  = sum over n of (1 / S T) sum over views |f(pred_v) - f(truth_v)|^2
//   combined = alpha * spatial + beta * angular
//
// f is a frozen per-view feature extractor.

#include <cstdint>
#include <memory>
#include <vector>

#include "lf4d/ops.hpp"
#include "lf4d/tensor.hpp"

namespace lf4d {

struct LossWeights {
  double alpha = 1.0;  // spatial
  double beta = 1.0;   // angular
  void validate() const;
};

template <typename T>
struct LossResult {
  double value = 0.0;
  FeatureTensorT<T> grad;  // d value / d pred
};

// Per-view feature map. Implementations are immutable after construction.
template <typename T>
class FeatureExtractorT {
 public:
  struct Trace {
    std::vector<FeatureTensorT<T>> tensors;
  };

  virtual ~FeatureExtractorT() = default;
  // Smallest view extent the extractor accepts.
  virtual Index receptive_field() const = 0;
  virtual FeatureTensorT<T> forward(const FeatureTensorT<T>& views, Trace* trace) const = 0;
  // Gradient with respect to the views given the gradient of the features.
  virtual FeatureTensorT<T> backward(const Trace& trace, const FeatureTensorT<T>& grad_features) const = 0;
};

// Three unpadded 3x3 convolutions (C -> 8 -> 16 -> 16), each followed by
// LeakyReLU, with seeded Glorot weights. Receptive field 7.
template <typename T>
class RandomConvExtractorT final : public FeatureExtractorT<T> {
 public:
  explicit RandomConvExtractorT(Index channels, std::uint64_t seed = 7);

  using typename FeatureExtractorT<T>::Trace;
  Index receptive_field() const override { return 7; }
  FeatureTensorT<T> forward(const FeatureTensorT<T>& views, Trace* trace) const override;
  FeatureTensorT<T> backward(const Trace& trace, const FeatureTensorT<T>& grad_features) const override;

  const std::vector<Conv4DLayerT<T>>& layers() const { return layers_; }

 private:
  std::vector<Conv4DLayerT<T>> layers_;
};

template <typename T>
LossResult<T> angular_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth);

template <typename T>
LossResult<T> spatial_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth,
                           const FeatureExtractorT<T>& f);

template <typename T>
LossResult<T> combined_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth, const LossWeights& w,
                            const FeatureExtractorT<T>& f);

// Single light-field conveniences; the gradient has batch extent 1.
LossResult<double> angular_loss(const LightField& pred, const LightField& truth);
LossResult<double> spatial_loss(const LightField& pred, const LightField& truth, const FeatureExtractorT<double>& f);
LossResult<double> combined_loss(const LightField& pred, const LightField& truth, const LossWeights& w,
                                 const FeatureExtractorT<double>& f);

using FeatureExtractor = FeatureExtractorT<double>;
using RandomConvExtractor = RandomConvExtractorT<double>;

}  // namespace lf4d
