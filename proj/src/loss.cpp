#include "lf4d/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lf4d {

void LossWeights::validate() const {
  if (!(alpha >= 0) || !(beta >= 0)) throw std::invalid_argument("LossWeights: weights must be non-negative");
  if (alpha == 0 && beta == 0) throw std::invalid_argument("LossWeights: alpha and beta are both zero");
}

namespace {

template <typename T>
void require_same(const FeatureTensorT<T>& a, const FeatureTensorT<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
}

// Squared norm accumulated in double with eight interleaved partial sums.
template <typename T>
double squared_norm(std::span<const T> v) {
  double acc[8] = {};
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int k = 0; k < 8; ++k) acc[k] += static_cast<double>(v[i + k]) * static_cast<double>(v[i + k]);
  for (; i < n; ++i) acc[i % 8] += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

template <typename T>
RandomConvExtractorT<T>::RandomConvExtractorT(Index channels, std::uint64_t seed) {
  const Index widths[4] = {channels, 8, 16, 16};
  for (int k = 0; k < 3; ++k)
    layers_.push_back(glorot_init(Conv4DLayerT<T>(widths[k], widths[k + 1], 1, 1, 3, 3), seed * 31 + k));
}

template <typename T>
FeatureTensorT<T> RandomConvExtractorT<T>::forward(const FeatureTensorT<T>& views, Trace* trace) const {
  const auto& e = views.shape();
  if (e[faxis::Y] < receptive_field() || e[faxis::X] < receptive_field())
    throw std::invalid_argument("feature extractor: views smaller than the receptive field (" +
                                std::to_string(receptive_field()) + ")");
  const T alpha = static_cast<T>(kLeakySlope);
  if (trace) trace->tensors.clear();
  FeatureTensorT<T> x = views;
  for (const auto& layer : layers_) {
    auto z = conv4d_forward(x, layer);
    if (trace) {
      trace->tensors.push_back(std::move(x));
      trace->tensors.push_back(z);
    }
    x = leaky_relu(z, alpha);
  }
  return x;
}

template <typename T>
FeatureTensorT<T> RandomConvExtractorT<T>::backward(const Trace& trace, const FeatureTensorT<T>& grad) const {
  if (trace.tensors.size() != 2 * layers_.size()) throw std::invalid_argument("feature extractor: bad trace");
  const T alpha = static_cast<T>(kLeakySlope);
  FeatureTensorT<T> g = grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    g = leaky_relu_backward(trace.tensors[2 * k + 1], g, alpha);
    g = conv4d_backward(trace.tensors[2 * k], layers_[k], g).input;
  }
  return g;
}

template <typename T>
LossResult<T> angular_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth) {
  require_same(pred, truth, "angular_loss");
  LossResult<T> r;
  r.grad = pred - truth;
  r.value = squared_norm<T>(r.grad.values());
  r.grad *= T(2);
  return r;
}

template <typename T>
LossResult<T> spatial_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth,
                           const FeatureExtractorT<T>& f) {
  require_same(pred, truth, "spatial_loss");
  typename FeatureExtractorT<T>::Trace trace;
  auto fp = f.forward(pred, &trace);
  const auto ft = f.forward(truth, nullptr);
  fp -= ft;
  const double views = static_cast<double>(pred.extent(faxis::S) * pred.extent(faxis::T));
  LossResult<T> r;
  r.value = squared_norm<T>(fp.values()) / views;
  fp *= static_cast<T>(2.0 / views);
  r.grad = f.backward(trace, fp);
  return r;
}

template <typename T>
LossResult<T> combined_loss(const FeatureTensorT<T>& pred, const FeatureTensorT<T>& truth, const LossWeights& w,
                            const FeatureExtractorT<T>& f) {
  w.validate();
  LossResult<T> r;
  r.grad = FeatureTensorT<T>(pred.shape());
  if (w.alpha != 0) {
    auto s = spatial_loss(pred, truth, f);
    r.value += w.alpha * s.value;
    s.grad *= static_cast<T>(w.alpha);
    r.grad += s.grad;
  }
  if (w.beta != 0) {
    auto a = angular_loss(pred, truth);
    r.value += w.beta * a.value;
    a.grad *= static_cast<T>(w.beta);
    r.grad += a.grad;
  }
  return r;
}

LossResult<double> angular_loss(const LightField& pred, const LightField& truth) {
  return angular_loss(as_batch(pred), as_batch(truth));
}

LossResult<double> spatial_loss(const LightField& pred, const LightField& truth, const FeatureExtractorT<double>& f) {
  return spatial_loss(as_batch(pred), as_batch(truth), f);
}

LossResult<double> combined_loss(const LightField& pred, const LightField& truth, const LossWeights& w,
                                 const FeatureExtractorT<double>& f) {
  return combined_loss(as_batch(pred), as_batch(truth), w, f);
}

#define LF4D_INSTANTIATE_LOSS(T)                                                                         \
  template class RandomConvExtractorT<T>;                                                                \
  template LossResult<T> angular_loss(const FeatureTensorT<T>&, const FeatureTensorT<T>&);               \
  template LossResult<T> spatial_loss(const FeatureTensorT<T>&, const FeatureTensorT<T>&,                \
                                      const FeatureExtractorT<T>&);                                      \
  template LossResult<T> combined_loss(const FeatureTensorT<T>&, const FeatureTensorT<T>&, const LossWeights&, \
                                       const FeatureExtractorT<T>&);

LF4D_INSTANTIATE_LOSS(float)
LF4D_INSTANTIATE_LOSS(double)

#undef LF4D_INSTANTIATE_LOSS

}  // namespace lf4d
