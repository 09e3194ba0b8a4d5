#pragma once

// Two-stage light-field super-resolution network.
//
//   head conv + LeakyReLU
//   restoration stage (residual blocks at input resolution)
//   upscale (channel expansion, angular interpolation, channel-to-space) + LeakyReLU
//   refinement stage (residual blocks at output resolution)
//   tail conv back to image channels
//   + optional global skip: bicubic spatial / linear angular upsampling of the input
//
// A residual block is conv -> AGBN -> LeakyReLU -> conv -> AGBN. How block
// outputs are chained inside a stage is set by the connection topology.

#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lf4d/ops.hpp"
#include "lf4d/tensor.hpp"

namespace lf4d {

enum class Connection { sequential, shared_source, dense };

std::string to_string(Connection c);
Connection parse_connection(const std::string& name);

struct ModelConfig {
  Index in_channels = 1;
  Index n_restoration = 5;
  Index n_refinement = 3;
  Index filters = 64;
  Index spatial_kernel = 3;
  Index angular_kernel = 5;
  Connection connection = Connection::sequential;
  Index r_s = 2;
  Index r_a = 1;
  double leaky_slope = kLeakySlope;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.9;
  bool global_skip = true;
  // Start the tail at zero so an untrained model reproduces the skip path.
  bool zero_tail = false;
  std::uint64_t seed = 1;

  void validate() const;
  // Assigns one field from its textual key; returns false for unknown keys.
  bool set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  bool operator==(const ModelConfig&) const = default;
};

// Closed-form trainable parameter count for a configuration.
Index parameter_count(const ModelConfig& config);

// Spatial halo, in input pixels, beyond which an input pixel cannot affect an
// output pixel (half-width of the receptive field, rounded up).
Index receptive_radius(const ModelConfig& config);

template <typename T>
struct ResidualBlockT {
  Conv4DLayerT<T> conv_a, conv_b;
  AgbnStateT<T> norm_a, norm_b;
};

template <typename T>
struct StageT {
  std::vector<ResidualBlockT<T>> blocks;
  // Dense topology only: fusions[k - 1] merges (y0, o_0..o_{k-1}) into the
  // input of block k; fusions.back() merges (y0, o_0..o_{K-1}) into the output.
  std::vector<Conv4DLayerT<T>> fusions;
};

template <typename T>
struct ParamView {
  std::string name;
  std::vector<Index> shape;
  std::span<T> values;
};

template <typename T>
struct ForwardTrace;

template <typename T>
class ModelT {
 public:
  ModelT() = default;
  // Glorot-initialized weights, zero bias, unit gamma, zero beta.
  explicit ModelT(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  FeatureTensorT<T> forward(const FeatureTensorT<T>& input, NormMode mode, ForwardTrace<T>* trace = nullptr);
  // Inference never touches running statistics.
  FeatureTensorT<T> infer(const FeatureTensorT<T>& input) const;

  // Accumulates parameter gradients into `grads`, a model with the same
  // configuration (see zeros_like).
  void backward(const ForwardTrace<T>& trace, const FeatureTensorT<T>& grad_output, ModelT& grads) const;

  ModelT zeros_like() const;

  // Trainable tensors in a fixed order; every tensor appears once.
  std::vector<ParamView<T>> parameters();
  // Trainable tensors followed by AGBN running statistics.
  std::vector<ParamView<T>> state();

  Conv4DLayerT<T> head, upscale_conv, tail;
  StageT<T> restoration, refinement;

 private:
  ModelConfig config_;
};

template <typename T>
struct BlockTrace {
  FeatureTensorT<T> x, a1, n1, r1, a2;
};

template <typename T>
struct StageTrace {
  FeatureTensorT<T> y0;
  std::vector<FeatureTensorT<T>> inputs;
  std::vector<BlockTrace<T>> blocks;
  std::vector<FeatureTensorT<T>> concats;
};

template <typename T>
struct ForwardTrace {
  NormMode mode = NormMode::train;
  FeatureTensorT<T> input, h0, r0, s1, u, ur, s2;
  StageTrace<T> restoration, refinement;
};

// p <- p - lr * g for every pair of enumerated tensors. With momentum m > 0,
// v <- m v + g and p <- p - lr v, where `velocity` holds v (sized on first use).
template <typename T>
void sgd_step(std::span<const ParamView<T>> params, std::span<const ParamView<T>> grads, double lr,
              double momentum = 0.0, std::vector<std::vector<T>>* velocity = nullptr);

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
template <typename T>
double clip_gradients(std::span<const ParamView<T>> grads, double max_norm);

struct TileSpec {
  // Tile extents in input pixels; 0 means the whole extent.
  Index height = 0;
  Index width = 0;
};

// Eval-mode inference on one light field, optionally in spatial tiles. Each
// tile is extended by receptive_radius() input pixels on every interior side,
// so the stitched result equals untiled inference.
template <typename T>
LightFieldT<T> super_resolve(const ModelT<T>& model, const LightFieldT<T>& field, TileSpec tiling = {});

// Checkpoint: text header (one key=value per ModelConfig field), an "end"
// line, then an LF4P parameter bundle holding trainable tensors and running
// statistics.
template <typename T>
void save_checkpoint(std::ostream& out, ModelT<T>& model);
template <typename T>
void save_checkpoint(const std::filesystem::path& path, ModelT<T>& model);

// Values stored at another precision are converted.
template <typename T>
ModelT<T> load_checkpoint(std::istream& in);
template <typename T>
ModelT<T> load_checkpoint(const std::filesystem::path& path);

using Model = ModelT<double>;

}  // namespace lf4d
