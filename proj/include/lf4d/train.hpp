#pragma once

// Training loop, configuration files and the evaluation protocol.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lf4d/data.hpp"
#include "lf4d/loss.hpp"
#include "lf4d/metrics.hpp"
#include "lf4d/network.hpp"

namespace lf4d {

enum class Precision { float32, float64 };

struct TrainConfig {
  ModelConfig model;

  double learning_rate = 1e-5;
  double lr_decay = 0.1;
  Index decay_every = 10;  // epochs
  double momentum = 0.0;
  double grad_clip = 0.0;  // joint L2 norm bound; 0 disables
  Index batch_size = 1;
  Index epochs = 30;
  // 0 means one step per training scene (times multi-range draws).
  Index steps_per_epoch = 0;
  // Total step budget; 0 means epochs * steps_per_epoch.
  Index steps = 0;

  LossWeights loss;
  std::uint64_t extractor_seed = 7;

  Index patch_spatial = 96;
  Index patch_angular = 5;
  bool multi_range = false;
  MultiRangeSpec multi_range_spec;
  // Blur and noise of the degradation; factors come from the model config.
  Index blur_window = 7;
  double blur_sigma = 1.2;
  double noise_sigma = 0.0;

  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  Precision precision = Precision::float64;

  std::filesystem::path checkpoint = "model.ckpt";
  Index checkpoint_every = 0;  // epochs; 0 saves only at the end
  std::filesystem::path log = "train.log";

  void validate() const;
  bool set(const std::string& key, const std::string& value);
  DegradeSpec degrade_spec() const;
};

// Flat key=value text, '#' comments. Every TrainConfig and ModelConfig field
// is nameable; unknown keys are errors. Relative paths stay relative to the
// working directory.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

// base * decay^floor(epoch / every)
double lr_schedule(Index epoch, double base = 1e-5, double decay = 0.1, Index every = 10);

template <typename T>
struct TrainResultT {
  ModelT<T> model;
  std::vector<double> losses;      // per step
  std::vector<double> val_psnr;    // per epoch, empty without validation scenes
};

// Deterministic given config seeds and worker count. Log lines (if `log` is
// set) are tab-separated: "step <i> epoch <e> lr <lr> loss <v>" and
// "epoch <e> val_psnr <db>".
template <typename T>
TrainResultT<T> train(const TrainConfig& config, const std::vector<LightField>& train_scenes,
                      const std::vector<LightField>& val_scenes, std::ostream* log = nullptr);

// Loads the manifest, holds out the last validation_fraction of scenes,
// trains at the configured precision and writes the checkpoint and log.
// Returns the per-step losses.
std::vector<double> train_from_manifest(const TrainConfig& config, const std::filesystem::path& manifest);

// Splits a scene count into (training, validation) counts.
std::pair<std::size_t, std::size_t> split_counts(std::size_t scenes, double validation_fraction);

// Per scene: crop to the aligned ground truth, degrade, super-resolve and
// score. Each scene yields a "model" row followed by a "bicubic" row.
std::vector<ReportRow> evaluate(const Model& model, const std::vector<ManifestEntry>& scenes,
                                const DegradeSpec& degrade_spec, TileSpec tiling = {});

ReportRow score(const std::string& scene, const std::string& method, const LightField& pred, const LightField& truth);

}  // namespace lf4d
