#include "lf4d/train.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "lf4d/io.hpp"
#include "lf4d/resample.hpp"
#include "text.hpp"

namespace lf4d {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Pair {
  LightField low, high;
};

// One training example: optional multi-range draw, random crop, degradation.
Pair draw_example(const TrainConfig& cfg, const std::vector<LightField>& scenes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto idx = std::uniform_int_distribution<std::size_t>(0, scenes.size() - 1)(rng);
  const LightField* src = &scenes[idx];
  LightField ranged;
  if (cfg.multi_range) {
    ranged = multi_range_sample(*src, cfg.multi_range_spec, rng()).field;
    src = &ranged;
  }
  const auto patch = sample_patch(*src, cfg.patch_spatial, cfg.patch_angular, rng());
  Pair p;
  p.high = crop_for_degrade(patch, cfg.model.r_s, cfg.model.r_a);
  p.low = degrade(p.high, cfg.degrade_spec(), rng());
  return p;
}

template <typename T>
double validate_psnr(const ModelT<T>& model, const TrainConfig& cfg, const std::vector<LightField>& scenes) {
  double sum = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto truth = crop_for_degrade(scenes[i], cfg.model.r_s, cfg.model.r_a);
    const auto low = degrade(truth, cfg.degrade_spec(), mix(cfg.seed, 0xA11DA7E + i));
    const auto sr = super_resolve(model, low.cast<T>()).template cast<double>();
    sum += mean_psnr(sr, truth);
  }
  return sum / static_cast<double>(scenes.size());
}

}  // namespace

std::pair<std::size_t, std::size_t> split_counts(std::size_t scenes, double validation_fraction) {
  if (scenes < 2 || validation_fraction <= 0) return {scenes, 0};
  auto val = static_cast<std::size_t>(std::ceil(static_cast<double>(scenes) * validation_fraction - 1e-9));
  val = std::min(val, scenes - 1);
  return {scenes - val, val};
}

template <typename T>
TrainResultT<T> train(const TrainConfig& cfg, const std::vector<LightField>& train_scenes,
                      const std::vector<LightField>& val_scenes, std::ostream* log) {
  cfg.validate();
  if (train_scenes.empty()) throw std::invalid_argument("train: no training scenes");
  for (const auto* set : {&train_scenes, &val_scenes})
    for (const auto& s : *set)
      if (s.extent(axis::C) != cfg.model.in_channels)
        throw std::invalid_argument("train: scene channel count does not match in_channels");

  TrainResultT<T> result{ModelT<T>(cfg.model), {}, {}};
  auto& model = result.model;
  const RandomConvExtractorT<T> extractor(cfg.model.in_channels, cfg.extractor_seed);
  const Index per_epoch = cfg.steps_per_epoch > 0
                              ? cfg.steps_per_epoch
                              : static_cast<Index>(train_scenes.size()) * (cfg.multi_range ? cfg.multi_range_spec.draws : 1);
  const Index total = cfg.steps > 0 ? cfg.steps : cfg.epochs * per_epoch;
  ModelT<T> grads = model.zeros_like();
  std::vector<std::vector<T>> velocity;

  for (Index step = 0; step < total; ++step) {
    const Index epoch = step / per_epoch;
    const double lr = lr_schedule(epoch, cfg.learning_rate, cfg.lr_decay, cfg.decay_every);

    std::vector<LightFieldT<T>> lows, highs;
    for (Index b = 0; b < cfg.batch_size; ++b) {
      auto ex = draw_example(cfg, train_scenes, mix(cfg.seed, static_cast<std::uint64_t>(step * cfg.batch_size + b)));
      lows.push_back(ex.low.cast<T>());
      highs.push_back(ex.high.cast<T>());
    }
    const auto input = pack_batch<T>(lows);
    const auto truth = pack_batch<T>(highs);

    ForwardTrace<T> trace;
    const auto pred = model.forward(input, NormMode::train, &trace);
    const auto loss = combined_loss(pred, truth, cfg.loss, extractor);
    if (!std::isfinite(loss.value)) throw std::runtime_error("train: loss diverged at step " + std::to_string(step));

    auto gview = grads.parameters();
    for (auto& g : gview) std::fill(g.values.begin(), g.values.end(), T(0));
    model.backward(trace, loss.grad, grads);
    if (cfg.grad_clip > 0) clip_gradients<T>(gview, cfg.grad_clip);
    const auto pview = model.parameters();
    sgd_step<T>(pview, gview, lr, cfg.momentum, &velocity);

    result.losses.push_back(loss.value);
    if (log)
      *log << "step\t" << step << "\tepoch\t" << epoch << "\tlr\t" << text::exact(lr) << "\tloss\t"
           << text::exact(loss.value) << '\n';

    const bool epoch_end = (step + 1) % per_epoch == 0 || step + 1 == total;
    if (epoch_end) {
      if (!val_scenes.empty()) {
        const double v = validate_psnr(model, cfg, val_scenes);
        result.val_psnr.push_back(v);
        if (log) *log << "epoch\t" << epoch << "\tval_psnr\t" << text::exact(v) << '\n';
      }
      if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) save_checkpoint(cfg.checkpoint, model);
    }
  }
  if (log) log->flush();
  return result;
}

std::vector<double> train_from_manifest(const TrainConfig& cfg, const std::filesystem::path& manifest) {
  cfg.validate();
  const auto entries = load_manifest(manifest);
  if (entries.empty()) throw std::invalid_argument("train: manifest " + manifest.string() + " lists no scenes");
  const auto [n_train, n_val] = split_counts(entries.size(), cfg.validation_fraction);
  std::vector<LightField> train_scenes, val_scenes;
  for (std::size_t i = 0; i < entries.size(); ++i)
    (i < n_train ? train_scenes : val_scenes).push_back(read_lf4d(entries[i].path));

  std::ofstream log(cfg.log);
  if (!log) throw std::runtime_error("train: cannot open log " + cfg.log.string());
  if (cfg.precision == Precision::float32) {
    auto r = train<float>(cfg, train_scenes, val_scenes, &log);
    save_checkpoint(cfg.checkpoint, r.model);
    return r.losses;
  }
  auto r = train<double>(cfg, train_scenes, val_scenes, &log);
  save_checkpoint(cfg.checkpoint, r.model);
  return r.losses;
}

ReportRow score(const std::string& scene, const std::string& method, const LightField& pred, const LightField& truth) {
  ReportRow r{scene, method, mean_psnr(pred, truth), std::numeric_limits<double>::quiet_NaN()};
  if (truth.extent(axis::Y) >= 11 && truth.extent(axis::X) >= 11) r.ssim = mean_ssim(pred, truth);
  return r;
}

std::vector<ReportRow> evaluate(const Model& model, const std::vector<ManifestEntry>& scenes,
                                const DegradeSpec& spec, TileSpec tiling) {
  const auto& cfg = model.config();
  if (spec.r_s != cfg.r_s || spec.r_a != cfg.r_a)
    throw std::invalid_argument("evaluate: degradation factors differ from the model's scale factors");
  std::vector<ReportRow> rows;
  for (const auto& e : scenes) {
    const auto truth = crop_for_degrade(read_lf4d(e.path), cfg.r_s, cfg.r_a);
    const auto low = degrade(truth, spec, 0);
    rows.push_back(score(e.id, "model", super_resolve(model, low, tiling), truth));
    rows.push_back(score(e.id, "bicubic", as_field(upsample_baseline(as_batch(low), cfg.r_s, cfg.r_a)), truth));
  }
  return rows;
}

template TrainResultT<float> train(const TrainConfig&, const std::vector<LightField>&, const std::vector<LightField>&,
                                   std::ostream*);
template TrainResultT<double> train(const TrainConfig&, const std::vector<LightField>&,
                                    const std::vector<LightField>&, std::ostream*);

}  // namespace lf4d
