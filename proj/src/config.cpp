#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lf4d/train.hpp"
#include "text.hpp"

namespace lf4d {

void TrainConfig::validate() const {
  model.validate();
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("TrainConfig: " + msg);
  };
  require(learning_rate > 0, "learning_rate must be positive");
  require(lr_decay > 0, "lr_decay must be positive");
  require(decay_every >= 1, "decay_every must be >= 1");
  require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
  require(grad_clip >= 0, "grad_clip must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(steps_per_epoch >= 0 && steps >= 0, "step counts must be >= 0");
  require(patch_spatial >= 1 && patch_angular >= 1, "patch extents must be >= 1");
  require(patch_spatial % model.r_s == 0, "patch_spatial must be a multiple of r_s");
  require((patch_angular - 1) % model.r_a == 0, "patch_angular - 1 must be a multiple of r_a");
  require(validation_fraction >= 0 && validation_fraction < 1, "validation_fraction must be in [0, 1)");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  loss.validate();
  multi_range_spec.validate();
  degrade_spec().validate();
}

DegradeSpec TrainConfig::degrade_spec() const {
  DegradeSpec d;
  d.window = blur_window;
  d.sigma = blur_sigma;
  d.r_s = model.r_s;
  d.r_a = model.r_a;
  d.noise_sigma = noise_sigma;
  return d;
}

bool TrainConfig::set(const std::string& key, const std::string& v) {
  using namespace text;
  if (model.set(key, v)) return true;
  if (key == "learning_rate") learning_rate = to_double(key, v);
  else if (key == "lr_decay") lr_decay = to_double(key, v);
  else if (key == "decay_every") decay_every = to_index(key, v);
  else if (key == "momentum") momentum = to_double(key, v);
  else if (key == "grad_clip") grad_clip = to_double(key, v);
  else if (key == "batch_size") batch_size = to_index(key, v);
  else if (key == "epochs") epochs = to_index(key, v);
  else if (key == "steps_per_epoch") steps_per_epoch = to_index(key, v);
  else if (key == "steps") steps = to_index(key, v);
  else if (key == "loss_alpha") loss.alpha = to_double(key, v);
  else if (key == "loss_beta") loss.beta = to_double(key, v);
  else if (key == "extractor_seed") extractor_seed = static_cast<std::uint64_t>(to_index(key, v));
  else if (key == "patch_spatial") patch_spatial = to_index(key, v);
  else if (key == "patch_angular") patch_angular = to_index(key, v);
  else if (key == "multi_range") multi_range = to_bool(key, v);
  else if (key == "multi_range_scale_min") multi_range_spec.scale_min = to_double(key, v);
  else if (key == "multi_range_scale_max") multi_range_spec.scale_max = to_double(key, v);
  else if (key == "multi_range_draws") multi_range_spec.draws = to_index(key, v);
  else if (key == "multi_range_views") multi_range_spec.views = to_index(key, v);
  else if (key == "blur_window") blur_window = to_index(key, v);
  else if (key == "blur_sigma") blur_sigma = to_double(key, v);
  else if (key == "noise_sigma") noise_sigma = to_double(key, v);
  else if (key == "validation_fraction") validation_fraction = to_double(key, v);
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_index(key, v));
  else if (key == "precision") {
    if (v == "float32") precision = Precision::float32;
    else if (v == "float64") precision = Precision::float64;
    else throw std::invalid_argument("precision: expected float32 or float64, got '" + v + "'");
  } else if (key == "checkpoint") checkpoint = v;
  else if (key == "checkpoint_every") checkpoint_every = to_index(key, v);
  else if (key == "log") log = v;
  else return false;
  return true;
}

TrainConfig parse_train_config(const std::string& content) {
  TrainConfig cfg;
  std::istringstream in(content);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key=value");
    const std::string key = text::trim(line.substr(0, eq)), value = text::trim(line.substr(eq + 1));
    if (!cfg.set(key, value))
      throw std::invalid_argument("config line " + std::to_string(number) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_train_config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

double lr_schedule(Index epoch, double base, double decay, Index every) {
  if (epoch < 0 || every < 1) throw std::invalid_argument("lr_schedule: bad epoch or interval");
  return base * std::pow(decay, static_cast<double>(epoch / every));
}

}  // namespace lf4d
