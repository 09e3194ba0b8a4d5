#include <filesystem>
#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "lf4d/io.hpp"
#include "lf4d/train.hpp"

namespace fs = std::filesystem;
using namespace lf4d;

namespace {

// Directories hold one PNG per view, anything else is an LF4D file. Output
// paths without an extension are written as PNG directories.
LightField load_field(const fs::path& p) { return fs::is_directory(p) ? read_views_png(p) : read_lf4d(p); }

void store_field(const fs::path& p, const LightField& f) {
  if (p.has_extension())
    write_lf4d(p, f);
  else
    write_views_png(p, f);
}

TileSpec tile_from(const std::vector<Index>& v) {
  if (v.empty()) return {};
  return {v[0], v[1]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Light-field super-resolution"};
  app.require_subcommand(1);

  fs::path config, data, model_path, in, out, report, scene, disparity_out;
  std::vector<Index> tile;
  Index rs = 2, ra = 1, window = 7;
  double noise = 0.0, sigma = 1.2;
  std::uint64_t seed = 0;
  bool no_blur = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file and a scene manifest");
  train_cmd->add_option("--config", config, "key=value configuration")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data, "Scene manifest")->required()->check(CLI::ExistingFile);

  auto* sr_cmd = app.add_subcommand("sr", "Super-resolve one light field");
  sr_cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  sr_cmd->add_option("--in", in, "Input LF4D file or PNG view directory")->required()->check(CLI::ExistingPath);
  sr_cmd->add_option("--out", out, "Output LF4D file, or a directory for PNG views")->required();
  sr_cmd->add_option("--tile", tile, "Tile height and width in input pixels")->expected(2);

  auto* deg_cmd = app.add_subcommand("degrade", "Blur, decimate and add noise");
  deg_cmd->add_option("--in", in)->required()->check(CLI::ExistingPath);
  deg_cmd->add_option("--out", out)->required();
  deg_cmd->add_option("--rs", rs, "Spatial factor")->required()->check(CLI::PositiveNumber);
  deg_cmd->add_option("--ra", ra, "Angular factor")->required()->check(CLI::PositiveNumber);
  deg_cmd->add_option("--sigma-noise", noise, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  deg_cmd->add_option("--blur-sigma", sigma)->check(CLI::PositiveNumber);
  deg_cmd->add_option("--blur-window", window)->check(CLI::PositiveNumber);
  deg_cmd->add_flag("--no-blur", no_blur);
  deg_cmd->add_option("--seed", seed, "Noise seed");

  auto* eval_cmd = app.add_subcommand("eval", "Score a model against bicubic on held-out scenes");
  eval_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data, "Scene manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", report, "Output TSV")->required();
  eval_cmd->add_option("--tile", tile)->expected(2);
  eval_cmd->add_option("--sigma-noise", noise)->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--blur-sigma", sigma)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--blur-window", window)->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic layered scene");
  synth_cmd->add_option("--scene", scene, "Scene description")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", out)->required();
  synth_cmd->add_option("--disparity", disparity_out, "Also write the visible-layer disparity");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const auto cfg = load_train_config(config);
      const auto losses = train_from_manifest(cfg, data);
      std::cout << "trained " << losses.size() << " steps, final loss " << losses.back() << ", checkpoint "
                << cfg.checkpoint.string() << '\n';
    } else if (*sr_cmd) {
      const auto model = load_checkpoint<double>(model_path);
      store_field(out, super_resolve(model, load_field(in), tile_from(tile)));
    } else if (*deg_cmd) {
      DegradeSpec d;
      d.r_s = rs;
      d.r_a = ra;
      d.noise_sigma = noise;
      d.sigma = sigma;
      d.window = window;
      d.blur = !no_blur;
      store_field(out, degrade(load_field(in), d, seed));
    } else if (*eval_cmd) {
      const auto model = load_checkpoint<double>(model_path);
      DegradeSpec d;
      d.r_s = model.config().r_s;
      d.r_a = model.config().r_a;
      d.noise_sigma = noise;
      d.sigma = sigma;
      d.window = window;
      const auto rows = evaluate(model, load_manifest(data), d, tile_from(tile));
      write_report(report, rows);
      write_report(std::cout, rows);
    } else if (*synth_cmd) {
      const auto spec = load_scene_spec(scene);
      const auto r = render_synthetic(spec.scene, spec.S, spec.T, spec.Y, spec.X);
      store_field(out, r.field);
      if (!disparity_out.empty()) write_lf4d(disparity_out, r.disparity);
    }
  } catch (const std::exception& e) {
    std::cerr << "lf4d: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
