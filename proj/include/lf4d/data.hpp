#pragma once

// Degradation, synthetic layered scenes, patch cropping, multi-range
// sampling and dataset manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lf4d/tensor.hpp"

namespace lf4d {

// Normalized separable Gaussian: 1D taps and their outer product.
std::vector<double> gaussian_taps(Index window, double sigma);
Grid<double, 2> gaussian_kernel(Index window, double sigma);

struct DegradeSpec {
  Index window = 7;
  double sigma = 1.2;
  bool blur = true;
  Index r_s = 2;
  Index r_a = 1;
  double noise_sigma = 0.0;
  void validate() const;
};

// Largest corner-anchored sub-field whose spatial extents are multiples of
// r_s and whose angular extents satisfy S = r_a (S' - 1) + 1. This is the
// ground truth aligned with degrade().
LightField crop_for_degrade(const LightField& field, Index r_s, Index r_a);

// Per view: Gaussian blur with reflective borders, keep every r_s-th pixel
// from index 0, add seeded iid Gaussian noise. Views are kept at stride r_a
// from the corner. The input is first cropped with crop_for_degrade.
LightField degrade(const LightField& field, const DegradeSpec& spec, std::uint64_t seed = 0);

// Keep every r_a-th view from (0, 0).
LightField decimate_views(const LightField& field, Index r_a);

// ---------------------------------------------------------------------------
// Synthetic layered scenes

enum class LayerShape { plane, disk, rect };

struct SceneLayer {
  LayerShape shape = LayerShape::plane;
  // Pixels of shift per view step; view (s, t) sees layer point
  // (y - d (t - ct), x - d (s - cs)) at pixel (y, x), with (cs, ct) the center view.
  double disparity = 0.0;
  // Disk: center and radius. Rect: center and half extents. In layer
  // coordinates, which coincide with center-view pixels.
  double cy = 0, cx = 0, radius = 0, half_h = 0, half_w = 0;
  std::uint64_t texture_seed = 1;
};

struct SyntheticScene {
  Index channels = 1;
  // Back to front; later layers occlude earlier ones.
  std::vector<SceneLayer> layers;
  // Largest permitted layer shift in pixels.
  double max_shift = 16.0;
};

struct RenderedScene {
  LightField field;
  // Disparity of the visible layer, (s, t, y, x) with one channel.
  LightField disparity;
};

RenderedScene render_synthetic(const SyntheticScene& scene, Index S, Index T, Index Y, Index X);

// Background plane plus one to three occluders with increasing disparity.
SyntheticScene random_scene(std::uint64_t seed, Index Y, Index X, Index channels = 1);

// Text scene description: one directive per line, whitespace-separated
// key=value tokens, '#' starts a comment.
//   size S=5 T=5 Y=64 X=64
//   channels 1
//   random seed=3                      (replaces the layer list)
//   layer shape=plane disparity=0.5 seed=11
//   layer shape=disk disparity=2 cy=30 cx=32 radius=12 seed=9
//   layer shape=rect disparity=1 cy=20 cx=40 half_h=8 half_w=6 seed=4
struct SceneSpec {
  SyntheticScene scene;
  Index S = 5, T = 5, Y = 64, X = 64;
};

SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sampling

struct PatchOrigin {
  Index s = 0, t = 0, y = 0, x = 0;
};

// Uniform random crop with the given extents, deterministic in seed.
PatchOrigin sample_patch_origin(const Extents<5>& field, Index patch_spatial, Index patch_angular,
                                std::uint64_t seed);
LightField crop(const LightField& field, const PatchOrigin& origin, Index patch_spatial, Index patch_angular);
LightField sample_patch(const LightField& field, Index patch_spatial = 96, Index patch_angular = 5,
                        std::uint64_t seed = 0);

struct MultiRangeSpec {
  double scale_min = 0.8;
  double scale_max = 1.0;
  // Configurations drawn per scene and epoch.
  Index draws = 5;
  // Selected views per angular axis (odd).
  Index views = 5;
  void validate() const;
};

// Views {center + k range : k = -w..w}, w = (views - 1) / 2. Throws if any
// falls outside [0, extent).
std::vector<Index> select_views(Index extent, Index center, Index range, Index views);

struct MultiRangeSample {
  LightField field;
  double scale = 1.0;
  Index center_s = 0, center_t = 0, range = 1;
};

// Uniform over feasible (center_s, center_t, range) with the same range on
// both axes, then bicubic spatial rescale by a factor uniform in
// [scale_min, scale_max].
MultiRangeSample multi_range_sample(const LightField& field, const MultiRangeSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Manifests: one scene per line, "path [key=value ...]"; '#' comments.
// Relative paths resolve against the manifest's directory. The scene id
// defaults to the file stem; "id=" overrides it.

struct ManifestEntry {
  std::filesystem::path path;
  std::string id;
  std::map<std::string, std::string> metadata;
};

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace lf4d
