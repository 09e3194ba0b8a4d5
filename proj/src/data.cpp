#include "lf4d/data.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lf4d/resample.hpp"

namespace lf4d {

std::vector<double> gaussian_taps(Index window, double sigma) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("gaussian_kernel: window must be odd and positive");
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  std::vector<double> taps(static_cast<std::size_t>(window));
  const Index h = window / 2;
  double sum = 0.0;
  for (Index k = 0; k < window; ++k) {
    const double d = static_cast<double>(k - h);
    taps[static_cast<std::size_t>(k)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(k)];
  }
  for (double& v : taps) v /= sum;
  return taps;
}

Grid<double, 2> gaussian_kernel(Index window, double sigma) {
  const auto g = gaussian_taps(window, sigma);
  Grid<double, 2> k({window, window});
  for (Index i = 0; i < window; ++i)
    for (Index j = 0; j < window; ++j) k(i, j) = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
  return k;
}

void DegradeSpec::validate() const {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("DegradeSpec: window must be odd");
  if (!(sigma > 0)) throw std::invalid_argument("DegradeSpec: sigma must be positive");
  if (r_s < 1 || r_a < 1) throw std::invalid_argument("DegradeSpec: factors must be >= 1");
  if (!(noise_sigma >= 0)) throw std::invalid_argument("DegradeSpec: noise sigma must be >= 0");
}

namespace {

// Mirror without repeating the edge sample: -1 -> 1, n -> n - 2.
Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Grid<double, 2> blur(const Grid<double, 2>& img, const std::vector<double>& g) {
  const Index H = img.extent(0), W = img.extent(1), h = static_cast<Index>(g.size()) / 2;
  Grid<double, 2> tmp({H, W}), out({H, W});
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      double s = 0.0;
      for (Index k = -h; k <= h; ++k) s += g[static_cast<std::size_t>(k + h)] * img(y, reflect(x + k, W));
      tmp(y, x) = s;
    }
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      double s = 0.0;
      for (Index k = -h; k <= h; ++k) s += g[static_cast<std::size_t>(k + h)] * tmp(reflect(y + k, H), x);
      out(y, x) = s;
    }
  return out;
}

LightField sub_field(const LightField& f, Index S, Index T, Index Y, Index X) {
  const auto& e = f.shape();
  LightField out({e[0], S, T, Y, X});
  for (Index c = 0; c < e[0]; ++c)
    for (Index s = 0; s < S; ++s)
      for (Index t = 0; t < T; ++t)
        for (Index y = 0; y < Y; ++y) std::copy(&f(c, s, t, y, 0), &f(c, s, t, y, 0) + X, &out(c, s, t, y, 0));
  return out;
}

}  // namespace

LightField crop_for_degrade(const LightField& field, Index r_s, Index r_a) {
  if (r_s < 1 || r_a < 1) throw std::invalid_argument("crop_for_degrade: factors must be >= 1");
  const auto& e = field.shape();
  const Index Y = e[axis::Y] / r_s * r_s, X = e[axis::X] / r_s * r_s;
  const Index S = (e[axis::S] - 1) / r_a * r_a + 1, T = (e[axis::T] - 1) / r_a * r_a + 1;
  if (Y == 0 || X == 0) throw std::invalid_argument("crop_for_degrade: spatial extent smaller than the factor");
  if (Y == e[axis::Y] && X == e[axis::X] && S == e[axis::S] && T == e[axis::T]) return field;
  return sub_field(field, S, T, Y, X);
}

LightField decimate_views(const LightField& field, Index r_a) {
  if (r_a < 1) throw std::invalid_argument("decimate_views: factor must be >= 1");
  const auto& e = field.shape();
  const Index S = (e[axis::S] - 1) / r_a + 1, T = (e[axis::T] - 1) / r_a + 1;
  LightField out({e[0], S, T, e[3], e[4]});
  for (Index c = 0; c < e[0]; ++c)
    for (Index s = 0; s < S; ++s)
      for (Index t = 0; t < T; ++t) set_view_image(out, c, s, t, view_image(field, c, s * r_a, t * r_a));
  return out;
}

LightField degrade(const LightField& field, const DegradeSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto views = decimate_views(crop_for_degrade(field, spec.r_s, spec.r_a), spec.r_a);
  const auto& e = views.shape();
  const Index Y = e[axis::Y] / spec.r_s, X = e[axis::X] / spec.r_s;
  LightField out({e[0], e[1], e[2], Y, X});
  const auto g = gaussian_taps(spec.window, spec.sigma);
  for (Index c = 0; c < e[0]; ++c)
    for_each_view(views, [&](Index s, Index t) {
      auto img = view_image(views, c, s, t);
      if (spec.blur) img = blur(img, g);
      for (Index y = 0; y < Y; ++y)
        for (Index x = 0; x < X; ++x) out(c, s, t, y, x) = img(y * spec.r_s, x * spec.r_s);
    });
  if (spec.noise_sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : out) v += noise(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

struct Blob {
  double cy, cx, radius, value;
};

struct Wave {
  double fy, fx, phase, amp;
  bool square;
};

// Procedural texture over layer coordinates: a base level, smooth and
// square-wave gratings, and soft-edged blobs.
struct Texture {
  double base = 0.5;
  std::vector<Wave> waves;
  std::vector<Blob> blobs;

  Texture(std::uint64_t seed, double extent_y, double extent_x, double margin) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    base = 0.25 + 0.5 * u(rng);
    const int n_waves = 2 + static_cast<int>(u(rng) * 2.0);
    for (int k = 0; k < n_waves; ++k) {
      const double theta = u(rng) * 3.141592653589793;
      const double f = 0.15 + 0.6 * u(rng);
      waves.push_back({f * std::sin(theta), f * std::cos(theta), u(rng) * 6.283185307179586, 0.04 + 0.1 * u(rng),
                       k == 0});
    }
    const int n_blobs = 6 + static_cast<int>(u(rng) * 6.0);
    for (int k = 0; k < n_blobs; ++k) {
      const double cy = -margin + u(rng) * (extent_y + 2 * margin);
      const double cx = -margin + u(rng) * (extent_x + 2 * margin);
      blobs.push_back({cy, cx, 1.5 + 6.0 * u(rng), (u(rng) - 0.5) * 0.6});
    }
  }

  double operator()(double y, double x) const {
    double v = base;
    for (const auto& w : waves) {
      const double s = std::sin(w.fy * y + w.fx * x + w.phase);
      v += w.amp * (w.square ? std::tanh(4.0 * s) : s);
    }
    for (const auto& b : blobs) {
      const double d = std::hypot(y - b.cy, x - b.cx);
      v += b.value * std::clamp(0.5 + (b.radius - d), 0.0, 1.0);
    }
    return std::clamp(v, 0.0, 1.0);
  }
};

double coverage(const SceneLayer& l, double y, double x) {
  switch (l.shape) {
    case LayerShape::plane: return 1.0;
    case LayerShape::disk: return std::clamp(0.5 + (l.radius - std::hypot(y - l.cy, x - l.cx)), 0.0, 1.0);
    case LayerShape::rect:
      return std::clamp(0.5 + (l.half_h - std::abs(y - l.cy)), 0.0, 1.0) *
             std::clamp(0.5 + (l.half_w - std::abs(x - l.cx)), 0.0, 1.0);
  }
  return 0.0;
}

std::uint64_t channel_seed(std::uint64_t seed, Index c) { return seed * 1000003ull + static_cast<std::uint64_t>(c); }

}  // namespace

RenderedScene render_synthetic(const SyntheticScene& scene, Index S, Index T, Index Y, Index X) {
  if (scene.channels < 1) throw std::invalid_argument("render_synthetic: channels must be >= 1");
  if (scene.layers.empty()) throw std::invalid_argument("render_synthetic: scene has no layers");
  const double cs = static_cast<double>(S - 1) / 2.0, ct = static_cast<double>(T - 1) / 2.0;
  const double reach = std::max(cs, ct);
  for (const auto& l : scene.layers) {
    if (!std::isfinite(l.disparity)) throw std::invalid_argument("render_synthetic: non-finite disparity");
    if (std::abs(l.disparity) * reach > scene.max_shift)
      throw std::invalid_argument("render_synthetic: layer shift exceeds the texture margin");
  }
  std::vector<std::vector<Texture>> textures;
  for (const auto& l : scene.layers) {
    std::vector<Texture> per_channel;
    for (Index c = 0; c < scene.channels; ++c)
      per_channel.emplace_back(channel_seed(l.texture_seed, c), static_cast<double>(Y), static_cast<double>(X),
                               scene.max_shift);
    textures.push_back(std::move(per_channel));
  }
  RenderedScene out{LightField({scene.channels, S, T, Y, X}), LightField({1, S, T, Y, X})};
  std::vector<double> value(static_cast<std::size_t>(scene.channels));
  for (Index s = 0; s < S; ++s)
    for (Index t = 0; t < T; ++t)
      for (Index y = 0; y < Y; ++y)
        for (Index x = 0; x < X; ++x) {
          std::fill(value.begin(), value.end(), 0.0);
          double disparity = scene.layers.front().disparity;
          for (std::size_t k = 0; k < scene.layers.size(); ++k) {
            const auto& l = scene.layers[k];
            const double ly = static_cast<double>(y) - l.disparity * (static_cast<double>(t) - ct);
            const double lx = static_cast<double>(x) - l.disparity * (static_cast<double>(s) - cs);
            const double a = coverage(l, ly, lx);
            if (a <= 0.0) continue;
            for (Index c = 0; c < scene.channels; ++c)
              value[static_cast<std::size_t>(c)] =
                  (1.0 - a) * value[static_cast<std::size_t>(c)] + a * textures[k][static_cast<std::size_t>(c)](ly, lx);
            if (a >= 0.5) disparity = l.disparity;
          }
          for (Index c = 0; c < scene.channels; ++c) out.field(c, s, t, y, x) = value[static_cast<std::size_t>(c)];
          out.disparity(0, s, t, y, x) = disparity;
        }
  return out;
}

SyntheticScene random_scene(std::uint64_t seed, Index Y, Index X, Index channels) {
  std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticScene scene;
  scene.channels = channels;
  SceneLayer bg;
  bg.disparity = -1.0 + 1.5 * u(rng);
  bg.texture_seed = rng();
  scene.layers.push_back(bg);
  const int n = 1 + static_cast<int>(u(rng) * 3.0);
  double d = bg.disparity;
  const double size = static_cast<double>(std::min(Y, X));
  for (int k = 0; k < n; ++k) {
    SceneLayer l;
    d += 0.3 + 0.7 * u(rng);
    l.disparity = d;
    l.shape = u(rng) < 0.5 ? LayerShape::disk : LayerShape::rect;
    l.cy = u(rng) * static_cast<double>(Y);
    l.cx = u(rng) * static_cast<double>(X);
    l.radius = size * (0.12 + 0.18 * u(rng));
    l.half_h = size * (0.08 + 0.2 * u(rng));
    l.half_w = size * (0.08 + 0.2 * u(rng));
    l.texture_seed = rng();
    scene.layers.push_back(l);
  }
  return scene;
}

namespace {

std::map<std::string, std::string> parse_tokens(std::istringstream& ls, const std::string& line) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("expected key=value, got '" + tok + "' in '" + line + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t used = 0;
  const double v = std::stod(it->second, &used);
  if (used != it->second.size()) throw std::invalid_argument(key + ": bad number '" + it->second + "'");
  return v;
}

Index to_index(const std::map<std::string, std::string>& kv, const std::string& key, Index fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t used = 0;
  const long long v = std::stoll(it->second, &used);
  if (used != it->second.size()) throw std::invalid_argument(key + ": bad integer '" + it->second + "'");
  return static_cast<Index>(v);
}

void reject_unknown(const std::map<std::string, std::string>& kv, std::initializer_list<const char*> known,
                    const std::string& directive) {
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw std::invalid_argument("scene spec: unknown key '" + k + "' for '" + directive + "'");
  }
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  bool random = false;
  std::uint64_t random_seed = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string directive;
    if (!(ls >> directive)) continue;
    if (directive == "channels" || directive == "max_shift") {
      std::string v;
      if (!(ls >> v)) throw std::invalid_argument("scene spec: '" + directive + "' needs a value");
      if (directive == "channels") spec.scene.channels = std::stol(v);
      else spec.scene.max_shift = std::stod(v);
      continue;
    }
    const auto kv = parse_tokens(ls, line);
    if (directive == "size") {
      reject_unknown(kv, {"S", "T", "Y", "X"}, directive);
      spec.S = to_index(kv, "S", spec.S);
      spec.T = to_index(kv, "T", spec.T);
      spec.Y = to_index(kv, "Y", spec.Y);
      spec.X = to_index(kv, "X", spec.X);
    } else if (directive == "random") {
      reject_unknown(kv, {"seed"}, directive);
      random = true;
      random_seed = static_cast<std::uint64_t>(to_index(kv, "seed", 0));
    } else if (directive == "layer") {
      reject_unknown(kv, {"shape", "disparity", "cy", "cx", "radius", "half_h", "half_w", "seed"}, directive);
      SceneLayer l;
      const auto shape = kv.count("shape") ? kv.at("shape") : std::string("plane");
      if (shape == "plane") l.shape = LayerShape::plane;
      else if (shape == "disk") l.shape = LayerShape::disk;
      else if (shape == "rect") l.shape = LayerShape::rect;
      else throw std::invalid_argument("scene spec: unknown layer shape '" + shape + "'");
      l.disparity = to_double(kv, "disparity", 0.0);
      l.cy = to_double(kv, "cy", 0.0);
      l.cx = to_double(kv, "cx", 0.0);
      l.radius = to_double(kv, "radius", 0.0);
      l.half_h = to_double(kv, "half_h", 0.0);
      l.half_w = to_double(kv, "half_w", 0.0);
      l.texture_seed = static_cast<std::uint64_t>(to_index(kv, "seed", 1));
      spec.scene.layers.push_back(l);
    } else {
      throw std::invalid_argument("scene spec: unknown directive '" + directive + "'");
    }
  }
  if (spec.S < 1 || spec.T < 1 || spec.Y < 1 || spec.X < 1) throw std::invalid_argument("scene spec: bad size");
  if (random) {
    const double max_shift = spec.scene.max_shift;
    spec.scene = random_scene(random_seed, spec.Y, spec.X, spec.scene.channels);
    spec.scene.max_shift = max_shift;
  }
  if (spec.scene.layers.empty()) throw std::invalid_argument("scene spec: no layers and no random directive");
  return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scene_spec: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

// ---------------------------------------------------------------------------
// Sampling

PatchOrigin sample_patch_origin(const Extents<5>& e, Index patch_spatial, Index patch_angular, std::uint64_t seed) {
  if (patch_spatial < 1 || patch_angular < 1) throw std::invalid_argument("sample_patch: patch extents must be >= 1");
  if (e[axis::S] < patch_angular || e[axis::T] < patch_angular || e[axis::Y] < patch_spatial ||
      e[axis::X] < patch_spatial)
    throw std::invalid_argument("sample_patch: field " + to_string(e) + " smaller than the patch");
  std::mt19937_64 rng(seed);
  auto pick = [&](Index extent, Index patch) {
    return std::uniform_int_distribution<Index>(0, extent - patch)(rng);
  };
  PatchOrigin o;
  o.s = pick(e[axis::S], patch_angular);
  o.t = pick(e[axis::T], patch_angular);
  o.y = pick(e[axis::Y], patch_spatial);
  o.x = pick(e[axis::X], patch_spatial);
  return o;
}

LightField crop(const LightField& f, const PatchOrigin& o, Index ps, Index pa) {
  const auto& e = f.shape();
  if (o.s < 0 || o.t < 0 || o.y < 0 || o.x < 0 || o.s + pa > e[axis::S] || o.t + pa > e[axis::T] ||
      o.y + ps > e[axis::Y] || o.x + ps > e[axis::X])
    throw std::out_of_range("crop: patch outside the field");
  LightField out({e[0], pa, pa, ps, ps});
  for (Index c = 0; c < e[0]; ++c)
    for (Index s = 0; s < pa; ++s)
      for (Index t = 0; t < pa; ++t)
        for (Index y = 0; y < ps; ++y)
          std::copy(&f(c, o.s + s, o.t + t, o.y + y, o.x), &f(c, o.s + s, o.t + t, o.y + y, o.x) + ps, &out(c, s, t, y, 0));
  return out;
}

LightField sample_patch(const LightField& field, Index patch_spatial, Index patch_angular, std::uint64_t seed) {
  return crop(field, sample_patch_origin(field.shape(), patch_spatial, patch_angular, seed), patch_spatial,
              patch_angular);
}

void MultiRangeSpec::validate() const {
  if (!(scale_min > 0) || !(scale_max <= 1.0) || !(scale_min <= scale_max))
    throw std::invalid_argument("MultiRangeSpec: need 0 < scale_min <= scale_max <= 1");
  if (draws < 1) throw std::invalid_argument("MultiRangeSpec: draws must be >= 1");
  if (views < 1 || views % 2 == 0) throw std::invalid_argument("MultiRangeSpec: views must be odd");
}

std::vector<Index> select_views(Index extent, Index center, Index range, Index views) {
  if (views < 1 || views % 2 == 0) throw std::invalid_argument("select_views: view count must be odd");
  if (range < 1) throw std::invalid_argument("select_views: range must be >= 1");
  const Index w = (views - 1) / 2;
  if (center - w * range < 0 || center + w * range >= extent)
    throw std::out_of_range("select_views: selection leaves the angular grid");
  std::vector<Index> out;
  for (Index k = -w; k <= w; ++k) out.push_back(center + k * range);
  return out;
}

MultiRangeSample multi_range_sample(const LightField& field, const MultiRangeSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto& e = field.shape();
  const Index w = (spec.views - 1) / 2;
  struct Choice {
    Index cs, ct, r;
  };
  std::vector<Choice> feasible;
  for (Index r = 1; w == 0 ? r == 1 : 2 * w * r < std::max(e[axis::S], e[axis::T]); ++r)
    for (Index cs = w * r; cs + w * r < e[axis::S]; ++cs)
      for (Index ct = w * r; ct + w * r < e[axis::T]; ++ct) feasible.push_back({cs, ct, r});
  if (feasible.empty()) throw std::invalid_argument("multi_range_sample: angular grid too small for the view count");

  std::mt19937_64 rng(seed);
  const auto pick = feasible[static_cast<std::size_t>(
      std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng))];
  const double scale = std::uniform_real_distribution<double>(spec.scale_min, spec.scale_max)(rng);

  const auto ss = select_views(e[axis::S], pick.cs, pick.r, spec.views);
  const auto ts = select_views(e[axis::T], pick.ct, pick.r, spec.views);
  LightField views({e[0], spec.views, spec.views, e[3], e[4]});
  for (Index c = 0; c < e[0]; ++c)
    for (Index i = 0; i < spec.views; ++i)
      for (Index j = 0; j < spec.views; ++j)
        set_view_image(views, c, i, j, view_image(field, c, ss[static_cast<std::size_t>(i)], ts[static_cast<std::size_t>(j)]));
  const Index Y = std::max<Index>(1, std::lround(scale * static_cast<double>(e[axis::Y])));
  const Index X = std::max<Index>(1, std::lround(scale * static_cast<double>(e[axis::X])));
  MultiRangeSample out;
  out.field = (Y == e[axis::Y] && X == e[axis::X]) ? std::move(views) : resize_views_bicubic(views, Y, X);
  out.scale = scale;
  out.center_s = pick.cs;
  out.center_t = pick.ct;
  out.range = pick.r;
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string path;
    if (!(ls >> path)) continue;
    ManifestEntry e;
    e.path = path;
    if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
    e.metadata = parse_tokens(ls, line);
    const auto id = e.metadata.find("id");
    e.id = id != e.metadata.end() ? id->second : std::filesystem::path(path).stem().string();
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

}  // namespace lf4d
