#include "lf4d/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "lf4d/io.hpp"
#include "lf4d/resample.hpp"
#include "text.hpp"

namespace lf4d {

std::string to_string(Connection c) {
  switch (c) {
    case Connection::sequential: return "sequential";
    case Connection::shared_source: return "shared_source";
    case Connection::dense: return "dense";
  }
  return "?";
}

Connection parse_connection(const std::string& name) {
  if (name == "sequential") return Connection::sequential;
  if (name == "shared_source") return Connection::shared_source;
  if (name == "dense") return Connection::dense;
  throw std::invalid_argument("unknown connection topology '" + name + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("ModelConfig: " + msg);
  };
  require(in_channels >= 1, "in_channels must be >= 1");
  require(n_restoration >= 0 && n_refinement >= 0, "block counts must be >= 0");
  require(filters >= 1, "filters must be >= 1");
  require(spatial_kernel >= 1 && spatial_kernel % 2 == 1, "spatial_kernel must be odd");
  require(angular_kernel >= 1 && angular_kernel % 2 == 1, "angular_kernel must be odd");
  require(r_s >= 1 && r_a >= 1, "scale factors must be >= 1");
  require(std::isfinite(leaky_slope), "leaky_slope must be finite");
  require(bn_epsilon > 0, "bn_epsilon must be positive");
  require(bn_momentum >= 0 && bn_momentum < 1, "bn_momentum must be in [0, 1)");
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "in_channels") in_channels = text::to_index(key, value);
  else if (key == "n_restoration") n_restoration = text::to_index(key, value);
  else if (key == "n_refinement") n_refinement = text::to_index(key, value);
  else if (key == "filters") filters = text::to_index(key, value);
  else if (key == "spatial_kernel") spatial_kernel = text::to_index(key, value);
  else if (key == "angular_kernel") angular_kernel = text::to_index(key, value);
  else if (key == "connection") connection = parse_connection(value);
  else if (key == "r_s") r_s = text::to_index(key, value);
  else if (key == "r_a") r_a = text::to_index(key, value);
  else if (key == "leaky_slope") leaky_slope = text::to_double(key, value);
  else if (key == "bn_epsilon") bn_epsilon = text::to_double(key, value);
  else if (key == "bn_momentum") bn_momentum = text::to_double(key, value);
  else if (key == "global_skip") global_skip = text::to_bool(key, value);
  else if (key == "zero_tail") zero_tail = text::to_bool(key, value);
  else if (key == "model_seed") seed = static_cast<std::uint64_t>(text::to_index(key, value));
  else return false;
  return true;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"in_channels", std::to_string(in_channels)},
      {"n_restoration", std::to_string(n_restoration)},
      {"n_refinement", std::to_string(n_refinement)},
      {"filters", std::to_string(filters)},
      {"spatial_kernel", std::to_string(spatial_kernel)},
      {"angular_kernel", std::to_string(angular_kernel)},
      {"connection", to_string(connection)},
      {"r_s", std::to_string(r_s)},
      {"r_a", std::to_string(r_a)},
      {"leaky_slope", text::exact(leaky_slope)},
      {"bn_epsilon", text::exact(bn_epsilon)},
      {"bn_momentum", text::exact(bn_momentum)},
      {"global_skip", global_skip ? "1" : "0"},
      {"zero_tail", zero_tail ? "1" : "0"},
      {"model_seed", std::to_string(seed)},
  };
}

Index parameter_count(const ModelConfig& c) {
  c.validate();
  const Index F = c.filters, C = c.in_channels;
  const Index taps = c.angular_kernel * c.angular_kernel * c.spatial_kernel * c.spatial_kernel;
  auto conv = [](Index in, Index out, Index t) { return in * out * t + out; };
  auto stage = [&](Index K) {
    Index n = K * (2 * conv(F, F, taps) + 4 * F);
    if (c.connection == Connection::dense && K >= 1) {
      for (Index k = 1; k < K; ++k) n += conv((k + 1) * F, F, 1);
      n += conv((K + 1) * F, F, 1);
    }
    return n;
  };
  return conv(C, F, taps) + stage(c.n_restoration) + conv(F, F * c.r_s * c.r_s, taps) + stage(c.n_refinement) +
         conv(F, C, taps);
}

Index receptive_radius(const ModelConfig& c) {
  c.validate();
  const Index p = (c.spatial_kernel - 1) / 2;
  const Index low = p * (1 + 2 * c.n_restoration + 1);
  const Index high = p * (2 * c.n_refinement + 1);
  const Index total = low + (high + c.r_s - 1) / c.r_s;
  // Bicubic taps of the global skip reach two input pixels.
  return c.global_skip ? std::max<Index>(total, 2) : total;
}

// ---------------------------------------------------------------------------
// Construction and enumeration

template <typename T>
ModelT<T>::ModelT(const ModelConfig& config) : config_(config) {
  config_.validate();
  const Index F = config_.filters, C = config_.in_channels;
  const Index ka = config_.angular_kernel, ks = config_.spatial_kernel;
  std::uint64_t layer = 0;
  auto make = [&](Index in, Index out, Index a, Index s) {
    return glorot_init(Conv4DLayerT<T>::same(in, out, a, a, s, s), splitmix64(config_.seed + 0x1000 * ++layer));
  };
  auto norm = [&] {
    AgbnStateT<T> n(F);
    n.epsilon = static_cast<T>(config_.bn_epsilon);
    n.momentum = static_cast<T>(config_.bn_momentum);
    return n;
  };
  auto stage = [&](Index K) {
    StageT<T> st;
    for (Index k = 0; k < K; ++k) st.blocks.push_back({make(F, F, ka, ks), make(F, F, ka, ks), norm(), norm()});
    if (config_.connection == Connection::dense && K >= 1)
      for (Index k = 1; k <= K; ++k) st.fusions.push_back(make((k + 1) * F, F, 1, 1));
    return st;
  };
  head = make(C, F, ka, ks);
  restoration = stage(config_.n_restoration);
  upscale_conv = make(F, F * config_.r_s * config_.r_s, ka, ks);
  refinement = stage(config_.n_refinement);
  tail = make(F, C, ka, ks);
  if (config_.zero_tail) tail.weights.fill(T(0));
}

template <typename T>
ModelT<T> ModelT<T>::zeros_like() const {
  ModelT z = *this;
  for (auto& p : z.state()) std::fill(p.values.begin(), p.values.end(), T(0));
  return z;
}

namespace {

template <typename T>
void add_conv(std::vector<ParamView<T>>& out, const std::string& name, Conv4DLayerT<T>& conv) {
  const auto& e = conv.weights.shape();
  out.push_back({name + ".weight", std::vector<Index>(e.begin(), e.end()), conv.weights.values()});
  out.push_back({name + ".bias", {conv.out_channels()}, std::span<T>(conv.bias)});
}

template <typename T>
void add_norm(std::vector<ParamView<T>>& out, const std::string& name, AgbnStateT<T>& n, bool buffers) {
  const Index c = n.channels();
  if (!buffers) {
    out.push_back({name + ".gamma", {c}, std::span<T>(n.gamma)});
    out.push_back({name + ".beta", {c}, std::span<T>(n.beta)});
  } else {
    out.push_back({name + ".running_mean", {c}, std::span<T>(n.running_mean)});
    out.push_back({name + ".running_var", {c}, std::span<T>(n.running_var)});
  }
}

template <typename T>
void add_stage(std::vector<ParamView<T>>& out, const std::string& name, StageT<T>& st, bool buffers) {
  for (std::size_t k = 0; k < st.blocks.size(); ++k) {
    const std::string b = name + ".block" + std::to_string(k);
    auto& blk = st.blocks[k];
    if (!buffers) add_conv(out, b + ".conv_a", blk.conv_a);
    add_norm(out, b + ".norm_a", blk.norm_a, buffers);
    if (!buffers) add_conv(out, b + ".conv_b", blk.conv_b);
    add_norm(out, b + ".norm_b", blk.norm_b, buffers);
  }
  if (!buffers)
    for (std::size_t k = 0; k < st.fusions.size(); ++k) add_conv(out, name + ".fusion" + std::to_string(k), st.fusions[k]);
}

}  // namespace

template <typename T>
std::vector<ParamView<T>> ModelT<T>::parameters() {
  std::vector<ParamView<T>> out;
  add_conv(out, "head", head);
  add_stage(out, "restoration", restoration, false);
  add_conv(out, "upscale", upscale_conv);
  add_stage(out, "refinement", refinement, false);
  add_conv(out, "tail", tail);
  return out;
}

template <typename T>
std::vector<ParamView<T>> ModelT<T>::state() {
  auto out = parameters();
  add_stage(out, "restoration", restoration, true);
  add_stage(out, "refinement", refinement, true);
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename T>
void accumulate(Conv4DLayerT<T>& g, const Conv4DGradsT<T>& d) {
  g.weights += d.weights;
  for (std::size_t k = 0; k < g.bias.size(); ++k) g.bias[k] += d.bias[k];
}

template <typename T>
void accumulate(AgbnStateT<T>& g, const AgbnGradsT<T>& d) {
  for (std::size_t k = 0; k < g.gamma.size(); ++k) {
    g.gamma[k] += d.gamma[k];
    g.beta[k] += d.beta[k];
  }
}

// Residual branch B(x) of one block.
template <typename T>
FeatureTensorT<T> block_forward(ResidualBlockT<T>& b, const FeatureTensorT<T>& x, NormMode mode, T alpha,
                                BlockTrace<T>* tr) {
  auto a1 = conv4d_forward(x, b.conv_a);
  auto n1 = agbn_forward(a1, b.norm_a, mode);
  auto r1 = leaky_relu(n1, alpha);
  auto a2 = conv4d_forward(r1, b.conv_b);
  auto out = agbn_forward(a2, b.norm_b, mode);
  if (tr) *tr = {x, std::move(a1), std::move(n1), std::move(r1), std::move(a2)};
  return out;
}

template <typename T>
FeatureTensorT<T> block_backward(const ResidualBlockT<T>& b, const BlockTrace<T>& tr, const FeatureTensorT<T>& g,
                                 NormMode mode, T alpha, ResidualBlockT<T>& grads) {
  auto nb = agbn_backward(tr.a2, b.norm_b, g, mode);
  accumulate(grads.norm_b, nb);
  auto cb = conv4d_backward(tr.r1, b.conv_b, nb.input);
  accumulate(grads.conv_b, cb);
  auto gr = leaky_relu_backward(tr.n1, cb.input, alpha);
  auto na = agbn_backward(tr.a1, b.norm_a, gr, mode);
  accumulate(grads.norm_a, na);
  auto ca = conv4d_backward(tr.x, b.conv_a, na.input);
  accumulate(grads.conv_a, ca);
  return std::move(ca.input);
}

template <typename T>
FeatureTensorT<T> concat_all(const FeatureTensorT<T>& y0, const std::vector<FeatureTensorT<T>>& outs, std::size_t n) {
  std::vector<const FeatureTensorT<T>*> parts{&y0};
  for (std::size_t k = 0; k < n; ++k) parts.push_back(&outs[k]);
  return concat_channels<T>(parts);
}

template <typename T>
FeatureTensorT<T> stage_forward(StageT<T>& st, Connection topo, const FeatureTensorT<T>& y0, NormMode mode, T alpha,
                                StageTrace<T>* tr) {
  const std::size_t K = st.blocks.size();
  if (tr) {
    tr->y0 = y0;
    tr->inputs.assign(K, {});
    tr->blocks.assign(K, {});
    tr->concats.clear();
  }
  if (K == 0) return y0;
  if (topo == Connection::dense) {
    std::vector<FeatureTensorT<T>> outs;
    for (std::size_t k = 0; k < K; ++k) {
      FeatureTensorT<T> in;
      if (k == 0) {
        in = y0;
      } else {
        auto cat = concat_all(y0, outs, k);
        in = conv4d_forward(cat, st.fusions[k - 1]);
        if (tr) tr->concats.push_back(std::move(cat));
      }
      auto o = block_forward(st.blocks[k], in, mode, alpha, tr ? &tr->blocks[k] : nullptr);
      o += in;
      if (tr) tr->inputs[k] = std::move(in);
      outs.push_back(std::move(o));
    }
    auto cat = concat_all(y0, outs, K);
    auto out = conv4d_forward(cat, st.fusions.back());
    if (tr) tr->concats.push_back(std::move(cat));
    return out;
  }
  FeatureTensorT<T> cur = y0;
  for (std::size_t k = 0; k < K; ++k) {
    auto b = block_forward(st.blocks[k], cur, mode, alpha, tr ? &tr->blocks[k] : nullptr);
    if (topo == Connection::sequential) {
      cur += b;
    } else {
      b += y0;
      cur = std::move(b);
    }
  }
  return cur;
}

template <typename T>
FeatureTensorT<T> stage_backward(const StageT<T>& st, Connection topo, const StageTrace<T>& tr,
                                 const FeatureTensorT<T>& grad, NormMode mode, T alpha, StageT<T>& grads) {
  const std::size_t K = st.blocks.size();
  if (K == 0) return grad;
  if (topo == Connection::sequential) {
    FeatureTensorT<T> g = grad;
    for (std::size_t k = K; k-- > 0;) g += block_backward(st.blocks[k], tr.blocks[k], g, mode, alpha, grads.blocks[k]);
    return g;
  }
  if (topo == Connection::shared_source) {
    // y_{k+1} = y0 + B_k(y_k): the gradient of every y_k also reaches y0 directly.
    FeatureTensorT<T> g_y0 = grad;
    FeatureTensorT<T> g = grad;
    for (std::size_t k = K; k-- > 0;) {
      g = block_backward(st.blocks[k], tr.blocks[k], g, mode, alpha, grads.blocks[k]);
      g_y0 += g;
    }
    return g_y0;
  }
  const Index F = tr.y0.extent(faxis::C);
  FeatureTensorT<T> g_y0(tr.y0.shape());
  std::vector<FeatureTensorT<T>> g_out;
  for (std::size_t k = 0; k < K; ++k) g_out.emplace_back(tr.y0.shape());
  auto scatter = [&](const FeatureTensorT<T>& g_cat, std::size_t parts) {
    g_y0 += slice_channels(g_cat, 0, F);
    for (std::size_t k = 0; k < parts; ++k) g_out[k] += slice_channels(g_cat, static_cast<Index>(k + 1) * F, F);
  };
  {
    auto fb = conv4d_backward(tr.concats.back(), st.fusions.back(), grad);
    accumulate(grads.fusions.back(), fb);
    scatter(fb.input, K);
  }
  for (std::size_t k = K; k-- > 0;) {
    FeatureTensorT<T> g_in = g_out[k];
    g_in += block_backward(st.blocks[k], tr.blocks[k], g_out[k], mode, alpha, grads.blocks[k]);
    if (k == 0) {
      g_y0 += g_in;
    } else {
      auto fb = conv4d_backward(tr.concats[k - 1], st.fusions[k - 1], g_in);
      accumulate(grads.fusions[k - 1], fb);
      scatter(fb.input, k);
    }
  }
  return g_y0;
}

}  // namespace

template <typename T>
FeatureTensorT<T> ModelT<T>::forward(const FeatureTensorT<T>& input, NormMode mode, ForwardTrace<T>* tr) {
  if (input.extent(faxis::C) != config_.in_channels)
    throw std::invalid_argument("Model::forward: expected " + std::to_string(config_.in_channels) +
                                " input channels, got " + std::to_string(input.extent(faxis::C)));
  const T alpha = static_cast<T>(config_.leaky_slope);
  auto h0 = conv4d_forward(input, head);
  auto r0 = leaky_relu(h0, alpha);
  auto s1 = stage_forward(restoration, config_.connection, r0, mode, alpha, tr ? &tr->restoration : nullptr);
  auto u = upscale(s1, upscale_conv, config_.r_s, config_.r_a);
  auto ur = leaky_relu(u, alpha);
  auto s2 = stage_forward(refinement, config_.connection, ur, mode, alpha, tr ? &tr->refinement : nullptr);
  auto out = conv4d_forward(s2, tail);
  if (config_.global_skip) out += upsample_baseline(input, config_.r_s, config_.r_a);
  if (tr) {
    tr->mode = mode;
    tr->input = input;
    tr->h0 = std::move(h0);
    tr->r0 = std::move(r0);
    tr->s1 = std::move(s1);
    tr->u = std::move(u);
    tr->ur = std::move(ur);
    tr->s2 = std::move(s2);
  }
  return out;
}

template <typename T>
FeatureTensorT<T> ModelT<T>::infer(const FeatureTensorT<T>& input) const {
  // Eval mode reads the normalization state but never writes it.
  return const_cast<ModelT*>(this)->forward(input, NormMode::eval, nullptr);
}

template <typename T>
void ModelT<T>::backward(const ForwardTrace<T>& tr, const FeatureTensorT<T>& grad_output, ModelT& grads) const {
  if (!(grads.config_ == config_)) throw std::invalid_argument("Model::backward: gradient model has another config");
  const T alpha = static_cast<T>(config_.leaky_slope);
  auto tb = conv4d_backward(tr.s2, tail, grad_output);
  accumulate(grads.tail, tb);
  auto g_ur = stage_backward(refinement, config_.connection, tr.refinement, tb.input, tr.mode, alpha, grads.refinement);
  auto g_u = leaky_relu_backward(tr.u, g_ur, alpha);
  auto ub = upscale_backward(tr.s1, upscale_conv, config_.r_s, config_.r_a, g_u);
  accumulate(grads.upscale_conv, ub);
  auto g_r0 =
      stage_backward(restoration, config_.connection, tr.restoration, ub.input, tr.mode, alpha, grads.restoration);
  auto g_h0 = leaky_relu_backward(tr.h0, g_r0, alpha);
  accumulate(grads.head, conv4d_backward(tr.input, head, g_h0, true));
}

// ---------------------------------------------------------------------------
// Optimizer helpers

template <typename T>
void sgd_step(std::span<const ParamView<T>> params, std::span<const ParamView<T>> grads, double lr, double momentum,
              std::vector<std::vector<T>>* velocity) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: parameter and gradient lists differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].values.size() != grads[k].values.size() || params[k].shape != grads[k].shape)
      throw std::invalid_argument("sgd_step: shape mismatch for '" + params[k].name + "'");
  }
  const bool use_velocity = momentum != 0.0;
  if (use_velocity) {
    if (!velocity) throw std::invalid_argument("sgd_step: momentum requires a velocity buffer");
    if (velocity->size() != params.size()) {
      velocity->assign(params.size(), {});
      for (std::size_t k = 0; k < params.size(); ++k) (*velocity)[k].assign(params[k].values.size(), T(0));
    }
  }
  const T step = static_cast<T>(lr);
  const T m = static_cast<T>(momentum);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values;
    auto g = grads[k].values;
    if (use_velocity) {
      auto& v = (*velocity)[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = m * v[i] + g[i];
        p[i] -= step * v[i];
      }
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * g[i];
    }
  }
}

template <typename T>
double clip_gradients(std::span<const ParamView<T>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (T v : g.values) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& g : grads)
      for (T& v : g.values) v *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Tiled inference

namespace {

template <typename T>
LightFieldT<T> crop_spatial(const LightFieldT<T>& f, Index y0, Index y1, Index x0, Index x1) {
  const auto& e = f.shape();
  LightFieldT<T> out({e[0], e[1], e[2], y1 - y0, x1 - x0});
  for (Index c = 0; c < e[0]; ++c)
    for (Index s = 0; s < e[1]; ++s)
      for (Index t = 0; t < e[2]; ++t)
        for (Index y = y0; y < y1; ++y) std::copy(&f(c, s, t, y, x0), &f(c, s, t, y, x0) + (x1 - x0), &out(c, s, t, y - y0, 0));
  return out;
}

}  // namespace

template <typename T>
LightFieldT<T> super_resolve(const ModelT<T>& model, const LightFieldT<T>& field, TileSpec tiling) {
  const auto& cfg = model.config();
  const auto& e = field.shape();
  const Index Y = e[axis::Y], X = e[axis::X], r = cfg.r_s;
  const Index th = tiling.height > 0 ? std::min(tiling.height, Y) : Y;
  const Index tw = tiling.width > 0 ? std::min(tiling.width, X) : X;
  if (tiling.height < 0 || tiling.width < 0) throw std::invalid_argument("super_resolve: negative tile extent");
  if (th == Y && tw == X) return as_field(model.infer(as_batch(field)));

  const Index halo = receptive_radius(cfg);
  const Index field_extent = 2 * halo + 1;
  if ((th < Y && th < field_extent) || (tw < X && tw < field_extent))
    throw std::invalid_argument("super_resolve: tile smaller than the receptive field (" +
                                std::to_string(field_extent) + " pixels)");
  LightFieldT<T> out;
  for (Index y0 = 0; y0 < Y; y0 += th) {
    const Index y1 = std::min(Y, y0 + th);
    const Index ey0 = std::max<Index>(0, y0 - halo), ey1 = std::min(Y, y1 + halo);
    for (Index x0 = 0; x0 < X; x0 += tw) {
      const Index x1 = std::min(X, x0 + tw);
      const Index ex0 = std::max<Index>(0, x0 - halo), ex1 = std::min(X, x1 + halo);
      auto sr = as_field(model.infer(as_batch(crop_spatial(field, ey0, ey1, ex0, ex1))));
      const auto& se = sr.shape();
      if (out.empty()) out = LightFieldT<T>({se[0], se[1], se[2], Y * r, X * r});
      const Index oy = (y0 - ey0) * r, ox = (x0 - ex0) * r;
      const Index h = (y1 - y0) * r, w = (x1 - x0) * r;
      for (Index c = 0; c < se[0]; ++c)
        for (Index s = 0; s < se[1]; ++s)
          for (Index t = 0; t < se[2]; ++t)
            for (Index y = 0; y < h; ++y)
              std::copy(&sr(c, s, t, oy + y, ox), &sr(c, s, t, oy + y, ox) + w, &out(c, s, t, y0 * r + y, x0 * r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointTag = "lf4d-checkpoint 1";

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

}  // namespace

template <typename T>
void save_checkpoint(std::ostream& out, ModelT<T>& model) {
  out << kCheckpointTag << '\n';
  out << "precision=" << precision_name<T>() << '\n';
  for (const auto& [k, v] : model.config().to_map()) out << k << '=' << v << '\n';
  out << "end\n";
  std::vector<ParamRecord> records;
  for (const auto& p : model.state()) {
    ParamRecord r;
    r.name = p.name;
    r.shape = p.shape;
    r.values.assign(p.values.begin(), p.values.end());
    r.dtype = sizeof(T) == 4 ? DType::float32 : DType::float64;
    records.push_back(std::move(r));
  }
  write_param_bundle(out, records);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, ModelT<T>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  save_checkpoint(out, model);
}

template <typename T>
ModelT<T> load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointTag) throw std::runtime_error("load_checkpoint: not a checkpoint");
  ModelConfig cfg;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("load_checkpoint: malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "precision") continue;
    if (!cfg.set(key, value)) throw std::runtime_error("load_checkpoint: unknown header key '" + key + "'");
  }
  if (!ended) throw std::runtime_error("load_checkpoint: truncated header");
  ModelT<T> model(cfg);
  const auto records = read_param_bundle(in);
  std::unordered_map<std::string, const ParamRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  auto state = model.state();
  if (records.size() != state.size())
    throw std::runtime_error("load_checkpoint: expected " + std::to_string(state.size()) + " tensors, found " +
                             std::to_string(records.size()));
  for (auto& p : state) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::runtime_error("load_checkpoint: missing tensor '" + p.name + "'");
    if (it->second->shape != p.shape) throw std::runtime_error("load_checkpoint: shape mismatch for '" + p.name + "'");
    std::transform(it->second->values.begin(), it->second->values.end(), p.values.begin(),
                   [](double v) { return static_cast<T>(v); });
  }
  return model;
}

template <typename T>
ModelT<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  return load_checkpoint<T>(in);
}

#define LF4D_INSTANTIATE_NETWORK(T)                                                                      \
  template class ModelT<T>;                                                                              \
  template void sgd_step(std::span<const ParamView<T>>, std::span<const ParamView<T>>, double, double, \
                         std::vector<std::vector<T>>*);                                                  \
  template double clip_gradients(std::span<const ParamView<T>>, double);                                \
  template LightFieldT<T> super_resolve(const ModelT<T>&, const LightFieldT<T>&, TileSpec);             \
  template void save_checkpoint(std::ostream&, ModelT<T>&);                                              \
  template void save_checkpoint(const std::filesystem::path&, ModelT<T>&);                               \
  template ModelT<T> load_checkpoint(std::istream&);                                                     \
  template ModelT<T> load_checkpoint(const std::filesystem::path&);

LF4D_INSTANTIATE_NETWORK(float)
LF4D_INSTANTIATE_NETWORK(double)

#undef LF4D_INSTANTIATE_NETWORK

}  // namespace lf4d
