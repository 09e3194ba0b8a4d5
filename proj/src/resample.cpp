#include "lf4d/resample.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lf4d/ops.hpp"

namespace lf4d {

double cubic_weight(double d) {
  constexpr double a = -0.5;
  d = std::abs(d);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

namespace {

// Four taps and weights for sampling a line of `extent` samples at `pos`.
struct Taps {
  Index idx[4];
  double w[4];
};

Taps taps_at(double pos, Index extent) {
  Taps t{};
  const double base = std::floor(pos);
  const double frac = pos - base;
  for (int k = 0; k < 4; ++k) {
    const Index i = static_cast<Index>(base) - 1 + k;
    t.idx[k] = std::clamp<Index>(i, 0, extent - 1);
    t.w[k] = cubic_weight(frac - (k - 1));
  }
  return t;
}

template <typename T>
Grid<T, 2> separable_resample(const Grid<T, 2>& image, const std::vector<Taps>& rows, const std::vector<Taps>& cols) {
  const Index H = image.extent(0);
  const Index OH = static_cast<Index>(rows.size()), OW = static_cast<Index>(cols.size());
  std::vector<double> tmp(static_cast<std::size_t>(H * OW));
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < OW; ++x) {
      const auto& c = cols[static_cast<std::size_t>(x)];
      double v = 0.0;
      for (int k = 0; k < 4; ++k) v += c.w[k] * image(y, c.idx[k]);
      tmp[static_cast<std::size_t>(y * OW + x)] = v;
    }
  Grid<T, 2> out({OH, OW});
  for (Index y = 0; y < OH; ++y) {
    const auto& r = rows[static_cast<std::size_t>(y)];
    for (Index x = 0; x < OW; ++x) {
      double v = 0.0;
      for (int k = 0; k < 4; ++k) v += r.w[k] * tmp[static_cast<std::size_t>(r.idx[k] * OW + x)];
      out(y, x) = static_cast<T>(v);
    }
  }
  return out;
}

std::vector<Taps> anchored_taps(Index in_extent, Index r) {
  std::vector<Taps> t;
  for (Index k = 0; k < in_extent * r; ++k) t.push_back(taps_at(static_cast<double>(k) / static_cast<double>(r), in_extent));
  return t;
}

std::vector<Taps> centered_taps(Index in_extent, Index out_extent) {
  std::vector<Taps> t;
  const double scale = static_cast<double>(in_extent) / static_cast<double>(out_extent);
  for (Index k = 0; k < out_extent; ++k) t.push_back(taps_at((static_cast<double>(k) + 0.5) * scale - 0.5, in_extent));
  return t;
}

template <typename T, typename Fn>
LightFieldT<T> map_views(const LightFieldT<T>& field, Index out_h, Index out_w, Fn&& fn) {
  const auto& e = field.shape();
  LightFieldT<T> out({e[0], e[1], e[2], out_h, out_w});
  for (Index c = 0; c < e[0]; ++c)
    for_each_view(field, [&](Index s, Index t) { set_view_image(out, c, s, t, fn(view_image(field, c, s, t))); });
  return out;
}

}  // namespace

template <typename T>
Grid<T, 2> upsample_bicubic(const Grid<T, 2>& image, Index r) {
  if (r < 1) throw std::invalid_argument("upsample_bicubic: factor must be >= 1");
  if (r == 1) return image;
  return separable_resample(image, anchored_taps(image.extent(0), r), anchored_taps(image.extent(1), r));
}

template <typename T>
Grid<T, 2> resize_bicubic(const Grid<T, 2>& image, Index out_h, Index out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bicubic: output extents must be positive");
  return separable_resample(image, centered_taps(image.extent(0), out_h), centered_taps(image.extent(1), out_w));
}

template <typename T>
LightFieldT<T> upsample_views_bicubic(const LightFieldT<T>& field, Index r_s) {
  if (r_s < 1) throw std::invalid_argument("upsample_views_bicubic: factor must be >= 1");
  return map_views(field, field.extent(axis::Y) * r_s, field.extent(axis::X) * r_s,
                   [&](const Grid<T, 2>& v) { return upsample_bicubic(v, r_s); });
}

template <typename T>
LightFieldT<T> resize_views_bicubic(const LightFieldT<T>& field, Index out_h, Index out_w) {
  return map_views(field, out_h, out_w, [&](const Grid<T, 2>& v) { return resize_bicubic(v, out_h, out_w); });
}

template <typename T>
FeatureTensorT<T> upsample_baseline(const FeatureTensorT<T>& input, Index r_s, Index r_a) {
  std::vector<LightFieldT<T>> views;
  for (auto& f : unpack_batch(input)) views.push_back(upsample_views_bicubic(f, r_s));
  return angular_interpolate(pack_batch<T>(views), r_a);
}

template <typename T>
LightFieldT<T> upsample_views_nearest(const LightFieldT<T>& field, Index r_s) {
  if (r_s < 1) throw std::invalid_argument("upsample_views_nearest: factor must be >= 1");
  return map_views(field, field.extent(axis::Y) * r_s, field.extent(axis::X) * r_s, [&](const Grid<T, 2>& v) {
    Grid<T, 2> out({v.extent(0) * r_s, v.extent(1) * r_s});
    for (Index y = 0; y < out.extent(0); ++y)
      for (Index x = 0; x < out.extent(1); ++x) out(y, x) = v(y / r_s, x / r_s);
    return out;
  });
}

#define LF4D_INSTANTIATE_RESAMPLE(T)                                                  \
  template Grid<T, 2> upsample_bicubic(const Grid<T, 2>&, Index);                     \
  template Grid<T, 2> resize_bicubic(const Grid<T, 2>&, Index, Index);                \
  template LightFieldT<T> upsample_views_bicubic(const LightFieldT<T>&, Index);       \
  template LightFieldT<T> resize_views_bicubic(const LightFieldT<T>&, Index, Index);  \
  template FeatureTensorT<T> upsample_baseline(const FeatureTensorT<T>&, Index, Index); \
  template LightFieldT<T> upsample_views_nearest(const LightFieldT<T>&, Index);

LF4D_INSTANTIATE_RESAMPLE(float)
LF4D_INSTANTIATE_RESAMPLE(double)

#undef LF4D_INSTANTIATE_RESAMPLE

}  // namespace lf4d
