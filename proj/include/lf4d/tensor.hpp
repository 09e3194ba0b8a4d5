#pragma once

// Dense row-major grids with the canonical light-field layout.
//
// A LightField is indexed (c, s, t, y, x); a FeatureTensor prepends the batch
// axis, (n, c, s, t, y, x). x is always the fastest-varying axis.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lf4d {

using Index = std::ptrdiff_t;

template <std::size_t Rank>
using Extents = std::array<Index, Rank>;

template <std::size_t Rank>
std::string to_string(const Extents<Rank>& e) {
  std::ostringstream os;
  for (std::size_t k = 0; k < Rank; ++k) os << (k ? "x" : "") << e[k];
  return os.str();
}

template <typename T, std::size_t Rank>
class Grid {
 public:
  using value_type = T;
  static constexpr std::size_t rank = Rank;

  Grid() { shape_.fill(0); strides_.fill(0); }

  explicit Grid(const Extents<Rank>& shape, T fill = T{}) : shape_(shape) {
    for (Index e : shape_) {
      if (e <= 0) throw std::invalid_argument("Grid: extents must be positive, got " + to_string(shape_));
    }
    compute_strides();
    data_.assign(static_cast<std::size_t>(count_of(shape_)), fill);
  }

  Grid(const Extents<Rank>& shape, std::vector<T> values) : shape_(shape) {
    for (Index e : shape_) {
      if (e <= 0) throw std::invalid_argument("Grid: extents must be positive, got " + to_string(shape_));
    }
    compute_strides();
    if (static_cast<Index>(values.size()) != count_of(shape_))
      throw std::invalid_argument("Grid: value count does not match extents " + to_string(shape_));
    data_ = std::move(values);
  }

  static Index count_of(const Extents<Rank>& e) {
    return std::accumulate(e.begin(), e.end(), Index{1}, std::multiplies<>());
  }

  const Extents<Rank>& shape() const { return shape_; }
  Index extent(std::size_t axis) const { return shape_[axis]; }
  const Extents<Rank>& strides() const { return strides_; }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  template <typename... Ix>
  Index offset(Ix... ix) const {
    static_assert(sizeof...(Ix) == Rank, "index count must equal rank");
    const std::array<Index, Rank> idx{static_cast<Index>(ix)...};
    Index off = 0;
    for (std::size_t k = 0; k < Rank; ++k) off += idx[k] * strides_[k];
    return off;
  }

  // Unchecked access for inner loops.
  template <typename... Ix>
  T& operator()(Ix... ix) { return data_[static_cast<std::size_t>(offset(ix...))]; }
  template <typename... Ix>
  const T& operator()(Ix... ix) const { return data_[static_cast<std::size_t>(offset(ix...))]; }

  // Bounds-checked access.
  template <typename... Ix>
  T& at(Ix... ix) { check(ix...); return (*this)(ix...); }
  template <typename... Ix>
  const T& at(Ix... ix) const { check(ix...); return (*this)(ix...); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <std::size_t NewRank>
  Grid<T, NewRank> reshaped(const Extents<NewRank>& shape) const& {
    return Grid<T, NewRank>(shape, data_);
  }
  template <std::size_t NewRank>
  Grid<T, NewRank> reshaped(const Extents<NewRank>& shape) && {
    return Grid<T, NewRank>(shape, std::move(data_));
  }

  template <typename U>
  Grid<U, Rank> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Grid<U, Rank>(shape_, std::move(out));
  }

  bool operator==(const Grid& other) const { return shape_ == other.shape_ && data_ == other.data_; }

  Grid& operator+=(const Grid& other) {
    require_same_shape(other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }
  Grid& operator-=(const Grid& other) {
    require_same_shape(other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
  }
  Grid& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void require_same_shape(const Grid& other, const char* what) const {
    if (shape_ != other.shape_)
      throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(shape_) + " vs " +
                                  to_string(other.shape_));
  }

 private:
  void compute_strides() {
    Index s = 1;
    for (std::size_t k = Rank; k-- > 0;) {
      strides_[k] = s;
      s *= shape_[k];
    }
  }

  template <typename... Ix>
  void check(Ix... ix) const {
    static_assert(sizeof...(Ix) == Rank, "index count must equal rank");
    const std::array<Index, Rank> idx{static_cast<Index>(ix)...};
    for (std::size_t k = 0; k < Rank; ++k) {
      if (idx[k] < 0 || idx[k] >= shape_[k]) {
        std::ostringstream os;
        os << "Grid: index " << idx[k] << " out of range for axis " << k << " with extent " << shape_[k];
        throw std::out_of_range(os.str());
      }
    }
  }

  Extents<Rank> shape_;
  Extents<Rank> strides_;
  std::vector<T> data_;
};

template <typename T, std::size_t Rank>
Grid<T, Rank> operator+(Grid<T, Rank> a, const Grid<T, Rank>& b) { return a += b; }
template <typename T, std::size_t Rank>
Grid<T, Rank> operator-(Grid<T, Rank> a, const Grid<T, Rank>& b) { return a -= b; }

// (c, s, t, y, x)
template <typename T>
using LightFieldT = Grid<T, 5>;
// (n, c, s, t, y, x)
template <typename T>
using FeatureTensorT = Grid<T, 6>;

using LightField = LightFieldT<double>;
using FeatureTensor = FeatureTensorT<double>;

namespace axis {
// LightField axes.
inline constexpr std::size_t C = 0, S = 1, T = 2, Y = 3, X = 4;
}  // namespace axis

namespace faxis {
// FeatureTensor axes.
inline constexpr std::size_t N = 0, C = 1, S = 2, T = 3, Y = 4, X = 5;
}  // namespace faxis

// Single-element batch view of a light field, and back.
template <typename T>
FeatureTensorT<T> as_batch(LightFieldT<T> field) {
  const auto& e = field.shape();
  return std::move(field).template reshaped<6>({1, e[0], e[1], e[2], e[3], e[4]});
}

template <typename T>
LightFieldT<T> as_field(FeatureTensorT<T> batch) {
  const auto& e = batch.shape();
  if (e[0] != 1) throw std::invalid_argument("as_field: batch extent must be 1, got " + std::to_string(e[0]));
  return std::move(batch).template reshaped<5>({e[1], e[2], e[3], e[4], e[5]});
}

template <typename T>
FeatureTensorT<T> pack_batch(std::span<const LightFieldT<T>> fields) {
  if (fields.empty()) throw std::invalid_argument("pack_batch: empty input list");
  const auto& e = fields.front().shape();
  for (const auto& f : fields) {
    if (f.shape() != e)
      throw std::invalid_argument("pack_batch: shape mismatch " + to_string(e) + " vs " + to_string(f.shape()));
  }
  FeatureTensorT<T> out({static_cast<Index>(fields.size()), e[0], e[1], e[2], e[3], e[4]});
  const Index per = fields.front().size();
  for (std::size_t i = 0; i < fields.size(); ++i)
    std::copy(fields[i].begin(), fields[i].end(), out.data() + static_cast<Index>(i) * per);
  return out;
}

template <typename T>
std::vector<LightFieldT<T>> unpack_batch(const FeatureTensorT<T>& batch) {
  const auto& e = batch.shape();
  const Extents<5> fe{e[1], e[2], e[3], e[4], e[5]};
  const Index per = Grid<T, 5>::count_of(fe);
  std::vector<LightFieldT<T>> out;
  out.reserve(static_cast<std::size_t>(e[0]));
  for (Index i = 0; i < e[0]; ++i) {
    std::vector<T> v(batch.data() + i * per, batch.data() + (i + 1) * per);
    out.emplace_back(fe, std::move(v));
  }
  return out;
}

// Sub-aperture image (y, x) at view (s, t) of one channel.
template <typename T>
Grid<T, 2> view_image(const LightFieldT<T>& field, Index c, Index s, Index t) {
  const auto& e = field.shape();
  if (c < 0 || c >= e[0] || s < 0 || s >= e[1] || t < 0 || t >= e[2])
    throw std::out_of_range("view_image: view index out of range");
  const T* p = &field(c, s, t, 0, 0);
  return Grid<T, 2>({e[3], e[4]}, std::vector<T>(p, p + e[3] * e[4]));
}

template <typename T>
void set_view_image(LightFieldT<T>& field, Index c, Index s, Index t, const Grid<T, 2>& image) {
  const auto& e = field.shape();
  if (c < 0 || c >= e[0] || s < 0 || s >= e[1] || t < 0 || t >= e[2])
    throw std::out_of_range("set_view_image: view index out of range");
  if (image.extent(0) != e[3] || image.extent(1) != e[4])
    throw std::invalid_argument("set_view_image: image extents do not match field spatial extents");
  std::copy(image.begin(), image.end(), &field(c, s, t, 0, 0));
}

// Calls fn(s, t) once per view, s outer, t inner. Results are collected in
// the same order.
template <typename T, typename Fn>
auto for_each_view(const LightFieldT<T>& field, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, Index, Index>;
  const Index S = field.extent(axis::S), Tn = field.extent(axis::T);
  if constexpr (std::is_void_v<R>) {
    for (Index s = 0; s < S; ++s)
      for (Index t = 0; t < Tn; ++t) fn(s, t);
  } else {
    std::vector<R> out;
    out.reserve(static_cast<std::size_t>(S * Tn));
    for (Index s = 0; s < S; ++s)
      for (Index t = 0; t < Tn; ++t) out.push_back(fn(s, t));
    return out;
  }
}

enum class EpiOrientation { horizontal, vertical };

// Horizontal: fixed (y, t), indexed (s, x). Vertical: fixed (x, s), indexed (t, y).
template <typename T>
struct EpiT {
  Grid<T, 2> data;
  EpiOrientation orientation = EpiOrientation::horizontal;
};
using Epi = EpiT<double>;

template <typename T>
EpiT<T> extract_epi(const LightFieldT<T>& field, EpiOrientation orientation, Index fixed_spatial,
                    Index fixed_angular, Index channel) {
  const auto& e = field.shape();
  auto require = [](Index v, Index extent, const char* name) {
    if (v < 0 || v >= extent)
      throw std::out_of_range(std::string("extract_epi: ") + name + " index " + std::to_string(v) +
                              " out of range [0, " + std::to_string(extent) + ")");
  };
  require(channel, e[axis::C], "channel");
  EpiT<T> epi;
  epi.orientation = orientation;
  if (orientation == EpiOrientation::horizontal) {
    require(fixed_spatial, e[axis::Y], "y");
    require(fixed_angular, e[axis::T], "t");
    epi.data = Grid<T, 2>({e[axis::S], e[axis::X]});
    for (Index s = 0; s < e[axis::S]; ++s)
      for (Index x = 0; x < e[axis::X]; ++x) epi.data(s, x) = field(channel, s, fixed_angular, fixed_spatial, x);
  } else {
    require(fixed_spatial, e[axis::X], "x");
    require(fixed_angular, e[axis::S], "s");
    epi.data = Grid<T, 2>({e[axis::T], e[axis::Y]});
    for (Index t = 0; t < e[axis::T]; ++t)
      for (Index y = 0; y < e[axis::Y]; ++y) epi.data(t, y) = field(channel, fixed_angular, t, y, fixed_spatial);
  }
  return epi;
}

// Inverse of extract_epi: writes the slab back into the field.
template <typename T>
void scatter_epi(LightFieldT<T>& field, const EpiT<T>& epi, Index fixed_spatial, Index fixed_angular,
                 Index channel) {
  const auto& e = field.shape();
  if (epi.orientation == EpiOrientation::horizontal) {
    if (epi.data.shape() != Extents<2>{e[axis::S], e[axis::X]})
      throw std::invalid_argument("scatter_epi: EPI extents do not match field");
    for (Index s = 0; s < e[axis::S]; ++s)
      for (Index x = 0; x < e[axis::X]; ++x) field.at(channel, s, fixed_angular, fixed_spatial, x) = epi.data(s, x);
  } else {
    if (epi.data.shape() != Extents<2>{e[axis::T], e[axis::Y]})
      throw std::invalid_argument("scatter_epi: EPI extents do not match field");
    for (Index t = 0; t < e[axis::T]; ++t)
      for (Index y = 0; y < e[axis::Y]; ++y) field.at(channel, fixed_angular, t, y, fixed_spatial) = epi.data(t, y);
  }
}

// Concatenate / split along the channel axis of a FeatureTensor.
template <typename T>
FeatureTensorT<T> concat_channels(std::span<const FeatureTensorT<T>* const> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  auto e = parts.front()->shape();
  Index channels = 0;
  for (const auto* p : parts) {
    const auto& pe = p->shape();
    if (pe[0] != e[0] || pe[2] != e[2] || pe[3] != e[3] || pe[4] != e[4] || pe[5] != e[5])
      throw std::invalid_argument("concat_channels: non-channel extents differ");
    channels += pe[1];
  }
  e[1] = channels;
  FeatureTensorT<T> out(e);
  const Index block = e[2] * e[3] * e[4] * e[5];
  for (Index n = 0; n < e[0]; ++n) {
    T* dst = out.data() + n * channels * block;
    for (const auto* p : parts) {
      const Index pc = p->extent(1);
      const T* src = p->data() + n * pc * block;
      dst = std::copy(src, src + pc * block, dst);
    }
  }
  return out;
}

// Copies channels [first, first + count) of a FeatureTensor.
template <typename T>
FeatureTensorT<T> slice_channels(const FeatureTensorT<T>& in, Index first, Index count) {
  auto e = in.shape();
  if (first < 0 || count <= 0 || first + count > e[1]) throw std::out_of_range("slice_channels: range out of bounds");
  const Index channels = e[1];
  e[1] = count;
  FeatureTensorT<T> out(e);
  const Index block = e[2] * e[3] * e[4] * e[5];
  for (Index n = 0; n < e[0]; ++n) {
    const T* src = in.data() + (n * channels + first) * block;
    std::copy(src, src + count * block, out.data() + n * count * block);
  }
  return out;
}

}  // namespace lf4d
