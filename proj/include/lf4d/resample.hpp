#pragma once

// Bicubic (Keys, a = -0.5) resampling of single images and per-view
// resampling of light fields. Borders clamp to the edge sample.

#include "lf4d/tensor.hpp"

namespace lf4d {

double cubic_weight(double distance);

// Integer upsampling anchored at the first sample: output pixel Y samples
// input coordinate Y / r, so input pixel y lands exactly on output r y.
// This is the inverse of decimation keeping every r-th sample from index 0.
template <typename T>
Grid<T, 2> upsample_bicubic(const Grid<T, 2>& image, Index r);

// Arbitrary-size resize with half-pixel centers.
template <typename T>
Grid<T, 2> resize_bicubic(const Grid<T, 2>& image, Index out_h, Index out_w);

// Per-view spatial bicubic upsampling of every channel.
template <typename T>
LightFieldT<T> upsample_views_bicubic(const LightFieldT<T>& field, Index r_s);

template <typename T>
LightFieldT<T> resize_views_bicubic(const LightFieldT<T>& field, Index out_h, Index out_w);

// Spatial bicubic (r_s) followed by endpoint-preserving linear angular
// interpolation (r_a); the classical baseline and the network's global skip.
template <typename T>
FeatureTensorT<T> upsample_baseline(const FeatureTensorT<T>& input, Index r_s, Index r_a);

// Nearest-neighbour spatial upsampling: output pixel Y copies input Y / r.
template <typename T>
LightFieldT<T> upsample_views_nearest(const LightFieldT<T>& field, Index r_s);

}  // namespace lf4d
