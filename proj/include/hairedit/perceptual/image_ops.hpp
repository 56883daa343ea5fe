#pragma once

#include <array>
#include <memory>

#include "hairedit/ad/ops.hpp"

namespace hairedit {

// Sparse resampling operators on HWC tensors. Maps are cached per shape, so
// repeated calls are cheap and the returned pointers stay valid forever.

// factor x factor box average; h and w must be divisible by factor.
std::shared_ptr<const ad::SparseMap> avg_pool_map(int h, int w, int channels, int factor);

// Per-channel mean over `bands` horizontal bands: output bands x channels.
std::shared_ptr<const ad::SparseMap> row_band_map(int h, int w, int channels, int bands);

// Picks one channel: output h*w values.
std::shared_ptr<const std::vector<int>> channel_index(int h, int w, int channels, int channel);

// Bilinear sampling at source(x, y) = A * (x_out, y_out, 1) in normalized
// [0,1] coordinates (pixel centres), clamped at the border. Not cached.
std::shared_ptr<const ad::SparseMap> affine_warp_map(int h, int w, int channels,
                                                     const std::array<double, 6>& affine);

}  // namespace hairedit
