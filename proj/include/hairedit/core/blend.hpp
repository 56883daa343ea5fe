#pragma once

#include "hairedit/core/types.hpp"

namespace hairedit {

// out = a*m + b*(1-m) per channel. Cells where m is 0 copy b exactly and
// cells where m is 1 copy a exactly.
FeatureMap blend_features(const FeatureMap& a, const FeatureMap& b, const BinaryMask& m);

// Area-average then threshold; an average of exactly 0.5 maps to 1.
// Target must not exceed the source resolution.
BinaryMask downsample_mask(const BinaryMask& m, int target_h, int target_w);

// A target cell is on when any source pixel mapped into it is on. Keeps
// strokes thinner than half a cell, which the area rule would erase.
BinaryMask downsample_mask_any(const BinaryMask& m, int target_h, int target_w);

// Nearest-neighbour upsampling by an integer factor.
BinaryMask upsample_mask(const BinaryMask& m, int target_h, int target_w);

// Resizes in whichever direction is needed.
BinaryMask resize_mask(const BinaryMask& m, int target_h, int target_w);

// Square structuring element of side 2*radius+1.
BinaryMask dilate_mask(const BinaryMask& m, int radius);

// (1 - hair_a) * (1 - hair_b)
BinaryMask mask_intersection_nonhair(const BinaryMask& hair_a, const BinaryMask& hair_b);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_complement(const BinaryMask& m);

}  // namespace hairedit
