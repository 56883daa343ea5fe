#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hairedit/core/types.hpp"

namespace hairedit {

struct Stroke {
  double width = 1.0;                         // pixels
  std::vector<std::array<double, 2>> points;  // (x, y) in pixel units

  bool operator==(const Stroke&) const = default;
};

// Hair sketch in image coordinates. Serialized as
//   {"format": "hairedit-sketch", "version": 1, "width": W, "height": H,
//    "strokes": [{"width": w, "points": [[x, y], ...]}, ...],
//    "mask": "optional/relative/path.png"}
struct SketchInput {
  int width = 0;
  int height = 0;
  std::vector<Stroke> strokes;
  std::string mask_ref;  // optional rasterized mask reference

  // A pixel is on when its centre lies within width/2 of a stroke segment.
  BinaryMask raster() const;

  std::string to_json() const;
  static SketchInput from_json(const std::string& text);
  static SketchInput read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  // Copy with each stroke independently dropped with probability p.
  SketchInput with_dropout(double p, std::uint64_t seed) const;

  bool operator==(const SketchInput&) const = default;
};

}  // namespace hairedit
