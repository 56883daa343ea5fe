#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hairedit {

inline constexpr int kLatentDim = 512;
inline constexpr int kNumLayers = 18;

// Generator layers are numbered 1..18 throughout, matching how the style
// blocks are usually referred to (layers 1-7 feed the style stage, 8-14 the
// color stage, 15-18 the output head).
struct LayerRange {
  int first = 1;
  int last = kNumLayers;

  int count() const { return last - first + 1; }
  bool contains(int layer) const { return layer >= first && layer <= last; }
  bool covers(const LayerRange& other) const {
    return first <= other.first && last >= other.last;
  }
  bool operator==(const LayerRange&) const = default;
};

inline constexpr LayerRange kAllLayers{1, 18};
inline constexpr LayerRange kStyleLayers{1, 7};
inline constexpr LayerRange kFsTailLayers{8, 18};
inline constexpr LayerRange kColorStageLayers{8, 14};
inline constexpr LayerRange kColorEditLayers{10, 13};
inline constexpr LayerRange kOutputLayers{15, 18};

class LatentW {
 public:
  LatentW();
  explicit LatentW(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool operator==(const LatentW&) const = default;

 private:
  std::vector<double> values_;
};

class LatentSlice;

// W+ code: 18 stacked 512-vectors stored contiguously, layer-major.
class LatentWPlus {
 public:
  LatentWPlus();
  explicit LatentWPlus(std::vector<double> flat);
  static LatentWPlus broadcast(const LatentW& w);

  std::span<const double> layer(int index) const;
  std::span<double> layer(int index);
  LatentW layer_code(int index) const;

  LatentSlice slice(LayerRange range) const;
  void assign(const LatentSlice& slice);

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  bool operator==(const LatentWPlus&) const = default;

 private:
  std::vector<double> data_;
};

// A contiguous run of W+ layers, e.g. the tail {w_8 .. w_18} of an FS code.
class LatentSlice {
 public:
  LatentSlice(LayerRange range, std::vector<double> flat);

  LayerRange range() const { return range_; }
  std::span<const double> layer(int index) const;
  std::span<const double> flat() const { return data_; }

  bool operator==(const LatentSlice&) const = default;

 private:
  LayerRange range_;
  std::vector<double> data_;
};

enum class Stage { kStyle, kColor, kOutput };

const char* stage_name(Stage stage);
Stage parse_stage(const std::string& name);
int stage_order(Stage stage);

struct Shape3 {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& shape);

// Spatial tensor tapped from a generator stage. Layout is HWC, row-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(Stage stage, Shape3 shape);
  FeatureMap(Stage stage, Shape3 shape, std::vector<double> data);

  Stage stage() const { return stage_; }
  const Shape3& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }

  double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c];
  }
  double& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  Stage stage_ = Stage::kStyle;
  Shape3 shape_;
  std::vector<double> data_;
};

// {0,1} region selector stored as reals so blending stays pure arithmetic.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, double fill = 0.0);
  BinaryMask(int height, int width, std::vector<double> data);

  static BinaryMask ones(int height, int width) { return BinaryMask(height, width, 1.0); }
  static BinaryMask zeros(int height, int width) { return BinaryMask(height, width, 0.0); }

  int height() const { return height_; }
  int width() const { return width_; }
  double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, bool on) {
    data_[static_cast<std::size_t>(y) * width_ + x] = on ? 1.0 : 0.0;
  }

  std::span<const double> data() const { return data_; }
  std::size_t count() const;
  bool empty_region() const { return count() == 0; }

  bool operator==(const BinaryMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// RGB image with values in [0,1], HWC row-major.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  Shape3 shape() const { return {height_, width_, kChannels}; }

  double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  double& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Image clamped() const;

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// FS code: style-stage feature replaces layers 1-7, S holds layers 8-18.
struct LatentFS {
  FeatureMap f7;
  LatentSlice s{kFsTailLayers, std::vector<double>(kFsTailLayers.count() * kLatentDim, 0.0)};
};

}  // namespace hairedit
