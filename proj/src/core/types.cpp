#include "hairedit/core/types.hpp"

#include <algorithm>
#include <cmath>

#include "hairedit/error.hpp"

namespace hairedit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kUnknownStage: return "unknown stage";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kDecode: return "decode error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kUnavailable: return "unavailable";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, std::string(what) + " has non-finite entries");
  }
}

}  // namespace

LatentW::LatentW() : values_(kLatentDim, 0.0) {}

LatentW::LatentW(std::vector<double> values) : values_(std::move(values)) {
  require(values_.size() == kLatentDim, ErrorKind::kShapeMismatch,
          "latent must have 512 entries, got " + std::to_string(values_.size()));
  require_finite(values_, "latent");
}

LatentWPlus::LatentWPlus() : data_(kNumLayers * kLatentDim, 0.0) {}

LatentWPlus::LatentWPlus(std::vector<double> flat) : data_(std::move(flat)) {
  require(data_.size() == kNumLayers * kLatentDim, ErrorKind::kShapeMismatch,
          "W+ latent must have 18x512 entries, got " + std::to_string(data_.size()));
  require_finite(data_, "W+ latent");
}

LatentWPlus LatentWPlus::broadcast(const LatentW& w) {
  LatentWPlus out;
  for (int l = 1; l <= kNumLayers; ++l) {
    std::ranges::copy(w.values(), out.layer(l).begin());
  }
  return out;
}

std::span<const double> LatentWPlus::layer(int index) const {
  require(index >= 1 && index <= kNumLayers, ErrorKind::kInvalidArgument,
          "layer index out of range: " + std::to_string(index));
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(index - 1) * kLatentDim, kLatentDim);
}

std::span<double> LatentWPlus::layer(int index) {
  require(index >= 1 && index <= kNumLayers, ErrorKind::kInvalidArgument,
          "layer index out of range: " + std::to_string(index));
  return std::span<double>(data_).subspan(static_cast<std::size_t>(index - 1) * kLatentDim, kLatentDim);
}

LatentW LatentWPlus::layer_code(int index) const {
  auto l = layer(index);
  return LatentW(std::vector<double>(l.begin(), l.end()));
}

LatentSlice LatentWPlus::slice(LayerRange range) const {
  require(kAllLayers.covers(range) && range.count() > 0, ErrorKind::kInvalidArgument,
          "invalid layer range");
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(range.first - 1) * kLatentDim;
  auto end = data_.begin() + static_cast<std::ptrdiff_t>(range.last) * kLatentDim;
  return LatentSlice(range, std::vector<double>(begin, end));
}

void LatentWPlus::assign(const LatentSlice& slice) {
  std::ranges::copy(slice.flat(), data_.begin() + static_cast<std::ptrdiff_t>(slice.range().first - 1) * kLatentDim);
}

LatentSlice::LatentSlice(LayerRange range, std::vector<double> flat)
    : range_(range), data_(std::move(flat)) {
  require(kAllLayers.covers(range) && range.count() > 0, ErrorKind::kInvalidArgument,
          "invalid layer range");
  require(data_.size() == static_cast<std::size_t>(range.count()) * kLatentDim,
          ErrorKind::kShapeMismatch, "latent slice size does not match its layer range");
  require_finite(data_, "latent slice");
}

std::span<const double> LatentSlice::layer(int index) const {
  require(range_.contains(index), ErrorKind::kInvalidArgument,
          "layer " + std::to_string(index) + " not in slice");
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(index - range_.first) * kLatentDim,
                                                kLatentDim);
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kStyle: return "style";
    case Stage::kColor: return "color";
    case Stage::kOutput: return "output";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "style") return Stage::kStyle;
  if (name == "color") return Stage::kColor;
  if (name == "output") return Stage::kOutput;
  fail(ErrorKind::kUnknownStage, "'" + name + "'");
}

int stage_order(Stage stage) { return static_cast<int>(stage); }

std::string to_string(const Shape3& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

FeatureMap::FeatureMap(Stage stage, Shape3 shape)
    : stage_(stage), shape_(shape), data_(shape.size(), 0.0) {
  require(shape.height > 0 && shape.width > 0 && shape.channels > 0, ErrorKind::kInvalidArgument,
          "feature map dimensions must be positive");
}

FeatureMap::FeatureMap(Stage stage, Shape3 shape, std::vector<double> data)
    : stage_(stage), shape_(shape), data_(std::move(data)) {
  require(shape.height > 0 && shape.width > 0 && shape.channels > 0, ErrorKind::kInvalidArgument,
          "feature map dimensions must be positive");
  require(data_.size() == shape.size(), ErrorKind::kShapeMismatch,
          "feature data size does not match shape " + to_string(shape));
  require_finite(data_, "feature map");
}

BinaryMask::BinaryMask(int height, int width, double fill)
    : height_(height), width_(width),
      data_(static_cast<std::size_t>(height) * width, fill != 0.0 ? 1.0 : 0.0) {
  require(height > 0 && width > 0, ErrorKind::kInvalidArgument, "mask dimensions must be positive");
}

BinaryMask::BinaryMask(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  require(height > 0 && width > 0, ErrorKind::kInvalidArgument, "mask dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width, ErrorKind::kShapeMismatch,
          "mask data size does not match dimensions");
  for (double v : data_) {
    require(v == 0.0 || v == 1.0, ErrorKind::kInvalidArgument, "mask entries must be 0 or 1");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::ranges::count(data_, 1.0));
}

Image::Image(int height, int width, double fill)
    : height_(height), width_(width),
      data_(static_cast<std::size_t>(height) * width * kChannels, fill) {
  require(height > 0 && width > 0, ErrorKind::kInvalidArgument, "image dimensions must be positive");
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  require(height > 0 && width > 0, ErrorKind::kInvalidArgument, "image dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width * kChannels,
          ErrorKind::kShapeMismatch, "image data size does not match dimensions");
  require_finite(data_, "image");
}

Image Image::clamped() const {
  Image out = *this;
  for (double& v : out.data_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace hairedit
