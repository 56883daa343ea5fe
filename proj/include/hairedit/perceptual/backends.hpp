#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "hairedit/ad/ops.hpp"
#include "hairedit/core/types.hpp"

namespace hairedit {

// An RGB image living on a tape (HWC, 3 channels).
struct ImageVar {
  ad::Var v;
  int height = 0;
  int width = 0;
};

ImageVar image_constant(ad::Tape& tape, const Image& image);
ImageVar image_input(ad::Tape& tape, const Image& image);

// Feature map on a tape (HWC).
struct FeatureVar {
  ad::Var v;
  int height = 0;
  int width = 0;
  int channels = 0;
};

enum class FaceLabel : int { kBackground = 0, kFace = 1, kHair = 2, kEar = 3 };

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<FaceLabel> labels;

  FaceLabel at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

class TextImageSimilarityBackend {
 public:
  virtual ~TextImageSimilarityBackend() = default;
  virtual std::string name() const = 0;
  // Unit-norm embeddings.
  virtual ad::Var embed_image(const ImageVar& image) const = 0;
  virtual std::vector<double> embed_text(const std::string& text) const = 0;

  std::vector<double> embed_image(const Image& image) const;
  double similarity(const std::string& text, const Image& image) const;
};

class KeypointBackend {
 public:
  virtual ~KeypointBackend() = default;
  virtual std::string name() const = 0;
  virtual int count() const = 0;
  // 3 * count() values, point-major (x, y, z).
  virtual ad::Var extract(const ImageVar& image) const = 0;

  std::vector<std::array<double, 3>> extract(const Image& image) const;
};

class FaceParsingBackend {
 public:
  virtual ~FaceParsingBackend() = default;
  virtual std::string name() const = 0;
  virtual LabelMap parse(const Image& image) const = 0;
  // Differentiable hair probability per pixel (h*w values in [0,1]).
  virtual ad::Var soft_hair(const ImageVar& image) const = 0;
  // Five semantic levels, fine to coarse.
  virtual std::vector<FeatureVar> multi_level_features(const ImageVar& image) const = 0;

  BinaryMask hair_mask(const Image& image) const;
  BinaryMask ear_mask(const Image& image) const;
  BinaryMask nonhair_mask(const Image& image) const;
};

class PerceptualFeatureBackend {
 public:
  virtual ~PerceptualFeatureBackend() = default;
  virtual std::string name() const = 0;
  // Four layers, shallow to deep.
  virtual std::vector<FeatureVar> features(const ImageVar& image) const = 0;
};

class PatchDistanceBackend {
 public:
  virtual ~PatchDistanceBackend() = default;
  virtual std::string name() const = 0;
  virtual ad::Var distance(const ImageVar& a, const ImageVar& b) const = 0;

  double distance(const Image& a, const Image& b) const;
};

class IdentityBackend {
 public:
  virtual ~IdentityBackend() = default;
  virtual std::string name() const = 0;
  virtual ad::Var embed(const ImageVar& image) const = 0;

  std::vector<double> embed(const Image& image) const;
};

struct Backends {
  std::shared_ptr<const TextImageSimilarityBackend> similarity;
  std::shared_ptr<const KeypointBackend> keypoints;
  std::shared_ptr<const FaceParsingBackend> parsing;
  std::shared_ptr<const PerceptualFeatureBackend> perceptual;
  std::shared_ptr<const PatchDistanceBackend> patch;
  std::shared_ptr<const IdentityBackend> identity;
};

// Gram matrix of a value feature map: G[i][j] = (1/P) sum_p f_i f_j.
std::vector<double> gram_matrix(const FeatureMap& f);

}  // namespace hairedit
