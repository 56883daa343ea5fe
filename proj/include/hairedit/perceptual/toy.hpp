#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "hairedit/perceptual/backends.hpp"

namespace hairedit {

// Deterministic stand-ins for the pretrained perceptual models. They are
// written against the toy generator's image statistics: hair carries a
// column-alternating strand texture, skin is warm (R - B > 0.1).

struct ToyTextTarget {
  std::array<double, 3> color{};
  double band_height = 0.0;  // fraction of the image height covered by hair
};

// Scores images by their 8 row-band colour means relative to a neutral
// image; a text hashes to a hair colour and band height.
class ToyTextSimilarity final : public TextImageSimilarityBackend {
 public:
  static constexpr int kBands = 8;

  // Default neutral image is flat mid-gray at 64x64.
  ToyTextSimilarity();
  explicit ToyTextSimilarity(Image neutral);

  std::string name() const override { return "toy"; }
  ad::Var embed_image(const ImageVar& image) const override;
  std::vector<double> embed_text(const std::string& text) const override;
  using TextImageSimilarityBackend::embed_image;

  static ToyTextTarget target(const std::string& text);
  // The neutral image with the text's hair painted in.
  Image render_target(const std::string& text) const;

 private:
  std::vector<double> summary(const Image& image) const;

  Image neutral_;
  std::vector<double> neutral_summary_;
};

// Centroid of the visible skin plus four quadrant centroids (N_k = 5), with
// the skin mass fraction as the third coordinate.
class ToyKeypoints final : public KeypointBackend {
 public:
  explicit ToyKeypoints(double strand_threshold = 0.08) : threshold_(strand_threshold) {}
  std::string name() const override { return "toy"; }
  int count() const override { return 5; }
  ad::Var extract(const ImageVar& image) const override;
  using KeypointBackend::extract;

 private:
  double threshold_;
};

class ToyFaceParser final : public FaceParsingBackend {
 public:
  // Pair-difference threshold; matches the generator's strand amplitude.
  explicit ToyFaceParser(double strand_threshold = 0.08, std::uint64_t seed = 11);

  std::string name() const override { return "toy"; }
  LabelMap parse(const Image& image) const override;
  ad::Var soft_hair(const ImageVar& image) const override;
  std::vector<FeatureVar> multi_level_features(const ImageVar& image) const override;

 private:
  double threshold_;
  std::array<ad::Matrix, 5> rgb_mix_;
  std::array<ad::Matrix, 5> hair_mix_;
  std::array<std::vector<double>, 5> bias_;
};

// Four stages of pool / pointwise mix / tanh: 64^2x4, 32^2x6, 16^2x8, 8^2x8.
class ToyPerceptualFeatures final : public PerceptualFeatureBackend {
 public:
  explicit ToyPerceptualFeatures(std::uint64_t seed = 13);
  std::string name() const override { return "toy"; }
  std::vector<FeatureVar> features(const ImageVar& image) const override;

 private:
  std::array<ad::Matrix, 4> mix_;
  std::array<std::vector<double>, 4> bias_;
};

// Mean squared difference of 4x4 block means.
class ToyPatchDistance final : public PatchDistanceBackend {
 public:
  static constexpr int kBlock = 4;
  std::string name() const override { return "toy"; }
  ad::Var distance(const ImageVar& a, const ImageVar& b) const override;
  using PatchDistanceBackend::distance;
};

// Random projection of the 8x8-pooled image, normalized.
class ToyIdentity final : public IdentityBackend {
 public:
  explicit ToyIdentity(std::uint64_t seed = 17);
  std::string name() const override { return "toy"; }
  ad::Var embed(const ImageVar& image) const override;
  using IdentityBackend::embed;

 private:
  ad::Matrix proj_;
};

Backends make_toy_backends(const Image& neutral);

}  // namespace hairedit
