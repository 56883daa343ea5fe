#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hairedit/ad/ops.hpp"
#include "hairedit/perceptual/backends.hpp"

namespace hairedit {

struct LossWeights {
  double clip = 1.0;
  double pose = 200.0;
  double shape = 1.0;
  double style = 2000.0;
  double reg = 1.0;
  double mse = 0.5;
  double lpips = 0.8;
  double m_par = 1.0;

  // Throws kConfig when any weight is negative or not finite.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// N image transforms (random resized crop of scale 0.8-1.0 plus up to
// +-5 degrees of rotation), drawn deterministically from a seed.
class AugmentationSet {
 public:
  AugmentationSet(int count, std::uint64_t seed, int height, int width);

  int count() const { return static_cast<int>(maps_.size()); }
  ImageVar apply(int i, const ImageVar& image) const;
  Image apply(int i, const Image& image) const;

  // The drawn affine maps (normalized coordinates), for inspection.
  const std::vector<std::array<double, 6>>& affines() const { return affines_; }

 private:
  int height_;
  int width_;
  std::vector<std::array<double, 6>> affines_;
  std::vector<std::shared_ptr<const ad::SparseMap>> maps_;
};

namespace loss {

// Mask values repeated for every image channel.
std::vector<double> expand_mask(const BinaryMask& m, int channels = 3);

ad::Var clip(const ImageVar& image, const std::string& text, const AugmentationSet& augs,
             const TextImageSimilarityBackend& sim);
// (1/N) sum (1 - s_i) for precomputed similarities.
double clip_from_similarities(const std::vector<double>& similarities);

// Keypoints as flat (x, y, z) triples; (1/N_k) * summed squared displacement.
ad::Var pose(ad::Var kp_src, ad::Var kp_gen, int count);
ad::Var pose(const ImageVar& src, const ImageVar& gen, const KeypointBackend& kp);

ad::Var style(const ImageVar& ref, const ImageVar& gen, const BinaryMask& m_ref, const BinaryMask& m_gen,
              const PerceptualFeatureBackend& pf);

// ||w - w_prev||^2 over all entries.
ad::Var reg(ad::Var w, std::span<const double> w_prev);

// Mean squared difference between a soft hair map and a target mask.
ad::Var shape(ad::Var gen_hair, const BinaryMask& target);

// Sum of squared masked differences.
ad::Var bg(const ImageVar& i_style, const ImageVar& i_color, const BinaryMask& m_nonhair);

// Per region: mean squared error of the masked images plus patch distance of
// the masked images; inside m against i_color, outside against i_style.
ad::Var blend(const ImageVar& i_final, const ImageVar& i_color, const ImageVar& i_style, const BinaryMask& m_color,
              const PatchDistanceBackend& pd);

// Mean colour over mask pixels (3 values). Empty mask yields zeros.
ad::Var masked_mean_color(const ImageVar& image, const BinaryMask& m);
ad::Var avg_color(const ImageVar& gen, const BinaryMask& hair, const std::array<double, 3>& target);
// Hair-mean colour match against a reference image.
ad::Var reference_color(const ImageVar& gen, const BinaryMask& gen_hair, const Image& ref,
                        const BinaryMask& ref_hair);

// sum_i (1 - cos(P_i(target), P_i(pred))) over the parser's five levels.
ad::Var parsing_similarity(const ImageVar& pred, const ImageVar& target, const FaceParsingBackend& parsing);
ad::Var sketch_trainer(const ImageVar& pred, const ImageVar& target, const FaceParsingBackend& parsing,
                       const PatchDistanceBackend& pd, const LossWeights& w);

// Mean squared error between images.
ad::Var mse(const ImageVar& a, const ImageVar& b);

// Value wrappers.
double clip(const Image& image, const std::string& text, const AugmentationSet& augs,
            const TextImageSimilarityBackend& sim);
double pose(const Image& src, const Image& gen, const KeypointBackend& kp);
double style(const Image& ref, const Image& gen, const BinaryMask& m_ref, const BinaryMask& m_gen,
             const PerceptualFeatureBackend& pf);
double reg(const LatentWPlus& w, const LatentWPlus& w_prev);
double shape(const BinaryMask& gen_hair, const BinaryMask& target);
double bg(const Image& i_style, const Image& i_color, const BinaryMask& m_nonhair);
double blend(const Image& i_final, const Image& i_color, const Image& i_style, const BinaryMask& m_color,
             const PatchDistanceBackend& pd);
double avg_color(const Image& gen, const BinaryMask& hair, const std::array<double, 3>& target);
double sketch_trainer(const Image& pred, const Image& target, const FaceParsingBackend& parsing,
                      const PatchDistanceBackend& pd, const LossWeights& w);
double mse(const Image& a, const Image& b);

}  // namespace loss
}  // namespace hairedit
