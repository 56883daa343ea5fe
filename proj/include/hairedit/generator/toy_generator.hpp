#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "hairedit/ad/ops.hpp"
#include "hairedit/core/io.hpp"
#include "hairedit/generator/backend.hpp"

namespace hairedit {

// Desk-scale stand-in for a style-based generator.
//
// Every layer l maps its 512-d code to a 4-d style s_l = A_l w_l. Layers 1-7
// drive a procedural portrait at the style stage (8x8x16): face pose and size
// come from s_1/s_2, the hair band (height and tilt) from s_3/s_4, and the
// rest mixes smooth texture fields. Channel 0 of every tapped feature map is
// the hair logit, channel 1 at the style stage is the face field.
//
// The color stage (32x32x8) bilinearly upsamples the style features and
// applies per-channel modulation: s_10..s_13 set the hair colour (with a
// small leak into skin and background), s_8/s_9/s_14 the lighting.
// The output head (layers 15-18) is a per-cell colour transform; each colour
// cell becomes a 2x2 pixel block, and hair cells get a column-alternating
// strand texture of amplitude kStrandAmplitude that parsers can detect.
class ToyGenerator final : public GeneratorBackend {
 public:
  static constexpr int kStyleSize = 8;
  static constexpr int kStyleChannels = 16;
  static constexpr int kColorSize = 32;
  static constexpr int kColorChannels = 8;
  static constexpr int kImageSize = 64;
  static constexpr int kCodeDim = 4;
  static constexpr int kHairChannel = 0;
  static constexpr double kStrandAmplitude = 0.08;

  struct Weights {
    std::array<ad::Matrix, kNumLayers> style_proj;  // 4 x 512 each
    std::vector<double> mean_latent;                // 512
    ad::Matrix texture_basis;                       // (8*8*14) x 22
    std::vector<double> texture_bias;               // 8*8*14
    ad::Matrix hair_color;                          // 3 x 16 (s_10..s_13)
    ad::Matrix color_leak;                          // 3 x 16
    ad::Matrix lighting;                            // 3 x 12 (s_8, s_9, s_14)
    ad::Matrix hair_texture;                        // 3 x 14
    ad::Matrix base_color;                          // 3 x 15 (face weight + texture)
    ad::Matrix detail;                              // 1 x 14
    ad::Matrix output_gain;                         // 3 x 16 (s_15..s_18)
    ad::Matrix output_bias;                         // 3 x 16
    ad::Matrix to_rgb;                              // 3 x 8
  };

  explicit ToyGenerator(std::uint64_t seed = 7);
  explicit ToyGenerator(Weights weights);

  static Weights random_weights(std::uint64_t seed);
  static std::unique_ptr<ToyGenerator> from_archive(const io::TensorArchive& archive);
  io::TensorArchive to_archive() const;

  std::string name() const override { return "toy"; }
  const LatentW& mean_latent() const override { return mean_; }
  Shape3 stage_shape(Stage stage) const override;
  LatentW sample_random_latent(std::uint64_t seed) const override;

  ad::Var forward_to_stage(ad::Tape& tape, ad::Var w, Stage stage) const override;
  ad::Var forward_from_stage(ad::Var features, ad::Var w, Stage from, Stage to) const override;

  // Style code of one layer: A_l w_l.
  std::array<double, kCodeDim> style_code(const LatentWPlus& w, int layer) const;

  // W+ offset (zero outside `layer`) that changes s_layer[component] by
  // exactly `amount` and leaves the other components of that layer's code
  // untouched (minimum-norm solution).
  LatentWPlus code_offset(int layer, int component, double amount) const;

  // Direction that empties the hair band: transpose of the hair-height code
  // rows in layers 3 and 4. Being a plain transpose it also nudges other
  // components slightly, like real W+ edits do.
  LatentWPlus hair_removal_direction() const;

  const Weights& weights() const { return w_; }

 private:
  ad::Var style_codes(ad::Var w, LayerRange layers) const;
  ad::Var style_features(ad::Tape& tape, ad::Var w) const;
  ad::Var color_features(ad::Var f7, ad::Var w) const;
  ad::Var output_image(ad::Var f14, ad::Var w) const;
  void build_static_maps();

  Weights w_;
  LatentW mean_;
  std::shared_ptr<const ad::SparseMap> upsample_;           // 8x8x16 -> 32x32x16
  std::shared_ptr<const std::vector<int>> style_interleave_;  // channel blocks -> HWC
  std::shared_ptr<const std::vector<int>> color_interleave_;
  std::shared_ptr<const std::vector<int>> up_hair_;     // channel 0 of upsampled
  std::shared_ptr<const std::vector<int>> up_face_;     // channel 1
  std::shared_ptr<const std::vector<int>> up_texture_;  // channels 2..15
  std::shared_ptr<const std::vector<int>> cell_to_pixel_;  // 32x32x3 -> 64x64x3
  std::shared_ptr<const std::vector<int>> cell_of_pixel_;     // 32x32 -> 64x64x3
  std::shared_ptr<const std::vector<int>> hair_logit_index_;  // channel 0 of 32x32x8
  std::vector<double> strand_sign_;
  std::vector<double> grid_x_, grid_y_;
};

}  // namespace hairedit
