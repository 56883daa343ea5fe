#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include "hairedit/ad/tape.hpp"
#include "hairedit/core/types.hpp"

namespace hairedit {

// Layers consumed while synthesizing *into* a stage.
LayerRange stage_layers(Stage stage);
// Layers needed to resume synthesis at `from` and stop at `to`.
LayerRange resume_layers(Stage from, Stage to);

using SynthOutput = std::variant<FeatureMap, Image>;

// Hierarchical generator with two feature tap points: the style stage (after
// layer 7) and the color stage (after layer 14).
//
// Implementations provide the differentiable core on an ad::Tape; the value
// API below is built on top of it. A backend instance is read-only after
// construction, so concurrent synthesis calls are safe.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual std::string name() const = 0;
  virtual const LatentW& mean_latent() const = 0;
  // Output stage shape is the image shape (h, w, 3).
  virtual Shape3 stage_shape(Stage stage) const = 0;
  virtual LatentW sample_random_latent(std::uint64_t seed) const = 0;

  // `w` is a full W+ node (18*512); only the layers the span needs are read.
  virtual ad::Var forward_to_stage(ad::Tape& tape, ad::Var w, Stage stage) const = 0;
  virtual ad::Var forward_from_stage(ad::Var features, ad::Var w, Stage from, Stage to) const = 0;

  FeatureMap synth_to_stage(const LatentWPlus& w, Stage stage) const;
  SynthOutput synth_from_stage(const FeatureMap& f, const LatentSlice& tail, Stage to) const;
  FeatureMap synth_features_from(const FeatureMap& f, const LatentSlice& tail, Stage to) const;
  Image synth_image_from(const FeatureMap& f, const LatentSlice& tail) const;
  Image synthesize(const LatentWPlus& w) const;

  void check_features(const FeatureMap& f) const;
};

// w_mean + psi * (w_random - w_mean), broadcast to all 18 layers.
LatentWPlus truncation_init(const LatentW& w_mean, const LatentW& w_random, double psi);

// Helpers for moving between value types and tape nodes.
ad::Var latent_input(ad::Tape& tape, const LatentWPlus& w);
ad::Var latent_constant(ad::Tape& tape, const LatentWPlus& w);
FeatureMap to_feature_map(ad::Var v, Stage stage, Shape3 shape);
Image to_image(ad::Var v, int height, int width);

}  // namespace hairedit
