#include "hairedit/generator/backend.hpp"

#include <algorithm>

#include "hairedit/error.hpp"

namespace hairedit {

LayerRange stage_layers(Stage stage) {
  switch (stage) {
    case Stage::kStyle: return kStyleLayers;
    case Stage::kColor: return kColorStageLayers;
    case Stage::kOutput: return kOutputLayers;
  }
  fail(ErrorKind::kUnknownStage, "unhandled stage");
}

LayerRange resume_layers(Stage from, Stage to) {
  require(stage_order(to) > stage_order(from), ErrorKind::kInvalidArgument,
          std::string("cannot resume from ") + stage_name(from) + " to " + stage_name(to));
  return LayerRange{stage_layers(from).last + 1, stage_layers(to).last};
}

void GeneratorBackend::check_features(const FeatureMap& f) const {
  require(f.stage() != Stage::kOutput, ErrorKind::kInvalidArgument, "output stage has no feature map");
  const Shape3 expected = stage_shape(f.stage());
  require(f.shape() == expected, ErrorKind::kShapeMismatch,
          std::string(stage_name(f.stage())) + " features must be " + to_string(expected) + ", got " +
              to_string(f.shape()));
}

FeatureMap GeneratorBackend::synth_to_stage(const LatentWPlus& w, Stage stage) const {
  require(stage != Stage::kOutput, ErrorKind::kInvalidArgument,
          "synth_to_stage targets a feature stage; use synthesize for images");
  ad::Tape tape;
  ad::Var out = forward_to_stage(tape, latent_constant(tape, w), stage);
  return to_feature_map(out, stage, stage_shape(stage));
}

SynthOutput GeneratorBackend::synth_from_stage(const FeatureMap& f, const LatentSlice& tail, Stage to) const {
  check_features(f);
  const LayerRange needed = resume_layers(f.stage(), to);
  require(tail.range().covers(needed), ErrorKind::kInvalidArgument,
          "latent tail must cover layers " + std::to_string(needed.first) + "-" + std::to_string(needed.last));
  LatentWPlus padded;
  padded.assign(tail);
  ad::Tape tape;
  ad::Var feats = tape.constant(f.data());
  ad::Var out = forward_from_stage(feats, latent_constant(tape, padded), f.stage(), to);
  const Shape3 shape = stage_shape(to);
  if (to == Stage::kOutput) return to_image(out, shape.height, shape.width);
  return to_feature_map(out, to, shape);
}

FeatureMap GeneratorBackend::synth_features_from(const FeatureMap& f, const LatentSlice& tail, Stage to) const {
  require(to != Stage::kOutput, ErrorKind::kInvalidArgument, "use synth_image_from for images");
  return std::get<FeatureMap>(synth_from_stage(f, tail, to));
}

Image GeneratorBackend::synth_image_from(const FeatureMap& f, const LatentSlice& tail) const {
  return std::get<Image>(synth_from_stage(f, tail, Stage::kOutput));
}

Image GeneratorBackend::synthesize(const LatentWPlus& w) const {
  ad::Tape tape;
  ad::Var wv = latent_constant(tape, w);
  ad::Var f7 = forward_to_stage(tape, wv, Stage::kStyle);
  ad::Var img = forward_from_stage(f7, wv, Stage::kStyle, Stage::kOutput);
  const Shape3 shape = stage_shape(Stage::kOutput);
  return to_image(img, shape.height, shape.width);
}

LatentWPlus truncation_init(const LatentW& w_mean, const LatentW& w_random, double psi) {
  require(psi >= 0.0 && psi <= 1.0, ErrorKind::kInvalidArgument,
          "truncation psi must lie in [0, 1], got " + std::to_string(psi));
  std::vector<double> v(kLatentDim);
  for (int i = 0; i < kLatentDim; ++i) v[i] = w_mean[i] + psi * (w_random[i] - w_mean[i]);
  return LatentWPlus::broadcast(LatentW(std::move(v)));
}

ad::Var latent_input(ad::Tape& tape, const LatentWPlus& w) { return tape.input(w.flat()); }
ad::Var latent_constant(ad::Tape& tape, const LatentWPlus& w) { return tape.constant(w.flat()); }

FeatureMap to_feature_map(ad::Var v, Stage stage, Shape3 shape) {
  auto values = v.value();
  return FeatureMap(stage, shape, std::vector<double>(values.begin(), values.end()));
}

Image to_image(ad::Var v, int height, int width) {
  auto values = v.value();
  return Image(height, width, std::vector<double>(values.begin(), values.end()));
}

}  // namespace hairedit
