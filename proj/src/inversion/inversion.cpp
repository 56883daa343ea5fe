#include "hairedit/inversion/inversion.hpp"

#include "hairedit/error.hpp"
#include "hairedit/losses/losses.hpp"

namespace hairedit {

namespace {

void check_image(const Image& img, const GeneratorBackend& gen) {
  const Shape3 out = gen.stage_shape(Stage::kOutput);
  require(img.height() == out.height && img.width() == out.width, ErrorKind::kShapeMismatch,
          "image is " + std::to_string(img.height()) + "x" + std::to_string(img.width()) + " but the " + gen.name() +
              " generator renders " + std::to_string(out.height) + "x" + std::to_string(out.width));
}

ad::Var recon(ad::Var synth, const ImageVar& target, const PatchDistanceBackend& pd) {
  const ImageVar s{synth, target.height, target.width};
  return ad::add(loss::mse(s, target), pd.distance(s, target));
}

}  // namespace

double reconstruction_loss(const Image& a, const Image& b, const PatchDistanceBackend& pd) {
  return loss::mse(a, b) + pd.distance(a, b);
}

WPlusInversion invert_wplus(const Image& img, const GeneratorBackend& gen, const PatchDistanceBackend& pd,
                            const InversionConfig& cfg, const optim::ProgressFn& progress) {
  require(cfg.steps >= 1, ErrorKind::kInvalidArgument, "W+ inversion needs at least one step");
  require(cfg.learning_rate > 0.0, ErrorKind::kInvalidArgument, "learning rate must be > 0");
  check_image(img, gen);
  const LatentWPlus init = LatentWPlus::broadcast(gen.mean_latent());
  std::vector<double> params(init.flat().begin(), init.flat().end());
  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var w) {
    ad::Var f7 = gen.forward_to_stage(tape, w, Stage::kStyle);
    ad::Var out = gen.forward_from_stage(f7, w, Stage::kStyle, Stage::kOutput);
    return recon(out, image_constant(tape, img), pd);
  });
  WPlusInversion result;
  result.trajectory = optim::minimize(params, objective, cfg.steps, cfg.adam(), progress, optim::Keep::kBest);
  result.w = LatentWPlus(std::move(params));
  result.mse = loss::mse(gen.synthesize(result.w), img);
  return result;
}

FsEmbedding embed_fs(const Image& img, const LatentWPlus& w, const GeneratorBackend& gen,
                     const PatchDistanceBackend& pd, const InversionConfig& cfg, const optim::ProgressFn& progress) {
  require(cfg.steps >= 0, ErrorKind::kInvalidArgument, "FS refinement steps must be >= 0");
  check_image(img, gen);
  const FeatureMap f0 = gen.synth_to_stage(w, Stage::kStyle);
  std::vector<double> params(f0.data().begin(), f0.data().end());
  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var f7) {
    ad::Var out = gen.forward_from_stage(f7, latent_constant(tape, w), Stage::kStyle, Stage::kOutput);
    return recon(out, image_constant(tape, img), pd);
  });
  FsEmbedding result;
  result.trajectory = optim::minimize(params, objective, cfg.steps, cfg.adam(), progress, optim::Keep::kBest);
  result.fs.f7 = FeatureMap(Stage::kStyle, f0.shape(), std::move(params));
  result.fs.s = w.slice(kFsTailLayers);
  result.mse = loss::mse(synthesize_fs(result.fs, gen), img);
  return result;
}

Image synthesize_fs(const LatentFS& fs, const GeneratorBackend& gen) { return gen.synth_image_from(fs.f7, fs.s); }

}  // namespace hairedit
