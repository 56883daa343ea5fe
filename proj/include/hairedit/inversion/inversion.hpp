#pragma once

#include <cstdint>

#include "hairedit/generator/backend.hpp"
#include "hairedit/optim/adam.hpp"
#include "hairedit/perceptual/backends.hpp"

namespace hairedit {

struct InversionConfig {
  double learning_rate = 0.01;
  int steps = 200;
  std::uint64_t seed = 0;

  optim::AdamSettings adam() const {
    optim::AdamSettings s;
    s.learning_rate = learning_rate;
    return s;
  }
};

struct WPlusInversion {
  LatentWPlus w;
  optim::Trajectory trajectory;
  double mse = 0.0;  // reconstruction MSE of the returned latent
};

struct FsEmbedding {
  LatentFS fs;
  optim::Trajectory trajectory;
  double mse = 0.0;
};

// Reconstruction objective: pixel MSE plus patch distance.
double reconstruction_loss(const Image& a, const Image& b, const PatchDistanceBackend& pd);

// Optimizes a W+ code from the mean latent so that its synthesis matches
// `img`. Requires cfg.steps >= 1.
WPlusInversion invert_wplus(const Image& img, const GeneratorBackend& gen, const PatchDistanceBackend& pd,
                            const InversionConfig& cfg, const optim::ProgressFn& progress = nullptr);

// Refines the style-stage feature of `w` with layers 8-18 held fixed.
// cfg.steps may be 0, which returns synth_to_stage(w, style) unchanged.
FsEmbedding embed_fs(const Image& img, const LatentWPlus& w, const GeneratorBackend& gen,
                     const PatchDistanceBackend& pd, const InversionConfig& cfg,
                     const optim::ProgressFn& progress = nullptr);

// Synthesis of an FS code.
Image synthesize_fs(const LatentFS& fs, const GeneratorBackend& gen);

}  // namespace hairedit
