#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hairedit/generator/backend.hpp"
#include "hairedit/inversion/inversion.hpp"
#include "hairedit/losses/losses.hpp"
#include "hairedit/proxies/sketch.hpp"

namespace hairedit {

class ToyGenerator;

enum class ProxyKind { kBald, kText, kReference, kSketch, kColor };
const char* proxy_kind_name(ProxyKind kind);

struct Proxy {
  ProxyKind kind = ProxyKind::kText;
  std::optional<LatentWPlus> w;
  std::optional<FeatureMap> f_style;  // synth_to_stage(w, style)
  // Bald proxy only: f_style blended into the source features.
  std::optional<FeatureMap> f_blended;
  BinaryMask region;  // style-stage resolution
  optim::Trajectory trajectory;
};

class BaldingMapper {
 public:
  virtual ~BaldingMapper() = default;
  virtual std::string name() const = 0;
  virtual LatentWPlus apply(const LatentWPlus& w) const = 0;
};

// Adds a fixed offset to layers 1-7 (the style-stage layers).
class DirectionBaldingMapper final : public BaldingMapper {
 public:
  explicit DirectionBaldingMapper(LatentWPlus direction);
  static std::unique_ptr<DirectionBaldingMapper> for_toy(const ToyGenerator& gen);

  std::string name() const override { return "direction"; }
  LatentWPlus apply(const LatentWPlus& w) const override;

 private:
  LatentWPlus direction_;
};

// Hair mask of `image` pooled to the generator's style-stage grid.
BinaryMask style_region(const Image& image, const GeneratorBackend& gen, const FaceParsingBackend& parsing);
// Hair plus ear pixels of the source, pooled to the style-stage grid.
BinaryMask bald_region(const Image& image, const GeneratorBackend& gen, const FaceParsingBackend& parsing);

Proxy make_bald_proxy(const LatentWPlus& w_src, const FeatureMap& f_src, const BinaryMask& m_bald,
                      const BaldingMapper& mapper, const GeneratorBackend& gen);

struct TextProxyOptions {
  std::uint64_t seed = 0;
  double psi = 0.3;
  int augmentations = 4;
  std::optional<BinaryMask> target_mask;  // image resolution; enables the shape term
  std::optional<LatentWPlus> init;        // overrides the truncated random start
};

// Composite text objective at `w`, evaluated with one fixed augmentation draw.
struct TextObjectiveTerms {
  double clip = 0.0;
  double pose = 0.0;
  double shape = 0.0;
  double total = 0.0;
};
TextObjectiveTerms text_objective(const LatentWPlus& w, const std::string& text, const Image& i_src,
                                  const GeneratorBackend& gen, const Backends& backends, const LossWeights& weights,
                                  const TextProxyOptions& opts, std::uint64_t aug_seed);

// Start point of the text proxy: truncation of a seeded random latent.
LatentWPlus text_proxy_init(const GeneratorBackend& gen, std::uint64_t seed, double psi);

Proxy make_text_proxy(const std::string& text, const Image& i_src, const GeneratorBackend& gen,
                      const Backends& backends, const LossWeights& weights, const InversionConfig& opt,
                      const TextProxyOptions& opts = {}, const optim::ProgressFn& progress = nullptr);

struct ReferenceProxyOptions {
  InversionConfig invert;                 // inversion of the reference image (start point)
  std::optional<BinaryMask> target_mask;  // image resolution; enables the shape term
  std::optional<LatentWPlus> init;        // skips the inversion when set
};

Proxy make_reference_proxy(const Image& i_ref, const Image& i_src, const GeneratorBackend& gen,
                           const Backends& backends, const LossWeights& weights, const InversionConfig& opt,
                           const ReferenceProxyOptions& opts = {}, const optim::ProgressFn& progress = nullptr,
                           std::vector<double>* step_norms = nullptr);

// --- sketch ------------------------------------------------------------------

// Feed-forward map from a sketch raster to W+:
//   w = w_mean + M [pooled raster cells, 1].
class SketchInverter {
 public:
  static constexpr int kGrid = 8;
  static constexpr int kFeatures = kGrid * kGrid + 1;

  SketchInverter(int image_height, int image_width, LatentW mean);

  int height() const { return height_; }
  int width() const { return width_; }
  std::vector<double> features(const SketchInput& sketch) const;
  LatentWPlus invert(const SketchInput& sketch) const;

  std::vector<double>& matrix() { return matrix_; }
  const std::vector<double>& matrix() const { return matrix_; }
  const LatentW& mean() const { return mean_; }

  void save(const std::filesystem::path& path) const;
  static SketchInverter load(const std::filesystem::path& path);

 private:
  int height_;
  int width_;
  LatentW mean_;
  std::vector<double> matrix_;  // (18*512) x kFeatures, row-major
};

struct SketchPair {
  std::string name;
  SketchInput sketch;
  Image image;
};

struct SketchTrainConfig {
  int steps = 2000;
  int batch = 4;
  // Every matrix entry moves by about this much per Adam step, so it is kept
  // well below the latent-optimization rate.
  double learning_rate = 0.001;
  double dropout = 0.3;
  std::uint64_t seed = 0;
  int eval_every = 100;  // full-dataset evaluation cadence (0 disables)
};

struct SketchTrainResult {
  std::vector<double> step_losses;                  // mini-batch loss per step
  std::vector<std::pair<int, double>> eval_losses;  // (step, mean dataset loss without dropout)
  double initial_mean_loss = 0.0;
  double final_mean_loss = 0.0;
};

double sketch_dataset_loss(const SketchInverter& inv, const std::vector<SketchPair>& data,
                           const GeneratorBackend& gen, const Backends& backends, const LossWeights& weights);

SketchTrainResult train_sketch_inverter(SketchInverter& inv, const std::vector<SketchPair>& data,
                                        const GeneratorBackend& gen, const Backends& backends,
                                        const LossWeights& weights, const SketchTrainConfig& cfg,
                                        const optim::ProgressFn& progress = nullptr);

// Procedural pairs from the toy generator: hair-band height and tilt are
// varied, strokes trace the resulting hair boundary.
std::vector<SketchPair> make_toy_sketch_dataset(const ToyGenerator& gen, const FaceParsingBackend& parsing, int count,
                                                std::uint64_t seed);
// Strokes along the lower hair boundary of an image.
SketchInput trace_hair_boundary(const Image& image, const FaceParsingBackend& parsing, double stroke_width = 2.0);

void write_sketch_dataset(const std::filesystem::path& dir, const std::vector<SketchPair>& data);
std::vector<SketchPair> read_sketch_dataset(const std::filesystem::path& dir);

// One feed-forward pass; no optimizer is created.
Proxy make_sketch_proxy(const SketchInput& sketch, const SketchInverter& inverter, const GeneratorBackend& gen);
// dilate(downsample(raster), 1) at the style-stage grid.
BinaryMask sketch_region(const SketchInput& sketch, const GeneratorBackend& gen);

}  // namespace hairedit
