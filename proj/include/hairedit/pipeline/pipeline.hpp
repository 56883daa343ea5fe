#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hairedit/error.hpp"
#include "hairedit/pipeline/config.hpp"
#include "hairedit/pipeline/request.hpp"

namespace hairedit {

// (stage name, step, loss) for every optimizer step of every stage.
using StageProgress = std::function<void(const std::string& stage, int step, double loss)>;

// A failure inside one pipeline stage. Carries the best image produced
// before the failure, when there is one.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& message, std::optional<Image> partial = {})
      : Error(kind, stage + ": " + message), stage_(std::move(stage)), partial_(std::move(partial)) {}
  const std::string& stage() const { return stage_; }
  const std::optional<Image>& partial() const { return partial_; }

 private:
  std::string stage_;
  std::optional<Image> partial_;
};

struct StageRecord {
  std::string name;
  int steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool flagged = false;
  double seconds = 0.0;
};

struct MaskRecord {
  std::string name;
  int height = 0;
  int width = 0;
  std::size_t on = 0;
};

struct EditReport {
  std::string hairstyle = "none";
  std::string color = "none";
  bool sketch = false;
  std::vector<StageRecord> stages;
  std::vector<MaskRecord> masks;

  // Timings vary run to run; leave them out where byte-stable output matters.
  nlohmann::json to_json(bool include_timings = true) const;
};

// Per-image work shared by every edit of the same source: W+ inversion, FS
// embedding and the bald proxy.
struct SourceState {
  Image image;
  LatentWPlus w_src;
  LatentFS fs;             // fs.f7 is the source style-stage feature
  BinaryMask hair;         // image resolution
  BinaryMask m_bald;       // style-stage resolution
  Proxy bald;              // bald.f_blended is the bald style-stage feature
  std::vector<StageRecord> stages;

  const FeatureMap& f_src() const { return fs.f7; }
  const FeatureMap& f_bald() const { return *bald.f_blended; }
};

SourceState prepare_source(const Image& i_src, const Engine& engine, const StageProgress& progress = nullptr);
// Rebuilds the state from a stored inversion without optimizing. The bald
// proxy is recomputed, which is deterministic.
SourceState restore_source(const Image& i_src, const LatentWPlus& w_src, const FeatureMap& f_src,
                           std::vector<StageRecord> stages, const Engine& engine);

// f_proxy inside m_global, f_bald elsewhere.
FeatureMap blend_global_style(const FeatureMap& f_proxy, const FeatureMap& f_bald, const BinaryMask& m_global);
// f_sketch inside m_local, f_global elsewhere.
FeatureMap blend_local_sketch(const FeatureMap& f_sketch, const FeatureMap& f_global, const BinaryMask& m_local);
// Resumes synthesis at the style stage with the source's layers 8-18.
Image synth_style_only(const FeatureMap& f_style, const LatentWPlus& w_src, const GeneratorBackend& gen);

struct ColorCondition {
  ColorKind kind = ColorKind::kRgb;
  std::string text;
  std::optional<Image> reference;
  std::array<double, 3> rgb{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;  // augmentation draws for the text condition
};

struct ColorProxyState {
  LatentWPlus w_color;  // differs from w_src only on `optimizable`
  LayerRange optimizable = kColorEditLayers;
  std::optional<FeatureMap> f_blend_14;
  LayerRange tail_range = kOutputLayers;
  optim::Trajectory trajectory;
};

// Hair region the colour objective looks at: hair of the style image,
// restricted to the user mask (image resolution) when one is given.
BinaryMask color_target_region(const Image& i_style, const FaceParsingBackend& parsing,
                               const std::optional<BinaryMask>& local_mask);

// Optimizes layers 10-13 of w_src on top of f_style for the colour
// condition plus background preservation.
ColorProxyState optimize_color_proxy(const FeatureMap& f_style, const LatentWPlus& w_src, const ColorCondition& cond,
                                     const GeneratorBackend& gen, const Backends& backends,
                                     const InversionConfig& opt,
                                     const std::optional<BinaryMask>& local_mask = std::nullopt,
                                     const optim::ProgressFn& progress = nullptr);

// Color-stage features of the colour branch inside m_color (color-stage
// resolution) and of the source branch elsewhere.
ColorProxyState blend_color_features(ColorProxyState state, const FeatureMap& f_style, const LatentWPlus& w_src,
                                     const BinaryMask& m_color, const GeneratorBackend& gen);

// Image synthesized from a color-stage feature and the layers 15-18.
Image synth_from_color_stage(const FeatureMap& f14, const LatentWPlus& w, const GeneratorBackend& gen);

struct FinalizeResult {
  Image image;
  FeatureMap f_blend_14;
  LatentWPlus w_final;  // w_color with the optimized output layers
  optim::Trajectory trajectory;
};

// Refines f_blend_14 and layers 15-18 (started from w_src) so that the image
// matches i_color inside m_color and i_style outside.
FinalizeResult finalize_color(const ColorProxyState& state, const Image& i_style, const Image& i_color,
                              const BinaryMask& m_color, const LatentWPlus& w_src, const GeneratorBackend& gen,
                              const Backends& backends, const InversionConfig& opt,
                              const optim::ProgressFn& progress = nullptr);

// Intermediate artifacts of one edit, for inspection and tests.
struct EditTrace {
  std::optional<Proxy> hairstyle_proxy;
  std::optional<Proxy> sketch_proxy;
  std::optional<BinaryMask> m_global;
  std::optional<BinaryMask> m_local;
  std::optional<FeatureMap> f_global;
  FeatureMap f_style;
  Image i_style;
  std::optional<BinaryMask> m_color;
  std::optional<ColorProxyState> color_state;
  std::optional<Image> i_color;
};

struct EditResult {
  Image image;
  EditReport report;
  EditTrace trace;
};

// Full edit. `source` may be a cached prepare_source result for i_src.
EditResult run_edit(const Image& i_src, const ResolvedRequest& req, const Engine& engine,
                    const SourceState* source = nullptr, const StageProgress& progress = nullptr);

}  // namespace hairedit
