#include "hairedit/pipeline/pipeline.hpp"

#include <chrono>

#include "hairedit/core/blend.hpp"

namespace hairedit {

using nlohmann::json;

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

StageRecord record(const std::string& name, const optim::Trajectory& t, int steps, const Timer& timer) {
  return {name, steps, t.initial_loss, t.final_loss, t.flagged, timer.seconds()};
}

StageRecord record(const std::string& name, const Timer& timer) { return {name, 0, 0.0, 0.0, false, timer.seconds()}; }

MaskRecord mask_record(const std::string& name, const BinaryMask& m) {
  return {name, m.height(), m.width(), m.count()};
}

optim::ProgressFn stage_progress(const StageProgress& progress, const std::string& stage) {
  if (!progress) return nullptr;
  return [progress, stage](int step, double loss) { progress(stage, step, loss); };
}

// Runs one stage, attributing any failure to it.
template <typename F>
auto in_stage(const std::string& stage, const std::optional<Image>& partial, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.what(), partial);
  }
}

std::vector<double> layers_of(const LatentWPlus& w, LayerRange r) {
  const LatentSlice s = w.slice(r);
  return {s.flat().begin(), s.flat().end()};
}

std::size_t layer_offset(int layer) { return static_cast<std::size_t>(layer - 1) * kLatentDim; }

// Full W+ node whose layers in `var_range` come from `var` and the rest from `w`.
ad::Var splice_latent(ad::Tape& tape, const LatentWPlus& w, LayerRange var_range, ad::Var var) {
  std::vector<ad::Var> parts;
  auto flat = w.flat();
  if (var_range.first > 1) {
    parts.push_back(tape.constant(flat.subspan(0, layer_offset(var_range.first))));
  }
  parts.push_back(var);
  if (var_range.last < kNumLayers) {
    parts.push_back(tape.constant(flat.subspan(layer_offset(var_range.last + 1))));
  }
  return ad::concat(parts);
}

void check_style_feature(const FeatureMap& f, const GeneratorBackend& gen, const char* what) {
  require(f.stage() == Stage::kStyle, ErrorKind::kShapeMismatch, std::string(what) + " must be a style-stage feature");
  gen.check_features(f);
}

void check_image_mask(const BinaryMask& m, const Image& img, const char* what) {
  require(m.height() == img.height() && m.width() == img.width(), ErrorKind::kShapeMismatch,
          std::string(what) + " must match the image resolution");
}

const char* hairstyle_name(const EditRequest& r) {
  switch (r.hairstyle) {
    case HairstyleKind::kText: return "text";
    case HairstyleKind::kReference: return "reference";
    case HairstyleKind::kNone: break;
  }
  return r.standalone_sketch ? "sketch" : "none";
}

const char* color_name(ColorKind k) {
  switch (k) {
    case ColorKind::kText: return "text";
    case ColorKind::kReference: return "reference";
    case ColorKind::kRgb: return "rgb";
    case ColorKind::kNone: break;
  }
  return "none";
}

}  // namespace

json EditReport::to_json(bool include_timings) const {
  json j;
  j["hairstyle"] = hairstyle;
  j["color"] = color;
  j["sketch"] = sketch;
  j["stages"] = json::array();
  for (const StageRecord& s : stages) {
    json e = {{"name", s.name}, {"steps", s.steps}, {"initial_loss", s.initial_loss},
              {"final_loss", s.final_loss}, {"flagged", s.flagged}};
    if (include_timings) e["seconds"] = s.seconds;
    j["stages"].push_back(e);
  }
  j["masks"] = json::array();
  for (const MaskRecord& m : masks) {
    j["masks"].push_back({{"name", m.name}, {"height", m.height}, {"width", m.width}, {"on", m.on}});
  }
  return j;
}

SourceState prepare_source(const Image& i_src, const Engine& engine, const StageProgress& progress) {
  const GeneratorBackend& gen = engine.generator();
  const Backends& b = engine.backends();
  const StageBudget& budget = engine.config().optimizer;
  SourceState s;
  s.image = i_src;
  {
    Timer t;
    const int steps = budget.invert_steps;
    auto inv = in_stage("invert", std::nullopt, [&] {
      return invert_wplus(i_src, gen, *b.patch, budget.stage(steps), stage_progress(progress, "invert"));
    });
    s.w_src = inv.w;
    s.stages.push_back(record("invert", inv.trajectory, steps, t));
  }
  {
    Timer t;
    const int steps = budget.fs_steps;
    auto emb = in_stage("fs_embed", std::nullopt, [&] {
      return embed_fs(i_src, s.w_src, gen, *b.patch, budget.stage(steps), stage_progress(progress, "fs_embed"));
    });
    s.fs = std::move(emb.fs);
    s.stages.push_back(record("fs_embed", emb.trajectory, steps, t));
  }
  {
    Timer t;
    in_stage("bald", std::nullopt, [&] {
      s.hair = b.parsing->hair_mask(i_src);
      s.m_bald = bald_region(i_src, gen, *b.parsing);
      s.bald = make_bald_proxy(s.w_src, s.fs.f7, s.m_bald, engine.balding(), gen);
      return 0;
    });
    s.stages.push_back(record("bald", t));
  }
  return s;
}

SourceState restore_source(const Image& i_src, const LatentWPlus& w_src, const FeatureMap& f_src,
                           std::vector<StageRecord> stages, const Engine& engine) {
  const Backends& b = engine.backends();
  require(f_src.stage() == Stage::kStyle, ErrorKind::kShapeMismatch, "stored source feature is not style-stage");
  SourceState s;
  s.image = i_src;
  s.w_src = w_src;
  s.fs.f7 = f_src;
  s.fs.s = w_src.slice(kFsTailLayers);
  s.hair = b.parsing->hair_mask(i_src);
  s.m_bald = bald_region(i_src, engine.generator(), *b.parsing);
  s.bald = make_bald_proxy(s.w_src, s.fs.f7, s.m_bald, engine.balding(), engine.generator());
  s.stages = std::move(stages);
  return s;
}

FeatureMap blend_global_style(const FeatureMap& f_proxy, const FeatureMap& f_bald, const BinaryMask& m_global) {
  require(f_proxy.stage() == Stage::kStyle && f_bald.stage() == Stage::kStyle, ErrorKind::kShapeMismatch,
          "global blending works on style-stage features");
  return blend_features(f_proxy, f_bald, m_global);
}

FeatureMap blend_local_sketch(const FeatureMap& f_sketch, const FeatureMap& f_global, const BinaryMask& m_local) {
  require(f_sketch.stage() == Stage::kStyle && f_global.stage() == Stage::kStyle, ErrorKind::kShapeMismatch,
          "sketch blending works on style-stage features");
  return blend_features(f_sketch, f_global, m_local);
}

Image synth_style_only(const FeatureMap& f_style, const LatentWPlus& w_src, const GeneratorBackend& gen) {
  check_style_feature(f_style, gen, "f_style");
  return gen.synth_image_from(f_style, w_src.slice(kFsTailLayers));
}

BinaryMask color_target_region(const Image& i_style, const FaceParsingBackend& parsing,
                               const std::optional<BinaryMask>& local_mask) {
  BinaryMask hair = parsing.hair_mask(i_style);
  if (!local_mask) return hair;
  check_image_mask(*local_mask, i_style, "color mask");
  std::vector<double> both(hair.data().size());
  for (std::size_t i = 0; i < both.size(); ++i) both[i] = hair.data()[i] * local_mask->data()[i];
  BinaryMask region(hair.height(), hair.width(), std::move(both));
  // A local mask drawn off the hair still names the area to recolour.
  return region.empty_region() ? *local_mask : region;
}

ColorProxyState optimize_color_proxy(const FeatureMap& f_style, const LatentWPlus& w_src, const ColorCondition& cond,
                                     const GeneratorBackend& gen, const Backends& backends,
                                     const InversionConfig& opt, const std::optional<BinaryMask>& local_mask,
                                     const optim::ProgressFn& progress) {
  check_style_feature(f_style, gen, "f_style");
  require(cond.kind != ColorKind::kNone, ErrorKind::kInvalidArgument, "color proxy needs a color condition");
  require(opt.steps >= 0, ErrorKind::kInvalidArgument, "step count must be non-negative");
  const Image i_style = synth_style_only(f_style, w_src, gen);
  const BinaryMask region = color_target_region(i_style, *backends.parsing, local_mask);
  const BinaryMask nonhair = mask_complement(backends.parsing->hair_mask(i_style));
  std::optional<BinaryMask> ref_hair;
  if (cond.kind == ColorKind::kReference) {
    require(cond.reference.has_value(), ErrorKind::kValidation, "color reference image missing");
    require(cond.reference->shape() == i_style.shape(), ErrorKind::kShapeMismatch,
            "color reference must match the generator output resolution");
    ref_hair = backends.parsing->hair_mask(*cond.reference);
  }
  if (cond.kind == ColorKind::kText) {
    require(!cond.text.empty(), ErrorKind::kValidation, "color text must not be empty");
  }

  constexpr int kAugmentations = 4;
  int evaluation = 0;
  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var layers) {
    ad::Var w = splice_latent(tape, w_src, kColorEditLayers, layers);
    ad::Var f = tape.constant(f_style.data());
    const ImageVar img{gen.forward_from_stage(f, w, Stage::kStyle, Stage::kOutput), i_style.height(),
                       i_style.width()};
    ad::Var modal;
    switch (cond.kind) {
      case ColorKind::kText: {
        const AugmentationSet augs(kAugmentations, cond.seed * 0x100000001B3ull + evaluation, img.height,
                                   img.width);
        modal = loss::clip(img, cond.text, augs, *backends.similarity);
        break;
      }
      case ColorKind::kReference: modal = loss::reference_color(img, region, *cond.reference, *ref_hair); break;
      default: modal = loss::avg_color(img, region, cond.rgb); break;
    }
    ++evaluation;
    return ad::add(modal, loss::bg(image_constant(tape, i_style), img, nonhair));
  });

  std::vector<double> params = layers_of(w_src, kColorEditLayers);
  ColorProxyState state;
  state.trajectory = optim::minimize(params, objective, opt.steps, opt.adam(), progress);
  state.w_color = w_src;
  std::copy(params.begin(), params.end(), state.w_color.flat().begin() + layer_offset(kColorEditLayers.first));
  return state;
}

ColorProxyState blend_color_features(ColorProxyState state, const FeatureMap& f_style, const LatentWPlus& w_src,
                                     const BinaryMask& m_color, const GeneratorBackend& gen) {
  check_style_feature(f_style, gen, "f_style");
  const FeatureMap color = gen.synth_features_from(f_style, state.w_color.slice(kFsTailLayers), Stage::kColor);
  const FeatureMap source = gen.synth_features_from(f_style, w_src.slice(kFsTailLayers), Stage::kColor);
  state.f_blend_14 = blend_features(color, source, m_color);
  return state;
}

Image synth_from_color_stage(const FeatureMap& f14, const LatentWPlus& w, const GeneratorBackend& gen) {
  require(f14.stage() == Stage::kColor, ErrorKind::kShapeMismatch, "expected a color-stage feature");
  return gen.synth_image_from(f14, w.slice(kOutputLayers));
}

FinalizeResult finalize_color(const ColorProxyState& state, const Image& i_style, const Image& i_color,
                              const BinaryMask& m_color, const LatentWPlus& w_src, const GeneratorBackend& gen,
                              const Backends& backends, const InversionConfig& opt,
                              const optim::ProgressFn& progress) {
  require(state.f_blend_14.has_value(), ErrorKind::kInvalidArgument, "blend the color features before finalizing");
  require(opt.steps >= 0, ErrorKind::kInvalidArgument, "step count must be non-negative");
  const FeatureMap& f14 = *state.f_blend_14;
  gen.check_features(f14);
  require(i_style.shape() == i_color.shape(), ErrorKind::kShapeMismatch, "style and color images differ in size");
  require(m_color.height() == f14.height() && m_color.width() == f14.width(), ErrorKind::kShapeMismatch,
          "color mask must be at color-stage resolution");
  const BinaryMask m_image = upsample_mask(m_color, i_style.height(), i_style.width());
  const std::size_t n_feat = f14.data().size();
  const std::size_t n_tail = static_cast<std::size_t>(kOutputLayers.count()) * kLatentDim;

  // The tail starts from the source layers; only 10-13 ever differed.
  LatentWPlus w = state.w_color;
  std::copy_n(w_src.flat().begin() + layer_offset(kOutputLayers.first), n_tail,
              w.flat().begin() + layer_offset(kOutputLayers.first));

  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var p) {
    ad::Var feat = ad::slice(p, 0, n_feat);
    ad::Var wv = splice_latent(tape, w, kOutputLayers, ad::slice(p, n_feat, n_tail));
    const ImageVar img{gen.forward_from_stage(feat, wv, Stage::kColor, Stage::kOutput), i_style.height(),
                       i_style.width()};
    return loss::blend(img, image_constant(tape, i_color), image_constant(tape, i_style), m_image,
                       *backends.patch);
  });
  std::vector<double> params(f14.data().begin(), f14.data().end());
  const auto tail = layers_of(w, kOutputLayers);
  params.insert(params.end(), tail.begin(), tail.end());

  FinalizeResult r;
  r.trajectory = optim::minimize(params, objective, opt.steps, opt.adam(), progress);
  r.f_blend_14 = FeatureMap(Stage::kColor, f14.shape(),
                            std::vector<double>(params.begin(), params.begin() + static_cast<long>(n_feat)));
  r.w_final = w;
  std::copy(params.begin() + static_cast<long>(n_feat), params.end(),
            r.w_final.flat().begin() + layer_offset(kOutputLayers.first));
  r.image = synth_from_color_stage(r.f_blend_14, r.w_final, gen);
  return r;
}

EditResult run_edit(const Image& i_src, const ResolvedRequest& rr, const Engine& engine, const SourceState* source,
                    const StageProgress& progress) {
  const EditRequest& req = rr.request;
  in_stage("validate", std::nullopt, [&] {
    req.validate();
    const Shape3 out = engine.generator().stage_shape(Stage::kOutput);
    require(i_src.height() == out.height && i_src.width() == out.width, ErrorKind::kValidation,
            "source image must be " + std::to_string(out.height) + "x" + std::to_string(out.width));
    require(!req.has_sketch() || rr.sketch.has_value(), ErrorKind::kValidation, "sketch was not resolved");
    require(!req.has_sketch() || engine.sketch_inverter() != nullptr, ErrorKind::kConfig,
            "sketch conditions need sketch.inverter_path in the engine config");
    if (rr.shape_mask) check_image_mask(*rr.shape_mask, i_src, "shape mask");
    if (rr.color_mask) check_image_mask(*rr.color_mask, i_src, "color mask");
    return 0;
  });

  const GeneratorBackend& gen = engine.generator();
  const Backends& b = engine.backends();
  const StageBudget& budget = engine.config().optimizer;
  const LossWeights& weights = engine.weights();

  std::optional<SourceState> local;
  if (!source) local = prepare_source(i_src, engine, progress);
  const SourceState& src = source ? *source : *local;
  require(src.image == i_src, ErrorKind::kInvalidArgument, "cached source state belongs to a different image");

  EditResult result;
  EditReport& report = result.report;
  EditTrace& trace = result.trace;
  report.hairstyle = hairstyle_name(req);
  report.color = color_name(req.color);
  report.sketch = req.has_sketch();
  report.stages = src.stages;
  report.masks.push_back(mask_record("m_bald", src.m_bald));

  // Style stage.
  std::optional<FeatureMap> f_global;
  if (req.hairstyle != HairstyleKind::kNone) {
    Timer t;
    const int steps = budget.proxy_steps;
    Proxy proxy = in_stage("hairstyle_proxy", std::nullopt, [&] {
      if (req.hairstyle == HairstyleKind::kText) {
        TextProxyOptions o;
        o.seed = req.seed;
        o.target_mask = rr.shape_mask;
        return make_text_proxy(req.hairstyle_text, i_src, gen, b, weights, budget.stage(steps), o,
                               stage_progress(progress, "hairstyle_proxy"));
      }
      require(rr.hairstyle_reference.has_value(), ErrorKind::kValidation, "hairstyle reference was not resolved");
      ReferenceProxyOptions o;
      o.invert = budget.stage(budget.invert_steps);
      o.target_mask = rr.shape_mask;
      return make_reference_proxy(*rr.hairstyle_reference, i_src, gen, b, weights, budget.stage(steps), o,
                                  stage_progress(progress, "hairstyle_proxy"));
    });
    report.stages.push_back(record("hairstyle_proxy", proxy.trajectory, steps, t));
    trace.m_global = proxy.region;
    f_global = blend_global_style(*proxy.f_style, src.f_bald(), proxy.region);
    report.masks.push_back(mask_record("m_global", proxy.region));
    trace.hairstyle_proxy = std::move(proxy);
  } else if (req.has_sketch()) {
    // Standalone sketch edits paint strokes straight onto the source.
    f_global = src.f_src();
  }
  trace.f_global = f_global;

  FeatureMap f_style = f_global ? *f_global : src.f_src();
  if (req.has_sketch()) {
    Timer t;
    Proxy proxy = in_stage("sketch_proxy", std::nullopt,
                           [&] { return make_sketch_proxy(*rr.sketch, *engine.sketch_inverter(), gen); });
    f_style = blend_local_sketch(*proxy.f_style, f_style, proxy.region);
    trace.m_local = proxy.region;
    report.masks.push_back(mask_record("m_local", proxy.region));
    report.stages.push_back(record("sketch_proxy", t));
    trace.sketch_proxy = std::move(proxy);
  }
  trace.f_style = f_style;
  trace.i_style = synth_style_only(f_style, src.w_src, gen);
  result.image = trace.i_style;

  if (req.color == ColorKind::kNone) return result;

  // Color stage.
  const Shape3 cs = gen.stage_shape(Stage::kColor);
  const BinaryMask m_color = rr.color_mask ? downsample_mask(*rr.color_mask, cs.height, cs.width)
                                           : downsample_mask(b.parsing->hair_mask(trace.i_style), cs.height,
                                                             cs.width);
  trace.m_color = m_color;
  report.masks.push_back(mask_record("m_color", m_color));

  ColorCondition cond;
  cond.kind = req.color;
  cond.text = req.color_text;
  cond.reference = rr.color_reference;
  cond.rgb = req.rgb;
  cond.seed = req.seed;
  ColorProxyState state;
  {
    Timer t;
    const int steps = budget.color_steps;
    state = in_stage("color_proxy", trace.i_style, [&] {
      return optimize_color_proxy(f_style, src.w_src, cond, gen, b, budget.stage(steps), rr.color_mask,
                                  stage_progress(progress, "color_proxy"));
    });
    report.stages.push_back(record("color_proxy", state.trajectory, steps, t));
  }
  {
    Timer t;
    state = in_stage("color_blend", trace.i_style,
                     [&] { return blend_color_features(state, f_style, src.w_src, m_color, gen); });
    trace.i_color = synth_style_only(f_style, state.w_color, gen);
    report.stages.push_back(record("color_blend", t));
  }
  {
    Timer t;
    const int steps = budget.final_steps;
    FinalizeResult fin = in_stage("finalize", trace.i_style, [&] {
      return finalize_color(state, trace.i_style, *trace.i_color, m_color, src.w_src, gen, b, budget.stage(steps),
                            stage_progress(progress, "finalize"));
    });
    report.stages.push_back(record("finalize", fin.trajectory, steps, t));
    result.image = std::move(fin.image);
  }
  trace.color_state = std::move(state);
  return result;
}

}  // namespace hairedit
