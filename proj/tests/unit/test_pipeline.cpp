#include <cmath>

#include "doctest.h"
#include "hairedit/core/blend.hpp"
#include "hairedit/losses/losses.hpp"
#include "hairedit/pipeline/pipeline.hpp"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;  // not reached
}

std::array<double, 3> region_mean(const Image& img, const BinaryMask& m) {
  std::array<double, 3> acc{0, 0, 0};
  double n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (m.at(y, x) == 0.0) continue;
      for (int c = 0; c < 3; ++c) acc[c] += img.at(y, x, c);
      n += 1;
    }
  }
  for (double& v : acc) v /= n;
  return acc;
}

// Shared source for the colour tests: a toy face whose hair survives inversion.
const SourceState& colour_source() {
  static const SourceState st = [] {
    const auto engine = ht::fast_engine();
    return prepare_source(ht::sample_face(engine->generator(), ht::seeds_with_hair(*engine, 1, 200)[0]), *engine);
  }();
  return st;
}

}  // namespace

TEST_CASE("engine config: unknown keys, types and ranges") {
  CHECK(kind_of([] { EngineConfig::from_json({{"optimiser", {{"steps", 3}}}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { EngineConfig::from_json({{"service", {{"port", "80"}}}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { EngineConfig::from_json({{"service", {{"port", 70000}}}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { EngineConfig::from_json({{"optimizer", {{"invert_steps", 0}}}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { EngineConfig::from_json({{"loss_weights", {{"clip", -1.0}}}}); }) == ErrorKind::kConfig);

  const EngineConfig c = EngineConfig::from_json({{"service", {{"port", 9000}}}});
  CHECK(c.service.port == 9000);
  CHECK(c.optimizer.learning_rate == 0.01);
  CHECK(c.loss_weights == LossWeights{});
  CHECK(EngineConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(c.with_overrides({{"optimizer", {{"proxy_steps", 5}}}}).optimizer.proxy_steps == 5);
  CHECK(c.with_overrides({{"optimizer", {{"proxy_steps", 5}}}}).service.port == 9000);
}

TEST_CASE("edit request validation") {
  CHECK(kind_of([] { EditRequest{}.validate(); }) == ErrorKind::kValidation);
  EditRequest r;
  r.color = ColorKind::kRgb;
  r.rgb = {0.2, 0.4, 1.2};
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::kValidation);
  r.rgb = {0.2, 0.4, 0.6};
  r.validate();
  r.shape_mask = AssetRef{AssetRef::Source::kPath, "m.png"};
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::kValidation);

  EditRequest sketch_only;
  sketch_only.sketch = SketchInput{64, 64, {{2.0, {{{1.0, 1.0}}, {{9.0, 9.0}}}}}, ""};
  CHECK(kind_of([&] { sketch_only.validate(); }) == ErrorKind::kValidation);
  sketch_only.standalone_sketch = true;
  sketch_only.validate();
}

TEST_CASE("edit request and recipe JSON round trips") {
  EditRequest r;
  r.hairstyle = HairstyleKind::kText;
  r.hairstyle_text = "long wavy hair";
  r.color = ColorKind::kReference;
  r.color_reference = AssetRef{AssetRef::Source::kUpload, "ref"};
  r.color_mask = AssetRef{AssetRef::Source::kSession, "abc"};
  r.sketch = SketchInput{64, 64, {{2.5, {{{1.0, 2.0}}, {{30.5, 40.0}}}}}, ""};
  r.seed = 17;
  CHECK(EditRequest::from_json(r.to_json()) == r);

  Recipe rec;
  rec.request = r;
  rec.overrides = {{"optimizer", {{"color_steps", 3}}}};
  const Recipe back = Recipe::from_json(rec.to_json());
  CHECK(back.request == r);
  CHECK(back.overrides == rec.overrides);
  CHECK(kind_of([] { Recipe::from_json(nlohmann::json::array()); }) == ErrorKind::kValidation);
}

TEST_CASE("global and local blends are the mask blend") {
  const FeatureMap a = ht::random_features(Stage::kStyle, {8, 8, 16}, 1);
  const FeatureMap b = ht::random_features(Stage::kStyle, {8, 8, 16}, 2);
  const BinaryMask m = ht::random_mask(8, 8, 0.5, 3);
  CHECK(blend_global_style(a, b, m) == ht::reference_blend(a, b, m));
  CHECK(blend_local_sketch(a, b, m) == ht::reference_blend(a, b, m));
  CHECK(blend_global_style(a, b, BinaryMask(8, 8)) == b);
}

TEST_CASE("composition keeps source features where no mask is set") {
  const auto engine = ht::fast_engine();
  const SourceState& src = colour_source();
  ResolvedRequest rr;
  rr.request.hairstyle = HairstyleKind::kText;
  rr.request.hairstyle_text = "short blue hair";
  const EditResult r = run_edit(src.image, rr, *engine, &src);
  REQUIRE(r.trace.m_global.has_value());
  const BinaryMask& mg = *r.trace.m_global;
  for (int y = 0; y < mg.height(); ++y) {
    for (int x = 0; x < mg.width(); ++x) {
      if (mg.at(y, x) != 0.0) continue;
      for (int c = 0; c < r.trace.f_style.channels(); ++c) {
        CHECK(r.trace.f_style.at(y, x, c) == src.f_bald().at(y, x, c));
        if (src.m_bald.at(y, x) == 0.0) CHECK(r.trace.f_style.at(y, x, c) == src.f_src().at(y, x, c));
      }
    }
  }
  // No colour condition: the output is the style-only synthesis.
  CHECK(r.image == synth_style_only(r.trace.f_style, src.w_src, engine->generator()));
  CHECK_FALSE(r.trace.m_color.has_value());
}

TEST_CASE("colour-only edits start from the source features") {
  const auto engine = ht::fast_engine();
  const SourceState& src = colour_source();
  ResolvedRequest rr;
  rr.request.color = ColorKind::kRgb;
  rr.request.rgb = {0.2, 0.3, 0.8};
  const EditResult r = run_edit(src.image, rr, *engine, &src);
  CHECK(r.trace.f_style == src.f_src());
  REQUIRE(r.trace.color_state.has_value());
  const LatentWPlus& wc = r.trace.color_state->w_color;
  for (int l = 1; l <= kNumLayers; ++l) {
    const bool editable = kColorEditLayers.contains(l);
    bool same = true;
    for (int c = 0; c < kLatentDim; ++c) same = same && wc.layer(l)[c] == src.w_src.layer(l)[c];
    CHECK(same != editable);
  }

  // Outside m_color the colour-stage feature is the source branch.
  const auto& st = *r.trace.color_state;
  const FeatureMap source14 =
      engine->generator().synth_features_from(r.trace.f_style, src.w_src.slice(kFsTailLayers), Stage::kColor);
  CHECK(ht::max_deviation_outside(*st.f_blend_14, source14, *r.trace.m_color) == 0.0);
}

TEST_CASE("colour proxy: target reached, current colour is a near no-op") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const SourceState& src = colour_source();
  const Image i_style = synth_style_only(src.f_src(), src.w_src, gen);
  const BinaryMask hair = color_target_region(i_style, *engine->backends().parsing, std::nullopt);
  REQUIRE_FALSE(hair.empty_region());

  ColorCondition cond;
  cond.rgb = {0.75, 0.3, 0.2};
  InversionConfig opt;
  opt.steps = 200;
  const ColorProxyState moved = optimize_color_proxy(src.f_src(), src.w_src, cond, gen, engine->backends(), opt);
  CHECK(moved.trajectory.final_loss < 0.25 * moved.trajectory.initial_loss);

  cond.rgb = region_mean(i_style, hair);
  opt.steps = 50;
  const ColorProxyState still = optimize_color_proxy(src.f_src(), src.w_src, cond, gen, engine->backends(), opt);
  CHECK(still.trajectory.initial_loss < 1e-20);
  double drift = 0.0;
  for (std::size_t i = 0; i < still.w_color.flat().size(); ++i) {
    drift = std::max(drift, std::abs(still.w_color.flat()[i] - src.w_src.flat()[i]));
  }
  CHECK(drift < 1e-3);
}

TEST_CASE("finalize with an unchanged colour image reproduces the style image") {
  const auto engine = ht::fast_engine();
  const auto& gen = engine->generator();
  const SourceState& src = colour_source();
  const Image i_style = synth_style_only(src.f_src(), src.w_src, gen);
  const Shape3 cs = gen.stage_shape(Stage::kColor);
  const BinaryMask m_color = downsample_mask(engine->backends().parsing->hair_mask(i_style), cs.height, cs.width);

  ColorProxyState state;
  state.w_color = src.w_src;
  state = blend_color_features(state, src.f_src(), src.w_src, m_color, gen);
  InversionConfig opt;
  opt.steps = 20;
  const FinalizeResult fin = finalize_color(state, i_style, i_style, m_color, src.w_src, gen, engine->backends(), opt);
  CHECK(loss::mse(fin.image, i_style) < 1e-4);
  CHECK(fin.w_final.slice({1, 14}) == src.w_src.slice({1, 14}));

  ColorProxyState unblended;
  unblended.w_color = src.w_src;
  CHECK_THROWS_AS(finalize_color(unblended, i_style, i_style, m_color, src.w_src, gen, engine->backends(), opt), Error);
}

TEST_CASE("run_edit rejects a cached state for another image and bad masks") {
  const auto engine = ht::fast_engine();
  const SourceState& src = colour_source();
  ResolvedRequest rr;
  rr.request.color = ColorKind::kRgb;
  rr.request.rgb = {0.5, 0.5, 0.5};
  const Image other = ht::sample_face(engine->generator(), 999);
  CHECK_THROWS_AS(run_edit(other, rr, *engine, &src), Error);
  rr.color_mask = BinaryMask(32, 32);
  rr.request.color_mask = AssetRef{AssetRef::Source::kPath, "m.png"};
  CHECK(kind_of([&] { run_edit(src.image, rr, *engine, &src); }) == ErrorKind::kShapeMismatch);
  ResolvedRequest sketchy;
  sketchy.request.standalone_sketch = true;
  sketchy.request.sketch = SketchInput{64, 64, {{2.0, {{{1.0, 1.0}}, {{9.0, 9.0}}}}}, ""};
  sketchy.sketch = sketchy.request.sketch;
  CHECK(kind_of([&] { run_edit(src.image, sketchy, *engine, &src); }) == ErrorKind::kConfig);
}

TEST_CASE("restored source state matches the prepared one") {
  const auto engine = ht::fast_engine();
  const SourceState& src = colour_source();
  const SourceState back = restore_source(src.image, src.w_src, src.f_src(), src.stages, *engine);
  CHECK(back.f_bald() == src.f_bald());
  CHECK(back.m_bald == src.m_bald);
  CHECK(back.hair == src.hair);
}
