#include <numeric>

#include "doctest.h"
#include "hairedit/core/blend.hpp"
#include "hairedit/generator/toy_generator.hpp"
#include "hairedit/optim/adam.hpp"
#include "hairedit/proxies/proxies.hpp"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;

namespace {

InversionConfig budget(int steps) {
  InversionConfig c;
  c.steps = steps;
  return c;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("bald proxy: mask extremes and outside preservation") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const LatentWPlus w = truncation_init(gen.mean_latent(), gen.sample_random_latent(3), 0.7);
  const FeatureMap f_src = gen.synth_to_stage(w, Stage::kStyle);
  const Shape3 s = gen.stage_shape(Stage::kStyle);

  const Proxy none = make_bald_proxy(w, f_src, BinaryMask(s.height, s.width), engine->balding(), gen);
  CHECK(*none.f_blended == f_src);

  BinaryMask all(s.height, s.width);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) all.set(y, x, true);
  }
  const Proxy full = make_bald_proxy(w, f_src, all, engine->balding(), gen);
  CHECK(*full.f_blended == gen.synth_to_stage(engine->balding().apply(w), Stage::kStyle));
  CHECK(full.kind == ProxyKind::kBald);

  const BinaryMask m = ht::random_mask(s.height, s.width, 0.4, 9);
  const Proxy part = make_bald_proxy(w, f_src, m, engine->balding(), gen);
  CHECK(ht::max_deviation_outside(*part.f_blended, f_src, m) == 0.0);
  CHECK(part.region == m);

  CHECK_THROWS_AS(make_bald_proxy(w, f_src, BinaryMask(4, 4), engine->balding(), gen), Error);
  CHECK_THROWS_AS(make_bald_proxy(w, gen.synth_to_stage(w, Stage::kColor), m, engine->balding(), gen), Error);
}

TEST_CASE("bald region covers hair and ears at the style grid") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const Image face = ht::sample_face(gen, ht::seeds_with_hair(*engine, 1)[0]);
  const BinaryMask r = bald_region(face, gen, *engine->backends().parsing);
  CHECK(r.height() == 8);
  CHECK(r.width() == 8);
  CHECK(r.count() >= style_region(face, gen, *engine->backends().parsing).count());
}

TEST_CASE("text proxy: seeded start, distinct seeds, consistent features") {
  const auto engine = ht::fast_engine();
  const auto& gen = engine->generator();
  const Image src = ht::sample_face(gen, 5);
  CHECK(text_proxy_init(gen, 4, 0.3) == truncation_init(gen.mean_latent(), gen.sample_random_latent(4), 0.3));

  TextProxyOptions a, b;
  a.seed = 1;
  b.seed = 2;
  const Proxy pa = make_text_proxy("short red hair", src, gen, engine->backends(), engine->weights(), budget(25), a);
  const Proxy pb = make_text_proxy("short red hair", src, gen, engine->backends(), engine->weights(), budget(25), b);
  CHECK_FALSE(*pa.w == *pb.w);
  CHECK(*pa.f_style == gen.synth_to_stage(*pa.w, Stage::kStyle));
  CHECK(pa.trajectory.final_loss < pa.trajectory.initial_loss);
  CHECK(pa.kind == ProxyKind::kText);

  const Proxy again = make_text_proxy("short red hair", src, gen, engine->backends(), engine->weights(), budget(25), a);
  CHECK(*again.w == *pa.w);

  CHECK_THROWS_AS(make_text_proxy("", src, gen, engine->backends(), engine->weights(), budget(5)), Error);
  TextProxyOptions bad;
  bad.psi = 1.5;
  CHECK_THROWS_AS(make_text_proxy("x", src, gen, engine->backends(), engine->weights(), budget(5), bad), Error);
}

TEST_CASE("reference proxy with no steps keeps its start") {
  const auto engine = ht::fast_engine();
  const auto& gen = engine->generator();
  const Image src = ht::sample_face(gen, 12);
  const LatentWPlus start = invert_wplus(src, gen, *engine->backends().patch, budget(60)).w;
  ReferenceProxyOptions opts;
  opts.init = start;
  const Proxy p = make_reference_proxy(src, src, gen, engine->backends(), engine->weights(), budget(0), opts);
  CHECK(*p.w == start);
  CHECK(*p.f_style == gen.synth_to_stage(start, Stage::kStyle));
}

TEST_CASE("reference proxy lowers its objective and the regularizer damps steps") {
  const auto engine = ht::fast_engine();
  const auto& gen = engine->generator();
  const auto seeds = ht::seeds_with_hair(*engine, 2, 40);
  const Image src = ht::sample_face(gen, seeds[0]), ref = ht::sample_face(gen, seeds[1]);
  ReferenceProxyOptions opts;
  opts.invert = budget(40);

  std::vector<double> loose, tight;
  LossWeights w1 = engine->weights(), w1000 = engine->weights();
  w1.reg = 1.0;
  w1000.reg = 1000.0;
  const Proxy p = make_reference_proxy(ref, src, gen, engine->backends(), w1, budget(20), opts, nullptr, &loose);
  make_reference_proxy(ref, src, gen, engine->backends(), w1000, budget(20), opts, nullptr, &tight);
  CHECK(p.trajectory.final_loss <= p.trajectory.initial_loss);
  CHECK(loose.size() == tight.size());
  CHECK(mean_of(tight) < mean_of(loose));
}

TEST_CASE("sketch proxy is a single feed-forward pass") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto data = make_toy_sketch_dataset(engine->toy_generator(), *engine->backends().parsing, 4, 1);
  SketchInverter inv(64, 64, gen.mean_latent());
  SketchTrainConfig cfg;
  cfg.steps = 5;
  cfg.eval_every = 0;
  train_sketch_inverter(inv, data, gen, engine->backends(), engine->weights(), cfg);

  const long before = optim::Adam::instances_created();
  const Proxy a = make_sketch_proxy(data[0].sketch, inv, gen);
  const Proxy b = make_sketch_proxy(data[0].sketch, inv, gen);
  CHECK(optim::Adam::instances_created() == before);
  CHECK(*a.w == *b.w);
  CHECK(*a.w == inv.invert(data[0].sketch));
  CHECK(*a.f_style == gen.synth_to_stage(*a.w, Stage::kStyle));
  CHECK(a.region == dilate_mask(downsample_mask_any(data[0].sketch.raster(), 8, 8), 1));
  CHECK(a.region == sketch_region(data[0].sketch, gen));

  SketchInput empty = data[0].sketch;
  empty.strokes.clear();
  CHECK_THROWS_AS(make_sketch_proxy(empty, inv, gen), Error);
  const SketchInverter small(32, 32, gen.mean_latent());
  CHECK_THROWS_AS(make_sketch_proxy(data[0].sketch, small, gen), Error);
  SketchInput wrong = data[0].sketch;
  wrong.height = 32;
  wrong.width = 32;
  CHECK_THROWS_AS(inv.invert(wrong), Error);
}

TEST_CASE("untrained sketch inverter maps to the mean latent") {
  const auto& gen = ht::toy_engine()->generator();
  const SketchInverter inv(64, 64, gen.mean_latent());
  SketchInput s;
  s.height = 64;
  s.width = 64;
  s.strokes.push_back({2.0, {{{10.0, 10.0}}, {{50.0, 30.0}}}});
  CHECK(inv.invert(s) == LatentWPlus::broadcast(gen.mean_latent()));
  CHECK(inv.features(s).size() == static_cast<std::size_t>(SketchInverter::kFeatures));
  CHECK(inv.features(s).back() == 1.0);
}

TEST_CASE("sketch inverter training and persistence") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto data = make_toy_sketch_dataset(engine->toy_generator(), *engine->backends().parsing, 6, 2);
  SketchInverter inv(64, 64, gen.mean_latent());
  SketchTrainConfig cfg;
  cfg.steps = 30;
  cfg.eval_every = 10;
  const SketchTrainResult r = train_sketch_inverter(inv, data, gen, engine->backends(), engine->weights(), cfg);
  CHECK(r.step_losses.size() == 30u);
  CHECK(r.eval_losses.front().first == 0);
  CHECK(r.final_mean_loss < r.initial_mean_loss);
  CHECK(r.final_mean_loss == doctest::Approx(sketch_dataset_loss(inv, data, gen, engine->backends(), engine->weights())));

  SketchInverter rerun(64, 64, gen.mean_latent());
  const SketchTrainResult r2 = train_sketch_inverter(rerun, data, gen, engine->backends(), engine->weights(), cfg);
  CHECK(r2.step_losses == r.step_losses);

  const auto dir = ht::temp_dir("sketch-persist");
  inv.save(dir / "inv.hewt");
  const SketchInverter loaded = SketchInverter::load(dir / "inv.hewt");
  CHECK(loaded.matrix() == inv.matrix());
  CHECK(loaded.invert(data[1].sketch) == inv.invert(data[1].sketch));

  write_sketch_dataset(dir / "data", data);
  const auto back = read_sketch_dataset(dir / "data");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].sketch == data[i].sketch);
    CHECK(back[i].image == io::quantize_8bit(data[i].image));
  }

  SketchTrainConfig zero = cfg;
  zero.steps = 0;
  CHECK_THROWS_AS(train_sketch_inverter(inv, data, gen, engine->backends(), engine->weights(), zero), Error);
  CHECK_THROWS_AS(train_sketch_inverter(inv, {}, gen, engine->backends(), engine->weights(), cfg), Error);
}
