#include <cmath>

#include "doctest.h"
#include "hairedit/inversion/inversion.hpp"
#include "hairedit/losses/losses.hpp"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;

namespace {

InversionConfig budget(int steps) {
  InversionConfig c;
  c.steps = steps;
  return c;
}

}  // namespace

TEST_CASE("W+ inversion recovers a self-generated image") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto& pd = *engine->backends().patch;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Image img = gen.synthesize(truncation_init(gen.mean_latent(), gen.sample_random_latent(seed), 0.7));
    const WPlusInversion r = invert_wplus(img, gen, pd, budget(200));
    CHECK(r.mse < 1e-3);
    CHECK(r.trajectory.final_loss < r.trajectory.initial_loss);
    CHECK_FALSE(r.trajectory.flagged);
    CHECK(r.mse == doctest::Approx(loss::mse(gen.synthesize(r.w), img)).epsilon(1e-15));
  }
}

TEST_CASE("W+ inversion starts from the mean latent") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto& pd = *engine->backends().patch;
  const Image img = ht::sample_face(gen, 5);
  const WPlusInversion r = invert_wplus(img, gen, pd, budget(3));
  const double at_mean = reconstruction_loss(gen.synthesize(LatentWPlus::broadcast(gen.mean_latent())), img, pd);
  CHECK(r.trajectory.losses.front() == doctest::Approx(at_mean).epsilon(1e-14));
  CHECK(r.trajectory.initial_loss == r.trajectory.losses.front());
}

TEST_CASE("W+ inversion rejects an empty budget and a wrong size") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  CHECK_THROWS_AS(invert_wplus(ht::sample_face(gen, 1), gen, *engine->backends().patch, budget(0)), Error);
  CHECK_THROWS_AS(invert_wplus(Image(32, 32), gen, *engine->backends().patch, budget(10)), Error);
  InversionConfig bad = budget(10);
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(invert_wplus(ht::sample_face(gen, 1), gen, *engine->backends().patch, bad), Error);
}

TEST_CASE("FS embedding never reconstructs worse than its W+ start") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto& pd = *engine->backends().patch;
  for (std::uint64_t seed : {4u, 6u, 9u}) {
    const Image img = ht::sample_face(gen, seed);
    const WPlusInversion w = invert_wplus(img, gen, pd, budget(60));
    const FsEmbedding fs = embed_fs(img, w.w, gen, pd, budget(40));
    CHECK(fs.mse <= w.mse);
    CHECK(fs.fs.s == w.w.slice(kFsTailLayers));
    CHECK(fs.trajectory.final_loss <= fs.trajectory.initial_loss);
  }
}

TEST_CASE("FS embedding with zero steps keeps the synthesized feature") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const Image img = ht::sample_face(gen, 7);
  const LatentWPlus w = truncation_init(gen.mean_latent(), gen.sample_random_latent(7), 0.5);
  const FsEmbedding fs = embed_fs(img, w, gen, *engine->backends().patch, budget(0));
  CHECK(fs.fs.f7 == gen.synth_to_stage(w, Stage::kStyle));
  CHECK(synthesize_fs(fs.fs, gen) == gen.synth_image_from(gen.synth_to_stage(w, Stage::kStyle), w.slice(kFsTailLayers)));
}

TEST_CASE("larger inversion budgets do not end worse on average") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const auto& pd = *engine->backends().patch;
  std::vector<double> means;
  for (int steps : {10, 40, 120}) {
    double acc = 0.0;
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
      acc += invert_wplus(ht::sample_face(gen, seed), gen, pd, budget(steps)).trajectory.final_loss;
    }
    means.push_back(acc / 5.0);
  }
  CHECK(means[1] <= means[0]);
  CHECK(means[2] <= means[1]);
}

TEST_CASE("inversion is deterministic") {
  const auto engine = ht::toy_engine();
  const auto& gen = engine->generator();
  const Image img = ht::sample_face(gen, 8);
  const auto a = invert_wplus(img, gen, *engine->backends().patch, budget(15));
  const auto b = invert_wplus(img, gen, *engine->backends().patch, budget(15));
  CHECK(a.w == b.w);
  CHECK(a.trajectory.losses == b.trajectory.losses);
}
