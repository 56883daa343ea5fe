#include "support.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>

#include <sys/wait.h>

#include "hairedit/core/io.hpp"
#include "hairedit/core/rng.hpp"
#include "hairedit/losses/losses.hpp"
#include "hairedit/metrics/metrics.hpp"

namespace hairedit::testing {

namespace fs = std::filesystem;

std::shared_ptr<const Engine> toy_engine() {
  static std::once_flag once;
  static std::shared_ptr<const Engine> engine;
  std::call_once(once, [] { engine = Engine::create(EngineConfig{}); });
  return engine;
}

std::shared_ptr<const Engine> fast_engine() {
  static std::once_flag once;
  static std::shared_ptr<const Engine> engine;
  std::call_once(once, [] {
    EngineConfig cfg;
    cfg.optimizer.invert_steps = 40;
    cfg.optimizer.fs_steps = 20;
    cfg.optimizer.proxy_steps = 20;
    cfg.optimizer.color_steps = 20;
    cfg.optimizer.final_steps = 10;
    engine = Engine::create(cfg);
  });
  return engine;
}

Image sample_face(const GeneratorBackend& gen, std::uint64_t seed, double psi) {
  const LatentWPlus w = truncation_init(gen.mean_latent(), gen.sample_random_latent(seed), psi);
  return io::quantize_8bit(gen.synthesize(w).clamped());
}

std::vector<std::uint64_t> seeds_with_hair(const Engine& engine, int count, std::uint64_t first, int min_hair) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = first; static_cast<int>(out.size()) < count; ++s) {
    const Image img = sample_face(engine.generator(), s);
    if (static_cast<int>(engine.backends().parsing->hair_mask(img).count()) >= min_hair) out.push_back(s);
  }
  return out;
}

FeatureMap reference_blend(const FeatureMap& a, const FeatureMap& b, const BinaryMask& m) {
  FeatureMap out(b.stage(), b.shape());
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      const bool on = m.at(y, x) != 0.0;
      for (int c = 0; c < b.channels(); ++c) out.at(y, x, c) = on ? a.at(y, x, c) : b.at(y, x, c);
    }
  }
  return out;
}

BinaryMask random_mask(int h, int w, double density, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (double& x : v) x = rng.uniform() < density ? 1.0 : 0.0;
  return BinaryMask(h, w, std::move(v));
}

FeatureMap random_features(Stage stage, Shape3 shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.normal();
  return FeatureMap(stage, shape, std::move(v));
}

Image random_image(int h, int w, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Image img(h, w);
  for (double& x : img.data()) x = rng.uniform(lo, hi);
  return img;
}

double gradient_relative_error(const ScalarFn& f, const std::vector<double>& x, int coords, std::uint64_t seed,
                               double eps) {
  ad::Tape tape;
  const ad::Var in = tape.input(x);
  const ad::Var out = f(tape, in);
  tape.backward(out);
  const std::vector<double> grad(tape.grad(in).begin(), tape.grad(in).end());

  auto value_at = [&](const std::vector<double>& p) {
    ad::Tape t;
    return f(t, t.constant(p)).scalar();
  };
  std::vector<std::size_t> idx;
  if (coords <= 0 || static_cast<std::size_t>(coords) >= x.size()) {
    for (std::size_t i = 0; i < x.size(); ++i) idx.push_back(i);
  } else {
    Rng rng(seed);
    for (int k = 0; k < coords; ++k) idx.push_back(static_cast<std::size_t>(rng.below(static_cast<int>(x.size()))));
  }
  double diff = 0.0, na = 0.0, nf = 0.0;
  std::vector<double> p = x;
  for (std::size_t i : idx) {
    p[i] = x[i] + eps;
    const double up = value_at(p);
    p[i] = x[i] - eps;
    const double down = value_at(p);
    p[i] = x[i];
    const double fd = (up - down) / (2.0 * eps);
    diff += (grad[i] - fd) * (grad[i] - fd);
    na += grad[i] * grad[i];
    nf += fd * fd;
  }
  const double scale = std::sqrt(std::max(na, nf));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / scale;
}

FeatureMap latent_interpolation_features(const LatentWPlus& w_bald, const LatentWPlus& w_proxy, double alpha,
                                         const GeneratorBackend& gen) {
  std::vector<double> v(w_bald.flat().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - alpha) * w_bald.flat()[i] + alpha * w_proxy.flat()[i];
  return gen.synth_to_stage(LatentWPlus(std::move(v)), Stage::kStyle);
}

double max_deviation_outside(const FeatureMap& f, const FeatureMap& ref, const BinaryMask& m) {
  double worst = 0.0;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (m.at(y, x) != 0.0) continue;
      for (int c = 0; c < f.channels(); ++c) worst = std::max(worst, std::abs(f.at(y, x, c) - ref.at(y, x, c)));
    }
  }
  return worst;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = quote(HAIREDIT_CLI);
  for (const std::string& a : args) cmd += " " + quote(a);
  cmd += log.empty() ? " >/dev/null 2>&1" : " >" + quote(log.string()) + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hairedit-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool files_equal(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) return false;
  return io::read_file(a) == io::read_file(b);
}

}  // namespace hairedit::testing

namespace hairedit::testing {

namespace {

io::Tensor tensor_of(std::span<const double> values) {
  return {{static_cast<std::uint32_t>(values.size())}, std::vector<double>(values.begin(), values.end())};
}

io::Tensor scalar_of(double v) { return {{1}, {v}}; }

}  // namespace

io::TensorArchive golden_values() {
  io::TensorArchive out;
  const auto engine = fast_engine();
  const GeneratorBackend& gen = engine->generator();
  const Backends& b = engine->backends();
  const Image face = sample_face(gen, 5);
  const std::string text = "short red hair";

  const LatentWPlus mean = LatentWPlus::broadcast(gen.mean_latent());
  out["mean_style_features"] = tensor_of(gen.synth_to_stage(mean, Stage::kStyle).data());
  const FeatureMap zeros(Stage::kStyle, gen.stage_shape(Stage::kStyle));
  out["zero_injection_image"] = tensor_of(gen.synth_image_from(zeros, mean.slice(kFsTailLayers)).data());
  out["seed0_latent"] = tensor_of(gen.sample_random_latent(0).values());

  out["text_similarity"] = scalar_of(b.similarity->similarity(text, face));
  out["clip_loss"] = scalar_of(loss::clip(face, text, AugmentationSet(4, 9, face.height(), face.width()), *b.similarity));
  out["identity_similarity"] = scalar_of(identity_similarity(face, sample_face(gen, 6), *b.identity));

  InversionConfig inv;
  inv.steps = 40;
  const WPlusInversion w = invert_wplus(face, gen, *b.patch, inv);
  out["inversion_initial_loss"] = scalar_of(w.trajectory.initial_loss);
  inv.steps = 20;
  out["fs_reconstruction_mse"] = scalar_of(embed_fs(face, w.w, gen, *b.patch, inv).mse);

  const auto data = make_toy_sketch_dataset(engine->toy_generator(), *b.parsing, 8, 0);
  SketchInverter inverter(gen.stage_shape(Stage::kOutput).height, gen.stage_shape(Stage::kOutput).width,
                          gen.mean_latent());
  SketchTrainConfig train;
  train.steps = 20;
  train.eval_every = 0;
  train_sketch_inverter(inverter, data, gen, b, engine->weights(), train);
  out["sketch_proxy_latent"] = tensor_of(make_sketch_proxy(data[0].sketch, inverter, gen).w->flat());

  const Image src = sample_face(gen, seeds_with_hair(*engine, 1, 200)[0]);
  ResolvedRequest rr;
  rr.request.hairstyle = HairstyleKind::kText;
  rr.request.hairstyle_text = "curly bob";
  rr.request.seed = 3;
  out["style_only_image"] = tensor_of(run_edit(src, rr, *engine).image.data());
  rr.request.color = ColorKind::kRgb;
  rr.request.rgb = {0.75, 0.3, 0.2};
  out["joint_image"] = tensor_of(run_edit(src, rr, *engine).image.data());

  // Ten toy edits through the benchmark harness.
  const fs::path dir = temp_dir("golden-benchmark");
  nlohmann::json spec = {{"items", nlohmann::json::array()}};
  for (int i = 0; i < 10; ++i) {
    const std::string name = "item" + std::to_string(i);
    io::write_image_png(dir / (name + ".png"), sample_face(gen, 300 + i));
    nlohmann::json recipe = {{"seed", i}};
    if (i % 2 == 0) recipe["hairstyle"] = {{"text", i % 4 == 0 ? "long black hair" : "short blonde hair"}};
    if (i % 3 != 1) recipe["color"] = {{"rgb", {0.1 * i, 0.5, 0.9 - 0.05 * i}}};
    if (!recipe.contains("hairstyle") && !recipe.contains("color")) recipe["color"] = {{"text", "silver hair"}};
    io::write_text(dir / (name + ".json"), recipe.dump());
    spec["items"].push_back({{"name", name}, {"source", name + ".png"}, {"recipe", name + ".json"}});
  }
  io::write_text(dir / "spec.json", spec.dump());
  const BenchmarkReport report = run_benchmark(dir / "spec.json", *engine);
  std::vector<double> rows;
  for (const EvalResult& r : report.items) rows.insert(rows.end(), {r.ids, r.psnr_db, r.ssim});
  out["benchmark_items"] = tensor_of(rows);
  out["benchmark_aggregate"] = tensor_of(std::vector<double>{report.aggregate.ids, report.aggregate.psnr_db,
                                                             report.aggregate.ssim});
  return out;
}

}  // namespace hairedit::testing
