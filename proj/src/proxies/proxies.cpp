#include "hairedit/proxies/proxies.hpp"

#include <algorithm>
#include <cmath>

#include "hairedit/core/blend.hpp"
#include "hairedit/core/io.hpp"
#include "hairedit/core/rng.hpp"
#include "hairedit/error.hpp"
#include "hairedit/generator/toy_generator.hpp"
#include "hairedit/perceptual/image_ops.hpp"

namespace hairedit {

const char* proxy_kind_name(ProxyKind kind) {
  switch (kind) {
    case ProxyKind::kBald: return "bald";
    case ProxyKind::kText: return "text";
    case ProxyKind::kReference: return "reference";
    case ProxyKind::kSketch: return "sketch";
    case ProxyKind::kColor: return "color";
  }
  return "unknown";
}

DirectionBaldingMapper::DirectionBaldingMapper(LatentWPlus direction) : direction_(std::move(direction)) {
  for (int l = kStyleLayers.last + 1; l <= kNumLayers; ++l) {
    for (double v : direction_.layer(l)) {
      require(v == 0.0, ErrorKind::kInvalidArgument, "balding direction must only touch layers 1-7");
    }
  }
}

std::unique_ptr<DirectionBaldingMapper> DirectionBaldingMapper::for_toy(const ToyGenerator& gen) {
  return std::make_unique<DirectionBaldingMapper>(gen.hair_removal_direction());
}

LatentWPlus DirectionBaldingMapper::apply(const LatentWPlus& w) const {
  LatentWPlus out = w;
  auto o = out.flat();
  auto d = direction_.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += d[i];
  return out;
}

namespace {

Shape3 style_shape(const GeneratorBackend& gen) { return gen.stage_shape(Stage::kStyle); }

void check_output_image(const Image& img, const GeneratorBackend& gen, const char* what) {
  const Shape3 out = gen.stage_shape(Stage::kOutput);
  require(img.height() == out.height && img.width() == out.width, ErrorKind::kShapeMismatch,
          std::string(what) + " must be " + std::to_string(out.height) + "x" + std::to_string(out.width));
}

std::vector<double> flat_values(ad::Var v) {
  auto s = v.value();
  return {s.begin(), s.end()};
}

ImageVar synth_image(ad::Tape& tape, ad::Var w, const GeneratorBackend& gen) {
  const Shape3 out = gen.stage_shape(Stage::kOutput);
  ad::Var f7 = gen.forward_to_stage(tape, w, Stage::kStyle);
  return {gen.forward_from_stage(f7, w, Stage::kStyle, Stage::kOutput), out.height, out.width};
}

Proxy finish_proxy(ProxyKind kind, LatentWPlus w, const GeneratorBackend& gen, const FaceParsingBackend& parsing,
                   optim::Trajectory traj) {
  Proxy p;
  p.kind = kind;
  p.f_style = gen.synth_to_stage(w, Stage::kStyle);
  p.region = style_region(gen.synthesize(w), gen, parsing);
  p.w = std::move(w);
  p.trajectory = std::move(traj);
  return p;
}

}  // namespace

BinaryMask style_region(const Image& image, const GeneratorBackend& gen, const FaceParsingBackend& parsing) {
  const Shape3 s = style_shape(gen);
  return downsample_mask(parsing.hair_mask(image), s.height, s.width);
}

BinaryMask bald_region(const Image& image, const GeneratorBackend& gen, const FaceParsingBackend& parsing) {
  const Shape3 s = style_shape(gen);
  return downsample_mask(mask_union(parsing.hair_mask(image), parsing.ear_mask(image)), s.height, s.width);
}

// --- bald ----------------------------------------------------------------------

Proxy make_bald_proxy(const LatentWPlus& w_src, const FeatureMap& f_src, const BinaryMask& m_bald,
                      const BaldingMapper& mapper, const GeneratorBackend& gen) {
  require(f_src.stage() == Stage::kStyle, ErrorKind::kShapeMismatch, "bald proxy blends style-stage features");
  gen.check_features(f_src);
  require(m_bald.height() == f_src.height() && m_bald.width() == f_src.width(), ErrorKind::kShapeMismatch,
          "bald mask must be at style-stage resolution");
  Proxy p;
  p.kind = ProxyKind::kBald;
  p.w = mapper.apply(w_src);
  p.f_style = gen.synth_to_stage(*p.w, Stage::kStyle);
  p.f_blended = blend_features(*p.f_style, f_src, m_bald);
  p.region = m_bald;
  return p;
}

// --- text ----------------------------------------------------------------------

LatentWPlus text_proxy_init(const GeneratorBackend& gen, std::uint64_t seed, double psi) {
  return truncation_init(gen.mean_latent(), gen.sample_random_latent(seed), psi);
}

namespace {

struct TextTerms {
  ad::Var clip, pose, shape, total;
};

TextTerms text_terms(ad::Tape& tape, ad::Var w, const std::string& text, const std::vector<double>& src_kp,
                     const GeneratorBackend& gen, const Backends& b, const LossWeights& weights,
                     const TextProxyOptions& opts, std::uint64_t aug_seed) {
  const ImageVar img = synth_image(tape, w, gen);
  const AugmentationSet augs(opts.augmentations, aug_seed, img.height, img.width);
  TextTerms t;
  t.clip = loss::clip(img, text, augs, *b.similarity);
  t.pose = loss::pose(tape.constant(src_kp), b.keypoints->extract(img), b.keypoints->count());
  t.total = ad::add(ad::mul(t.clip, weights.clip), ad::mul(t.pose, weights.pose));
  if (opts.target_mask) {
    t.shape = loss::shape(b.parsing->soft_hair(img), *opts.target_mask);
    t.total = ad::add(t.total, ad::mul(t.shape, weights.shape));
  } else {
    t.shape = tape.scalar_constant(0.0);
  }
  return t;
}

std::vector<double> keypoints_of(const Image& img, const KeypointBackend& kp) {
  ad::Tape tape;
  return flat_values(kp.extract(image_constant(tape, img)));
}

std::uint64_t step_seed(std::uint64_t seed, int step) {
  return seed * 0x100000001B3ull + static_cast<std::uint64_t>(step) + 1;
}

}  // namespace

TextObjectiveTerms text_objective(const LatentWPlus& w, const std::string& text, const Image& i_src,
                                  const GeneratorBackend& gen, const Backends& backends, const LossWeights& weights,
                                  const TextProxyOptions& opts, std::uint64_t aug_seed) {
  ad::Tape tape;
  const auto kp = keypoints_of(i_src, *backends.keypoints);
  const TextTerms t = text_terms(tape, latent_constant(tape, w), text, kp, gen, backends, weights, opts, aug_seed);
  return {t.clip.scalar(), t.pose.scalar(), t.shape.scalar(), t.total.scalar()};
}

Proxy make_text_proxy(const std::string& text, const Image& i_src, const GeneratorBackend& gen,
                      const Backends& backends, const LossWeights& weights, const InversionConfig& opt,
                      const TextProxyOptions& opts, const optim::ProgressFn& progress) {
  weights.validate();
  check_output_image(i_src, gen, "source image");
  require(!text.empty(), ErrorKind::kValidation, "hairstyle text must not be empty");
  require(opts.psi >= 0.0 && opts.psi <= 1.0, ErrorKind::kInvalidArgument, "psi must lie in [0, 1]");
  if (opts.target_mask) check_output_image(Image(opts.target_mask->height(), opts.target_mask->width()), gen,
                                           "shape mask");
  const LatentWPlus init = opts.init ? *opts.init : text_proxy_init(gen, opts.seed, opts.psi);
  const auto src_kp = keypoints_of(i_src, *backends.keypoints);
  std::vector<double> params(init.flat().begin(), init.flat().end());
  int evaluation = 0;
  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var w) {
    const std::uint64_t seed = step_seed(opts.seed, evaluation++);
    return text_terms(tape, w, text, src_kp, gen, backends, weights, opts, seed).total;
  });
  auto traj = optim::minimize(params, objective, opt.steps, opt.adam(), progress);
  return finish_proxy(ProxyKind::kText, LatentWPlus(std::move(params)), gen, *backends.parsing, std::move(traj));
}

// --- reference -----------------------------------------------------------------

Proxy make_reference_proxy(const Image& i_ref, const Image& i_src, const GeneratorBackend& gen,
                           const Backends& backends, const LossWeights& weights, const InversionConfig& opt,
                           const ReferenceProxyOptions& opts, const optim::ProgressFn& progress,
                           std::vector<double>* step_norms) {
  weights.validate();
  check_output_image(i_ref, gen, "reference image");
  check_output_image(i_src, gen, "source image");
  const LatentWPlus init = opts.init ? *opts.init : invert_wplus(i_ref, gen, *backends.patch, opts.invert).w;
  const BinaryMask m_ref = backends.parsing->hair_mask(i_ref);
  const auto src_kp = keypoints_of(i_src, *backends.keypoints);
  std::vector<double> params(init.flat().begin(), init.flat().end());
  std::vector<double> prev = params;

  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var w) {
    const ImageVar img = synth_image(tape, w, gen);
    const Image current = to_image(img.v, img.height, img.width);
    const BinaryMask m_gen = backends.parsing->hair_mask(current);
    ad::Var total = ad::mul(loss::style(image_constant(tape, i_ref), img, m_ref, m_gen, *backends.perceptual),
                            weights.style);
    total = ad::add(total, ad::mul(loss::pose(tape.constant(src_kp), backends.keypoints->extract(img),
                                              backends.keypoints->count()),
                                   weights.pose));
    total = ad::add(total, ad::mul(loss::reg(w, prev), weights.reg));
    if (opts.target_mask) {
      total = ad::add(total, ad::mul(loss::shape(backends.parsing->soft_hair(img), *opts.target_mask),
                                     weights.shape));
    }
    auto cur = w.value();
    if (step_norms) {
      double n2 = 0.0;
      for (std::size_t i = 0; i < cur.size(); ++i) n2 += (cur[i] - prev[i]) * (cur[i] - prev[i]);
      step_norms->push_back(std::sqrt(n2));
    }
    prev.assign(cur.begin(), cur.end());
    return total;
  });
  auto traj = optim::minimize(params, objective, opt.steps, opt.adam(), progress);
  // The first entry is the zero displacement of the starting point.
  if (step_norms && !step_norms->empty()) step_norms->erase(step_norms->begin());
  return finish_proxy(ProxyKind::kReference, LatentWPlus(std::move(params)), gen, *backends.parsing,
                      std::move(traj));
}

// --- sketch --------------------------------------------------------------------

SketchInverter::SketchInverter(int image_height, int image_width, LatentW mean)
    : height_(image_height),
      width_(image_width),
      mean_(std::move(mean)),
      matrix_(static_cast<std::size_t>(kNumLayers) * kLatentDim * kFeatures, 0.0) {
  require(height_ % kGrid == 0 && width_ % kGrid == 0, ErrorKind::kInvalidArgument,
          "sketch inverter needs image sides divisible by 8");
}

std::vector<double> SketchInverter::features(const SketchInput& sketch) const {
  require(sketch.height == height_ && sketch.width == width_, ErrorKind::kShapeMismatch,
          "sketch canvas is " + std::to_string(sketch.height) + "x" + std::to_string(sketch.width) +
              " but the inverter was trained at " + std::to_string(height_) + "x" + std::to_string(width_));
  const BinaryMask r = sketch.raster();
  const auto pooled = avg_pool_map(height_, width_, 1, height_ / kGrid);
  require(width_ == height_, ErrorKind::kShapeMismatch, "sketch inverter expects square canvases");
  auto f = pooled->apply(r.data());
  f.push_back(1.0);
  return f;
}

LatentWPlus SketchInverter::invert(const SketchInput& sketch) const {
  const auto f = features(sketch);
  std::vector<double> w(static_cast<std::size_t>(kNumLayers) * kLatentDim);
  for (std::size_t r = 0; r < w.size(); ++r) {
    const double* row = matrix_.data() + r * kFeatures;
    double acc = 0.0;
    for (int c = 0; c < kFeatures; ++c) acc += row[c] * f[c];
    w[r] = mean_[r % kLatentDim] + acc;
  }
  return LatentWPlus(std::move(w));
}

void SketchInverter::save(const std::filesystem::path& path) const {
  io::TensorArchive ar;
  ar["sketch.matrix"] = io::Tensor{{static_cast<std::uint32_t>(kNumLayers * kLatentDim), kFeatures}, matrix_};
  ar["sketch.mean"] = io::Tensor{{kLatentDim}, std::vector<double>(mean_.values().begin(), mean_.values().end())};
  ar["sketch.canvas"] = io::Tensor{{2}, {static_cast<double>(height_), static_cast<double>(width_)}};
  io::write_archive(path, ar);
}

SketchInverter SketchInverter::load(const std::filesystem::path& path) {
  const io::TensorArchive ar = io::read_archive(path);
  auto get = [&](const char* name) -> const io::Tensor& {
    auto it = ar.find(name);
    require(it != ar.end(), ErrorKind::kConfig, std::string("inverter file lacks '") + name + "'");
    return it->second;
  };
  const auto& canvas = get("sketch.canvas").values;
  const auto& mean = get("sketch.mean").values;
  const auto& matrix = get("sketch.matrix").values;
  require(canvas.size() == 2 && mean.size() == static_cast<std::size_t>(kLatentDim) &&
              matrix.size() == static_cast<std::size_t>(kNumLayers) * kLatentDim * kFeatures,
          ErrorKind::kConfig, "inverter file has inconsistent tensor sizes");
  SketchInverter inv(static_cast<int>(canvas[0]), static_cast<int>(canvas[1]), LatentW(mean));
  inv.matrix_ = matrix;
  return inv;
}

namespace {

ad::Var sketch_pair_loss(ad::Tape& tape, ad::Var m, const std::vector<double>& feats, const SketchInverter& inv,
                         const Image& target, const GeneratorBackend& gen, const Backends& b,
                         const LossWeights& weights) {
  std::vector<double> mean(static_cast<std::size_t>(kNumLayers) * kLatentDim);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = inv.mean()[i % kLatentDim];
  ad::Var w = ad::add_const(
      ad::matvec_param(m, kNumLayers * kLatentDim, SketchInverter::kFeatures, feats), std::move(mean));
  const ImageVar img = synth_image(tape, w, gen);
  return loss::sketch_trainer(img, image_constant(tape, target), *b.parsing, *b.patch, weights);
}

}  // namespace

double sketch_dataset_loss(const SketchInverter& inv, const std::vector<SketchPair>& data,
                           const GeneratorBackend& gen, const Backends& backends, const LossWeights& weights) {
  require(!data.empty(), ErrorKind::kValidation, "sketch dataset is empty");
  double acc = 0.0;
  for (const SketchPair& p : data) {
    acc += loss::sketch_trainer(gen.synthesize(inv.invert(p.sketch)), p.image, *backends.parsing, *backends.patch,
                                weights);
  }
  return acc / static_cast<double>(data.size());
}

SketchTrainResult train_sketch_inverter(SketchInverter& inv, const std::vector<SketchPair>& data,
                                        const GeneratorBackend& gen, const Backends& backends,
                                        const LossWeights& weights, const SketchTrainConfig& cfg,
                                        const optim::ProgressFn& progress) {
  require(!data.empty(), ErrorKind::kValidation, "sketch dataset is empty");
  require(cfg.steps >= 1, ErrorKind::kValidation, "sketch training needs at least one step");
  require(cfg.batch >= 1, ErrorKind::kValidation, "batch size must be at least 1");
  weights.validate();
  for (const SketchPair& p : data) check_output_image(p.image, gen, "training image");

  SketchTrainResult result;
  result.initial_mean_loss = sketch_dataset_loss(inv, data, gen, backends, weights);
  if (cfg.eval_every > 0) result.eval_losses.emplace_back(0, result.initial_mean_loss);

  Rng rng(cfg.seed);
  int evaluation = 0;
  auto objective = optim::tape_objective([&](ad::Tape& tape, ad::Var m) {
    std::vector<ad::Var> terms;
    for (int k = 0; k < cfg.batch; ++k) {
      const SketchPair& p = data[static_cast<std::size_t>(rng.below(static_cast<int>(data.size())))];
      const SketchInput s = p.sketch.with_dropout(cfg.dropout, rng.next());
      terms.push_back(sketch_pair_loss(tape, m, inv.features(s), inv, p.image, gen, backends, weights));
    }
    ++evaluation;
    return ad::mean(ad::concat(terms));
  });
  optim::AdamSettings adam;
  adam.learning_rate = cfg.learning_rate;
  auto on_step = [&](int step, double loss) {
    if (step < cfg.steps) result.step_losses.push_back(loss);
    if (cfg.eval_every > 0 && step > 0 && step % cfg.eval_every == 0 && step < cfg.steps) {
      result.eval_losses.emplace_back(step, sketch_dataset_loss(inv, data, gen, backends, weights));
    }
    if (progress) progress(step, loss);
  };
  optim::minimize(inv.matrix(), objective, cfg.steps, adam, on_step);
  result.final_mean_loss = sketch_dataset_loss(inv, data, gen, backends, weights);
  if (cfg.eval_every > 0) result.eval_losses.emplace_back(cfg.steps, result.final_mean_loss);
  return result;
}

SketchInput trace_hair_boundary(const Image& image, const FaceParsingBackend& parsing, double stroke_width) {
  const BinaryMask hair = parsing.hair_mask(image);
  SketchInput s;
  s.width = image.width();
  s.height = image.height();
  constexpr int kStep = 4;
  constexpr std::size_t kMaxPoints = 4;
  Stroke current;
  current.width = stroke_width;
  auto flush = [&] {
    if (!current.points.empty()) s.strokes.push_back(current);
    current.points.clear();
  };
  for (int x = kStep / 2; x < image.width(); x += kStep) {
    if (hair.at(0, x) == 0.0) {
      flush();
      continue;
    }
    int y = 0;
    while (y + 1 < image.height() && hair.at(y + 1, x) != 0.0) ++y;
    if (y + 1 >= image.height()) {
      flush();
      continue;
    }
    current.points.push_back({x + 0.5, y + 1.0});
    if (current.points.size() >= kMaxPoints) {
      const auto last = current.points.back();
      flush();
      current.points.push_back(last);
    }
  }
  flush();
  // Drop single-point leftovers that only repeat the previous stroke's end.
  std::erase_if(s.strokes, [](const Stroke& st) { return st.points.size() < 2; });
  return s;
}

std::vector<SketchPair> make_toy_sketch_dataset(const ToyGenerator& gen, const FaceParsingBackend& parsing, int count,
                                                std::uint64_t seed) {
  require(count >= 1, ErrorKind::kValidation, "dataset size must be at least 1");
  Rng rng(seed);
  const LatentWPlus base = LatentWPlus::broadcast(gen.mean_latent());
  std::vector<SketchPair> out;
  for (int i = 0; i < count; ++i) {
    const double dh = rng.uniform(-1.2, 1.2);
    const double dt = rng.uniform(-2.0, 2.0);
    LatentWPlus w = base;
    const LatentWPlus oh = gen.code_offset(3, 0, dh);
    const LatentWPlus ot = gen.code_offset(3, 1, dt);
    auto f = w.flat();
    for (std::size_t k = 0; k < f.size(); ++k) f[k] += oh.flat()[k] + ot.flat()[k];
    SketchPair p;
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%03d", i);
    p.name = name;
    p.image = gen.synthesize(w).clamped();
    p.sketch = trace_hair_boundary(p.image, parsing);
    out.push_back(std::move(p));
  }
  return out;
}

void write_sketch_dataset(const std::filesystem::path& dir, const std::vector<SketchPair>& data) {
  std::filesystem::create_directories(dir);
  for (const SketchPair& p : data) {
    p.sketch.write(dir / (p.name + ".sketch"));
    io::write_image_png(dir / (p.name + ".png"), p.image);
  }
}

std::vector<SketchPair> read_sketch_dataset(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::kIo, "dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> sketches;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".sketch") sketches.push_back(entry.path());
  }
  std::sort(sketches.begin(), sketches.end());
  std::vector<SketchPair> out;
  for (const auto& path : sketches) {
    auto png = path;
    png.replace_extension(".png");
    require(std::filesystem::exists(png), ErrorKind::kIo, "sketch " + path.string() + " has no paired .png");
    out.push_back({path.stem().string(), SketchInput::read(path), io::read_image_png(png)});
  }
  require(!out.empty(), ErrorKind::kValidation, "sketch dataset is empty: " + dir.string());
  return out;
}

BinaryMask sketch_region(const SketchInput& sketch, const GeneratorBackend& gen) {
  const Shape3 s = style_shape(gen);
  return dilate_mask(downsample_mask_any(sketch.raster(), s.height, s.width), 1);
}

Proxy make_sketch_proxy(const SketchInput& sketch, const SketchInverter& inverter, const GeneratorBackend& gen) {
  require(!sketch.strokes.empty(), ErrorKind::kValidation, "sketch has no strokes");
  const Shape3 out = gen.stage_shape(Stage::kOutput);
  require(inverter.height() == out.height && inverter.width() == out.width, ErrorKind::kShapeMismatch,
          "sketch inverter resolution does not match the generator output");
  Proxy p;
  p.kind = ProxyKind::kSketch;
  p.w = inverter.invert(sketch);
  p.f_style = gen.synth_to_stage(*p.w, Stage::kStyle);
  p.region = sketch_region(sketch, gen);
  return p;
}

}  // namespace hairedit
