#include "hairedit/losses/losses.hpp"

#include <cmath>
#include <numbers>

#include "hairedit/core/blend.hpp"
#include "hairedit/core/rng.hpp"
#include "hairedit/error.hpp"
#include "hairedit/perceptual/image_ops.hpp"

namespace hairedit {

void LossWeights::validate() const {
  const std::array<std::pair<const char*, double>, 8> all{{{"clip", clip},
                                                            {"pose", pose},
                                                            {"shape", shape},
                                                            {"style", style},
                                                            {"reg", reg},
                                                            {"mse", mse},
                                                            {"lpips", lpips},
                                                            {"m_par", m_par}}};
  for (const auto& [name, v] : all) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::kConfig,
            std::string("loss weight '") + name + "' must be a nonnegative number");
  }
}

AugmentationSet::AugmentationSet(int count, std::uint64_t seed, int height, int width)
    : height_(height), width_(width) {
  require(count >= 1, ErrorKind::kInvalidArgument, "augmentation count must be at least 1");
  Rng rng(seed ^ 0xA5A5A5A5ull);
  for (int i = 0; i < count; ++i) {
    const double s = rng.uniform(0.8, 1.0);
    const double cx = rng.uniform(s / 2, 1.0 - s / 2);
    const double cy = rng.uniform(s / 2, 1.0 - s / 2);
    const double theta = rng.uniform(-5.0, 5.0) * std::numbers::pi / 180.0;
    const double co = std::cos(theta), si = std::sin(theta);
    std::array<double, 6> a{s * co, -s * si, cx - 0.5 * s * (co - si), s * si, s * co, cy - 0.5 * s * (si + co)};
    affines_.push_back(a);
    maps_.push_back(affine_warp_map(height, width, 3, a));
  }
}

ImageVar AugmentationSet::apply(int i, const ImageVar& image) const {
  require(image.height == height_ && image.width == width_, ErrorKind::kShapeMismatch,
          "augmentation set was drawn for a different image size");
  return {ad::linear(maps_.at(i), image.v), height_, width_};
}

Image AugmentationSet::apply(int i, const Image& image) const {
  require(image.height() == height_ && image.width() == width_, ErrorKind::kShapeMismatch,
          "augmentation set was drawn for a different image size");
  return Image(height_, width_, maps_.at(i)->apply(image.data()));
}

namespace loss {

namespace {

void check_same_size(const ImageVar& a, const ImageVar& b, const char* what) {
  require(a.height == b.height && a.width == b.width, ErrorKind::kShapeMismatch,
          std::string(what) + ": image sizes differ");
}

void check_mask(const ImageVar& a, const BinaryMask& m, const char* what) {
  require(m.height() == a.height && m.width() == a.width, ErrorKind::kShapeMismatch,
          std::string(what) + ": mask resolution " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
              " does not match image " + std::to_string(a.height) + "x" + std::to_string(a.width));
}

ImageVar masked(const ImageVar& image, const BinaryMask& m) {
  return {ad::mul_const(image.v, expand_mask(m)), image.height, image.width};
}

}  // namespace

std::vector<double> expand_mask(const BinaryMask& m, int channels) {
  std::vector<double> out;
  out.reserve(m.data().size() * channels);
  for (double v : m.data()) {
    for (int c = 0; c < channels; ++c) out.push_back(v);
  }
  return out;
}

ad::Var clip(const ImageVar& image, const std::string& text, const AugmentationSet& augs,
             const TextImageSimilarityBackend& sim) {
  require(augs.count() >= 1, ErrorKind::kInvalidArgument, "clip loss needs at least one augmentation");
  ad::Tape& tape = *image.v.tape();
  ad::Var t = tape.constant(sim.embed_text(text));
  std::vector<ad::Var> terms;
  for (int i = 0; i < augs.count(); ++i) {
    ad::Var e = sim.embed_image(augs.apply(i, image));
    terms.push_back(ad::add(ad::neg(ad::dot(e, t)), 1.0));
  }
  return ad::mean(ad::concat(terms));
}

double clip_from_similarities(const std::vector<double>& similarities) {
  require(!similarities.empty(), ErrorKind::kInvalidArgument, "clip loss needs at least one augmentation");
  double acc = 0.0;
  for (double s : similarities) acc += 1.0 - s;
  return acc / static_cast<double>(similarities.size());
}

ad::Var pose(ad::Var kp_src, ad::Var kp_gen, int count) {
  require(kp_src.size() == kp_gen.size() && kp_src.size() == static_cast<std::size_t>(3 * count),
          ErrorKind::kShapeMismatch, "keypoint sets differ in size");
  return ad::mul(ad::sum_squares(ad::sub(kp_gen, kp_src)), 1.0 / count);
}

ad::Var pose(const ImageVar& src, const ImageVar& gen, const KeypointBackend& kp) {
  return pose(kp.extract(src), kp.extract(gen), kp.count());
}

ad::Var style(const ImageVar& ref, const ImageVar& gen, const BinaryMask& m_ref, const BinaryMask& m_gen,
              const PerceptualFeatureBackend& pf) {
  check_mask(ref, m_ref, "style loss");
  check_mask(gen, m_gen, "style loss");
  const auto fr = pf.features(masked(ref, m_ref));
  const auto fg = pf.features(masked(gen, m_gen));
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < fr.size(); ++i) {
    ad::Var d = ad::sub(ad::gram(fr[i].v, fr[i].channels), ad::gram(fg[i].v, fg[i].channels));
    terms.push_back(ad::sum_squares(d));
  }
  return ad::mean(ad::concat(terms));
}

ad::Var reg(ad::Var w, std::span<const double> w_prev) {
  require(w.size() == w_prev.size(), ErrorKind::kShapeMismatch, "latent sizes differ");
  std::vector<double> neg(w_prev.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -w_prev[i];
  return ad::sum_squares(ad::add_const(w, std::move(neg)));
}

ad::Var shape(ad::Var gen_hair, const BinaryMask& target) {
  require(gen_hair.size() == target.data().size(), ErrorKind::kShapeMismatch, "shape loss: mask sizes differ");
  std::vector<double> neg(target.data().size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -target.data()[i];
  return ad::mean(ad::square(ad::add_const(gen_hair, std::move(neg))));
}

ad::Var bg(const ImageVar& i_style, const ImageVar& i_color, const BinaryMask& m_nonhair) {
  check_same_size(i_style, i_color, "background loss");
  check_mask(i_style, m_nonhair, "background loss");
  return ad::sum_squares(ad::mul_const(ad::sub(i_style.v, i_color.v), expand_mask(m_nonhair)));
}

ad::Var mse(const ImageVar& a, const ImageVar& b) {
  check_same_size(a, b, "mse");
  return ad::mean(ad::square(ad::sub(a.v, b.v)));
}

ad::Var blend(const ImageVar& i_final, const ImageVar& i_color, const ImageVar& i_style, const BinaryMask& m_color,
              const PatchDistanceBackend& pd) {
  check_same_size(i_final, i_color, "blend loss");
  check_same_size(i_final, i_style, "blend loss");
  check_mask(i_final, m_color, "blend loss");
  const BinaryMask outside = mask_complement(m_color);
  const ImageVar fin_in = masked(i_final, m_color), col_in = masked(i_color, m_color);
  const ImageVar fin_out = masked(i_final, outside), sty_out = masked(i_style, outside);
  ad::Var inside = ad::add(mse(fin_in, col_in), pd.distance(fin_in, col_in));
  ad::Var out = ad::add(mse(fin_out, sty_out), pd.distance(fin_out, sty_out));
  return ad::add(inside, out);
}

ad::Var masked_mean_color(const ImageVar& image, const BinaryMask& m) {
  check_mask(image, m, "masked mean colour");
  const double n = static_cast<double>(m.count());
  ad::SparseMap::Builder b(3, image.height * image.width * 3);
  for (int c = 0; c < 3; ++c) {
    if (n > 0) {
      for (std::size_t p = 0; p < m.data().size(); ++p) {
        if (m.data()[p] != 0.0) b.add(static_cast<int>(p) * 3 + c, 1.0 / n);
      }
    }
    b.next_row();
  }
  return ad::linear(b.finish(), image.v);
}

ad::Var avg_color(const ImageVar& gen, const BinaryMask& hair, const std::array<double, 3>& target) {
  ad::Tape& tape = *gen.v.tape();
  if (hair.empty_region()) return tape.scalar_constant(0.0);
  return ad::sum_squares(ad::add_const(masked_mean_color(gen, hair), {-target[0], -target[1], -target[2]}));
}

ad::Var reference_color(const ImageVar& gen, const BinaryMask& gen_hair, const Image& ref,
                        const BinaryMask& ref_hair) {
  ad::Tape& tape = *gen.v.tape();
  if (gen_hair.empty_region() || ref_hair.empty_region()) return tape.scalar_constant(0.0);
  ad::Tape scratch;
  auto rm = masked_mean_color(image_constant(scratch, ref), ref_hair).value();
  return avg_color(gen, gen_hair, {rm[0], rm[1], rm[2]});
}

ad::Var parsing_similarity(const ImageVar& pred, const ImageVar& target, const FaceParsingBackend& parsing) {
  check_same_size(pred, target, "parsing similarity");
  const auto fp = parsing.multi_level_features(pred);
  const auto ft = parsing.multi_level_features(target);
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    terms.push_back(ad::add(ad::neg(ad::cosine(ft[i].v, fp[i].v)), 1.0));
  }
  return ad::sum(ad::concat(terms));
}

ad::Var sketch_trainer(const ImageVar& pred, const ImageVar& target, const FaceParsingBackend& parsing,
                       const PatchDistanceBackend& pd, const LossWeights& w) {
  ad::Var l2 = ad::mul(mse(pred, target), w.mse);
  ad::Var lp = ad::mul(pd.distance(pred, target), w.lpips);
  ad::Var par = ad::mul(parsing_similarity(pred, target, parsing), w.m_par);
  return ad::add(ad::add(l2, lp), par);
}

// --- value wrappers ----------------------------------------------------------

double clip(const Image& image, const std::string& text, const AugmentationSet& augs,
            const TextImageSimilarityBackend& sim) {
  ad::Tape tape;
  return clip(image_constant(tape, image), text, augs, sim).scalar();
}

double pose(const Image& src, const Image& gen, const KeypointBackend& kp) {
  ad::Tape tape;
  return pose(image_constant(tape, src), image_constant(tape, gen), kp).scalar();
}

double style(const Image& ref, const Image& gen, const BinaryMask& m_ref, const BinaryMask& m_gen,
             const PerceptualFeatureBackend& pf) {
  ad::Tape tape;
  return style(image_constant(tape, ref), image_constant(tape, gen), m_ref, m_gen, pf).scalar();
}

double reg(const LatentWPlus& w, const LatentWPlus& w_prev) {
  ad::Tape tape;
  return reg(tape.constant(w.flat()), w_prev.flat()).scalar();
}

double shape(const BinaryMask& gen_hair, const BinaryMask& target) {
  require(gen_hair.height() == target.height() && gen_hair.width() == target.width(), ErrorKind::kShapeMismatch,
          "shape loss: mask sizes differ");
  ad::Tape tape;
  return shape(tape.constant(gen_hair.data()), target).scalar();
}

double bg(const Image& i_style, const Image& i_color, const BinaryMask& m_nonhair) {
  ad::Tape tape;
  return bg(image_constant(tape, i_style), image_constant(tape, i_color), m_nonhair).scalar();
}

double blend(const Image& i_final, const Image& i_color, const Image& i_style, const BinaryMask& m_color,
             const PatchDistanceBackend& pd) {
  ad::Tape tape;
  return blend(image_constant(tape, i_final), image_constant(tape, i_color), image_constant(tape, i_style), m_color,
               pd)
      .scalar();
}

double avg_color(const Image& gen, const BinaryMask& hair, const std::array<double, 3>& target) {
  ad::Tape tape;
  return avg_color(image_constant(tape, gen), hair, target).scalar();
}

double sketch_trainer(const Image& pred, const Image& target, const FaceParsingBackend& parsing,
                      const PatchDistanceBackend& pd, const LossWeights& w) {
  ad::Tape tape;
  return sketch_trainer(image_constant(tape, pred), image_constant(tape, target), parsing, pd, w).scalar();
}

double mse(const Image& a, const Image& b) {
  ad::Tape tape;
  return mse(image_constant(tape, a), image_constant(tape, b)).scalar();
}

}  // namespace loss
}  // namespace hairedit
