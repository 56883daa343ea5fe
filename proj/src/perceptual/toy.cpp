#include "hairedit/perceptual/toy.hpp"

#include <cmath>

#include "hairedit/core/rng.hpp"
#include "hairedit/error.hpp"
#include "hairedit/perceptual/image_ops.hpp"

namespace hairedit {

namespace {

constexpr double kSkinMargin = 0.1;
// Default pair-difference threshold of the strand cue (the generator's strand amplitude).
constexpr double kStrandThreshold = 0.08;

ad::Matrix random_matrix(Rng& rng, int rows, int cols, double scale) {
  ad::Matrix m{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols)};
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

bool is_skin(const Image& im, int y, int x) { return im.at(y, x, 0) - im.at(y, x, 2) > kSkinMargin; }

// Strand texture test on one pixel, same cue as the parser's hair label.
bool is_strand(const Image& im, int y, int x, double threshold) {
  const int even = x - x % 2;
  if (even + 1 >= im.width()) return false;
  double d = 0.0;
  for (int c = 0; c < 3; ++c) d += (im.at(y, even, c) - im.at(y, even + 1, c)) / 3.0;
  return d > threshold;
}

// Per pixel: mean over channels of (even - odd) within its column pair.
std::shared_ptr<const ad::SparseMap> pair_difference_map(int h, int w) {
  require(w % 2 == 0, ErrorKind::kInvalidArgument, "strand parser needs an even image width");
  ad::SparseMap::Builder b(h * w, h * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int even = x - x % 2;
      for (int c = 0; c < 3; ++c) {
        b.add((y * w + even) * 3 + c, 1.0 / 3.0);
        b.add((y * w + even + 1) * 3 + c, -1.0 / 3.0);
      }
      b.next_row();
    }
  }
  return b.finish();
}

ad::Var strand_hair(const ImageVar& image, double threshold) {
  ad::Var d = ad::linear(pair_difference_map(image.height, image.width), image.v);
  return ad::sigmoid(ad::mul(ad::add(d, -threshold), 10.0 / threshold));
}

}  // namespace

// --- text similarity --------------------------------------------------------

ToyTextSimilarity::ToyTextSimilarity() : ToyTextSimilarity(Image(64, 64, 0.5)) {}

ToyTextSimilarity::ToyTextSimilarity(Image neutral) : neutral_(std::move(neutral)) {
  require(neutral_.height() % kBands == 0, ErrorKind::kInvalidArgument,
          "neutral image height must be divisible by the band count");
  const auto map = row_band_map(neutral_.height(), neutral_.width(), 3, kBands);
  neutral_summary_ = map->apply(neutral_.data());
}

ToyTextTarget ToyTextSimilarity::target(const std::string& text) {
  const std::uint64_t h = fnv1a(text);
  ToyTextTarget t;
  for (int c = 0; c < 3; ++c) t.color[c] = 0.15 + 0.7 * static_cast<double>((h >> (8 * c)) & 0xFF) / 255.0;
  t.band_height = 0.15 + 0.35 * static_cast<double>((h >> 24) & 0xFFFF) / 65535.0;
  return t;
}

Image ToyTextSimilarity::render_target(const std::string& text) const {
  const ToyTextTarget t = target(text);
  Image out = neutral_;
  for (int y = 0; y < out.height(); ++y) {
    if ((y + 0.5) / out.height() >= t.band_height) continue;
    for (int x = 0; x < out.width(); ++x) {
      // Warm hair passes the skin test too; keep only real skin.
      if (is_skin(neutral_, y, x) && !is_strand(neutral_, y, x, kStrandThreshold)) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = t.color[c];
    }
  }
  return out;
}

std::vector<double> ToyTextSimilarity::summary(const Image& image) const {
  const auto map = row_band_map(image.height(), image.width(), 3, kBands);
  auto s = map->apply(image.data());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] -= neutral_summary_[i];
  return s;
}

ad::Var ToyTextSimilarity::embed_image(const ImageVar& image) const {
  require(image.height == neutral_.height() && image.width == neutral_.width(), ErrorKind::kShapeMismatch,
          "similarity backend expects " + std::to_string(neutral_.height()) + "x" +
              std::to_string(neutral_.width()) + " images");
  const auto map = row_band_map(image.height, image.width, 3, kBands);
  ad::Var s = ad::linear(map, image.v);
  std::vector<double> shift(neutral_summary_.size());
  for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = -neutral_summary_[i];
  return ad::normalize(ad::add_const(s, std::move(shift)));
}

std::vector<double> ToyTextSimilarity::embed_text(const std::string& text) const {
  auto s = summary(render_target(text));
  double n2 = 0.0;
  for (double v : s) n2 += v * v;
  const double inv = 1.0 / std::sqrt(n2 + 1e-12);
  for (double& v : s) v *= inv;
  return s;
}

// --- keypoints ---------------------------------------------------------------

ad::Var ToyKeypoints::extract(const ImageVar& image) const {
  ad::Tape& tape = *image.v.tape();
  const int h = image.height, w = image.width;
  const int n = h * w;
  ad::Var r = ad::gather(image.v, channel_index(h, w, 3, 0));
  ad::Var b = ad::gather(image.v, channel_index(h, w, 3, 2));
  ad::Var skin = ad::sigmoid(ad::mul(ad::add(ad::sub(r, b), -kSkinMargin), 20.0));
  ad::Var visible = ad::mul(skin, ad::add(ad::neg(strand_hair(image, threshold_)), 1.0));

  std::vector<double> xs(n), ys(n);
  for (int p = 0; p < n; ++p) {
    xs[p] = (p % w + 0.5) / w;
    ys[p] = (p / w + 0.5) / h;
  }
  constexpr double kPrior = 1.0;  // pseudo-mass at the region centre
  std::vector<ad::Var> points;
  for (int q = -1; q < 4; ++q) {
    std::vector<double> sel(n, 1.0);
    double cx = 0.5, cy = 0.5;
    if (q >= 0) {
      const bool right = q % 2 == 1, bottom = q / 2 == 1;
      cx = right ? 0.75 : 0.25;
      cy = bottom ? 0.75 : 0.25;
      for (int p = 0; p < n; ++p) sel[p] = ((xs[p] >= 0.5) == right && (ys[p] >= 0.5) == bottom) ? 1.0 : 0.0;
    }
    ad::Var wq = ad::mul_const(visible, sel);
    ad::Var mass = ad::sum(wq);
    ad::Var denom = ad::add(mass, kPrior);
    ad::Var px = ad::div(ad::add(ad::dot(wq, tape.constant(xs)), kPrior * cx), denom);
    ad::Var py = ad::div(ad::add(ad::dot(wq, tape.constant(ys)), kPrior * cy), denom);
    ad::Var pz = ad::mul(mass, 1.0 / n);
    points.push_back(ad::concat({px, py, pz}));
  }
  return ad::concat(points);
}

// --- parsing -----------------------------------------------------------------

ToyFaceParser::ToyFaceParser(double strand_threshold, std::uint64_t seed) : threshold_(strand_threshold) {
  Rng rng(seed);
  for (int i = 0; i < 5; ++i) {
    rgb_mix_[i] = random_matrix(rng, 4, 3, 1.0);
    hair_mix_[i] = random_matrix(rng, 4, 1, 1.0);
    bias_[i].resize(4);
    for (double& v : bias_[i]) v = 0.3 * rng.normal();
  }
}

LabelMap ToyFaceParser::parse(const Image& image) const {
  const int h = image.height(), w = image.width();
  require(w % 2 == 0, ErrorKind::kInvalidArgument, "strand parser needs an even image width");
  LabelMap out{h, w, std::vector<FaceLabel>(static_cast<std::size_t>(h) * w, FaceLabel::kBackground)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; x += 2) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d += image.at(y, x, c) - image.at(y, x + 1, c);
      if (d / 3.0 > threshold_) {
        out.labels[y * w + x] = FaceLabel::kHair;
        out.labels[y * w + x + 1] = FaceLabel::kHair;
      }
    }
    int first = -1, last = -1;
    for (int x = 0; x < w; ++x) {
      if (out.labels[y * w + x] == FaceLabel::kHair || !is_skin(image, y, x)) continue;
      out.labels[y * w + x] = FaceLabel::kFace;
      if (first < 0) first = x;
      last = x;
    }
    // Ears: the two outermost skin pixels on each side of a wide enough row.
    if (first >= 0 && last - first >= 7) {
      for (int x : {first, first + 1, last - 1, last}) {
        if (out.labels[y * w + x] == FaceLabel::kFace) out.labels[y * w + x] = FaceLabel::kEar;
      }
    }
  }
  return out;
}

ad::Var ToyFaceParser::soft_hair(const ImageVar& image) const { return strand_hair(image, threshold_); }

std::vector<FeatureVar> ToyFaceParser::multi_level_features(const ImageVar& image) const {
  ad::Var hair = soft_hair(image);
  std::vector<FeatureVar> out;
  for (int i = 0; i < 5; ++i) {
    const int f = 1 << i;
    const int h = image.height / f, w = image.width / f;
    ad::Var rgb = f == 1 ? image.v : ad::linear(avg_pool_map(image.height, image.width, 3, f), image.v);
    ad::Var hr = f == 1 ? hair : ad::linear(avg_pool_map(image.height, image.width, 1, f), hair);
    ad::Var mixed = ad::add(ad::pixel_mix(rgb, rgb_mix_[i], bias_[i]), ad::pixel_mix(hr, hair_mix_[i], {}));
    out.push_back({ad::tanh(mixed), h, w, 4});
  }
  return out;
}

// --- perceptual features -----------------------------------------------------

ToyPerceptualFeatures::ToyPerceptualFeatures(std::uint64_t seed) {
  Rng rng(seed);
  const std::array<int, 5> widths{3, 4, 6, 8, 8};
  for (int i = 0; i < 4; ++i) {
    mix_[i] = random_matrix(rng, widths[i + 1], widths[i], 1.5 / std::sqrt(widths[i]));
    bias_[i].resize(widths[i + 1]);
    for (double& v : bias_[i]) v = 0.1 * rng.normal();
  }
}

std::vector<FeatureVar> ToyPerceptualFeatures::features(const ImageVar& image) const {
  std::vector<FeatureVar> out;
  ad::Var x = image.v;
  int h = image.height, w = image.width, c = 3;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) {
      x = ad::linear(avg_pool_map(h, w, c, 2), x);
      h /= 2;
      w /= 2;
    }
    x = ad::tanh(ad::pixel_mix(x, mix_[i], bias_[i]));
    c = mix_[i].rows;
    out.push_back({x, h, w, c});
  }
  return out;
}

// --- patch distance ----------------------------------------------------------

ad::Var ToyPatchDistance::distance(const ImageVar& a, const ImageVar& b) const {
  require(a.height == b.height && a.width == b.width, ErrorKind::kShapeMismatch,
          "patch distance needs equally sized images");
  const auto pool = avg_pool_map(a.height, a.width, 3, kBlock);
  return ad::mean(ad::square(ad::sub(ad::linear(pool, a.v), ad::linear(pool, b.v))));
}

// --- identity ----------------------------------------------------------------

ToyIdentity::ToyIdentity(std::uint64_t seed) {
  Rng rng(seed);
  proj_ = random_matrix(rng, 32, 8 * 8 * 3, 1.0 / std::sqrt(192.0));
}

ad::Var ToyIdentity::embed(const ImageVar& image) const {
  require(image.height == image.width && image.height % 8 == 0, ErrorKind::kShapeMismatch,
          "identity backend expects a square image with side divisible by 8");
  ad::Var pooled = ad::linear(avg_pool_map(image.height, image.width, 3, image.height / 8), image.v);
  return ad::normalize(ad::matvec(proj_, pooled));
}

Backends make_toy_backends(const Image& neutral) {
  Backends b;
  b.similarity = std::make_shared<ToyTextSimilarity>(neutral);
  b.keypoints = std::make_shared<ToyKeypoints>();
  b.parsing = std::make_shared<ToyFaceParser>();
  b.perceptual = std::make_shared<ToyPerceptualFeatures>();
  b.patch = std::make_shared<ToyPatchDistance>();
  b.identity = std::make_shared<ToyIdentity>();
  return b;
}

}  // namespace hairedit
