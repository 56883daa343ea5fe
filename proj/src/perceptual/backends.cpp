#include "hairedit/perceptual/backends.hpp"

#include "hairedit/error.hpp"

namespace hairedit {

ImageVar image_constant(ad::Tape& tape, const Image& image) {
  return {tape.constant(image.data()), image.height(), image.width()};
}

ImageVar image_input(ad::Tape& tape, const Image& image) {
  return {tape.input(image.data()), image.height(), image.width()};
}

std::vector<double> TextImageSimilarityBackend::embed_image(const Image& image) const {
  ad::Tape tape;
  auto v = embed_image(image_constant(tape, image)).value();
  return {v.begin(), v.end()};
}

double TextImageSimilarityBackend::similarity(const std::string& text, const Image& image) const {
  const auto e = embed_image(image);
  const auto t = embed_text(text);
  require(e.size() == t.size(), ErrorKind::kShapeMismatch, "image and text embeddings differ in size");
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) acc += e[i] * t[i];
  return acc;
}

std::vector<std::array<double, 3>> KeypointBackend::extract(const Image& image) const {
  ad::Tape tape;
  auto v = extract(image_constant(tape, image)).value();
  std::vector<std::array<double, 3>> out(static_cast<std::size_t>(count()));
  for (int k = 0; k < count(); ++k) out[k] = {v[3 * k], v[3 * k + 1], v[3 * k + 2]};
  return out;
}

namespace {

BinaryMask label_mask(const LabelMap& map, FaceLabel label, bool invert) {
  BinaryMask m(map.height, map.width);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) m.set(y, x, (map.at(y, x) == label) != invert);
  }
  return m;
}

}  // namespace

BinaryMask FaceParsingBackend::hair_mask(const Image& image) const {
  return label_mask(parse(image), FaceLabel::kHair, false);
}

BinaryMask FaceParsingBackend::ear_mask(const Image& image) const {
  return label_mask(parse(image), FaceLabel::kEar, false);
}

BinaryMask FaceParsingBackend::nonhair_mask(const Image& image) const {
  return label_mask(parse(image), FaceLabel::kHair, true);
}

double PatchDistanceBackend::distance(const Image& a, const Image& b) const {
  ad::Tape tape;
  return distance(image_constant(tape, a), image_constant(tape, b)).scalar();
}

std::vector<double> IdentityBackend::embed(const Image& image) const {
  ad::Tape tape;
  auto v = embed(image_constant(tape, image)).value();
  return {v.begin(), v.end()};
}

std::vector<double> gram_matrix(const FeatureMap& f) {
  require(f.shape().size() > 0, ErrorKind::kInvalidArgument, "gram of an empty feature map");
  const int c = f.channels();
  const int p = f.height() * f.width();
  std::vector<double> g(static_cast<std::size_t>(c) * c, 0.0);
  const auto d = f.data();
  for (int k = 0; k < p; ++k) {
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) g[i * c + j] += d[k * c + i] * d[k * c + j];
    }
  }
  for (double& v : g) v /= p;
  return g;
}

}  // namespace hairedit
