#include "hairedit/generator/toy_generator.hpp"

#include <cmath>
#include <numbers>

#include "hairedit/core/rng.hpp"
#include "hairedit/error.hpp"

namespace hairedit {

namespace {

using ad::Matrix;
using ad::Var;

constexpr int kTextureChannels = ToyGenerator::kStyleChannels - 2;  // 14
constexpr int kTextureCodes = 22;
constexpr int kStyleCells = ToyGenerator::kStyleSize * ToyGenerator::kStyleSize;
constexpr int kColorCells = ToyGenerator::kColorSize * ToyGenerator::kColorSize;

// Colour logits of the procedural palette (pre-sigmoid, see output head).
constexpr std::array<double, 3> kSkinLogit{1.95, 0.62, 0.10};
constexpr std::array<double, 3> kBackgroundLogit{-0.79, -0.41, 0.51};
constexpr std::array<double, 3> kHairLogit{-0.51, -1.24, -1.95};
// Hair colour weight sigma(gain * (u - shift)) on the upsampled hair channel.
// Shifted inside the hair so that cells the parser calls non-hair carry
// almost none of the hair colour; the gain keeps the band of parser-hair
// cells with a weak colour weight narrow.
constexpr double kHairWeightGain = 1000;
constexpr double kHairWeightShift = 0.03;
// Slope of the strand-amplitude gate on the color-stage hair logit.
constexpr double kStrandGain = 40.0;

// Indices of s_1..s_7 (flattened 7x4) that carry texture rather than geometry.
constexpr std::array<int, kTextureCodes> kTextureCodeIndex{2,  3,  5,  6,  7,  10, 11, 13, 14, 15, 16,
                                                           17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27};

Matrix random_matrix(Rng& rng, int rows, int cols, double scale) {
  Matrix m{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols)};
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

std::shared_ptr<const std::vector<int>> make_index(std::vector<int> idx) {
  return std::make_shared<const std::vector<int>>(std::move(idx));
}

// Bilinear (half-pixel centres, clamped edges) upsampling of an HWC tensor.
std::shared_ptr<const ad::SparseMap> bilinear_upsample(int in_size, int out_size, int channels) {
  ad::SparseMap::Builder b(out_size * out_size * channels, in_size * in_size * channels);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int y = 0; y < out_size; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, in_size - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, in_size - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_size; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, in_size - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, in_size - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        auto at = [&](int yy, int xx) { return (yy * in_size + xx) * channels + c; };
        b.add(at(y0, x0), (1 - fy) * (1 - fx));
        b.add(at(y0, x1), (1 - fy) * fx);
        b.add(at(y1, x0), fy * (1 - fx));
        b.add(at(y1, x1), fy * fx);
        b.next_row();
      }
    }
  }
  return b.finish();
}

// Solves the 4x4 system (A A^T) x = e_k by Gaussian elimination.
std::array<double, 4> solve_gram(const Matrix& a, int k) {
  std::array<std::array<double, 5>, 4> m{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int c = 0; c < a.cols; ++c) acc += a.at(i, c) * a.at(j, c);
      m[i][j] = acc;
    }
    m[i][4] = i == k ? 1.0 : 0.0;
  }
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 4> x{};
  for (int i = 0; i < 4; ++i) x[i] = m[i][4] / m[i][i];
  return x;
}

}  // namespace

ToyGenerator::Weights ToyGenerator::random_weights(std::uint64_t seed) {
  Rng rng(seed);
  Weights w;
  for (auto& a : w.style_proj) a = random_matrix(rng, kCodeDim, kLatentDim, 1.0 / std::sqrt(kLatentDim));
  w.mean_latent.resize(kLatentDim);
  for (double& v : w.mean_latent) v = 0.3 * rng.normal();

  // Smooth texture fields: each code drives a low-frequency plane wave per
  // texture channel.
  w.texture_basis = Matrix{kStyleCells * kTextureChannels, kTextureCodes,
                           std::vector<double>(static_cast<std::size_t>(kStyleCells) * kTextureChannels * kTextureCodes)};
  w.texture_bias.resize(static_cast<std::size_t>(kStyleCells) * kTextureChannels);
  for (int c = 0; c < kTextureChannels; ++c) {
    const double bfx = rng.uniform(0.5, 3.0), bfy = rng.uniform(0.5, 3.0), bph = rng.uniform(0, 2 * std::numbers::pi);
    std::array<double, kTextureCodes> fx{}, fy{}, ph{}, amp{};
    for (int k = 0; k < kTextureCodes; ++k) {
      fx[k] = rng.uniform(0.0, 4.0);
      fy[k] = rng.uniform(0.0, 4.0);
      ph[k] = rng.uniform(0.0, 2 * std::numbers::pi);
      amp[k] = 0.25 * rng.normal();
    }
    for (int cell = 0; cell < kStyleCells; ++cell) {
      const double y = (cell / kStyleSize + 0.5) / kStyleSize;
      const double x = (cell % kStyleSize + 0.5) / kStyleSize;
      const int row = cell * kTextureChannels + c;
      w.texture_bias[row] = 0.3 * std::sin(bfx * x * 2 + bfy * y * 2 + bph);
      for (int k = 0; k < kTextureCodes; ++k) {
        w.texture_basis.at(row, k) = amp[k] * std::cos(fx[k] * x + fy[k] * y + ph[k]);
      }
    }
  }

  w.hair_color = random_matrix(rng, 3, 16, 0.45);
  w.color_leak = random_matrix(rng, 3, 16, 0.5);
  w.lighting = random_matrix(rng, 3, 12, 0.5);
  w.hair_texture = random_matrix(rng, 3, kTextureChannels, 0.5);
  w.base_color = random_matrix(rng, 3, kTextureChannels + 1, 0.07);
  for (int r = 0; r < 3; ++r) w.base_color.at(r, 0) = kSkinLogit[r] - kBackgroundLogit[r];
  w.detail = random_matrix(rng, 1, kTextureChannels, 0.5);
  w.output_gain = random_matrix(rng, 3, 16, 0.5);
  w.output_bias = random_matrix(rng, 3, 16, 0.5);
  w.to_rgb = Matrix{3, kColorChannels, std::vector<double>(3 * kColorChannels, 0.0)};
  for (int r = 0; r < 3; ++r) {
    w.to_rgb.at(r, 1 + r) = 1.0;
    w.to_rgb.at(r, 4 + r) = 1.0;
    w.to_rgb.at(r, 7) = 0.2 * rng.normal();
  }
  return w;
}

ToyGenerator::ToyGenerator(std::uint64_t seed) : ToyGenerator(random_weights(seed)) {}

ToyGenerator::ToyGenerator(Weights weights) : w_(std::move(weights)), mean_(w_.mean_latent) {
  build_static_maps();
}

void ToyGenerator::build_static_maps() {
  upsample_ = bilinear_upsample(kStyleSize, kColorSize, kStyleChannels);

  std::vector<int> style_idx(static_cast<std::size_t>(kStyleCells) * kStyleChannels);
  for (int p = 0; p < kStyleCells; ++p) {
    style_idx[p * kStyleChannels + 0] = p;
    style_idx[p * kStyleChannels + 1] = kStyleCells + p;
    for (int c = 2; c < kStyleChannels; ++c) {
      style_idx[p * kStyleChannels + c] = 2 * kStyleCells + p * kTextureChannels + (c - 2);
    }
  }
  style_interleave_ = make_index(std::move(style_idx));

  std::vector<int> color_idx(static_cast<std::size_t>(kColorCells) * kColorChannels);
  for (int p = 0; p < kColorCells; ++p) {
    color_idx[p * kColorChannels + 0] = p;
    for (int c = 0; c < 3; ++c) {
      color_idx[p * kColorChannels + 1 + c] = kColorCells + p * 3 + c;
      color_idx[p * kColorChannels + 4 + c] = 4 * kColorCells + p * 3 + c;
    }
    color_idx[p * kColorChannels + 7] = 7 * kColorCells + p;
  }
  color_interleave_ = make_index(std::move(color_idx));

  std::vector<int> hair(kColorCells), face(kColorCells), tex(static_cast<std::size_t>(kColorCells) * kTextureChannels);
  for (int p = 0; p < kColorCells; ++p) {
    hair[p] = p * kStyleChannels;
    face[p] = p * kStyleChannels + 1;
    for (int c = 0; c < kTextureChannels; ++c) tex[p * kTextureChannels + c] = p * kStyleChannels + 2 + c;
  }
  up_hair_ = make_index(std::move(hair));
  up_face_ = make_index(std::move(face));
  up_texture_ = make_index(std::move(tex));

  std::vector<int> pix(static_cast<std::size_t>(kImageSize) * kImageSize * 3);
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const int cell = (y / 2) * kColorSize + x / 2;
      for (int c = 0; c < 3; ++c) pix[(y * kImageSize + x) * 3 + c] = cell * 3 + c;
    }
  }
  cell_to_pixel_ = make_index(std::move(pix));

  std::vector<int> cell_of_pixel(static_cast<std::size_t>(kImageSize) * kImageSize * 3);
  strand_sign_.resize(cell_of_pixel.size());
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = (static_cast<std::size_t>(y) * kImageSize + x) * 3 + c;
        cell_of_pixel[i] = (y / 2) * kColorSize + x / 2;
        strand_sign_[i] = x % 2 == 0 ? 0.5 : -0.5;
      }
    }
  }
  cell_of_pixel_ = make_index(std::move(cell_of_pixel));
  std::vector<int> logit_idx(kColorCells);
  for (int p = 0; p < kColorCells; ++p) logit_idx[p] = p * kColorChannels + kHairChannel;
  hair_logit_index_ = make_index(std::move(logit_idx));

  grid_x_.resize(kStyleCells);
  grid_y_.resize(kStyleCells);
  for (int p = 0; p < kStyleCells; ++p) {
    grid_y_[p] = (p / kStyleSize + 0.5) / kStyleSize;
    grid_x_[p] = (p % kStyleSize + 0.5) / kStyleSize;
  }
}

Shape3 ToyGenerator::stage_shape(Stage stage) const {
  switch (stage) {
    case Stage::kStyle: return {kStyleSize, kStyleSize, kStyleChannels};
    case Stage::kColor: return {kColorSize, kColorSize, kColorChannels};
    case Stage::kOutput: return {kImageSize, kImageSize, 3};
  }
  fail(ErrorKind::kUnknownStage, "unhandled stage");
}

LatentW ToyGenerator::sample_random_latent(std::uint64_t seed) const {
  Rng rng(seed * 0x9E3779B97F4A7C15ull + 0x5EEDull);
  std::vector<double> v(kLatentDim);
  for (int i = 0; i < kLatentDim; ++i) v[i] = mean_[i] + rng.normal();
  return LatentW(std::move(v));
}

std::array<double, ToyGenerator::kCodeDim> ToyGenerator::style_code(const LatentWPlus& w, int layer) const {
  std::array<double, kCodeDim> s{};
  auto wl = w.layer(layer);
  const Matrix& a = w_.style_proj[layer - 1];
  for (int k = 0; k < kCodeDim; ++k) {
    double acc = 0.0;
    for (int c = 0; c < kLatentDim; ++c) acc += a.at(k, c) * wl[c];
    s[k] = acc;
  }
  return s;
}

LatentWPlus ToyGenerator::code_offset(int layer, int component, double amount) const {
  require(layer >= 1 && layer <= kNumLayers && component >= 0 && component < kCodeDim,
          ErrorKind::kInvalidArgument, "code_offset index out of range");
  const Matrix& a = w_.style_proj[layer - 1];
  const auto x = solve_gram(a, component);
  LatentWPlus out;
  auto l = out.layer(layer);
  for (int c = 0; c < kLatentDim; ++c) {
    double acc = 0.0;
    for (int k = 0; k < kCodeDim; ++k) acc += a.at(k, c) * x[k];
    l[c] = amount * acc;
  }
  return out;
}

LatentWPlus ToyGenerator::hair_removal_direction() const {
  LatentWPlus out;
  for (int layer : {3, 4}) {
    const Matrix& a = w_.style_proj[layer - 1];
    double norm2 = 0.0;
    for (int c = 0; c < kLatentDim; ++c) norm2 += a.at(0, c) * a.at(0, c);
    auto l = out.layer(layer);
    for (int c = 0; c < kLatentDim; ++c) l[c] = -5.0 * a.at(0, c) / norm2;
  }
  return out;
}

Var ToyGenerator::style_codes(Var w, LayerRange layers) const {
  require(w.size() == static_cast<std::size_t>(kNumLayers) * kLatentDim, ErrorKind::kShapeMismatch,
          "generator expects a full W+ node");
  std::vector<Var> codes;
  for (int l = layers.first; l <= layers.last; ++l) {
    Var wl = ad::slice(w, static_cast<std::size_t>(l - 1) * kLatentDim, kLatentDim);
    codes.push_back(ad::matvec(w_.style_proj[l - 1], wl));
  }
  return ad::concat(codes);
}

Var ToyGenerator::style_features(ad::Tape& tape, Var w) const {
  Var z = style_codes(w, kStyleLayers);
  auto code = [&](int i) { return ad::slice(z, i, 1); };

  Var cx = ad::add(ad::mul(ad::tanh(code(0)), 0.08), 0.5);
  Var cy = ad::add(ad::mul(ad::tanh(code(1)), 0.06), 0.6);
  Var r = ad::add(ad::mul(ad::tanh(code(4)), 0.04), 0.24);
  Var hb = ad::mul(ad::sigmoid(ad::mul(ad::add(code(8), code(12)), 1.5)), 0.5);
  Var tilt = ad::mul(ad::tanh(code(9)), 0.2);

  Var gx = tape.constant(grid_x_);
  Var gy = tape.constant(grid_y_);
  Var dx = ad::div(ad::sub(gx, cx), r);
  Var dy = ad::div(ad::sub(gy, cy), ad::mul(r, 1.25));
  Var face_logit = ad::mul(ad::add(ad::neg(ad::add(ad::square(dx), ad::square(dy))), 1.0), 8.0);
  // Tilt scales with the band height, so a zero-height band is empty at
  // every column; at the typical height 0.25 the slope is tilt itself.
  Var boundary = ad::mul(hb, ad::add(ad::mul(ad::mul(tilt, ad::add(gx, -0.5)), 4.0), 1.0));
  Var hair_logit = ad::sub(ad::mul(ad::sub(boundary, gy), 12.0), ad::mul(ad::sigmoid(face_logit), 8.0));

  Var ch_hair = ad::tanh(ad::mul(hair_logit, 0.5));
  Var ch_face = ad::tanh(ad::mul(face_logit, 0.5));

  std::vector<int> tidx(kTextureCodeIndex.begin(), kTextureCodeIndex.end());
  Var t = ad::gather(z, make_index(std::move(tidx)));
  Var tex = ad::tanh(ad::add_const(ad::matvec(w_.texture_basis, t), w_.texture_bias));

  return ad::gather(ad::concat({ch_hair, ch_face, tex}), style_interleave_);
}

Var ToyGenerator::color_features(Var f7, Var w) const {
  require(f7.size() == static_cast<std::size_t>(kStyleCells) * kStyleChannels, ErrorKind::kShapeMismatch,
          "style features must be 8x8x16");
  Var codes = style_codes(w, kColorStageLayers);  // s_8..s_14
  auto code = [&](int layer, int k) { return ad::slice(codes, (layer - 8) * kCodeDim + k, 1); };
  Var s_color = ad::slice(codes, 2 * kCodeDim, 4 * kCodeDim);  // s_10..s_13
  Var s_light = ad::concat({ad::slice(codes, 0, 2 * kCodeDim), ad::slice(codes, 6 * kCodeDim, kCodeDim)});

  Var up = ad::linear(upsample_, f7);
  Var u_hair = ad::gather(up, up_hair_);
  Var u_face = ad::gather(up, up_face_);
  Var u_tex = ad::gather(up, up_texture_);

  Var hair_channel = ad::mul(ad::add(u_hair, -kHairWeightShift), ad::add(ad::mul(ad::sigmoid(code(8, 0)), 0.5), 1.0));
  Var hair_soft = ad::sigmoid(ad::mul(ad::add(u_hair, -kHairWeightShift), kHairWeightGain));

  Var hair_color = ad::add_const(ad::matvec(w_.hair_color, s_color),
                                 std::vector<double>(kHairLogit.begin(), kHairLogit.end()));
  Var hair_tex = ad::mul(ad::pixel_mix(u_tex, w_.hair_texture, {}), 0.3);
  Var hair_part = ad::scale_pixels(ad::shift_channels(hair_tex, hair_color), hair_soft);

  std::vector<int> bidx(static_cast<std::size_t>(kColorCells) * (kTextureChannels + 1));
  for (int p = 0; p < kColorCells; ++p) {
    bidx[p * (kTextureChannels + 1)] = p;
    for (int c = 0; c < kTextureChannels; ++c) {
      bidx[p * (kTextureChannels + 1) + 1 + c] = kColorCells + p * kTextureChannels + c;
    }
  }
  Var face_w = ad::sigmoid(ad::mul(u_face, 4.0));
  Var base_in = ad::gather(ad::concat({face_w, u_tex}), make_index(std::move(bidx)));
  Var base = ad::pixel_mix(base_in, w_.base_color,
                           std::vector<double>(kBackgroundLogit.begin(), kBackgroundLogit.end()));
  Var light = ad::add(ad::mul(ad::tanh(ad::matvec(w_.lighting, s_light)), 0.15), 1.0);
  Var leak = ad::mul(ad::matvec(w_.color_leak, s_color), 0.12);
  Var nonhair_w = ad::add(ad::neg(hair_soft), 1.0);
  Var nonhair_part = ad::scale_pixels(ad::shift_channels(ad::scale_channels(base, light), leak), nonhair_w);

  Var detail = ad::mul(ad::tanh(ad::pixel_mix(u_tex, w_.detail, {})),
                       ad::add(ad::mul(ad::tanh(code(9, 1)), 0.1), 1.0));
  return ad::gather(ad::concat({hair_channel, hair_part, nonhair_part, detail}), color_interleave_);
}

Var ToyGenerator::output_image(Var f14, Var w) const {
  require(f14.size() == static_cast<std::size_t>(kColorCells) * kColorChannels, ErrorKind::kShapeMismatch,
          "color features must be 32x32x8");
  Var t = style_codes(w, kOutputLayers);
  Var gain = ad::add(ad::mul(ad::tanh(ad::matvec(w_.output_gain, t)), 0.1), 1.0);
  Var bias = ad::mul(ad::tanh(ad::matvec(w_.output_bias, t)), 0.15);
  Var logit = ad::shift_channels(ad::scale_channels(ad::pixel_mix(f14, w_.to_rgb, {}), gain), bias);
  Var color = ad::add(ad::mul(ad::sigmoid(logit), 0.8), 0.1);

  // Strand amplitude follows the hair logit, so the texture is on wherever
  // channel 0 is positive (amplitude above half of kStrandAmplitude).
  Var amp = ad::mul(ad::sigmoid(ad::mul(ad::gather(f14, hair_logit_index_), kStrandGain)), 2.0 * kStrandAmplitude);
  Var strands = ad::mul_const(ad::gather(amp, cell_of_pixel_), strand_sign_);
  return ad::add(ad::gather(color, cell_to_pixel_), strands);
}

Var ToyGenerator::forward_to_stage(ad::Tape& tape, Var w, Stage stage) const {
  Var f7 = style_features(tape, w);
  if (stage == Stage::kStyle) return f7;
  return forward_from_stage(f7, w, Stage::kStyle, stage);
}

Var ToyGenerator::forward_from_stage(Var features, Var w, Stage from, Stage to) const {
  require(stage_order(to) > stage_order(from), ErrorKind::kInvalidArgument,
          std::string("cannot resume from ") + stage_name(from) + " to " + stage_name(to));
  Var x = features;
  if (from == Stage::kStyle) {
    x = color_features(x, w);
    if (to == Stage::kColor) return x;
  }
  return output_image(x, w);
}

io::TensorArchive ToyGenerator::to_archive() const {
  io::TensorArchive ar;
  auto put = [&](const std::string& name, const Matrix& m) {
    ar[name] = io::Tensor{{static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)}, m.data};
  };
  for (int l = 0; l < kNumLayers; ++l) put("style_proj." + std::to_string(l + 1), w_.style_proj[l]);
  ar["mean_latent"] = io::Tensor{{kLatentDim}, w_.mean_latent};
  put("texture_basis", w_.texture_basis);
  ar["texture_bias"] = io::Tensor{{static_cast<std::uint32_t>(w_.texture_bias.size())}, w_.texture_bias};
  put("hair_color", w_.hair_color);
  put("color_leak", w_.color_leak);
  put("lighting", w_.lighting);
  put("hair_texture", w_.hair_texture);
  put("base_color", w_.base_color);
  put("detail", w_.detail);
  put("output_gain", w_.output_gain);
  put("output_bias", w_.output_bias);
  put("to_rgb", w_.to_rgb);
  ar["taps.style"] = io::Tensor{{3}, {kStyleSize, kStyleSize, kStyleChannels}};
  ar["taps.color"] = io::Tensor{{3}, {kColorSize, kColorSize, kColorChannels}};
  return ar;
}

std::unique_ptr<ToyGenerator> ToyGenerator::from_archive(const io::TensorArchive& ar) {
  auto get = [&](const std::string& name) -> const io::Tensor& {
    auto it = ar.find(name);
    require(it != ar.end(), ErrorKind::kConfig, "weight archive lacks tensor '" + name + "'");
    return it->second;
  };
  auto matrix = [&](const std::string& name, int rows, int cols) {
    const io::Tensor& t = get(name);
    require(t.dims.size() == 2 && t.dims[0] == static_cast<std::uint32_t>(rows) &&
                t.dims[1] == static_cast<std::uint32_t>(cols),
            ErrorKind::kConfig, "tensor '" + name + "' has the wrong shape");
    return Matrix{rows, cols, t.values};
  };
  auto vec = [&](const std::string& name, std::size_t n) {
    const io::Tensor& t = get(name);
    require(t.values.size() == n, ErrorKind::kConfig, "tensor '" + name + "' has the wrong size");
    return t.values;
  };
  const auto style_tap = vec("taps.style", 3);
  const auto color_tap = vec("taps.color", 3);
  require(style_tap == std::vector<double>{kStyleSize, kStyleSize, kStyleChannels} &&
              color_tap == std::vector<double>{kColorSize, kColorSize, kColorChannels},
          ErrorKind::kConfig, "weight archive declares incompatible stage taps");

  Weights w;
  for (int l = 0; l < kNumLayers; ++l) {
    w.style_proj[l] = matrix("style_proj." + std::to_string(l + 1), kCodeDim, kLatentDim);
  }
  w.mean_latent = vec("mean_latent", kLatentDim);
  w.texture_basis = matrix("texture_basis", kStyleCells * kTextureChannels, kTextureCodes);
  w.texture_bias = vec("texture_bias", static_cast<std::size_t>(kStyleCells) * kTextureChannels);
  w.hair_color = matrix("hair_color", 3, 16);
  w.color_leak = matrix("color_leak", 3, 16);
  w.lighting = matrix("lighting", 3, 12);
  w.hair_texture = matrix("hair_texture", 3, kTextureChannels);
  w.base_color = matrix("base_color", 3, kTextureChannels + 1);
  w.detail = matrix("detail", 1, kTextureChannels);
  w.output_gain = matrix("output_gain", 3, 16);
  w.output_bias = matrix("output_bias", 3, 16);
  w.to_rgb = matrix("to_rgb", 3, kColorChannels);
  return std::make_unique<ToyGenerator>(std::move(w));
}

}  // namespace hairedit
