#include "hairedit/core/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hairedit/error.hpp"

namespace hairedit::io {

namespace {

// ---- byte helpers ----------------------------------------------------------

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& data, std::size_t pos = 0) : data_(data), pos_(pos) {}

  void need(std::size_t n) const {
    require(pos_ + n <= data_.size(), ErrorKind::kDecode, "truncated container");
  }
  void magic(const char* tag) {
    need(4);
    require(std::memcmp(data_.data() + pos_, tag, 4) == 0, ErrorKind::kDecode,
            std::string("bad magic, expected ") + tag);
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& data_;
  std::size_t pos_;
};

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// ---- libpng glue -----------------------------------------------------------

struct PngRaw {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes->size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->bytes->data() + cur->pos, n);
  cur->pos += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

PngRaw decode_png(const std::vector<std::uint8_t>& bytes, bool want_gray) {
  require(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0, ErrorKind::kDecode,
          "not a PNG image");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  require(png != nullptr, ErrorKind::kDecode, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngRaw raw;
  std::vector<png_bytep> rows;
  ReadCursor cursor{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kDecode, "PNG decode failed: " + err);
  }
  png_set_read_fn(png, &cursor, png_read_fn);
  png_read_info(png, info);
  const auto color_type = png_get_color_type(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_gray && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (!want_gray && is_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) {
    rows[y] = raw.pixels.data() + static_cast<std::size_t>(y) * raw.width * raw.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

std::vector<std::uint8_t> encode_png(const PngRaw& raw) {
  std::string err;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  require(png != nullptr, ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(raw.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, raw.width, raw.height, 8,
               raw.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < raw.height; ++y) {
    rows[y] = const_cast<png_bytep>(raw.pixels.data() + static_cast<std::size_t>(y) * raw.width * raw.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::kIo, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Image decode_image_png(const std::vector<std::uint8_t>& bytes) {
  const PngRaw raw = decode_png(bytes, false);
  std::vector<double> data(raw.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw.pixels[i] / 255.0;
  return Image(raw.height, raw.width, std::move(data));
}

Image read_image_png(const std::filesystem::path& path) { return decode_image_png(read_file(path)); }

std::vector<std::uint8_t> encode_image_png(const Image& image) {
  PngRaw raw{image.width(), image.height(), 3, {}};
  raw.pixels.reserve(image.data().size());
  for (double v : image.data()) raw.pixels.push_back(to_byte(v));
  return encode_png(raw);
}

void write_image_png(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_image_png(image));
}

Image quantize_8bit(const Image& image) {
  std::vector<double> data(image.data().size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = to_byte(image.data()[i]) / 255.0;
  return Image(image.height(), image.width(), std::move(data));
}

BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
  const PngRaw raw = decode_png(bytes, true);
  std::vector<double> data(raw.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw.pixels[i] != 0 ? 1.0 : 0.0;
  return BinaryMask(raw.height, raw.width, std::move(data));
}

BinaryMask read_mask_png(const std::filesystem::path& path) { return decode_mask_png(read_file(path)); }

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  PngRaw raw{mask.width(), mask.height(), 1, {}};
  raw.pixels.reserve(mask.data().size());
  for (double v : mask.data()) raw.pixels.push_back(v != 0.0 ? 255 : 0);
  return encode_png(raw);
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file(path, encode_mask_png(mask));
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& f) {
  Writer w;
  w.bytes("HEFM", 4);
  w.u32(1);
  w.str(stage_name(f.stage()));
  w.u32(static_cast<std::uint32_t>(f.height()));
  w.u32(static_cast<std::uint32_t>(f.width()));
  w.u32(static_cast<std::uint32_t>(f.channels()));
  for (double v : f.data()) w.f32(static_cast<float>(v));
  return w.take();
}

FeatureMap decode_feature_map(const std::vector<std::uint8_t>& bytes, std::size_t* consumed) {
  Reader r(bytes, consumed ? *consumed : 0);
  r.magic("HEFM");
  require(r.u32() == 1, ErrorKind::kDecode, "unsupported feature container version");
  const Stage stage = parse_stage(r.str());
  Shape3 shape;
  shape.height = static_cast<int>(r.u32());
  shape.width = static_cast<int>(r.u32());
  shape.channels = static_cast<int>(r.u32());
  require(shape.height > 0 && shape.width > 0 && shape.channels > 0, ErrorKind::kDecode,
          "feature container has empty shape");
  r.need(shape.size() * 4);
  std::vector<double> data(shape.size());
  for (double& v : data) v = r.f32();
  if (consumed) *consumed = r.pos();
  return FeatureMap(stage, shape, std::move(data));
}

std::vector<std::uint8_t> encode_latent_file(const LatentFile& file) {
  Writer w;
  w.bytes("HEWL", 4);
  w.u32(1);
  w.u32(kNumLayers);
  w.u32(kLatentDim);
  for (double v : file.w.flat()) w.f32(static_cast<float>(v));
  w.u32(file.fs_feature ? 1 : 0);
  auto out = w.take();
  if (file.fs_feature) {
    auto block = encode_feature_map(*file.fs_feature);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

LatentFile decode_latent_file(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic("HEWL");
  require(r.u32() == 1, ErrorKind::kDecode, "unsupported latent file version");
  require(r.u32() == kNumLayers && r.u32() == kLatentDim, ErrorKind::kDecode,
          "latent file must hold 18x512 codes");
  std::vector<double> flat(kNumLayers * kLatentDim);
  for (double& v : flat) v = r.f32();
  LatentFile file{LatentWPlus(std::move(flat)), std::nullopt};
  const auto has_fs = r.u32();
  if (has_fs == 1) {
    std::size_t pos = r.pos();
    file.fs_feature = decode_feature_map(bytes, &pos);
  } else {
    require(has_fs == 0, ErrorKind::kDecode, "bad FS flag in latent file");
  }
  return file;
}

void write_latent_file(const std::filesystem::path& path, const LatentFile& file) {
  write_file(path, encode_latent_file(file));
}

LatentFile read_latent_file(const std::filesystem::path& path) {
  return decode_latent_file(read_file(path));
}

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive) {
  Writer w;
  w.bytes("HEWT", 4);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(archive.size()));
  for (const auto& [name, tensor] : archive) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor.dims.size()));
    for (auto d : tensor.dims) w.u32(d);
    for (double v : tensor.values) w.f64(v);
  }
  return w.take();
}

TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic("HEWT");
  require(r.u32() == 1, ErrorKind::kDecode, "unsupported weight archive version");
  const auto count = r.u32();
  TensorArchive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    Tensor t;
    const auto rank = r.u32();
    require(rank <= 8, ErrorKind::kDecode, "tensor rank too large in " + name);
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    r.need(n * 8);
    t.values.resize(n);
    for (double& v : t.values) v = r.f64();
    archive.emplace(std::move(name), std::move(t));
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  write_file(path, encode_archive(archive));
}

TensorArchive read_archive(const std::filesystem::path& path) { return decode_archive(read_file(path)); }

}  // namespace hairedit::io
