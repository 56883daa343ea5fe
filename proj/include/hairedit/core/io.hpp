#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hairedit/core/types.hpp"

namespace hairedit::io {

// 8-bit RGB PNG. Grayscale or RGBA inputs are converted on read.
Image read_image_png(const std::filesystem::path& path);
Image decode_image_png(const std::vector<std::uint8_t>& bytes);
void write_image_png(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_image_png(const Image& image);

// Single-channel 8-bit PNG, 0 / 255. Any nonzero pixel reads as 1.
BinaryMask read_mask_png(const std::filesystem::path& path);
BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);

// Quantizes to 8 bits exactly as a PNG round trip would.
Image quantize_8bit(const Image& image);

// Feature container:
//   "HEFM" u32 version=1 u32 stage_name_len stage_name u32 h u32 w u32 c
//   then h*w*c little-endian float32 values.
std::vector<std::uint8_t> encode_feature_map(const FeatureMap& f);
FeatureMap decode_feature_map(const std::vector<std::uint8_t>& bytes, std::size_t* consumed = nullptr);

// Latent file:
//   "HEWL" u32 version=1 u32 layers=18 u32 dim=512 then 18*512 float32 LE,
//   u32 has_fs, and when has_fs=1 an embedded feature container (style stage).
struct LatentFile {
  LatentWPlus w;
  std::optional<FeatureMap> fs_feature;
};
std::vector<std::uint8_t> encode_latent_file(const LatentFile& file);
LatentFile decode_latent_file(const std::vector<std::uint8_t>& bytes);
void write_latent_file(const std::filesystem::path& path, const LatentFile& file);
LatentFile read_latent_file(const std::filesystem::path& path);

// Named float64 tensors for model weights:
//   "HEWT" u32 version=1 u32 count, then per tensor
//   u32 name_len name u32 rank u32 dims[rank] float64 LE values.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};
using TensorArchive = std::map<std::string, Tensor>;
std::vector<std::uint8_t> encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes);
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hairedit::io
