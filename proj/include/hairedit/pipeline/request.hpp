#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hairedit/core/types.hpp"
#include "hairedit/proxies/sketch.hpp"

namespace hairedit {

// Pointer to an image, mask or sketch that travels beside the request:
// a file path (CLI recipes, relative to the recipe), the name of an upload
// part, or the id of a service session whose source image is meant.
struct AssetRef {
  enum class Source { kPath, kUpload, kSession };
  Source source = Source::kPath;
  std::string name;

  bool operator==(const AssetRef&) const = default;
};

enum class HairstyleKind { kNone, kText, kReference };
enum class ColorKind { kNone, kText, kReference, kRgb };

// Edit recipe / request document:
//   {"hairstyle": {"text": "..."} | {"reference": REF},
//    "sketch": SKETCH_DOCUMENT | REF, "shape_mask": REF, "standalone_sketch": bool,
//    "color": {"text": "..."} | {"reference": REF} | {"rgb": [r, g, b]}, "color_mask": REF,
//    "seed": n}
// where REF is {"path": "..."}, {"upload": "..."} or {"session": "..."}. Every field is optional,
// but the request must ask for something (see validate()).
struct EditRequest {
  HairstyleKind hairstyle = HairstyleKind::kNone;
  std::string hairstyle_text;
  std::optional<AssetRef> hairstyle_reference;

  std::optional<SketchInput> sketch;   // inline document
  std::optional<AssetRef> sketch_ref;  // or a pointer to one
  std::optional<AssetRef> shape_mask;
  bool standalone_sketch = false;

  ColorKind color = ColorKind::kNone;
  std::string color_text;
  std::optional<AssetRef> color_reference;
  std::array<double, 3> rgb{0.0, 0.0, 0.0};
  std::optional<AssetRef> color_mask;  // image resolution

  std::uint64_t seed = 0;

  bool has_sketch() const { return sketch.has_value() || sketch_ref.has_value(); }
  // Throws kValidation when the request is empty or inconsistent.
  void validate() const;

  nlohmann::json to_json() const;
  static EditRequest from_json(const nlohmann::json& j);

  bool operator==(const EditRequest&) const = default;
};

// Recipe file: an EditRequest plus optional engine config overrides under
// "overrides" (same schema as the engine config).
struct Recipe {
  EditRequest request;
  nlohmann::json overrides = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Recipe from_json(const nlohmann::json& j);
  static Recipe load(const std::filesystem::path& path);
};

// Request with every asset decoded.
struct ResolvedRequest {
  EditRequest request;
  std::optional<Image> hairstyle_reference;
  std::optional<SketchInput> sketch;
  std::optional<BinaryMask> shape_mask;
  std::optional<Image> color_reference;
  std::optional<BinaryMask> color_mask;
};

// Returns the raw bytes behind a reference.
using AssetLoader = std::function<std::vector<std::uint8_t>(const AssetRef& ref)>;
// Loads paths relative to `base`; upload references are rejected.
AssetLoader file_asset_loader(const std::filesystem::path& base);

ResolvedRequest resolve_request(const EditRequest& req, const AssetLoader& load);

}  // namespace hairedit
