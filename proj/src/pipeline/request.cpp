#include "hairedit/pipeline/request.hpp"

#include <array>
#include <cmath>

#include "hairedit/core/io.hpp"
#include "hairedit/error.hpp"

namespace hairedit {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<AssetRef::Source, const char*>, 3> kRefKeys{
    {{AssetRef::Source::kPath, "path"}, {AssetRef::Source::kUpload, "upload"}, {AssetRef::Source::kSession, "session"}}};

json ref_to_json(const AssetRef& r) {
  for (const auto& [source, key] : kRefKeys) {
    if (source == r.source) return {{key, r.name}};
  }
  return {};
}

AssetRef ref_from_json(const json& j, const std::string& field) {
  const std::string shape = "'" + field + "' must be {\"path\": ...}, {\"upload\": ...} or {\"session\": ...}";
  require(j.is_object() && j.size() == 1, ErrorKind::kValidation, shape);
  for (const auto& [source, key] : kRefKeys) {
    if (!j.contains(key)) continue;
    const json& v = j.at(key);
    require(v.is_string() && !v.get<std::string>().empty(), ErrorKind::kValidation,
            "'" + field + "' reference must be a non-empty string");
    return {source, v.get<std::string>()};
  }
  fail(ErrorKind::kValidation, shape);
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    require(ok, ErrorKind::kValidation, "unknown field '" + key + "' in " + where);
  }
}

}  // namespace

void EditRequest::validate() const {
  const bool sketch_only = standalone_sketch && has_sketch();
  require(hairstyle != HairstyleKind::kNone || color != ColorKind::kNone || sketch_only, ErrorKind::kValidation,
          "request has neither a hairstyle nor a color condition");
  require(!(sketch && sketch_ref), ErrorKind::kValidation, "give the sketch inline or by reference, not both");
  require(!has_sketch() || hairstyle != HairstyleKind::kNone || standalone_sketch, ErrorKind::kValidation,
          "a sketch needs a hairstyle condition or standalone_sketch = true");
  require(!standalone_sketch || has_sketch(), ErrorKind::kValidation, "standalone_sketch is set but no sketch given");
  require(!shape_mask || hairstyle != HairstyleKind::kNone, ErrorKind::kValidation,
          "shape_mask needs a hairstyle condition");
  require(!color_mask || color != ColorKind::kNone, ErrorKind::kValidation, "color_mask needs a color condition");
  if (hairstyle == HairstyleKind::kText) {
    require(!hairstyle_text.empty(), ErrorKind::kValidation, "hairstyle text must not be empty");
  }
  if (hairstyle == HairstyleKind::kReference) {
    require(hairstyle_reference.has_value(), ErrorKind::kValidation, "hairstyle reference image missing");
  }
  if (color == ColorKind::kText) require(!color_text.empty(), ErrorKind::kValidation, "color text must not be empty");
  if (color == ColorKind::kReference) {
    require(color_reference.has_value(), ErrorKind::kValidation, "color reference image missing");
  }
  if (color == ColorKind::kRgb) {
    for (double v : rgb) {
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::kValidation, "rgb components must lie in [0, 1]");
    }
  }
  if (sketch) require(!sketch->strokes.empty(), ErrorKind::kValidation, "sketch has no strokes");
}

json EditRequest::to_json() const {
  json j = json::object();
  if (hairstyle == HairstyleKind::kText) j["hairstyle"] = {{"text", hairstyle_text}};
  if (hairstyle == HairstyleKind::kReference) j["hairstyle"] = {{"reference", ref_to_json(*hairstyle_reference)}};
  if (sketch) j["sketch"] = json::parse(sketch->to_json());
  if (sketch_ref) j["sketch"] = ref_to_json(*sketch_ref);
  if (shape_mask) j["shape_mask"] = ref_to_json(*shape_mask);
  if (standalone_sketch) j["standalone_sketch"] = true;
  if (color == ColorKind::kText) j["color"] = {{"text", color_text}};
  if (color == ColorKind::kReference) j["color"] = {{"reference", ref_to_json(*color_reference)}};
  if (color == ColorKind::kRgb) j["color"] = {{"rgb", {rgb[0], rgb[1], rgb[2]}}};
  if (color_mask) j["color_mask"] = ref_to_json(*color_mask);
  j["seed"] = seed;
  return j;
}

EditRequest EditRequest::from_json(const json& j) {
  require(j.is_object(), ErrorKind::kValidation, "edit request must be a JSON object");
  only_keys(j, {"hairstyle", "sketch", "shape_mask", "standalone_sketch", "color", "color_mask", "seed"},
            "edit request");
  EditRequest r;
  if (j.contains("hairstyle") && !j["hairstyle"].is_null()) {
    const json& h = j["hairstyle"];
    require(h.is_object() && h.size() == 1, ErrorKind::kValidation,
            "'hairstyle' must hold exactly one of 'text' or 'reference'");
    if (h.contains("text")) {
      require(h["text"].is_string(), ErrorKind::kValidation, "hairstyle text must be a string");
      r.hairstyle = HairstyleKind::kText;
      r.hairstyle_text = h["text"].get<std::string>();
    } else {
      require(h.contains("reference"), ErrorKind::kValidation,
              "'hairstyle' must hold exactly one of 'text' or 'reference'");
      r.hairstyle = HairstyleKind::kReference;
      r.hairstyle_reference = ref_from_json(h["reference"], "hairstyle.reference");
    }
  }
  if (j.contains("sketch") && !j["sketch"].is_null()) {
    const json& s = j["sketch"];
    if (s.is_object() && s.contains("format")) {
      r.sketch = SketchInput::from_json(s.dump());
    } else {
      r.sketch_ref = ref_from_json(s, "sketch");
    }
  }
  if (j.contains("shape_mask") && !j["shape_mask"].is_null()) r.shape_mask = ref_from_json(j["shape_mask"], "shape_mask");
  if (j.contains("standalone_sketch")) {
    require(j["standalone_sketch"].is_boolean(), ErrorKind::kValidation, "standalone_sketch must be a boolean");
    r.standalone_sketch = j["standalone_sketch"].get<bool>();
  }
  if (j.contains("color") && !j["color"].is_null()) {
    const json& c = j["color"];
    require(c.is_object() && c.size() == 1, ErrorKind::kValidation,
            "'color' must hold exactly one of 'text', 'reference' or 'rgb'");
    if (c.contains("text")) {
      require(c["text"].is_string(), ErrorKind::kValidation, "color text must be a string");
      r.color = ColorKind::kText;
      r.color_text = c["text"].get<std::string>();
    } else if (c.contains("reference")) {
      r.color = ColorKind::kReference;
      r.color_reference = ref_from_json(c["reference"], "color.reference");
    } else {
      require(c.contains("rgb"), ErrorKind::kValidation,
              "'color' must hold exactly one of 'text', 'reference' or 'rgb'");
      const json& v = c["rgb"];
      require(v.is_array() && v.size() == 3 && v[0].is_number() && v[1].is_number() && v[2].is_number(),
              ErrorKind::kValidation, "rgb must be three numbers");
      r.color = ColorKind::kRgb;
      for (int i = 0; i < 3; ++i) r.rgb[i] = v[i].get<double>();
    }
  }
  if (j.contains("color_mask") && !j["color_mask"].is_null()) r.color_mask = ref_from_json(j["color_mask"], "color_mask");
  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0),
            ErrorKind::kValidation, "seed must be a non-negative integer");
    r.seed = j["seed"].get<std::uint64_t>();
  }
  r.validate();
  return r;
}

json Recipe::to_json() const {
  json j = request.to_json();
  if (!overrides.empty()) j["overrides"] = overrides;
  return j;
}

Recipe Recipe::from_json(const json& j) {
  require(j.is_object(), ErrorKind::kValidation, "recipe must be a JSON object");
  Recipe r;
  json body = j;
  if (body.contains("overrides")) {
    r.overrides = body["overrides"];
    require(r.overrides.is_object(), ErrorKind::kValidation, "'overrides' must be an object");
    body.erase("overrides");
  }
  r.request = EditRequest::from_json(body);
  return r;
}

Recipe Recipe::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kValidation, "recipe " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

AssetLoader file_asset_loader(const std::filesystem::path& base) {
  return [base](const AssetRef& ref) {
    require(ref.source == AssetRef::Source::kPath, ErrorKind::kValidation,
            "reference '" + ref.name + "' is not a file path");
    const std::filesystem::path p = base / ref.name;  // an absolute name replaces base
    require(std::filesystem::exists(p), ErrorKind::kValidation, "referenced file not found: " + p.string());
    return io::read_file(p);
  };
}

ResolvedRequest resolve_request(const EditRequest& req, const AssetLoader& load) {
  req.validate();
  ResolvedRequest r;
  r.request = req;
  auto image = [&](const AssetRef& ref) {
    try {
      return io::decode_image_png(load(ref));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kValidation) throw;
      fail(ErrorKind::kValidation, "cannot decode image '" + ref.name + "': " + e.what());
    }
  };
  auto mask = [&](const AssetRef& ref) {
    try {
      return io::decode_mask_png(load(ref));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kValidation) throw;
      fail(ErrorKind::kValidation, "cannot decode mask '" + ref.name + "': " + e.what());
    }
  };
  if (req.hairstyle_reference) r.hairstyle_reference = image(*req.hairstyle_reference);
  if (req.color_reference) r.color_reference = image(*req.color_reference);
  if (req.shape_mask) r.shape_mask = mask(*req.shape_mask);
  if (req.color_mask) r.color_mask = mask(*req.color_mask);
  if (req.sketch) r.sketch = req.sketch;
  if (req.sketch_ref) {
    const auto bytes = load(*req.sketch_ref);
    r.sketch = SketchInput::from_json(std::string(bytes.begin(), bytes.end()));
    require(!r.sketch->strokes.empty(), ErrorKind::kValidation, "sketch has no strokes");
  }
  return r;
}

}  // namespace hairedit
