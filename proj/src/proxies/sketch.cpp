#include "hairedit/proxies/sketch.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hairedit/core/io.hpp"
#include "hairedit/core/rng.hpp"
#include "hairedit/error.hpp"

namespace hairedit {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "hairedit-sketch";

double segment_distance2(double px, double py, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - a[0]) * dx + (py - a[1]) * dy) / len2, 0.0, 1.0);
  const double ex = a[0] + t * dx - px, ey = a[1] + t * dy - py;
  return ex * ex + ey * ey;
}

}  // namespace

BinaryMask SketchInput::raster() const {
  require(width > 0 && height > 0, ErrorKind::kValidation, "sketch canvas size must be positive");
  BinaryMask m(height, width);
  for (const Stroke& s : strokes) {
    const double r = s.width / 2.0;
    const double r2 = r * r;
    // A single point is a zero-length segment (a disc).
    const std::size_t segments = std::max<std::size_t>(1, s.points.size() - 1);
    for (std::size_t i = 0; i < segments && !s.points.empty(); ++i) {
      const auto& a = s.points[i];
      const auto& b = s.points[std::min(i + 1, s.points.size() - 1)];
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a[0], b[0]) - r - 1)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a[0], b[0]) + r + 1)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a[1], b[1]) - r - 1)));
      const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a[1], b[1]) + r + 1)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (segment_distance2(x + 0.5, y + 0.5, a, b) <= r2) m.set(y, x, true);
        }
      }
    }
  }
  return m;
}

std::string SketchInput::to_json() const {
  json j;
  j["format"] = kFormat;
  j["version"] = 1;
  j["width"] = width;
  j["height"] = height;
  j["strokes"] = json::array();
  for (const Stroke& s : strokes) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p[0], p[1]});
    j["strokes"].push_back({{"width", s.width}, {"points", pts}});
  }
  if (!mask_ref.empty()) j["mask"] = mask_ref;
  return j.dump(2) + "\n";
}

SketchInput SketchInput::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kValidation, std::string("sketch document is not valid JSON: ") + e.what());
  }
  auto need = [&](const json& obj, const char* key) -> const json& {
    require(obj.is_object() && obj.contains(key), ErrorKind::kValidation,
            std::string("sketch document lacks '") + key + "'");
    return obj.at(key);
  };
  require(need(j, "format") == kFormat, ErrorKind::kValidation, "not a hairedit-sketch document");
  require(need(j, "version") == 1, ErrorKind::kValidation, "unsupported sketch version");
  SketchInput s;
  const json& w = need(j, "width");
  const json& h = need(j, "height");
  require(w.is_number_integer() && h.is_number_integer() && w.get<int>() > 0 && h.get<int>() > 0,
          ErrorKind::kValidation, "sketch width and height must be positive integers");
  s.width = w.get<int>();
  s.height = h.get<int>();
  const json& strokes = need(j, "strokes");
  require(strokes.is_array(), ErrorKind::kValidation, "'strokes' must be an array");
  for (const json& st : strokes) {
    Stroke out;
    const json& sw = need(st, "width");
    require(sw.is_number() && sw.get<double>() > 0.0, ErrorKind::kValidation, "stroke width must be positive");
    out.width = sw.get<double>();
    const json& pts = need(st, "points");
    require(pts.is_array() && !pts.empty(), ErrorKind::kValidation, "stroke needs at least one point");
    for (const json& p : pts) {
      require(p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number(), ErrorKind::kValidation,
              "stroke points must be [x, y] pairs");
      out.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    s.strokes.push_back(std::move(out));
  }
  if (j.contains("mask")) {
    require(j["mask"].is_string(), ErrorKind::kValidation, "'mask' must be a path string");
    s.mask_ref = j["mask"].get<std::string>();
  }
  return s;
}

SketchInput SketchInput::read(const std::filesystem::path& path) { return from_json(io::read_text(path)); }

void SketchInput::write(const std::filesystem::path& path) const { io::write_text(path, to_json()); }

SketchInput SketchInput::with_dropout(double p, std::uint64_t seed) const {
  require(p >= 0.0 && p < 1.0, ErrorKind::kInvalidArgument, "stroke dropout must lie in [0, 1)");
  SketchInput out = *this;
  if (p == 0.0) return out;
  out.strokes.clear();
  Rng rng(seed);
  for (const Stroke& s : strokes) {
    if (rng.uniform() >= p) out.strokes.push_back(s);
  }
  return out;
}

}  // namespace hairedit
