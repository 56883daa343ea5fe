#include "hairedit/metrics/metrics.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "hairedit/core/io.hpp"
#include "hairedit/error.hpp"
#include "hairedit/pipeline/pipeline.hpp"

namespace hairedit {

using nlohmann::json;

namespace {

void check_inputs(const Image& a, const Image& b, const BinaryMask& m, const char* what) {
  require(a.height() == b.height() && a.width() == b.width(), ErrorKind::kShapeMismatch,
          std::string(what) + ": images differ in size");
  require(m.height() == a.height() && m.width() == a.width(), ErrorKind::kShapeMismatch,
          std::string(what) + ": mask does not match the images");
  require(!m.empty_region(), ErrorKind::kInvalidArgument, std::string(what) + ": mask is empty");
}

std::vector<double> luminance(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.height()) * img.width());
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      y[static_cast<std::size_t>(r) * img.width() + c] =
          0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    }
  }
  return y;
}

}  // namespace

double masked_psnr(const Image& a, const Image& b, const BinaryMask& m) {
  check_inputs(a, b, m, "masked PSNR");
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (m.at(y, x) == 0.0) continue;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        acc += d * d;
      }
      n += Image::kChannels;
    }
  }
  const double mse = acc / static_cast<double>(n);
  if (mse < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double masked_ssim(const Image& a, const Image& b, const BinaryMask& m) {
  check_inputs(a, b, m, "masked SSIM");
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  double g[2 * kRadius + 1];
  for (int i = -kRadius; i <= kRadius; ++i) g[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));

  const auto ya = luminance(a), yb = luminance(b);
  const int h = a.height(), w = a.width();
  double total = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.at(y, x) == 0.0) continue;
      double sw = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const double wt = g[dy + kRadius] * g[dx + kRadius];
          const double va = ya[static_cast<std::size_t>(yy) * w + xx];
          const double vb = yb[static_cast<std::size_t>(yy) * w + xx];
          sw += wt;
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      ma /= sw;
      mb /= sw;
      const double va = std::max(0.0, saa / sw - ma * ma);
      const double vb = std::max(0.0, sbb / sw - mb * mb);
      const double cov = sab / sw - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double identity_similarity(const Image& a, const Image& b, const IdentityBackend& id) {
  const auto ea = id.embed(a), eb = id.embed(b);
  require(ea.size() == eb.size(), ErrorKind::kShapeMismatch, "identity embeddings differ in size");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    dot += ea[i] * eb[i];
    na += ea[i] * ea[i];
    nb += eb[i] * eb[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

BinaryMask nonhair_intersection(const Image& a, const Image& b, const FaceParsingBackend& parsing) {
  const BinaryMask ma = parsing.nonhair_mask(a), mb = parsing.nonhair_mask(b);
  std::vector<double> both(ma.data().size());
  for (std::size_t i = 0; i < both.size(); ++i) both[i] = ma.data()[i] * mb.data()[i];
  return BinaryMask(ma.height(), ma.width(), std::move(both));
}

EvalResult evaluate_pair(const std::string& name, const Image& before, const Image& after, const Backends& backends,
                         double runtime_s) {
  const BinaryMask m = nonhair_intersection(before, after, *backends.parsing);
  EvalResult r;
  r.name = name;
  r.ids = identity_similarity(before, after, *backends.identity);
  r.psnr_db = masked_psnr(before, after, m);
  r.ssim = masked_ssim(before, after, m);
  r.runtime_s = runtime_s;
  return r;
}

BenchmarkReport aggregate_results(std::vector<EvalResult> items,
                                  std::vector<std::pair<std::string, std::string>> skipped) {
  BenchmarkReport rep;
  rep.items = std::move(items);
  rep.skipped = std::move(skipped);
  rep.aggregate.name = "mean";
  if (rep.items.empty()) return rep;
  for (const EvalResult& e : rep.items) {
    rep.aggregate.ids += e.ids;
    rep.aggregate.psnr_db += e.psnr_db;
    rep.aggregate.ssim += e.ssim;
    rep.aggregate.runtime_s += e.runtime_s;
  }
  const double n = static_cast<double>(rep.items.size());
  rep.aggregate.ids /= n;
  rep.aggregate.psnr_db /= n;
  rep.aggregate.ssim /= n;
  rep.aggregate.runtime_s /= n;
  return rep;
}

json BenchmarkReport::to_json(bool include_timings) const {
  auto row = [&](const EvalResult& e) {
    json j = {{"name", e.name}, {"ids", e.ids}, {"psnr_db", e.psnr_db}, {"ssim", e.ssim}};
    if (include_timings) j["runtime_s"] = e.runtime_s;
    return j;
  };
  json j;
  j["count"] = items.size();
  j["items"] = json::array();
  for (const EvalResult& e : items) j["items"].push_back(row(e));
  j["aggregate"] = row(aggregate);
  j["skipped"] = json::array();
  for (const auto& [name, reason] : skipped) j["skipped"].push_back({{"name", name}, {"reason", reason}});
  return j;
}

BenchmarkReport run_benchmark(const std::filesystem::path& spec, const Engine& engine) {
  json j;
  try {
    j = json::parse(io::read_text(spec));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kValidation, "dataset spec " + spec.string() + " is not valid JSON: " + e.what());
  }
  require(j.is_object() && j.contains("items") && j["items"].is_array(), ErrorKind::kValidation,
          "dataset spec needs an 'items' array");
  const std::filesystem::path base = spec.parent_path();
  std::vector<EvalResult> results;
  std::vector<std::pair<std::string, std::string>> skipped;
  int index = 0;
  for (const json& item : j["items"]) {
    std::string name = "item" + std::to_string(index++);
    try {
      require(item.is_object(), ErrorKind::kValidation, "item must be an object");
      if (item.contains("name")) name = item.at("name").get<std::string>();
      const Image source = io::read_image_png(base / item.at("source").get<std::string>());
      if (item.contains("edited")) {
        const Image edited = io::read_image_png(base / item.at("edited").get<std::string>());
        results.push_back(evaluate_pair(name, source, edited, engine.backends()));
        continue;
      }
      require(item.contains("recipe"), ErrorKind::kValidation, "item needs 'edited' or 'recipe'");
      const std::filesystem::path recipe_path = base / item.at("recipe").get<std::string>();
      const Recipe recipe = Recipe::load(recipe_path);
      std::shared_ptr<const Engine> custom;
      if (!recipe.overrides.empty()) custom = Engine::create(engine.config().with_overrides(recipe.overrides));
      const Engine& e = custom ? *custom : engine;
      const ResolvedRequest rr = resolve_request(recipe.request, file_asset_loader(recipe_path.parent_path()));
      const auto t0 = std::chrono::steady_clock::now();
      const EditResult out = run_edit(source, rr, e);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      results.push_back(evaluate_pair(name, source, out.image.clamped(), e.backends(), secs));
    } catch (const std::exception& ex) {
      std::cerr << "benchmark: skipping " << name << ": " << ex.what() << "\n";
      skipped.emplace_back(name, ex.what());
    }
  }
  return aggregate_results(std::move(results), std::move(skipped));
}

}  // namespace hairedit
