#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hairedit/perceptual/backends.hpp"

namespace hairedit {

class Engine;

inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(1 / MSE) over mask pixels (all channels), capped at 100 dB once
// the MSE drops below 1e-10. Empty masks are rejected.
double masked_psnr(const Image& a, const Image& b, const BinaryMask& m);

// Structural similarity of the luminance planes with an 11x11 Gaussian
// window (sigma 1.5), averaged over mask pixels. Windows are cut at the image
// border and renormalized.
double masked_ssim(const Image& a, const Image& b, const BinaryMask& m);

// Cosine of the identity embeddings.
double identity_similarity(const Image& a, const Image& b, const IdentityBackend& id);

// Non-hair pixels of both images.
BinaryMask nonhair_intersection(const Image& a, const Image& b, const FaceParsingBackend& parsing);

struct EvalResult {
  std::string name;
  double ids = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double runtime_s = 0.0;
};

EvalResult evaluate_pair(const std::string& name, const Image& before, const Image& after, const Backends& backends,
                         double runtime_s = 0.0);

struct BenchmarkReport {
  std::vector<EvalResult> items;
  std::vector<std::pair<std::string, std::string>> skipped;  // (name, reason)
  EvalResult aggregate;                                      // per-field mean over items

  nlohmann::json to_json(bool include_timings = true) const;
};

BenchmarkReport aggregate_results(std::vector<EvalResult> items,
                                  std::vector<std::pair<std::string, std::string>> skipped = {});

// Dataset spec (JSON):
//   {"items": [{"name": "a", "source": "a.png", "edited": "a_out.png"},
//              {"name": "b", "source": "b.png", "recipe": "b.json"}, ...]}
// Paths are relative to the spec file. "edited" pairs are scored as given;
// "recipe" items run the edit first and record its runtime. Items that
// cannot be read or edited are skipped and listed in the report.
BenchmarkReport run_benchmark(const std::filesystem::path& spec, const Engine& engine);

}  // namespace hairedit
