#include <cmath>
#include <fstream>

#include "doctest.h"
#include "hairedit/core/io.hpp"
#include "hairedit/core/rng.hpp"
#include "hairedit/metrics/metrics.hpp"
#include "hairedit/pipeline/config.hpp"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;

namespace {

Image constant_image(int h, int w, double v) {
  Image img(h, w);
  for (double& x : img.data()) x = v;
  return img;
}

BinaryMask full_mask(int h, int w) {
  BinaryMask m(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(y, x, true);
  }
  return m;
}

// Embeds bright images on one axis and dark images on another.
class AxisIdentity final : public IdentityBackend {
 public:
  std::string name() const override { return "axis"; }
  ad::Var embed(const ImageVar& image) const override {
    const double first = image.v.value()[0];
    return image.v.tape()->constant(first > 0.5 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0});
  }
};

}  // namespace

TEST_CASE("masked PSNR examples") {
  const Image a = ht::random_image(16, 16, 1);
  const BinaryMask all = full_mask(16, 16);
  CHECK(masked_psnr(a, a, all) == kPsnrCapDb);
  // A uniform 0.1 offset gives MSE 0.01, i.e. 20 dB.
  CHECK(masked_psnr(constant_image(16, 16, 0.2), constant_image(16, 16, 0.3), all) ==
        doctest::Approx(20.0).epsilon(1e-9));
  CHECK_THROWS_AS(masked_psnr(a, a, BinaryMask(16, 16)), Error);
}

TEST_CASE("masked PSNR agrees with a loop oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image a = ht::random_image(20, 24, 2 * seed), b = ht::random_image(20, 24, 2 * seed + 1);
    const BinaryMask m = ht::random_mask(20, 24, 0.5, seed);
    double se = 0.0;
    int n = 0;
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 24; ++x) {
        if (!m.at(y, x)) continue;
        for (int c = 0; c < 3; ++c) {
          se += std::pow(a.at(y, x, c) - b.at(y, x, c), 2);
          ++n;
        }
      }
    }
    CHECK(masked_psnr(a, b, m) == doctest::Approx(10.0 * std::log10(n / se)).epsilon(0.01 / 100.0));
  }
}

TEST_CASE("masked PSNR falls as noise grows") {
  const Image a = ht::random_image(32, 32, 7);
  const BinaryMask all = full_mask(32, 32);
  double prev = masked_psnr(a, a, all);
  for (double amp : {0.01, 0.03, 0.1, 0.3}) {
    Image b = a;
    Rng rng(11);
    for (double& x : b.data()) x += amp * rng.normal();
    const double p = masked_psnr(a, b, all);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("masked SSIM: identity and constant images") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image a = ht::random_image(24, 24, seed);
    CHECK(masked_ssim(a, a, ht::random_mask(24, 24, 0.3, seed)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Flat images: only the luminance term survives.
  const double c1 = 1e-4, ma = 0.2, mb = 0.6;
  const double expected = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
  CHECK(masked_ssim(constant_image(24, 24, ma), constant_image(24, 24, mb), full_mask(24, 24)) ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK_THROWS_AS(masked_ssim(constant_image(8, 8, 0.1), constant_image(8, 8, 0.1), BinaryMask(8, 8)), Error);
}

TEST_CASE("identity similarity is a cosine") {
  const AxisIdentity id;
  CHECK(identity_similarity(constant_image(8, 8, 0.9), constant_image(8, 8, 0.1), id) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(identity_similarity(constant_image(8, 8, 0.9), constant_image(8, 8, 0.8), id) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregate is the per-field mean") {
  std::vector<EvalResult> items = {{"a", 0.9, 30.0, 0.8, 1.0}, {"b", 0.7, 40.0, 0.6, 3.0}};
  const BenchmarkReport r = aggregate_results(items, {{"c", "unreadable"}});
  CHECK(r.aggregate.ids == doctest::Approx(0.8));
  CHECK(r.aggregate.psnr_db == doctest::Approx(35.0));
  CHECK(r.aggregate.ssim == doctest::Approx(0.7));
  CHECK(r.aggregate.runtime_s == doctest::Approx(2.0));
  const auto j = r.to_json(false);
  CHECK(j.dump().find("runtime") == std::string::npos);
  CHECK(r.skipped.size() == 1u);
}

TEST_CASE("benchmark scores identical pairs perfectly and skips bad items") {
  const auto engine = ht::fast_engine();
  const auto dir = ht::temp_dir("metrics-benchmark");
  nlohmann::json spec;
  spec["items"] = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string name = "face" + std::to_string(i);
    io::write_image_png(dir / (name + ".png"), ht::sample_face(engine->generator(), 50 + i));
    spec["items"].push_back({{"name", name}, {"source", name + ".png"}, {"edited", name + ".png"}});
  }
  spec["items"].push_back({{"name", "missing"}, {"source", "nope.png"}, {"edited", "nope.png"}});
  std::ofstream(dir / "spec.json") << spec.dump();

  const BenchmarkReport r = run_benchmark(dir / "spec.json", *engine);
  REQUIRE(r.items.size() == 3u);
  REQUIRE(r.skipped.size() == 1u);
  CHECK(r.skipped[0].first == "missing");
  CHECK(r.aggregate.ids == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.aggregate.ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.aggregate.psnr_db == kPsnrCapDb);
}
