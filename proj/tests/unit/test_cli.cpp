#include <fstream>

#include "doctest.h"
#include "hairedit/core/io.hpp"
#include "hairedit/proxies/proxies.hpp"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;
namespace fs = std::filesystem;

namespace {

// Small budgets keep the CLI runs short.
fs::path quick_config(const fs::path& dir) {
  const fs::path p = dir / "config.json";
  io::write_text(p, R"({"optimizer": {"invert_steps": 20, "fs_steps": 10, "proxy_steps": 10,
                                       "color_steps": 10, "final_steps": 5}})");
  return p;
}

}  // namespace

TEST_CASE("cli edit writes the image and report") {
  const fs::path dir = ht::temp_dir("cli-edit");
  const auto engine = ht::fast_engine();
  io::write_image_png(dir / "src.png", ht::sample_face(engine->generator(), 200));
  io::write_text(dir / "recipe.json", R"({"color": {"rgb": [0.7, 0.3, 0.2]}})");
  const std::string cfg = quick_config(dir).string();

  CHECK(ht::run_cli({"--config", cfg, "edit", "--image", (dir / "src.png").string(), "--recipe",
                     (dir / "recipe.json").string(), "--out", (dir / "out.png").string()}) == 0);
  REQUIRE(fs::exists(dir / "out.png"));
  CHECK(io::read_image_png(dir / "out.png").height() == 64);
  REQUIRE(fs::exists(dir / "out.report.json"));
  const auto report = nlohmann::json::parse(io::read_text(dir / "out.report.json"));
  CHECK(report["color"] == "rgb");

  CHECK(ht::run_cli({"--config", cfg, "edit", "--image", (dir / "missing.png").string(), "--recipe",
                     (dir / "recipe.json").string(), "--out", (dir / "x.png").string()}) == 2);
  io::write_text(dir / "empty.json", "{}");
  CHECK(ht::run_cli({"--config", cfg, "edit", "--image", (dir / "src.png").string(), "--recipe",
                     (dir / "empty.json").string(), "--out", (dir / "x.png").string()}) == 2);
  io::write_text(dir / "bad_config.json", R"({"optimizer": {"stepz": 1}})");
  CHECK(ht::run_cli({"--config", (dir / "bad_config.json").string(), "edit", "--image", (dir / "src.png").string(),
                     "--recipe", (dir / "recipe.json").string(), "--out", (dir / "x.png").string()}) == 2);
  CHECK(ht::run_cli({"no-such-command"}) == 2);
  CHECK_FALSE(fs::exists(dir / "x.png"));
}

TEST_CASE("cli invert, sample and make-proxy") {
  const fs::path dir = ht::temp_dir("cli-invert");
  const std::string cfg = quick_config(dir).string();
  CHECK(ht::run_cli({"sample", "--seed", "3", "--out", (dir / "face.png").string()}) == 0);
  REQUIRE(fs::exists(dir / "face.png"));

  CHECK(ht::run_cli({"--config", cfg, "invert", "--image", (dir / "face.png").string(), "--out",
                     (dir / "face.latent").string(), "--reconstruction", (dir / "rec.png").string()}) == 0);
  CHECK(fs::exists(dir / "face.latent"));
  CHECK(fs::exists(dir / "rec.png"));
  const io::LatentFile lf = io::read_latent_file(dir / "face.latent");
  CHECK(lf.w.flat().size() == static_cast<std::size_t>(kNumLayers * kLatentDim));

  CHECK(ht::run_cli({"--config", cfg, "make-proxy", "--kind", "text", "--image", (dir / "face.png").string(),
                     "--text", "short red hair", "--out", (dir / "proxy.latent").string(), "--preview",
                     (dir / "proxy.png").string()}) == 0);
  CHECK(fs::exists(dir / "proxy.latent"));
  CHECK(fs::exists(dir / "proxy.png"));
  CHECK(ht::run_cli({"--config", cfg, "make-proxy", "--kind", "text", "--image", (dir / "face.png").string(),
                     "--out", (dir / "none.latent").string()}) == 2);
}

TEST_CASE("cli sketch dataset and training") {
  const fs::path dir = ht::temp_dir("cli-sketch");
  CHECK(ht::run_cli({"make-sketch-dataset", "--out", (dir / "data").string(), "--count", "4", "--seed", "1"}) == 0);
  REQUIRE(read_sketch_dataset(dir / "data").size() == 4u);

  CHECK(ht::run_cli({"train-sketch", "--dataset", (dir / "data").string(), "--steps", "0", "--out",
                     (dir / "inv.hewt").string()}) == 2);
  const std::vector<std::string> train = {"train-sketch", "--dataset", (dir / "data").string(), "--steps", "4",
                                          "--eval-every", "2", "--out", (dir / "a.hewt").string()};
  CHECK(ht::run_cli(train) == 0);
  std::vector<std::string> again = train;
  again.back() = (dir / "b.hewt").string();
  CHECK(ht::run_cli(again) == 0);
  CHECK(ht::files_equal(dir / "a.hewt", dir / "b.hewt"));
  CHECK(ht::files_equal(dir / "a.hewt.curve.tsv", dir / "b.hewt.curve.tsv"));

  // The trained inverter drives a sketch proxy.
  const auto data = read_sketch_dataset(dir / "data");
  data[0].sketch.write(dir / "s.sketch");
  CHECK(ht::run_cli({"--sketch-inverter", (dir / "a.hewt").string(), "make-proxy", "--kind", "sketch", "--sketch",
                     (dir / "s.sketch").string(), "--out", (dir / "sketch.latent").string()}) == 0);
  CHECK(fs::exists(dir / "sketch.latent"));
}

TEST_CASE("cli benchmark and serve argument errors") {
  const fs::path dir = ht::temp_dir("cli-bench");
  const auto engine = ht::fast_engine();
  io::write_image_png(dir / "a.png", ht::sample_face(engine->generator(), 1));
  io::write_text(dir / "spec.json", R"({"items": [{"name": "a", "source": "a.png", "edited": "a.png"}]})");
  CHECK(ht::run_cli({"benchmark", "--dataset", (dir / "spec.json").string(), "--report",
                     (dir / "report.json").string()}) == 0);
  const auto report = nlohmann::json::parse(io::read_text(dir / "report.json"));
  CHECK(report.dump().find("\"a\"") != std::string::npos);

  CHECK(ht::run_cli({"benchmark", "--dataset", (dir / "nope.json").string(), "--report",
                     (dir / "r2.json").string()}) == 2);
  io::write_text(dir / "port.json", R"({"service": {"port": 70000}})");
  CHECK(ht::run_cli({"--config", (dir / "port.json").string(), "serve"}) == 2);
}
