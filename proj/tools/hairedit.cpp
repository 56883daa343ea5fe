// hairedit command-line tool.
//
// Exit codes: 0 success, 1 engine failure, 2 bad usage, config or input.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "hairedit/core/io.hpp"
#include "hairedit/metrics/metrics.hpp"
#include "hairedit/pipeline/pipeline.hpp"
#include "hairedit/service/http.hpp"

namespace fs = std::filesystem;
using namespace hairedit;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEngine = 1;
constexpr int kExitUsage = 2;

// Thrown for problems with what the user handed us.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string backend;
  std::string config_path;
  std::string weights;
  std::string sketch_inverter;
  bool verbose = false;
};

void log(const std::string& msg) { std::cerr << "hairedit: " << msg << "\n"; }

EngineConfig load_config(const Globals& g) {
  EngineConfig cfg;
  if (!g.config_path.empty()) cfg = EngineConfig::load(g.config_path);
  if (!g.backend.empty()) cfg.generator.backend = g.backend;
  if (!g.weights.empty()) cfg.generator.weights_path = g.weights;
  if (!g.sketch_inverter.empty()) cfg.sketch_inverter_path = g.sketch_inverter;
  cfg.validate();
  return cfg;
}

StageProgress progress_logger(const Globals& g) {
  if (!g.verbose) return nullptr;
  return [](const std::string& stage, int step, double loss) {
    if (step % 25 == 0) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s step %d loss %.6g", stage.c_str(), step, loss);
      log(buf);
    }
  };
}

// Input and config problems are usage errors; everything after that is the engine's.
template <class Load, class Run>
int run_phases(Load load, Run run) {
  try {
    load();
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitUsage;
  }
  try {
    run();
  } catch (const UsageError& e) {
    log(std::string("error: ") + e.what());
    return kExitUsage;
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
    const bool usage = e.kind() == ErrorKind::kValidation || e.kind() == ErrorKind::kConfig;
    return usage ? kExitUsage : kExitEngine;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitEngine;
  }
  return kExitOk;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- commands ------------------------------------------------------------------

struct InvertArgs {
  std::string image, out, reconstruction;
};

int cmd_invert(const Globals& g, const InvertArgs& a) {
  std::shared_ptr<const Engine> engine;
  Image img;
  return run_phases(
      [&] {
        engine = Engine::create(load_config(g));
        img = io::read_image_png(a.image);
      },
      [&] {
        const SourceState s = prepare_source(img, *engine, progress_logger(g));
        io::write_latent_file(a.out, {s.w_src, s.f_src()});
        if (!a.reconstruction.empty()) {
          io::write_image_png(a.reconstruction, synthesize_fs(s.fs, engine->generator()).clamped());
        }
        for (const StageRecord& r : s.stages) {
          log(r.name + ": loss " + fmt(r.initial_loss) + " -> " + fmt(r.final_loss));
        }
      });
}

struct ProxyArgs {
  std::string kind, image, text, reference, sketch, out, preview;
  std::uint64_t seed = 0;
};

int cmd_make_proxy(const Globals& g, const ProxyArgs& a) {
  std::shared_ptr<const Engine> engine;
  std::optional<Image> src, ref;
  std::optional<SketchInput> sketch;
  return run_phases(
      [&] {
        engine = Engine::create(load_config(g));
        if (a.kind == "text" || a.kind == "reference") {
          if (a.image.empty()) throw UsageError("--image is required for " + a.kind + " proxies");
          src = io::read_image_png(a.image);
        }
        if (a.kind == "text" && a.text.empty()) throw UsageError("--text is required for text proxies");
        if (a.kind == "reference") {
          if (a.reference.empty()) throw UsageError("--reference is required for reference proxies");
          ref = io::read_image_png(a.reference);
        }
        if (a.kind == "sketch") {
          if (a.sketch.empty()) throw UsageError("--sketch is required for sketch proxies");
          if (engine->sketch_inverter() == nullptr) throw UsageError("sketch proxies need --sketch-inverter");
          sketch = SketchInput::read(a.sketch);
        }
      },
      [&] {
        const GeneratorBackend& gen = engine->generator();
        const StageBudget& budget = engine->config().optimizer;
        const StageProgress p = progress_logger(g);
        const optim::ProgressFn step_log = p ? optim::ProgressFn([&](int step, double loss) { p("proxy", step, loss); })
                                             : optim::ProgressFn();
        Proxy proxy;
        if (a.kind == "text") {
          TextProxyOptions o;
          o.seed = a.seed;
          proxy = make_text_proxy(a.text, *src, gen, engine->backends(), engine->weights(),
                                  budget.stage(budget.proxy_steps), o, step_log);
        } else if (a.kind == "reference") {
          ReferenceProxyOptions o;
          o.invert = budget.stage(budget.invert_steps);
          proxy = make_reference_proxy(*ref, *src, gen, engine->backends(), engine->weights(),
                                       budget.stage(budget.proxy_steps), o, step_log);
        } else {
          proxy = make_sketch_proxy(*sketch, *engine->sketch_inverter(), gen);
        }
        io::write_latent_file(a.out, {*proxy.w, proxy.f_style});
        if (!a.preview.empty()) io::write_image_png(a.preview, gen.synthesize(*proxy.w).clamped());
        if (!proxy.trajectory.losses.empty()) {
          log(a.kind + " proxy: loss " + fmt(proxy.trajectory.losses.front()) + " -> " +
              fmt(proxy.trajectory.losses.back()));
        }
      });
}

struct TrainArgs {
  std::string dataset, out, log_path;
  int steps = 2000;
  int batch = 0;
  double lr = 0.0;
  int eval_every = 100;
  std::uint64_t seed = 0;
};

int cmd_train_sketch(const Globals& g, const TrainArgs& a) {
  std::shared_ptr<const Engine> engine;
  std::vector<SketchPair> data;
  SketchTrainConfig cfg;
  return run_phases(
      [&] {
        if (a.steps <= 0) throw UsageError("--steps must be positive");
        engine = Engine::create(load_config(g));
        data = read_sketch_dataset(a.dataset);
        cfg.steps = a.steps;
        cfg.seed = a.seed;
        cfg.eval_every = a.eval_every;
        if (a.batch > 0) cfg.batch = a.batch;
        if (a.lr > 0.0) cfg.learning_rate = a.lr;
      },
      [&] {
        const GeneratorBackend& gen = engine->generator();
        const Shape3 out = gen.stage_shape(Stage::kOutput);
        SketchInverter inv(out.height, out.width, gen.mean_latent());
        const StageProgress p = progress_logger(g);
        const SketchTrainResult r = train_sketch_inverter(
            inv, data, gen, engine->backends(), engine->weights(), cfg,
            p ? optim::ProgressFn([&](int step, double loss) { p("train", step, loss); }) : optim::ProgressFn());
        inv.save(a.out);
        const std::string log_path = a.log_path.empty() ? a.out + ".curve.tsv" : a.log_path;
        std::string curve = "kind\tstep\tloss\n";
        for (std::size_t i = 0; i < r.step_losses.size(); ++i) {
          curve += "batch\t" + std::to_string(i) + "\t" + fmt(r.step_losses[i]) + "\n";
        }
        for (const auto& [step, loss] : r.eval_losses) curve += "eval\t" + std::to_string(step) + "\t" + fmt(loss) + "\n";
        io::write_text(log_path, curve);
        log("sketch inverter: dataset loss " + fmt(r.initial_mean_loss) + " -> " + fmt(r.final_mean_loss));
      });
}

struct DatasetArgs {
  std::string out;
  int count = 50;
  std::uint64_t seed = 0;
};

int cmd_make_sketch_dataset(const Globals& g, const DatasetArgs& a) {
  std::shared_ptr<const Engine> engine;
  return run_phases(
      [&] {
        if (a.count <= 0) throw UsageError("--count must be positive");
        engine = Engine::create(load_config(g));
      },
      [&] {
        const auto data = make_toy_sketch_dataset(engine->toy_generator(), *engine->backends().parsing, a.count, a.seed);
        write_sketch_dataset(a.out, data);
        log("wrote " + std::to_string(data.size()) + " pairs to " + a.out);
      });
}

struct EditArgs {
  std::string image, recipe, out, report;
};

int cmd_edit(const Globals& g, const EditArgs& a) {
  std::shared_ptr<const Engine> engine;
  Image img;
  ResolvedRequest rr;
  return run_phases(
      [&] {
        const Recipe recipe = Recipe::load(a.recipe);
        EngineConfig cfg = load_config(g);
        if (!recipe.overrides.empty()) cfg = cfg.with_overrides(recipe.overrides);
        engine = Engine::create(cfg);
        img = io::read_image_png(a.image);
        rr = resolve_request(recipe.request, file_asset_loader(fs::path(a.recipe).parent_path()));
      },
      [&] {
        try {
          const EditResult r = run_edit(img, rr, *engine, nullptr, progress_logger(g));
          io::write_image_png(a.out, r.image.clamped());
          const std::string report = a.report.empty() ? fs::path(a.out).replace_extension(".report.json").string()
                                                      : a.report;
          io::write_text(report, r.report.to_json(false).dump(2) + "\n");
          for (const StageRecord& s : r.report.stages) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-16s %5d steps  %.6g -> %.6g  %.2fs%s", s.name.c_str(), s.steps,
                          s.initial_loss, s.final_loss, s.seconds, s.flagged ? "  (flagged)" : "");
            log(buf);
          }
        } catch (const StageError& e) {
          if (e.partial()) {
            const std::string partial = fs::path(a.out).replace_extension(".partial.png").string();
            io::write_image_png(partial, e.partial()->clamped());
            log("partial result written to " + partial);
          }
          throw;
        }
      });
}

struct BenchArgs {
  std::string dataset, report;
  bool timings = false;
};

int cmd_benchmark(const Globals& g, const BenchArgs& a) {
  std::shared_ptr<const Engine> engine;
  return run_phases(
      [&] {
        engine = Engine::create(load_config(g));
        if (!fs::exists(a.dataset)) throw UsageError("dataset spec " + a.dataset + " does not exist");
      },
      [&] {
        const BenchmarkReport r = run_benchmark(a.dataset, *engine);
        io::write_text(a.report, r.to_json(a.timings).dump(2) + "\n");
        log("scored " + std::to_string(r.items.size()) + " items, skipped " + std::to_string(r.skipped.size()) +
            "; mean IDS " + fmt(r.aggregate.ids) + ", PSNR " + fmt(r.aggregate.psnr_db) + ", SSIM " +
            fmt(r.aggregate.ssim));
      });
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const Globals& g) {
  std::shared_ptr<const Engine> engine;
  ServiceConfig sc;
  return run_phases(
      [&] {
        EngineConfig cfg = load_config(g);
        if (const char* host = std::getenv("HAIREDIT_HOST")) cfg.service.host = host;
        if (const char* port = std::getenv("HAIREDIT_PORT")) {
          char* end = nullptr;
          const long p = std::strtol(port, &end, 10);
          if (end == port || *end != '\0' || p < 0 || p > 65535) {
            throw UsageError(std::string("HAIREDIT_PORT is not a port number: ") + port);
          }
          cfg.service.port = static_cast<int>(p);
        }
        cfg.validate();
        sc = cfg.service;
        engine = Engine::create(cfg);
      },
      [&] {
        service::Service svc(engine, sc);
        service::HttpServer http(svc);
        if (!http.bind(sc.host, sc.port)) {
          throw UsageError("cannot bind " + sc.host + ":" + std::to_string(sc.port));
        }
        std::signal(SIGTERM, on_signal);
        std::signal(SIGINT, on_signal);
        std::atomic<bool> done{false};
        std::thread watcher([&] {
          while (!g_stop && !done) std::this_thread::sleep_for(std::chrono::milliseconds(50));
          http.stop();
        });
        log("listening on " + sc.host + ":" + std::to_string(http.port()));
        const bool ok = http.listen();
        done = true;
        watcher.join();
        log("draining jobs");
        svc.shutdown();
        log("stopped");
        if (!ok && !g_stop) throw std::runtime_error("server stopped unexpectedly");
      });
}

struct SampleArgs {
  std::string out;
  std::uint64_t seed = 0;
  double psi = 0.7;
};

int cmd_sample(const Globals& g, const SampleArgs& a) {
  std::shared_ptr<const Engine> engine;
  return run_phases([&] { engine = Engine::create(load_config(g)); },
                    [&] {
                      const GeneratorBackend& gen = engine->generator();
                      const LatentWPlus w = truncation_init(gen.mean_latent(), gen.sample_random_latent(a.seed), a.psi);
                      io::write_image_png(a.out, gen.synthesize(w).clamped());
                    });
}

int cmd_export_weights(const Globals& g, const std::string& out) {
  std::shared_ptr<const Engine> engine;
  return run_phases([&] { engine = Engine::create(load_config(g)); },
                    [&] { io::write_archive(out, engine->toy_generator().to_archive()); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hair editing in generator feature space"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--backend", g.backend, "Generator backend")->check(CLI::IsMember({"toy", "pretrained"}));
  app.add_option("--config", g.config_path, "Engine config JSON");
  app.add_option("--weights", g.weights, "Generator weight archive (pretrained backend)");
  app.add_option("--sketch-inverter", g.sketch_inverter, "Trained sketch inverter archive");
  app.add_flag("-v,--verbose", g.verbose, "Log optimizer progress");

  InvertArgs inv;
  auto* c_inv = app.add_subcommand("invert", "Embed an image and write its latent file");
  c_inv->add_option("--image", inv.image)->required();
  c_inv->add_option("--out", inv.out)->required();
  c_inv->add_option("--reconstruction", inv.reconstruction, "Also write the reconstructed image");

  ProxyArgs px;
  auto* c_px = app.add_subcommand("make-proxy", "Build a hairstyle proxy latent");
  c_px->add_option("--kind", px.kind)->required()->check(CLI::IsMember({"text", "reference", "sketch"}));
  c_px->add_option("--image", px.image, "Source image");
  c_px->add_option("--text", px.text);
  c_px->add_option("--reference", px.reference, "Reference image");
  c_px->add_option("--sketch", px.sketch, "Sketch document");
  c_px->add_option("--seed", px.seed);
  c_px->add_option("--out", px.out)->required();
  c_px->add_option("--preview", px.preview, "Also write the proxy image");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-sketch", "Train the sketch inverter");
  c_tr->add_option("--dataset", tr.dataset, "Directory of .sketch/.png pairs")->required();
  c_tr->add_option("--steps", tr.steps);
  c_tr->add_option("--out", tr.out)->required();
  c_tr->add_option("--log", tr.log_path, "Loss curve (default: OUT.curve.tsv)");
  c_tr->add_option("--batch", tr.batch);
  c_tr->add_option("--lr", tr.lr);
  c_tr->add_option("--eval-every", tr.eval_every);
  c_tr->add_option("--seed", tr.seed);

  DatasetArgs ds;
  auto* c_ds = app.add_subcommand("make-sketch-dataset", "Write procedural sketch/image pairs");
  c_ds->add_option("--out", ds.out)->required();
  c_ds->add_option("--count", ds.count);
  c_ds->add_option("--seed", ds.seed);

  EditArgs ed;
  auto* c_ed = app.add_subcommand("edit", "Apply an edit recipe to an image");
  c_ed->add_option("--image", ed.image)->required();
  c_ed->add_option("--recipe", ed.recipe)->required();
  c_ed->add_option("--out", ed.out)->required();
  c_ed->add_option("--report", ed.report, "Report JSON (default: OUT.report.json)");

  BenchArgs bn;
  auto* c_bn = app.add_subcommand("benchmark", "Score edits with IDS, PSNR and SSIM");
  c_bn->add_option("--dataset", bn.dataset, "Dataset spec JSON")->required();
  c_bn->add_option("--report", bn.report)->required();
  c_bn->add_flag("--timings", bn.timings, "Include per-item runtimes");

  auto* c_sv = app.add_subcommand("serve", "Run the HTTP service");

  SampleArgs sm;
  auto* c_sm = app.add_subcommand("sample", "Write a generated face");
  c_sm->add_option("--seed", sm.seed);
  c_sm->add_option("--psi", sm.psi);
  c_sm->add_option("--out", sm.out)->required();

  std::string weights_out;
  auto* c_ex = app.add_subcommand("export-weights", "Write the generator weights as an archive");
  c_ex->add_option("--out", weights_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*c_inv) return cmd_invert(g, inv);
  if (*c_px) return cmd_make_proxy(g, px);
  if (*c_tr) return cmd_train_sketch(g, tr);
  if (*c_ds) return cmd_make_sketch_dataset(g, ds);
  if (*c_ed) return cmd_edit(g, ed);
  if (*c_bn) return cmd_benchmark(g, bn);
  if (*c_sv) return cmd_serve(g);
  if (*c_sm) return cmd_sample(g, sm);
  if (*c_ex) return cmd_export_weights(g, weights_out);
  return kExitUsage;
}
