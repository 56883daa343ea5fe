#include "hairedit/pipeline/config.hpp"

#include <cmath>

#include "hairedit/core/io.hpp"
#include "hairedit/error.hpp"
#include "hairedit/perceptual/toy.hpp"

namespace hairedit {

using nlohmann::json;

namespace {

// Reads one section, rejecting keys that the callback does not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), ErrorKind::kConfig, "config '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      require(v.is_string(), ErrorKind::kConfig, where(key) + " must be a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      require(v.is_boolean(), ErrorKind::kConfig, where(key) + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      require(v.is_number_integer(), ErrorKind::kConfig, where(key) + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        require(v.get<long long>() >= 0, ErrorKind::kConfig, where(key) + " must be non-negative");
      }
    } else {
      require(v.is_number(), ErrorKind::kConfig, where(key) + " must be a number");
    }
    out = v.get<T>();
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      bool known = false;
      for (const char* s : seen_) known = known || key == s;
      require(known, ErrorKind::kConfig, "unknown config key '" + where(key.c_str()) + "'");
    }
  }

 private:
  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
  std::vector<const char*> seen_;
};

void merge(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

EngineConfig EngineConfig::from_json(const json& j) {
  EngineConfig c;
  Section root(j, "");
  if (const json* g = root.child("generator")) {
    Section s(*g, "generator");
    s.get("backend", c.generator.backend);
    s.get("weights_path", c.generator.weights_path);
    s.get("seed", c.generator.seed);
    s.finish();
  }
  if (const json* b = root.child("backends")) {
    Section s(*b, "backends");
    s.get("similarity", c.backends.similarity);
    s.get("keypoints", c.backends.keypoints);
    s.get("parsing", c.backends.parsing);
    s.get("perceptual", c.backends.perceptual);
    s.get("patch", c.backends.patch);
    s.get("identity", c.backends.identity);
    s.finish();
  }
  if (const json* w = root.child("loss_weights")) {
    Section s(*w, "loss_weights");
    s.get("clip", c.loss_weights.clip);
    s.get("pose", c.loss_weights.pose);
    s.get("shape", c.loss_weights.shape);
    s.get("style", c.loss_weights.style);
    s.get("reg", c.loss_weights.reg);
    s.get("mse", c.loss_weights.mse);
    s.get("lpips", c.loss_weights.lpips);
    s.get("m_par", c.loss_weights.m_par);
    s.finish();
  }
  if (const json* o = root.child("optimizer")) {
    Section s(*o, "optimizer");
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("invert_steps", c.optimizer.invert_steps);
    s.get("fs_steps", c.optimizer.fs_steps);
    s.get("proxy_steps", c.optimizer.proxy_steps);
    s.get("color_steps", c.optimizer.color_steps);
    s.get("final_steps", c.optimizer.final_steps);
    s.finish();
  }
  if (const json* k = root.child("sketch")) {
    Section s(*k, "sketch");
    s.get("inverter_path", c.sketch_inverter_path);
    s.finish();
  }
  if (const json* v = root.child("service")) {
    Section s(*v, "service");
    s.get("host", c.service.host);
    s.get("port", c.service.port);
    s.get("queue_capacity", c.service.queue_capacity);
    s.get("workers", c.service.workers);
    s.get("session_ttl_hours", c.service.session_ttl_hours);
    s.get("store_dir", c.service.store_dir);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json EngineConfig::to_json() const {
  const LossWeights& w = loss_weights;
  return {
      {"generator", {{"backend", generator.backend}, {"weights_path", generator.weights_path},
                     {"seed", generator.seed}}},
      {"backends", {{"similarity", backends.similarity}, {"keypoints", backends.keypoints},
                    {"parsing", backends.parsing}, {"perceptual", backends.perceptual},
                    {"patch", backends.patch}, {"identity", backends.identity}}},
      {"loss_weights", {{"clip", w.clip}, {"pose", w.pose}, {"shape", w.shape}, {"style", w.style},
                        {"reg", w.reg}, {"mse", w.mse}, {"lpips", w.lpips}, {"m_par", w.m_par}}},
      {"optimizer", {{"learning_rate", optimizer.learning_rate}, {"invert_steps", optimizer.invert_steps},
                     {"fs_steps", optimizer.fs_steps}, {"proxy_steps", optimizer.proxy_steps},
                     {"color_steps", optimizer.color_steps}, {"final_steps", optimizer.final_steps}}},
      {"sketch", {{"inverter_path", sketch_inverter_path}}},
      {"service", {{"host", service.host}, {"port", service.port}, {"queue_capacity", service.queue_capacity},
                   {"workers", service.workers}, {"session_ttl_hours", service.session_ttl_hours},
                   {"store_dir", service.store_dir}}},
  };
}

EngineConfig EngineConfig::with_overrides(const json& patch) const {
  require(patch.is_object(), ErrorKind::kConfig, "config overrides must be an object");
  json base = to_json();
  merge(base, patch);
  return from_json(base);
}

void EngineConfig::validate() const {
  require(generator.backend == "toy" || generator.backend == "pretrained", ErrorKind::kConfig,
          "generator.backend must be 'toy' or 'pretrained'");
  require(generator.backend != "pretrained" || !generator.weights_path.empty(), ErrorKind::kConfig,
          "generator.weights_path is required for the pretrained backend");
  loss_weights.validate();
  const StageBudget& o = optimizer;
  require(std::isfinite(o.learning_rate) && o.learning_rate > 0.0, ErrorKind::kConfig,
          "optimizer.learning_rate must be positive");
  require(o.invert_steps >= 1, ErrorKind::kConfig, "optimizer.invert_steps must be at least 1");
  require(o.fs_steps >= 0 && o.proxy_steps >= 0 && o.color_steps >= 0 && o.final_steps >= 0, ErrorKind::kConfig,
          "optimizer step counts must be non-negative");
  require(service.port >= 0 && service.port <= 65535, ErrorKind::kConfig, "service.port must lie in 0..65535");
  require(service.queue_capacity >= 1, ErrorKind::kConfig, "service.queue_capacity must be at least 1");
  require(service.workers >= 1, ErrorKind::kConfig, "service.workers must be at least 1");
  require(service.session_ttl_hours > 0.0, ErrorKind::kConfig, "service.session_ttl_hours must be positive");
}

std::shared_ptr<const ToyGenerator> make_generator(const GeneratorConfig& cfg) {
  if (cfg.backend == "toy") return std::make_shared<ToyGenerator>(cfg.seed);
  require(cfg.backend == "pretrained", ErrorKind::kConfig, "unknown generator backend '" + cfg.backend + "'");
  require(!cfg.weights_path.empty(), ErrorKind::kConfig, "generator.weights_path is required");
  std::shared_ptr<const ToyGenerator> gen = ToyGenerator::from_archive(io::read_archive(cfg.weights_path));
  return gen;
}

Backends make_backends(const BackendNames& names, const GeneratorBackend& gen) {
  for (const auto& [role, name] : {std::pair{"similarity", &names.similarity}, {"keypoints", &names.keypoints},
                                   {"parsing", &names.parsing}, {"perceptual", &names.perceptual},
                                   {"patch", &names.patch}, {"identity", &names.identity}}) {
    require(*name == "toy", ErrorKind::kConfig,
            std::string("backends.") + role + ": no plugin named '" + *name + "' is available");
  }
  // The similarity backend scores images relative to the generator's mean face.
  return make_toy_backends(gen.synthesize(LatentWPlus::broadcast(gen.mean_latent())));
}

std::shared_ptr<const Engine> Engine::create(const EngineConfig& cfg) {
  cfg.validate();
  auto e = std::shared_ptr<Engine>(new Engine());
  e->cfg_ = cfg;
  e->gen_ = make_generator(cfg.generator);
  e->backends_ = make_backends(cfg.backends, *e->gen_);
  e->balding_ = DirectionBaldingMapper::for_toy(*e->gen_);
  if (!cfg.sketch_inverter_path.empty()) e->inverter_ = SketchInverter::load(cfg.sketch_inverter_path);
  return e;
}

}  // namespace hairedit
