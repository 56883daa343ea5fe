#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "hairedit/generator/toy_generator.hpp"
#include "hairedit/inversion/inversion.hpp"
#include "hairedit/losses/losses.hpp"
#include "hairedit/proxies/proxies.hpp"

namespace hairedit {

struct GeneratorConfig {
  std::string backend = "toy";  // toy | pretrained
  std::string weights_path;     // tensor archive, pretrained only
  std::uint64_t seed = 7;       // toy weight seed
};

// Plugin name per perceptual role. Only "toy" is built in.
struct BackendNames {
  std::string similarity = "toy";
  std::string keypoints = "toy";
  std::string parsing = "toy";
  std::string perceptual = "toy";
  std::string patch = "toy";
  std::string identity = "toy";
};

// Adam budget per pipeline stage. All stages share one learning rate.
struct StageBudget {
  double learning_rate = 0.01;
  int invert_steps = 200;
  int fs_steps = 100;
  int proxy_steps = 200;
  int color_steps = 200;
  int final_steps = 100;

  InversionConfig stage(int steps) const {
    InversionConfig c;
    c.learning_rate = learning_rate;
    c.steps = steps;
    return c;
  }
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int queue_capacity = 4;
  int workers = 1;
  double session_ttl_hours = 24.0;
  std::string store_dir = "hairedit-sessions";
};

struct EngineConfig {
  GeneratorConfig generator;
  BackendNames backends;
  LossWeights loss_weights;
  StageBudget optimizer;
  std::string sketch_inverter_path;  // empty: sketch conditions are rejected
  ServiceConfig service;

  // Unknown keys and ill-typed values are kConfig errors. Missing keys keep
  // their defaults, so a config file only lists what it changes.
  static EngineConfig from_json(const nlohmann::json& j);
  static EngineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // Deep-merges `patch` over this config and re-validates.
  EngineConfig with_overrides(const nlohmann::json& patch) const;
  void validate() const;
};

// Everything an edit needs, built once from a config and shared read-only.
class Engine {
 public:
  static std::shared_ptr<const Engine> create(const EngineConfig& cfg);

  const EngineConfig& config() const { return cfg_; }
  const GeneratorBackend& generator() const { return *gen_; }
  const ToyGenerator& toy_generator() const { return *gen_; }
  const Backends& backends() const { return backends_; }
  const LossWeights& weights() const { return cfg_.loss_weights; }
  const BaldingMapper& balding() const { return *balding_; }
  // Null when no inverter path is configured.
  const SketchInverter* sketch_inverter() const { return inverter_ ? &*inverter_ : nullptr; }

 private:
  EngineConfig cfg_;
  std::shared_ptr<const ToyGenerator> gen_;
  Backends backends_;
  std::unique_ptr<BaldingMapper> balding_;
  std::optional<SketchInverter> inverter_;
};

// generator.backend = toy builds seeded weights; pretrained loads a tensor
// archive with the same layout.
std::shared_ptr<const ToyGenerator> make_generator(const GeneratorConfig& cfg);
Backends make_backends(const BackendNames& names, const GeneratorBackend& gen);

}  // namespace hairedit
