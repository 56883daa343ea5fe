#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hairedit/ad/tape.hpp"

namespace hairedit::optim {

struct AdamSettings {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment first-order optimizer over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, AdamSettings settings = {});
  ~Adam();
  Adam(const Adam&) = delete;
  Adam& operator=(const Adam&) = delete;

  void step(std::span<double> params, std::span<const double> grad);
  int steps_taken() const { return t_; }
  const AdamSettings& settings() const { return settings_; }

  // Number of optimizers constructed in this process. Feed-forward paths are
  // checked against it to prove they never start an optimization.
  static long instances_created() { return created_.load(); }

 private:
  AdamSettings settings_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
  static std::atomic<long> created_;
};

// Per-step progress: (step index, loss at that step).
using ProgressFn = std::function<void(int step, double loss)>;

struct Trajectory {
  std::vector<double> losses;  // loss evaluated before each update, plus final
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_loss = 0.0;
  int best_step = 0;
  bool flagged = false;  // final loss did not improve on the initial loss
};

// Loss evaluator: fills grad (same size as params) and returns the loss.
using Objective = std::function<double(std::span<const double> params, std::span<double> grad)>;

// Builds a loss on a fresh tape from the parameter node.
using TapeLoss = std::function<ad::Var(ad::Tape& tape, ad::Var params)>;
// Wraps a tape loss as an Objective (value + reverse-mode gradient).
Objective tape_objective(TapeLoss loss);

enum class Keep { kLast, kBest };

// Runs `steps` Adam updates. On a non-improving run the best iterate seen
// is restored into params and the trajectory is flagged. Keep::kBest always
// returns the best iterate, for deterministic objectives where the last step
// may have bounced off a minimum.
Trajectory minimize(std::vector<double>& params, const Objective& objective, int steps,
                    AdamSettings settings, const ProgressFn& progress = nullptr, Keep keep = Keep::kLast);

}  // namespace hairedit::optim
