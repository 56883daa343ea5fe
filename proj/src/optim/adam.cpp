#include "hairedit/optim/adam.hpp"

#include <algorithm>
#include <cmath>

#include "hairedit/error.hpp"

namespace hairedit::optim {

std::atomic<long> Adam::created_{0};

Adam::Adam(std::size_t size, AdamSettings settings)
    : settings_(settings), m_(size, 0.0), v_(size, 0.0) {
  require(settings.learning_rate > 0.0, ErrorKind::kInvalidArgument, "learning rate must be > 0");
  created_.fetch_add(1);
}

Adam::~Adam() = default;

void Adam::step(std::span<double> params, std::span<const double> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorKind::kShapeMismatch,
          "Adam parameter size changed");
  ++t_;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= settings_.learning_rate * mhat / (std::sqrt(vhat) + settings_.epsilon);
  }
}

Objective tape_objective(TapeLoss loss) {
  return [loss = std::move(loss)](std::span<const double> params, std::span<double> grad) {
    ad::Tape tape;
    ad::Var x = tape.input(params);
    ad::Var l = loss(tape, x);
    require(l.size() == 1, ErrorKind::kShapeMismatch, "objective must return a scalar");
    tape.backward(l);
    if (x.requires_grad()) {
      auto g = tape.grad(x);
      std::copy(g.begin(), g.end(), grad.begin());
    }
    return l.scalar();
  };
}

Trajectory minimize(std::vector<double>& params, const Objective& objective, int steps,
                    AdamSettings settings, const ProgressFn& progress, Keep keep) {
  require(steps >= 0, ErrorKind::kInvalidArgument, "step budget must be >= 0");
  Trajectory traj;
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> best = params;

  auto evaluate = [&] {
    std::fill(grad.begin(), grad.end(), 0.0);
    return objective(params, grad);
  };

  double loss = evaluate();
  traj.initial_loss = loss;
  traj.best_loss = loss;
  if (steps == 0) {
    traj.losses.push_back(loss);
    traj.final_loss = loss;
    if (progress) progress(0, loss);
    return traj;
  }

  Adam adam(params.size(), settings);
  for (int s = 0; s < steps; ++s) {
    traj.losses.push_back(loss);
    if (progress) progress(s, loss);
    if (loss < traj.best_loss) {
      traj.best_loss = loss;
      traj.best_step = s;
      best = params;
    }
    adam.step(params, grad);
    loss = evaluate();
  }
  traj.losses.push_back(loss);
  if (progress) progress(steps, loss);
  if (loss < traj.best_loss) {
    traj.best_loss = loss;
    traj.best_step = steps;
    best = params;
  }
  traj.final_loss = loss;
  if (!(loss < traj.initial_loss)) {
    // A run that starts at (numerically) zero loss has nothing to improve.
    traj.flagged = traj.initial_loss > 1e-12;
    params = best;
    traj.final_loss = traj.best_loss;
  } else if (keep == Keep::kBest) {
    params = best;
    traj.final_loss = traj.best_loss;
  }
  return traj;
}

}  // namespace hairedit::optim
