#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace hairedit::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  std::span<const double> value() const;
  std::size_t size() const;
  double scalar() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep over the node list is a valid topological order for backprop.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(std::vector<double> values);
  Var input(std::span<const double> values);
  Var constant(std::vector<double> values);
  Var constant(std::span<const double> values);
  Var scalar_constant(double v) { return constant(std::vector<double>{v}); }

  // Seeds d(root)/d(root) = 1 and propagates. Root must be a scalar.
  void backward(Var root);

  std::span<const double> value(Var v) const { return nodes_[v.id()].value; }
  std::span<const double> grad(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }

  // --- op authoring -------------------------------------------------------
  using Backward = std::function<void(Tape&, int self)>;
  Var push(std::vector<double> value, bool requires_grad, Backward backward);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<double>& node_value(int id) const { return nodes_[id].value; }
  const std::vector<double>& node_grad(int id) const { return nodes_[id].grad; }
  // Gradient accumulator of an input node; allocated on first use.
  std::vector<double>& accum(int id);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

}  // namespace hairedit::ad
