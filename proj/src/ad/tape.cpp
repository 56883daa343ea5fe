#include "hairedit/ad/tape.hpp"

#include "hairedit/error.hpp"

namespace hairedit::ad {

std::span<const double> Var::value() const { return tape_->value(*this); }
std::size_t Var::size() const { return tape_->value(*this).size(); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
  auto v = value();
  require(v.size() == 1, ErrorKind::kShapeMismatch, "scalar() on a non-scalar node");
  return v[0];
}

Var Tape::input(std::vector<double> values) { return push(std::move(values), true, nullptr); }

Var Tape::input(std::span<const double> values) {
  return input(std::vector<double>(values.begin(), values.end()));
}

Var Tape::constant(std::vector<double> values) { return push(std::move(values), false, nullptr); }

Var Tape::constant(std::span<const double> values) {
  return constant(std::vector<double>(values.begin(), values.end()));
}

Var Tape::push(std::vector<double> value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<double>& Tape::accum(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  static const std::vector<double> kEmpty;
  return n.grad.empty() ? std::span<const double>(kEmpty) : std::span<const double>(n.grad);
}

void Tape::backward(Var root) {
  require(root.tape() == this, ErrorKind::kInvalidArgument, "root belongs to another tape");
  require(nodes_[root.id()].value.size() == 1, ErrorKind::kShapeMismatch, "backward root must be scalar");
  for (auto& n : nodes_) n.grad.clear();
  if (!nodes_[root.id()].requires_grad) return;
  accum(root.id())[0] = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

}  // namespace hairedit::ad
