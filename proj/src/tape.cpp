#include "robust1d/tape.hpp"

#include <algorithm>

#include "robust1d/errors.hpp"

namespace robust1d {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw ContractViolation("variable does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.is_op = true;
  for (Var in : inputs) {
    check(in);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value();
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].requires_grad;
}

std::span<const double> Tape::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad.assign(n.value().size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  visits_ = 0;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.is_op) continue;
    ++visits_;
    if (n.backward && !n.grad.empty()) {
      // The rule may allocate other nodes' buffers, which never reallocates
      // this node's vector, so the span stays valid.
      n.backward(*this, std::span<const double>(n.grad));
    }
  }
}

}  // namespace robust1d
