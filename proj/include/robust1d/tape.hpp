#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "robust1d/tensor.hpp"

namespace robust1d {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records primitive operations in execution order and replays their
/// backward rules in reverse. A tape belongs to one thread at a time; tapes
/// may borrow read-only parameter tensors shared with other tapes.
class Tape {
 public:
  /// Receives the gradient flowing into the node's output and accumulates
  /// into its inputs through Tape::grad_buffer.
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives a gradient.
  Var constant(Tensor value);
  /// An owned leaf whose gradient is collected.
  Var leaf(Tensor value);
  /// A borrowed leaf. The tensor must outlive the tape and stay unchanged
  /// while the tape is in use.
  Var parameter(const Tensor& value);
  /// A borrowed value that never receives a gradient.
  Var constant_ref(const Tensor& value);

  /// Appends an operation result. The backward rule is dropped when no input
  /// requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward pass; empty when nothing flowed into v.
  std::span<const double> grad(Var v) const;
  /// Gradient accumulator for node id, allocated zeroed on first use.
  std::span<double> grad_buffer(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node on the tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  /// Number of recorded operations replayed by the last backward call.
  std::size_t last_backward_visits() const { return visits_; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_op = false;

    const Tensor& value() const { return borrowed ? *borrowed : owned; }
  };

  Var push(Node node);
  void check(Var v) const;

  std::deque<Node> nodes_;  // stable references across push_back
  std::size_t visits_ = 0;
};

}  // namespace robust1d
