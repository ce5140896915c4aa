#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "superdisco/tensor.hpp"

namespace superdisco {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

/// Records primitive applications during a forward pass and replays them in
/// reverse to accumulate gradients. A tape supports exactly one backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is added into `param.grad` on backward().
  Var param(Param& param);
  /// Leaf tracked for gradient but not bound to a Param (read back via grad()).
  Var variable(Tensor value);

  /// Appends a node. `backward` is dropped when no input requires grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient slot of node `id`, allocated as zeros on first access.
  Tensor& grad(std::size_t id);
  const Tensor& grad(Var v) const;

  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace superdisco
