#include "superdisco/tape.hpp"

#include "superdisco/errors.hpp"

namespace superdisco {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite constant recorded on tape");
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  if (!p.value.all_finite()) throw NumericError("parameter '" + p.name + "' holds non-finite values");
  nodes_.push_back(Node{p.value, {}, true, {}, &p});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError("primitive produced non-finite values of shape " + shape_string(value.shape()));
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw ContractError("operands recorded on different tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

const Tensor& Tape::grad(Var v) const {
  static const Tensor kEmpty;
  return v.id < nodes_.size() ? nodes_[v.id].grad : kEmpty;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ContractError("backward root belongs to another tape");
  if (consumed_) throw ContractError("tape already consumed by a previous backward()");
  if (nodes_[root.id].value.size() != 1) {
    throw ContractError("backward() requires a scalar root, got shape " + shape_string(nodes_[root.id].value.shape()));
  }
  consumed_ = true;
  if (!nodes_[root.id].requires_grad) return;
  grad(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param != nullptr) {
      auto& dst = node.param->grad.storage();
      const auto& src = node.grad.storage();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace superdisco
