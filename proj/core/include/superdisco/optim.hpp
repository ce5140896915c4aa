#pragma once

#include <span>
#include <vector>

#include "superdisco/tensor.hpp"

namespace superdisco {

/// SGD with heavy-ball momentum: v <- momentum*v + grad; value <- value - lr*v.
/// Gradients are zeroed after every step.
class Sgd {
 public:
  Sgd(std::vector<Param*> params, double lr, double momentum);

  void step();
  void zero_grad();

  double lr() const noexcept { return lr_; }
  double momentum() const noexcept { return momentum_; }
  std::span<Param* const> params() const noexcept { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> velocity_;
  double lr_;
  double momentum_;
};

}  // namespace superdisco
