#include "superdisco/optim.hpp"

#include <cmath>

#include "superdisco/errors.hpp"

namespace superdisco {

Sgd::Sgd(std::vector<Param*> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be non-negative, got " + std::to_string(lr));
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  velocity_.reserve(params_.size());
  for (const Param* p : params_) velocity_.emplace_back(p->value.shape(), 0.0);
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    auto& v = velocity_[i].storage();
    auto& value = p.value.storage();
    const auto& g = p.grad.storage();
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = momentum_ * v[k] + g[k];
      value[k] -= lr_ * v[k];
    }
    p.zero_grad();
  }
}

void Sgd::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

}  // namespace superdisco
