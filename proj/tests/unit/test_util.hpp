#pragma once

#include <functional>
#include <random>

#include "superdisco/gradcheck.hpp"
#include "superdisco/tape.hpp"

namespace superdisco::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

/// Relative error between the tape gradient of `build` w.r.t. `p` and central differences.
/// `build` must bind `p` with tape.param().
inline double param_grad_error(const std::function<Var(Tape&)>& build, Param& p) {
  p.zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  const Tensor analytic = p.grad;
  const Tensor saved = p.value;
  auto f = [&](const Tensor& v) {
    p.value = v;
    Tape tape;
    const double out = build(tape).value().item();
    p.value = saved;
    return out;
  };
  const Tensor numeric = finite_difference_gradient(f, saved);
  p.zero_grad();
  return relative_error(analytic, numeric);
}

/// Same for a free input tensor `x`; `build` receives the tape and x bound as a variable.
inline double input_grad_error(const std::function<Var(Tape&, Var)>& build, const Tensor& x) {
  Tape tape;
  Var xv = tape.variable(x);
  Var loss = build(tape, xv);
  tape.backward(loss);
  const Tensor analytic = tape.grad(xv);
  auto f = [&](const Tensor& v) {
    Tape t;
    return build(t, t.constant(v)).value().item();
  };
  return relative_error(analytic, finite_difference_gradient(f, x));
}

}  // namespace superdisco::testing
