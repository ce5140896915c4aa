#pragma once

#include <functional>

#include "superdisco/tensor.hpp"

namespace superdisco {

/// Central-difference gradient of a scalar function: (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double eps = 1e-6);

/// ||a - b|| / max(||a||, ||b||), or 0 when both are (numerically) zero.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8);

}  // namespace superdisco
