#include "superdisco/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "superdisco/errors.hpp"

namespace superdisco {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be positive");
  Tensor grad(x.shape(), 0.0);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + eps;
    const double up = f(probe);
    probe[i] = original - eps;
    const double down = f(probe);
    probe[i] = original;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  if (a.shape() != b.shape()) throw DimensionError("relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < floor) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace superdisco
