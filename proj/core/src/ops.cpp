#include "superdisco/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "superdisco/errors.hpp"

namespace superdisco::ops {

namespace {

[[noreturn]] void dim_error(const std::string& op, const Shape& a, const Shape& b) {
  throw DimensionError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(op + ": expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

// c[m×n] += a[m×k] · b[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[m×k] += g[m×n] · b[k×n]ᵀ
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c[k×n] += a[m×k]ᵀ · g[m×n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

template <typename F>
Var unary(Var a, Tensor out, F&& local_grad) {
  return a.tape->record(std::move(out), {a}, [a, local_grad](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    const auto& x = t.value(a.id).storage();
    const auto& y = t.value(self).storage();
    auto& ga = t.grad(a.id).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * local_grad(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", av, 2);
  require_rank("matmul", bv, 2);
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) dim_error("matmul", av.shape(), bv.shape());
  Tensor out({m, n});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    if (t.requires_grad(a.id)) gemm_nt(g, t.value(b.id).data().data(), t.grad(a.id).data().data(), m, n, k);
    if (t.requires_grad(b.id)) gemm_tn(t.value(a.id).data().data(), g, t.grad(b.id).data().data(), m, k, n);
  });
}

Var bmm(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("bmm", av, 3);
  require_rank("bmm", bv, 3);
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  if (bv.dim(0) != batch || bv.dim(1) != k) dim_error("bmm", av.shape(), bv.shape());
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(av.data().data() + s * m * k, bv.data().data() + s * k * n, out.data().data() + s * m * n, m, k, n);
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, batch, m, k, n](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    const bool ga = t.requires_grad(a.id), gb = t.requires_grad(b.id);
    for (std::size_t s = 0; s < batch; ++s) {
      if (ga) {
        gemm_nt(g + s * m * n, t.value(b.id).data().data() + s * k * n, t.grad(a.id).data().data() + s * m * k, m, n,
                k);
      }
      if (gb) {
        gemm_tn(t.value(a.id).data().data() + s * m * k, g + s * m * n, t.grad(b.id).data().data() + s * k * n, m, k,
                n);
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank("transpose", av, 2);
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += g(j, i);
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) dim_error("reshape", a.shape(), shape);
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(a.id).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var add(Var a, Var b) {
  if (a.shape() != b.shape()) dim_error("add", a.shape(), b.shape());
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    for (Var v : {a, b}) {
      if (!t.requires_grad(v.id)) continue;
      auto& gv = t.grad(v.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  if (a.shape() != b.shape()) dim_error("sub", a.shape(), b.shape());
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    if (t.requires_grad(a.id)) {
      auto& ga = t.grad(a.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.grad(b.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  if (a.shape() != b.shape()) dim_error("mul", a.shape(), b.shape());
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    const auto& av = t.value(a.id).storage();
    const auto& bv = t.value(b.id).storage();
    if (t.requires_grad(a.id)) {
      auto& ga = t.grad(a.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.grad(b.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= factor;
  return unary(a, std::move(out), [factor](double, double) { return factor; });
}

Var add_scalar(Var a, Var s) {
  if (s.value().size() != 1) throw DimensionError("add_scalar: broadcast operand must hold one value");
  Tensor out = a.value();
  const double sv = s.value()[0];
  for (auto& v : out.storage()) v += sv;
  return a.tape->record(std::move(out), {a, s}, [a, s](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    if (t.requires_grad(a.id)) {
      auto& ga = t.grad(a.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(s.id)) {
      double acc = 0.0;
      for (double gi : g) acc += gi;
      t.grad(s.id)[0] += acc;
    }
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  require_rank("add_row", av, 2);
  const std::size_t m = av.dim(0), n = av.dim(1);
  if (row.value().size() != n) dim_error("add_row", av.shape(), row.shape());
  Tensor out = av;
  const auto& rv = row.value().storage();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += rv[j];
  return a.tape->record(std::move(out), {a, row}, [a, row, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a.id)) {
      auto& ga = t.grad(a.id).storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(row.id)) {
      auto& gr = t.grad(row.id).storage();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g(i, j);
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v = stable_sigmoid(v);
  return unary(a, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return unary(a, std::move(out), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().storage()) acc += v;
  return a.tape->record(Tensor::scalar(acc), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(a.id).storage()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_softmax(Var a) {
  const Tensor& av = a.value();
  const std::size_t c = av.cols();
  const std::size_t r = av.size() / c;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data().data() + i * c;
    double* y = out.data().data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= total;
  }
  return a.tape->record(std::move(out), {a}, [a, r, c](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    const double* y = t.value(self).data().data();
    double* ga = t.grad(a.id).data().data();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  require_rank("cross_entropy", lv, 2);
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  std::vector<int> owned(labels.begin(), labels.end());
  for (int y : owned) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw IndexError("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* x = lv.data().data() + i * classes;
    const std::size_t jmax = static_cast<std::size_t>(std::max_element(x, x + classes) - x);
    const double mx = x[jmax];
    double rest = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j != jmax) rest += std::exp(x[j] - mx);
    }
    // log-sum-exp minus the label logit; log1p keeps precision near a confident prediction.
    total += (mx - x[owned[i]]) + std::log1p(rest);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(batch));
  return logits.tape->record(std::move(out), {logits},
                             [logits, owned = std::move(owned), batch, classes](Tape& t, std::size_t self) {
                               const double g = t.grad(self)[0] / static_cast<double>(batch);
                               const double* x = t.value(logits.id).data().data();
                               double* gl = t.grad(logits.id).data().data();
                               for (std::size_t i = 0; i < batch; ++i) {
                                 const double* xi = x + i * classes;
                                 const double mx = *std::max_element(xi, xi + classes);
                                 double total = 0.0;
                                 for (std::size_t j = 0; j < classes; ++j) total += std::exp(xi[j] - mx);
                                 for (std::size_t j = 0; j < classes; ++j) {
                                   const double p = std::exp(xi[j] - mx) / total;
                                   gl[i * classes + j] += g * (p - (static_cast<int>(j) == owned[i] ? 1.0 : 0.0));
                                 }
                               }
                             });
}

Var pairwise_weighted_l1(Var x, Var y, Var w) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_rank("pairwise_weighted_l1", xv, 2);
  require_rank("pairwise_weighted_l1", yv, 2);
  const std::size_t n = xv.dim(0), m = yv.dim(0), d = xv.dim(1);
  if (yv.dim(1) != d) dim_error("pairwise_weighted_l1", xv.shape(), yv.shape());
  if (w.value().size() != d) dim_error("pairwise_weighted_l1", xv.shape(), w.shape());
  const auto& wv = w.value().storage();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = xv.data().data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* yj = yv.data().data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += wv[k] * std::abs(xi[k] - yj[k]);
      out(i, j) = acc;
    }
  }
  return x.tape->record(std::move(out), {x, y, w}, [x, y, w, n, m, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const double* xv = t.value(x.id).data().data();
    const double* yv = t.value(y.id).data().data();
    const auto& wv = t.value(w.id).storage();
    const bool gx = t.requires_grad(x.id), gy = t.requires_grad(y.id), gw = t.requires_grad(w.id);
    double* dx = gx ? t.grad(x.id).data().data() : nullptr;
    double* dy = gy ? t.grad(y.id).data().data() : nullptr;
    double* dw = gw ? t.grad(w.id).data().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = xv[i * d + k] - yv[j * d + k];
          const double s = sign0(diff) * wv[k] * gij;
          if (dx) dx[i * d + k] += s;
          if (dy) dy[j * d + k] -= s;
          if (dw) dw[k] += gij * std::abs(diff);
        }
      }
    }
  });
}

Var pairwise_sq_dist(Var x, Var y) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_rank("pairwise_sq_dist", xv, 2);
  require_rank("pairwise_sq_dist", yv, 2);
  const std::size_t n = xv.dim(0), m = yv.dim(0), d = xv.dim(1);
  if (yv.dim(1) != d) dim_error("pairwise_sq_dist", xv.shape(), yv.shape());
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = xv(i, k) - yv(j, k);
        acc += diff * diff;
      }
      out(i, j) = acc;
    }
  }
  return x.tape->record(std::move(out), {x, y}, [x, y, n, m, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    const Tensor& yv = t.value(y.id);
    const bool gx = t.requires_grad(x.id), gy = t.requires_grad(y.id);
    Tensor* dx = gx ? &t.grad(x.id) : nullptr;
    Tensor* dy = gy ? &t.grad(y.id) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = 2.0 * g(i, j);
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = xv(i, k) - yv(j, k);
          if (dx) (*dx)(i, k) += gij * diff;
          if (dy) (*dy)(j, k) -= gij * diff;
        }
      }
    }
  });
}

Var gcn_normalize(Var adjacency) {
  const Tensor& av = adjacency.value();
  if (av.rank() != 2 && av.rank() != 3) throw DimensionError("gcn_normalize: expected [n×n] or [B×n×n]");
  const std::size_t n = av.shape().back();
  if (av.shape()[av.rank() - 2] != n) dim_error("gcn_normalize", av.shape(), av.shape());
  const std::size_t batch = av.size() / (n * n);
  Tensor out(av.shape());
  Tensor inv_sqrt_deg({batch, n});
  for (std::size_t s = 0; s < batch; ++s) {
    const double* a = av.data().data() + s * n * n;
    double* o = out.data().data() + s * n * n;
    double* r = inv_sqrt_deg.data().data() + s * n;
    for (std::size_t i = 0; i < n; ++i) {
      double deg = 1.0;
      for (std::size_t j = 0; j < n; ++j) deg += a[i * n + j];
      if (!(deg > 0.0)) throw NumericError("gcn_normalize: non-positive vertex degree");
      r[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) o[i * n + j] = (a[i * n + j] + (i == j ? 1.0 : 0.0)) * r[i] * r[j];
  }
  return adjacency.tape->record(
      std::move(out), {adjacency},
      [adjacency, batch, n, r_all = std::move(inv_sqrt_deg)](Tape& t, std::size_t self) {
        const double* g = t.grad(self).data().data();
        const double* a = t.value(adjacency.id).data().data();
        double* ga = t.grad(adjacency.id).data().data();
        std::vector<double> d_deg(n);
        for (std::size_t s = 0; s < batch; ++s) {
          const std::size_t off = s * n * n;
          const double* r = r_all.data().data() + s * n;
          for (std::size_t i = 0; i < n; ++i) {
            double d_r = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
              d_r += g[off + i * n + l] * (a[off + i * n + l] + (i == l ? 1.0 : 0.0)) * r[l];
              d_r += g[off + l * n + i] * (a[off + l * n + i] + (i == l ? 1.0 : 0.0)) * r[l];
            }
            // dr/ddeg = -1/2 deg^-3/2 = -1/2 r^3
            d_deg[i] = -0.5 * r[i] * r[i] * r[i] * d_r;
          }
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[off + i * n + j] += g[off + i * n + j] * r[i] * r[j] + d_deg[i];
        }
      });
}

Var attach_adjacency(Var self_weight, Var links, Var base) {
  const Tensor& lv = links.value();
  const Tensor& bv = base.value();
  require_rank("attach_adjacency", lv, 2);
  require_rank("attach_adjacency", bv, 2);
  if (self_weight.value().size() != 1) throw DimensionError("attach_adjacency: self weight must be a single value");
  const std::size_t batch = lv.dim(0), c = lv.dim(1), n = c + 1;
  if (bv.dim(0) != c || bv.dim(1) != c) dim_error("attach_adjacency", lv.shape(), bv.shape());
  Tensor out({batch, n, n});
  const double sw = self_weight.value()[0];
  for (std::size_t b = 0; b < batch; ++b) {
    double* o = out.data().data() + b * n * n;
    o[0] = sw;
    for (std::size_t i = 0; i < c; ++i) {
      o[1 + i] = lv(b, i);
      o[(1 + i) * n] = lv(b, i);
      for (std::size_t j = 0; j < c; ++j) o[(1 + i) * n + 1 + j] = bv(i, j);
    }
  }
  return links.tape->record(std::move(out), {self_weight, links, base},
                            [self_weight, links, base, batch, c, n](Tape& t, std::size_t self) {
                              const double* g = t.grad(self).data().data();
                              const bool gs = t.requires_grad(self_weight.id);
                              const bool gl = t.requires_grad(links.id);
                              const bool gb = t.requires_grad(base.id);
                              for (std::size_t b = 0; b < batch; ++b) {
                                const double* gb_ = g + b * n * n;
                                if (gs) t.grad(self_weight.id)[0] += gb_[0];
                                for (std::size_t i = 0; i < c; ++i) {
                                  if (gl) t.grad(links.id)(b, i) += gb_[1 + i] + gb_[(1 + i) * n];
                                  if (gb) {
                                    Tensor& gbase = t.grad(base.id);
                                    for (std::size_t j = 0; j < c; ++j) gbase(i, j) += gb_[(1 + i) * n + 1 + j];
                                  }
                                }
                              }
                            });
}

Var attach_vertices(Var z, Var vertices) {
  const Tensor& zv = z.value();
  const Tensor& hv = vertices.value();
  require_rank("attach_vertices", zv, 2);
  require_rank("attach_vertices", hv, 2);
  const std::size_t batch = zv.dim(0), d = zv.dim(1), c = hv.dim(0), n = c + 1;
  if (hv.dim(1) != d) dim_error("attach_vertices", zv.shape(), hv.shape());
  Tensor out({batch, n, d});
  for (std::size_t b = 0; b < batch; ++b) {
    double* o = out.data().data() + b * n * d;
    std::copy_n(zv.data().data() + b * d, d, o);
    std::copy_n(hv.data().data(), c * d, o + d);
  }
  return z.tape->record(std::move(out), {z, vertices}, [z, vertices, batch, c, n, d](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    const bool gz = t.requires_grad(z.id), gh = t.requires_grad(vertices.id);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gb = g + b * n * d;
      if (gz) {
        double* dz = t.grad(z.id).data().data() + b * d;
        for (std::size_t k = 0; k < d; ++k) dz[k] += gb[k];
      }
      if (gh) {
        double* dh = t.grad(vertices.id).data().data();
        for (std::size_t k = 0; k < c * d; ++k) dh[k] += gb[d + k];
      }
    }
  });
}

Var select_row(Var stacked, std::size_t r) {
  const Tensor& sv = stacked.value();
  require_rank("select_row", sv, 3);
  const std::size_t batch = sv.dim(0), n = sv.dim(1), d = sv.dim(2);
  if (r >= n) throw IndexError("select_row: row " + std::to_string(r) + " out of range");
  Tensor out({batch, d});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(sv.data().data() + (b * n + r) * d, d, out.data().data() + b * d);
  return stacked.tape->record(std::move(out), {stacked}, [stacked, batch, n, d, r](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    double* gs = t.grad(stacked.id).data().data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < d; ++k) gs[(b * n + r) * d + k] += g[b * d + k];
  });
}

Var block_adjacency(Var p, Var s, Var c) {
  const Tensor& pv = p.value();
  const Tensor& sv = s.value();
  const Tensor& cv = c.value();
  require_rank("block_adjacency", pv, 2);
  require_rank("block_adjacency", sv, 2);
  require_rank("block_adjacency", cv, 2);
  const std::size_t k = pv.dim(0), m = cv.dim(0), n = k + m;
  if (pv.dim(1) != k || cv.dim(1) != m || sv.dim(0) != k || sv.dim(1) != m) {
    throw DimensionError("block_adjacency: blocks " + shape_string(pv.shape()) + ", " + shape_string(sv.shape()) +
                         ", " + shape_string(cv.shape()) + " do not tile a square matrix");
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = pv(i, j);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, k + j) = out(k + j, i) = sv(i, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(k + i, k + j) = cv(i, j);
  return p.tape->record(std::move(out), {p, s, c}, [p, s, c, k, m](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(p.id)) {
      Tensor& gp = t.grad(p.id);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) gp(i, j) += g(i, j);
    }
    if (t.requires_grad(s.id)) {
      Tensor& gs = t.grad(s.id);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < m; ++j) gs(i, j) += g(i, k + j) + g(k + j, i);
    }
    if (t.requires_grad(c.id)) {
      Tensor& gc = t.grad(c.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) gc(i, j) += g(k + i, k + j);
    }
  });
}

Var concat_rows(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("concat_rows", av, 2);
  require_rank("concat_rows", bv, 2);
  if (av.dim(1) != bv.dim(1)) dim_error("concat_rows", av.shape(), bv.shape());
  std::vector<double> data(av.storage());
  data.insert(data.end(), bv.storage().begin(), bv.storage().end());
  const std::size_t split = av.size();
  Tensor out({av.dim(0) + bv.dim(0), av.dim(1)}, std::move(data));
  return a.tape->record(std::move(out), {a, b}, [a, b, split](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    if (t.requires_grad(a.id)) {
      auto& ga = t.grad(a.id).storage();
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b.id)) {
      auto& gb = t.grad(b.id).storage();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank("slice_rows", av, 2);
  if (begin >= end || end > av.dim(0)) throw IndexError("slice_rows: invalid range");
  const std::size_t d = av.dim(1);
  Tensor out({end - begin, d},
             std::vector<double>(av.storage().begin() + static_cast<std::ptrdiff_t>(begin * d),
                                 av.storage().begin() + static_cast<std::ptrdiff_t>(end * d)));
  return a.tape->record(std::move(out), {a}, [a, begin, d](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(a.id).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * d + i] += g[i];
  });
}

Var class_means(Var x, std::span<const int> labels, std::size_t num_classes) {
  const Tensor& xv = x.value();
  require_rank("class_means", xv, 2);
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (labels.size() != n) throw DimensionError("class_means: label count does not match rows");
  std::vector<int> owned(labels.begin(), labels.end());
  std::vector<double> counts(num_classes, 0.0);
  for (int y : owned) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw IndexError("class_means: label out of range");
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0.0) throw DataError("class_means: class " + std::to_string(k) + " has no samples");
  }
  Tensor out({num_classes, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(owned[i]);
    for (std::size_t j = 0; j < d; ++j) out(k, j) += xv(i, j);
  }
  for (std::size_t k = 0; k < num_classes; ++k)
    for (std::size_t j = 0; j < d; ++j) out(k, j) /= counts[k];
  return x.tape->record(std::move(out), {x},
                        [x, owned = std::move(owned), counts = std::move(counts), n, d](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& gx = t.grad(x.id);
                          for (std::size_t i = 0; i < n; ++i) {
                            const auto k = static_cast<std::size_t>(owned[i]);
                            for (std::size_t j = 0; j < d; ++j) gx(i, j) += g(k, j) / counts[k];
                          }
                        });
}

}  // namespace superdisco::ops
