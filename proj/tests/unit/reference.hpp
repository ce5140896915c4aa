#pragma once

// Straightforward loop implementations of the graph equations, written without the tape or any
// library op, used as oracles.

#include <cmath>
#include <vector>

#include "superdisco/graph.hpp"
#include "superdisco/meta.hpp"

namespace superdisco::reference {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Tensor to_tensor(const Matrix& m) {
  Tensor t({m.size(), m.front().size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// sigma(sum_k w_k |a_ik - b_jk| / scale + bias)
inline Matrix similarity(const Matrix& a, const Matrix& b, const std::vector<double>& w, double bias, double scale) {
  Matrix out(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::fabs(a[i][k] - b[j][k]);
      out[i][j] = sigmoid(s / scale + bias);
    }
  }
  return out;
}

/// One GCN layer per weight: H <- D^-1/2 (A + I) D^-1/2 H W, ReLU between layers.
inline Matrix message_pass(const Matrix& a, Matrix h, const std::vector<Matrix>& layers) {
  const std::size_t n = a.size();
  std::vector<double> deg(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const Matrix& w = layers[m];
    Matrix mixed(n, std::vector<double>(h[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double coef = (a[i][j] + (i == j ? 1.0 : 0.0)) / std::sqrt(deg[i] * deg[j]);
        for (std::size_t k = 0; k < h[0].size(); ++k) mixed[i][k] += coef * h[j][k];
      }
    Matrix next(n, std::vector<double>(w[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < w[0].size(); ++o) {
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) s += mixed[i][k] * w[k][o];
        next[i][o] = (m + 1 < layers.size() && s < 0.0) ? 0.0 : s;
      }
    h = std::move(next);
  }
  return h;
}

inline std::vector<Matrix> layer_matrices(const std::vector<Param>& layers) {
  std::vector<Matrix> out;
  for (const auto& p : layers) out.push_back(to_matrix(p.value));
  return out;
}

/// Attached graph of one sample to a level with explicit vertices and super-class edges.
inline Matrix attach_and_pass(const GraphLevel& lv, const Matrix& vertices, const Matrix& edges,
                              const std::vector<double>& z) {
  const std::size_t c = vertices.size();
  const std::vector<double> wr(lv.attach_weight.value.data().begin(), lv.attach_weight.value.data().end());
  const Matrix links = similarity(Matrix{z}, vertices, wr, lv.attach_bias.value[0], lv.attach_scale);
  Matrix a(c + 1, std::vector<double>(c + 1));
  a[0][0] = sigmoid(lv.attach_bias.value[0]);
  for (std::size_t j = 0; j < c; ++j) {
    a[0][j + 1] = links[0][j];
    a[j + 1][0] = links[0][j];
    for (std::size_t i = 0; i < c; ++i) a[i + 1][j + 1] = edges[i][j];
  }
  Matrix h{z};
  h.insert(h.end(), vertices.begin(), vertices.end());
  return message_pass(a, h, layer_matrices(lv.layers));
}

inline Matrix level_edges(const GraphLevel& lv, const Matrix& vertices) {
  const std::vector<double> wc(lv.edge_weight.value.data().begin(), lv.edge_weight.value.data().end());
  return similarity(vertices, vertices, wc, lv.edge_bias.value[0], lv.edge_scale);
}

/// Refined feature of one sample through every level.
inline std::vector<double> refine(const SuperClassGraph& graph, std::vector<double> z) {
  for (std::size_t l = 0; l < graph.num_levels(); ++l) {
    const GraphLevel& lv = graph.level(l);
    const Matrix h = to_matrix(lv.vertices.value);
    z = attach_and_pass(lv, h, level_edges(lv, h), z)[0];
  }
  return z;
}

/// Softmax over j of -||c_i - h_j||^2 / (2 scale^2).
inline Matrix links(const Matrix& protos, const Matrix& vertices, double scale) {
  Matrix out(protos.size(), std::vector<double>(vertices.size()));
  for (std::size_t i = 0; i < protos.size(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < vertices.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < protos[i].size(); ++k) sq += (protos[i][k] - vertices[j][k]) * (protos[i][k] - vertices[j][k]);
      out[i][j] = std::exp(-sq / (2.0 * scale * scale));
      total += out[i][j];
    }
    for (auto& v : out[i]) v /= total;
  }
  return out;
}

/// Refined feature of one sample under the prototype-guided variant.
inline std::vector<double> meta_refine(const SuperClassGraph& graph, const MetaParams& meta, Matrix protos,
                                       std::vector<double> z) {
  const std::vector<double> wp(meta.proto_weight.value.data().begin(), meta.proto_weight.value.data().end());
  for (std::size_t l = 0; l < graph.num_levels(); ++l) {
    const GraphLevel& lv = graph.level(l);
    const Matrix h = to_matrix(lv.vertices.value);
    const Matrix ap = similarity(protos, protos, wp, meta.proto_bias.value[0], meta.proto_scale);
    const Matrix as = links(protos, h, meta.link_scales[l]);
    const Matrix ac = level_edges(lv, h);
    const std::size_t k = protos.size(), c = h.size();
    Matrix a(k + c, std::vector<double>(k + c));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) a[i][j] = ap[i][j];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < c; ++j) a[i][k + j] = a[k + j][i] = as[i][j];
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) a[k + i][k + j] = ac[i][j];
    Matrix m = protos;
    m.insert(m.end(), h.begin(), h.end());
    const Matrix out = message_pass(a, m, layer_matrices(meta.layers[l]));
    protos.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k));
    const Matrix activations(out.begin() + static_cast<std::ptrdiff_t>(k), out.end());
    z = attach_and_pass(lv, activations, ac, z)[0];
  }
  return z;
}

}  // namespace superdisco::reference
