#pragma once

#include <cstddef>
#include <span>

#include "superdisco/tape.hpp"

namespace superdisco::ops {

// Linear algebra
Var matmul(Var a, Var b);        // [m×k]·[k×n]
Var bmm(Var a, Var b);           // [B×m×k]·[B×k×n]
Var transpose(Var a);            // [m×n] -> [n×m]
Var reshape(Var a, Shape shape);

// Elementwise
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, Var s);    // s has a single element, broadcast to a
Var add_row(Var a, Var row);     // row [1×n] broadcast over rows of [m×n]
Var sigmoid(Var a);
Var relu(Var a);

// Reductions and losses
Var sum(Var a);
Var mean(Var a);
/// Softmax over the last axis, computed with max subtraction.
Var row_softmax(Var a);
/// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const int> labels);

// Pairwise similarity kernels
/// out(i,j) = sum_k w_k |x_ik - y_jk|. The subgradient of |.| at 0 is 0.
Var pairwise_weighted_l1(Var x, Var y, Var w);
/// out(i,j) = sum_k (x_ik - y_jk)^2.
Var pairwise_sq_dist(Var x, Var y);

// Graph plumbing
/// D^-1/2 (A + I) D^-1/2 with D the row-degree matrix of A + I. Accepts [n×n] or [B×n×n].
Var gcn_normalize(Var adjacency);
/// Per-sample adjacency [B×(C+1)×(C+1)]: entry (0,0) = self, row/column 0 = links[b], rest = base.
Var attach_adjacency(Var self, Var links, Var base);
/// Per-sample vertex stack [B×(C+1)×d]: row 0 = z[b], rows 1.. = vertices.
Var attach_vertices(Var z, Var vertices);
/// [B×n×d] -> [B×d], taking row r of every batch entry.
Var select_row(Var stacked, std::size_t r);
/// [[p, s], [sᵀ, c]].
Var block_adjacency(Var p, Var s, Var c);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
/// Row k = mean of the rows of x labelled k; every class must be present.
Var class_means(Var x, std::span<const int> labels, std::size_t num_classes);

}  // namespace superdisco::ops
