#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mail/numeric/tape.hpp"

namespace mail::numeric {

inline constexpr double kLeakySlope = 0.01;

// Differentiable primitives. All inputs must live on the same tape; shape
// errors raise Error(kShapeMismatch).

// y = x W^T + b. x is [in] or [n, in], W is [out, in], b (optional) is [out].
Var linear(Var x, Var weight, Var bias = {});
// Flattened concatenation of arbitrary tensors into a vector.
Var concat(std::span<const Var> xs);
// Column-wise concatenation of matrices with equal row counts.
Var concat_cols(std::span<const Var> xs);
// sum_i weights[i] * xs[i]; weights is a vector with one entry per x.
Var weighted_sum(std::span<const Var> xs, Var weights);
Var dot(Var x, Var y);
// [n, k] matrix times [k] vector -> [n].
Var matvec(Var m, Var v);
Var leaky_relu(Var x, double slope = kLeakySlope);
Var exp(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var add_n(std::span<const Var> xs);
Var reshape(Var x, Shape shape);
// -log softmax(scores)[target], computed with a max shift.
Var softmax_nll(Var scores, std::size_t target);

// Row-structured primitives used by the batched graph layer.
Var gather_rows(Var m, std::span<const std::size_t> rows);
Var row(Var m, std::size_t r);
Var broadcast_rows(Var v, std::size_t n);
Var add_row_broadcast(Var m, Var v);
// Exp-normalisation within each segment (softmax per neighbourhood).
Var segment_softmax(Var scores, std::span<const std::size_t> segment, std::size_t n_segments);
// Literal ratio normalisation a_i / sum_seg a_j. Ill-defined when a segment
// sums to zero; kept for study only.
Var segment_normalize(Var scores, std::span<const std::size_t> segment, std::size_t n_segments);
// out[s] = sum_{i: segment[i] = s} weights[i] * m[i].
Var segment_weighted_sum(Var m, Var weights, std::span<const std::size_t> segment, std::size_t n_segments);
// base with updates[j] added onto row rows[j].
Var scatter_add_rows(Var base, std::span<const std::size_t> rows, Var updates);
// base with row base_rows[j] replaced by src row src_rows[j]. Gradients of
// replaced rows route to src unchanged (identity mapping).
Var replace_rows(Var base, std::span<const std::size_t> base_rows, Var src,
                 std::span<const std::size_t> src_rows);

}  // namespace mail::numeric
