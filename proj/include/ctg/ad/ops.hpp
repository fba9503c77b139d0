// SPDX-License-Identifier: Apache-2.0
//
// Differentiable ops. Binary elementwise ops broadcast in the 2-D view: each
// operand's rows() must be 1 or the result's rows, and likewise for cols().
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctg/ad/tensor.hpp"

namespace ctg::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
// Rejects any entry <= 0.
Tensor log(const Tensor& a);

// softmax(v / tau) along the last axis; tau must be positive and finite.
Tensor softmax(const Tensor& a, double tau = 1.0);
// log softmax(v / tau) along the last axis, via max subtraction.
Tensor log_softmax(const Tensor& a, double tau = 1.0);

// axis 0 stacks rows, axis 1 (or -1) joins along the last axis. 2-D view.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum along the last axis: [r, c] -> [r, 1].
Tensor sum_cols(const Tensor& a);

// Rows of `table` selected by `ids`: [V,E] -> [ids.size(), E].
Tensor row_gather(const Tensor& table, std::span<const int> ids);

// Sliding windows over a time-major sequence batch. `x` holds steps*batch rows
// (row t*batch + b). Output row p*batch + b concatenates input rows
// p..p+window-1 of sequence b; rows at or past lengths[b] read as zeros.
Tensor unfold_windows(const Tensor& x, std::size_t steps, std::size_t batch, std::size_t window,
                      std::span<const std::size_t> lengths);

// Max over time of a time-major [steps*batch, F] tensor, restricted to
// positions p < lengths[b]. Result is [batch, F].
Tensor masked_max_over_time(const Tensor& x, std::size_t steps, std::size_t batch,
                            std::span<const std::size_t> lengths);

// Constant one-hot rows: [ids.size(), depth].
Tensor one_hot(std::span<const int> ids, std::size_t depth);

}  // namespace ctg::ad
