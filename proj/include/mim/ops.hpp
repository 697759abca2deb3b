#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mim/tape.hpp"
#include "mim/tensor.hpp"

namespace mim {

// Differentiable primitives. Every op computes its forward result and, when
// the tape is recording and an input requires gradients, pushes an exact
// backward rule. Shapes are explicit; the only broadcast is the bias add.

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// [m x k] * [n x k]^T -> [m x n]
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);
// [k x m]^T * [k x n] -> [m x n]
Tensor matmul_tn(Tape& tape, const Tensor& a, const Tensor& b);

// input [c_in x l], kernel [c_out x c_in x k], bias [c_out]; no padding,
// l_out = (l - k) / stride + 1.
Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, std::size_t stride);

Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);     // same shape
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);     // same shape
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);     // elementwise
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor add_scalar(Tape& tape, const Tensor& x, double value);

// matrix [n x d] + bias [d], broadcast over rows.
Tensor add_bias(Tape& tape, const Tensor& matrix, const Tensor& bias);

// 1-d concatenation in argument order.
Tensor concat(Tape& tape, std::span<const Tensor> parts);
// 1-d slice [begin, end).
Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);

Tensor sum(Tape& tape, const Tensor& x);   // all elements -> scalar
Tensor mean(Tape& tape, const Tensor& x);  // all elements -> scalar

// 2-d reductions along one axis; axis 0 collapses rows -> [cols],
// axis 1 collapses columns -> [rows].
Tensor sum_over_axis(Tape& tape, const Tensor& m, std::size_t axis);
Tensor mean_over_axis(Tape& tape, const Tensor& m, std::size_t axis);
// Gradient routes to the first maximal index (ties -> lowest index).
Tensor max_over_axis(Tape& tape, const Tensor& m, std::size_t axis);

// Row-wise softmax / log-softmax with max subtraction.
Tensor softmax_rows(Tape& tape, const Tensor& m);
Tensor log_softmax_rows(Tape& tape, const Tensor& m);

// Same data, new shape (element count must match).
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// k vectors of equal length d -> [k x d].
Tensor stack_rows(Tape& tape, std::span<const Tensor> rows);

// Row selection [n x d] -> [|idx| x d]; backward scatter-adds.
Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<std::size_t>& idx);
// Principal submatrix [n x n] -> [|idx| x |idx|] (same index set on rows and
// columns).
Tensor gather_submatrix(Tape& tape, const Tensor& m, const std::vector<std::size_t>& idx);

// out[i][j] = m[i][j] * col[i]; col is [n] or [n x 1].
Tensor scale_rows(Tape& tape, const Tensor& m, const Tensor& col);

Tensor l2_norm(Tape& tape, const Tensor& x);                  // -> scalar
Tensor divide(Tape& tape, const Tensor& x, const Tensor& denom); // denom scalar

// Sum of the main diagonal of a square matrix -> scalar.
Tensor diag_sum(Tape& tape, const Tensor& m);

// Negative log likelihood over row-wise log-probabilities:
// -sum_i log_probs[i][labels[i]], divided by n when mean is set.
Tensor nll_loss(Tape& tape, const Tensor& log_probs,
                const std::vector<int>& labels, bool take_mean);

} // namespace mim
