#pragma once

#include "mim/ops.hpp"

namespace mim {

// Dot-product critic over a batch of paired embeddings: S = C Y^T, where row
// alignment defines the positive pairs and every other row in the batch is a
// negative.
Tensor critic_scores(Tape& tape, const Tensor& c, const Tensor& y);

// Contrastive loss over the score matrix:
//   L = -sum_i log( exp S[i][i] / sum_j exp S[i][j] )
// computed via row-wise log-softmax with max subtraction. Total, unaveraged.
Tensor infonce_loss(Tape& tape, const Tensor& scores);

// Per-sample mutual-information estimate log N - L/N (diagnostic only).
double mi_lower_bound(double loss, std::size_t n);

} // namespace mim
