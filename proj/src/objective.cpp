#include "mim/objective.hpp"

#include <cmath>

namespace mim {

Tensor critic_scores(Tape& tape, const Tensor& c, const Tensor& y) {
    if (c.rank() != 2 || y.rank() != 2 || c.cols() != y.cols()) {
        throw ShapeError("critic_scores: embedding widths disagree, " +
                         shape_str(c.shape()) + " vs " + shape_str(y.shape()));
    }
    if (c.rows() != y.rows()) {
        throw ShapeError("critic_scores: batch sizes disagree, " +
                         std::to_string(c.rows()) + " vs " + std::to_string(y.rows()));
    }
    return matmul_nt(tape, c, y);
}

Tensor infonce_loss(Tape& tape, const Tensor& scores) {
    if (scores.rank() != 2 || scores.rows() != scores.cols()) {
        throw ShapeError("infonce_loss: expected square score matrix, got " +
                         shape_str(scores.shape()));
    }
    for (double v : scores.values()) {
        if (!std::isfinite(v)) throw NumericError("infonce_loss: non-finite score");
    }
    Tensor log_probs = log_softmax_rows(tape, scores);
    return scale(tape, diag_sum(tape, log_probs), -1.0);
}

double mi_lower_bound(double loss, std::size_t n) {
    if (n == 0) throw ContractError("mi_lower_bound: empty batch");
    const double nn = static_cast<double>(n);
    return std::log(nn) - loss / nn;
}

} // namespace mim
