#include "mim/attention.hpp"

#include <cmath>
#include <numeric>

namespace mim {

GraphSample build_graph(Tape& tape, const AttentionConfig& cfg,
                        const AttentionParams& params, const Tensor& H) {
    if (H.rank() != 2 || H.cols() != cfg.input_dim) {
        throw ShapeError("build_graph: expected [R x " + std::to_string(cfg.input_dim) +
                         "] embeddings, got " + shape_str(H.shape()));
    }
    if (H.rows() < 2) {
        throw ContractError("build_graph: need at least 2 regions");
    }
    Tensor q = matmul(tape, H, params.wq);
    Tensor k = matmul(tape, H, params.wk);
    Tensor v = matmul(tape, H, params.wv);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.node_dim));
    Tensor logits = scale(tape, matmul_nt(tape, q, k), inv_sqrt_d);

    GraphSample g;
    g.adjacency = softmax_rows(tape, logits);
    g.node_features = matmul(tape, g.adjacency, v);
    g.node_ids.resize(H.rows());
    std::iota(g.node_ids.begin(), g.node_ids.end(), 0);
    return g;
}

} // namespace mim
