#include "mim/gnn.hpp"

#include <algorithm>
#include <cmath>

namespace mim {

void GnnConfig::validate() const {
    if (layers == 0 || hidden_dim == 0) {
        throw ConfigError("gnn: layers and hidden_dim must be positive");
    }
    if (layers < topk_ratios.size()) {
        throw ConfigError("gnn: need at least " + std::to_string(topk_ratios.size()) +
                          " layers for the pooling schedule");
    }
    for (double r : topk_ratios) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw ConfigError("gnn: topk ratio must be in (0,1], got " + std::to_string(r));
        }
    }
}

std::vector<std::size_t> topk_select(const std::vector<double>& scores, double ratio) {
    if (scores.empty()) throw ContractError("topk_select: empty graph");
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ContractError("topk_select: ratio must be in (0,1], got " + std::to_string(ratio));
    }
    const std::size_t n = scores.size();
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b]; // stable keeps the lower index first on ties
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

GraphSample ggnn_layer(Tape& tape, const GnnConfig& cfg, const GgnnLayerParams& params,
                       const GraphSample& g) {
    if (g.node_features.rank() != 2 || g.node_features.cols() != cfg.hidden_dim) {
        throw ShapeError("ggnn_layer: expected [n x " + std::to_string(cfg.hidden_dim) +
                         "] features, got " + shape_str(g.node_features.shape()));
    }
    const Tensor& h = g.node_features;
    // m = A^T (h W) + b : column v of A collects the weights of edges into v
    Tensor hw = matmul(tape, h, params.msg_weight);
    Tensor msg = add_bias(tape, matmul_tn(tape, g.adjacency, hw), params.msg_bias);

    Tensor z = sigmoid(tape, add_bias(tape,
        add(tape, matmul(tape, msg, params.update_w), matmul(tape, h, params.update_u)),
        params.update_b));
    Tensor r = sigmoid(tape, add_bias(tape,
        add(tape, matmul(tape, msg, params.reset_w), matmul(tape, h, params.reset_u)),
        params.reset_b));
    Tensor cand = tanh(tape, add_bias(tape,
        add(tape, matmul(tape, msg, params.cand_w),
            matmul(tape, mul(tape, r, h), params.cand_u)),
        params.cand_b));

    // h' = (1 - z) h + z cand, written as h + z (cand - h)
    Tensor h_new = add(tape, h, mul(tape, z, sub(tape, cand, h)));

    GraphSample out;
    out.node_features = h_new;
    out.adjacency = g.adjacency;
    out.node_ids = g.node_ids;
    return out;
}

GraphSample topk_pool(Tape& tape, const GnnConfig& cfg, const TopkParams& params,
                      const GraphSample& g, double ratio, TopkSelection* selection) {
    if (g.node_count() == 0) throw ContractError("topk_pool: empty graph");
    if (g.node_features.rank() != 2 || g.node_features.cols() != cfg.hidden_dim) {
        throw ShapeError("topk_pool: bad feature shape " + shape_str(g.node_features.shape()));
    }
    // score_v = (h_v . p) / ||p||
    Tensor raw = matmul(tape, g.node_features, params.score_vector); // [n x 1]
    Tensor norm = l2_norm(tape, params.score_vector);
    Tensor scores = divide(tape, raw, norm);

    std::vector<double> score_values(scores.values().begin(), scores.values().end());
    std::vector<std::size_t> kept = topk_select(score_values, ratio);

    if (selection) {
        selection->scores = score_values;
        selection->kept = kept;
        selection->k = kept.size();
    }

    Tensor h_kept = gather_rows(tape, g.node_features, kept);
    Tensor s_kept = gather_rows(tape, scores, kept); // [k x 1]
    Tensor gated = scale_rows(tape, h_kept, tanh(tape, s_kept));

    GraphSample out;
    out.node_features = gated;
    out.adjacency = gather_submatrix(tape, g.adjacency, kept);
    out.node_ids.reserve(kept.size());
    for (std::size_t pos : kept) out.node_ids.push_back(g.node_ids[pos]);
    return out;
}

Tensor global_pool(Tape& tape, const GnnConfig& cfg, const GlobalPoolParams& params,
                   const GraphSample& g) {
    if (g.node_count() == 0) throw ContractError("global_pool: empty graph");
    const Tensor& h = g.node_features;
    Tensor mean_v = mean_over_axis(tape, h, 0); // [hidden]
    Tensor max_v = max_over_axis(tape, h, 0);   // [hidden]
    Tensor gate = sigmoid(tape, add_bias(tape, matmul(tape, h, params.gate_weight),
                                         params.gate_bias)); // [n x 1]
    Tensor proj = matmul(tape, h, params.proj_weight);       // [n x attn_pool_dim]
    Tensor attn = sum_over_axis(tape, scale_rows(tape, proj, gate), 0);
    const Tensor parts[] = {mean_v, max_v, attn};
    Tensor c = concat(tape, parts);
    if (c.size() != cfg.pooled_dim()) {
        throw ShapeError("global_pool: pooled size " + std::to_string(c.size()) +
                         " does not match config " + std::to_string(cfg.pooled_dim()));
    }
    return c;
}

Tensor gnn_forward(Tape& tape, const GnnConfig& cfg, const GnnParams& params,
                   const GraphSample& g) {
    if (params.layers.size() != cfg.layers) {
        throw ConfigError("gnn_forward: " + std::to_string(params.layers.size()) +
                          " layer parameter sets for " + std::to_string(cfg.layers) +
                          " layers");
    }
    GraphSample cur = g;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        cur = ggnn_layer(tape, cfg, params.layers[i], cur);
        if (i < cfg.topk_ratios.size()) {
            cur = topk_pool(tape, cfg, params.topk[i], cur, cfg.topk_ratios[i]);
        }
    }
    return global_pool(tape, cfg, params.pool, cur);
}

} // namespace mim
