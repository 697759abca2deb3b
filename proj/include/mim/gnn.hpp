#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mim/attention.hpp"
#include "mim/ops.hpp"

namespace mim {

// Six gated layers over the attention graph; top-k pooling after the first
// three layers; mean/max/attention global pools concatenated into the 96-dim
// graph embedding.
struct GnnConfig {
    std::size_t layers = 6;
    std::size_t hidden_dim = 24;
    std::array<double, 3> topk_ratios{0.8, 0.8, 0.3}; // after layers 1..3
    std::size_t mean_pool_dim = 24;
    std::size_t max_pool_dim = 24;
    std::size_t attn_pool_dim = 48;

    std::size_t pooled_dim() const { return mean_pool_dim + max_pool_dim + attn_pool_dim; }
    void validate() const;
    bool operator==(const GnnConfig&) const = default;
};

// One gated layer: GRU cell over aggregated messages, per-layer weights.
struct GgnnLayerParams {
    Tensor msg_weight;  // [hidden x hidden]
    Tensor msg_bias;    // [hidden]
    Tensor update_w;    // [hidden x hidden], input side of the update gate
    Tensor update_u;    // [hidden x hidden], state side
    Tensor update_b;    // [hidden]
    Tensor reset_w;     // same layout for the reset gate
    Tensor reset_u;
    Tensor reset_b;
    Tensor cand_w;      // candidate state
    Tensor cand_u;
    Tensor cand_b;
};

struct TopkParams {
    Tensor score_vector; // [hidden x 1]
};

struct GlobalPoolParams {
    Tensor gate_weight; // [hidden x 1]
    Tensor gate_bias;   // [1]
    Tensor proj_weight; // [hidden x attn_pool_dim]
};

struct GnnParams {
    std::vector<GgnnLayerParams> layers; // size GnnConfig::layers
    std::array<TopkParams, 3> topk;
    GlobalPoolParams pool;
};

// Node scores and the selected node subset of one top-k step.
struct TopkSelection {
    std::vector<double> scores;        // per input node, normalized projection
    std::vector<std::size_t> kept;     // positions into the input graph, ascending
    std::size_t k = 0;
};

// Pure selection rule: keep the ceil(ratio*n) highest-scoring positions,
// ties broken toward the lower position; result sorted ascending.
std::vector<std::size_t> topk_select(const std::vector<double>& scores, double ratio);

// Messages m_v = sum_u adjacency[u][v] * (W h_u) + b, then a GRU cell
// h'_v = (1 - z) h_v + z * cand(m_v, r * h_v). Same node set, new features.
GraphSample ggnn_layer(Tape& tape, const GnnConfig& cfg, const GgnnLayerParams& params,
                       const GraphSample& g);

// Score-gated node selection; adjacency restricted to kept rows/columns
// without renormalization; node_ids subset preserved.
GraphSample topk_pool(Tape& tape, const GnnConfig& cfg, const TopkParams& params,
                      const GraphSample& g, double ratio, TopkSelection* selection = nullptr);

// concat(mean over nodes, max over nodes, gated attention sum) -> [96].
Tensor global_pool(Tape& tape, const GnnConfig& cfg, const GlobalPoolParams& params,
                   const GraphSample& g);

// layer1 -> pool(.8) -> layer2 -> pool(.8) -> layer3 -> pool(.3)
// -> layer4 -> layer5 -> layer6 -> global pool.
Tensor gnn_forward(Tape& tape, const GnnConfig& cfg, const GnnParams& params,
                   const GraphSample& g);

} // namespace mim
