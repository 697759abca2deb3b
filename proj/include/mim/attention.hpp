#pragma once

#include <cstddef>
#include <vector>

#include "mim/ops.hpp"

namespace mim {

// Per-subject graph: node features from attended values, dense adjacency from
// the row-softmaxed attention weights, and the surviving original region ids
// (pooling keeps subsets).
struct GraphSample {
    Tensor node_features; // [n x node_dim]
    Tensor adjacency;     // [n x n], rows sum to 1 at construction
    std::vector<std::size_t> node_ids;

    std::size_t node_count() const { return node_ids.size(); }
};

struct AttentionConfig {
    std::size_t input_dim = 64;
    std::size_t node_dim = 24; // key/query/value width, single head

    bool operator==(const AttentionConfig&) const = default;
};

struct AttentionParams {
    Tensor wq; // [input_dim x node_dim]
    Tensor wk; // [input_dim x node_dim]
    Tensor wv; // [input_dim x node_dim]
};

// Single-head scaled dot-product self-attention over region embeddings H
// [R x input_dim]: adjacency = softmax_rows(Q K^T / sqrt(node_dim)),
// node_features = adjacency * V.
GraphSample build_graph(Tape& tape, const AttentionConfig& cfg,
                        const AttentionParams& params, const Tensor& H);

} // namespace mim
