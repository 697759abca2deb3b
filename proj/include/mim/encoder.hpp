#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mim/ops.hpp"

namespace mim {

// Four conv layers with ReLU in between, then a linear layer down to the
// per-region embedding. Defaults reproduce the stack
// 160 -> 79 -> 76 -> 37 -> 37, flattened to 10*37 = 370, projected to 64.
struct EncoderConfig {
    std::size_t input_length = 160;
    std::array<std::size_t, 4> kernel_sizes{4, 4, 3, 1};
    std::array<std::size_t, 4> strides{2, 1, 2, 1};
    std::array<std::size_t, 4> channels{32, 64, 64, 10};
    std::size_t region_embed_dim = 64;

    // Output length after conv layer i (0-based, inclusive).
    std::size_t length_after(std::size_t layer) const;
    // channels.back() * final length.
    std::size_t flatten_size() const;
    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

struct ConvLayerParams {
    Tensor weight; // [c_out x c_in x k]
    Tensor bias;   // [c_out]
};

struct EncoderParams {
    std::array<ConvLayerParams, 4> conv;
    Tensor fc_weight; // [flatten x embed]
    Tensor fc_bias;   // [embed]
};

struct RegionEmbeddings {
    Tensor H;   // [R x embed], row i is region i's embedding
    Tensor h_f; // [R*embed], row-major flattening of H
};

// One region's time series (length input_length) -> embedding [embed].
Tensor encode_region(Tape& tape, const EncoderConfig& cfg, const EncoderParams& params,
                     const Tensor& series);

// Apply the shared encoder to every row of series [R x input_length].
RegionEmbeddings encode_subject(Tape& tape, const EncoderConfig& cfg,
                                const EncoderParams& params, const Tensor& series);

} // namespace mim
