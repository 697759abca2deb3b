#include "mim/encoder.hpp"

#include <cmath>

namespace mim {

std::size_t EncoderConfig::length_after(std::size_t layer) const {
    std::size_t len = input_length;
    for (std::size_t i = 0; i <= layer; ++i) {
        if (len < kernel_sizes[i]) {
            throw ShapeError("encoder: length " + std::to_string(len) +
                             " shorter than kernel " + std::to_string(kernel_sizes[i]) +
                             " at conv layer " + std::to_string(i));
        }
        len = (len - kernel_sizes[i]) / strides[i] + 1;
    }
    return len;
}

std::size_t EncoderConfig::flatten_size() const {
    return channels.back() * length_after(3);
}

void EncoderConfig::validate() const {
    for (std::size_t i = 0; i < 4; ++i) {
        if (kernel_sizes[i] == 0 || strides[i] == 0 || channels[i] == 0) {
            throw ConfigError("encoder: kernel/stride/channel must be positive at layer " +
                              std::to_string(i));
        }
    }
    if (region_embed_dim == 0) throw ConfigError("encoder: embed dim must be positive");
    length_after(3); // throws if the stack does not fit
}

Tensor encode_region(Tape& tape, const EncoderConfig& cfg, const EncoderParams& params,
                     const Tensor& series) {
    if (series.rank() != 1 || series.size() != cfg.input_length) {
        throw ShapeError("encode_region: expected series of length " +
                         std::to_string(cfg.input_length) + ", got " +
                         shape_str(series.shape()));
    }
    Tensor x = reshape(tape, series, {1, cfg.input_length});
    for (std::size_t i = 0; i < 4; ++i) {
        x = conv1d(tape, x, params.conv[i].weight, params.conv[i].bias, cfg.strides[i]);
        if (i + 1 < 4) x = relu(tape, x);
    }
    Tensor flat = reshape(tape, x, {1, cfg.flatten_size()});
    Tensor emb = add_bias(tape, matmul(tape, flat, params.fc_weight), params.fc_bias);
    return reshape(tape, emb, {cfg.region_embed_dim});
}

RegionEmbeddings encode_subject(Tape& tape, const EncoderConfig& cfg,
                                const EncoderParams& params, const Tensor& series) {
    if (series.rank() != 2) {
        throw ShapeError("encode_subject: expected [R x T] matrix, got " +
                         shape_str(series.shape()));
    }
    const std::size_t regions = series.rows();
    if (regions < 2) {
        throw ContractError("encode_subject: need at least 2 regions, got " +
                            std::to_string(regions));
    }
    if (series.cols() != cfg.input_length) {
        throw ShapeError("encode_subject: series length " + std::to_string(series.cols()) +
                         " does not match encoder input length " +
                         std::to_string(cfg.input_length));
    }
    for (std::size_t r = 0; r < regions; ++r) {
        for (std::size_t t = 0; t < series.cols(); ++t) {
            if (!std::isfinite(series(r, t))) {
                throw DataError("encode_subject: non-finite value in region " +
                                std::to_string(r));
            }
        }
    }
    std::vector<Tensor> rows;
    rows.reserve(regions);
    for (std::size_t r = 0; r < regions; ++r) {
        Tensor row = slice(tape, reshape(tape, series, {series.size()}),
                           r * cfg.input_length, (r + 1) * cfg.input_length);
        rows.push_back(encode_region(tape, cfg, params, row));
    }
    RegionEmbeddings out;
    out.H = stack_rows(tape, rows);
    out.h_f = reshape(tape, out.H, {regions * cfg.region_embed_dim});
    return out;
}

} // namespace mim
