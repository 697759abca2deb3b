#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mim/attention.hpp"
#include "mim/data.hpp"
#include "mim/encoder.hpp"
#include "mim/gnn.hpp"
#include "mim/objective.hpp"

namespace mim {

// Fully connected stack; ReLU between layers, none after the last.
struct FcStack {
    std::vector<Tensor> weights; // layer i: [in x out]
    std::vector<Tensor> biases;  // layer i: [out]
};

Tensor fc_forward(Tape& tape, const FcStack& fc, const Tensor& x);

struct ModelConfig {
    std::size_t regions = 116;
    EncoderConfig encoder;
    AttentionConfig attention;
    GnnConfig gnn;
    // Hidden widths; output widths are pooled_dim (y head) and num_classes.
    std::vector<std::size_t> y_head_hidden{1024, 128};
    std::vector<std::size_t> enc_cls_hidden{1024, 128};
    std::vector<std::size_t> graph_cls_hidden{32};
    std::size_t num_classes = 2;

    std::size_t subject_embed_dim() const { return regions * encoder.region_embed_dim; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& json_text);

// The complete parameter set: encoder, attention, GNN, pre-training head and
// the two classification heads. Parameters are shared-handle tensors; the
// named list is the canonical checkpoint/optimizer order.
class MimModel {
public:
    // Zero-valued parameters with the right shapes.
    explicit MimModel(ModelConfig cfg);

    // Orthogonal encoder weights, Xavier-normal (gain 0.25) everywhere else,
    // zero biases; deterministic per seed.
    static MimModel init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
        return named_;
    }
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;

    // Deep copy (fresh storage, same values).
    MimModel clone() const;

    // Value snapshot / restore, used by early stopping.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);

    struct PretrainOutput {
        Tensor c_embeddings; // [N x pooled]
        Tensor y_embeddings; // [N x pooled]
    };

    // Per subject: encode, y = y_head(h_f); graph = attention(H); c = GNN(graph).
    PretrainOutput forward_pretrain(Tape& tape,
                                    std::span<const data::SubjectSeries> batch) const;

    // logits = graph_cls_head(c) + enc_cls_head(h_f); no softmax.
    Tensor forward_classify(Tape& tape, const data::SubjectSeries& subject) const;
    Tensor forward_classify_batch(Tape& tape,
                                  std::span<const data::SubjectSeries> batch) const;

    const EncoderParams& encoder_params() const { return encoder_; }
    const AttentionParams& attention_params() const { return attention_; }
    const GnnParams& gnn_params() const { return gnn_; }
    const FcStack& y_head() const { return y_head_; }
    const FcStack& enc_cls_head() const { return enc_cls_head_; }
    const FcStack& graph_cls_head() const { return graph_cls_head_; }

private:
    void register_params();
    void check_subject(const data::SubjectSeries& s) const;

    ModelConfig cfg_;
    EncoderParams encoder_;
    AttentionParams attention_;
    GnnParams gnn_;
    FcStack y_head_;
    FcStack enc_cls_head_;
    FcStack graph_cls_head_;
    std::vector<std::pair<std::string, Tensor>> named_;
};

// Versioned binary checkpoint: magic + header record (format version, config,
// parameter manifest with byte offsets, payload checksum) + raw little-endian
// double payload in manifest order. Round trips are bit-exact.
void save_checkpoint(const MimModel& model, const std::string& path);
MimModel load_checkpoint(const std::string& path);
// Additionally requires the stored config to equal `expected`.
MimModel load_checkpoint(const std::string& path, const ModelConfig& expected);

} // namespace mim
