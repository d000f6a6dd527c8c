#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pip/tensor.hpp"

namespace pip {

// Byte-level vocabulary: 256 raw bytes + BOS/EOS/PAD.
constexpr int kByteVocab = 256;
constexpr int kBosToken = 256;
constexpr int kEosToken = 257;
constexpr int kPadToken = 258;

struct ModelConfig {
    int n_layers = 6;
    int d_model = 32;
    int n_heads = 4;
    int d_ff = 64;
    int vocab_size = 259;
    int max_seq_len = 128;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Pre-norm decoder block. original_index is fixed at construction and
// survives pruning.
struct DecoderLayer {
    Tensor wq, wk, wv, wo;      // [d_model x d_model]
    Tensor w1, w2;              // [d_model x d_ff], [d_ff x d_model]
    Tensor ln1_scale, ln1_bias; // [1 x d_model]
    Tensor ln2_scale, ln2_bias;
    int original_index = -1;

    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
};

struct LayerTrace {
    std::vector<double> input;   // [T x d_model] hidden state entering the layer
    std::vector<double> output;  // [T x d_model] hidden state leaving it
    int original_index = -1;
};

class TransformerModel {
   public:
    TransformerModel() = default;
    static TransformerModel init(const ModelConfig& config);

    Tensor forward(const std::vector<int>& tokens) const;
    Tensor forward_traced(const std::vector<int>& tokens,
                          std::vector<LayerTrace>& traces) const;

    // Per-layer flat gradient of next-token cross-entropy with the sample as
    // both input and label. Model weights are not updated.
    std::map<int, std::vector<double>> sft_gradients(const std::vector<int>& tokens) const;

    void remove_layer(int position);

    std::vector<Tensor> parameters() const;        // full model, declared order
    std::size_t parameter_count() const;
    std::size_t layer_parameter_count(int position) const;
    void zero_all_grads() const;

    const ModelConfig& config() const { return config_; }
    const std::vector<DecoderLayer>& layers() const { return layers_; }
    std::vector<DecoderLayer>& layers_mut() { return layers_; }
    Tensor embedding() const { return embedding_; }
    Tensor pos_embedding() const { return pos_embedding_; }
    Tensor head() const { return head_; }
    Tensor final_ln_scale() const { return final_ln_scale_; }
    Tensor final_ln_bias() const { return final_ln_bias_; }

    TransformerModel deep_copy() const;

    friend class CheckpointCodec;

   private:
    ModelConfig config_;
    Tensor embedding_;       // [vocab x d_model]
    Tensor pos_embedding_;   // [max_seq_len x d_model]
    std::vector<DecoderLayer> layers_;
    Tensor final_ln_scale_, final_ln_bias_;
    Tensor head_;            // [d_model x vocab]
};

// text -> [BOS, bytes..., EOS], truncated to max_len
std::vector<int> tokenize(const std::string& text, int max_len);

struct TrainOptions {
    int steps = 2000;
    double learning_rate = 0.05;
    int seq_len = 64;
    std::uint64_t seed = 1;
};

// Plain SGD on random corpus windows. Returns final training loss.
double train_toy(TransformerModel& model, const std::string& corpus,
                 const TrainOptions& opts);

}  // namespace pip
