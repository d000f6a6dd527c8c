#include "pip/model.hpp"

#include <cmath>
#include <random>

namespace pip {

void ModelConfig::validate() const {
    if (n_layers < 2) throw ValidationError("n_layers must be >= 2");
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0)
        throw ValidationError("d_model, n_heads, d_ff must be positive");
    if (d_model % n_heads != 0)
        throw ValidationError("n_heads must divide d_model");
    if (vocab_size < 259) throw ValidationError("vocab_size must be >= 259");
    if (max_seq_len < 2) throw ValidationError("max_seq_len must be >= 2");
}

std::vector<Tensor> DecoderLayer::parameters() const {
    return {wq, wk, wv, wo, w1, w2, ln1_scale, ln1_bias, ln2_scale, ln2_bias};
}

std::size_t DecoderLayer::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

namespace {

Tensor init_param(std::vector<int> shape, std::mt19937_64& rng, double std_dev) {
    std::normal_distribution<double> dist(0.0, std_dev);
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor ones_param(std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return Tensor::from(std::move(shape), std::vector<double>(n, 1.0), true);
}

Tensor zeros_param(std::vector<int> shape) {
    return Tensor::zeros(std::move(shape), true);
}

}  // namespace

TransformerModel TransformerModel::init(const ModelConfig& config) {
    config.validate();
    TransformerModel m;
    m.config_ = config;
    std::mt19937_64 rng(config.seed);
    const int d = config.d_model;
    const double std_dev = 0.08;
    m.embedding_ = init_param({config.vocab_size, d}, rng, std_dev);
    m.pos_embedding_ = init_param({config.max_seq_len, d}, rng, std_dev);
    for (int i = 0; i < config.n_layers; ++i) {
        DecoderLayer layer;
        layer.wq = init_param({d, d}, rng, std_dev);
        layer.wk = init_param({d, d}, rng, std_dev);
        layer.wv = init_param({d, d}, rng, std_dev);
        layer.wo = init_param({d, d}, rng, std_dev);
        layer.w1 = init_param({d, config.d_ff}, rng, std_dev);
        layer.w2 = init_param({config.d_ff, d}, rng, std_dev);
        layer.ln1_scale = ones_param({1, d});
        layer.ln1_bias = zeros_param({1, d});
        layer.ln2_scale = ones_param({1, d});
        layer.ln2_bias = zeros_param({1, d});
        layer.original_index = i;
        m.layers_.push_back(std::move(layer));
    }
    m.final_ln_scale_ = ones_param({1, d});
    m.final_ln_bias_ = zeros_param({1, d});
    m.head_ = init_param({d, config.vocab_size}, rng, std_dev);
    return m;
}

namespace {

Tensor apply_layer(const DecoderLayer& layer, Tensor x, const ModelConfig& cfg) {
    const int d = cfg.d_model;
    const int n_heads = cfg.n_heads;
    const int dh = d / n_heads;

    // attention sublayer, pre-norm
    Tensor h = add(mul(layernorm_rows(x), layer.ln1_scale), layer.ln1_bias);
    Tensor q = matmul(h, layer.wq);
    Tensor k = matmul(h, layer.wk);
    Tensor v = matmul(h, layer.wv);
    std::vector<Tensor> heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int hd = 0; hd < n_heads; ++hd) {
        Tensor qh = slice_cols(q, hd * dh, (hd + 1) * dh);
        Tensor kh = slice_cols(k, hd * dh, (hd + 1) * dh);
        Tensor vh = slice_cols(v, hd * dh, (hd + 1) * dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
        Tensor attn = causal_masked_softmax(scores);
        heads.push_back(matmul(attn, vh));
    }
    Tensor attn_out = matmul(concat_cols(heads), layer.wo);
    x = add(x, attn_out);

    // feed-forward sublayer, pre-norm
    Tensor h2 = add(mul(layernorm_rows(x), layer.ln2_scale), layer.ln2_bias);
    Tensor ff = matmul(gelu(matmul(h2, layer.w1)), layer.w2);
    return add(x, ff);
}

}  // namespace

Tensor TransformerModel::forward(const std::vector<int>& tokens) const {
    std::vector<LayerTrace> unused;
    return forward_traced(tokens, unused);
}

Tensor TransformerModel::forward_traced(const std::vector<int>& tokens,
                                        std::vector<LayerTrace>& traces) const {
    const int t = static_cast<int>(tokens.size());
    if (t < 1) throw ValidationError("forward: empty token sequence");
    if (t > config_.max_seq_len)
        throw ValidationError("forward: sequence exceeds max_seq_len");
    std::vector<int> positions(t);
    for (int i = 0; i < t; ++i) positions[i] = i;
    Tensor x = add(embed(embedding_, tokens), embed(pos_embedding_, positions));
    traces.clear();
    for (const auto& layer : layers_) {
        LayerTrace trace;
        trace.original_index = layer.original_index;
        trace.input = x.values();
        x = apply_layer(layer, x, config_);
        trace.output = x.values();
        traces.push_back(std::move(trace));
    }
    Tensor h = add(mul(layernorm_rows(x), final_ln_scale_), final_ln_bias_);
    return matmul(h, head_);
}

std::map<int, std::vector<double>> TransformerModel::sft_gradients(
    const std::vector<int>& tokens) const {
    if (tokens.size() < 2)
        throw ValidationError("sft_gradients: need at least 2 tokens");
    zero_all_grads();
    std::vector<int> inputs(tokens.begin(), tokens.end() - 1);
    std::vector<int> targets(tokens.begin() + 1, tokens.end());
    Tensor logits = forward(inputs);
    Tensor loss = cross_entropy_next_token(logits, targets);
    backward(loss);
    std::map<int, std::vector<double>> out;
    for (const auto& layer : layers_) {
        std::vector<double> flat;
        flat.reserve(layer.parameter_count());
        for (auto p : layer.parameters()) {
            const auto& g = p.grad();
            flat.insert(flat.end(), g.begin(), g.end());
        }
        out[layer.original_index] = std::move(flat);
    }
    return out;
}

void TransformerModel::remove_layer(int position) {
    if (position < 0 || position >= static_cast<int>(layers_.size()))
        throw ValidationError("remove_layer: position out of range");
    if (layers_.size() < 2)
        throw ContractError("remove_layer: cannot remove the last layer");
    layers_.erase(layers_.begin() + position);
}

std::vector<Tensor> TransformerModel::parameters() const {
    std::vector<Tensor> out{embedding_, pos_embedding_};
    for (const auto& layer : layers_)
        for (auto p : layer.parameters()) out.push_back(p);
    out.push_back(final_ln_scale_);
    out.push_back(final_ln_bias_);
    out.push_back(head_);
    return out;
}

std::size_t TransformerModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

std::size_t TransformerModel::layer_parameter_count(int position) const {
    return layers_.at(position).parameter_count();
}

void TransformerModel::zero_all_grads() const {
    for (auto p : parameters()) const_cast<Tensor&>(p).zero_grad();
}

TransformerModel TransformerModel::deep_copy() const {
    TransformerModel m;
    m.config_ = config_;
    auto clone = [](const Tensor& t) {
        return Tensor::from(t.shape(), t.values(), t.requires_grad());
    };
    m.embedding_ = clone(embedding_);
    m.pos_embedding_ = clone(pos_embedding_);
    for (const auto& layer : layers_) {
        DecoderLayer c;
        c.wq = clone(layer.wq);
        c.wk = clone(layer.wk);
        c.wv = clone(layer.wv);
        c.wo = clone(layer.wo);
        c.w1 = clone(layer.w1);
        c.w2 = clone(layer.w2);
        c.ln1_scale = clone(layer.ln1_scale);
        c.ln1_bias = clone(layer.ln1_bias);
        c.ln2_scale = clone(layer.ln2_scale);
        c.ln2_bias = clone(layer.ln2_bias);
        c.original_index = layer.original_index;
        m.layers_.push_back(std::move(c));
    }
    m.final_ln_scale_ = clone(final_ln_scale_);
    m.final_ln_bias_ = clone(final_ln_bias_);
    m.head_ = clone(head_);
    return m;
}

std::vector<int> tokenize(const std::string& text, int max_len) {
    std::vector<int> tokens;
    tokens.reserve(std::min<std::size_t>(text.size() + 2, max_len));
    tokens.push_back(kBosToken);
    for (unsigned char c : text) {
        if (static_cast<int>(tokens.size()) >= max_len - 1) break;
        tokens.push_back(static_cast<int>(c));
    }
    tokens.push_back(kEosToken);
    return tokens;
}

double train_toy(TransformerModel& model, const std::string& corpus,
                 const TrainOptions& opts) {
    if (corpus.empty()) throw ValidationError("train_toy: empty corpus");
    if (opts.steps < 1) throw ContractError("train_toy: steps must be >= 1");
    if (opts.learning_rate <= 0)
        throw ContractError("train_toy: learning rate must be positive");
    const int seq = std::min(opts.seq_len, model.config().max_seq_len);
    if (static_cast<int>(corpus.size()) < seq + 1)
        throw ValidationError("train_toy: corpus shorter than one window");
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - seq - 1);
    auto params = model.parameters();
    double loss_value = 0.0;
    for (int step = 0; step < opts.steps; ++step) {
        const std::size_t off = pick(rng);
        std::vector<int> inputs(seq), targets(seq);
        for (int i = 0; i < seq; ++i) {
            inputs[i] = static_cast<unsigned char>(corpus[off + i]);
            targets[i] = static_cast<unsigned char>(corpus[off + i + 1]);
        }
        model.zero_all_grads();
        Tensor logits = model.forward(inputs);
        Tensor loss = cross_entropy_next_token(logits, targets);
        backward(loss);
        loss_value = loss.item();
        for (auto& p : params) {
            auto& v = p.values();
            const auto& g = p.grad();
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] -= opts.learning_rate * g[i];
        }
    }
    return loss_value;
}

}  // namespace pip
