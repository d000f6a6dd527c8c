#include "pip/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pip {

namespace {

constexpr char kMagic[] = "PIPCKPT1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_block(std::ofstream& out, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void read_block(std::ifstream& in, Tensor& t) {
    in.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint truncated inside parameter block");
}

}  // namespace

void CheckpointCodec::save(const TransformerModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    const auto& cfg = model.config();
    std::ostringstream header;
    header << kMagic << "\n";
    header << "format_version 1\n";
    header << "byte_order little\n";
    header << "precision f64\n";
    header << "n_layers " << cfg.n_layers << "\n";
    header << "d_model " << cfg.d_model << "\n";
    header << "n_heads " << cfg.n_heads << "\n";
    header << "d_ff " << cfg.d_ff << "\n";
    header << "vocab_size " << cfg.vocab_size << "\n";
    header << "max_seq_len " << cfg.max_seq_len << "\n";
    header << "seed " << cfg.seed << "\n";
    header << "live_layers " << model.layers().size() << "\n";
    header << "original_indices";
    for (const auto& layer : model.layers()) header << ' ' << layer.original_index;
    header << "\n---\n";
    out << header.str();
    write_block(out, model.embedding());
    write_block(out, model.pos_embedding());
    for (const auto& layer : model.layers())
        for (const auto& p : layer.parameters()) write_block(out, p);
    write_block(out, model.final_ln_scale());
    write_block(out, model.final_ln_bias());
    write_block(out, model.head());
    if (!out) throw CheckpointError("write failed: " + path);
}

TransformerModel CheckpointCodec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw CheckpointError("bad checkpoint magic (expected PIPCKPT1)");

    ModelConfig cfg;
    std::size_t live_layers = 0;
    std::vector<int> original_indices;
    bool saw_end = false;
    while (std::getline(in, line)) {
        if (line == "---") {
            saw_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "format_version") {
            int v;
            ls >> v;
            if (v != 1) throw CheckpointError("unsupported checkpoint version");
        } else if (key == "byte_order") {
            std::string v;
            ls >> v;
            if (v != "little") throw CheckpointError("unsupported byte order");
        } else if (key == "precision") {
            std::string v;
            ls >> v;
            if (v != "f64") throw CheckpointError("unsupported precision tag");
        } else if (key == "n_layers") ls >> cfg.n_layers;
        else if (key == "d_model") ls >> cfg.d_model;
        else if (key == "n_heads") ls >> cfg.n_heads;
        else if (key == "d_ff") ls >> cfg.d_ff;
        else if (key == "vocab_size") ls >> cfg.vocab_size;
        else if (key == "max_seq_len") ls >> cfg.max_seq_len;
        else if (key == "seed") ls >> cfg.seed;
        else if (key == "live_layers") ls >> live_layers;
        else if (key == "original_indices") {
            int idx;
            while (ls >> idx) original_indices.push_back(idx);
        } else throw CheckpointError("unknown checkpoint header key: " + key);
    }
    if (!saw_end) throw CheckpointError("checkpoint header not terminated");
    if (original_indices.size() != live_layers)
        throw CheckpointError("original_indices count disagrees with live_layers");

    TransformerModel model = TransformerModel::init(cfg);
    // shrink to the recorded live layer set, keeping original indices
    while (model.layers_.size() > live_layers) model.layers_.pop_back();
    for (std::size_t i = 0; i < live_layers; ++i)
        model.layers_[i].original_index = original_indices[i];

    read_block(in, model.embedding_);
    read_block(in, model.pos_embedding_);
    for (auto& layer : model.layers_)
        for (auto p : layer.parameters()) read_block(in, p);
    read_block(in, model.final_ln_scale_);
    read_block(in, model.final_ln_bias_);
    read_block(in, model.head_);
    // no trailing bytes expected
    char extra;
    if (in.read(&extra, 1))
        throw CheckpointError("checkpoint has trailing bytes");
    return model;
}

}  // namespace pip
