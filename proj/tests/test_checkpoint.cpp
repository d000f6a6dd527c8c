#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pip/checkpoint.hpp"

using namespace pip;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

ModelConfig cfg2() {
    ModelConfig cfg;
    cfg.n_layers = 3;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.max_seq_len = 16;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("save/load round trip gives bitwise identical forward outputs") {
    TempFile tmp("pip_ckpt_roundtrip.bin");
    auto m = TransformerModel::init(cfg2());
    CheckpointCodec::save(m, tmp.path);
    auto loaded = CheckpointCodec::load(tmp.path);
    auto tokens = tokenize("roundtrip", 16);
    CHECK(m.forward(tokens).values() == loaded.forward(tokens).values());
}

TEST_CASE("truncated checkpoint is rejected") {
    TempFile tmp("pip_ckpt_trunc.bin");
    auto m = TransformerModel::init(cfg2());
    CheckpointCodec::save(m, tmp.path);
    auto data = std::filesystem::file_size(tmp.path);
    std::filesystem::resize_file(tmp.path, data / 2);
    CHECK_THROWS_AS(CheckpointCodec::load(tmp.path), CheckpointError);
}

TEST_CASE("bad magic and bad version are rejected") {
    TempFile tmp("pip_ckpt_magic.bin");
    std::ofstream(tmp.path) << "NOTACKPT\nwhatever\n";
    CHECK_THROWS_AS(CheckpointCodec::load(tmp.path), CheckpointError);

    TempFile tmp2("pip_ckpt_version.bin");
    std::ofstream(tmp2.path) << "PIPCKPT1\nformat_version 9\n---\n";
    CHECK_THROWS_AS(CheckpointCodec::load(tmp2.path), CheckpointError);
}

TEST_CASE("checkpoint of a pruned model records the original index list") {
    TempFile tmp("pip_ckpt_pruned.bin");
    auto m = TransformerModel::init(cfg2());
    m.remove_layer(1);
    CheckpointCodec::save(m, tmp.path);

    std::ifstream in(tmp.path, std::ios::binary);
    std::string header, line;
    while (std::getline(in, line) && line != "---") header += line + "\n";
    CHECK(header.find("original_indices 0 2") != std::string::npos);

    auto loaded = CheckpointCodec::load(tmp.path);
    REQUIRE(loaded.layers().size() == 2);
    CHECK(loaded.layers()[0].original_index == 0);
    CHECK(loaded.layers()[1].original_index == 2);
    auto tokens = tokenize("pruned", 16);
    CHECK(m.forward(tokens).values() == loaded.forward(tokens).values());
}

TEST_CASE("missing file raises an explicit error") {
    CHECK_THROWS_AS(CheckpointCodec::load("/nonexistent/path/x.bin"), CheckpointError);
}
