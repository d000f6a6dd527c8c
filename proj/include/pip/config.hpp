#pragma once

#include <string>

#include "pip/eval.hpp"

namespace pip {

// Resolved run configuration; sectioned key=value text on disk.
struct RunConfig {
    ModelConfig model;

    // [train]
    int train_steps = 2000;
    double learning_rate = 0.05;
    int train_seq_len = 64;
    std::string train_corpus = "data/corpus.txt";

    // [perturb]
    PerturbationSpec perturbation;
    std::string lexicon_path = "data/lexicon.tsv";

    // [prune]
    PruneConfig prune;
    std::string calib_path;

    // [eval]
    std::string eval_corpus;
    int eval_stride = 128;

    // [output]
    std::string output_dir = "runs/out";
    std::uint64_t seed = 0;
    int verbosity = 1;

    std::string serialize() const;
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse(const std::string& text);
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace pip
