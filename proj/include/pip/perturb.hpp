#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pip/tensor.hpp"

namespace pip {

enum class PerturbMethod { Swap, Replace, Insert };

PerturbMethod perturb_method_from_string(const std::string& s);
std::string to_string(PerturbMethod m);

struct PerturbationSpec {
    PerturbMethod method = PerturbMethod::Swap;
    int words_per_sample = 1;
    std::uint64_t seed = 0;
    int draws = 4;  // K
    std::vector<std::pair<std::string, std::string>> lexicon;

    void validate() const;
};

struct WordEdit {
    int word_position = 0;  // index among whitespace-separated words
    std::string before;
    std::string after;
};

struct PerturbedPair {
    std::string original;
    std::string perturbed;
    std::vector<WordEdit> edits;
    std::vector<std::string> warnings;  // skipped words etc.
};

// Single-word primitives. Deterministic, no randomness.
std::string perturb_swap(const std::string& word, int position);
std::string perturb_replace(const std::string& word, int position, char new_char);
std::string perturb_insert(const std::string& word, int position, char new_char);

// Deterministic function of (samples, spec, draw_index). Lexicon hits are
// preferred over random character edits.
std::vector<PerturbedPair> perturb_corpus(const std::vector<std::string>& samples,
                                          const PerturbationSpec& spec,
                                          int draw_index);

// Reapplies pair.edits to pair.original; used by the reconstruction invariant.
std::string apply_edits(const std::string& original, const std::vector<WordEdit>& edits);

std::vector<std::pair<std::string, std::string>> load_lexicon(const std::string& path);

}  // namespace pip
