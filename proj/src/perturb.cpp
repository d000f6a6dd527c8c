#include "pip/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

namespace pip {

PerturbMethod perturb_method_from_string(const std::string& s) {
    if (s == "swap") return PerturbMethod::Swap;
    if (s == "replace") return PerturbMethod::Replace;
    if (s == "insert") return PerturbMethod::Insert;
    throw ValidationError("unknown perturbation method: " + s);
}

std::string to_string(PerturbMethod m) {
    switch (m) {
        case PerturbMethod::Swap: return "swap";
        case PerturbMethod::Replace: return "replace";
        case PerturbMethod::Insert: return "insert";
    }
    return "?";
}

void PerturbationSpec::validate() const {
    if (words_per_sample < 1)
        throw ValidationError("words_per_sample must be >= 1");
    if (draws < 1) throw ValidationError("draws must be >= 1");
}

std::string perturb_swap(const std::string& word, int position) {
    if (word.size() < 2) throw ValidationError("swap: word too short");
    if (position < 0 || position >= static_cast<int>(word.size()) - 1)
        throw ValidationError("swap: position out of range");
    std::string out = word;
    std::swap(out[position], out[position + 1]);
    return out;
}

std::string perturb_replace(const std::string& word, int position, char new_char) {
    if (position < 0 || position >= static_cast<int>(word.size()))
        throw ValidationError("replace: position out of range");
    if (word[position] == new_char)
        throw ContractError("replace: new character equals existing character");
    std::string out = word;
    out[position] = new_char;
    return out;
}

std::string perturb_insert(const std::string& word, int position, char new_char) {
    if (position < 0 || position > static_cast<int>(word.size()))
        throw ValidationError("insert: position out of range");
    std::string out = word;
    out.insert(out.begin() + position, new_char);
    return out;
}

namespace {

struct WordSpan {
    std::size_t begin = 0;
    std::size_t length = 0;
};

// whitespace-separated tokens with their byte offsets
std::vector<WordSpan> split_words(const std::string& text) {
    std::vector<WordSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        spans.push_back({start, i - start});
    }
    return spans;
}

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// alphabetic core of a token, stripping leading/trailing punctuation
void core_range(const std::string& word, std::size_t& begin, std::size_t& end) {
    begin = 0;
    end = word.size();
    while (begin < end && !std::isalpha(static_cast<unsigned char>(word[begin]))) ++begin;
    while (end > begin && !std::isalpha(static_cast<unsigned char>(word[end - 1]))) --end;
}

constexpr int kMaxRedraws = 8;

// Edits one word in place; returns false if no valid edit was found.
bool edit_word(std::string& word, PerturbMethod method, std::mt19937_64& rng) {
    std::size_t cb, ce;
    core_range(word, cb, ce);
    const std::string core = word.substr(cb, ce - cb);
    if (core.empty()) return false;
    const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    std::uniform_int_distribution<int> letter_pick(0, 25);
    switch (method) {
        case PerturbMethod::Swap: {
            if (core.size() < 2) return false;
            std::uniform_int_distribution<int> pos_pick(0, static_cast<int>(core.size()) - 2);
            for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
                const int p = pos_pick(rng);
                if (core[p] == core[p + 1]) continue;  // no-op swap, redraw
                word = word.substr(0, cb) + perturb_swap(core, p) + word.substr(ce);
                return true;
            }
            return false;
        }
        case PerturbMethod::Replace: {
            std::uniform_int_distribution<int> pos_pick(0, static_cast<int>(core.size()) - 1);
            for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
                const int p = pos_pick(rng);
                const char c = letters[letter_pick(rng)];
                if (core[p] == c) continue;
                word = word.substr(0, cb) + perturb_replace(core, p, c) + word.substr(ce);
                return true;
            }
            return false;
        }
        case PerturbMethod::Insert: {
            std::uniform_int_distribution<int> pos_pick(0, static_cast<int>(core.size()));
            const int p = pos_pick(rng);
            const char c = letters[letter_pick(rng)];
            word = word.substr(0, cb) + perturb_insert(core, p, c) + word.substr(ce);
            return true;
        }
    }
    return false;
}

}  // namespace

std::string apply_edits(const std::string& original, const std::vector<WordEdit>& edits) {
    auto spans = split_words(original);
    std::vector<std::string> words(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i)
        words[i] = original.substr(spans[i].begin, spans[i].length);
    for (const auto& e : edits) {
        if (e.word_position < 0 || e.word_position >= static_cast<int>(words.size()))
            throw ValidationError("apply_edits: word position out of range");
        if (words[e.word_position] != e.before)
            throw ValidationError("apply_edits: edit does not match original word");
        words[e.word_position] = e.after;
    }
    // rebuild, preserving the original whitespace layout
    std::string out;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        out.append(original, cursor, spans[i].begin - cursor);
        out.append(words[i]);
        cursor = spans[i].begin + spans[i].length;
    }
    out.append(original, cursor, original.size() - cursor);
    return out;
}

std::vector<PerturbedPair> perturb_corpus(const std::vector<std::string>& samples,
                                          const PerturbationSpec& spec,
                                          int draw_index) {
    spec.validate();
    if (samples.empty()) throw ValidationError("perturb_corpus: empty corpus");
    if (draw_index < 0 || draw_index >= spec.draws)
        throw ValidationError("perturb_corpus: draw_index out of range");

    std::vector<PerturbedPair> out;
    out.reserve(samples.size());
    for (std::size_t si = 0; si < samples.size(); ++si) {
        std::seed_seq seq{static_cast<std::uint64_t>(spec.seed),
                          static_cast<std::uint64_t>(draw_index),
                          static_cast<std::uint64_t>(si)};
        std::mt19937_64 rng(seq);

        const std::string& text = samples[si];
        auto spans = split_words(text);
        PerturbedPair pair;
        pair.original = text;

        std::vector<int> order(spans.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::shuffle(order.begin(), order.end(), rng);
        // lexicon hits come first so curated meaning-shifting flips win
        std::stable_partition(order.begin(), order.end(), [&](int wi) {
            const std::string w = text.substr(spans[wi].begin, spans[wi].length);
            std::size_t cb, ce;
            core_range(w, cb, ce);
            const std::string core_lc = lowercase(w.substr(cb, ce - cb));
            for (const auto& [src, dst] : spec.lexicon)
                if (core_lc == src) return true;
            return false;
        });

        int edited = 0;
        for (int wi : order) {
            if (edited >= spec.words_per_sample) break;
            std::string word = text.substr(spans[wi].begin, spans[wi].length);
            const std::string before = word;

            bool ok = false;
            std::size_t cb, ce;
            core_range(word, cb, ce);
            const std::string core_lc = lowercase(word.substr(cb, ce - cb));
            for (const auto& [src, dst] : spec.lexicon) {
                if (core_lc == src) {
                    word = word.substr(0, cb) + dst + word.substr(ce);
                    ok = true;
                    break;
                }
            }
            if (!ok) ok = edit_word(word, spec.method, rng);
            if (!ok || word == before) {
                pair.warnings.push_back("skipped word " + std::to_string(wi) +
                                        " ('" + before + "'): no valid edit");
                continue;
            }
            pair.edits.push_back({wi, before, word});
            ++edited;
        }
        std::sort(pair.edits.begin(), pair.edits.end(),
                  [](const WordEdit& a, const WordEdit& b) {
                      return a.word_position < b.word_position;
                  });
        pair.perturbed = apply_edits(pair.original, pair.edits);
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open lexicon file: " + path);
    std::vector<std::pair<std::string, std::string>> lex;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError("malformed lexicon line: " + line);
        lex.emplace_back(lowercase(line.substr(0, tab)), line.substr(tab + 1));
    }
    return lex;
}

}  // namespace pip
