#include "pip/config.hpp"

#include <fstream>
#include <sstream>

namespace pip {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << content;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "[model]\n";
    os << "n_layers = " << model.n_layers << "\n";
    os << "d_model = " << model.d_model << "\n";
    os << "n_heads = " << model.n_heads << "\n";
    os << "d_ff = " << model.d_ff << "\n";
    os << "vocab_size = " << model.vocab_size << "\n";
    os << "max_seq_len = " << model.max_seq_len << "\n";
    os << "seed = " << model.seed << "\n";
    os << "\n[train]\n";
    os << "steps = " << train_steps << "\n";
    os << "learning_rate = " << learning_rate << "\n";
    os << "seq_len = " << train_seq_len << "\n";
    os << "corpus = " << train_corpus << "\n";
    os << "\n[perturb]\n";
    os << "method = " << to_string(perturbation.method) << "\n";
    os << "words_per_sample = " << perturbation.words_per_sample << "\n";
    os << "draws = " << perturbation.draws << "\n";
    os << "seed = " << perturbation.seed << "\n";
    os << "lexicon = " << lexicon_path << "\n";
    os << "\n[prune]\n";
    os << "layers = " << prune.layers_to_prune << "\n";
    os << "rho = " << prune.rho << "\n";
    os << "norm = " << to_string(prune.norm) << "\n";
    os << "mode = " << to_string(prune.mode) << "\n";
    os << "std_mode = "
       << (prune.std_mode == StdMode::AcrossDraws ? "across_draws" : "across_samples")
       << "\n";
    os << "calib = " << calib_path << "\n";
    os << "\n[eval]\n";
    os << "corpus = " << eval_corpus << "\n";
    os << "stride = " << eval_stride << "\n";
    os << "\n[output]\n";
    os << "dir = " << output_dir << "\n";
    os << "seed = " << seed << "\n";
    os << "verbosity = " << verbosity << "\n";
    return os.str();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_int = [&] { return std::stoi(val); };
        auto as_u64 = [&] { return std::stoull(val); };
        auto as_double = [&] { return std::stod(val); };
        const std::string qual = section + "." + key;
        if (qual == "model.n_layers") cfg.model.n_layers = as_int();
        else if (qual == "model.d_model") cfg.model.d_model = as_int();
        else if (qual == "model.n_heads") cfg.model.n_heads = as_int();
        else if (qual == "model.d_ff") cfg.model.d_ff = as_int();
        else if (qual == "model.vocab_size") cfg.model.vocab_size = as_int();
        else if (qual == "model.max_seq_len") cfg.model.max_seq_len = as_int();
        else if (qual == "model.seed") cfg.model.seed = as_u64();
        else if (qual == "train.steps") cfg.train_steps = as_int();
        else if (qual == "train.learning_rate") cfg.learning_rate = as_double();
        else if (qual == "train.seq_len") cfg.train_seq_len = as_int();
        else if (qual == "train.corpus") cfg.train_corpus = val;
        else if (qual == "perturb.method")
            cfg.perturbation.method = perturb_method_from_string(val);
        else if (qual == "perturb.words_per_sample")
            cfg.perturbation.words_per_sample = as_int();
        else if (qual == "perturb.draws") cfg.perturbation.draws = as_int();
        else if (qual == "perturb.seed") cfg.perturbation.seed = as_u64();
        else if (qual == "perturb.lexicon") cfg.lexicon_path = val;
        else if (qual == "prune.layers") cfg.prune.layers_to_prune = as_int();
        else if (qual == "prune.rho") cfg.prune.rho = as_double();
        else if (qual == "prune.norm") cfg.prune.norm = norm_from_string(val);
        else if (qual == "prune.mode") cfg.prune.mode = prune_mode_from_string(val);
        else if (qual == "prune.std_mode")
            cfg.prune.std_mode = val == "across_samples" ? StdMode::AcrossSamples
                                                         : StdMode::AcrossDraws;
        else if (qual == "prune.calib") cfg.calib_path = val;
        else if (qual == "eval.corpus") cfg.eval_corpus = val;
        else if (qual == "eval.stride") cfg.eval_stride = as_int();
        else if (qual == "output.dir") cfg.output_dir = val;
        else if (qual == "output.seed") cfg.seed = as_u64();
        else if (qual == "output.verbosity") cfg.verbosity = as_int();
        else
            throw ValidationError("config: unknown key '" + qual + "'");
    }
    cfg.prune.perturbation = cfg.perturbation;
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    return parse(read_text_file(path));
}

}  // namespace pip
