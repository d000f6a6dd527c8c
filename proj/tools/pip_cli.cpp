// Command-line front door: train, prune, eval, time, report, perturb.
// Exit codes: 0 success, 1 internal error, 2 user-input error.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pip/checkpoint.hpp"
#include "pip/config.hpp"

namespace fs = std::filesystem;
using namespace pip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// output root: [output] dir, overridable via PIP_OUT_ROOT
fs::path resolve_out_dir(const RunConfig& cfg) {
    if (const char* root = std::getenv("PIP_OUT_ROOT"))
        return fs::path(root) / fs::path(cfg.output_dir).filename();
    return fs::path(cfg.output_dir);
}

RunConfig load_config(const std::string& path) {
    if (!fs::exists(path))
        throw UserError("config file not found: " + path);
    return RunConfig::parse_file(path);
}

std::string require_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw UserError(std::string(what) + " not found: " + path);
    return path;
}

RunConfig prepare(const std::string& config_path, fs::path& out_dir) {
    RunConfig cfg = load_config(config_path);
    out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);
    write_text_file((out_dir / "config.echo").string(), cfg.serialize());
    return cfg;
}

PerturbationSpec resolve_perturbation(const RunConfig& cfg) {
    PerturbationSpec spec = cfg.perturbation;
    if (!cfg.lexicon_path.empty() && fs::exists(cfg.lexicon_path))
        spec.lexicon = load_lexicon(cfg.lexicon_path);
    return spec;
}

int cmd_train(const std::string& config_path) {
    fs::path out_dir;
    RunConfig cfg = prepare(config_path, out_dir);
    const std::string corpus =
        read_text_file(require_file(cfg.train_corpus, "training corpus"));

    auto model = TransformerModel::init(cfg.model);
    std::ostringstream log;
    TrainOptions opts;
    opts.steps = cfg.train_steps;
    opts.learning_rate = cfg.learning_rate;
    opts.seq_len = cfg.train_seq_len;
    opts.seed = cfg.seed;
    const int chunk = std::max(1, cfg.train_steps / 10);
    TransformerModel* mp = &model;
    int done = 0;
    while (done < cfg.train_steps) {
        TrainOptions step_opts = opts;
        step_opts.steps = std::min(chunk, cfg.train_steps - done);
        step_opts.seed = cfg.seed + static_cast<std::uint64_t>(done);
        const double loss = train_toy(*mp, corpus, step_opts);
        done += step_opts.steps;
        log << "step " << done << " loss " << loss << "\n";
        if (cfg.verbosity > 0)
            std::cout << "step " << done << " loss " << loss << std::endl;
    }
    CheckpointCodec::save(model, (out_dir / "base.ckpt").string());
    write_text_file((out_dir / "train.log").string(), log.str());
    std::cout << "checkpoint written to " << (out_dir / "base.ckpt").string()
              << std::endl;
    return kExitOk;
}

int cmd_prune(const std::string& config_path, const std::string& mode_flag) {
    fs::path out_dir;
    RunConfig cfg = prepare(config_path, out_dir);
    if (!mode_flag.empty()) cfg.prune.mode = prune_mode_from_string(mode_flag);
    cfg.prune.perturbation = resolve_perturbation(cfg);

    const std::string ckpt_path = (out_dir / "base.ckpt").string();
    auto model = CheckpointCodec::load(require_file(ckpt_path, "base checkpoint"));
    if (model.config() != cfg.model)
        throw UserError("config/model mismatch: checkpoint was built from a "
                        "different [model] section");
    auto calib = read_lines(require_file(cfg.calib_path, "calibration file"));

    PruneRun run = run_prune(model, calib, cfg.prune);
    std::ostringstream manifest;
    manifest << run.serialize_manifest();
    manifest << "timestamp " << std::time(nullptr) << "\n";
    write_text_file((out_dir / "prune.manifest").string(), manifest.str());
    if (!run.per_iteration.empty())
        write_text_file((out_dir / "importance.report").string(),
                        run.per_iteration.back().report.serialize());
    CheckpointCodec::save(run.final_model, (out_dir / "pruned.ckpt").string());
    std::cout << "pruned layers (original indices):";
    for (int idx : run.pruned_original_indices) std::cout << ' ' << idx;
    std::cout << "\nmanifest written to " << (out_dir / "prune.manifest").string()
              << std::endl;
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_path,
             const std::string& dense_checkpoint, const std::string& out_path) {
    auto model = CheckpointCodec::load(require_file(checkpoint, "checkpoint"));
    const std::string corpus =
        read_text_file(require_file(corpus_path, "evaluation corpus"));
    auto result = perplexity(model, corpus, model.config().max_seq_len, corpus_path);

    std::ostringstream os;
    os.precision(17);
    os << "ppl " << result.ppl << "\n";
    os << "token_count " << result.token_count << "\n";
    os << "nll_sum " << result.nll_sum << "\n";
    os << "corpus " << result.corpus_id << "\n";
    if (!dense_checkpoint.empty()) {
        auto dense = CheckpointCodec::load(
            require_file(dense_checkpoint, "dense checkpoint"));
        auto dense_ppl =
            perplexity(dense, corpus, dense.config().max_seq_len).ppl;
        os << "dense_ppl " << dense_ppl << "\n";
        os << "ppl_ratio " << result.ppl / dense_ppl << "\n";
    }
    std::cout << os.str();
    if (!out_path.empty()) write_text_file(out_path, os.str());
    return kExitOk;
}

int cmd_time(const std::string& config_path, int m_max, bool fake_clock) {
    fs::path out_dir;
    RunConfig cfg = prepare(config_path, out_dir);
    cfg.prune.perturbation = resolve_perturbation(cfg);
    const std::string ckpt_path = (out_dir / "base.ckpt").string();
    auto model = CheckpointCodec::load(require_file(ckpt_path, "base checkpoint"));
    auto calib = read_lines(require_file(cfg.calib_path, "calibration file"));
    if (m_max <= 0) m_max = static_cast<int>(model.layers().size()) - 1;

    auto curve = timing_curve(model, calib, cfg.prune, m_max, fake_clock);
    std::ostringstream os;
    os.precision(17);
    os << "quad_fit a " << curve.fit.a << " b " << curve.fit.b << " c "
       << curve.fit.c << " r2 " << curve.fit.r_squared << "\n";
    os << "second_differences";
    for (double sd : curve.second_differences) os << ' ' << sd;
    os << "\n";
    std::cout << os.str();
    write_text_file((out_dir / "timing.report").string(), os.str());
    write_text_file((out_dir / "timing.dat").string(), curve.plot_data());
    std::cout << "plot data written to " << (out_dir / "timing.dat").string()
              << std::endl;
    return kExitOk;
}

int cmd_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const auto manifest_path = dir / "prune.manifest";
    if (!fs::exists(manifest_path))
        throw UserError("run directory has no prune.manifest: " + run_dir);
    std::cout << "=== run report: " << run_dir << " ===\n";
    std::cout << read_text_file(manifest_path.string());
    for (const char* name : {"importance.report", "timing.report", "eval.report"}) {
        const auto p = dir / name;
        if (fs::exists(p)) {
            std::cout << "--- " << name << " ---\n" << read_text_file(p.string());
        }
    }
    if (fs::exists(dir / "pruned.ckpt")) {
        auto pruned = CheckpointCodec::load((dir / "pruned.ckpt").string());
        std::optional<std::size_t> base;
        if (fs::exists(dir / "base.ckpt"))
            base = CheckpointCodec::load((dir / "base.ckpt").string())
                       .parameter_count();
        auto stats = model_stats(pruned, base);
        std::cout << "--- stats ---\n";
        std::cout << "params " << stats.param_count << "\n";
        std::cout << "est_memory_bytes " << stats.est_memory_bytes << "\n";
        std::cout << "pruning_ratio " << stats.pruning_ratio << "\n";
    }
    return kExitOk;
}

int cmd_perturb(const std::string& config_path, int draw) {
    RunConfig cfg = load_config(config_path);
    auto spec = resolve_perturbation(cfg);
    auto calib = read_lines(require_file(cfg.calib_path, "calibration file"));
    for (const auto& pair : perturb_corpus(calib, spec, draw)) {
        std::cout << "original:  " << pair.original << "\n";
        std::cout << "perturbed: " << pair.perturbed << "\n";
        for (const auto& e : pair.edits)
            std::cout << "  edit word " << e.word_position << ": '" << e.before
                      << "' -> '" << e.after << "'\n";
        for (const auto& w : pair.warnings) std::cout << "  warning: " << w << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PIP: perturbation-based iterative structured pruning, desk scale"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    app.add_flag("--print-config", print_config,
                 "print the default configuration and exit");

    std::string config_path, mode_flag, checkpoint, corpus_path, dense_ckpt,
        out_path, run_dir;
    int m_max = 0, draw = 0;
    bool fake_clock = false;

    auto* train = app.add_subcommand("train", "train the toy base model");
    train->add_option("config", config_path, "run configuration file")->required();

    auto* prune = app.add_subcommand("prune", "prune the base checkpoint");
    prune->add_option("config", config_path)->required();
    prune->add_option("--mode", mode_flag,
                      "full_pip | no_iteration | no_perturbation | block_influence");

    auto* eval = app.add_subcommand("eval", "evaluate perplexity of a checkpoint");
    eval->add_option("checkpoint", checkpoint)->required();
    eval->add_option("corpus", corpus_path)->required();
    eval->add_option("--dense", dense_ckpt, "dense checkpoint for the PPL ratio");
    eval->add_option("--out", out_path, "also write the report to this file");

    auto* time_cmd = app.add_subcommand("time", "measure the pruning-time curve");
    time_cmd->add_option("config", config_path)->required();
    time_cmd->add_option("--m-max", m_max, "largest layer count to prune");
    time_cmd->add_flag("--fake-clock", fake_clock,
                       "use the deterministic layer-evaluation clock");

    auto* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("dir", run_dir)->required();

    auto* perturb = app.add_subcommand("perturb", "emit perturbed pairs for inspection");
    perturb->add_option("config", config_path)->required();
    perturb->add_option("--draw", draw, "perturbation draw index");

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config) {
            std::cout << RunConfig{}.serialize();
            return kExitOk;
        }
        if (train->parsed()) return cmd_train(config_path);
        if (prune->parsed()) return cmd_prune(config_path, mode_flag);
        if (eval->parsed())
            return cmd_eval(checkpoint, corpus_path, dense_ckpt, out_path);
        if (time_cmd->parsed()) return cmd_time(config_path, m_max, fake_clock);
        if (report->parsed()) return cmd_report(run_dir);
        if (perturb->parsed()) return cmd_perturb(config_path, draw);
        std::cout << app.help();
        return kExitOk;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUser;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUser;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << std::endl;
        return kExitInternal;
    }
}
