#include "pip/pruner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace pip {

PruneMode prune_mode_from_string(const std::string& s) {
    if (s == "full_pip") return PruneMode::FullPip;
    if (s == "no_iteration") return PruneMode::NoIteration;
    if (s == "no_perturbation") return PruneMode::NoPerturbation;
    if (s == "block_influence") return PruneMode::BlockInfluence;
    throw ValidationError("unknown prune mode: " + s);
}

std::string to_string(PruneMode m) {
    switch (m) {
        case PruneMode::FullPip: return "full_pip";
        case PruneMode::NoIteration: return "no_iteration";
        case PruneMode::NoPerturbation: return "no_perturbation";
        case PruneMode::BlockInfluence: return "block_influence";
    }
    return "?";
}

ClockFn monotonic_clock() {
    return [] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };
}

namespace {

void check_prune_config(const TransformerModel& model, const PruneConfig& config) {
    if (config.layers_to_prune < 0)
        throw ValidationError("layers_to_prune must be >= 0");
    if (config.layers_to_prune >= static_cast<int>(model.layers().size()))
        throw ValidationError("layers_to_prune must be below the layer count");
}

// rho <= 0 means adaptive: 5 x median per-layer std across draws
double resolve_rho(const ImportanceMatrix& matrix, double rho) {
    if (rho > 0) return rho;
    std::vector<double> stds;
    for (const auto& [idx, draws] : matrix) {
        double mean = 0;
        for (double v : draws) mean += v;
        mean /= draws.size();
        double var = 0;
        for (double v : draws) var += (v - mean) * (v - mean);
        stds.push_back(std::sqrt(var / draws.size()));
    }
    std::sort(stds.begin(), stds.end());
    const double median = stds[stds.size() / 2];
    const double adaptive = 5.0 * median;
    return adaptive > 0 ? adaptive : std::numeric_limits<double>::infinity();
}

// argmin over finite final_pi; tie -> lowest original_index. Falls back to
// unfiltered means when every layer was filtered.
int select_layer(const ImportanceReport& report, std::vector<std::string>& warnings) {
    int best = -1;
    double best_v = std::numeric_limits<double>::infinity();
    double max_v = 0;
    for (const auto& [idx, li] : report.layers) {
        max_v = std::max(max_v, li.mean_value);
        if (!li.filtered && li.final_pi < best_v) {
            best_v = li.final_pi;
            best = idx;
        }
    }
    if (max_v == 0.0)
        throw ContractError("perturbation has no effect: every layer's PI is zero");
    if (best >= 0) return best;
    warnings.push_back("all layers filtered by consistency discriminator; "
                       "ranking by unfiltered means");
    for (const auto& [idx, li] : report.layers)
        if (li.mean_value < best_v) {
            best_v = li.mean_value;
            best = idx;
        }
    return best;
}

int position_of(const TransformerModel& model, int original_index) {
    const auto& layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].original_index == original_index) return static_cast<int>(i);
    throw ContractError("original index not present in model");
}

ImportanceMatrix score_matrix(const TransformerModel& model,
                              const std::vector<std::string>& calib,
                              const PruneConfig& config, CostMeter* meter) {
    if (config.std_mode == StdMode::AcrossSamples)
        return pert_import_per_sample(model, calib, config.perturbation,
                                      config.norm, meter);
    return pert_import(model, calib, config.perturbation, config.norm, meter);
}

PruneRun make_run(const TransformerModel& model, const PruneConfig& config) {
    PruneRun run;
    run.config = config;
    run.final_model = model.deep_copy();
    return run;
}

}  // namespace

PruneRun pip_prune(const TransformerModel& model, const std::vector<std::string>& calib,
                   const PruneConfig& config, CostMeter* meter, ClockFn clock) {
    check_prune_config(model, config);
    if (calib.empty()) throw ValidationError("pip_prune: empty calibration set");
    PruneRun run = make_run(model, config);
    const double t0 = clock();
    for (int l = 0; l < config.layers_to_prune; ++l) {
        IterationRecord rec;
        rec.layers_evaluated = static_cast<int>(run.final_model.layers().size());
        auto matrix = score_matrix(run.final_model, calib, config, meter);
        rec.report = apply_consistency_filter(matrix, resolve_rho(matrix, config.rho));
        rec.chosen_original_index = select_layer(rec.report, rec.warnings);
        run.final_model.remove_layer(position_of(run.final_model,
                                                 rec.chosen_original_index));
        run.pruned_original_indices.push_back(rec.chosen_original_index);
        rec.wall_time_s = clock() - t0;
        for (const auto& w : rec.warnings) run.warnings.push_back(w);
        run.per_iteration.push_back(std::move(rec));
    }
    return run;
}

PruneRun prune_one_shot(const TransformerModel& model,
                        const std::vector<std::string>& calib,
                        const PruneConfig& config, CostMeter* meter) {
    check_prune_config(model, config);
    if (calib.empty()) throw ValidationError("prune_one_shot: empty calibration set");
    PruneRun run = make_run(model, config);
    IterationRecord rec;
    rec.layers_evaluated = static_cast<int>(run.final_model.layers().size());
    auto matrix = score_matrix(run.final_model, calib, config, meter);
    rec.report = apply_consistency_filter(matrix, resolve_rho(matrix, config.rho));

    // remove the L smallest final_pi layers at once
    std::vector<std::pair<double, int>> ranked;
    double max_v = 0;
    for (const auto& [idx, li] : rec.report.layers) {
        max_v = std::max(max_v, li.mean_value);
        ranked.emplace_back(li.final_pi, idx);
    }
    if (config.layers_to_prune > 0 && max_v == 0.0)
        throw ContractError("perturbation has no effect: every layer's PI is zero");
    std::sort(ranked.begin(), ranked.end());
    bool used_fallback = false;
    for (int l = 0; l < config.layers_to_prune; ++l) {
        int idx = ranked[l].second;
        if (std::isinf(ranked[l].first) && !used_fallback) {
            used_fallback = true;
            run.warnings.push_back("one-shot selection reached filtered layers; "
                                   "ranking remainder by unfiltered means");
            std::vector<std::pair<double, int>> rest(ranked.begin() + l, ranked.end());
            for (auto& [v, i] : rest) v = rec.report.layers.at(i).mean_value;
            std::sort(rest.begin(), rest.end());
            std::copy(rest.begin(), rest.end(), ranked.begin() + l);
            idx = ranked[l].second;
        }
        run.final_model.remove_layer(position_of(run.final_model, idx));
        run.pruned_original_indices.push_back(idx);
    }
    rec.chosen_original_index =
        run.pruned_original_indices.empty() ? -1 : run.pruned_original_indices.front();
    run.per_iteration.push_back(std::move(rec));
    return run;
}

PruneRun prune_no_perturbation(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PruneConfig& config, CostMeter* meter) {
    check_prune_config(model, config);
    if (calib.empty())
        throw ValidationError("prune_no_perturbation: empty calibration set");
    PruneRun run = make_run(model, config);
    for (int l = 0; l < config.layers_to_prune; ++l) {
        IterationRecord rec;
        rec.layers_evaluated = static_cast<int>(run.final_model.layers().size());
        // score = mean over samples of the unperturbed aggregated gradient
        ImportanceMatrix matrix;
        for (const auto& layer : run.final_model.layers())
            matrix[layer.original_index].assign(1, 0.0);
        for (const auto& text : calib) {
            auto tokens = tokenize(text, run.final_model.config().max_seq_len);
            auto grads = run.final_model.sft_gradients(tokens);
            if (meter)
                meter->charge_gradient_pass(
                    static_cast<int>(run.final_model.layers().size()));
            for (const auto& [idx, g] : grads)
                matrix[idx][0] += aggregate(g, config.norm);
        }
        for (auto& [idx, col] : matrix) col[0] /= static_cast<double>(calib.size());
        // single column per layer: std is 0, the filter never triggers
        rec.report = apply_consistency_filter(
            matrix, config.rho > 0 ? config.rho
                                   : std::numeric_limits<double>::infinity());
        rec.chosen_original_index = select_layer(rec.report, rec.warnings);
        run.final_model.remove_layer(position_of(run.final_model,
                                                 rec.chosen_original_index));
        run.pruned_original_indices.push_back(rec.chosen_original_index);
        run.per_iteration.push_back(std::move(rec));
    }
    return run;
}

PruneRun prune_block_influence(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PruneConfig& config) {
    check_prune_config(model, config);
    if (calib.empty())
        throw ValidationError("prune_block_influence: empty calibration set");
    PruneRun run = make_run(model, config);
    IterationRecord rec;
    rec.layers_evaluated = static_cast<int>(run.final_model.layers().size());
    auto scores = block_influence_baseline(run.final_model, calib);
    ImportanceMatrix matrix;
    for (const auto& [idx, v] : scores) matrix[idx] = {v};
    rec.report = apply_consistency_filter(
        matrix, std::numeric_limits<double>::infinity());
    std::vector<std::pair<double, int>> ranked;
    for (const auto& [idx, v] : scores) ranked.emplace_back(v, idx);
    std::sort(ranked.begin(), ranked.end());
    for (int l = 0; l < config.layers_to_prune; ++l) {
        const int idx = ranked[l].second;
        run.final_model.remove_layer(position_of(run.final_model, idx));
        run.pruned_original_indices.push_back(idx);
    }
    rec.chosen_original_index =
        run.pruned_original_indices.empty() ? -1 : run.pruned_original_indices.front();
    run.per_iteration.push_back(std::move(rec));
    return run;
}

PruneRun run_prune(const TransformerModel& model, const std::vector<std::string>& calib,
                   const PruneConfig& config) {
    switch (config.mode) {
        case PruneMode::FullPip: return pip_prune(model, calib, config);
        case PruneMode::NoIteration: return prune_one_shot(model, calib, config);
        case PruneMode::NoPerturbation:
            return prune_no_perturbation(model, calib, config);
        case PruneMode::BlockInfluence:
            return prune_block_influence(model, calib, config);
    }
    throw ValidationError("bad prune mode");
}

LayerRemovalReport layer_removal_study(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PerturbationSpec& spec, NormKind norm,
                               int exhaustive_cap) {
    const int n = static_cast<int>(model.layers().size());
    if (n > exhaustive_cap)
        throw ValidationError("layer_removal_study: layer count exceeds exhaustive cap");
    if (calib.empty()) throw ValidationError("layer_removal_study: empty calibration set");

    auto matrix = pert_import(model, calib, spec, norm);
    auto pairs = perturb_corpus(calib, spec, 0);

    LayerRemovalReport report;
    for (int pos = 0; pos < n; ++pos) {
        LayerRemovalEntry entry;
        entry.original_index = model.layers()[pos].original_index;
        const auto& draws = matrix.at(entry.original_index);
        for (double v : draws) entry.pert_import += v;
        entry.pert_import /= draws.size();

        TransformerModel pruned = model.deep_copy();
        pruned.remove_layer(pos);
        // mean L2 gap of final-position logits between the two views
        double total = 0;
        for (const auto& pair : pairs) {
            auto to = tokenize(pair.original, pruned.config().max_seq_len);
            auto tp = tokenize(pair.perturbed, pruned.config().max_seq_len);
            Tensor lo = pruned.forward(to);
            Tensor lp = pruned.forward(tp);
            const int v = lo.cols();
            const double* a = lo.values().data() + (lo.rows() - 1) * v;
            const double* b = lp.values().data() + (lp.rows() - 1) * v;
            double s = 0;
            for (int j = 0; j < v; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
            total += std::sqrt(s);
        }
        entry.discrepancy = total / pairs.size();
        report.entries.push_back(entry);
    }

    auto cmp = [](const LayerRemovalEntry& a, const LayerRemovalEntry& b) {
        return a.pert_import < b.pert_import;
    };
    auto mn = std::min_element(report.entries.begin(), report.entries.end(), cmp);
    auto mx = std::max_element(report.entries.begin(), report.entries.end(), cmp);
    report.argmin_index = mn->original_index;
    report.argmax_index = mx->original_index;
    report.argmin_discrepancy = mn->discrepancy;
    report.argmax_discrepancy = mx->discrepancy;
    return report;
}

std::string PruneRun::serialize_manifest() const {
    std::ostringstream os;
    os.precision(17);
    os << "pip-run-manifest v1\n";
    os << "mode " << to_string(config.mode) << "\n";
    os << "layers_to_prune " << config.layers_to_prune << "\n";
    os << "norm " << to_string(config.norm) << "\n";
    os << "rho " << config.rho << "\n";
    os << "perturb_method " << to_string(config.perturbation.method) << "\n";
    os << "perturb_seed " << config.perturbation.seed << "\n";
    os << "perturb_draws " << config.perturbation.draws << "\n";
    os << "pruned_original_indices";
    for (int idx : pruned_original_indices) os << ' ' << idx;
    os << "\n";
    for (std::size_t i = 0; i < per_iteration.size(); ++i) {
        const auto& rec = per_iteration[i];
        os << "iteration " << i << " evaluated " << rec.layers_evaluated
           << " chose " << rec.chosen_original_index << " wall_time_s "
           << rec.wall_time_s << "\n";
    }
    for (const auto& w : warnings) os << "warning " << w << "\n";
    return os.str();
}

}  // namespace pip
