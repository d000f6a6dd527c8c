// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>

#include "finite_diff.hpp"
#include "pip/checkpoint.hpp"
#include "pip/config.hpp"

using namespace pip;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool ok,
            const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": "
              << what;
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << std::endl;
    if (!ok) ++failures;
}

ModelConfig toy_config(int layers, int d_model = 16, std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.n_layers = layers;
    cfg.d_model = d_model;
    cfg.n_heads = 2;
    cfg.d_ff = 2 * d_model;
    cfg.max_seq_len = 64;
    cfg.seed = seed;
    return cfg;
}

std::string training_corpus() {
    std::string corpus;
    for (int i = 0; i < 200; ++i)
        corpus += "the meeting will start later today. the child looks happy. "
                  "the conference host welcomed attendees. ";
    return corpus;
}

std::vector<std::string> calib_set() {
    return {"the meeting will start later today",
            "the conference host welcomed attendees",
            "the child looks happy this morning"};
}

TransformerModel trained_model(int layers, std::uint64_t seed, int steps = 200) {
    auto m = TransformerModel::init(toy_config(layers, 16, seed));
    TrainOptions opts;
    opts.steps = steps;
    opts.seq_len = 48;
    opts.learning_rate = 0.1;
    opts.seed = seed;
    train_toy(m, training_corpus(), opts);
    return m;
}

PruneConfig prune_config(int layers_to_prune, std::uint64_t seed = 17) {
    PruneConfig cfg;
    cfg.layers_to_prune = layers_to_prune;
    cfg.perturbation.seed = seed;
    cfg.perturbation.draws = 2;
    cfg.perturbation.method = PerturbMethod::Replace;
    return cfg;
}

// --- criterion 1: gradient exactness --------------------------------------

void criterion_gradient_exactness() {
    const auto start = std::chrono::steady_clock::now();
    auto m = TransformerModel::init(toy_config(2, 16, 4));
    auto tokens = tokenize("abcd", 64);
    std::vector<int> inputs(tokens.begin(), tokens.end() - 1);
    std::vector<int> targets(tokens.begin() + 1, tokens.end());
    m.zero_all_grads();
    auto loss = cross_entropy_next_token(m.forward(inputs), targets);
    backward(loss);
    auto loss_fn = [&] {
        return cross_entropy_next_token(m.forward(inputs), targets).item();
    };
    double worst = 0;
    for (auto p : m.parameters()) {
        auto fd = pip::testing::finite_diff_grad(p, loss_fn, 1e-4);
        worst = std::max(worst, pip::testing::max_rel_err(p.grad(), fd));
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    report(1, "autodiff matches central finite differences on a 2-layer model",
           worst < 1e-4 && secs < 60,
           "max rel err " + std::to_string(worst) + ", " +
               std::to_string(secs) + "s");
}

// --- criterion 2: norm aggregation ----------------------------------------

void criterion_norms() {
    bool ok = true;
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    // unit vectors
    ok &= close(aggregate({1, 0, 0}, NormKind::L1), 1);
    ok &= close(aggregate({0, -1, 0}, NormKind::L2), 1);
    ok &= close(aggregate({0, 0, 1}, NormKind::Linf), 1);
    // stated examples
    ok &= close(aggregate({1, -2, 3}, NormKind::L1), 6);
    ok &= close(aggregate({3, 4}, NormKind::L2), 5);
    ok &= close(aggregate({1, -7, 2}, NormKind::Linf), 7);
    report(2, "L1/L2/Linf aggregation exact on unit vectors and examples", ok);
}

// --- criterion 3: importance null and homogeneity -------------------------

void criterion_null_and_homogeneity() {
    auto m = TransformerModel::init(toy_config(3, 16, 8));
    bool null_ok = true;
    for (const auto& text : calib_set()) {
        auto pi = pert_import_single(m, text, text, NormKind::L2);
        for (const auto& [idx, v] : pi) null_ok &= v == 0.0;
    }
    // injected synthetic layer gradients, lambda = 3
    bool homog_ok = true;
    std::vector<double> g{0.4, -1.1, 2.2, 0.05, -3.0};
    std::vector<double> gp{0.1, 1.3, -0.7, 2.0, 0.9};
    for (auto norm : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
        const double base = std::abs(aggregate(gp, norm) - aggregate(g, norm));
        std::vector<double> g3 = g, gp3 = gp;
        for (auto& x : g3) x *= 3.0;
        for (auto& x : gp3) x *= 3.0;
        const double scaled = std::abs(aggregate(gp3, norm) - aggregate(g3, norm));
        homog_ok &= std::abs(scaled - 3.0 * base) <= 1e-12 * std::max(1.0, scaled);
    }
    report(3, "identity perturbation gives PI == 0; lambda=3 scaling is exact",
           null_ok && homog_ok);
}

// --- criterion 4: iterative-loop fidelity ------------------------------------

void criterion_loop_fidelity(const TransformerModel& trained) {
    auto cfg = prune_config(2);
    auto run = pip_prune(trained, calib_set(), cfg);

    // hand trace using the importance module's own outputs
    auto current = trained.deep_copy();
    std::vector<int> expected;
    bool counts_ok = true;
    for (int l = 0; l < 2; ++l) {
        counts_ok &= run.per_iteration[l].layers_evaluated ==
                     static_cast<int>(current.layers().size());
        auto matrix = pert_import(current, calib_set(), cfg.perturbation, cfg.norm);
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
        double rho = 5.0 * stds[stds.size() / 2];
        if (rho <= 0) rho = std::numeric_limits<double>::infinity();
        auto rep = apply_consistency_filter(matrix, rho);
        int best = -1;
        double best_v = std::numeric_limits<double>::infinity();
        for (const auto& [idx, li] : rep.layers)
            if (!li.filtered && li.final_pi < best_v) {
                best_v = li.final_pi;
                best = idx;
            }
        if (best < 0)
            for (const auto& [idx, li] : rep.layers)
                if (li.mean_value < best_v) {
                    best_v = li.mean_value;
                    best = idx;
                }
        expected.push_back(best);
        for (std::size_t pos = 0; pos < current.layers().size(); ++pos)
            if (current.layers()[pos].original_index == best) {
                current.remove_layer(static_cast<int>(pos));
                break;
            }
    }
    report(4, "pip_prune matches a hand-traced run and evaluates N-l+1 layers",
           run.pruned_original_indices == expected && counts_ok);
}

// --- criterion 5: layer-removal directional check -----------------------------

void criterion_removal_study() {
    const auto start = std::chrono::steady_clock::now();
    int agree = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        // undertrained models have undifferentiated layers and no stable
        // importance ordering; train long enough for the ranking to mean something
        auto m = trained_model(6, 100 + s, 600);
        PerturbationSpec spec;
        spec.seed = 40 + s;
        spec.draws = 2;
        spec.method = PerturbMethod::Replace;
        auto rep = layer_removal_study(m, calib_set(), spec, NormKind::L2);
        if (rep.argmin_discrepancy >= rep.argmax_discrepancy) ++agree;
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    report(5,
           "pruning the PI-argmin layer preserves view discrimination in >= 4/5 seeds",
           agree >= 4 && secs < 600,
           std::to_string(agree) + "/5 seeds, " + std::to_string(secs) + "s");
}

// --- criterion 6: quadratic pruning time ----------------------------------

void criterion_quadratic_time() {
    // exact fake-clock check
    auto m8 = TransformerModel::init(toy_config(8, 16, 3));
    auto cfg = prune_config(0);
    cfg.perturbation.draws = 2;
    auto fake = timing_curve(m8, calib_set(), cfg, 5, /*use_fake_clock=*/true);
    bool fake_ok = std::abs(fake.fit.r_squared - 1.0) <= 1e-12;
    const double expect_sd = -2.0 * 3 * 2;  // -2 |D| K
    for (double sd : fake.second_differences)
        fake_ok &= sd == expect_sd && sd < 0;

    // real clock, 12 layers, m = 8
    auto m12 = trained_model(12, 7, 60);
    auto real = timing_curve(m12, calib_set(), cfg, 8, /*use_fake_clock=*/false);
    const bool real_ok = real.fit.r_squared >= 0.99 && real.fit.a < 0;
    report(6, "PT(m) is exactly quadratic on the fake clock and R2 >= 0.99 real",
           fake_ok && real_ok,
           "real R2 " + std::to_string(real.fit.r_squared) + ", a " +
               std::to_string(real.fit.a));
}

// --- criterion 7: ablation trend ------------------------------------------

void criterion_ablation_trend() {
    const std::string held_out = training_corpus().substr(0, 3000);
    double full_sum = 0, noiter_sum = 0, nopert_sum = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        auto m = trained_model(6, 300 + s, 160);
        auto cfg = prune_config(2, 70 + s);  // 2 of 6 layers ~ 33%
        auto eval_mode = [&](PruneMode mode) {
            PruneConfig c = cfg;
            c.mode = mode;
            auto run = run_prune(m, calib_set(), c);
            return perplexity(run.final_model, held_out, 64).ppl;
        };
        full_sum += eval_mode(PruneMode::FullPip);
        noiter_sum += eval_mode(PruneMode::NoIteration);
        nopert_sum += eval_mode(PruneMode::NoPerturbation);
    }
    const bool ok = full_sum <= noiter_sum && full_sum <= nopert_sum;
    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "mean PPL full %.2f, no_iter %.2f, no_pert %.2f",
                  full_sum / seeds, noiter_sum / seeds, nopert_sum / seeds);
    report(7, "mean PPL ordering full_pip <= no_iteration and <= no_perturbation",
           ok, detail);
}

// --- criterion 8: consistency discriminator -------------------------------

void criterion_consistency() {
    const double rho = 0.5;
    ImportanceMatrix matrix;
    matrix[0] = {1.0, 1.0};
    matrix[1] = {0.0, 10.0 * rho};  // inconsistent across draws: std >= rho
    matrix[2] = {3.0, 3.0};
    auto rep = apply_consistency_filter(matrix, rho);
    bool ok = rep.layers.at(1).filtered &&
              std::isinf(rep.layers.at(1).final_pi);
    // never selected while a finite layer remains
    int best = -1;
    double best_v = std::numeric_limits<double>::infinity();
    for (const auto& [idx, li] : rep.layers)
        if (!li.filtered && li.final_pi < best_v) {
            best_v = li.final_pi;
            best = idx;
        }
    ok &= best == 0;
    report(8, "a high-variability layer gets final_pi = +inf and is never chosen",
           ok);
}

// --- criterion 9: statistics accounting -----------------------------------

void criterion_statistics() {
    auto m = TransformerModel::init(toy_config(6, 16, 11));
    const auto base = m.parameter_count();
    const auto per_layer = m.layer_parameter_count(0);
    auto pruned = m.deep_copy();
    pruned.remove_layer(5);
    pruned.remove_layer(0);
    auto stats = model_stats(pruned, base);
    const bool ok =
        stats.param_count == base - 2 * per_layer &&
        stats.pruning_ratio ==
            static_cast<double>(2 * per_layer) / static_cast<double>(base);
    report(9, "pruning-ratio arithmetic is exact on integer parameter counts", ok);
}

// --- criterion 10: end-to-end reproducibility -----------------------------

void criterion_reproducibility() {
    const auto start = std::chrono::steady_clock::now();
    auto pipeline = [] {
        auto m = trained_model(6, 55, 120);
        auto run = pip_prune(m, calib_set(), prune_config(2, 99));
        auto ppl = perplexity(run.final_model, training_corpus().substr(0, 2000), 64).ppl;
        std::vector<double> flat;
        for (auto p : run.final_model.parameters())
            flat.insert(flat.end(), p.values().begin(), p.values().end());
        return std::tuple{run.pruned_original_indices, flat, ppl};
    };
    auto a = pipeline();
    auto b = pipeline();
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    const bool ok = a == b && secs < 900;
    report(10, "train-prune-eval twice gives identical P, weights, and PPL",
           ok, std::to_string(secs) + "s");
}

}  // namespace

int main() {
    criterion_gradient_exactness();
    criterion_norms();
    criterion_null_and_homogeneity();
    auto trained = trained_model(6, 13, 160);
    criterion_loop_fidelity(trained);
    criterion_removal_study();
    criterion_quadratic_time();
    criterion_ablation_trend();
    criterion_consistency();
    criterion_statistics();
    criterion_reproducibility();
    if (failures == 0) {
        std::cout << "all acceptance criteria passed" << std::endl;
        return 0;
    }
    std::cout << failures << " acceptance criteria failed" << std::endl;
    return 1;
}
