#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pip/pruner.hpp"

namespace pip {

struct EvalResult {
    double ppl = 0;
    long token_count = 0;
    double nll_sum = 0;
    std::string corpus_id;
};

struct QuadraticFit {
    double a = 0, b = 0, c = 0;
    double r_squared = 0;
};

struct TimingCurve {
    std::vector<std::pair<int, double>> points;  // (m, PT(m))
    std::vector<double> second_differences;
    QuadraticFit fit;

    std::string plot_data() const;  // two-column "m PT" text
};

struct ModelStats {
    std::size_t param_count = 0;
    std::size_t est_memory_bytes = 0;
    double tpot_ms = 0;
    double pruning_ratio = 0;
};

// exp of mean next-token NLL over strided windows of the byte stream
EvalResult perplexity(const TransformerModel& model, const std::string& corpus,
                      int stride, const std::string& corpus_id = "");

ModelStats model_stats(const TransformerModel& model,
                       std::optional<std::size_t> base_param_count = std::nullopt,
                       bool measure_tpot = false);

// greedy decoding latency, median of `runs` passes of `tokens` tokens
double measure_tpot_ms(const TransformerModel& model, int tokens = 128, int runs = 5);

QuadraticFit fit_quadratic(const std::vector<std::pair<int, double>>& points);

// Cumulative pruning time PT(m) for m = 1..m_max from one full_pip run.
// With a CostMeter-driven fake clock the curve is exactly quadratic.
TimingCurve timing_curve(const TransformerModel& model,
                         const std::vector<std::string>& calib,
                         const PruneConfig& config, int m_max,
                         bool use_fake_clock = false);

struct AblationCell {
    double ratio = 0;  // requested layer-pruning ratio
    PruneMode mode = PruneMode::FullPip;
    int layers_pruned = 0;
    double ppl = 0;
};

std::vector<AblationCell> ablation_table(const TransformerModel& model,
                                         const std::vector<std::string>& calib,
                                         const std::string& eval_corpus,
                                         const PruneConfig& base_config,
                                         const std::vector<double>& ratios,
                                         const std::vector<PruneMode>& modes);

std::string format_ablation_table(const std::vector<AblationCell>& cells);

}  // namespace pip
