#include "pip/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace pip {

EvalResult perplexity(const TransformerModel& model, const std::string& corpus,
                      int stride, const std::string& corpus_id) {
    const int max_len = model.config().max_seq_len;
    if (stride < 1 || stride > max_len)
        throw ValidationError("perplexity: stride must be in [1, max_seq_len]");
    if (corpus.size() < 2) throw ValidationError("perplexity: corpus too short");

    EvalResult result;
    result.corpus_id = corpus_id;
    // non-overlapping windows of `stride` bytes; each byte is predicted once
    for (std::size_t off = 0; off + 1 < corpus.size();
         off += static_cast<std::size_t>(stride)) {
        const int t = static_cast<int>(
            std::min<std::size_t>(stride, corpus.size() - off - 1));
        std::vector<int> inputs(t), targets(t);
        for (int i = 0; i < t; ++i) {
            inputs[i] = static_cast<unsigned char>(corpus[off + i]);
            targets[i] = static_cast<unsigned char>(corpus[off + i + 1]);
        }
        Tensor logits = model.forward(inputs);
        Tensor loss = cross_entropy_next_token(logits, targets);
        result.nll_sum += loss.item() * t;
        result.token_count += t;
    }
    result.ppl = std::exp(result.nll_sum / result.token_count);
    return result;
}

double measure_tpot_ms(const TransformerModel& model, int tokens, int runs) {
    std::vector<double> times;
    std::vector<int> context{kBosToken};
    for (int r = 0; r < runs; ++r) {
        std::vector<int> seq = context;
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < tokens; ++i) {
            if (static_cast<int>(seq.size()) >= model.config().max_seq_len)
                seq.erase(seq.begin());
            Tensor logits = model.forward(seq);
            const int v = logits.cols();
            const double* last = logits.values().data() + (logits.rows() - 1) * v;
            int best = 0;
            for (int j = 1; j < v; ++j)
                if (last[j] > last[best]) best = j;
            seq.push_back(best);
        }
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                        tokens);
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

ModelStats model_stats(const TransformerModel& model,
                       std::optional<std::size_t> base_param_count,
                       bool measure_tpot) {
    ModelStats stats;
    stats.param_count = model.parameter_count();
    stats.est_memory_bytes = stats.param_count * sizeof(double);
    if (base_param_count) {
        const std::size_t base = *base_param_count;
        if (base < stats.param_count)
            throw ValidationError("model_stats: base smaller than pruned model");
        stats.pruning_ratio =
            static_cast<double>(base - stats.param_count) / static_cast<double>(base);
    }
    if (measure_tpot) stats.tpot_ms = measure_tpot_ms(model);
    return stats;
}

QuadraticFit fit_quadratic(const std::vector<std::pair<int, double>>& points) {
    if (points.size() < 3)
        throw ValidationError("fit_quadratic: need at least 3 points");
    // least squares on [1, m, m^2] via normal equations
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    double t0 = 0, t1 = 0, t2 = 0;
    for (const auto& [m, y] : points) {
        const double x = m;
        s0 += 1;
        s1 += x;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
        t0 += y;
        t1 += x * y;
        t2 += x * x * y;
    }
    // solve 3x3 system by Cramer's rule
    auto det3 = [](double a11, double a12, double a13, double a21, double a22,
                   double a23, double a31, double a32, double a33) {
        return a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) +
               a13 * (a21 * a32 - a22 * a31);
    };
    const double d = det3(s4, s3, s2, s3, s2, s1, s2, s1, s0);
    QuadraticFit fit;
    fit.a = det3(t2, s3, s2, t1, s2, s1, t0, s1, s0) / d;
    fit.b = det3(s4, t2, s2, s3, t1, s1, s2, t0, s0) / d;
    fit.c = det3(s4, s3, t2, s3, s2, t1, s2, s1, t0) / d;
    const double mean_y = t0 / s0;
    double ss_res = 0, ss_tot = 0;
    for (const auto& [m, y] : points) {
        const double x = m;
        const double pred = fit.a * x * x + fit.b * x + fit.c;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

TimingCurve timing_curve(const TransformerModel& model,
                         const std::vector<std::string>& calib,
                         const PruneConfig& config, int m_max, bool use_fake_clock) {
    if (m_max < 3)
        throw ValidationError("timing_curve: m_max < 3 gives no second differences");
    if (m_max >= static_cast<int>(model.layers().size()))
        throw ValidationError("timing_curve: m_max must be below the layer count");

    PruneConfig cfg = config;
    cfg.mode = PruneMode::FullPip;
    cfg.layers_to_prune = m_max;

    TimingCurve curve;
    if (use_fake_clock) {
        // clock reads accumulated layer forward+backward cost units
        CostMeter meter;
        auto clock = [&meter] { return meter.units; };
        PruneRun run = pip_prune(model, calib, cfg, &meter, clock);
        for (int m = 1; m <= m_max; ++m)
            curve.points.emplace_back(m, run.per_iteration[m - 1].wall_time_s);
    } else {
        PruneRun run = pip_prune(model, calib, cfg);
        for (int m = 1; m <= m_max; ++m)
            curve.points.emplace_back(m, run.per_iteration[m - 1].wall_time_s);
    }
    for (std::size_t i = 0; i + 2 < curve.points.size(); ++i)
        curve.second_differences.push_back(curve.points[i + 2].second -
                                           2 * curve.points[i + 1].second +
                                           curve.points[i].second);
    curve.fit = fit_quadratic(curve.points);
    return curve;
}

std::string TimingCurve::plot_data() const {
    std::ostringstream os;
    os.precision(17);
    os << "# m PT_seconds\n";
    for (const auto& [m, pt] : points) os << m << ' ' << pt << "\n";
    return os.str();
}

std::vector<AblationCell> ablation_table(const TransformerModel& model,
                                         const std::vector<std::string>& calib,
                                         const std::string& eval_corpus,
                                         const PruneConfig& base_config,
                                         const std::vector<double>& ratios,
                                         const std::vector<PruneMode>& modes) {
    std::vector<AblationCell> cells;
    const int n = static_cast<int>(model.layers().size());
    for (double ratio : ratios) {
        const int layers = static_cast<int>(std::lround(ratio * n));
        for (PruneMode mode : modes) {
            PruneConfig cfg = base_config;
            cfg.mode = mode;
            cfg.layers_to_prune = layers;
            PruneRun run = run_prune(model, calib, cfg);
            AblationCell cell;
            cell.ratio = ratio;
            cell.mode = mode;
            cell.layers_pruned = layers;
            cell.ppl = perplexity(run.final_model, eval_corpus,
                                  run.final_model.config().max_seq_len)
                           .ppl;
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
    std::ostringstream os;
    os << "ratio mode layers_pruned ppl\n";
    os.precision(10);
    for (const auto& c : cells)
        os << c.ratio << ' ' << to_string(c.mode) << ' ' << c.layers_pruned << ' '
           << c.ppl << "\n";
    return os.str();
}

}  // namespace pip
