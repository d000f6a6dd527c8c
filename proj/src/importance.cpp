#include "pip/importance.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pip {

NormKind norm_from_string(const std::string& s) {
    if (s == "l1" || s == "L1") return NormKind::L1;
    if (s == "l2" || s == "L2") return NormKind::L2;
    if (s == "linf" || s == "Linf" || s == "LInf") return NormKind::Linf;
    throw ValidationError("unknown norm: " + s);
}

std::string to_string(NormKind n) {
    switch (n) {
        case NormKind::L1: return "l1";
        case NormKind::L2: return "l2";
        case NormKind::Linf: return "linf";
    }
    return "?";
}

double aggregate(const std::vector<double>& grad, NormKind norm) {
    if (grad.empty()) throw ValidationError("aggregate: empty gradient vector");
    for (double v : grad)
        if (!std::isfinite(v))
            throw ValidationError("aggregate: non-finite gradient entry");
    switch (norm) {
        case NormKind::L1: {
            double s = 0;
            for (double v : grad) s += std::abs(v);
            return s;
        }
        case NormKind::L2: {
            double s = 0;
            for (double v : grad) s += v * v;
            return std::sqrt(s);
        }
        case NormKind::Linf: {
            double m = 0;
            for (double v : grad) m = std::max(m, std::abs(v));
            return m;
        }
    }
    throw ValidationError("aggregate: bad norm kind");
}

namespace {

std::map<int, double> aggregated_gradients(const TransformerModel& model,
                                           const std::string& text, NormKind norm,
                                           CostMeter* meter) {
    auto tokens = tokenize(text, model.config().max_seq_len);
    auto grads = model.sft_gradients(tokens);
    if (meter) meter->charge_gradient_pass(static_cast<int>(model.layers().size()));
    std::map<int, double> out;
    for (const auto& [idx, g] : grads) out[idx] = aggregate(g, norm);
    return out;
}

}  // namespace

std::map<int, double> pert_import_single(const TransformerModel& model,
                                         const std::string& sample,
                                         const std::string& perturbed,
                                         NormKind norm, CostMeter* meter) {
    auto g_orig = aggregated_gradients(model, sample, norm, meter);
    auto g_pert = aggregated_gradients(model, perturbed, norm, meter);
    std::map<int, double> out;
    for (const auto& [idx, g] : g_orig) out[idx] = std::abs(g_pert.at(idx) - g);
    return out;
}

ImportanceMatrix pert_import(const TransformerModel& model,
                             const std::vector<std::string>& calib,
                             const PerturbationSpec& spec, NormKind norm,
                             CostMeter* meter) {
    if (calib.empty()) throw ValidationError("pert_import: empty calibration set");
    ImportanceMatrix matrix;
    for (const auto& layer : model.layers())
        matrix[layer.original_index].assign(spec.draws, 0.0);
    for (int k = 0; k < spec.draws; ++k) {
        auto pairs = perturb_corpus(calib, spec, k);
        // fixed sample-order reduction for determinism
        for (const auto& pair : pairs) {
            auto pi = pert_import_single(model, pair.original, pair.perturbed,
                                         norm, meter);
            for (const auto& [idx, v] : pi) matrix[idx][k] += v;
        }
        for (auto& [idx, col] : matrix) col[k] /= static_cast<double>(pairs.size());
    }
    return matrix;
}

ImportanceMatrix pert_import_per_sample(const TransformerModel& model,
                                        const std::vector<std::string>& calib,
                                        const PerturbationSpec& spec, NormKind norm,
                                        CostMeter* meter) {
    if (calib.empty()) throw ValidationError("pert_import: empty calibration set");
    ImportanceMatrix matrix;
    for (const auto& layer : model.layers())
        matrix[layer.original_index].assign(calib.size(), 0.0);
    auto pairs = perturb_corpus(calib, spec, 0);
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        auto pi = pert_import_single(model, pairs[s].original, pairs[s].perturbed,
                                     norm, meter);
        for (const auto& [idx, v] : pi) matrix[idx][s] = v;
    }
    return matrix;
}

ImportanceReport apply_consistency_filter(const ImportanceMatrix& matrix, double rho) {
    if (!(rho > 0)) throw ValidationError("consistency filter: rho must be > 0");
    ImportanceReport report;
    report.rho = rho;
    for (const auto& [idx, draws] : matrix) {
        LayerImportance li;
        li.per_draw_values = draws;
        double mean = 0;
        for (double v : draws) mean += v;
        mean /= static_cast<double>(draws.size());
        li.mean_value = mean;
        double var = 0;  // population variance; std of a single draw is 0
        for (double v : draws) var += (v - mean) * (v - mean);
        var /= static_cast<double>(draws.size());
        li.std_dev = std::sqrt(var);
        li.filtered = li.std_dev >= rho;
        li.final_pi = li.filtered ? std::numeric_limits<double>::infinity() : mean;
        report.layers[idx] = std::move(li);
    }
    return report;
}

std::map<int, double> block_influence_baseline(const TransformerModel& model,
                                               const std::vector<std::string>& calib) {
    if (calib.empty())
        throw ValidationError("block_influence: empty calibration set");
    const int d = model.config().d_model;
    std::map<int, double> sums;
    std::map<int, int> counts;
    for (const auto& text : calib) {
        auto tokens = tokenize(text, model.config().max_seq_len);
        std::vector<LayerTrace> traces;
        model.forward_traced(tokens, traces);
        for (const auto& tr : traces) {
            const int t = static_cast<int>(tr.input.size()) / d;
            for (int i = 0; i < t; ++i) {
                double dot = 0, na = 0, nb = 0;
                for (int j = 0; j < d; ++j) {
                    const double a = tr.input[i * d + j];
                    const double b = tr.output[i * d + j];
                    dot += a * b;
                    na += a * a;
                    nb += b * b;
                }
                const double denom = std::sqrt(na) * std::sqrt(nb) + 1e-12;
                sums[tr.original_index] += dot / denom;
                counts[tr.original_index] += 1;
            }
        }
    }
    std::map<int, double> out;
    for (const auto& [idx, s] : sums) out[idx] = 1.0 - s / counts[idx];
    return out;
}

std::string ImportanceReport::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "pip-importance-report v1\n";
    os << "rho " << rho << "\n";
    for (const auto& [idx, li] : layers) {
        os << "layer " << idx << " draws";
        for (double v : li.per_draw_values) os << ' ' << v;
        os << " mean " << li.mean_value << " std " << li.std_dev << " verdict "
           << (li.filtered ? "filtered" : "kept") << "\n";
    }
    return os.str();
}

ImportanceReport ImportanceReport::parse(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "pip-importance-report v1")
        throw ValidationError("importance report: bad header");
    ImportanceReport report;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "rho") {
            ls >> report.rho;
        } else if (tag == "layer") {
            int idx;
            std::string word;
            ls >> idx >> word;  // "draws"
            LayerImportance li;
            std::vector<std::string> rest;
            while (ls >> word) rest.push_back(word);
            std::size_t i = 0;
            while (i < rest.size() && rest[i] != "mean")
                li.per_draw_values.push_back(std::stod(rest[i++]));
            // expected tail: mean <v> std <v> verdict <kept|filtered>
            if (i + 5 >= rest.size() || rest[i] != "mean" || rest[i + 2] != "std" ||
                rest[i + 4] != "verdict")
                throw ValidationError("importance report: truncated layer line");
            li.mean_value = std::stod(rest[i + 1]);
            li.std_dev = std::stod(rest[i + 3]);
            li.filtered = rest[i + 5] == "filtered";
            li.final_pi = li.filtered ? std::numeric_limits<double>::infinity()
                                      : li.mean_value;
            report.layers[idx] = std::move(li);
        } else {
            throw ValidationError("importance report: unknown line tag " + tag);
        }
    }
    return report;
}

}  // namespace pip
