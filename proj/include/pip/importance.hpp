#pragma once

#include <map>
#include <string>
#include <vector>

#include "pip/model.hpp"
#include "pip/perturb.hpp"

namespace pip {

enum class NormKind { L1, L2, Linf };

NormKind norm_from_string(const std::string& s);
std::string to_string(NormKind n);

// Counts layer forward+backward evaluations; used by the deterministic
// timing oracle. One unit = one layer's forward plus backward pass.
struct CostMeter {
    double units = 0;
    void charge_gradient_pass(int layer_count) { units += layer_count; }
};

struct LayerImportance {
    std::vector<double> per_draw_values;  // length K, each >= 0
    double mean_value = 0;
    double std_dev = 0;
    bool filtered = false;
    double final_pi = 0;  // +inf iff filtered
};

struct ImportanceReport {
    std::map<int, LayerImportance> layers;  // keyed by original_index
    double rho = 0;

    std::string serialize() const;
    static ImportanceReport parse(const std::string& text);
};

// Per-layer values keyed by original_index; columns are perturbation draws.
using ImportanceMatrix = std::map<int, std::vector<double>>;

// How the consistency discriminator measures variability: across the K
// perturbation draws (canonical) or across calibration samples within one draw.
enum class StdMode { AcrossDraws, AcrossSamples };

double aggregate(const std::vector<double>& grad, NormKind norm);

std::map<int, double> pert_import_single(const TransformerModel& model,
                                         const std::string& sample,
                                         const std::string& perturbed,
                                         NormKind norm,
                                         CostMeter* meter = nullptr);

ImportanceMatrix pert_import(const TransformerModel& model,
                             const std::vector<std::string>& calib,
                             const PerturbationSpec& spec, NormKind norm,
                             CostMeter* meter = nullptr);

// Per-sample variability variant: one draw, columns are calibration samples.
ImportanceMatrix pert_import_per_sample(const TransformerModel& model,
                                        const std::vector<std::string>& calib,
                                        const PerturbationSpec& spec, NormKind norm,
                                        CostMeter* meter = nullptr);

ImportanceReport apply_consistency_filter(const ImportanceMatrix& matrix, double rho);

std::map<int, double> block_influence_baseline(const TransformerModel& model,
                                               const std::vector<std::string>& calib);

}  // namespace pip
