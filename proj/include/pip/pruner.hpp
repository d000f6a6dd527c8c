#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pip/importance.hpp"
#include "pip/model.hpp"

namespace pip {

enum class PruneMode { FullPip, NoIteration, NoPerturbation, BlockInfluence };

PruneMode prune_mode_from_string(const std::string& s);
std::string to_string(PruneMode m);

struct PruneConfig {
    int layers_to_prune = 1;  // L
    double rho = 0;           // <= 0 selects the adaptive default (5 x median std)
    NormKind norm = NormKind::L2;
    PerturbationSpec perturbation;
    PruneMode mode = PruneMode::FullPip;
    StdMode std_mode = StdMode::AcrossDraws;
};

struct IterationRecord {
    ImportanceReport report;
    int chosen_original_index = -1;
    int layers_evaluated = 0;
    double wall_time_s = 0;  // cumulative clock at end of iteration
    std::vector<std::string> warnings;
};

struct PruneRun {
    std::vector<int> pruned_original_indices;  // removal order, original numbering
    std::vector<IterationRecord> per_iteration;
    TransformerModel final_model;
    PruneConfig config;
    std::vector<std::string> warnings;

    std::string serialize_manifest() const;
};

// Injectable clock: returns seconds (real) or accumulated cost units (fake).
using ClockFn = std::function<double()>;

ClockFn monotonic_clock();

PruneRun pip_prune(const TransformerModel& model, const std::vector<std::string>& calib,
                   const PruneConfig& config, CostMeter* meter = nullptr,
                   ClockFn clock = monotonic_clock());

PruneRun prune_one_shot(const TransformerModel& model,
                        const std::vector<std::string>& calib,
                        const PruneConfig& config, CostMeter* meter = nullptr);

PruneRun prune_no_perturbation(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PruneConfig& config, CostMeter* meter = nullptr);

PruneRun prune_block_influence(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PruneConfig& config);

PruneRun run_prune(const TransformerModel& model, const std::vector<std::string>& calib,
                   const PruneConfig& config);

struct LayerRemovalEntry {
    int original_index = -1;
    double pert_import = 0;   // mean PI of the layer on the full model
    double discrepancy = 0;   // mean L2 gap of final-position logits after pruning it
};

struct LayerRemovalReport {
    std::vector<LayerRemovalEntry> entries;
    int argmin_index = -1;  // layer with smallest PI
    int argmax_index = -1;
    double argmin_discrepancy = 0;
    double argmax_discrepancy = 0;
};

// Exhaustive single-layer-removal study; layer count must stay small.
LayerRemovalReport layer_removal_study(const TransformerModel& model,
                               const std::vector<std::string>& calib,
                               const PerturbationSpec& spec, NormKind norm,
                               int exhaustive_cap = 8);

}  // namespace pip
