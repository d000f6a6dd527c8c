// Python bindings for the pruning laboratory core.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pip/checkpoint.hpp"
#include "pip/config.hpp"

namespace py = pybind11;
using namespace pip;

namespace {

// logits come back as (values, (rows, cols)) to keep numpy optional
py::tuple forward_py(const TransformerModel& m, const std::vector<int>& tokens) {
    Tensor logits = m.forward(tokens);
    return py::make_tuple(logits.values(),
                          py::make_tuple(logits.rows(), logits.cols()));
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "perturbation-based iterative layer pruning, desk scale";

    py::register_exception<DimensionError>(mod, "DimensionError");
    py::register_exception<ContractError>(mod, "ContractError");
    py::register_exception<ValidationError>(mod, "ValidationError");
    py::register_exception<CheckpointError>(mod, "CheckpointError");

    py::enum_<PerturbMethod>(mod, "PerturbMethod")
        .value("swap", PerturbMethod::Swap)
        .value("replace", PerturbMethod::Replace)
        .value("insert", PerturbMethod::Insert);

    py::enum_<NormKind>(mod, "NormKind")
        .value("l1", NormKind::L1)
        .value("l2", NormKind::L2)
        .value("linf", NormKind::Linf);

    py::enum_<PruneMode>(mod, "PruneMode")
        .value("full_pip", PruneMode::FullPip)
        .value("no_iteration", PruneMode::NoIteration)
        .value("no_perturbation", PruneMode::NoPerturbation)
        .value("block_influence", PruneMode::BlockInfluence);

    py::class_<ModelConfig>(mod, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("n_layers", &ModelConfig::n_layers)
        .def_readwrite("d_model", &ModelConfig::d_model)
        .def_readwrite("n_heads", &ModelConfig::n_heads)
        .def_readwrite("d_ff", &ModelConfig::d_ff)
        .def_readwrite("vocab_size", &ModelConfig::vocab_size)
        .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("validate", &ModelConfig::validate);

    py::class_<TrainOptions>(mod, "TrainOptions")
        .def(py::init<>())
        .def_readwrite("steps", &TrainOptions::steps)
        .def_readwrite("learning_rate", &TrainOptions::learning_rate)
        .def_readwrite("seq_len", &TrainOptions::seq_len)
        .def_readwrite("seed", &TrainOptions::seed);

    py::class_<PerturbationSpec>(mod, "PerturbationSpec")
        .def(py::init<>())
        .def_readwrite("method", &PerturbationSpec::method)
        .def_readwrite("words_per_sample", &PerturbationSpec::words_per_sample)
        .def_readwrite("seed", &PerturbationSpec::seed)
        .def_readwrite("draws", &PerturbationSpec::draws)
        .def_readwrite("lexicon", &PerturbationSpec::lexicon);

    py::class_<WordEdit>(mod, "WordEdit")
        .def_readonly("word_position", &WordEdit::word_position)
        .def_readonly("before", &WordEdit::before)
        .def_readonly("after", &WordEdit::after);

    py::class_<PerturbedPair>(mod, "PerturbedPair")
        .def_readonly("original", &PerturbedPair::original)
        .def_readonly("perturbed", &PerturbedPair::perturbed)
        .def_readonly("edits", &PerturbedPair::edits)
        .def_readonly("warnings", &PerturbedPair::warnings);

    py::class_<LayerImportance>(mod, "LayerImportance")
        .def_readonly("per_draw_values", &LayerImportance::per_draw_values)
        .def_readonly("mean_value", &LayerImportance::mean_value)
        .def_readonly("std_dev", &LayerImportance::std_dev)
        .def_readonly("filtered", &LayerImportance::filtered)
        .def_readonly("final_pi", &LayerImportance::final_pi);

    py::class_<ImportanceReport>(mod, "ImportanceReport")
        .def_readonly("layers", &ImportanceReport::layers)
        .def_readonly("rho", &ImportanceReport::rho)
        .def("serialize", &ImportanceReport::serialize)
        .def_static("parse", &ImportanceReport::parse);

    py::class_<PruneConfig>(mod, "PruneConfig")
        .def(py::init<>())
        .def_readwrite("layers_to_prune", &PruneConfig::layers_to_prune)
        .def_readwrite("rho", &PruneConfig::rho)
        .def_readwrite("norm", &PruneConfig::norm)
        .def_readwrite("perturbation", &PruneConfig::perturbation)
        .def_readwrite("mode", &PruneConfig::mode);

    py::class_<IterationRecord>(mod, "IterationRecord")
        .def_readonly("report", &IterationRecord::report)
        .def_readonly("chosen_original_index", &IterationRecord::chosen_original_index)
        .def_readonly("layers_evaluated", &IterationRecord::layers_evaluated)
        .def_readonly("wall_time_s", &IterationRecord::wall_time_s)
        .def_readonly("warnings", &IterationRecord::warnings);

    py::class_<PruneRun>(mod, "PruneRun")
        .def_readonly("pruned_original_indices", &PruneRun::pruned_original_indices)
        .def_readonly("per_iteration", &PruneRun::per_iteration)
        .def_readonly("final_model", &PruneRun::final_model)
        .def_readonly("warnings", &PruneRun::warnings)
        .def("serialize_manifest", &PruneRun::serialize_manifest);

    py::class_<LayerRemovalEntry>(mod, "LayerRemovalEntry")
        .def_readonly("original_index", &LayerRemovalEntry::original_index)
        .def_readonly("pert_import", &LayerRemovalEntry::pert_import)
        .def_readonly("discrepancy", &LayerRemovalEntry::discrepancy);

    py::class_<LayerRemovalReport>(mod, "LayerRemovalReport")
        .def_readonly("entries", &LayerRemovalReport::entries)
        .def_readonly("argmin_index", &LayerRemovalReport::argmin_index)
        .def_readonly("argmax_index", &LayerRemovalReport::argmax_index)
        .def_readonly("argmin_discrepancy", &LayerRemovalReport::argmin_discrepancy)
        .def_readonly("argmax_discrepancy", &LayerRemovalReport::argmax_discrepancy);

    py::class_<EvalResult>(mod, "EvalResult")
        .def_readonly("ppl", &EvalResult::ppl)
        .def_readonly("token_count", &EvalResult::token_count)
        .def_readonly("nll_sum", &EvalResult::nll_sum);

    py::class_<QuadraticFit>(mod, "QuadraticFit")
        .def_readonly("a", &QuadraticFit::a)
        .def_readonly("b", &QuadraticFit::b)
        .def_readonly("c", &QuadraticFit::c)
        .def_readonly("r_squared", &QuadraticFit::r_squared);

    py::class_<TimingCurve>(mod, "TimingCurve")
        .def_readonly("points", &TimingCurve::points)
        .def_readonly("second_differences", &TimingCurve::second_differences)
        .def_readonly("fit", &TimingCurve::fit)
        .def("plot_data", &TimingCurve::plot_data);

    py::class_<ModelStats>(mod, "ModelStats")
        .def_readonly("param_count", &ModelStats::param_count)
        .def_readonly("est_memory_bytes", &ModelStats::est_memory_bytes)
        .def_readonly("tpot_ms", &ModelStats::tpot_ms)
        .def_readonly("pruning_ratio", &ModelStats::pruning_ratio);

    py::class_<TransformerModel>(mod, "TransformerModel")
        .def_static("init", &TransformerModel::init)
        .def("forward", &forward_py, py::arg("tokens"))
        .def("remove_layer", &TransformerModel::remove_layer, py::arg("position"))
        .def("parameter_count", &TransformerModel::parameter_count)
        .def("layer_parameter_count", &TransformerModel::layer_parameter_count)
        .def("deep_copy", &TransformerModel::deep_copy)
        .def_property_readonly("config", &TransformerModel::config)
        .def_property_readonly("n_layers", [](const TransformerModel& m) {
            return m.layers().size();
        })
        .def_property_readonly("original_indices", [](const TransformerModel& m) {
            std::vector<int> out;
            for (const auto& l : m.layers()) out.push_back(l.original_index);
            return out;
        });

    mod.def("tokenize", &tokenize, py::arg("text"), py::arg("max_len"));
    mod.def("train_toy", &train_toy, py::arg("model"), py::arg("corpus"),
            py::arg("opts"));
    mod.def("perturb_corpus", &perturb_corpus, py::arg("samples"), py::arg("spec"),
            py::arg("draw_index"));
    mod.def("apply_edits", &apply_edits);
    mod.def("load_lexicon", &load_lexicon, py::arg("path"));
    mod.def("aggregate", &aggregate, py::arg("grad"), py::arg("norm"));
    mod.def(
        "pert_import",
        [](const TransformerModel& m, const std::vector<std::string>& calib,
           const PerturbationSpec& spec, NormKind norm) {
            return pert_import(m, calib, spec, norm);
        },
        py::arg("model"), py::arg("calib"), py::arg("spec"),
        py::arg("norm") = NormKind::L2);
    mod.def("apply_consistency_filter", &apply_consistency_filter,
            py::arg("matrix"), py::arg("rho"));
    mod.def("block_influence_baseline", &block_influence_baseline,
            py::arg("model"), py::arg("calib"));
    mod.def("run_prune", &run_prune, py::arg("model"), py::arg("calib"),
            py::arg("config"));
    mod.def(
        "layer_removal_study",
        [](const TransformerModel& m, const std::vector<std::string>& calib,
           const PerturbationSpec& spec, NormKind norm, int cap) {
            return layer_removal_study(m, calib, spec, norm, cap);
        },
        py::arg("model"), py::arg("calib"), py::arg("spec"),
        py::arg("norm") = NormKind::L2, py::arg("exhaustive_cap") = 8);
    mod.def("perplexity", &perplexity, py::arg("model"), py::arg("corpus"),
            py::arg("stride"), py::arg("corpus_id") = std::string());
    mod.def("model_stats", &model_stats, py::arg("model"),
            py::arg("base_param_count") = std::nullopt,
            py::arg("measure_tpot") = false);
    mod.def("timing_curve", &timing_curve, py::arg("model"), py::arg("calib"),
            py::arg("config"), py::arg("m_max"), py::arg("use_fake_clock") = false);
    mod.def("save_checkpoint", &CheckpointCodec::save, py::arg("model"),
            py::arg("path"));
    mod.def("load_checkpoint", &CheckpointCodec::load, py::arg("path"));
}
