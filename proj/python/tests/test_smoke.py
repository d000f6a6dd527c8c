import math

import pytest

import pip_pruner as pp


def small_config(layers=4, seed=3):
    cfg = pp.ModelConfig()
    cfg.n_layers = layers
    cfg.d_model = 16
    cfg.n_heads = 2
    cfg.d_ff = 32
    cfg.max_seq_len = 48
    cfg.seed = seed
    return cfg


CALIB = [
    "the meeting will start later today",
    "the conference host welcomed attendees",
]


def trained_model(layers=4, seed=3, steps=60):
    model = pp.TransformerModel.init(small_config(layers, seed))
    opts = pp.TrainOptions()
    opts.steps = steps
    opts.seq_len = 24
    opts.learning_rate = 0.1
    opts.seed = seed
    pp.train_toy(model, "the meeting will start later today. " * 60, opts)
    return model


def test_tokenize_brackets_with_bos_eos():
    tokens = pp.tokenize("hi", 16)
    assert tokens == [256, ord("h"), ord("i"), 257]


def test_forward_shape_and_determinism():
    model = pp.TransformerModel.init(small_config())
    values, shape = model.forward([256, 104, 105])
    assert shape == (3, 259)
    assert len(values) == 3 * 259
    again, _ = model.forward([256, 104, 105])
    assert values == again


def test_perturb_corpus_is_deterministic_and_reconstructible():
    spec = pp.PerturbationSpec()
    spec.method = pp.PerturbMethod.replace
    spec.seed = 5
    pairs = pp.perturb_corpus(CALIB, spec, 0)
    assert len(pairs) == len(CALIB)
    for pair in pairs:
        assert pp.apply_edits(pair.original, pair.edits) == pair.perturbed
    again = pp.perturb_corpus(CALIB, spec, 0)
    assert [p.perturbed for p in pairs] == [p.perturbed for p in again]


def test_pert_import_matrix_shape():
    model = trained_model()
    spec = pp.PerturbationSpec()
    spec.method = pp.PerturbMethod.replace
    spec.draws = 2
    matrix = pp.pert_import(model, CALIB, spec)
    assert sorted(matrix) == [0, 1, 2, 3]
    assert all(len(col) == 2 for col in matrix.values())
    report = pp.apply_consistency_filter(matrix, 1e9)
    assert not any(li.filtered for li in report.layers.values())


def test_prune_and_eval_round_trip(tmp_path):
    model = trained_model()
    cfg = pp.PruneConfig()
    cfg.layers_to_prune = 1
    cfg.perturbation.method = pp.PerturbMethod.replace
    cfg.perturbation.draws = 2
    run = pp.run_prune(model, CALIB, cfg)
    assert len(run.pruned_original_indices) == 1
    assert run.final_model.n_layers == 3
    assert "pip-run-manifest v1" in run.serialize_manifest()

    result = pp.perplexity(run.final_model, "the meeting will start later", 24)
    assert result.ppl == pytest.approx(math.exp(result.nll_sum / result.token_count))

    path = str(tmp_path / "pruned.ckpt")
    pp.save_checkpoint(run.final_model, path)
    loaded = pp.load_checkpoint(path)
    assert loaded.original_indices == run.final_model.original_indices
    assert pp.perplexity(loaded, "the meeting will start later", 24).ppl == result.ppl


def test_fake_clock_curve_is_exactly_quadratic():
    model = pp.TransformerModel.init(small_config(layers=6))
    cfg = pp.PruneConfig()
    cfg.perturbation.draws = 2
    curve = pp.timing_curve(model, CALIB, cfg, 3, use_fake_clock=True)
    assert curve.fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert all(sd == -2 * len(CALIB) * 2 for sd in curve.second_differences)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(pp.ValidationError):
        cfg = small_config()
        cfg.n_layers = 1
        pp.TransformerModel.init(cfg)
    with pytest.raises(pp.CheckpointError):
        pp.load_checkpoint("/nonexistent/path.ckpt")
