import math

import numpy as np
import pytest

from app.core.exceptions import ContractViolationException, StageException
from app.core.numerics import make_rng
from app.models.checkpoint import load_checkpoint
from app.models.dataset import EmbeddingDataset
from app.models.network import ModelDims, init_params
from app.schemas.adapt import AdaptConfig, SelectionPolicy
from app.services.adaptation_service import (
    AdaptationService,
    adapt,
    batches_per_epoch,
    chain_adapt,
    train_source_only,
)
from app.services.gradcheck_service import check_composite


def _params(bench, cfg):
    return init_params(ModelDims(bench.source.dim, cfg.hidden_dim, cfg.feature_dim, bench.source.num_classes), cfg.seed)


def test_batches_per_epoch_matches_merge_rule():
    assert batches_per_epoch(9, 4) == 2
    assert batches_per_epoch(10, 4) == 3
    assert batches_per_epoch(8, 4) == 2
    assert batches_per_epoch(1, 4) == 1


def test_source_only_separates_blobs(blobs):
    cfg = AdaptConfig(epochs=20, batch_size=8, hidden_dim=8, feature_dim=4, seed=0)
    params = init_params(ModelDims(2, 8, 4, 2), cfg.seed)
    _, report = train_source_only(params, blobs, cfg)
    assert report.source_metrics.top1 >= 0.99
    assert len(report.trace) == 20


def test_zero_learning_rate_keeps_parameters(blobs):
    cfg = AdaptConfig(lr=0.0, epochs=3, batch_size=16, hidden_dim=4, feature_dim=3, seed=1)
    params = init_params(ModelDims(2, 4, 3, 2), cfg.seed)
    trained, report = train_source_only(params, blobs, cfg)
    assert trained.equals(params)
    losses = [e.ce_loss for e in report.trace]
    assert losses == pytest.approx([losses[0]] * 3, rel=1e-12)


def test_training_is_deterministic(small_bench, fast_cfg):
    a, ra = adapt(_params(small_bench, fast_cfg), small_bench.source, small_bench.target, fast_cfg)
    b, rb = adapt(_params(small_bench, fast_cfg), small_bench.source, small_bench.target, fast_cfg)
    assert a.equals(b)
    assert ra.model_dump(exclude={"wall_clock_seconds"}) == rb.model_dump(exclude={"wall_clock_seconds"})


def test_zero_lambda_equals_source_only(small_bench, fast_cfg):
    cfg = fast_cfg.model_copy(update={"lambda_": 0.0})
    params = _params(small_bench, cfg)
    adapted, _ = adapt(params, small_bench.source, small_bench.target, cfg)
    steps = batches_per_epoch(small_bench.target.n, cfg.batch_size)
    source_only, _ = train_source_only(params, small_bench.source, cfg, steps_per_epoch=steps)
    assert adapted.equals(source_only)


def test_hard_one_equals_single_label(small_bench, fast_cfg):
    hard = fast_cfg.model_copy(update={"policy": SelectionPolicy.hard(1)})
    single = fast_cfg.model_copy(update={"policy": SelectionPolicy.single_label()})
    a, ra = adapt(_params(small_bench, hard), small_bench.source, small_bench.target, hard)
    b, rb = adapt(_params(small_bench, single), small_bench.source, small_bench.target, single)
    assert a.equals(b)
    assert [e.model_dump() for e in ra.trace] == [e.model_dump() for e in rb.trace]


def test_report_trace_is_complete_and_finite(small_bench, fast_cfg):
    _, report = adapt(_params(small_bench, fast_cfg), small_bench.source, small_bench.target, fast_cfg)
    assert len(report.trace) == fast_cfg.epochs
    assert report.total_steps == fast_cfg.epochs * batches_per_epoch(small_bench.target.n, fast_cfg.batch_size)
    for entry in report.trace:
        assert entry.mcrl_loss >= 0.0
        assert all(math.isfinite(v) for v in (entry.ce_loss, entry.mcrl_loss, entry.active_class_rate))
        assert entry.target_top1 is not None
    assert report.final_metrics.n_eval == small_bench.target.n
    assert report.config["lambda"] == fast_cfg.lambda_


def test_degenerate_steps_fall_back_to_cross_entropy(small_bench, fast_cfg):
    cfg = fast_cfg.model_copy(update={"min_cluster_size": 100})
    params = _params(small_bench, cfg)
    adapted, report = adapt(params, small_bench.source, small_bench.target, cfg)
    assert report.degenerate_steps == report.total_steps

    baseline, _ = adapt(params, small_bench.source, small_bench.target, cfg.model_copy(update={"lambda_": 0.0}))
    assert adapted.equals(baseline)


def test_two_stage_pretrains_and_adapts(small_bench, fast_cfg):
    cfg = fast_cfg.model_copy(update={"mode": "two_stage"})
    _, report = adapt(_params(small_bench, cfg), small_bench.source, small_bench.target, cfg)
    assert report.pretrain is not None
    assert report.pretrain.kind == "source_only"
    assert len(report.pretrain.trace) == cfg.epochs


def test_freeze_g_only_moves_the_head(small_bench, fast_cfg):
    cfg = fast_cfg.model_copy(update={"freeze_g": True})
    params = _params(small_bench, cfg)
    adapted, _ = adapt(params, small_bench.source, small_bench.target, cfg)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(adapted, name), getattr(params, name))
    assert not np.array_equal(adapted.Wc, params.Wc)


def test_global_cluster_scope_and_ramp(small_bench, fast_cfg):
    cfg = fast_cfg.model_copy(update={"cluster_scope": "global", "lambda_ramp": True})
    _, report = adapt(_params(small_bench, cfg), small_bench.source, small_bench.target, cfg)
    assert report.degenerate_steps == 0
    assert report.trace[0].lambda_effective < cfg.lambda_
    assert report.trace[0].lambda_effective < report.trace[-1].lambda_effective


def test_input_is_not_modified(small_bench, fast_cfg):
    params = _params(small_bench, fast_cfg)
    before = params.copy()
    adapt(params, small_bench.source, small_bench.target, fast_cfg)
    assert params.equals(before)


def test_dimension_mismatch_is_contract_violation(small_bench, fast_cfg):
    params = init_params(ModelDims(5, 8, 4, 4), 0)
    with pytest.raises(ContractViolationException):
        adapt(params, small_bench.source, small_bench.target, fast_cfg)


def test_single_target_chain_equals_adapt(small_bench, fast_cfg):
    params = _params(small_bench, fast_cfg)
    direct, _ = adapt(params, small_bench.source, small_bench.target, fast_cfg)
    chained, report = chain_adapt(params, small_bench.source, [small_bench.target], fast_cfg)
    assert chained.equals(direct)
    assert report.final_metrics == report.stages[0].final_metrics


def test_chain_checkpoint_reproduces_second_stage(small_bench, fast_cfg, tmp_path):
    params = _params(small_bench, fast_cfg)
    targets = [small_bench.source_test, small_bench.target]
    final, report = chain_adapt(params, small_bench.source, targets, fast_cfg, checkpoint_dir=tmp_path)
    assert len(report.checkpoints) == 2

    stage_one = load_checkpoint(tmp_path / "stage_00.ckpt").params
    replay, _ = AdaptationService(fast_cfg).adapt(stage_one, small_bench.source, small_bench.target, pretrain=False)
    assert replay.equals(final)
    assert load_checkpoint(tmp_path / "stage_01.ckpt").params.equals(final)


def test_chain_failure_names_stage(small_bench, fast_cfg):
    wrong = EmbeddingDataset(make_rng(0, 4).standard_normal((10, 5)), 4, role="target")
    with pytest.raises(StageException) as info:
        chain_adapt(_params(small_bench, fast_cfg), small_bench.source, [small_bench.target, wrong], fast_cfg)
    assert info.value.stage_index == 1


def test_composite_gradient_is_exact():
    for i in range(5):
        assert check_composite(make_rng(9, i), 1e-5) <= 1e-5
