"""
Adaptation Service
Source-only training, multi-cluster reference adaptation (CE + lambda * class-conditional MMD),
two-stage training and chaining through intermediate target domains
"""
import logging
import math
import time
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import AdaptationToolkitException, ContractViolationException, StageException
from app.core.logging import get_logger, log_with_context
from app.core.numerics import SgdState, make_rng, sgd_step
from app.models.checkpoint import Checkpoint, save_checkpoint
from app.models.dataset import EmbeddingDataset, batches
from app.models.network import (
    ModelParams,
    backward_through_g,
    ce_loss_and_grads,
    forward_features,
    forward_logits,
    predict_logits,
)
from app.schemas.adapt import AdaptConfig
from app.schemas.report import AdaptReport, ChainReport, EpochTrace
from app.services.evaluation_service import evaluate
from app.services.kernel_service import ClassConditionalMMD, class_conditional_mmd
from app.services.selection_service import ReferenceWeights, build_weights, pseudo_labels, selection_report

# Stream ids for batch shuffles
SOURCE_STREAM = 1
TARGET_STREAM = 2


class CompositeResult(NamedTuple):
    loss: float
    ce_loss: float
    mcrl_loss: float
    grads: ModelParams
    mmd: ClassConditionalMMD


class _BatchStream:
    """Endless sequence of seeded epoch shuffles over one dataset"""

    def __init__(self, ds: EmbeddingDataset, batch_size: int, seed: int, stream: int):
        self.ds = ds
        self.batch_size = batch_size
        self.seed = seed
        self.stream = stream
        self.epoch = 0
        self._pending: List[np.ndarray] = []

    def next(self) -> np.ndarray:
        if not self._pending:
            self._pending = batches(self.ds, self.batch_size, make_rng(self.seed, self.stream, self.epoch))
            self.epoch += 1
        return self._pending.pop(0)


def batches_per_epoch(n: int, batch_size: int) -> int:
    """Batch count of one epoch, matching the merge rule in ``batches``"""
    count = math.ceil(n / batch_size)
    if count > 1 and n - (count - 1) * batch_size < 2:
        count -= 1
    return count


def _add_feature_grads(grads: ModelParams, params: ModelParams, X: np.ndarray, grad_F: np.ndarray) -> ModelParams:
    g = backward_through_g(params, X, grad_F)
    return ModelParams(grads.W1 + g.W1, grads.b1 + g.b1, grads.W2 + g.W2, grads.b2 + g.b2, grads.Wc, grads.bc)


def composite_loss_and_grads(
    params: ModelParams,
    Xs: np.ndarray,
    ys: np.ndarray,
    Xt: np.ndarray,
    weights: Union[ReferenceWeights, np.ndarray],
    cfg: AdaptConfig,
    lam: float,
    sigma_sq: Optional[float] = None,
    cluster_source: Optional[Tuple[np.ndarray, np.ndarray]] = None
) -> CompositeResult:
    """
    CE(source batch) + lam * class-conditional MMD with exact gradients

    Reference weights and the kernel bandwidth are held constant.

    Args:
        params: Current parameters
        Xs, ys: Labeled source batch for the CE term
        Xt: Target batch
        weights: n_t x C reference weights
        cfg: Run configuration (kernel, min cluster size)
        lam: Trade-off weight
        sigma_sq: Frozen base bandwidth; pooled median heuristic when omitted
        cluster_source: Source rows forming the class clusters; the CE batch when omitted

    Returns:
        CompositeResult
    """
    ce = ce_loss_and_grads(params, Xs, ys)
    Xc, yc = cluster_source if cluster_source is not None else (Xs, ys)

    Fc = forward_features(params, Xc)
    Ft = forward_features(params, Xt)
    mmd = class_conditional_mmd(Fc, yc, Ft, weights, cfg.kernel, cfg.min_cluster_size, sigma_sq=sigma_sq)
    if mmd.degenerate:
        return CompositeResult(ce.loss, ce.loss, 0.0, ce.grads, mmd)

    grads = _add_feature_grads(ce.grads, params, Xc, lam * mmd.grad_source)
    grads = _add_feature_grads(grads, params, Xt, lam * mmd.grad_target)
    return CompositeResult(ce.loss + lam * mmd.loss, ce.loss, mmd.loss, grads, mmd)


class AdaptationService:
    """
    Service for training and adaptation runs
    """

    def __init__(self, cfg: AdaptConfig):
        self.cfg = cfg
        self.logger = get_logger("training")

    def _check_dims(self, params: ModelParams, *datasets: EmbeddingDataset):
        dims = params.dims
        for ds in datasets:
            if ds.dim != dims.d_in or ds.num_classes != dims.num_classes:
                raise ContractViolationException(
                    f"dataset {ds.provenance or '<memory>'} has d={ds.dim}, C={ds.num_classes}; "
                    f"model expects d_in={dims.d_in}, C={dims.num_classes}",
                    details={"dataset": [ds.dim, ds.num_classes], "model": list(dims)}
                )

    def _frozen_g(self, grads: ModelParams) -> ModelParams:
        return ModelParams(
            np.zeros_like(grads.W1), np.zeros_like(grads.b1),
            np.zeros_like(grads.W2), np.zeros_like(grads.b2),
            grads.Wc, grads.bc
        )

    def _run(
        self,
        params: ModelParams,
        source: EmbeddingDataset,
        target: Optional[EmbeddingDataset],
        eval_set: Optional[EmbeddingDataset],
        steps_per_epoch: int,
        kind: str,
        reference_model: Optional[ModelParams] = None
    ) -> Tuple[ModelParams, AdaptReport]:
        cfg = self.cfg
        started = time.perf_counter()
        ys_all = source.training_labels
        num_classes = params.dims.num_classes
        if target is not None:
            cfg.policy.validate_for(num_classes)

        state = SgdState.for_params(params.blocks(), cfg.lr, cfg.momentum)
        source_stream = _BatchStream(source, cfg.batch_size, cfg.seed, SOURCE_STREAM)
        target_stream = _BatchStream(target, cfg.batch_size, cfg.seed, TARGET_STREAM) if target is not None else None
        total_steps = cfg.epochs * steps_per_epoch

        trace: List[EpochTrace] = []
        degenerate_total = 0
        step = 0
        for epoch in range(cfg.epochs):
            ce_sum = mcrl_sum = active_sum = clusters_sum = lam_sum = 0.0
            mcrl_steps = degenerate = 0

            for _ in range(steps_per_epoch):
                src_idx = source_stream.next()
                Xs, ys = source.X[src_idx], ys_all[src_idx]
                lam = cfg.lambda_at(step / total_steps) if target is not None else 0.0

                if target_stream is not None:
                    Xt = target.X[target_stream.next()]
                if target_stream is None or lam == 0.0:
                    ce = ce_loss_and_grads(params, Xs, ys)
                    loss_ce, grads = ce.loss, ce.grads
                else:
                    reference = reference_model if reference_model is not None else params
                    pl = pseudo_labels(predict_logits(reference, Xt))
                    weights = build_weights(pl, cfg.policy)
                    clusters_sum += selection_report(weights).mean_clusters
                    cluster_source = (source.X, ys_all) if cfg.cluster_scope == "global" else None

                    result = composite_loss_and_grads(
                        params, Xs, ys, Xt, weights, cfg, lam, cluster_source=cluster_source
                    )
                    loss_ce, grads = result.ce_loss, result.grads
                    if result.mmd.degenerate:
                        degenerate += 1
                    else:
                        mcrl_sum += result.mcrl_loss
                        active_sum += result.mmd.active_classes / num_classes
                        mcrl_steps += 1

                if cfg.freeze_g:
                    grads = self._frozen_g(grads)
                params = ModelParams.from_blocks(sgd_step(state, params.blocks(), grads.blocks()))
                ce_sum += loss_ce
                lam_sum += lam
                step += 1

            entry = EpochTrace(
                epoch=epoch + 1,
                steps=steps_per_epoch,
                ce_loss=ce_sum / steps_per_epoch,
                mcrl_loss=mcrl_sum / mcrl_steps if mcrl_steps else 0.0,
                lambda_effective=lam_sum / steps_per_epoch,
                active_class_rate=active_sum / mcrl_steps if mcrl_steps else 0.0,
                mean_clusters_per_sample=clusters_sum / (mcrl_steps + degenerate) if mcrl_steps + degenerate else 0.0,
                degenerate_steps=degenerate,
            )
            if cfg.eval_each_epoch and eval_set is not None and eval_set.has_labels:
                metrics = evaluate(params, eval_set)
                entry.target_top1 = metrics.top1
                entry.target_top3 = metrics.top3
                entry.target_macro_f1 = metrics.macro_f1
            trace.append(entry)
            degenerate_total += degenerate
            log_with_context(self.logger, logging.INFO, f"{kind} epoch complete", **entry.model_dump(exclude_none=True))

        elapsed = time.perf_counter() - started
        report = AdaptReport(
            kind=kind,
            config=cfg.echo(),
            trace=trace,
            total_steps=total_steps,
            degenerate_steps=degenerate_total,
            final_metrics=evaluate(params, eval_set) if eval_set is not None and eval_set.has_labels else None,
            source_metrics=evaluate(params, source),
            wall_clock_seconds=elapsed,
        )
        self.logger.info(
            f"{kind} finished in {elapsed:.2f}s",
            extra={"steps": total_steps, "degenerate_steps": degenerate_total}
        )
        return params, report

    def train_source_only(
        self,
        params: ModelParams,
        source: EmbeddingDataset,
        eval_set: Optional[EmbeddingDataset] = None,
        steps_per_epoch: Optional[int] = None
    ) -> Tuple[ModelParams, AdaptReport]:
        """
        Minimize source cross-entropy by mini-batch SGD

        Args:
            params: Initial parameters (not modified)
            source: Labeled source dataset
            eval_set: Optional labeled set evaluated each epoch
            steps_per_epoch: Defaults to one pass over the source

        Returns:
            (trained parameters, report)
        """
        self._check_dims(params, source, *([eval_set] if eval_set is not None else []))
        if steps_per_epoch is None:
            steps_per_epoch = batches_per_epoch(source.n, self.cfg.batch_size)
        return self._run(params, source, None, eval_set, steps_per_epoch, "source_only")

    def adapt(
        self,
        params: ModelParams,
        source: EmbeddingDataset,
        target: EmbeddingDataset,
        pretrain: bool = True
    ) -> Tuple[ModelParams, AdaptReport]:
        """
        Align target features with the source class clusters they reference

        In two_stage mode the model is first trained on the source (when
        ``pretrain``), then a frozen copy provides the pseudo-labels while
        the live model adapts. An epoch is one pass over the target.

        Args:
            params: Initial parameters (not modified)
            source: Labeled source dataset
            target: Target dataset; labels, if any, are used for evaluation only
            pretrain: Run stage 1 in two_stage mode

        Returns:
            (adapted parameters, report)
        """
        target = target.as_target()
        self._check_dims(params, source, target)
        if target.n == 0:
            raise ContractViolationException("target dataset is empty")

        pretrain_report = None
        reference_model = None
        if self.cfg.mode == "two_stage":
            if pretrain:
                params, pretrain_report = self.train_source_only(params, source, eval_set=target)
            reference_model = params.copy()

        steps = batches_per_epoch(target.n, self.cfg.batch_size)
        params, report = self._run(params, source, target, target, steps, "adapt", reference_model)
        report.pretrain = pretrain_report
        return params, report

    def chain_adapt(
        self,
        params: ModelParams,
        source: EmbeddingDataset,
        targets: Sequence[EmbeddingDataset],
        checkpoint_dir: Optional[Union[str, Path]] = None
    ) -> Tuple[ModelParams, ChainReport]:
        """
        Adapt through each target in order, checkpointing between stages

        Raises:
            StageException: carrying the index of the failed stage
        """
        if not targets:
            raise ContractViolationException("chain needs at least one target")

        reports: List[AdaptReport] = []
        checkpoints: List[Optional[str]] = []
        for i, target in enumerate(targets):
            try:
                params, report = self.adapt(params, source, target, pretrain=(i == 0))
                path = None
                if checkpoint_dir is not None:
                    path = Path(checkpoint_dir) / f"stage_{i:02d}.ckpt"
                    save_checkpoint(Checkpoint(params=params, rng_seed=self.cfg.seed, epoch=self.cfg.epochs), path)
            except AdaptationToolkitException as e:
                self.logger.error(f"Chain stage {i} failed: {e.message}", extra={"error_code": e.error_code})
                raise StageException(e.message, stage_index=i, details={"error_code": e.error_code}) from e
            reports.append(report)
            checkpoints.append(str(path) if path is not None else None)
            self.logger.info(f"Chain stage {i} complete", extra={"target": target.provenance})

        return params, ChainReport(stages=reports, checkpoints=checkpoints, final_metrics=reports[-1].final_metrics)


def train_source_only(params: ModelParams, source: EmbeddingDataset, cfg: AdaptConfig, **kwargs):
    return AdaptationService(cfg).train_source_only(params, source, **kwargs)


def adapt(params: ModelParams, source: EmbeddingDataset, target: EmbeddingDataset, cfg: AdaptConfig, **kwargs):
    return AdaptationService(cfg).adapt(params, source, target, **kwargs)


def chain_adapt(params: ModelParams, source: EmbeddingDataset, targets: Sequence[EmbeddingDataset], cfg: AdaptConfig, **kwargs):
    return AdaptationService(cfg).chain_adapt(params, source, targets, **kwargs)
