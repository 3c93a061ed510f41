"""
Grid Manager
Runs the selection-policy ablation: one adaptation per (policy row, seed)
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.agents.base_runner import BaseRunner
from app.config import settings
from app.core.exceptions import InvalidArgumentException
from app.core.logging import get_logger
from app.models.dataset import EmbeddingDataset
from app.models.network import ModelDims, init_params
from app.schemas.adapt import AdaptConfig, SelectionPolicy
from app.schemas.report import AblationCell, AblationGrid
from app.services.adaptation_service import AdaptationService, batches_per_epoch

SOURCE_ONLY_ROW = "source-only"

DEFAULT_POLICIES: List[SelectionPolicy] = (
    [SelectionPolicy.ratio(t) for t in (1.1, 1.2, 1.5)]
    + [SelectionPolicy.hard(k) for k in (2, 3, 4)]
    + [SelectionPolicy.soft(k) for k in (2, 3, 4)]
)


class GridCellRunner(BaseRunner):
    """
    One grid cell for one seed: source-only training or adaptation with a policy
    """

    def execute_task(self, task_data: Dict[str, Any]) -> Dict[str, Any]:
        cfg: AdaptConfig = task_data["config"]
        source: EmbeddingDataset = task_data["source"]
        target: EmbeddingDataset = task_data["target"]
        policy: Optional[SelectionPolicy] = task_data.get("policy")

        dims = ModelDims(source.dim, cfg.hidden_dim, cfg.feature_dim, source.num_classes)
        params = init_params(dims, cfg.seed)
        service = AdaptationService(cfg.model_copy(update={"eval_each_epoch": False}))
        if policy is None:
            # same step count as an adaptation run so lambda=0 rows coincide with this baseline
            steps = batches_per_epoch(target.n, cfg.batch_size)
            _, report = service.train_source_only(params, source, eval_set=target.as_target(), steps_per_epoch=steps)
        else:
            service = AdaptationService(service.cfg.model_copy(update={"policy": policy}))
            _, report = service.adapt(params, source, target)

        return {"status": "ok", "top1": report.final_metrics.top1}


def _run_cell(task: Tuple[str, int, Dict[str, Any]]) -> Dict[str, Any]:
    row, seed, task_data = task
    return GridCellRunner(f"{row}:seed={seed}", row).run(task_data)


class GridManager:
    """
    Builds, runs and assembles the ablation grid
    """

    def __init__(self, base_cfg: AdaptConfig, workers: Optional[int] = None):
        """
        Args:
            base_cfg: Shared hyper-parameters; the policy and seed vary per cell
            workers: Process count, settings.GRID_WORKERS by default
        """
        self.base_cfg = base_cfg
        self.workers = workers if workers is not None else settings.GRID_WORKERS
        self.logger = get_logger("grid")

    def rows(self, policies: Sequence[SelectionPolicy], baselines: bool) -> List[Tuple[str, Optional[SelectionPolicy]]]:
        out: List[Tuple[str, Optional[SelectionPolicy]]] = []
        if baselines:
            out.append((SOURCE_ONLY_ROW, None))
            out.append((SelectionPolicy.single_label().label, SelectionPolicy.single_label()))
        out.extend((p.label, p) for p in policies)
        return out

    def run(
        self,
        source: EmbeddingDataset,
        target: EmbeddingDataset,
        seeds: Sequence[int],
        policies: Optional[Sequence[SelectionPolicy]] = None,
        baselines: bool = False
    ) -> AblationGrid:
        """
        Run every (row, seed) cell and assemble the grid in row order

        Args:
            source: Labeled source dataset
            target: Target dataset with evaluation labels
            seeds: Seeds shared by all rows
            policies: Policy rows, DEFAULT_POLICIES when omitted
            baselines: Prepend source-only and single-label rows

        Returns:
            AblationGrid with one row per requested policy; failures recorded per cell
        """
        if not seeds:
            raise InvalidArgumentException("grid needs at least one seed", argument="seeds")
        if target.evaluation_labels() is None:
            raise InvalidArgumentException("grid target needs evaluation labels", argument="target")

        rows = self.rows(DEFAULT_POLICIES if policies is None else policies, baselines)
        tasks = [
            (label, seed, {
                "config": self.base_cfg.model_copy(update={"seed": seed}),
                "source": source,
                "target": target,
                "policy": policy,
            })
            for label, policy in rows
            for seed in seeds
        ]
        self.logger.info(f"Running ablation grid: {len(rows)} rows x {len(seeds)} seeds", extra={"workers": self.workers})

        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_run_cell, tasks))
        else:
            results = [_run_cell(task) for task in tasks]

        cells = []
        for r, (label, policy) in enumerate(rows):
            outcomes = results[r * len(seeds):(r + 1) * len(seeds)]
            per_seed = [o.get("top1") for o in outcomes]
            errors = [o["error_message"] for o in outcomes if o.get("status") == "error"]
            done = [v for v in per_seed if v is not None]
            cells.append(AblationCell(
                row=label,
                variant=policy.variant if policy is not None else "source_only",
                k=policy.k if policy is not None and policy.variant in ("hard", "soft") else None,
                threshold=policy.threshold if policy is not None and policy.variant == "ratio" else None,
                per_seed_top1=per_seed,
                mean_top1=sum(done) / len(done) if done else None,
                error=errors[0] if errors else None,
            ))

        return AblationGrid(seeds=list(seeds), lambda_=self.base_cfg.lambda_, rows=cells)


def run_ablation_grid(
    source: EmbeddingDataset,
    target: EmbeddingDataset,
    base_cfg: AdaptConfig,
    seeds: Sequence[int],
    **kwargs
) -> AblationGrid:
    return GridManager(base_cfg, workers=kwargs.pop("workers", None)).run(source, target, seeds, **kwargs)
