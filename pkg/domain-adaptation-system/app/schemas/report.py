"""
Report Schemas
"""
from pydantic import BaseModel, Field, model_validator
from typing import Optional, Dict, Any, List


class MetricsReport(BaseModel):
    """Classification metrics on one evaluation set"""
    top1: float = Field(ge=0.0, le=1.0)
    top3: float = Field(ge=0.0, le=1.0)
    macro_f1: float = Field(ge=0.0, le=1.0)
    confusion: List[List[int]]
    n_eval: int = Field(ge=0)

    @model_validator(mode="after")
    def _consistent(self) -> "MetricsReport":
        if sum(sum(row) for row in self.confusion) != self.n_eval:
            raise ValueError("confusion entries must sum to n_eval")
        if self.top3 < self.top1:
            raise ValueError("top3 must be >= top1")
        return self


class SelectionSummary(BaseModel):
    """Clusters-per-sample histogram and per-class reference mass"""
    n_t: int
    clusters_per_sample: List[int]  # index = number of referenced clusters
    class_mass: List[float]

    @property
    def mean_clusters(self) -> float:
        if self.n_t == 0:
            return 0.0
        return sum(i * c for i, c in enumerate(self.clusters_per_sample)) / self.n_t


class EpochTrace(BaseModel):
    """One epoch of a training run"""
    epoch: int
    steps: int
    ce_loss: float
    mcrl_loss: float = 0.0
    lambda_effective: float = 0.0
    active_class_rate: float = 0.0
    mean_clusters_per_sample: float = 0.0
    degenerate_steps: int = 0
    target_top1: Optional[float] = None
    target_top3: Optional[float] = None
    target_macro_f1: Optional[float] = None


class AdaptReport(BaseModel):
    """Trace and final metrics of a source-only or adaptation run"""
    kind: str
    config: Dict[str, Any]
    trace: List[EpochTrace] = Field(default_factory=list)
    total_steps: int = 0
    degenerate_steps: int = 0
    final_metrics: Optional[MetricsReport] = None
    source_metrics: Optional[MetricsReport] = None
    pretrain: Optional["AdaptReport"] = None
    wall_clock_seconds: Optional[float] = None


class ChainReport(BaseModel):
    """Sequential adaptation through intermediate target domains"""
    stages: List[AdaptReport]
    checkpoints: List[Optional[str]]
    final_metrics: Optional[MetricsReport] = None


class AblationCell(BaseModel):
    """One policy row of the ablation grid"""
    row: str
    variant: str
    k: Optional[int] = None
    threshold: Optional[float] = None
    per_seed_top1: List[Optional[float]]
    mean_top1: Optional[float] = None
    error: Optional[str] = None


class AblationGrid(BaseModel):
    """Ablation over selection policies, one row per policy or baseline"""
    seeds: List[int]
    lambda_: float = Field(alias="lambda")
    rows: List[AblationCell]

    class Config:
        populate_by_name = True


class GradCheckResult(BaseModel):
    """Finite-difference comparison for one gradient suite"""
    suite: str
    instances: int
    max_relative_error: float
    passed: bool


class GradCheckReport(BaseModel):
    epsilon: float
    tolerance: float
    results: List[GradCheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


AdaptReport.model_rebuild()
