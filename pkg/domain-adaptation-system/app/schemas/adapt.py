"""
Adaptation Schemas
Kernel, selection policy and training configuration
"""
import math
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.exceptions import ConfigValidationException, InvalidArgumentException

DEFAULT_MULTIPLIERS = [0.25, 0.5, 1.0, 2.0, 4.0]

ModelT = TypeVar("ModelT", bound=BaseModel)


class KernelConfig(BaseModel):
    """Gaussian multi-kernel family; multipliers scale the base sigma^2"""
    bandwidth_rule: Literal["median_heuristic", "fixed"] = "median_heuristic"
    sigma0_sq: Optional[float] = None
    multipliers: List[float] = Field(default_factory=lambda: list(DEFAULT_MULTIPLIERS))
    weight_scaling: Literal["per_class_sum", "literal_inverse_nt"] = "per_class_sum"

    class Config:
        frozen = True
        extra = "forbid"

    @field_validator("multipliers")
    @classmethod
    def _multipliers_positive(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one kernel multiplier is required")
        if any(not math.isfinite(m) or m <= 0 for m in value):
            raise ValueError("kernel multipliers must be finite and positive")
        return value

    @model_validator(mode="after")
    def _fixed_needs_bandwidth(self) -> "KernelConfig":
        if self.bandwidth_rule == "fixed":
            if self.sigma0_sq is None or not math.isfinite(self.sigma0_sq) or self.sigma0_sq <= 0:
                raise ValueError("fixed bandwidth rule requires sigma0_sq > 0")
        return self

    @classmethod
    def fixed(cls, sigma0_sq: float, multipliers: Optional[List[float]] = None, **kwargs) -> "KernelConfig":
        return cls(
            bandwidth_rule="fixed",
            sigma0_sq=sigma0_sq,
            multipliers=multipliers if multipliers is not None else list(DEFAULT_MULTIPLIERS),
            **kwargs
        )


class SelectionPolicy(BaseModel):
    """
    Which source clusters a target sample references

    single_label: argmax class only; hard: top-k with unit weights;
    soft: top-k weighted by sigmoid(logit); ratio: top-1, plus top-2 when
    p1/p2 does not exceed ``threshold``.
    """
    variant: Literal["single_label", "hard", "soft", "ratio"] = "soft"
    k: int = Field(3, ge=1)
    threshold: float = 1.2

    class Config:
        frozen = True
        extra = "forbid"

    @field_validator("threshold")
    @classmethod
    def _threshold_finite(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError("threshold must be finite and positive")
        return value

    @classmethod
    def single_label(cls) -> "SelectionPolicy":
        return cls(variant="single_label", k=1)

    @classmethod
    def hard(cls, k: int) -> "SelectionPolicy":
        return cls(variant="hard", k=k)

    @classmethod
    def soft(cls, k: int) -> "SelectionPolicy":
        return cls(variant="soft", k=k)

    @classmethod
    def ratio(cls, threshold: float) -> "SelectionPolicy":
        return cls(variant="ratio", k=2, threshold=threshold)

    @property
    def max_clusters(self) -> int:
        if self.variant == "single_label":
            return 1
        if self.variant == "ratio":
            return 2
        return self.k

    @property
    def label(self) -> str:
        if self.variant == "single_label":
            return "single-label"
        if self.variant == "ratio":
            return f"RAM ratio={self.threshold:g}"
        prefix = "HM" if self.variant == "hard" else "SM"
        return f"{prefix} k={self.k}"

    def validate_for(self, num_classes: int):
        """Raise InvalidArgumentException if the policy cannot apply to C classes"""
        if self.max_clusters > num_classes:
            raise InvalidArgumentException(
                f"policy {self.label} needs {self.max_clusters} classes, only {num_classes} available",
                argument="k"
            )


class AdaptConfig(BaseModel):
    """All hyper-parameters of a training or adaptation run"""
    lr: float = Field(0.01, ge=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    epochs: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=2)
    lambda_: float = Field(0.5, ge=0.0, alias="lambda")
    lambda_ramp: bool = False
    policy: SelectionPolicy = Field(default_factory=SelectionPolicy)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    mode: Literal["end_to_end", "two_stage"] = "end_to_end"
    cluster_scope: Literal["batch", "global"] = "batch"
    min_cluster_size: int = Field(2, ge=1)
    freeze_g: bool = False
    seed: int = Field(0, ge=0)
    hidden_dim: int = Field(64, ge=1)
    feature_dim: int = Field(32, ge=1)
    eval_each_epoch: bool = True

    class Config:
        frozen = True
        extra = "forbid"
        populate_by_name = True

    @field_validator("lr", "lambda_")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    def lambda_at(self, progress: float) -> float:
        """Trade-off weight at training progress p in [0, 1]"""
        if not self.lambda_ramp:
            return self.lambda_
        return self.lambda_ * (2.0 / (1.0 + math.exp(-10.0 * progress)) - 1.0)

    def echo(self) -> Dict[str, Any]:
        """Config as a plain dict for report documents"""
        return self.model_dump(mode="json", by_alias=True)


def validate_model(model_cls: Type[ModelT], data: Dict[str, Any]) -> ModelT:
    """
    Build a pydantic model, translating validation errors

    Raises:
        ConfigValidationException naming the first offending field
    """
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or model_cls.__name__
        raise ConfigValidationException(
            f"invalid {field}: {first.get('msg')}",
            field=field,
            details={"errors": len(e.errors())}
        ) from e
