"""
Benchmark Schemas
"""
from typing import Optional

from pydantic import BaseModel, Field, model_validator


class ShiftSpec(BaseModel):
    """Synthetic category-ambiguity benchmark definition"""
    name: Optional[str] = None
    num_classes: int = Field(16, ge=2, alias="C")
    dim: int = Field(32, ge=2, alias="d")
    n_per_class_source: int = Field(200, ge=1)
    n_per_class_target: int = Field(100, ge=1)
    source_sigma: float = Field(0.5, gt=0.0)
    target_sigma: float = Field(1.5, gt=0.0)
    rotation_angle: float = 0.3  # radians, applied to dimension pairs (0,1), (2,3), ...
    bias: float = Field(1.0, ge=0.0)
    class_overlap: float = Field(0.25, ge=0.0, le=1.0)
    overlap_strength: float = Field(0.35, ge=0.0, lt=0.5)
    seed: int = Field(0, ge=0)

    class Config:
        frozen = True
        extra = "forbid"
        populate_by_name = True

    @model_validator(mode="after")
    def _target_at_least_as_spread(self) -> "ShiftSpec":
        if self.target_sigma < self.source_sigma:
            raise ValueError("target_sigma must be >= source_sigma")
        return self

    def with_seed(self, seed: int) -> "ShiftSpec":
        return self.model_copy(update={"seed": seed})
