from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from schemas.rearrangement import RearrangementSpec


class PartitionConfig(BaseModel):
    """How to cut [0,1]^(k-1) into conditioning cells for one rank"""

    kind: Literal["dyadic", "sublevel", "boxes"] = "dyadic"
    c: Optional[float] = Field(None, ge=0, lt=1, description="level for sublevel cells")
    theta: Optional[float] = Field(None, ge=0, le=1)
    boxes: List[List[Tuple[float, float]]] = []


class ExperimentConfig(BaseModel):
    key: str = "experiment"
    spec: RearrangementSpec
    seed: int = Field(..., ge=0, description="master seed; wall-clock seeding is not allowed")
    trials: int = Field(1_000_000, ge=1)
    alpha: float = Field(0.01, gt=0, lt=1)
    k: Optional[int] = Field(None, ge=2, description="test a single rank instead of all")
    partitions: Dict[int, PartitionConfig] = {}
    workers: int = Field(1, ge=1)
    out: Optional[str] = None
    format: Optional[Literal["json", "csv", "jsonl"]] = Field(
        None, description="defaults to jsonl for simulate and json for sri")

    @model_validator(mode="after")
    def _rank_in_range(self) -> "ExperimentConfig":
        if self.k is not None and self.k > self.spec.n:
            raise ValueError(f"k={self.k} exceeds n={self.spec.n}")
        return self
