from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ContingencyTable(BaseModel):
    """Counts of R_k per conditioning cell"""

    k: int
    cells: List[str]
    ranks: List[int]
    counts: List[List[int]]

    @property
    def totals(self) -> List[int]:
        return [sum(row) for row in self.counts]

    @property
    def grand_total(self) -> int:
        return sum(self.totals)

    def to_csv(self) -> str:
        lines = ["cell," + ",".join(f"rank_{r}" for r in self.ranks)]
        for label, row in zip(self.cells, self.counts):
            lines.append(f"{label}," + ",".join(str(c) for c in row))
        return "\n".join(lines) + "\n"


class ChiSquareResult(BaseModel):
    statistic: float
    dof: int
    p_value: float
    dropped_ranks: List[int] = []
    dropped_cells: List[str] = []


class RankTestResult(BaseModel):
    k: int
    p_hat: Dict[int, float]
    cell_p_hat: Dict[str, Dict[int, float]] = {}
    chi_square: ChiSquareResult
    alpha: float
    passed: bool
    table: ContingencyTable
    extreme_ranks_only: Optional[bool] = None
    extreme_rank_contradiction: bool = False


class SriReport(BaseModel):
    """Estimated p_{k,l}, per-rank homogeneity tests and decisions"""

    spec_kind: str
    n: int
    trials: int
    seed: int
    alpha: float
    alpha_per_test: float
    correction: str = "bonferroni"
    results: Dict[int, RankTestResult] = {}
    passed: bool
    extreme_ranks_only: Optional[bool] = None
    extreme_rank_contradiction: bool = False

    @property
    def p_hat(self) -> Dict[int, Dict[int, float]]:
        estimates = {1: {1: 1.0}}
        estimates.update({k: result.p_hat for k, result in self.results.items()})
        return estimates


class DefectReport(BaseModel):
    """Frequency of {f_theta(Y_2) <= c < f_theta(Y_1)} and where the hits landed"""

    theta: str
    c: str
    trials: int
    hits: int
    frequency: float
    region: List[str] = Field(default_factory=lambda: ["X32 x id", "X21 x tau"])
    hits_by_atom: Dict[str, int] = {}


class N2Conditionals(BaseModel):
    """P(R_2 = 2 | Y_1 in I_1) and P(R_2 = 2 | Y_1 in I_3)"""

    theta: str
    c: str
    given_i1: str
    given_i3: str
    exact: bool
    trials: Optional[int] = None
