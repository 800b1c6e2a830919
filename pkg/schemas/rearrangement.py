from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator

from core.directing import PiecewiseLinearFn


class _SpecBase(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="number of observations")


class TrivialSpec(_SpecBase):
    """Arrival order uniform on S_n, independent of the values"""

    kind: Literal["trivial"] = "trivial"


class ConstantSpec(_SpecBase):
    kind: Literal["constant"] = "constant"
    permutation: List[int]

    @field_validator("permutation")
    @classmethod
    def _bijection(cls, value: List[int]) -> List[int]:
        if sorted(value) != list(range(1, len(value) + 1)):
            raise ValueError(f"{value} is not a permutation of 1..{len(value)}")
        return value


class TravellersSpec(_SpecBase):
    kind: Literal["travellers"] = "travellers"
    theta: float = Field(..., ge=0, le=1)


class BinarySpec(_SpecBase):
    """Arrival order by increasing value of the (canonicalized) directing function"""

    kind: Literal["binary"] = "binary"
    directing: PiecewiseLinearFn


class SwitchingBlock(BaseModel):
    """Positions M_i that receive the values N_i, ordered by a travellers' rule with theta_i"""

    model_config = ConfigDict(frozen=True)

    positions: List[int] = []
    values: List[int] = []
    theta: Optional[float] = None


class GeneralConstructionSpec(_SpecBase):
    """Fixed positions, switching scheme and jump probabilities.

    Structural rules are checked by ``core.rearrangements.validate_general`` so that
    a malformed spec can still be built and inspected.
    """

    kind: Literal["general"] = "general"
    fixed_values: List[int] = []
    fixed_positions: List[int] = []
    blocks: List[SwitchingBlock]

    @property
    def d(self) -> int:
        return len(self.fixed_values)

    @property
    def thetas(self) -> List[Optional[float]]:
        return [block.theta for block in self.blocks]


class FixedAssignment(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: int
    value: int


class ShuffledBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    positions: List[int]
    values: List[int]


class RandomizedBlockSpec(_SpecBase):
    """Fixed positions plus blocks whose values arrive in equiprobable random order"""

    kind: Literal["randomized_block"] = "randomized_block"
    fixed: List[FixedAssignment] = []
    blocks: List[ShuffledBlock] = []


RearrangementSpec = Annotated[
    Union[TrivialSpec, ConstantSpec, TravellersSpec, BinarySpec,
          GeneralConstructionSpec, RandomizedBlockSpec],
    Field(discriminator="kind"),
]

_spec_adapter = TypeAdapter(RearrangementSpec)


def parse_spec(payload) -> RearrangementSpec:
    """Validate a JSON-like mapping into the matching spec class"""
    return _spec_adapter.validate_python(payload)


class TrialRecord(BaseModel):
    """One trial: value data, arrival data, the rearranged tuple and its initial ranks"""

    trial: Optional[int] = None
    x_desc: List[float]
    mu: List[int]
    y: List[float]
    ranks: List[int]
    jump_indicators: Optional[List[bool]] = None
