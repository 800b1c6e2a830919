"""Exact geometry of two observations.

The level c of f_theta cuts [0, 1] into I_1 = [0, l1] (left branch above c),
I_2 = {f_theta <= c} and I_3 (right branch above c). Pairs x1 > x2 fall in the
atoms X_ij = {x1 in I_i, x2 in I_j}, i >= j, measured by m = 2 Leb on the
descending simplex. Everything here runs on Fractions; the Monte Carlo helpers
at the bottom only count.
"""

from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from core.errors import RearrangementError
from core.pointprocess import render_number
from core.rearrangements import apply_batch, sample_iud_many
from core.streams import chunk_bounds, substream
from schemas.rearrangement import ConstantSpec, TravellersSpec
from schemas.report import DefectReport, N2Conditionals

ATOMS = ((1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3))
DEFECT_ATOMS = {(3, 2): "id", (2, 1): "tau"}


def rational(value) -> Fraction:
    """Exact form of a parameter; floats are read through their decimal repr"""
    if isinstance(value, bool):
        raise RearrangementError("booleans are not parameters")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _check_parameters(theta: Fraction, c: Fraction) -> None:
    if not 0 < theta < 1:
        raise RearrangementError(f"theta={theta} must lie strictly between 0 and 1")
    if not 0 <= c < 1:
        raise RearrangementError(f"c={c} must lie in [0, 1)")


class Partition2(BaseModel):
    """The three intervals cut out by the level c of f_theta"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: Fraction
    c: Fraction
    l1: Fraction
    l2: Fraction
    l3: Fraction

    @property
    def alpha(self) -> Fraction:
        return self.theta / (1 - self.theta)

    @property
    def bounds(self) -> Tuple[Fraction, Fraction]:
        """I_2 = [l1, l1 + l2]"""
        return self.l1, self.l1 + self.l2

    def lengths(self) -> Tuple[Fraction, Fraction, Fraction]:
        return self.l1, self.l2, self.l3


class AtomMeasures(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    partition: Partition2
    m: Dict[Tuple[int, int], Fraction]

    def __getitem__(self, atom: Tuple[int, int]) -> Fraction:
        return self.m[atom]

    @property
    def total(self) -> Fraction:
        return sum(self.m.values(), Fraction(0))

    def identity_sides(self) -> Tuple[Fraction, Fraction, Fraction]:
        """(alpha^-1 m11, alpha m33, m31)"""
        alpha = self.partition.alpha
        return self.m[(1, 1)] / alpha, alpha * self.m[(3, 3)], self.m[(3, 1)]

    def identity_holds(self) -> bool:
        left, right, total = self.identity_sides()
        return left + right == total


def partition2(theta, c) -> Partition2:
    theta, c = rational(theta), rational(c)
    _check_parameters(theta, c)
    return Partition2(theta=theta, c=c, l1=theta * (1 - c), l2=c, l3=(1 - theta) * (1 - c))


def atom_measures(theta, c) -> AtomMeasures:
    """m(X_ii) = l_i^2 and m(X_ij) = 2 l_i l_j"""
    part = partition2(theta, c)
    lengths = dict(zip((1, 2, 3), part.lengths()))
    m = {}
    for i, j in ATOMS:
        m[(i, j)] = lengths[i] ** 2 if i == j else 2 * lengths[i] * lengths[j]
    measures = AtomMeasures(partition=part, m=m)
    if measures.total != 1:
        raise RearrangementError(f"atom measures sum to {measures.total}")
    return measures


def ratio_forms(theta, a, b) -> Dict[str, bool]:
    """The four equivalent ways of saying a : b = theta : (1 - theta)"""
    theta, a, b = rational(theta), rational(a), rational(b)
    if not 0 < theta < 1:
        raise RearrangementError(f"theta={theta} must lie strictly between 0 and 1")
    alpha = theta / (1 - theta)
    return {
        "a = theta(a + b)": a == theta * (a + b),
        "(1 - theta)a = theta b": (1 - theta) * a == theta * b,
        "a = alpha b": a == alpha * b,
        "a / alpha = b": a / alpha == b,
    }


def travellers_transposed_mass(theta, c) -> Fraction:
    """m of the part of X_31 where the travellers' order puts x2 first.

    With u = f(x1) and v = f(x2) both uniform above c this is the triangle
    {c < v < u <= 1}, so the mass is theta (1 - theta) (1 - c)^2 = m11 / alpha.
    """
    part = partition2(theta, c)
    return part.theta * (1 - part.theta) * (1 - part.c) ** 2


def travellers_conditionals(theta, c) -> Tuple[Fraction, Fraction]:
    """Exact P(R_2 = 2 | Y_1 in I_1) and P(R_2 = 2 | Y_1 in I_3).

    Y_1 lands in I_1 on X_11 x id (R_2 = 2) and on X_31 x tau (R_2 = 1); it
    lands in I_3 on X_31 x id (R_2 = 2) and on X_33 x tau (R_2 = 1).
    """
    m = atom_measures(theta, c)
    q = travellers_transposed_mass(theta, c)
    given_i1 = m[(1, 1)] / (m[(1, 1)] + q)
    given_i3 = (m[(3, 1)] - q) / (m[(3, 1)] - q + m[(3, 3)])
    return given_i1, given_i3


def classify_interval(x: np.ndarray, theta, c) -> np.ndarray:
    """Index 1, 2 or 3 of the interval of the partition holding each point"""
    part = partition2(theta, c)
    lo, hi = (float(b) for b in part.bounds)
    x = np.asarray(x, dtype=float)
    return np.where((x >= lo) & (x <= hi), 2, np.where(x < lo, 1, 3))


def _arrival_label(mu: np.ndarray) -> np.ndarray:
    return np.where(mu[:, 0] == 1, "id", "tau")


def _sample_pairs(spec, trials: int, master_seed: int):
    for index, start, stop in chunk_bounds(trials):
        rng = substream(master_seed, index)
        yield apply_batch(spec, sample_iud_many(stop - start, 2, rng), rng)


def travellers_defect_probability(theta, c, trials: int, master_seed: int, spec=None) -> DefectReport:
    """Frequency of {f_theta(Y_2) <= c < f_theta(Y_1)} for ``spec`` (the travellers' process by default).

    Every hit is checked against the region X_32 x id  u  X_21 x tau.
    """
    part = partition2(theta, c)
    spec = spec or TravellersSpec(n=2, theta=float(part.theta))
    if spec.n != 2:
        raise RearrangementError(f"defect event needs n=2, got n={spec.n}")
    hits = 0
    by_atom: Dict[str, int] = {}
    for batch in _sample_pairs(spec, trials, master_seed):
        cells_y = classify_interval(batch.y, part.theta, part.c)
        event = (cells_y[:, 1] == 2) & (cells_y[:, 0] != 2)
        if not event.any():
            continue
        cells_x = classify_interval(batch.x_desc[event], part.theta, part.c)
        orders = _arrival_label(batch.mu[event])
        for (i, j), order in zip(map(tuple, cells_x), orders):
            if DEFECT_ATOMS.get((int(i), int(j))) != order:
                logger.error(f"defect hit in X{i}{j} x {order} lies outside the event region")
                raise RearrangementError(f"defect hit in X{i}{j} x {order} lies outside the event region")
            label = f"X{i}{j} x {order}"
            by_atom[label] = by_atom.get(label, 0) + 1
        hits += int(event.sum())
    logger.info(f"defect event: {hits} hits in {trials} trials for {spec.kind}")
    return DefectReport(theta=str(part.theta), c=str(part.c), trials=trials, hits=hits,
                        frequency=hits / trials, hits_by_atom=by_atom)


def _is_travellers_for(spec, theta: Fraction) -> bool:
    return isinstance(spec, TravellersSpec) and abs(spec.theta - float(theta)) <= 1e-12


def n2_conditional_rank(theta, c, spec=None, trials: Optional[int] = None,
                        master_seed: Optional[int] = None) -> N2Conditionals:
    """P(R_2 = 2 | Y_1 in I_1) and P(R_2 = 2 | Y_1 in I_3).

    Exact for the travellers' process with this theta and for the two constant
    orders; Monte Carlo otherwise, which needs ``trials`` and ``master_seed``.
    """
    part = partition2(theta, c)
    if spec is not None and spec.n != 2:
        raise RearrangementError(f"conditional ranks need n=2, got n={spec.n}")
    if spec is None or _is_travellers_for(spec, part.theta):
        given_i1, given_i3 = travellers_conditionals(part.theta, part.c)
        return N2Conditionals(theta=str(part.theta), c=str(part.c), given_i1=str(given_i1),
                              given_i3=str(given_i3), exact=True)
    if isinstance(spec, ConstantSpec):
        # id keeps Y_1 = x1 on top; tau always sends the larger value second
        value = 1 if list(spec.permutation) == [1, 2] else 0
        return N2Conditionals(theta=str(part.theta), c=str(part.c), given_i1=str(value),
                              given_i3=str(value), exact=True)
    if trials is None or master_seed is None:
        raise RearrangementError(f"'{spec.kind}' has no exact conditional; give trials and a seed")

    counts = np.zeros((2, 2), dtype=np.int64)
    for batch in _sample_pairs(spec, trials, master_seed):
        first = classify_interval(batch.y[:, 0], part.theta, part.c)
        second_rank = batch.ranks[:, 1] == 2
        for row, cell in enumerate((1, 3)):
            inside = first == cell
            counts[row, 0] += int(inside.sum())
            counts[row, 1] += int((inside & second_rank).sum())
    estimates = []
    for row in range(2):
        if counts[row, 0] == 0:
            logger.warning(f"no trial had Y_1 in I_{2 * row + 1}")
            estimates.append("nan")
        else:
            estimates.append(repr(float(counts[row, 1]) / float(counts[row, 0])))
    return N2Conditionals(theta=str(part.theta), c=str(part.c), given_i1=estimates[0],
                          given_i3=estimates[1], exact=False, trials=trials)


def identity_line(theta, c) -> str:
    """'alpha^-1 m11 + alpha m33 = m31' with a check mark when it holds exactly"""
    measures = atom_measures(theta, c)
    left, right, total = measures.identity_sides()
    mark = "✓" if measures.identity_holds() else "✗"
    return f"{render_number(left)} + {render_number(right)} = {render_number(total)} {mark}"
