"""Managed sequences whose inverse limit realizes a target simplex.

Two targets are supported: the simplex with ``d`` extreme points, built
from diagonally dominant matrices, and a stagewise presentation by
column-stochastic rational matrices, approximated on the grids the chain's
ratios allow.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import DimensionMismatchError, InputInvalidError, NeedsMoreLevelsError
from .lattice import LatticeChain
from .matrices import ManagedSequence, Matrix, column, matmul, transpose, verify_managed
from .reports import Report

logger = logging.getLogger(__name__)

FINITE = "finite"
STAGEWISE = "stagewise"

RationalMatrix = Tuple[Tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class SimplexSpec:
    """Target simplex: ``d`` extreme points, or stagewise stochastic matrices"""
    kind: str
    d: Optional[int] = None
    matrices: Tuple[RationalMatrix, ...] = ()

    @classmethod
    def finite(cls, d: int) -> "SimplexSpec":
        spec = cls(FINITE, d=d)
        spec.validate()
        return spec

    @classmethod
    def stagewise(cls, matrices: Sequence[Sequence[Sequence]]) -> "SimplexSpec":
        mats = tuple(tuple(tuple(Fraction(x) for x in row) for row in m) for m in matrices)
        spec = cls(STAGEWISE, matrices=mats)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.kind == FINITE:
            if not isinstance(self.d, int) or self.d < 1:
                raise InputInvalidError(f"A finite simplex needs d >= 1 extreme points, got {self.d!r}")
            return
        if self.kind != STAGEWISE:
            raise InputInvalidError(f"Unknown simplex kind '{self.kind}'")
        if not self.matrices:
            raise InputInvalidError("A stagewise simplex needs at least one matrix")
        for i, m in enumerate(self.matrices):
            if len(m) < 2:
                raise InputInvalidError(f"Stage {i + 1} matrix has {len(m)} rows; at least 2 are needed")
            if any(len(row) != len(m[0]) for row in m):
                raise InputInvalidError(f"Stage {i + 1} matrix rows have different lengths")
            if i + 1 < len(self.matrices) and len(m[0]) != len(self.matrices[i + 1]):
                raise InputInvalidError(
                    f"Stage {i + 1} has {len(m[0])} columns but stage {i + 2} has {len(self.matrices[i + 1])} rows"
                )
            for j, col in enumerate(zip(*m)):
                if any(x < 0 for x in col) or sum(col) != 1:
                    raise InputInvalidError(f"Column {j + 1} of stage {i + 1} is not a probability vector")


def finite_matrix(d: int, k: int, ratio: int) -> Matrix:
    """k x k matrix with ratio - k(k-1) on the first d diagonal slots, k elsewhere"""
    diag = ratio - k * (k - 1)
    cols = []
    for j in range(k):
        l = min(j, d - 1)
        cols.append(tuple(diag if i == l else k for i in range(k)))
    return transpose(tuple(cols))


def finite_simplex_sequence(d: int, k: int, chain: LatticeChain, depth: int,
                            eps: Fraction = Fraction(1, 8)) -> Tuple[ManagedSequence, Tuple[int, ...], List[Dict]]:
    """Diagonally dominant managed sequence with ``d`` limiting extreme points"""
    eps = Fraction(eps)
    if d < 1:
        raise InputInvalidError(f"Number of extreme points must be at least 1, got {d}")
    if k < max(3, d):
        raise InputInvalidError(f"k={k} must be at least max(3, d)={max(3, d)}")
    if not 0 < eps < Fraction(1, 4):
        raise InputInvalidError(f"eps must lie in (0, 1/4), got {eps}")
    if depth < 1:
        raise InputInvalidError(f"depth must be at least 1, got {depth}")
    p = chain.indices
    p0 = p[0]
    kk = k * (k - 1)
    indices = [0]
    mats: List[Matrix] = []
    running: Optional[Matrix] = None
    for i in range(depth):
        n_i = indices[-1]
        chosen = None
        for n in range(n_i + 1, len(p)):
            ratio = p[n] // p[n_i]
            if ratio <= kk:
                continue
            if i == 0:
                ok = 1 - Fraction(p0 * kk, p[n]) >= Fraction(3, 4) + eps
            else:
                bound = eps / (p0 * kk * 2 ** i)
                ok = all(Fraction(running[l][l], p[n]) < bound for l in range(d))
            if ok:
                chosen = n
                break
        if chosen is None:
            raise NeedsMoreLevelsError(
                f"Chain of {len(p)} levels cannot host stage {i} of the finite construction",
                condition=f"stage {i}", level=len(p) - 1,
            )
        indices.append(chosen)
        m = finite_matrix(d, k, p[chosen] // p[n_i])
        mats.append(m)
        running = m if running is None else matmul(running, m)
    seq = ManagedSequence(tuple(p[n] for n in indices), tuple(mats))
    diagnostics = finite_diagnostics(seq, d, indices)
    logger.debug("finite construction d=%d k=%d picked indices %s", d, k, indices)
    return seq, tuple(indices), diagnostics


def finite_diagnostics(seq: ManagedSequence, d: int, indices: Optional[Sequence[int]] = None) -> List[Dict]:
    """Normalized diagonal, off-diagonal mass and margin of every running product"""
    p0 = seq.p[0]
    out: List[Dict] = []
    running: Optional[Matrix] = None
    for i, m in enumerate(seq.mats):
        running = m if running is None else matmul(running, m)
        normalized = [[Fraction(p0 * x, seq.p[i + 1]) for x in col] for col in zip(*running)]
        margins = [col[l] - (sum(col) - col[l]) for l, col in enumerate(normalized[:d])]
        out.append({
            "stage": i,
            "index": indices[i + 1] if indices is not None else i + 1,
            "delta": [normalized[l][l] for l in range(d)],
            "off_diagonal": [sum(col) - col[l] for l, col in enumerate(normalized[:d])],
            "margin": min(margins),
        })
    return out


def dominance_report(diagnostics: Sequence[Dict]) -> Report:
    """Diagonal at least 3/4 and off-diagonal mass at most 1/4 at every stage"""
    report = Report("diagonal dominance")
    for diag in diagnostics:
        stage = diag["stage"]
        for l, (delta, off) in enumerate(zip(diag["delta"], diag["off_diagonal"])):
            ok = delta >= Fraction(3, 4) and off <= Fraction(1, 4)
            report.add("dominance", ok, level=stage, location=(l + 1,),
                       detail=f"delta={delta}, off={off}")
        report.add("margin", diag["margin"] > 0, level=stage, detail=f"margin={diag['margin']}")
    return report


def _grid_round(target: Sequence[Fraction], denominator: int) -> Tuple[int, ...]:
    scaled = [x * denominator for x in target]
    floors = [int(x // 1) for x in scaled]
    deficit = denominator - sum(floors)
    order = sorted(range(len(target)), key=lambda i: (-(scaled[i] - floors[i]), i))
    for i in order[:deficit]:
        floors[i] += 1
    for i, x in enumerate(floors):
        if x == 0:
            donor = max(range(len(floors)), key=lambda j: (floors[j], -j))
            if floors[donor] > 1:
                floors[donor] -= 1
                floors[i] += 1
    return tuple(floors)


def approx_in_Cr(target: Sequence, r: Union[int, Sequence[int]], eps) -> Tuple[Fraction, ...]:
    """Positive vector on the grid 1/(r_0...r_m) within eps of target in l1"""
    target = [Fraction(x) for x in target]
    eps = Fraction(eps)
    if any(x < 0 for x in target) or sum(target) != 1:
        raise InputInvalidError(f"Target {target} is not a probability vector")
    if eps <= 0:
        raise InputInvalidError(f"eps must be positive, got {eps}")
    denominator = 1
    m = 0
    while True:
        if isinstance(r, int):
            ratio = r
        elif m < len(r):
            ratio = r[m]
        else:
            raise NeedsMoreLevelsError(
                f"Ratios ran out after {m} steps approximating {target} within {eps}",
                condition="grid approximation", level=m,
            )
        if ratio < 2:
            raise InputInvalidError(f"Grid ratio r_{m}={ratio} must be at least 2")
        denominator *= ratio
        counts = _grid_round(target, denominator)
        if all(c > 0 for c in counts):
            v = tuple(Fraction(c, denominator) for c in counts)
            error = sum(abs(a - b) for a, b in zip(v, target))
            if error < eps / 2:
                return v
        m += 1


def stochastic_to_managed(spec: SimplexSpec, chain: LatticeChain,
                          depth: Optional[int] = None) -> Tuple[ManagedSequence, Tuple[int, ...]]:
    """Integer matrices M_i = ratio * B_i with B_i close to the stage matrices"""
    if spec.kind != STAGEWISE:
        raise InputInvalidError("stochastic_to_managed needs a stagewise simplex")
    stages = spec.matrices if depth is None else spec.matrices[:depth]
    p = chain.indices
    ratios = [p[n + 1] // p[n] for n in range(len(p) - 1)]
    indices = [0]
    mats: List[Matrix] = []
    for i, A in enumerate(stages, start=1):
        n_i = indices[-1]
        eps = Fraction(1, 2 ** i)
        cols = [approx_in_Cr(col, ratios[n_i:], eps) for col in zip(*A)]
        chosen = None
        for n in range(n_i + 1, len(p)):
            ratio = p[n] // p[n_i]
            scaled = [[x * ratio for x in col] for col in cols]
            if all(x.denominator == 1 and x > i + 3 for col in scaled for x in col):
                chosen = n
                break
        if chosen is None:
            raise NeedsMoreLevelsError(
                f"Chain of {len(p)} levels cannot host stage {i} of the stagewise construction",
                condition=f"stage {i}", level=len(p) - 1,
            )
        ratio = p[chosen] // p[n_i]
        mats.append(transpose(tuple(tuple(int(x * ratio) for x in col) for col in cols)))
        indices.append(chosen)
    seq = ManagedSequence(tuple(p[n] for n in indices), tuple(mats))
    report = verify_managed(seq)
    if not report.passed:
        raise InputInvalidError(f"Stagewise construction is not managed: {report.first_failure()}")
    logger.debug("stagewise construction picked indices %s", indices)
    return seq, tuple(indices)


def approximation_errors(spec: SimplexSpec, seq: ManagedSequence) -> Report:
    """l1 distance of each normalized column from its stage column, against 2^-i"""
    report = Report("stagewise approximation")
    if len(seq.mats) > len(spec.matrices):
        raise DimensionMismatchError("Sequence has more stages than the stagewise spec")
    for i, (A, M) in enumerate(zip(spec.matrices, seq.mats), start=1):
        ratio = seq.ratio(i - 1)
        bound = Fraction(1, 2 ** i)
        for j in range(len(A[0])):
            b = [Fraction(x, ratio) for x in column(M, j)]
            error = sum(abs(x - y) for x, y in zip(b, column(A, j)))
            report.add("l1-error", error < bound, level=i, location=(j + 1,),
                       detail=f"{error} < {bound}" if error < bound else f"{error} >= {bound}")
    return report
