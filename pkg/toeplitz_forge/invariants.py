"""Simplex approximants, states and the ordered-group witness."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from sympy import Matrix as SymMatrix
from sympy import Rational

from .blocks import BlockFamily, block_at
from .errors import (
    AugmentationError,
    ConditionViolationError,
    ConstructionDefectError,
    DimensionMismatchError,
    LevelRangeError,
    NotWitnessedError,
)
from .matrices import (
    ManagedSequence,
    Matrix,
    first_difference,
    identity,
    matmul,
    product,
    split_factors,
    split_matrix,
    transpose,
    unit_row,
)
from .reports import Report

logger = logging.getLogger(__name__)

Vector = Tuple[Fraction, ...]


@dataclass(frozen=True)
class SimplexApprox:
    """Normalized vertices of M_0 ... M_stage applied to the standard simplex"""
    stage: int
    vertices: Tuple[Vector, ...]
    nested: Optional[bool] = None


def _normalized_columns(m: Matrix) -> Tuple[Vector, ...]:
    out = []
    for col in zip(*m):
        total = sum(col)
        out.append(tuple(Fraction(x, total) for x in col))
    return tuple(out)


def simplex_vertices(seq: ManagedSequence, stage: int) -> SimplexApprox:
    """Vertices at ``stage`` (-1 is the standard simplex) with a nestedness certificate"""
    if not -1 <= stage < len(seq.mats):
        raise LevelRangeError(f"Stage {stage} outside a sequence of {len(seq.mats)} matrices")
    if stage == -1:
        k = seq.k[0] if seq.mats else 1
        return SimplexApprox(-1, _normalized_columns(identity(k)), None)
    vertices = _normalized_columns(product(seq.mats[: stage + 1]))
    previous = _normalized_columns(product(seq.mats[:stage], k=seq.k[0]))
    weights = _normalized_columns(seq.mats[stage])
    nested = True
    for v, w in zip(vertices, weights):
        combo = tuple(sum(wj * prev[i] for wj, prev in zip(w, previous)) for i in range(len(v)))
        if combo != v or any(x < 0 for x in w) or sum(w) != 1:
            nested = False
            break
    return SimplexApprox(stage, vertices, nested)


def vertex_spread(approx: SimplexApprox) -> Fraction:
    """Largest l1 distance between two vertices"""
    best = Fraction(0)
    vs = approx.vertices
    for a in range(len(vs)):
        for b in range(a + 1, len(vs)):
            best = max(best, sum((abs(x - y) for x, y in zip(vs[a], vs[b])), Fraction(0)))
    return best


def affine_rank(vectors: Sequence[Sequence]) -> int:
    """Dimension of the affine hull plus one, computed exactly"""
    if not vectors:
        return 0
    rows = [[Rational(x.numerator, x.denominator) if isinstance(x, Fraction) else Rational(x) for x in v] + [1]
            for v in vectors]
    return SymMatrix(rows).rank()


class StateChain(NamedTuple):
    """Vectors z_n with z_n = M_n z_{n+1}, scaled so the unit evaluates to 1"""
    z: Tuple[Vector, ...]
    scale: Fraction


def state_chain(seq: ManagedSequence, z_last: Sequence, normalize: bool = True) -> StateChain:
    """Pull a nonnegative vector at the last level back through the matrices"""
    z_last = tuple(Fraction(x) for x in z_last)
    if len(z_last) != seq.k[-1]:
        raise DimensionMismatchError(f"Last-level vector has {len(z_last)} entries, level has {seq.k[-1]}")
    if any(x < 0 for x in z_last) or not any(z_last):
        raise ValueError("A state needs a nonzero nonnegative vector")
    zs = [z_last]
    for m in reversed(seq.mats):
        zs.append(tuple(sum(a * b for a, b in zip(row, zs[-1])) for row in m))
    zs.reverse()
    scale = Fraction(1)
    if normalize:
        unit = unit_row(seq)[0]
        scale = 1 / sum(u * z for u, z in zip(unit, zs[0]))
        zs = [tuple(x * scale for x in z) for z in zs]
    return StateChain(tuple(zs), scale)


def vertex_state(seq: ManagedSequence, stage: int, l: int) -> StateChain:
    """The normalized state carried by vertex l (1-based) of ``stage``"""
    truncated = seq.truncate(stage + 1)
    z = [0] * truncated.k[-1]
    z[l - 1] = 1
    return state_chain(truncated, z)


def push_forward(seq: ManagedSequence, v: Sequence[int], n: int) -> Tuple[Tuple[int, ...], int]:
    """[v, n] ~ [M_n^T v, n+1]"""
    if not 0 <= n < len(seq.mats):
        raise LevelRangeError(f"No matrix leaves level {n}")
    m = seq.mats[n]
    if len(v) != len(m):
        raise DimensionMismatchError(f"Vector of length {len(v)} at a level with {len(m)} rows")
    return tuple(sum(row[j] * x for row, x in zip(m, v)) for j in range(len(m[0]))), n + 1


def evaluate_state(chain: StateChain, cls: Tuple[Sequence[int], int]) -> Fraction:
    """<v, z_n> for the class [v, n]"""
    v, n = cls
    if not 0 <= n < len(chain.z):
        raise LevelRangeError(f"State has no level {n}")
    z = chain.z[n]
    if len(v) != len(z):
        raise DimensionMismatchError(f"Class vector has {len(v)} entries, level {n} has {len(z)}")
    return sum((Fraction(a) * b for a, b in zip(v, z)), Fraction(0))


class Frequencies(NamedTuple):
    counts: Tuple[int, ...]
    frequencies: Vector
    report: Report


def empirical_frequencies(family: BlockFamily, n: int, m: int) -> Frequencies:
    """Share of each level-n block among the level-n cosets of B_{m,1}"""
    if not 0 <= n <= m < family.levels:
        raise LevelRangeError(f"Need 0 <= n <= m < {family.levels}, got n={n}, m={m}")
    chain = family.chain
    l_n = family.block_count(n)
    report = Report(f"frequencies of level {n} in level {m}")
    counts = [0] * l_n
    if m == n:
        counts[0] = 1
    else:
        window = chain.domain(m)
        lattice = chain.lattice(n)
        lookup = None
        if family.materialized(n) and family.materialized(m):
            lookup = {p: i for i, p in enumerate(family.patterns[n])}
            big = family.patterns[m][0]
            inner = chain.domain(n).points
        for v in window:
            if v not in lattice:
                continue
            if lookup is not None:
                restriction = tuple(big[window.index(tuple(a + b for a, b in zip(v, u)))] for u in inner)
                i = lookup.get(restriction)
                if i is None:
                    raise ConditionViolationError(f"B_{{{m},1}} carries no level-{n} block at {v}",
                                                  level=m, block=1, coset=v)
                label = i + 1
            else:
                label = block_at(family, m, 1, v, n)
            counts[label - 1] += 1
    expected = product(family.seq.mats[n:m], k=l_n)
    column1 = tuple(row[0] for row in expected)
    report.add("count-identity", tuple(counts) == column1, level=n, location=(n, m),
               detail="" if tuple(counts) == column1 else f"scan {counts} vs product {list(column1)}")
    ratio = Fraction(chain.domain(n).size, chain.domain(m).size)
    freqs = tuple(c * ratio for c in counts)
    if m > n:
        sub = ManagedSequence(family.seq.p[n:m + 1], family.seq.mats[n:m])
        approx = simplex_vertices(sub, m - n - 1)
        for k in range(l_n):
            lo = min(v[k] for v in approx.vertices)
            hi = max(v[k] for v in approx.vertices)
            report.add("vertex-interval", lo <= freqs[k] <= hi, level=n, location=(k + 1,))
    return Frequencies(tuple(counts), freqs, report)


@dataclass
class Witness:
    """Factor matrices and the identities checked between two presentations"""
    report: Report
    factors: List[Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return self.report.passed


def _identity_check(report: Report, name: str, lhs: Matrix, rhs: Matrix, n: int) -> None:
    diff = first_difference(lhs, rhs)
    report.add(name, diff is None, level=n, location=None if diff is None else (n,) + diff)


def ordered_group_witness(seq_a: ManagedSequence, seq_b: ManagedSequence, strict: bool = True) -> Witness:
    """Check that seq_b's augmented presentation factors through seq_a's"""
    report = Report("ordered group witness")
    factors: List[Dict[str, Any]] = []
    if len(seq_a.mats) != len(seq_b.mats):
        report.add("length", False, detail=f"{len(seq_a.mats)} vs {len(seq_b.mats)} matrices")
    unit_ok = seq_a.p[0] == seq_b.p[0]
    report.add("unit", unit_ok, level=0, detail=f"|F_0| = {seq_a.p[0]} vs {seq_b.p[0]}")
    if seq_a.mats:
        a_unit = transpose(unit_row(seq_a))
        aug_unit = transpose(unit_row(seq_b)) if seq_b.mats else a_unit
        s0 = split_matrix(seq_a.k[0])
        try:
            _identity_check(report, "unit-split", matmul(s0, a_unit), aug_unit, 0)
        except DimensionMismatchError as e:
            report.add("unit-split", False, level=0, detail=str(e))
    for n, (ma, mb) in enumerate(zip(seq_a.mats, seq_b.mats)):
        a_n = transpose(ma)
        a_tilde = transpose(mb)
        try:
            f = split_factors(a_n)
        except (AugmentationError, ConstructionDefectError) as e:
            report.add("split", False, level=n, detail=str(e))
            continue
        factors.append({"level": n, "S": f.S, "T": f.T, "S_next": f.S_next})
        _identity_check(report, "A=TS", matmul(f.T, f.S), a_n, n)
        _identity_check(report, "augmented=S'T", matmul(f.S_next, f.T), a_tilde, n)
    report.data["stages"] = len(factors)
    witness = Witness(report, factors)
    if strict and not report.passed:
        failure = report.first_failure()
        raise NotWitnessedError(f"Identity {failure.name} fails at {failure.location}",
                                location=failure.location or (), report=report)
    return witness


def stage_vertex_sets(seq: ManagedSequence) -> List[frozenset]:
    """Vertex sets of every stage, as exact sets"""
    return [frozenset(simplex_vertices(seq, i).vertices) for i in range(len(seq.mats))]
