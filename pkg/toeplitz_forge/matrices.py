"""Managed matrix sequences and the exact algebra built on them.

Matrices are tuples of row tuples of Python ints. ``M_n`` has ``k_n`` rows
and ``k_{n+1}`` columns and every column sums to ``p_{n+1} / p_n``. The
transposed matrices ``A_n = M_n^T`` present the dimension group.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import (
    AugmentationError,
    ConstructionDefectError,
    DimensionMismatchError,
    InternalConsistencyError,
    LevelRangeError,
    MultinomialDomainError,
    NeedsMoreLevelsError,
)
from .lattice import LatticeChain, border_between, boundary_sum, difference_set, region_size
from .reports import Report

logger = logging.getLogger(__name__)

Matrix = Tuple[Tuple[int, ...], ...]

THEOREM_A = "theoremA"
THEOREM_B = "theoremB"
MODES = (THEOREM_A, THEOREM_B)


def as_matrix(rows: Iterable[Iterable[int]]) -> Matrix:
    m = tuple(tuple(int(x) for x in row) for row in rows)
    if not m or not m[0]:
        raise DimensionMismatchError("Matrix must have at least one row and one column")
    if any(len(row) != len(m[0]) for row in m):
        raise DimensionMismatchError("Matrix rows have different lengths")
    return m


def shape(m: Matrix) -> Tuple[int, int]:
    return len(m), len(m[0])


def transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if len(a[0]) != len(b):
        raise DimensionMismatchError(f"Cannot multiply {shape(a)} by {shape(b)}")
    cols = transpose(b)
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def matvec(m: Matrix, v: Sequence) -> Tuple:
    if len(m[0]) != len(v):
        raise DimensionMismatchError(f"Cannot apply {shape(m)} to a vector of length {len(v)}")
    return tuple(sum(x * y for x, y in zip(row, v)) for row in m)


def identity(k: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(k)) for i in range(k))


def column(m: Matrix, j: int) -> Tuple[int, ...]:
    return tuple(row[j] for row in m)


def column_sums(m: Matrix) -> Tuple[int, ...]:
    return tuple(sum(col) for col in zip(*m))


def product(mats: Sequence[Matrix], k: Optional[int] = None) -> Matrix:
    """Left-to-right product; the empty product needs ``k``"""
    if not mats:
        if k is None:
            raise DimensionMismatchError("Empty product needs an explicit size")
        return identity(k)
    out = mats[0]
    for m in mats[1:]:
        out = matmul(out, m)
    return out


def first_difference(a: Matrix, b: Matrix) -> Optional[Tuple[int, int]]:
    """First (row, column) where two equal-shaped matrices differ, 1-based"""
    if shape(a) != shape(b):
        return (0, 0)
    for i, (ra, rb) in enumerate(zip(a, b)):
        for j, (x, y) in enumerate(zip(ra, rb)):
            if x != y:
                return (i + 1, j + 1)
    return None


@dataclass(frozen=True)
class ManagedSequence:
    """Index chain ``p`` and matrices ``M_n`` with column sums ``p_{n+1} / p_n``"""
    p: Tuple[int, ...]
    mats: Tuple[Matrix, ...]

    @classmethod
    def of(cls, p: Sequence[int], mats: Sequence[Sequence[Sequence[int]]]) -> "ManagedSequence":
        return cls(tuple(int(x) for x in p), tuple(as_matrix(m) for m in mats))

    def __len__(self) -> int:
        return len(self.mats)

    @property
    def k(self) -> Tuple[int, ...]:
        """k_n for every level, taken from matrix shapes"""
        if not self.mats:
            return ()
        return tuple(len(m) for m in self.mats) + (len(self.mats[-1][0]),)

    def ratio(self, n: int) -> int:
        return self.p[n + 1] // self.p[n]

    @property
    def positive(self) -> bool:
        return all(x > 0 for m in self.mats for row in m for x in row)

    def truncate(self, levels: int) -> "ManagedSequence":
        """Keep the first ``levels`` matrices"""
        return ManagedSequence(self.p[: levels + 1], self.mats[:levels])


@dataclass(frozen=True)
class SplitFactors:
    """A = T S and (augmented A) = S_next T, all exact"""
    S: Matrix
    T: Matrix
    S_next: Matrix


def verify_managed(seq: ManagedSequence) -> Report:
    """Per-level divisibility, shape chaining, column sums and k_n >= 2"""
    report = Report("managed sequence")
    if len(seq.p) != len(seq.mats) + 1:
        report.add("length", False, detail=f"{len(seq.p)} indices for {len(seq.mats)} matrices")
        return report
    if any(x < 1 for x in seq.p):
        report.add("p-positive", False, detail="indices must be positive")
        return report
    positivity = []
    for n, m in enumerate(seq.mats):
        divides = seq.p[n + 1] % seq.p[n] == 0
        report.add("divisibility", divides, level=n,
                   detail="" if divides else f"p_{n}={seq.p[n]} does not divide p_{n + 1}={seq.p[n + 1]}")
        rows, cols = shape(m)
        report.add("k_n >= 2", rows >= 2 and cols >= 2, level=n,
                   detail="" if rows >= 2 and cols >= 2 else f"matrix is {rows}x{cols}")
        if n + 1 < len(seq.mats):
            chained = cols == len(seq.mats[n + 1])
            report.add("dimension-chaining", chained, level=n,
                       detail="" if chained else f"{cols} columns feed {len(seq.mats[n + 1])} rows")
        nonneg = all(x >= 0 for row in m for x in row)
        report.add("nonnegative", nonneg, level=n)
        ratio = Fraction(seq.p[n + 1], seq.p[n])
        bad = next((j for j, s in enumerate(column_sums(m)) if s != ratio), None)
        if bad is None:
            report.add("column-sum", True, level=n)
        else:
            report.add("column-sum", False, level=n, location=(n, bad + 1),
                       detail=f"column {bad + 1} sums to {column_sums(m)[bad]}, ratio is {ratio}")
        positivity.append(all(x > 0 for row in m for x in row))
    report.data["positive"] = positivity
    return report


def telescope(seq: ManagedSequence, cut_points: Sequence[int]) -> ManagedSequence:
    """Multiply the matrices between consecutive cut points"""
    cuts = list(cut_points)
    if not cuts or cuts[0] != 0:
        raise LevelRangeError(f"Cut points must start at 0, got {cuts}")
    if cuts[-1] > len(seq.mats):
        raise LevelRangeError(f"Cut point {cuts[-1]} beyond {len(seq.mats)} matrices")
    mats = []
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            raise LevelRangeError(f"Empty telescoping block between cut points {a} and {b}")
        mats.append(product(seq.mats[a:b]))
    return ManagedSequence(tuple(seq.p[c] for c in cuts), tuple(mats))


def unit_row(seq: ManagedSequence) -> Matrix:
    """The first-level row |F_0| (1, ..., 1)"""
    return ((seq.p[0],) * seq.k[0],)


def augment(m: Matrix, is_first_level: bool = False) -> Matrix:
    """Split row 1 so that the new first row is all ones, and repeat column 1"""
    rows, cols = shape(m)
    if is_first_level:
        return tuple((row[0],) + row for row in m)
    if any(x < 1 for x in m[0]):
        j = next(j for j, x in enumerate(m[0]) if x < 1)
        raise AugmentationError(f"Row 1 entry in column {j + 1} is {m[0][j]}; augmentation needs it to be at least 1")
    new_cols = []
    for j in range(cols):
        col = column(m, j)
        new_cols.append((1, col[0] - 1) + col[1:])
    new_cols.insert(0, new_cols[0])
    return transpose(tuple(new_cols))


def augment_sequence(seq: ManagedSequence) -> ManagedSequence:
    return ManagedSequence(seq.p, tuple(augment(m) for m in seq.mats))


def split_matrix(k: int) -> Matrix:
    """(k+1) x k matrix with columns e_1 + e_2, e_3, ..., e_{k+1}"""
    cols = [tuple(1 if i in (0, 1) else 0 for i in range(k + 1))]
    for j in range(1, k):
        cols.append(tuple(1 if i == j + 1 else 0 for i in range(k + 1)))
    return transpose(tuple(cols))


def split_factors(a: Matrix) -> SplitFactors:
    """Factor A = T S and its augmentation as S' T"""
    rows, cols = shape(a)
    if any(a[i][0] < 1 for i in range(rows)):
        i = next(i for i in range(rows) if a[i][0] < 1)
        raise AugmentationError(f"A({i + 1},1) is {a[i][0]}; the split needs every entry of column 1 to be at least 1")
    S = split_matrix(cols)
    T = tuple((1, row[0] - 1) + tuple(row[1:]) for row in a)
    S_next = split_matrix(rows)
    if matmul(T, S) != a:
        raise ConstructionDefectError(f"T S differs from A at {first_difference(matmul(T, S), a)}")
    aug = transpose(augment(transpose(a)))
    if matmul(S_next, T) != aug:
        raise ConstructionDefectError(f"S' T differs from the augmented A at {first_difference(matmul(S_next, T), aug)}")
    return SplitFactors(S, T, S_next)


def factor_chain(seq: ManagedSequence) -> List[Matrix]:
    """Alternating factors S_0, T_0, S_1, T_1, ..., S_N of the transposed sequence"""
    out: List[Matrix] = []
    for m in seq.mats:
        f = split_factors(transpose(m))
        out.extend([f.S, f.T])
    if seq.mats:
        out.append(split_matrix(seq.k[-1]))
    return out


def multinomial(parts: Sequence[int]) -> int:
    """(sum parts)! / prod(parts_i!)"""
    total = 0
    result = 1
    for part in parts:
        if part < 0:
            raise MultinomialDomainError(f"Multinomial part {part} is negative")
        total += part
        result *= comb(total, part)
    return result


def multinomial_reaches(parts: Sequence[int], target: int) -> Tuple[bool, Optional[int]]:
    """Whether multinomial(parts) >= target, with the exact value when it was cheap"""
    if any(x < 0 for x in parts):
        raise MultinomialDomainError(f"Multinomial parts {list(parts)} contain a negative entry")
    positive = [x for x in parts if x > 0]
    if len(positive) <= 1:
        return 1 >= target, 1
    total = sum(positive)
    # two nonzero parts already give at least `total` arrangements
    if total >= target:
        return True, None
    value = multinomial(positive)
    return value >= target, value


def column_multiplicities(m: Matrix) -> List[int]:
    cols = transpose(m)
    return [cols.count(c) for c in cols]


def check_fillability(m_tilde: Matrix, border_coset_size: int, level: Optional[int] = None) -> Report:
    """Every column must have enough distinct arrangements on the free cosets"""
    report = Report("fillability")
    rows, cols = shape(m_tilde)
    mult = column_multiplicities(m_tilde)
    for k in range(cols):
        col = column(m_tilde, k)
        if col[-1] < border_coset_size:
            report.add("fillability", False, level=level, location=(k + 1,),
                       detail=f"insufficient last-block count: {col[-1]} < {border_coset_size} border cosets")
            continue
        parts = list(col[1:-1]) + [col[-1] - border_coset_size]
        ok, bound = multinomial_reaches(parts, mult[k])
        shown = bound if bound is not None else f">= {sum(parts)}"
        report.add("fillability", ok, level=level, location=(k + 1,),
                   detail=f"multiplicity {mult[k]}, arrangements {shown}")
    return report


def kr_column_bound(seq: ManagedSequence, n: int, m: int) -> Report:
    """Equal columns of M_n ... M_{m-1} cannot outnumber the words with those letter counts"""
    if not 0 <= n < m <= len(seq.mats):
        raise LevelRangeError(f"Levels {n}..{m} outside a sequence of {len(seq.mats)} matrices")
    block = product(seq.mats[n:m])
    report = Report("column multiplicity bound")
    mult = column_multiplicities(block)
    for k in range(len(block[0])):
        ok, bound = multinomial_reaches(column(block, k), mult[k])
        report.add("multinomial-bound", ok, level=n, location=(k + 1,),
                   detail=f"multiplicity {mult[k]}, bound {bound if bound is not None else 'large'}")
    return report


def _block_failure(seq: ManagedSequence, chain: LatticeChain, n: int, m: int, mode: str) -> Optional[str]:
    """Name of the first selection condition violated by the block n..m, or None"""
    differences = difference_set(chain.domain(n))
    if not differences.issubset(chain.domain(m)):
        return "(i) R_n inside F_m"
    border = border_between(chain, n, m)
    block = product(seq.mats[n:m])
    smallest = min(x for row in block for x in row)
    if smallest <= 1 + region_size(border.full):
        return "(ii) entries exceed 1 + |border|"
    if seq.k[m] >= smallest:
        return "(iii) k_m below entries"
    if mode == THEOREM_B:
        total = boundary_sum(chain, n, m)
        if total:
            if n + 2 >= len(chain):
                return "boundary inequality (next ratio unavailable)"
            r0, r1 = chain.ratio(n), chain.ratio(n + 1)
            bound = Fraction(1, chain.domain(n).size * r0 * r1)
            if Fraction(total, chain.domain(m).size) >= bound:
                return "boundary inequality"
    return None


def verify_selection(seq: ManagedSequence, chain: LatticeChain, indices: Sequence[int],
                     mode: str = THEOREM_A) -> Report:
    """Re-check every selected block exactly"""
    report = Report(f"index selection ({mode})")
    for i, (n, m) in enumerate(zip(indices, indices[1:])):
        failure = _block_failure(seq, chain, n, m, mode)
        report.add("selection", failure is None, level=i, location=(n, m), detail=failure or "")
    return report


def select_indices(seq: ManagedSequence, chain: LatticeChain, mode: str = THEOREM_A,
                   min_blocks: int = 1) -> Tuple[int, ...]:
    """Greedy increasing indices whose telescoped blocks meet the selection conditions"""
    if mode not in MODES:
        raise ValueError(f"Unknown selection mode '{mode}'; expected one of {', '.join(MODES)}")
    if not seq.positive:
        raise ValueError("Index selection needs a strictly positive sequence")
    if len(chain) < len(seq.p):
        raise LevelRangeError(f"Chain has {len(chain)} levels, sequence needs {len(seq.p)}")
    if tuple(chain.indices[: len(seq.p)]) != seq.p:
        raise DimensionMismatchError("Sequence is not managed by the chain's domain sizes")
    indices = [0]
    last_failure, deepest = None, 0
    while True:
        n = indices[-1]
        chosen = None
        for m in range(n + 1, len(seq.p)):
            failure = _block_failure(seq, chain, n, m, mode)
            if failure is None:
                chosen = m
                break
            last_failure, deepest = failure, m
        if chosen is None:
            break
        indices.append(chosen)
    if len(indices) - 1 < min_blocks:
        raise NeedsMoreLevelsError(
            f"Only {len(indices) - 1} of {min_blocks} blocks close; last failure at level {deepest}: {last_failure}",
            condition=last_failure, level=deepest,
        )
    report = verify_selection(seq, chain, indices, mode)
    if not report.passed:
        raise InternalConsistencyError(f"Selected indices fail re-verification: {report.first_failure()}")
    logger.debug("selected indices %s in %s mode", indices, mode)
    return tuple(indices)
