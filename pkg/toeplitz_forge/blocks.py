"""Block families B_{n,k}: F_n -> {1, ..., l_0} and their certificates.

Level 0 blocks are constant. A block of level n+1 is stored as its
arrangement: the label of the level-n block sitting on each translate of
F_n inside F_{n+1}, translates in lexicographic order. A level with more
translates than the materialize limit keeps each arrangement as the rule
that places its labels (:class:`SparseArrangement`). Patterns are
materialized point by point only while the domain stays below the
configured limit; deeper symbols are read by descending through the
arrangements.
"""

import itertools
import logging
import random
from bisect import bisect_right
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from math import gcd
from typing import Dict, FrozenSet, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .config import ForgeSettings
from .errors import (
    ConditionViolationError,
    ConstructionDefectError,
    DimensionMismatchError,
    FillabilityError,
    InternalConsistencyError,
    LevelRangeError,
    MultiplicityError,
    NeedsMoreLevelsError,
)
from .lattice import (
    Domain,
    GroupElement,
    LatticeChain,
    Positions,
    border_set,
    coset_representative,
    tiling_defect,
)
from .matrices import ManagedSequence, Matrix, column, first_difference, shape
from .reports import Report

logger = logging.getLogger(__name__)

Pattern = Tuple[int, ...]


class MultisetArrangement:
    """The j-th (0-based) lexicographic permutation of a multiset, read by index.

    Only the shortest suffix with more than j arrangements is permuted; the
    sorted head is never listed.
    """

    def __init__(self, counts: Dict[int, int], j: int):
        self.counts = tuple((x, counts[x]) for x in sorted(counts) if counts[x] > 0)
        self._ends = list(itertools.accumulate(c for _, c in self.counts))
        self.length = self._ends[-1] if self._ends else 0
        self.tail = self._permuted_tail(j)

    def _permuted_tail(self, j: int) -> List[int]:
        suffix: Counter = Counter()
        total, s = 1, 0
        for x, c in reversed(self.counts):
            if total > j:
                break
            if not suffix:
                # a run of one value has a single arrangement
                suffix[x], s = c, c
                continue
            for _ in range(c):
                if total > j:
                    break
                s += 1
                suffix[x] += 1
                total = total * s // suffix[x]
        if total <= j:
            raise MultiplicityError(f"Multiset {dict(self.counts)} has only {total} arrangements; index {j} requested")
        tail = []
        remaining = s
        for _ in range(s):
            for x in sorted(suffix):
                if suffix[x] == 0:
                    continue
                starting = total * suffix[x] // remaining
                if j < starting:
                    tail.append(x)
                    suffix[x] -= 1
                    total = starting
                    remaining -= 1
                    break
                j -= starting
        return tail

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        head = self.length - len(self.tail)
        if i >= head:
            return self.tail[i - head]
        return self.counts[bisect_right(self._ends, i)][0]

    def __iter__(self) -> Iterator[int]:
        left = self.length - len(self.tail)
        for x, c in self.counts:
            take = min(c, left)
            yield from itertools.repeat(x, take)
            left -= take
        yield from self.tail


def lex_arrangement(counts: Dict[int, int], j: int) -> List[int]:
    """The j-th (0-based) lexicographic permutation of a multiset"""
    return list(MultisetArrangement(counts, j))


def colex_arrangement(counts: Dict[int, int], j: int) -> List[int]:
    """The j-th multiset permutation in colexicographic order"""
    return list(reversed(lex_arrangement(counts, j)))


@dataclass(frozen=True)
class CosetLayout:
    """Where coset 0 and the border cosets sit among the translates of F_n in F_{n+1}"""
    size: int
    zero: int
    border: Positions
    rows: int

    @property
    def free(self) -> int:
        return self.size - 1 - len(self.border)

    def free_index(self, i: int) -> int:
        """Rank of a free position among the free positions"""
        return i - self.border.rank(i) - (1 if i > self.zero else 0)


def coset_layout(chain: LatticeChain, n: int, rows: int) -> CosetLayout:
    tiling = chain.tiling(n)
    zero = tuple(0 for _ in range(chain.dim))
    return CosetLayout(tiling.size, tiling.position(zero), tiling.positions(border_set(chain, n).coset), rows)


@dataclass(frozen=True)
class SparseArrangement:
    """Labels of one block on a level too large to list, kept as the rule placing them.

    Coset 0 carries block 1 and border cosets carry block ``layout.rows``.
    Free cosets, in translate order and moved by the affine shuffle
    f -> (a f + c) mod (free count) when one is set, read the colexicographic
    arrangement of ``counts`` with index ``rank``.
    """
    counts: Tuple[Tuple[int, int], ...]
    rank: int
    shuffle: Optional[Tuple[int, int]] = None
    layout: Optional[CosetLayout] = field(default=None, compare=False, repr=False)

    @cached_property
    def _free(self) -> MultisetArrangement:
        return MultisetArrangement(dict(self.counts), self.rank)

    def _placed(self) -> CosetLayout:
        if self.layout is None:
            raise InternalConsistencyError("Arrangement rule has no tiling to be read on")
        return self.layout

    @property
    def size(self) -> int:
        return self._placed().size

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, i: int) -> int:
        layout = self._placed()
        if not 0 <= i < layout.size:
            raise IndexError(f"Position {i} outside {layout.size} translates")
        if i == layout.zero:
            return 1
        if i in layout.border:
            return layout.rows
        f = layout.free_index(i)
        if self.shuffle is not None:
            a, c = self.shuffle
            f = (a * f + c) % layout.free
        return self._free[layout.free - 1 - f]

    def totals(self) -> Counter:
        """Number of translates carrying each label"""
        layout = self._placed()
        totals: Counter = Counter({1: 1})
        totals[layout.rows] += len(layout.border)
        for x, c in self.counts:
            totals[x] += c
        return totals

    def count(self, label: int) -> int:
        return self.totals()[label]

    def defect(self) -> Optional[str]:
        """Why the rule places no labelling of its layout, or None"""
        if self.layout is None:
            return "no tiling to lay the rule out on"
        layout = self.layout
        labels = [x for x, _ in self.counts]
        if len(set(labels)) != len(labels):
            return "a label is counted twice"
        bad = next((x for x in labels if not 1 <= x <= layout.rows), None)
        if bad is not None:
            return f"label {bad} outside 1..{layout.rows}"
        if self.rank < 0 or any(c < 0 for _, c in self.counts):
            return "negative count or rank"
        placed = sum(c for _, c in self.counts)
        if placed != layout.free:
            return f"counts place {placed} labels on {layout.free} free cosets"
        if self.shuffle is not None and layout.free and gcd(self.shuffle[0], layout.free) != 1:
            return f"shuffle step {self.shuffle[0]} does not permute {layout.free} free cosets"
        try:
            self._free
        except MultiplicityError as e:
            return str(e)
        return None


Arrangement = Union[Tuple[int, ...], SparseArrangement]


def arrangement_defect(labels: Arrangement, layout: CosetLayout) -> Optional[str]:
    """Why ``labels`` is not a labelling of the translates in ``layout``, or None"""
    if isinstance(labels, SparseArrangement):
        if labels.layout is not None and labels.layout != layout:
            return "rule is laid out on a different tiling"
        return labels.defect()
    if len(labels) != layout.size:
        return f"{len(labels)} labels for {layout.size} translates"
    bad = next((x for x in labels if not 1 <= x <= layout.rows), None)
    if bad is not None:
        return f"label {bad} outside 1..{layout.rows}"
    return None


@dataclass(frozen=True)
class BlockFamily:
    """Blocks of every stored level, built from an augmented sequence over a chain"""
    chain: LatticeChain
    seq: ManagedSequence
    alphabet_size: int
    arrangements: Tuple[Tuple[Arrangement, ...], ...]
    patterns: Tuple[Optional[Tuple[Pattern, ...]], ...]
    seed: Optional[int] = None

    @property
    def levels(self) -> int:
        return len(self.chain)

    def block_count(self, n: int) -> int:
        """l_n"""
        if not 0 <= n < self.levels:
            raise LevelRangeError(f"Level {n} outside a family of {self.levels} levels")
        if n == 0:
            return self.alphabet_size
        return len(self.arrangements[n - 1])

    def checked_label(self, n: int, k: int, coset: GroupElement = ()) -> int:
        """k itself when level n has a block k"""
        if not 1 <= k <= self.block_count(n):
            raise ConditionViolationError(f"Level {n} has no block {k}", level=n, block=k, coset=coset)
        return k

    def labels(self, n: int, k: int) -> Arrangement:
        """Arrangement of block k (1-based) at level n >= 1"""
        if not 1 <= n < self.levels:
            raise LevelRangeError(f"Level {n} has no arrangements")
        return self.arrangements[n - 1][self.checked_label(n, k) - 1]

    def materialized(self, n: int) -> bool:
        return self.patterns[n] is not None

    def symbol(self, n: int, k: int, x: GroupElement) -> int:
        """B_{n,k}(x) for x in F_n"""
        x = tuple(x)
        if x not in self.chain.domain(n):
            raise LevelRangeError(f"{x} is outside F_{n}")
        k = self.checked_label(n, k)
        while n > 0:
            if self.patterns[n] is not None:
                return self.patterns[n][k - 1][self.chain.domain(n).index(x)]
            tiling = self.chain.tiling(n - 1)
            gamma, x = tiling.decompose(x)
            k = self.checked_label(n - 1, self.arrangements[n - 1][k - 1][tiling.position(gamma)], gamma)
            n -= 1
        return k


def pattern(family: BlockFamily, n: int, k: int) -> Pattern:
    """B_{n,k} as a tuple indexed like F_n's lexicographic order"""
    stored = family.patterns[n]
    if stored is not None:
        return stored[family.checked_label(n, k) - 1]
    return tuple(family.symbol(n, k, x) for x in family.chain.domain(n).points)


def block_at(family: BlockFamily, m: int, k: int, v: GroupElement, n: int) -> int:
    """Label of the level-n block on the coset v + F_n inside B_{m,k}"""
    chain = family.chain
    v = tuple(v)
    k = family.checked_label(m, k, v)
    while m > n:
        tiling = chain.tiling(m - 1)
        gamma, v = tiling.decompose(v)
        k = family.checked_label(m - 1, family.arrangements[m - 1][k - 1][tiling.position(gamma)], gamma)
        m -= 1
    if any(v):
        raise LevelRangeError(f"Offset {v} is not a level-{n} translate")
    return k


def _point_layout(chain: LatticeChain, n: int) -> Tuple[List[Tuple[int, int]], List[List[int]]]:
    """For F_{n+1}: translate position and F_n index of every point, plus per-translate point indices"""
    tiling = chain.tiling(n)
    fine, coarse = chain.domain(n + 1), chain.domain(n)
    tpos = [0] * fine.size
    upos = [0] * fine.size
    members: List[List[int]] = [[0] * coarse.size for _ in range(tiling.size)]
    for idx, x in enumerate(fine.points):
        gamma, u = tiling.decompose(x)
        t = tiling.position(gamma)
        j = coarse.index(u)
        tpos[idx], upos[idx] = t, j
        members[t][j] = idx
    return list(zip(tpos, upos)), members


def _affine_shuffle(rng: Optional[random.Random], count: int) -> Optional[Tuple[int, int]]:
    if rng is None or count < 2:
        return None
    while True:
        a = rng.randrange(1, count)
        if gcd(a, count) == 1:
            return a, rng.randrange(count)


def _arrange_level(chain: LatticeChain, n: int, m_tilde: Matrix, rng: Optional[random.Random],
                   limit: int) -> Tuple[Arrangement, ...]:
    rows, cols = shape(m_tilde)
    layout = coset_layout(chain, n, rows)
    if layout.zero in layout.border:
        raise FillabilityError(f"Coset 0 lies on the border at level {n + 1}", level=n, column=0)
    b = len(layout.border)
    sparse = layout.size > limit
    if sparse:
        logger.debug("level %d keeps arrangement rules for %d translates", n + 1, layout.size)
        shuffle = _affine_shuffle(rng, layout.free)
    else:
        free = [i for i in range(layout.size) if i != layout.zero and i not in layout.border]
        if rng is not None:
            rng.shuffle(free)
    out: List[Arrangement] = []
    seen: Counter = Counter()
    for k in range(cols):
        col = column(m_tilde, k)
        if col[0] != 1:
            raise FillabilityError(f"Column {k + 1} of level {n} needs exactly one copy of block 1, has {col[0]}",
                                   level=n, column=k + 1)
        if col[-1] < b:
            raise FillabilityError(
                f"Column {k + 1} of level {n} has {col[-1]} last blocks for {b} border cosets",
                level=n, column=k + 1,
            )
        counts = {i + 2: c for i, c in enumerate(col[1:-1])}
        counts[rows] = counts.get(rows, 0) + col[-1] - b
        if sum(counts.values()) != layout.free:
            raise FillabilityError(
                f"Column {k + 1} of level {n} places {sum(counts.values())} blocks on {layout.free} free cosets",
                level=n, column=k + 1,
            )
        if sparse:
            rule = SparseArrangement(tuple(sorted(counts.items())), seen[col], shuffle, layout)
            defect = rule.defect()
            if defect is not None:
                raise MultiplicityError(f"Column {k + 1} of level {n}: {defect}")
            out.append(rule)
        else:
            symbols = colex_arrangement(counts, seen[col])
            labels = [0] * layout.size
            labels[layout.zero] = 1
            for i in layout.border:
                labels[i] = rows
            for i, s in zip(free, symbols):
                labels[i] = s
            out.append(tuple(labels))
        seen[col] += 1
    return tuple(out)


def _materialize(chain: LatticeChain, n: int, lower: Tuple[Pattern, ...],
                 arrangements: Sequence[Arrangement]) -> Tuple[Pattern, ...]:
    layout, _ = _point_layout(chain, n)
    return tuple(tuple(lower[labels[t] - 1][j] for t, j in layout) for labels in arrangements)


def build_blocks(seq: ManagedSequence, chain: LatticeChain, seed: Optional[int] = None,
                 settings: Optional[ForgeSettings] = None) -> BlockFamily:
    """Blocks whose placements follow the augmented matrices exactly"""
    settings = settings or ForgeSettings.load()
    if len(chain) != len(seq.p):
        raise DimensionMismatchError(f"Chain has {len(chain)} levels, sequence has {len(seq.p)}")
    if tuple(chain.indices) != tuple(seq.p):
        raise DimensionMismatchError("Sequence is not managed by the chain's domain sizes")
    if not seq.mats:
        raise DimensionMismatchError("At least one augmented matrix is needed")
    alphabet = len(seq.mats[0])
    rng = random.Random(seed) if seed is not None else None
    arrangements = []
    for n, m in enumerate(seq.mats):
        arrangements.append(_arrange_level(chain, n, m, rng, settings.materialize_limit))
    return assemble_family(chain, seq, alphabet, arrangements, seed, settings)


def _lay_out(chain: LatticeChain, n: int, rows: int, level: Sequence) -> Tuple[Arrangement, ...]:
    """Stored arrangements as tuples, with rules attached to the tiling they are read on"""
    out = [a if isinstance(a, SparseArrangement) else tuple(a) for a in level]
    unplaced = [i for i, a in enumerate(out) if isinstance(a, SparseArrangement) and a.layout is None]
    if unplaced and n + 1 < len(chain) and tiling_defect(chain, n) is None:
        layout = coset_layout(chain, n, rows)
        for i in unplaced:
            out[i] = replace(out[i], layout=layout)
    return tuple(out)


def _level_defect(chain: LatticeChain, n: int, level: Sequence[Arrangement], rows: int) -> Optional[str]:
    if n + 1 >= len(chain):
        return f"the chain has no level {n + 1}"
    defect = tiling_defect(chain, n)
    if defect is not None:
        return defect
    layout = coset_layout(chain, n, rows)
    for k, labels in enumerate(level):
        defect = arrangement_defect(labels, layout)
        if defect is not None:
            return f"block {k + 1}: {defect}"
    return None


def assemble_family(chain: LatticeChain, seq: ManagedSequence, alphabet_size: int,
                    arrangements: Sequence[Sequence[Arrangement]], seed: Optional[int] = None,
                    settings: Optional[ForgeSettings] = None) -> BlockFamily:
    """Family from stored arrangements, materializing patterns below the limit.

    A level whose arrangements do not fit the chain is kept as given and
    left unmaterialized, with every level above it.
    """
    settings = settings or ForgeSettings.load()
    levels: List[Tuple[Arrangement, ...]] = []
    rows = alphabet_size
    for n, level in enumerate(arrangements):
        levels.append(_lay_out(chain, n, rows, level))
        rows = len(levels[-1])
    patterns: List[Optional[Tuple[Pattern, ...]]] = []
    level0 = chain.domain(0)
    if level0.size <= settings.materialize_limit:
        patterns.append(tuple((k,) * level0.size for k in range(1, alphabet_size + 1)))
    else:
        patterns.append(None)
    for n, level in enumerate(levels):
        lower = patterns[-1]
        if lower is None or n + 1 >= len(chain) or chain.domain(n + 1).size > settings.materialize_limit:
            patterns.append(None)
            continue
        defect = _level_defect(chain, n, level, len(lower))
        if defect is not None:
            logger.warning("level %d left unmaterialized: %s", n + 1, defect)
            patterns.append(None)
            continue
        patterns.append(_materialize(chain, n, lower, level))
    patterns = patterns[:len(chain)] + [None] * (len(chain) - len(patterns))
    return BlockFamily(chain, seq, alphabet_size, tuple(levels), tuple(patterns), seed)


def recover_incidence(family: BlockFamily, n: int, check: bool = True) -> Matrix:
    """Count level-n blocks on the translates of each level-(n+1) block"""
    if not 0 <= n < family.levels - 1:
        raise LevelRangeError(f"Incidence needs levels {n} and {n + 1}")
    rows, cols = family.block_count(n), family.block_count(n + 1)
    counts = [[0] * cols for _ in range(rows)]
    tiling = family.chain.tiling(n)
    if family.materialized(n) and family.materialized(n + 1):
        lookup = {p: i for i, p in enumerate(family.patterns[n])}
        _, members = _point_layout(family.chain, n)
        for k, block in enumerate(family.patterns[n + 1]):
            for t, idxs in enumerate(members):
                i = lookup.get(tuple(block[x] for x in idxs))
                if i is None:
                    raise ConditionViolationError(
                        f"Block {k + 1} of level {n + 1} carries an unknown pattern on coset {tiling.translate_at(t)}",
                        level=n + 1, block=k + 1, coset=tiling.translate_at(t),
                    )
                counts[i][k] += 1
    else:
        for k, labels in enumerate(family.arrangements[n]):
            totals = labels.totals() if isinstance(labels, SparseArrangement) else Counter(labels)
            for label, c in totals.items():
                if not 1 <= label <= rows:
                    coset = () if isinstance(labels, SparseArrangement) else tiling.translate_at(labels.index(label))
                    raise ConditionViolationError(
                        f"Block {k + 1} of level {n + 1} uses label {label} on coset {coset}",
                        level=n + 1, block=k + 1, coset=coset,
                    )
                counts[label - 1][k] += c
    matrix = tuple(tuple(row) for row in counts)
    if check and n < len(family.seq.mats) and matrix != family.seq.mats[n]:
        raise ConstructionDefectError(
            f"Recovered incidence of level {n} differs from the augmented matrix at "
            f"{first_difference(matrix, family.seq.mats[n])}"
        )
    return matrix


def _center_out(domain: Domain) -> List[GroupElement]:
    return sorted(domain.points, key=lambda v: (max(abs(x) for x in v), v))


def _c3_exhaustive(domain: Domain, blocks: Sequence[Pattern], level: int) -> Optional[Tuple]:
    """None when no nonzero shift makes one block agree with another on the overlap"""
    ordered = [(v, domain.index(v)) for v in _center_out(domain)]
    pairs = [(a, b) for a in range(len(blocks)) for b in range(len(blocks)) if level > 0 or a != b]
    for g, _ in ordered:
        if not any(g):
            continue
        for a, b in pairs:
            pa, pb = blocks[a], blocks[b]
            for v, iv in ordered:
                w = tuple(x + y for x, y in zip(v, g))
                if w in domain and pa[domain.index(w)] != pb[iv]:
                    break
            else:
                return g, a + 1, b + 1
    return None


def _verify_level(family: BlockFamily, n: int, settings: ForgeSettings) -> Report:
    """Checks linking level n to level n+1, and (C3) at level n+1"""
    report = Report(f"level {n + 1}")
    chain = family.chain
    tiling = chain.tiling(n)
    l_n = family.block_count(n)
    layout = coset_layout(chain, n, l_n)
    level = family.arrangements[n]
    for k, labels in enumerate(level):
        defect = arrangement_defect(labels, layout)
        if defect is not None:
            report.add("C1", False, level=n + 1, location=(k + 1,), detail=defect)
            report.add("incidence", False, level=n, detail="not computable without C1")
            return report
    try:
        incidence = recover_incidence(family, n, check=False)
        report.add("C1", True, level=n + 1)
        expected = family.seq.mats[n]
        diff = first_difference(incidence, expected)
        report.add("incidence", diff is None, level=n,
                   location=None if diff is None else (n,) + diff,
                   detail="" if diff is None else f"recovered {incidence} differs from augmented matrix")
    except ConditionViolationError as e:
        report.add("C1", False, level=e.level, location=(e.block, e.coset), detail=str(e))
        report.add("incidence", False, level=n, detail="not computable without C1")
    materialized = family.materialized(n) and family.materialized(n + 1)
    if materialized:
        _, members = _point_layout(chain, n)
        center = members[layout.zero]
        first = family.patterns[n][0]
        last = family.patterns[n][l_n - 1]
    for k, labels in enumerate(level):
        detail = ""
        if materialized:
            block = family.patterns[n + 1][k]
            c2 = tuple(block[x] for x in center) == first
            c4_bad = next((tiling.translate_at(i) for i in layout.border
                           if tuple(block[x] for x in members[i]) != last), None)
        elif isinstance(labels, SparseArrangement):
            c2 = labels[layout.zero] == 1
            c4_bad = None
            detail = "structural: border cosets follow the tiling's layout"
        else:
            c2 = labels[layout.zero] == 1
            c4_bad = next((tiling.translate_at(i) for i in layout.border if labels[i] != l_n), None)
        report.add("C2", c2, level=n + 1, location=(k + 1,))
        report.add("C4", c4_bad is None, level=n + 1,
                   location=(k + 1,) if c4_bad is None else (k + 1, c4_bad), detail=detail)
    blocks = family.patterns[n + 1] if materialized else level
    distinct = len(set(blocks)) == len(blocks)
    report.add("distinct", distinct, level=n + 1,
               detail="" if distinct else "two blocks coincide")
    report.extend(_verify_c3(family, n + 1, settings))
    return report


def _verify_c3(family: BlockFamily, n: int, settings: ForgeSettings) -> Report:
    report = Report(f"C3 level {n}")
    domain = family.chain.domain(n)
    if family.materialized(n) and domain.size <= settings.exhaustive_limit:
        witness = _c3_exhaustive(domain, family.patterns[n], n)
        report.add("C3", witness is None, level=n, location=witness, detail="exhaustive")
        return report
    if n == 0:
        report.add("C3", True, level=0, detail="structural: distinct constant blocks")
        return report
    zero = tuple(0 for _ in range(family.chain.dim))
    zero_pos = family.chain.tiling(n - 1).position(zero)
    bad = next((k + 1 for k, labels in enumerate(family.arrangements[n - 1])
                if labels.count(1) != 1 or labels[zero_pos] != 1), None)
    report.add("C3", bad is None, level=n, location=None if bad is None else (bad,),
               detail="structural: coset 0 is the only coset carrying block 1")
    return report


def verify_conditions(family: BlockFamily, settings: Optional[ForgeSettings] = None) -> Report:
    """(C1)-(C4), incidence and distinctness at every stored level"""
    settings = settings or ForgeSettings.load()
    report = Report("block conditions")
    if len(family.arrangements) != family.levels - 1:
        report.add("levels", False, detail=f"{len(family.arrangements)} arrangement levels "
                                           f"for a chain of {family.levels}")
        return report
    level0 = family.patterns[0]
    if level0 is not None:
        report.add("distinct", len(set(level0)) == len(level0), level=0)
        report.extend(_verify_c3(family, 0, settings))
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        results = list(pool.map(lambda n: _verify_level(family, n, settings), range(family.levels - 1)))
    for sub in results:
        report.extend(sub)
    return report


def evaluate_x0(family: BlockFamily, window: Iterable[GroupElement]) -> Dict[GroupElement, int]:
    """x0 on a window, read from the smallest level containing each point"""
    chain = family.chain
    out: Dict[GroupElement, int] = {}
    for g in window:
        g = tuple(g)
        level = next((n for n in range(family.levels) if g in chain.domain(n)), None)
        if level is None:
            raise NeedsMoreLevelsError(f"Point {g} lies outside every stored level",
                                       condition="window", level=family.levels - 1)
        value = family.symbol(level, 1, g)
        if level + 1 < family.levels and family.symbol(level + 1, 1, g) != value:
            raise ConstructionDefectError(f"x0({g}) depends on the level used to read it")
        out[g] = value
    return out


def _lattice_points(domain: Domain, moduli: Sequence[int], offset: GroupElement) -> Iterator[GroupElement]:
    """Points x of the domain with x - offset in the lattice"""
    if domain.is_box:
        ranges = []
        for lo, s, q, o in zip(domain.lower, domain.shape, moduli, offset):
            first = o + -(-(lo - o) // q) * q
            ranges.append(range(first, lo + s, q))
        return itertools.product(*ranges)
    return (x for x in domain.points if all((a - o) % q == 0 for a, o, q in zip(x, offset, moduli)))


class PeriodScan(NamedTuple):
    report: Report
    return_times: FrozenSet[GroupElement]


def scan_periods(family: BlockFamily, n: int, m: int) -> PeriodScan:
    """F_{n-1} inside Per(x0, Gamma_n) and the return times of level-n blocks, on F_m"""
    if not 0 <= n < m < family.levels:
        raise LevelRangeError(f"Need 0 <= n < m < {family.levels}, got n={n}, m={m}")
    chain = family.chain
    report = Report(f"periods level {n} on F_{m}")
    window = chain.domain(m)
    x0 = pattern(family, m, 1)
    moduli = chain.lattice(n).moduli
    if n == 0:
        report.add("period", True, level=n, detail="vacuous: F_-1 is empty")
    else:
        for g in chain.domain(n - 1):
            ref = x0[window.index(g)]
            bad = next((x for x in _lattice_points(window, moduli, g) if x0[window.index(x)] != ref), None)
            report.add("period", bad is None, level=n, location=(g,) if bad is None else (g, bad))
    inner = chain.domain(n)
    known = set(family.patterns[n]) if family.materialized(n) else {pattern(family, n, k)
                                                                   for k in range(1, family.block_count(n) + 1)}
    times = set()
    expected = set()
    boxes = inner.is_box and window.is_box
    offsets = _box_offsets(inner, window) if boxes else []
    corners = _corners(inner)
    zero = tuple(0 for _ in range(chain.dim))
    anchors = {pat[inner.index(zero)] for pat in known}
    lattice = chain.lattice(n)
    for gamma in window:
        if not all(tuple(a + b for a, b in zip(gamma, u)) in window for u in corners):
            continue
        if gamma in lattice:
            expected.add(gamma)
        # every known block takes one of the anchor values at 0
        if x0[window.index(gamma)] not in anchors:
            continue
        if boxes:
            base = window.index(tuple(a + b for a, b in zip(gamma, inner.lower)))
            restriction = tuple(x0[base + o] for o in offsets)
        else:
            restriction = tuple(x0[window.index(tuple(a + b for a, b in zip(gamma, u)))] for u in inner.points)
        if restriction in known:
            times.add(gamma)
    if n == 0:
        # constant blocks recur wherever two neighbouring cosets share a label
        logger.debug("level 0: %d return times recorded, not compared with the lattice", len(times))
        return PeriodScan(report, frozenset(times))
    ok = times == expected
    extra = sorted(times - expected)[:1] or sorted(expected - times)[:1]
    report.add("return-times", ok, level=n, location=None if ok else (extra[0],),
               detail=f"{len(times)} return times, {len(expected)} lattice translates")
    return PeriodScan(report, frozenset(times))


def _corners(domain: Domain) -> List[GroupElement]:
    if domain.is_box:
        return list(itertools.product(*((lo, hi) for lo, hi in zip(domain.lower, domain.upper))))
    return list(domain.points)


def _box_offsets(inner: Domain, outer: Domain) -> List[int]:
    """Index offsets in ``outer`` of the points of ``inner`` relative to its lowest corner"""
    strides = []
    acc = 1
    for s in reversed(outer.shape):
        strides.append(acc)
        acc *= s
    strides.reverse()
    return [sum((x - lo) * st for x, lo, st in zip(u, inner.lower, strides)) for u in inner.points]


class OdometerPoint(NamedTuple):
    coordinates: Tuple[GroupElement, ...]
    report: Report


def odometer_embed(family: BlockFamily, g: GroupElement, depth: int) -> OdometerPoint:
    """Coset representatives of g at levels 0..depth with compatibility and block certificates"""
    chain = family.chain
    if not 0 <= depth < family.levels:
        raise LevelRangeError(f"Depth {depth} outside a family of {family.levels} levels")
    g = tuple(g)
    coords = tuple(coset_representative(g, chain, n) for n in range(depth + 1))
    report = Report(f"odometer coordinates of {g}")
    for n in range(depth):
        diff = tuple(b - a for a, b in zip(coords[n], coords[n + 1]))
        report.add("compatible", diff in chain.lattice(n), level=n, location=(coords[n], coords[n + 1]))
    top = family.levels - 1
    window = chain.domain(top)
    if g not in window:
        logger.debug("%s lies outside F_%d; block certificates skipped", g, top)
        return OdometerPoint(coords, report)
    x0 = pattern(family, top, 1)
    for n in range(depth + 1):
        shift = tuple(a - b for a, b in zip(g, coords[n]))
        restriction = tuple(x0[window.index(tuple(a + b for a, b in zip(shift, u)))]
                            for u in chain.domain(n).points)
        known = {pattern(family, n, k) for k in range(1, family.block_count(n) + 1)}
        report.add("block", restriction in known, level=n, location=(shift,))
    return OdometerPoint(coords, report)
