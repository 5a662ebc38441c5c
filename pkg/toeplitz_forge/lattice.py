"""Diagonal lattices of Z^d, centered fundamental domains and Følner chains.

Group elements are plain tuples of ints. A :class:`Domain` is either a box
(product of integer intervals) or an explicit frozenset of points; boxes
keep closed-form cardinality, membership and border arithmetic so chains can
grow far past what could be enumerated. Refining a box chain with canonical
boxes always yields boxes.
"""

import itertools
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import prod
from typing import Dict, FrozenSet, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import (
    InternalConsistencyError,
    InvalidModulusError,
    LevelRangeError,
    RefinementError,
)
from .reports import Report

logger = logging.getLogger(__name__)

GroupElement = Tuple[int, ...]
Moduli = Tuple[int, ...]


def _add(a: GroupElement, b: GroupElement) -> GroupElement:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: GroupElement, b: GroupElement) -> GroupElement:
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True)
class Lattice:
    """The diagonal lattice q_1 Z x ... x q_d Z"""
    moduli: Moduli

    def __post_init__(self):
        for q in self.moduli:
            if not isinstance(q, int) or q < 1:
                raise InvalidModulusError(f"Modulus must be a positive integer, got {q!r}")

    @property
    def dim(self) -> int:
        return len(self.moduli)

    @property
    def index(self) -> int:
        return prod(self.moduli)

    def __contains__(self, g: GroupElement) -> bool:
        return all(x % q == 0 for x, q in zip(g, self.moduli))

    def refines(self, coarser: "Lattice") -> bool:
        """True when this lattice is contained in ``coarser``"""
        return all(q % c == 0 for q, c in zip(self.moduli, coarser.moduli))

    def residue(self, g: GroupElement) -> Tuple[int, ...]:
        return tuple(x % q for x, q in zip(g, self.moduli))


@dataclass(frozen=True)
class Domain:
    """Finite subset of Z^d.

    Box domains carry ``lower`` and ``shape``; explicit domains carry
    ``explicit``. Iteration is always in lexicographic order.
    """
    dim: int
    lower: Optional[GroupElement] = None
    shape: Optional[Tuple[int, ...]] = None
    explicit: Optional[FrozenSet[GroupElement]] = None

    @classmethod
    def box(cls, lower: Sequence[int], shape: Sequence[int]) -> "Domain":
        return cls(dim=len(shape), lower=tuple(lower), shape=tuple(shape))

    @classmethod
    def from_elements(cls, elements: Iterable[Sequence[int]], dim: Optional[int] = None) -> "Domain":
        points = frozenset(tuple(int(x) for x in e) for e in elements)
        if dim is None:
            if not points:
                raise ValueError("Cannot infer the dimension of an empty domain")
            dim = len(next(iter(points)))
        return cls(dim=dim, explicit=points)

    @property
    def is_box(self) -> bool:
        return self.shape is not None

    @property
    def upper(self) -> GroupElement:
        return tuple(lo + s - 1 for lo, s in zip(self.lower, self.shape))

    @property
    def size(self) -> int:
        """Cardinality; unlike len() it is not bounded by sys.maxsize"""
        if self.is_box:
            return prod(self.shape)
        return len(self.explicit)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, g: GroupElement) -> bool:
        if self.is_box:
            return all(lo <= x < lo + s for x, lo, s in zip(g, self.lower, self.shape))
        return tuple(g) in self.explicit

    def __iter__(self) -> Iterator[GroupElement]:
        if self.is_box:
            return itertools.product(*(range(lo, lo + s) for lo, s in zip(self.lower, self.shape)))
        return iter(self.points)

    @cached_property
    def points(self) -> Tuple[GroupElement, ...]:
        """All elements in lexicographic order"""
        if self.is_box:
            return tuple(iter(self))
        return tuple(sorted(self.explicit))

    @cached_property
    def elements(self) -> FrozenSet[GroupElement]:
        if self.explicit is not None:
            return self.explicit
        return frozenset(self.points)

    @cached_property
    def _positions(self) -> Dict[GroupElement, int]:
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def _strides(self) -> Tuple[int, ...]:
        strides = []
        acc = 1
        for s in reversed(self.shape):
            strides.append(acc)
            acc *= s
        return tuple(reversed(strides))

    def index(self, g: GroupElement) -> int:
        """Position of ``g`` in lexicographic order"""
        if self.is_box:
            return sum((x - lo) * st for x, lo, st in zip(g, self.lower, self._strides))
        return self._positions[tuple(g)]

    def translate(self, g: GroupElement) -> "Domain":
        if self.is_box:
            return Domain.box(_add(self.lower, g), self.shape)
        return Domain(dim=self.dim, explicit=frozenset(_add(p, g) for p in self.explicit))

    def issubset(self, other: "Domain") -> bool:
        if self.is_box and other.is_box:
            if self.size == 0:
                return True
            return all(
                olo <= lo and lo + s <= olo + os
                for lo, s, olo, os in zip(self.lower, self.shape, other.lower, other.shape)
            )
        return all(p in other for p in self)


def canonical_domain(q: Sequence[int]) -> Domain:
    """Centered box fundamental domain of Z^d / (q_1 Z x ... x q_d Z)"""
    q = tuple(q)
    for qi in q:
        if not isinstance(qi, int) or qi < 1:
            raise InvalidModulusError(f"Modulus must be a positive integer, got {qi!r}")
    return Domain.box(tuple(-((qi - 1) // 2) for qi in q), q)


@dataclass(frozen=True)
class ChainLevel:
    lattice: Lattice
    domain: Domain

    @property
    def moduli(self) -> Moduli:
        return self.lattice.moduli

    @cached_property
    def _residue_table(self) -> Dict[Tuple[int, ...], GroupElement]:
        return {self.lattice.residue(u): u for u in self.domain}

    def representative(self, g: GroupElement) -> GroupElement:
        """The unique u in the domain with g - u in the lattice"""
        if self.domain.is_box:
            return tuple(
                lo + (x - lo) % q for x, lo, q in zip(g, self.domain.lower, self.lattice.moduli)
            )
        try:
            return self._residue_table[self.lattice.residue(g)]
        except KeyError:
            raise InternalConsistencyError(
                f"Domain misses the residue class of {g}; it is not a fundamental domain"
            ) from None


def _count_below(r: range, x: int) -> int:
    """Elements of an increasing range that are smaller than x"""
    return len(range(r.start, min(x, r.stop), r.step))


@dataclass(frozen=True)
class GridRing:
    """Positions of a translate grid lying outside an inner sub-grid.

    Positions number the grid lexicographically; the inner sub-grid spans
    ``inner_lo[i] <= c_i < inner_hi[i]`` on every axis.
    """
    grid: Tuple[int, ...]
    inner_lo: Tuple[int, ...]
    inner_hi: Tuple[int, ...]

    @property
    def total(self) -> int:
        return prod(self.grid)

    @property
    def size(self) -> int:
        return self.total - prod(hi - lo for lo, hi in zip(self.inner_lo, self.inner_hi))

    def __len__(self) -> int:
        return self.size

    def _digits(self, i: int) -> List[int]:
        digits = []
        for g in reversed(self.grid):
            i, c = divmod(i, g)
            digits.append(c)
        return digits[::-1]

    def __contains__(self, i: int) -> bool:
        if not 0 <= i < self.total:
            return False
        return not all(lo <= c < hi for c, lo, hi in zip(self._digits(i), self.inner_lo, self.inner_hi))

    def rank(self, i: int) -> int:
        """Ring positions smaller than i"""
        inner = 0
        widths = [hi - lo for lo, hi in zip(self.inner_lo, self.inner_hi)]
        for axis, c in enumerate(self._digits(i)):
            lo, hi = self.inner_lo[axis], self.inner_hi[axis]
            inner += min(max(c - lo, 0), hi - lo) * prod(widths[axis + 1:])
            if not lo <= c < hi:
                break
        return i - inner

    def __iter__(self) -> Iterator[int]:
        return (i for i in range(self.total) if i in self)


@dataclass(frozen=True)
class SortedPositions:
    """An explicit set of translate positions"""
    positions: Tuple[int, ...]

    @cached_property
    def _members(self) -> FrozenSet[int]:
        return frozenset(self.positions)

    @property
    def size(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __contains__(self, i: int) -> bool:
        return i in self._members

    def rank(self, i: int) -> int:
        return bisect_left(self.positions, i)

    def __iter__(self) -> Iterator[int]:
        return iter(self.positions)


Positions = Union[GridRing, SortedPositions]


@dataclass(frozen=True)
class Tiling:
    """Certificate that F_{n+1} is the disjoint union of v + F_n over the translates.

    Box levels number their translates arithmetically; only explicit
    domains list them.
    """
    level: int
    coarse: ChainLevel
    fine: ChainLevel

    @cached_property
    def _axes(self) -> Optional[Tuple[range, ...]]:
        fine = self.fine.domain
        if not fine.is_box:
            return None
        return tuple(_lattice_range(lo, hi, q) for lo, hi, q in zip(fine.lower, fine.upper, self.coarse.moduli))

    @cached_property
    def translates(self) -> Tuple[GroupElement, ...]:
        """Every translate in lexicographic order, listed on first use"""
        if self._axes is not None:
            return tuple(itertools.product(*self._axes))
        return tuple(sorted(_translates(self.coarse, self.fine.domain)))

    @cached_property
    def _positions(self) -> Dict[GroupElement, int]:
        return {t: i for i, t in enumerate(self.translates)}

    @property
    def size(self) -> int:
        if self._axes is not None:
            return prod(len(r) for r in self._axes)
        return len(self.translates)

    def __len__(self) -> int:
        return self.size

    def position(self, gamma: GroupElement) -> int:
        """Index of a translate in lexicographic order"""
        if self._axes is None:
            try:
                return self._positions[tuple(gamma)]
            except KeyError:
                raise InternalConsistencyError(f"{gamma} is not a translate at level {self.level}") from None
        index = 0
        for x, r in zip(gamma, self._axes):
            if x not in r:
                raise InternalConsistencyError(f"{gamma} is not a translate at level {self.level}")
            index = index * len(r) + (x - r.start) // r.step
        return index

    def translate_at(self, i: int) -> GroupElement:
        if self._axes is None:
            return self.translates[i]
        coords = []
        for r in reversed(self._axes):
            i, c = divmod(i, len(r))
            coords.append(r[c])
        return tuple(reversed(coords))

    def positions(self, region: "BorderRegion") -> Positions:
        """Positions of the translates in a border region of F_{n+1}"""
        if isinstance(region, Shell) and self._axes is not None:
            lo = tuple(_count_below(r, a) for r, a in zip(self._axes, region.inner_lower))
            hi = tuple(max(l, _count_below(r, b + 1)) for r, l, b in zip(self._axes, lo, region.inner_upper))
            return GridRing(tuple(len(r) for r in self._axes), lo, hi)
        return SortedPositions(tuple(sorted(self.position(t) for t in region)))

    def decompose(self, v: GroupElement) -> Tuple[GroupElement, GroupElement]:
        """Split v in F_{n+1} as (gamma, u) with gamma a translate and u in F_n"""
        u = self.coarse.representative(v)
        gamma = _sub(v, u)
        if gamma not in self.fine.domain:
            raise InternalConsistencyError(f"Translate {gamma} of {v} escapes level {self.level + 1}")
        return gamma, u


@dataclass(frozen=True)
class LatticeChain:
    """Nested diagonal lattices with nested fundamental domains"""
    levels: Tuple[ChainLevel, ...]
    _tilings: Dict[int, Tiling] = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def dim(self) -> int:
        return self.levels[0].lattice.dim

    def __len__(self) -> int:
        return len(self.levels)

    def level(self, n: int) -> ChainLevel:
        if not 0 <= n < len(self.levels):
            raise LevelRangeError(f"Level {n} outside chain of {len(self.levels)} levels")
        return self.levels[n]

    def domain(self, n: int) -> Domain:
        return self.level(n).domain

    def lattice(self, n: int) -> Lattice:
        return self.level(n).lattice

    @property
    def indices(self) -> Tuple[int, ...]:
        """|F_n| for every level"""
        return tuple(lv.lattice.index for lv in self.levels)

    def ratio(self, n: int) -> int:
        return self.lattice(n + 1).index // self.lattice(n).index

    def tiling(self, n: int) -> Tiling:
        """Tiling certificate between levels n and n+1, computed on first use"""
        if n in self._tilings:
            return self._tilings[n]
        cert = Tiling(n, self.level(n), self.level(n + 1))
        self._tilings[n] = cert
        return cert

    def translates(self, n: int) -> Tuple[GroupElement, ...]:
        return self.tiling(n).translates

    def restrict(self, indices: Sequence[int]) -> "LatticeChain":
        """Sub-chain keeping the listed levels (tilings recomputed between kept levels)"""
        if list(indices) != sorted(set(indices)):
            raise ValueError(f"Indices must be strictly increasing, got {list(indices)}")
        return LatticeChain(tuple(self.level(i) for i in indices))

    def extend(self, count: int, ratio: int) -> "LatticeChain":
        """Append ``count`` levels refining every coordinate by ``ratio``"""
        chain = self
        for _ in range(count):
            top = chain.levels[-1].moduli
            chain = refine_chain(chain, tuple(q * ratio for q in top))
        return chain


def _translates(coarse: ChainLevel, fine_domain: Domain) -> Iterator[GroupElement]:
    """Elements of F_fine that lie in the coarse lattice"""
    if fine_domain.is_box:
        ranges = []
        for lo, s, q in zip(fine_domain.lower, fine_domain.shape, coarse.moduli):
            first = -(-lo // q) * q
            ranges.append(range(first, lo + s, q))
        return itertools.product(*ranges)
    return (v for v in fine_domain.points if v in coarse.lattice)


def _lattice_range(lo: int, hi: int, q: int) -> range:
    first = -(-lo // q) * q
    return range(first, hi + 1, q)


def refine_chain(chain: LatticeChain, q_next: Sequence[int]) -> LatticeChain:
    """Append the level with lattice prod q_next Z and domain union of (v + F_top)"""
    q_next = tuple(q_next)
    top = chain.levels[-1]
    new_lattice = Lattice(q_next)
    if len(q_next) != top.lattice.dim:
        raise RefinementError(f"Moduli {q_next} do not match dimension {top.lattice.dim}")
    if not new_lattice.refines(top.lattice):
        raise RefinementError(
            f"Moduli {q_next} are not componentwise multiples of the top moduli {top.moduli}"
        )
    if new_lattice.index <= top.lattice.index:
        raise RefinementError(f"Moduli {q_next} do not give a strictly finer lattice than {top.moduli}")
    outer = canonical_domain(q_next)
    translates = Tiling(len(chain) - 1, top, ChainLevel(new_lattice, outer))
    if translates.size * top.domain.size != new_lattice.index:
        raise InternalConsistencyError(
            f"Canonical box for {q_next} holds {translates.size} translates, expected "
            f"{new_lattice.index // top.domain.size}"
        )
    if top.domain.is_box:
        lower, shape = [], []
        for i, (lo, s, q) in enumerate(zip(top.domain.lower, top.domain.shape, top.moduli)):
            multiples = _lattice_range(outer.lower[i], outer.upper[i], q)
            if s != q or len(multiples) * q != q_next[i]:
                raise InternalConsistencyError(f"Coordinate {i} of the refinement does not tile")
            lower.append(multiples[0] + lo)
            shape.append(q_next[i])
        domain = Domain.box(lower, shape)
    else:
        union = set()
        for v in translates.translates:
            for u in top.domain.points:
                union.add(_add(v, u))
        if len(union) != new_lattice.index:
            raise InternalConsistencyError(
                f"Translates of F_{len(chain) - 1} overlap: union has {len(union)} elements, "
                f"expected {new_lattice.index}"
            )
        domain = Domain(dim=top.lattice.dim, explicit=frozenset(union))
    logger.debug("refined chain to moduli %s (|F|=%d)", q_next, domain.size)
    return LatticeChain(chain.levels + (ChainLevel(new_lattice, domain),))


def chain_from_moduli(moduli: Sequence[Sequence[int]]) -> LatticeChain:
    """Chain starting at the canonical domain of the first moduli, refined by the rest"""
    if not moduli:
        raise ValueError("At least one level of moduli is required")
    first = tuple(moduli[0])
    chain = LatticeChain((ChainLevel(Lattice(first), canonical_domain(first)),))
    for q in moduli[1:]:
        chain = refine_chain(chain, q)
    return chain


def chain_from_domains(moduli: Sequence[Sequence[int]], domains: Sequence[Iterable[Sequence[int]]]) -> LatticeChain:
    """Chain with caller-supplied explicit domains (no refinement rule applied)"""
    if len(moduli) != len(domains):
        raise ValueError("One domain per level is required")
    levels = []
    for q, elems in zip(moduli, domains):
        lattice = Lattice(tuple(q))
        levels.append(ChainLevel(lattice, Domain.from_elements(elems, dim=lattice.dim)))
    return LatticeChain(tuple(levels))


def default_chain(d: int, levels: int, ratio: int = 3) -> LatticeChain:
    """F_0 = {0} refined ``levels - 1`` times by ``ratio`` in every coordinate"""
    if d < 1:
        raise ValueError(f"Group dimension must be at least 1, got {d}")
    chain = chain_from_moduli([(1,) * d])
    return chain.extend(levels - 1, ratio)


def folner_defect(F: Domain, g: GroupElement) -> Fraction:
    """|(F + g) symmetric-difference F| / |F|, exactly"""
    n = F.size
    if F.is_box:
        overlap = prod(max(0, s - abs(x)) for s, x in zip(F.shape, g))
    else:
        overlap = sum(1 for p in F.elements if _add(p, g) in F.elements)
    return Fraction(2 * (n - overlap), n)


class Shell:
    """Points of an outer box lying outside an inner box, optionally on a lattice"""

    def __init__(self, outer: Domain, inner_lower: GroupElement, inner_upper: GroupElement,
                 lattice: Optional[Lattice] = None):
        self.outer = outer
        self.inner_lower = inner_lower
        self.inner_upper = inner_upper
        self.lattice = lattice

    def _count(self, i: int, inner: bool) -> int:
        lo, hi = self.outer.lower[i], self.outer.upper[i]
        if inner:
            lo, hi = max(lo, self.inner_lower[i]), min(hi, self.inner_upper[i])
        if hi < lo:
            return 0
        if self.lattice is None:
            return hi - lo + 1
        q = self.lattice.moduli[i]
        return hi // q - (lo - 1) // q

    @property
    def size(self) -> int:
        dim = self.outer.dim
        total = prod(self._count(i, False) for i in range(dim))
        inner = prod(self._count(i, True) for i in range(dim))
        return total - inner

    def __len__(self) -> int:
        return self.size

    def _in_inner(self, g: GroupElement) -> bool:
        return all(lo <= x <= hi for x, lo, hi in zip(g, self.inner_lower, self.inner_upper))

    def __contains__(self, g: GroupElement) -> bool:
        if g not in self.outer or self._in_inner(g):
            return False
        return self.lattice is None or g in self.lattice


BorderRegion = Union[Shell, FrozenSet[GroupElement]]


class Border(NamedTuple):
    """R_n, the full border of F_{n+1}, the border cosets, and whether R_n sits in F_{n+1}"""
    differences: Domain
    full: BorderRegion
    coset: BorderRegion
    contained: bool


def difference_set(F: Domain) -> Domain:
    """F - F"""
    if F.is_box:
        return Domain.box(tuple(-(s - 1) for s in F.shape), tuple(2 * s - 1 for s in F.shape))
    pts = F.points
    return Domain.from_elements({_sub(a, b) for a in pts for b in pts}, dim=F.dim)


def border_between(chain: LatticeChain, n: int, m: int) -> Border:
    """Border data of F_m relative to R_n, for any pair n < m"""
    lower, upper = chain.level(n), chain.level(m)
    R = difference_set(lower.domain)
    F = upper.domain
    contained = R.issubset(F)
    if R.is_box and F.is_box:
        w = R.upper
        inner_lo = tuple(lo + wi for lo, wi in zip(F.lower, w))
        inner_hi = tuple(hi - wi for hi, wi in zip(F.upper, w))
        full = Shell(F, inner_lo, inner_hi)
        coset = Shell(F, inner_lo, inner_hi, lower.lattice)
        return Border(R, full, coset, contained)
    full_set = set()
    for x in F:
        for g in R:
            if _add(x, g) not in F:
                full_set.add(x)
                break
    coset_set = frozenset(x for x in full_set if x in lower.lattice)
    return Border(R, frozenset(full_set), coset_set, contained)


def border_set(chain: LatticeChain, n: int) -> Border:
    """Border data between levels n and n+1"""
    if not 0 <= n < len(chain) - 1:
        raise LevelRangeError(f"Border needs levels {n} and {n + 1}; chain has {len(chain)}")
    return border_between(chain, n, n + 1)


def boundary_sum(chain: LatticeChain, n: int, m: int) -> int:
    """Sum over g in R_n of |F_m minus (F_m - g)|"""
    R = difference_set(chain.domain(n))
    F = chain.domain(m)
    if R.is_box and F.is_box:
        size = F.size
        overlap_total = 1
        for s, w in zip(F.shape, R.upper):
            # sum over |t| <= w of max(0, s - |t|)
            w = min(w, s - 1)
            overlap_total *= s * (2 * w + 1) - w * (w + 1)
        return R.size * size - overlap_total
    total = 0
    for g in R:
        total += sum(1 for x in F if _sub(x, g) not in F)
    return total


def coset_representative(g: GroupElement, chain: LatticeChain, n: int) -> GroupElement:
    """Unique u in F_n with g - u in Gamma_n"""
    return chain.level(n).representative(tuple(g))


def _is_fundamental(level: ChainLevel) -> bool:
    if level.domain.size != level.lattice.index:
        return False
    if level.domain.is_box:
        return tuple(level.domain.shape) == tuple(level.lattice.moduli)
    residues = {level.lattice.residue(u) for u in level.domain}
    return len(residues) == level.lattice.index


def _tiling_failure(chain: LatticeChain, j: int, i: int) -> Optional[Tuple[str, GroupElement]]:
    """None when F_j is the disjoint union of v + F_i over v in F_j cap Gamma_i"""
    Fi, Fj = chain.domain(i), chain.domain(j)
    Gi = chain.lattice(i)
    if Fi.is_box and Fj.is_box:
        for axis in range(chain.dim):
            q = Gi.moduli[axis]
            mult = _lattice_range(Fj.lower[axis], Fj.upper[axis], q)
            if Fi.shape[axis] != q or not mult:
                return "misaligned", tuple(0 for _ in range(chain.dim))
            if mult[0] + Fi.lower[axis] != Fj.lower[axis] or mult[-1] + Fi.upper[axis] != Fj.upper[axis]:
                v = [0] * chain.dim
                v[axis] = mult[0] if mult[0] + Fi.lower[axis] != Fj.lower[axis] else mult[-1]
                return "misaligned", tuple(v)
        return None
    covered = set()
    for v in Fj:
        if v not in Gi:
            continue
        for u in Fi:
            x = _add(v, u)
            if x not in Fj:
                return "escapes", v
            if x in covered:
                return "overlaps", v
            covered.add(x)
    if len(covered) != Fj.size:
        missing = min(set(Fj) - covered)
        return "uncovered", missing
    return None


def tiling_defect(chain: LatticeChain, n: int) -> Optional[str]:
    """Why F_n does not tile F_{n+1}, or None when it does"""
    zero = tuple(0 for _ in range(chain.dim))
    for m in (n, n + 1):
        if not _is_fundamental(chain.level(m)):
            return f"F_{m} is not a fundamental domain of its lattice"
        if zero not in chain.domain(m):
            return f"F_{m} misses the identity"
    failure = _tiling_failure(chain, n + 1, n)
    if failure is not None:
        kind, v = failure
        return f"translates of F_{n} are {kind} in F_{n + 1} at {v}"
    return None


def verify_chain(chain: LatticeChain, generators: Optional[Sequence[GroupElement]] = None,
                 window: Optional[Iterable[GroupElement]] = None) -> Report:
    """Check (F1) and (F3) at every level, F2 on a window, and tabulate Følner defects"""
    report = Report("lattice chain")
    zero = tuple(0 for _ in range(chain.dim))
    for n, level in enumerate(chain.levels):
        ok = zero in level.domain and _is_fundamental(level)
        detail = "" if ok else "identity missing or not a fundamental domain"
        if ok and n + 1 < len(chain):
            nxt = chain.levels[n + 1]
            if not (nxt.lattice.refines(level.lattice) and nxt.lattice.index > level.lattice.index):
                ok, detail = False, "lattice not strictly refined"
            elif not level.domain.issubset(nxt.domain):
                ok, detail = False, f"F_{n} not contained in F_{n + 1}"
        report.add("F1", ok, level=n, detail=detail)
    for j in range(1, len(chain)):
        for i in range(j):
            failure = _tiling_failure(chain, j, i)
            if failure is None:
                report.add("F3", True, level=j, location=(j, i))
            else:
                kind, v = failure
                report.add("F3", False, level=j, location=(j, i, v), detail=kind)
    if len(chain) > 1:
        first, last = chain.levels[0].moduli, chain.levels[-1].moduli
        growing = all(b > a for a, b in zip(first, last))
        report.add("moduli-growth", growing, detail="moduli must grow in every coordinate")
    if window is not None:
        top = chain.levels[-1].domain
        for g in window:
            g = tuple(g)
            if g not in top:
                report.add("F2", False, location=(g,), detail="point outside every stored level")
                break
        else:
            report.add("F2", True, detail="window exhausted by stored levels")
    if generators:
        table: List[List[Fraction]] = []
        for g in generators:
            table.append([folner_defect(lv.domain, tuple(g)) for lv in chain.levels])
        report.data["folner"] = table
    return report


def region_size(region: BorderRegion) -> int:
    """Cardinality of a border region, closed-form when available"""
    size = getattr(region, "size", None)
    return size if size is not None else len(region)
