"""End-to-end drivers.

``realize_simplex`` builds a Toeplitz Z^d subshift whose invariant measures
approximate a target simplex, ``z_to_zd`` carries a managed Z presentation
to a Z^d system with the same ordered group, and ``worked_example`` rebuilds
the four-blocks-per-level example on Z and Z^2. Every driver returns a
:class:`SystemBundle` whose reports are recomputed by ``verify_bundle``.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import factorint

from .blocks import BlockFamily, build_blocks, recover_incidence, scan_periods, verify_conditions
from .choquet import (
    FINITE,
    SimplexSpec,
    approximation_errors,
    dominance_report,
    finite_diagnostics,
    finite_simplex_sequence,
    stochastic_to_managed,
)
from .config import ForgeSettings
from .errors import (
    FactorizationError,
    FillabilityError,
    ForgeError,
    InputInvalidError,
    NeedsMoreLevelsError,
)
from .invariants import (
    Witness,
    affine_rank,
    empirical_frequencies,
    ordered_group_witness,
    simplex_vertices,
    vertex_spread,
)
from .lattice import (
    LatticeChain,
    border_set,
    chain_from_moduli,
    default_chain,
    region_size,
    verify_chain,
)
from .matrices import (
    THEOREM_A,
    THEOREM_B,
    ManagedSequence,
    Matrix,
    augment_sequence,
    check_fillability,
    first_difference,
    kr_column_bound,
    matvec,
    product,
    select_indices,
    split_matrix,
    telescope,
    transpose,
    verify_managed,
    verify_selection,
)
from .reports import Check, Report

logger = logging.getLogger(__name__)

REALIZE = "realize-simplex"
Z_TO_ZD = "z-to-zd"
EXAMPLE = "example"
KINDS = (REALIZE, Z_TO_ZD, EXAMPLE)

_SELECTION = {REALIZE: THEOREM_A, Z_TO_ZD: THEOREM_B}


@dataclass
class SystemBundle:
    """A built system together with everything needed to re-verify it"""
    kind: str
    chain: LatticeChain
    managed: ManagedSequence
    augmented: ManagedSequence
    blocks: BlockFamily
    reports: Dict[str, Report] = field(default_factory=dict)
    witness: Optional[Witness] = None
    spec: Optional[SimplexSpec] = None
    approximant: Optional[ManagedSequence] = None
    source: Optional[ManagedSequence] = None
    source_indices: Tuple[int, ...] = ()
    seed: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.chain.dim

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports.values())

    def failures(self) -> List[Tuple[str, Check]]:
        return [(key, c) for key, r in self.reports.items() for c in r.failures()]


def _fillability(augmented: ManagedSequence, chain: LatticeChain) -> Report:
    report = Report("fillability")
    for n, m in enumerate(augmented.mats):
        border = region_size(border_set(chain, n).coset)
        report.extend(check_fillability(m, border, level=n))
    return report


def _augmentation_report(managed: ManagedSequence, augmented: ManagedSequence) -> Report:
    report = Report("augmentation")
    try:
        expected = augment_sequence(managed)
    except ForgeError as e:
        report.add("augmented", False, detail=str(e))
        return report
    if len(expected.mats) != len(augmented.mats) or expected.p != augmented.p:
        report.add("augmented", False, detail="stored augmented sequence has a different length or index chain")
        return report
    for n, (a, b) in enumerate(zip(expected.mats, augmented.mats)):
        diff = first_difference(a, b)
        report.add("augmented", diff is None, level=n, location=None if diff is None else (n,) + diff)
    return report


def _vertex_sets_report(managed: ManagedSequence, augmented: ManagedSequence) -> Report:
    """Stage vertices of the augmented sequence, rows 1 and 2 merged, against the managed ones"""
    report = Report("stage vertex sets")
    if not managed.mats or len(augmented.mats) != len(managed.mats):
        report.add("vertex-sets", False, detail="sequences have different lengths")
        return report
    merge = transpose(split_matrix(managed.k[0]))
    sets = []
    for stage in range(len(managed.mats)):
        source = frozenset(simplex_vertices(managed, stage).vertices)
        try:
            built = frozenset(matvec(merge, v) for v in simplex_vertices(augmented, stage).vertices)
        except ValueError as e:
            report.add("vertex-sets", False, level=stage, detail=str(e))
            continue
        report.add("vertex-sets", source == built, level=stage,
                   detail=f"{len(source)} distinct vertices")
        sets.append(sorted(source))
    report.data["vertices"] = sets
    return report


def _simplex_report(spec: SimplexSpec, approximant: ManagedSequence) -> Report:
    report = Report("simplex approximants")
    spreads = []
    for stage in range(len(approximant.mats)):
        approx = simplex_vertices(approximant, stage)
        report.add("nested", approx.nested is True, level=stage)
        if spec.kind == FINITE:
            rank = affine_rank(sorted(set(approx.vertices)))
            report.add("affine-rank", rank == spec.d, level=stage, detail=f"rank {rank}, extreme points {spec.d}")
        spread = vertex_spread(approx)
        if spreads and spec.kind == FINITE and spec.d == 1:
            report.add("spread", spread <= spreads[-1], level=stage, detail=f"{spread}")
        spreads.append(spread)
    report.data["spread"] = spreads
    if spec.kind == FINITE:
        report.extend(dominance_report(finite_diagnostics(approximant, spec.d)))
    else:
        report.extend(approximation_errors(spec, approximant))
    return report


def _periods_report(family: BlockFamily, settings: ForgeSettings) -> Report:
    report = Report("periods and return times")
    for n in range(1, family.levels - 1):
        m = n + 1
        if not family.materialized(m) or family.chain.domain(m).size > settings.exhaustive_limit:
            logger.debug("period scan of level %d skipped (|F_%d|=%d)", n, m, family.chain.domain(m).size)
            continue
        report.extend(scan_periods(family, n, m).report)
    within = [m for m in range(1, family.levels) if family.chain.domain(m).size <= settings.exhaustive_limit]
    if within:
        top = within[-1]
        try:
            report.extend(empirical_frequencies(family, 0, top).report)
        except ForgeError as e:
            report.add("count-identity", False, level=0, location=(0, top), detail=str(e))
    return report


def _round_trip_witness(bundle: SystemBundle, blocks_passed: bool) -> Report:
    """Witness between the managed sequence and the incidence read back from the blocks"""
    augmented = bundle.augmented
    if blocks_passed:
        try:
            mats = [recover_incidence(bundle.blocks, n, check=False) for n in range(bundle.blocks.levels - 1)]
            augmented = ManagedSequence(bundle.augmented.p, tuple(mats))
        except ForgeError as e:
            logger.warning("incidence not recoverable (%s); witnessing the stored matrices", e)
    report = ordered_group_witness(bundle.managed, augmented, strict=False).report
    stages = report.data["stages"]
    report.add("stages", stages == len(bundle.managed.mats),
               detail=f"{stages} of {len(bundle.managed.mats)} stages witnessed")
    return report


def _source_selection_report(bundle: SystemBundle) -> Report:
    """Boundary conditions need the ratios of the full input chain, not of the restricted one"""
    source, indices = bundle.source, bundle.source_indices
    try:
        full = chain_from_moduli(ratio_moduli(source.p, bundle.dim))
        report = verify_selection(source, full, indices, THEOREM_B)
    except (ForgeError, ValueError) as e:
        report = Report("selection")
        report.add("source", False, detail=str(e))
        return report
    report.add("restriction", [lv.moduli for lv in full.restrict(indices).levels] == [lv.moduli for lv in bundle.chain.levels],
               detail="block chain is the input chain at the selected indices")
    try:
        same = telescope(source, indices) == bundle.managed
    except ForgeError:
        same = False
    report.add("telescoped", same, detail="managed sequence is the telescoped input")
    return report


def verify_bundle(bundle: SystemBundle, settings: Optional[ForgeSettings] = None) -> Dict[str, Report]:
    """Recompute every certificate of a bundle from its chain, sequences and arrangements"""
    settings = settings or ForgeSettings.load()
    reports: Dict[str, Report] = {}
    reports["chain"] = verify_chain(bundle.chain)
    reports["managed"] = verify_managed(bundle.managed)
    reports["augmentation"] = _augmentation_report(bundle.managed, bundle.augmented)
    if bundle.chain.indices != bundle.managed.p:
        reports["augmentation"].add("index-chain", False, detail="|F_n| and the sequence indices disagree")
    # block checks read the tiling and the matrices
    if not all(reports[key].passed for key in ("chain", "managed", "augmentation")):
        logger.warning("bundle structure is invalid; block checks skipped")
        return reports
    reports["fillability"] = _fillability(bundle.augmented, bundle.chain)
    try:
        reports["blocks"] = verify_conditions(bundle.blocks, settings)
    except ForgeError as e:
        reports["blocks"] = Report("block conditions")
        reports["blocks"].add("assembly", False, detail=str(e))
    blocks_passed = reports["blocks"].passed
    if blocks_passed:
        reports["periods"] = _periods_report(bundle.blocks, settings)
    else:
        logger.warning("block conditions fail; period scans skipped")
    reports["witness"] = _round_trip_witness(bundle, blocks_passed)
    reports["vertex-sets"] = _vertex_sets_report(bundle.managed, bundle.augmented)
    if bundle.kind == Z_TO_ZD and bundle.source is not None:
        reports["selection"] = _source_selection_report(bundle)
    elif bundle.kind in _SELECTION:
        indices = tuple(range(len(bundle.managed.p)))
        reports["selection"] = verify_selection(bundle.managed, bundle.chain, indices, _SELECTION[bundle.kind])
    if bundle.kind == Z_TO_ZD:
        kr = Report("column multiplicity bound")
        for n in range(len(bundle.managed.mats)):
            kr.extend(kr_column_bound(bundle.managed, n, n + 1))
        reports["kr-bound"] = kr
    if bundle.spec is not None and bundle.approximant is not None:
        reports["simplex"] = _simplex_report(bundle.spec, bundle.approximant)
    failed = [key for key, r in reports.items() if not r.passed]
    if failed:
        logger.warning("bundle verification failed in %s", ", ".join(failed))
    return reports


def _certify(bundle: SystemBundle, settings: ForgeSettings) -> SystemBundle:
    bundle.witness = ordered_group_witness(bundle.managed, bundle.augmented, strict=False)
    bundle.reports = verify_bundle(bundle, settings)
    return bundle


def _raise_unfillable(report: Report, error=FillabilityError) -> None:
    failure = report.first_failure()
    if failure is None:
        return
    column = failure.location[0] if failure.location else 0
    if error is FillabilityError:
        raise FillabilityError(f"Level {failure.level} column {column}: {failure.detail}",
                               level=failure.level, column=column)
    raise error(f"Input violates the multinomial bound on equal columns at level {failure.level}, "
                f"column {column}: {failure.detail}")


def _assemble(kind: str, managed: ManagedSequence, chain: LatticeChain, seed: Optional[int],
              settings: ForgeSettings, **extra) -> SystemBundle:
    augmented = augment_sequence(managed)
    blocks = build_blocks(augmented, chain, seed=seed, settings=settings)
    bundle = SystemBundle(kind, chain, managed, augmented, blocks, seed=seed, **extra)
    return _certify(bundle, settings)


def _choquet_sequence(spec: SimplexSpec, chain: LatticeChain, depth: int,
                      k: Optional[int]) -> Tuple[ManagedSequence, Tuple[int, ...]]:
    if spec.kind == FINITE:
        k = k if k is not None else max(3, spec.d)
        seq, indices, _ = finite_simplex_sequence(spec.d, k, chain, depth)
        return seq, indices
    stages = len(spec.matrices)
    if depth > stages:
        logger.warning("depth %d exceeds the %d stages of the stagewise simplex; using %d", depth, stages, stages)
    return stochastic_to_managed(spec, chain, min(depth, stages))


def realize_simplex(spec: SimplexSpec, d: int, depth: int, seed: Optional[int] = None,
                    k: Optional[int] = None, settings: Optional[ForgeSettings] = None) -> SystemBundle:
    """Toeplitz Z^d subshift whose measure simplex is approximated through ``depth`` stages"""
    settings = settings or ForgeSettings.load()
    spec.validate()
    if d < 1:
        raise InputInvalidError(f"Group dimension must be at least 1, got {d}")
    if depth < 2:
        raise InputInvalidError(f"depth must be at least 2, got {depth}")
    levels = min(settings.max_chain_levels, max(8, 6 * depth))
    while True:
        chain = default_chain(d, levels, settings.chain_ratio)
        try:
            approximant, indices = _choquet_sequence(spec, chain, depth, k)
            break
        except NeedsMoreLevelsError:
            if levels >= settings.max_chain_levels:
                raise
            levels = min(settings.max_chain_levels, 2 * levels)
            logger.debug("deepening default chain to %d levels", levels)
    stage_chain = chain.restrict(indices)
    selected = select_indices(approximant, stage_chain, THEOREM_A)
    managed = telescope(approximant, selected)
    block_chain = stage_chain.restrict(selected)
    _raise_unfillable(_fillability(augment_sequence(managed), block_chain))
    logger.info("realizing %s simplex on Z^%d with %d block levels", spec.kind, d, len(block_chain))
    return _assemble(REALIZE, managed, block_chain, seed, settings, spec=spec, approximant=approximant)


def balanced_factors(n: int, d: int, allow_one: bool = False) -> Tuple[int, ...]:
    """Split n into d factors as evenly as its prime factorization allows, largest first"""
    if n < 1:
        raise FactorizationError(f"Cannot factor {n}")
    primes = sorted((p for p, e in factorint(n).items() for _ in range(e)), reverse=True)
    if len(primes) < d and not allow_one:
        raise FactorizationError(f"Ratio {n} has {len(primes)} prime factors; {d} factors greater than 1 are needed")
    factors = [1] * d
    for p in primes:
        i = min(range(d), key=lambda j: (factors[j], j))
        factors[i] *= p
    return tuple(sorted(factors, reverse=True))


def ratio_moduli(p: Sequence[int], d: int) -> List[Tuple[int, ...]]:
    """Per-coordinate moduli q_n with prod q_n = p_n and every ratio factor above 1"""
    moduli = [balanced_factors(p[0], d, allow_one=True)]
    for a, b in zip(p, p[1:]):
        factors = balanced_factors(b // a, d)
        current = moduli[-1]
        order = sorted(range(d), key=lambda j: (current[j], j))
        q = list(current)
        for j, f in zip(order, factors):
            q[j] *= f
        moduli.append(tuple(q))
    return moduli


def _prime_count(n: int) -> int:
    return sum(factorint(n).values())


def merge_levels(seq: ManagedSequence, d: int) -> ManagedSequence:
    """Telescope until every ratio has d nontrivial factors and every entry exceeds 1"""
    cuts = [0]
    for j in range(1, len(seq.p)):
        i = cuts[-1]
        if _prime_count(seq.p[j] // seq.p[i]) >= d and min(x for row in product(seq.mats[i:j]) for x in row) > 1:
            cuts.append(j)
    if len(cuts) == 1:
        raise FactorizationError(f"No prefix of the {len(seq.mats)} input matrices merges into a factorable level")
    if cuts[-1] != len(seq.mats):
        logger.warning("dropping %d trailing input levels that do not merge", len(seq.mats) - cuts[-1])
    logger.debug("merged input levels at %s", cuts)
    return telescope(seq, cuts)


def z_to_zd(p: Sequence[int], mats: Sequence[Matrix], d: int, depth: Optional[int] = None,
            seed: Optional[int] = None, pre_telescope: bool = False,
            settings: Optional[ForgeSettings] = None) -> SystemBundle:
    """Toeplitz Z^d subshift with the ordered group of a managed Z presentation"""
    settings = settings or ForgeSettings.load()
    if d < 1:
        raise InputInvalidError(f"Group dimension must be at least 1, got {d}")
    try:
        seq = ManagedSequence.of(p, mats)
    except ValueError as e:
        raise InputInvalidError(f"Input matrices are malformed: {e}") from e
    report = verify_managed(seq)
    if not report.passed:
        failure = report.first_failure()
        raise InputInvalidError(f"Input is not managed: {failure.name} fails at level {failure.level} "
                                f"({failure.detail})")
    if depth is not None:
        if depth < 1:
            raise InputInvalidError(f"depth must be at least 1, got {depth}")
        seq = seq.truncate(depth)
    if pre_telescope:
        seq = merge_levels(seq, d)
    if not seq.positive:
        raise InputInvalidError("Input matrices need strictly positive entries; merge levels with pre_telescope")
    chain = chain_from_moduli(ratio_moduli(seq.p, d))
    indices = select_indices(seq, chain, THEOREM_B)
    managed = telescope(seq, indices)
    block_chain = chain.restrict(indices)
    _raise_unfillable(_fillability(augment_sequence(managed), block_chain), InputInvalidError)
    logger.info("carrying %d input levels to Z^%d at indices %s", len(seq.mats), d, indices)
    return _assemble(Z_TO_ZD, managed, block_chain, seed, settings, source=seq, source_indices=tuple(indices))


def example_moduli(d: int, levels: int) -> List[Tuple[int, ...]]:
    if d == 1:
        return [(9 ** (n + 1),) for n in range(levels)]
    if d == 2:
        return [(3 * 9 ** n,) * 2 for n in range(levels)]
    raise InputInvalidError(f"The worked example exists on Z and Z^2, not Z^{d}")


def example_matrix(ratio: int, border: int) -> Matrix:
    """3x3 matrix with column sums ``ratio`` and distinct augmented columns"""
    free = ratio - 1 - border
    a = free // 3
    if a < 1:
        raise InputInvalidError(f"Ratio {ratio} leaves {free} free cosets beside {border} border cosets")
    c = free - 2 * a + border
    return transpose(((1 + a, a, c), (2 + a, a - 1, c), (a, a + 1, c)))


def worked_example(d: int = 1, levels: int = 3, seed: Optional[int] = None,
                   settings: Optional[ForgeSettings] = None) -> SystemBundle:
    """Four blocks per level on q_n = 9^(n+1) (Z) or q_n = 3 * 9^n per coordinate (Z^2)"""
    settings = settings or ForgeSettings.load()
    if levels < 2:
        raise InputInvalidError(f"The worked example needs at least 2 levels, got {levels}")
    chain = chain_from_moduli(example_moduli(d, levels))
    mats = []
    for n in range(levels - 1):
        border = region_size(border_set(chain, n).coset)
        mats.append(example_matrix(chain.ratio(n), border))
    managed = ManagedSequence(chain.indices, tuple(mats))
    return _assemble(EXAMPLE, managed, chain, seed, settings)
