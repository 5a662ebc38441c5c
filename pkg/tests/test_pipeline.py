from fractions import Fraction

import pytest

from toeplitz_forge.blocks import SparseArrangement
from toeplitz_forge.choquet import SimplexSpec
from toeplitz_forge.config import ForgeSettings
from toeplitz_forge.errors import FactorizationError, InputInvalidError, NeedsMoreLevelsError
from toeplitz_forge.invariants import simplex_vertices
from toeplitz_forge.lattice import border_set, region_size
from toeplitz_forge.matrices import ManagedSequence, transpose
from toeplitz_forge.pipeline import (
    EXAMPLE,
    REALIZE,
    Z_TO_ZD,
    balanced_factors,
    example_matrix,
    merge_levels,
    ratio_moduli,
    realize_simplex,
    verify_bundle,
    worked_example,
    z_to_zd,
)

STAGES = [
    [["1/2", "1/3"], ["1/2", "2/3"]],
    [["3/4", "1/4"], ["1/4", "3/4"]],
    [["2/3", "1/3"], ["1/3", "2/3"]],
]


def test_worked_example_on_z(example_z):
    assert example_z.kind == EXAMPLE
    assert example_z.passed, example_z.failures()
    assert example_z.chain.indices == (9, 81, 729)
    assert example_z.managed.mats[0] == example_matrix(9, 2)
    assert {"chain", "managed", "blocks", "periods", "witness", "vertex-sets"} <= set(example_z.reports)


def test_worked_example_on_the_square(example_z2):
    assert example_z2.passed, example_z2.failures()
    assert example_z2.dim == 2
    assert region_size(border_set(example_z2.chain, 0).coset) == 32
    assert example_z2.managed.mats[0] == transpose(((17, 16, 48), (18, 15, 48), (16, 17, 48)))


def test_worked_example_only_on_z_and_square():
    with pytest.raises(InputInvalidError):
        worked_example(3, 2)
    with pytest.raises(InputInvalidError):
        worked_example(1, 1)


def test_realize_two_extreme_points(realized):
    assert realized.kind == REALIZE
    assert realized.passed, realized.failures()
    assert realized.approximant.p == (1, 81, 19683, 4782969, 3486784401)
    assert realized.chain.indices == (1, 19683)
    rank_checks = realized.reports["simplex"].named("affine-rank")
    assert len(rank_checks) == 4 and all(c.passed for c in rank_checks)
    assert realized.reports["witness"].data["stages"] == 1


@pytest.mark.parametrize("extremes, d", [(1, 1), (2, 1), (3, 1), (2, 2), (3, 3)])
def test_realize_depth_five_with_four_blocks(extremes, d):
    settings = ForgeSettings(_env_file=None, exhaustive_limit=10_000)
    bundle = realize_simplex(SimplexSpec.finite(extremes), d, 5, k=4, settings=settings)
    assert bundle.passed, bundle.failures()
    simplex = bundle.reports["simplex"]
    ranks = simplex.named("affine-rank")
    assert len(ranks) == 5 and all(c.passed for c in ranks)
    dominance = simplex.named("dominance")
    assert len(dominance) == 5 * extremes and all(c.passed for c in dominance)
    if extremes == 1:
        assert simplex.data["spread"][-1] < Fraction(1, 1000)
    stages = bundle.reports["witness"].data["stages"]
    assert stages == len(bundle.managed.mats)
    if d == 1:
        assert stages >= 2
        assert any(isinstance(a, SparseArrangement) for level in bundle.blocks.arrangements for a in level)


def test_witness_reads_incidence_back_from_blocks(example_z4):
    witness = example_z4.reports["witness"]
    assert witness.passed
    assert witness.data["stages"] == 3
    assert witness.named("stages")[0].detail == "3 of 3 stages witnessed"


def test_realize_rejects_shallow_depth(settings):
    with pytest.raises(InputInvalidError, match="depth must be at least 2"):
        realize_simplex(SimplexSpec.finite(2), 1, 1, settings=settings)


def test_realize_single_point_has_shrinking_spread(settings):
    bundle = realize_simplex(SimplexSpec.finite(1), 1, 2, settings=settings)
    assert bundle.passed, bundle.failures()
    assert all(s == 0 for s in bundle.reports["simplex"].data["spread"])


def test_realize_stagewise_simplex(settings):
    bundle = realize_simplex(SimplexSpec.stagewise(STAGES), 1, 3, settings=settings)
    assert bundle.passed, bundle.failures()
    assert bundle.reports["simplex"].named("l1-error")


def test_balanced_factors():
    """Factors stay as even as the prime factorization allows"""
    assert balanced_factors(19683, 2) == (243, 81)
    assert balanced_factors(81, 2) == (9, 9)
    assert balanced_factors(7, 2, allow_one=True) == (7, 1)
    with pytest.raises(FactorizationError, match="prime factors"):
        balanced_factors(7, 2)


def test_ratio_moduli_multiply_to_indices():
    moduli = ratio_moduli((1, 19683), 2)
    assert moduli == [(1, 1), (243, 81)]
    moduli = ratio_moduli((9, 81, 729), 2)
    assert [a * b for a, b in moduli] == [9, 81, 729]


def test_z_to_zd_round_trip(settings):
    """Stage simplices survive the move from Z to Z^2"""
    source = realize_simplex(SimplexSpec.finite(2), 1, 2, settings=settings)
    zd = z_to_zd(source.managed.p, source.managed.mats, 2, settings=settings)
    assert zd.kind == Z_TO_ZD
    assert zd.passed, zd.failures()
    assert zd.chain.domain(1).shape == (243, 81)
    assert zd.reports["selection"].passed
    assert zd.reports["kr-bound"].passed
    for stage in range(len(source.managed.mats)):
        assert set(simplex_vertices(zd.managed, stage).vertices) == set(simplex_vertices(source.managed, stage).vertices)


def test_z_to_zd_selects_first_admissible_interval(settings):
    p = tuple(9 ** (n + 1) for n in range(6))
    mats = [((5, 4), (4, 5))] * 5
    bundle = z_to_zd(p, mats, 1, settings=settings)
    assert bundle.passed, bundle.failures()
    assert bundle.source_indices == (0, 4)
    assert bundle.chain.indices == (9, 59049)
    assert region_size(border_set(bundle.chain, 0).coset) == 2


def test_z_to_zd_pre_telescopes_unfactorable_ratios(settings):
    p = (1, 2, 4, 8, 16)
    mats = [((1, 1), (1, 1))] * 4
    with pytest.raises(FactorizationError):
        z_to_zd(p, mats, 2, settings=settings)
    bundle = z_to_zd(p, mats, 2, pre_telescope=True, settings=settings)
    assert bundle.passed, bundle.failures()
    assert bundle.chain.indices == (1, 16)
    assert bundle.chain.domain(1).shape == (4, 4)


def test_merge_levels_cuts_where_ratios_factor():
    seq = ManagedSequence.of((1, 2, 4, 8, 16), [((1, 1), (1, 1))] * 4)
    merged = merge_levels(seq, 2)
    assert merged.p == (1, 4, 16)
    assert merged.mats[0] == ((2, 2), (2, 2))


def test_z_to_zd_rejects_unmanaged_input(settings):
    with pytest.raises(InputInvalidError):
        z_to_zd((1, 9), [((5, 4), (4, 4))], 2, settings=settings)
    with pytest.raises(InputInvalidError):
        z_to_zd((1, 9), [((5, 4, 1), (4, 5))], 2, settings=settings)
    with pytest.raises(InputInvalidError):
        z_to_zd((1, 9), [((9, 0), (0, 9))], 1, settings=settings)


def test_z_to_zd_needs_enough_levels(settings):
    p = tuple(9 ** (n + 1) for n in range(3))
    with pytest.raises(NeedsMoreLevelsError):
        z_to_zd(p, [((5, 4), (4, 5))] * 2, 1, settings=settings)


def test_verify_bundle_reports_tampered_matrix(example_z, settings):
    mats = [list(list(row) for row in m) for m in example_z.augmented.mats]
    mats[1][1][0] += 1
    mats[1][3][0] -= 1
    tampered = ManagedSequence.of(example_z.augmented.p, mats)
    original = example_z.augmented
    try:
        example_z.augmented = tampered
        reports = verify_bundle(example_z, settings)
    finally:
        example_z.augmented = original
    assert not reports["augmentation"].passed
    assert "blocks" not in reports
