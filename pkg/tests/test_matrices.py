from itertools import permutations

import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from toeplitz_forge.errors import AugmentationError, LevelRangeError, MultinomialDomainError, NeedsMoreLevelsError
from toeplitz_forge.lattice import chain_from_moduli
from toeplitz_forge.matrices import (
    THEOREM_A,
    THEOREM_B,
    ManagedSequence,
    augment,
    augment_sequence,
    check_fillability,
    factor_chain,
    kr_column_bound,
    matmul,
    multinomial,
    multinomial_reaches,
    product,
    select_indices,
    split_factors,
    telescope,
    transpose,
    verify_managed,
    verify_selection,
)
from toeplitz_forge.pipeline import example_matrix

from .strategies import managed_sequences

FIVE_FOUR = ((5, 4), (4, 5))


def nine_sequence(levels):
    return ManagedSequence(tuple(9 ** (n + 1) for n in range(levels)), (FIVE_FOUR,) * (levels - 1))


def nine_chain(levels, d=1):
    if d == 1:
        return chain_from_moduli([(9 ** (n + 1),) for n in range(levels)])
    return chain_from_moduli([(3 ** (n + 1),) * 2 for n in range(levels)])


def test_verify_managed_accepts_equal_column_sums():
    assert verify_managed(ManagedSequence.of((1, 9), [FIVE_FOUR])).passed


def test_verify_managed_locates_bad_column():
    report = verify_managed(ManagedSequence.of((1, 9), [((5, 4), (4, 4))]))
    assert not report.passed
    failure = report.first_failure()
    assert failure.name == "column-sum"
    assert failure.location == (0, 2)


def test_verify_managed_rejects_non_dividing_indices():
    report = verify_managed(ManagedSequence.of((2, 9), [FIVE_FOUR]))
    assert any(c.name == "divisibility" for c in report.failures())


def test_augment_splits_first_row():
    assert augment(FIVE_FOUR) == ((1, 1, 1), (4, 4, 3), (4, 4, 5))
    assert augment(((9, 9, 9),), is_first_level=True) == ((9, 9, 9, 9),)


def test_augment_needs_positive_first_row():
    with pytest.raises(AugmentationError):
        augment(((0, 4), (9, 5)))


def test_split_factors_on_example():
    a = transpose(FIVE_FOUR)
    f = split_factors(a)
    assert matmul(f.T, f.S) == a
    assert matmul(f.S_next, f.T) == transpose(augment(FIVE_FOUR))
    assert f.S == ((1, 0), (1, 0), (0, 1))


def test_split_factors_rejects_zero_in_first_column():
    with pytest.raises(AugmentationError):
        split_factors(((0, 3), (4, 2)))


@hsettings(max_examples=50, deadline=None)
@given(managed_sequences())
def test_split_identities_hold_for_positive_sequences(seq):
    for m in seq.mats:
        f = split_factors(transpose(m))
        assert matmul(f.T, f.S) == transpose(m)
        assert matmul(f.S_next, f.T) == transpose(augment(m))
    assert len(factor_chain(seq)) == 2 * len(seq.mats) + 1


@hsettings(max_examples=50, deadline=None)
@given(managed_sequences())
def test_augmented_and_telescoped_sequences_stay_managed(seq):
    assert verify_managed(seq).passed
    assert verify_managed(augment_sequence(seq)).passed
    whole = telescope(seq, [0, len(seq.mats)])
    assert verify_managed(whole).passed
    assert whole.mats[0] == product(seq.mats)


def test_telescope_rejects_bad_cut_points():
    seq = nine_sequence(3)
    assert telescope(seq, [0, 2]).mats == (((41, 40), (40, 41)),)
    assert telescope(seq, [0, 2]).p == (9, 729)
    with pytest.raises(LevelRangeError):
        telescope(seq, [1, 2])
    with pytest.raises(LevelRangeError):
        telescope(seq, [0, 0, 2])
    with pytest.raises(LevelRangeError):
        telescope(seq, [0, 3])


def test_multinomial_values():
    assert multinomial([2, 2, 2]) == 90
    assert multinomial([]) == 1
    assert multinomial([0, 5]) == 1
    with pytest.raises(MultinomialDomainError):
        multinomial([3, -1])


@hsettings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=3).filter(lambda xs: sum(xs) <= 7))
def test_multinomial_counts_distinct_words(parts):
    word = [i for i, c in enumerate(parts) for _ in range(c)]
    assert multinomial(parts) == len(set(permutations(word)))


def test_multinomial_reaches_without_full_value():
    assert multinomial_reaches([3280, 3278], 2) == (True, None)
    assert multinomial_reaches([1, 1], 3) == (False, 2)
    assert multinomial_reaches([0, 4], 2) == (False, 1)


def test_select_indices_closes_first_block_at_two():
    seq = nine_sequence(3)
    chain = nine_chain(3)
    assert select_indices(seq, chain, THEOREM_A) == (0, 2)
    report = verify_selection(seq, chain, (0, 1), THEOREM_A)
    assert not report.passed
    assert report.first_failure().detail.startswith("(ii)")


def test_boundary_inequality_first_holds_at_nine_to_the_fifth():
    seq = nine_sequence(6)
    chain = nine_chain(6)
    assert select_indices(seq, chain, THEOREM_B) == (0, 4)
    assert chain.domain(4).size == 59049
    # 72 / 6561 is still above 1 / 729
    assert not verify_selection(seq, chain, (0, 3), THEOREM_B).passed


def test_boundary_inequality_needs_more_levels_on_the_square():
    seq = nine_sequence(6)
    chain = nine_chain(6, d=2)
    with pytest.raises(NeedsMoreLevelsError) as info:
        select_indices(seq, chain, THEOREM_B)
    assert info.value.condition == "boundary inequality"


def test_select_indices_rejects_unknown_mode():
    with pytest.raises(ValueError):
        select_indices(nine_sequence(3), nine_chain(3), "theoremC")


def test_fillability_of_example_matrix():
    m = example_matrix(9, 2)
    assert m == transpose(((3, 2, 4), (4, 1, 4), (2, 3, 4)))
    assert check_fillability(augment(m), 2, level=0).passed
    report = check_fillability(augment(m), 5, level=0)
    assert not report.passed
    assert "insufficient last-block count" in report.first_failure().detail


def test_fillability_counts_repeated_columns():
    # three identical columns but only two words of letters (1, 1)
    m_tilde = ((1, 1, 1), (1, 1, 1), (1, 1, 1))
    report = check_fillability(m_tilde, 0)
    assert not report.passed
    assert "multiplicity 3" in report.first_failure().detail


def test_column_bound_on_telescoped_example():
    seq = nine_sequence(6)
    assert kr_column_bound(seq, 0, 4).passed
    with pytest.raises(LevelRangeError):
        kr_column_bound(seq, 2, 2)
