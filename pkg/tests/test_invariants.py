from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from toeplitz_forge.blocks import assemble_family
from toeplitz_forge.errors import ConditionViolationError, NotWitnessedError
from toeplitz_forge.invariants import (
    affine_rank,
    empirical_frequencies,
    evaluate_state,
    ordered_group_witness,
    push_forward,
    simplex_vertices,
    stage_vertex_sets,
    state_chain,
    vertex_spread,
    vertex_state,
)
from toeplitz_forge.matrices import ManagedSequence, augment_sequence, product

from .strategies import managed_sequences

THREE_TWO = ManagedSequence.of((1, 5), [((3, 2), (2, 3))])


def test_stage_vertices_are_normalized_columns():
    seq = ManagedSequence.of((1, 9, 81), [((5, 4), (4, 5))] * 2)
    first = simplex_vertices(seq, 0)
    assert first.vertices == ((Fraction(5, 9), Fraction(4, 9)), (Fraction(4, 9), Fraction(5, 9)))
    assert first.nested
    assert vertex_spread(first) == Fraction(2, 9)
    second = simplex_vertices(seq, 1)
    assert second.nested
    assert vertex_spread(second) == Fraction(2, 81)
    assert simplex_vertices(seq, -1).vertices == ((1, 0), (0, 1))


def test_affine_rank_is_exact():
    assert affine_rank([(1, 0), (0, 1)]) == 2
    assert affine_rank([(Fraction(1, 2), Fraction(1, 2))] * 2) == 1
    assert affine_rank([(1, 0, 0), (0, 1, 0), (Fraction(1, 2), Fraction(1, 2), 0)]) == 2
    assert affine_rank([]) == 0


def test_state_chain_is_normalized_on_the_unit():
    chain = state_chain(THREE_TWO, (1, 1))
    assert chain.z == ((Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 10), Fraction(1, 10)))
    assert evaluate_state(chain, ((1, 1), 0)) == 1


def test_state_is_constant_on_classes():
    chain = state_chain(THREE_TWO, (1, 1))
    moved = push_forward(THREE_TWO, (1, 0), 0)
    assert moved == ((3, 2), 1)
    assert evaluate_state(chain, moved) == evaluate_state(chain, ((1, 0), 0)) == Fraction(1, 2)


def test_vertex_state_matches_stage_vertex():
    states = vertex_state(THREE_TWO, 0, 1)
    assert states.z[0] == (Fraction(3, 5), Fraction(2, 5))
    assert states.z[0] == simplex_vertices(THREE_TWO, 0).vertices[0]


def test_state_rejects_zero_vector():
    with pytest.raises(ValueError):
        state_chain(THREE_TWO, (0, 0))


@hsettings(max_examples=40, deadline=None)
@given(managed_sequences(), st.data())
def test_states_are_well_defined_and_positive(seq, data):
    z_last = data.draw(st.lists(st.integers(0, 5), min_size=seq.k[-1], max_size=seq.k[-1]).filter(any))
    chain = state_chain(seq, z_last)
    assert evaluate_state(chain, ((1,) * seq.k[0], 0)) * seq.p[0] == 1
    for n in range(len(seq.mats)):
        v = data.draw(st.lists(st.integers(0, 4), min_size=seq.k[n], max_size=seq.k[n]))
        value = evaluate_state(chain, (v, n))
        assert value >= 0
        assert evaluate_state(chain, push_forward(seq, v, n)) == value


def test_frequencies_match_first_column(example_z):
    family = example_z.blocks
    freq = empirical_frequencies(family, 0, 2)
    assert freq.report.passed
    expected = product(family.seq.mats[0:2])
    assert freq.counts == tuple(row[0] for row in expected)
    assert sum(freq.frequencies) == 1


def test_frequencies_reject_unknown_blocks(example_z):
    family = example_z.blocks
    stray = list(family.patterns[1][0])
    stray[0] = 3
    patterns = (family.patterns[0], (tuple(stray),) + family.patterns[1][1:]) + family.patterns[2:]
    with pytest.raises(ConditionViolationError):
        empirical_frequencies(replace(family, patterns=patterns), 0, 1)

    arrangements = [list(level) for level in family.arrangements]
    labels = list(arrangements[0][0])
    labels[1] = 9
    arrangements[0][0] = tuple(labels)
    relabelled = assemble_family(family.chain, family.seq, family.alphabet_size, arrangements)
    with pytest.raises(ConditionViolationError):
        empirical_frequencies(relabelled, 0, 1)


def test_witness_between_managed_and_augmented(example_z):
    witness = ordered_group_witness(example_z.managed, example_z.augmented)
    assert witness.passed
    assert len(witness.factors) == len(example_z.managed.mats)
    assert witness.report.data["stages"] == len(example_z.managed.mats)


def test_witness_detects_tampered_entry(example_z):
    mats = [list(list(row) for row in m) for m in example_z.augmented.mats]
    mats[0][1][0] += 1
    mats[0][2][0] -= 1
    tampered = ManagedSequence.of(example_z.augmented.p, mats)
    with pytest.raises(NotWitnessedError) as info:
        ordered_group_witness(example_z.managed, tampered)
    assert info.value.location[0] == 0
    report = ordered_group_witness(example_z.managed, tampered, strict=False).report
    assert [c.name for c in report.failures()] == ["augmented=S'T"]


@hsettings(max_examples=40, deadline=None)
@given(managed_sequences())
def test_witness_holds_for_random_positive_sequences(seq):
    """Every positive managed sequence is witnessed by its own augmentation"""
    assert ordered_group_witness(seq, augment_sequence(seq)).passed


def test_stage_vertex_sets_are_sets():
    seq = ManagedSequence.of((1, 9), [((5, 5, 4), (4, 4, 5))])
    assert stage_vertex_sets(seq) == [frozenset({(Fraction(5, 9), Fraction(4, 9)), (Fraction(4, 9), Fraction(5, 9))})]
