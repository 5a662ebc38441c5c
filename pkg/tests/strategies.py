from hypothesis import strategies as st

from toeplitz_forge.matrices import ManagedSequence


@st.composite
def managed_sequences(draw, max_levels=3, max_k=4, max_entry=12, positive=True):
    """Random managed sequences: every column of M_n sums to p_{n+1} / p_n"""
    levels = draw(st.integers(1, max_levels))
    ks = draw(st.lists(st.integers(2, max_k), min_size=levels + 1, max_size=levels + 1))
    low = 1 if positive else 0
    p = [draw(st.integers(1, 9))]
    mats = []
    for n in range(levels):
        rows, cols = ks[n], ks[n + 1]
        upper = [[draw(st.integers(low, max_entry)) for _ in range(cols)] for _ in range(rows - 1)]
        partial = [sum(col) for col in zip(*upper)]
        ratio = max(partial) + draw(st.integers(1, max_entry))
        last = [ratio - s for s in partial]
        mats.append(tuple(tuple(row) for row in upper) + (tuple(last),))
        p.append(p[-1] * ratio)
    return ManagedSequence(tuple(p), tuple(mats))


@st.composite
def multisets(draw, max_symbols=3, max_total=7):
    counts = draw(st.lists(st.integers(0, 4), min_size=1, max_size=max_symbols))
    counts = {i + 1: c for i, c in enumerate(counts) if c}
    total = sum(counts.values())
    if total == 0 or total > max_total:
        counts = {1: 1, 2: 2}
    return counts
