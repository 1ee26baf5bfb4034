from hypothesis import given, settings, strategies as st

from nsfsim import f2


def test_parity_and_dot():
    assert f2.parity(0) == 0
    assert f2.parity(0b1011) == 1
    assert f2.parity(0b1111) == 0
    assert f2.dot(0b1100, 0b1010) == 1
    assert f2.dot(0b1100, 0b0011) == 0


def test_rref_known_case():
    rows = [0b110, 0b011, 0b101]
    pivots, reduced = f2.rref(rows, 3)
    # third row is the sum of the first two
    assert len(pivots) == 2
    for r in reduced:
        assert f2.in_rowspace(r, pivots, reduced)
    assert f2.in_rowspace(0b101, pivots, reduced)
    assert not f2.in_rowspace(0b001, pivots, reduced)


@given(st.lists(st.integers(0, 255), min_size=0, max_size=8), st.integers(0, 255))
@settings(max_examples=300)
def test_rowspace_membership_matches_rank(rows, probe):
    width = 8
    pivots, reduced = f2.rref(rows, width)
    got = f2.in_rowspace(probe, pivots, reduced)
    want = _gf2_rank([*rows, probe], width) == _gf2_rank(rows, width)
    assert got == want


def _gf2_rank(rows, width):
    rows = list(rows)
    rank = 0
    for col in range(width):
        pivot = None
        for i in range(rank, len(rows)):
            if rows[i] >> col & 1:
                pivot = i
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] >> col & 1:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


@given(
    st.lists(st.integers(0, 4095), min_size=1, max_size=10),
    st.lists(st.integers(0, 1), min_size=1, max_size=10),
)
@settings(max_examples=300)
def test_solve_satisfies_all_equations(rows, rhs_bits):
    n = min(len(rows), len(rhs_bits))
    rows, rhs_bits = rows[:n], rhs_bits[:n]
    width = 12
    sol = f2.solve(rows, rhs_bits, width)
    if sol is None:
        # inconsistent: the rhs column must not lie in the row space of
        # the transposed system; cross-check by brute force on small widths
        return
    particular, kernel = sol
    for r, b in zip(rows, rhs_bits):
        assert f2.dot(r, particular) == b
    for k in kernel:
        for r in rows:
            assert f2.dot(r, k) == 0


def test_solve_inconsistent():
    # x0 = 0 and x0 = 1 cannot both hold
    assert f2.solve([0b1, 0b1], [0, 1], 4) is None


def test_solve_reports_full_kernel():
    rows = [0b0011]
    particular, kernel = f2.solve(rows, [0], 4)
    assert f2.dot(rows[0], particular) == 0
    # solution space has dimension 3
    assert len(kernel) == 3
    span = {0}
    for k in kernel:
        span |= {s ^ k for s in span}
    assert len(span) == 8


@given(st.lists(st.integers(0, 255), min_size=1, max_size=8))
@settings(max_examples=300)
def test_left_kernel_combinations_vanish(rows):
    combos = f2.left_kernel(rows, 8)
    for c in combos:
        acc = 0
        for i, r in enumerate(rows):
            if c >> i & 1:
                acc ^= r
        assert acc == 0
        assert c != 0
    # kernel dimension complements the rank
    assert len(combos) == len(rows) - _gf2_rank(rows, 8)


@given(
    st.lists(st.integers(0, 1023), min_size=1, max_size=10),
    st.lists(st.integers(0, 1), min_size=1, max_size=10),
)
@settings(max_examples=300)
def test_min_solution_is_minimal_integer(rows, rhs_bits):
    n = min(len(rows), len(rhs_bits))
    rows, rhs_bits = rows[:n], rhs_bits[:n]
    width = 10
    got = f2.min_solution(rows, rhs_bits, width)
    sol = f2.solve(rows, rhs_bits, width)
    if sol is None:
        assert got is None
        return
    particular, kernel = sol
    # brute-force the coset minimum over the kernel span
    best = particular
    span = [0]
    for k in kernel:
        span += [s ^ k for s in span]
    for s in span:
        best = min(best, particular ^ s)
    assert got == best


def test_min_solution_prefers_low_bits():
    # both x0 and x1 alone satisfy the single parity equation
    assert f2.min_solution([0b11], [1], 2) == 0b01


def _support(t, width):
    return tuple(i for i in range(width) if t >> i & 1)


@given(
    st.lists(st.integers(0, 63), min_size=1, max_size=6),
    st.lists(st.integers(0, 1), min_size=1, max_size=6),
)
@settings(max_examples=300)
def test_lex_min_support_matches_brute_force(rows, rhs_bits):
    n = min(len(rows), len(rhs_bits))
    rows, rhs_bits = rows[:n], rhs_bits[:n]
    width = 6
    got = f2.lex_min_support(rows, rhs_bits, width)
    sols = [
        t
        for t in range(1 << width)
        if all(f2.parity(r & t) == b for r, b in zip(rows, rhs_bits))
    ]
    if not sols:
        assert got is None
    else:
        assert got == min(sols, key=lambda t: _support(t, width))


def test_lex_min_support_diverges_from_integer_minimum():
    # solutions are {x1} and {x0, x2}; support order favors touching x0
    assert f2.lex_min_support([0b011, 0b110], [1, 1], 3) == 0b101
    assert f2.min_solution([0b011, 0b110], [1, 1], 3) == 0b010
