"""GF(2) linear algebra on bit-packed vectors.

Vectors are Python ints (bit i = coordinate i); a matrix is a list of such
ints, one per row.  Everything here is exact and allocation-light, which is
what the symplectic bookkeeping in the rest of the package leans on.
"""

from __future__ import annotations


def parity(v: int) -> int:
    """Parity of the popcount of ``v`` (0 or 1)."""
    return v.bit_count() & 1


def dot(a: int, b: int) -> int:
    """GF(2) inner product of two packed vectors."""
    return (a & b).bit_count() & 1


def rref(rows: list[int], width: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form.

    Returns ``(pivot_cols, reduced_rows)`` where ``reduced_rows[k]`` has its
    pivot at ``pivot_cols[k]`` and zeros in every other pivot column.  Zero
    rows are dropped, so ``len(pivot_cols)`` is the rank.
    """
    reduced: list[int] = []
    pivots: list[int] = []
    for row in rows:
        for p, r in zip(pivots, reduced):
            if (row >> p) & 1:
                row ^= r
        if row == 0:
            continue
        p = (row & -row).bit_length() - 1  # lowest set bit becomes the pivot
        for k in range(len(reduced)):
            if (reduced[k] >> p) & 1:
                reduced[k] ^= row
        # keep rows sorted by pivot column for deterministic output
        i = 0
        while i < len(pivots) and pivots[i] < p:
            i += 1
        pivots.insert(i, p)
        reduced.insert(i, row)
    return pivots, reduced


def reduce_vector(v: int, pivots: list[int], reduced: list[int]) -> int:
    """Canonical coset representative of ``v`` modulo the row space."""
    for p, r in zip(pivots, reduced):
        if (v >> p) & 1:
            v ^= r
    return v


def in_rowspace(v: int, pivots: list[int], reduced: list[int]) -> bool:
    return reduce_vector(v, pivots, reduced) == 0


def left_kernel(rows: list[int], width: int) -> list[int]:
    """Basis of coefficient vectors ``c`` with ``XOR_{i in c} rows[i] == 0``.

    Bit i of each basis vector selects ``rows[i]``.
    """
    m = len(rows)
    # eliminate with an identity tag glued above bit `width`
    work = [rows[i] | (1 << (width + i)) for i in range(m)]
    mask = (1 << width) - 1
    pivots: list[int] = []
    pivot_rows: list[int] = []
    kernel: list[int] = []
    for row in work:
        for p, r in zip(pivots, pivot_rows):
            if (row >> p) & 1:
                row ^= r
        if row & mask == 0:
            kernel.append(row >> width)
            continue
        low = row & mask
        p = (low & -low).bit_length() - 1
        pivots.append(p)
        pivot_rows.append(row)
    return kernel


def solve(rows: list[int], rhs: list[int], width: int) -> tuple[int, list[int]] | None:
    """Solve ``parity(rows[k] & t) == rhs[k]`` for ``t``.

    Returns ``(particular, kernel_basis)`` or None if inconsistent.  The
    particular solution has all free coordinates set to 0.
    """
    assert len(rows) == len(rhs)
    # augmented rows: constraint mask plus rhs bit above `width`
    aug = [rows[k] | (rhs[k] & 1) << width for k in range(len(rows))]
    mask = (1 << width) - 1
    pivots: list[int] = []
    pivot_rows: list[int] = []
    for row in aug:
        for p, r in zip(pivots, pivot_rows):
            if (row >> p) & 1:
                row ^= r
        if row & mask == 0:
            if row >> width:
                return None
            continue
        low = row & mask
        p = (low & -low).bit_length() - 1
        for k in range(len(pivot_rows)):
            if (pivot_rows[k] >> p) & 1:
                pivot_rows[k] ^= row
        pivots.append(p)
        pivot_rows.append(row)

    particular = 0
    for p, r in zip(pivots, pivot_rows):
        # free coordinates are 0, so the pivot coordinate equals the rhs bit
        if r >> width:
            particular |= 1 << p
    pivot_mask = 0
    for p in pivots:
        pivot_mask |= 1 << p
    kernel: list[int] = []
    for f in range(width):
        if (pivot_mask >> f) & 1:
            continue
        vec = 1 << f
        for p, r in zip(pivots, pivot_rows):
            if (r >> f) & 1:
                vec |= 1 << p
        kernel.append(vec)
    return particular, kernel


def min_solution(rows: list[int], rhs: list[int], width: int) -> int | None:
    """Solution of the affine system minimizing ``sum(t_i * 2**i)``.

    Greedy from the high bit down: at each position prefer 0, consuming one
    kernel generator whenever the bit has to be toggled or pinned.
    """
    sol = solve(rows, rhs, width)
    if sol is None:
        return None
    t, kernel = sol
    basis = list(kernel)
    for i in range(width - 1, -1, -1):
        pick = None
        for k, v in enumerate(basis):
            if (v >> i) & 1:
                pick = k
                break
        if pick is None:
            continue
        v = basis.pop(pick)
        if (t >> i) & 1:
            t ^= v
        basis = [b ^ v if (b >> i) & 1 else b for b in basis]
    return t


def lex_min_support(rows: list[int], rhs: list[int], width: int) -> int | None:
    """Solution whose support, as an ascending index tuple, is lex-smallest.

    An empty tail beats any continuation, and a support touching index i
    beats every support whose first remaining index is larger, so each
    step first tries to zero the tail outright and otherwise pins bit i
    on when the kernel allows it.
    """
    sol = solve(rows, rhs, width)
    if sol is None:
        return None
    t, kernel = sol
    basis = list(kernel)
    for i in range(width):
        # basis vectors have no bits below i, so clearing the tail
        # cannot disturb the decided prefix
        pivots, reduced = rref(basis, width)
        tail = t >> i << i
        if in_rowspace(tail, pivots, reduced):
            return t ^ tail
        pick = None
        for k, v in enumerate(basis):
            if (v >> i) & 1:
                pick = k
                break
        if pick is None:
            continue
        v = basis.pop(pick)
        if not (t >> i) & 1:
            t ^= v
        basis = [b ^ v if (b >> i) & 1 else b for b in basis]
    return t
