"""Destabilizer-augmented stabilizer tableau.

Rows live in packed bitplanes: for each qubit q, ``xs[q]`` and ``zs[q]``
hold one bit per row, rows 0..n-1 the destabilizers d_i and rows n..2n-1
the stabilizers g_i.  ``signs`` packs the per-row sign bit the same way.
Row d_i anticommutes with g_i and commutes with every other row, which is
what lets deterministic measurement outcomes and group decompositions be
read off without Gaussian elimination per query.
"""

from __future__ import annotations

from . import f2
from .errors import FactorError, ZeroProbabilityError
from .pauli import _PHASE, CLIFFORD_GATES, GATE_ARITY, PauliString


class StabilizerTableau:
    __slots__ = ("n", "xs", "zs", "signs")

    def __init__(self, n: int, xs: list[int], zs: list[int], signs: int):
        self.n = n
        self.xs = xs
        self.zs = zs
        self.signs = signs

    @classmethod
    def new_computational(cls, n: int) -> "StabilizerTableau":
        """|0...0>: stabilizers Z_i, destabilizers X_i, all signs +1."""
        if n < 1:
            raise ValueError("tableau needs at least one qubit")
        xs = [1 << q for q in range(n)]
        zs = [1 << (n + q) for q in range(n)]
        return cls(n, xs, zs, 0)

    @classmethod
    def from_rows(
        cls,
        destabilizers: list[PauliString],
        stabilizers: list[PauliString],
        validate: bool = True,
    ) -> "StabilizerTableau":
        n = len(stabilizers)
        if len(destabilizers) != n or n == 0:
            raise ValueError("need n destabilizer and n stabilizer rows")
        xs = [0] * n
        zs = [0] * n
        signs = 0
        for r, row in enumerate(destabilizers + stabilizers):
            if row.n != n:
                raise ValueError("row width does not match qubit count")
            for q in range(n):
                xs[q] |= (row.x >> q & 1) << r
                zs[q] |= (row.z >> q & 1) << r
            if row.sign < 0:
                signs |= 1 << r
        t = cls(n, xs, zs, signs)
        if validate:
            t.check_invariants()
        return t

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.n, list(self.xs), list(self.zs), self.signs)

    # -- row access ----------------------------------------------------

    def row(self, r: int) -> PauliString:
        x = 0
        z = 0
        for q in range(self.n):
            x |= (self.xs[q] >> r & 1) << q
            z |= (self.zs[q] >> r & 1) << q
        sign = -1 if self.signs >> r & 1 else 1
        return PauliString(self.n, x, z, sign)

    def destabilizer(self, i: int) -> PauliString:
        return self.row(i)

    def stabilizer(self, i: int) -> PauliString:
        return self.row(self.n + i)

    def stabilizers(self) -> list[PauliString]:
        return [self.row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    # -- Clifford conjugation ------------------------------------------

    def apply_clifford(self, gate: str, qubits: tuple[int, ...]) -> None:
        """Replace every row by C row C^dag, updating signs in bulk."""
        if gate not in CLIFFORD_GATES:
            raise ValueError(f"not a Clifford gate: {gate!r}")
        if len(qubits) != GATE_ARITY[gate] or len(set(qubits)) != len(qubits):
            raise ValueError(f"bad qubit tuple for {gate}: {qubits}")
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValueError(f"qubit {q} out of range")
        xs, zs = self.xs, self.zs
        if gate == "H":
            q = qubits[0]
            self.signs ^= xs[q] & zs[q]
            xs[q], zs[q] = zs[q], xs[q]
        elif gate == "S":
            q = qubits[0]
            self.signs ^= xs[q] & zs[q]
            zs[q] ^= xs[q]
        elif gate == "SDG":
            q = qubits[0]
            self.signs ^= xs[q] & ~zs[q]
            zs[q] ^= xs[q]
        elif gate == "X":
            self.signs ^= zs[qubits[0]]
        elif gate == "Y":
            q = qubits[0]
            self.signs ^= xs[q] ^ zs[q]
        elif gate == "Z":
            self.signs ^= xs[qubits[0]]
        elif gate == "CNOT":
            c, t = qubits
            self.signs ^= xs[c] & zs[t] & ~(xs[t] ^ zs[c])
            xs[t] ^= xs[c]
            zs[c] ^= zs[t]
        elif gate == "CZ":
            a, b = qubits
            # sign rule reads the pre-update z bits
            self.signs ^= xs[a] & xs[b] & (zs[a] ^ zs[b])
            zs[a] ^= xs[b]
            zs[b] ^= xs[a]
        else:  # pragma: no cover
            raise AssertionError(gate)

    # -- commutation queries -------------------------------------------

    def anticommute_mask(self, p: PauliString) -> int:
        """Bit r set iff row r anticommutes with p (sign-independent)."""
        acc = 0
        m = p.x
        while m:
            q = (m & -m).bit_length() - 1
            acc ^= self.zs[q]
            m &= m - 1
        m = p.z
        while m:
            q = (m & -m).bit_length() - 1
            acc ^= self.xs[q]
            m &= m - 1
        return acc

    def rowmul(self, dst: int, src: int) -> None:
        """row dst := row src * row dst; the product must be Hermitian."""
        e = 0
        if self.signs >> src & 1:
            e += 2
        if self.signs >> dst & 1:
            e += 2
        for q in range(self.n):
            idx = (
                (self.xs[q] >> src & 1) << 3
                | (self.zs[q] >> src & 1) << 2
                | (self.xs[q] >> dst & 1) << 1
                | (self.zs[q] >> dst & 1)
            )
            e += _PHASE[idx]
            self.xs[q] ^= (self.xs[q] >> src & 1) << dst
            self.zs[q] ^= (self.zs[q] >> src & 1) << dst
        e %= 4
        assert e % 2 == 0, "anti-Hermitian row product"
        self.signs &= ~(1 << dst)
        if e == 2:
            self.signs |= 1 << dst

    # -- measurement ---------------------------------------------------

    def classify_measurement(self, p: PauliString):
        """('random', l) with l the lowest anticommuting stabilizer index,
        or ('deterministic', sign) when +-p is in the group."""
        if p.is_identity_bits():
            raise ValueError("cannot measure the identity")
        mask = self.anticommute_mask(p)
        stab_mask = mask >> self.n
        if stab_mask:
            return ("random", (stab_mask & -stab_mask).bit_length() - 1)
        return ("deterministic", self._member_sign(p, mask & ((1 << self.n) - 1)))

    def _member_sign(self, p: PauliString, beta: int) -> int:
        """Sign s with p == s * (product of stabilizers selected by beta)."""
        base = PauliString.identity(self.n)
        e = 0
        m = beta
        while m:
            i = (m & -m).bit_length() - 1
            base, de = base.mul_phase(self.row(self.n + i))
            e = (e + de) % 4
            m &= m - 1
        assert e % 2 == 0, "group product picked up a stray i"
        assert base.x == p.x and base.z == p.z, "destabilizer pairing broken"
        return p.sign * (1 if e == 0 else -1)

    def measure_pauli(self, p: PauliString, outcome: int | None = None, rng=None):
        """Measure p; returns (outcome, was_random).

        Forced outcomes let callers enumerate branches without an RNG.
        Forcing the wrong sign of a deterministic observable raises.
        """
        kind, val = self.classify_measurement(p)
        if kind == "deterministic":
            if outcome is not None and outcome != val:
                raise ZeroProbabilityError(
                    f"forced outcome {outcome:+d} has probability zero"
                )
            return (val, False)
        l = val
        witness = self.n + l
        mask = self.anticommute_mask(p)
        mask &= ~(1 << witness)
        mask &= ~(1 << l)  # partner destabilizer is overwritten below
        m = mask
        while m:
            r = (m & -m).bit_length() - 1
            self.rowmul(r, witness)
            m &= m - 1
        if outcome is None:
            if rng is None:
                raise ValueError("random measurement needs a forced outcome or rng")
            outcome = 1 if rng.random() < 0.5 else -1
        # d_l := old g_l, then g_l := outcome * p
        for q in range(self.n):
            self._set_bit(self.xs, q, l, self.xs[q] >> witness & 1)
            self._set_bit(self.zs, q, l, self.zs[q] >> witness & 1)
            self._set_bit(self.xs, q, witness, p.x >> q & 1)
            self._set_bit(self.zs, q, witness, p.z >> q & 1)
        self.signs &= ~(1 << l)
        if self.signs >> witness & 1:
            self.signs |= 1 << l
        self.signs &= ~(1 << witness)
        if outcome * p.sign < 0:
            self.signs |= 1 << witness
        return (outcome, True)

    @staticmethod
    def _set_bit(planes: list[int], q: int, r: int, bit: int) -> None:
        planes[q] = planes[q] & ~(1 << r) | bit << r

    def is_member(self, p: PauliString) -> int:
        """+1 or -1 when p is (+-) a stabilizer group element, else 0."""
        if p.is_identity_bits():
            return 1 if p.sign > 0 else 0
        mask = self.anticommute_mask(p)
        if mask >> self.n:
            return 0
        return self._member_sign(p, mask & ((1 << self.n) - 1))

    def decompose_in_basis(self, p: PauliString) -> tuple[int, int]:
        """(alpha, beta) with p ~ d^alpha g^beta up to phase;
        alpha_i = [p, g_i], beta_i = [p, d_i] as anticommutation bits."""
        mask = self.anticommute_mask(p)
        return (mask >> self.n, mask & ((1 << self.n) - 1))

    # -- factoring and qubit removal -----------------------------------

    def factor_qubit(self, v: int) -> PauliString | None:
        """The signed single-qubit stabilizer on v, or None if entangled."""
        if not 0 <= v < self.n:
            raise ValueError(f"qubit {v} out of range")
        for kind in "ZXY":
            p = PauliString.single(self.n, v, kind)
            s = self.is_member(p)
            if s:
                return PauliString.single(self.n, v, kind, s)
        return None

    def trace_out(self, v: int) -> "StabilizerTableau":
        """Tableau on n-1 qubits after dropping the factorized qubit v."""
        factor = self.factor_qubit(v)
        if factor is None:
            raise FactorError(f"qubit {v} is entangled and cannot be traced out")
        if self.n == 1:
            raise FactorError("cannot trace out the last qubit")
        t = self.copy()
        n = t.n
        # Rotate the generating set so one stabilizer row is exactly the
        # single-qubit factor and no other stabilizer touches v.
        _, beta = t.decompose_in_basis(factor)
        j = (beta & -beta).bit_length() - 1
        m = beta & ~(1 << j)
        while m:
            i = (m & -m).bit_length() - 1
            t.rowmul(n + j, n + i)
            m &= m - 1
        touching = (t.xs[v] | t.zs[v]) >> n & ~(1 << j)
        while touching:
            i = (touching & -touching).bit_length() - 1
            t.rowmul(n + i, n + j)
            touching &= touching - 1
        pure = t.row(n + j)
        assert pure.x == factor.x and pure.z == factor.z
        keep = [q for q in range(n) if q != v]
        stabs = [
            t.row(n + i).restrict(keep) for i in range(n) if i != j
        ]
        destabs = self._rebuild_destabilizers(stabs)
        return StabilizerTableau.from_rows(destabs, stabs, validate=False)

    @staticmethod
    def _rebuild_destabilizers(stabs: list[PauliString]) -> list[PauliString]:
        """Solve for rows pairing off against the given stabilizers.

        Unknown rows are (x | z << m) vectors; [A, B] is linear in A's
        bits with coefficient vector (B.z | B.x << m).  Each solve also
        pins commutation with the destabilizers found so far, keeping the
        full tableau invariants.  Signs are gauged to +1.
        """
        m = len(stabs)
        width = 2 * m
        rows = [g.z | g.x << m for g in stabs]
        out: list[PauliString] = []
        for i in range(m):
            rhs = [1 if k == i else 0 for k in range(len(rows))]
            sol = f2.solve(rows, rhs, width)
            assert sol is not None, "no symplectic partner found"
            bits = sol[0]
            out.append(PauliString(m, bits & ((1 << m) - 1), bits >> m))
            rows.append(out[-1].z | out[-1].x << m)
        return out

    # -- validation and debug ------------------------------------------

    def check_invariants(self) -> None:
        n = self.n
        rows = [self.row(r) for r in range(2 * n)]
        for i in range(2 * n):
            for j in range(i + 1, 2 * n):
                want = 1 if (i < n and j == i + n) else 0
                got = rows[i].commutes(rows[j])
                if got != want:
                    raise ValueError(f"rows {i},{j}: commutation {got} != {want}")
        vecs = [r.x | r.z << n for r in rows]
        pivots, _ = f2.rref(vecs, 2 * n)
        if len(pivots) != 2 * n:
            raise ValueError("tableau rows are linearly dependent")

    def dump(self) -> str:
        lines = [self.row(r).to_text() for r in range(self.n)]
        lines.append("---")
        lines.extend(self.row(self.n + r).to_text() for r in range(self.n))
        return "\n".join(lines)
