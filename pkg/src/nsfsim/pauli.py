"""Packed-bit Pauli strings with exact sign tracking.

A PauliString stores one X bit and one Z bit per qubit in two Python ints
(bit j = qubit j) plus a sign in {+1, -1}.  The operator it denotes is

    (-1)^s * prod_j i^(x_j z_j) X_j^(x_j) Z_j^(z_j)

so every tensor factor is one of I, X, Y, Z and the whole string is
Hermitian.  Products of anticommuting strings pick up odd powers of i and
cannot be represented; `mul` rejects them, `mul_phase` exposes the phase.

Text form: optional +/- prefix, then one of "IXYZ" per qubit with qubit 0
leftmost, e.g. "-XIZ".
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PauliPhaseError
from .f2 import parity

_CHARS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_NAMES = {v: k for k, v in _CHARS.items()}

# i-exponent picked up when the single-qubit factor (x1,z1) is multiplied by
# (x2,z2), for the canonical form above.  Index: x1<<3 | z1<<2 | x2<<1 | z2.
_PHASE = [0] * 16
for _x1 in (0, 1):
    for _z1 in (0, 1):
        for _x2 in (0, 1):
            for _z2 in (0, 1):
                if (_x1, _z1) == (0, 0):
                    _g = 0
                elif (_x1, _z1) == (1, 1):
                    _g = _z2 - _x2
                elif (_x1, _z1) == (1, 0):
                    _g = _z2 * (2 * _x2 - 1)
                else:
                    _g = _x2 * (1 - 2 * _z2)
                _PHASE[_x1 << 3 | _z1 << 2 | _x2 << 1 | _z2] = _g % 4


@dataclass(frozen=True)
class PauliString:
    """Immutable signed Pauli operator on ``n`` qubits."""

    n: int
    x: int
    z: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("x/z bits outside the qubit register")

    @staticmethod
    def identity(n: int) -> "PauliString":
        return PauliString(n, 0, 0, 1)

    @staticmethod
    def single(n: int, q: int, kind: str, sign: int = 1) -> "PauliString":
        """Single-qubit X/Y/Z (or I) embedded in an n-qubit register."""
        x, z = _CHARS[kind]
        return PauliString(n, x << q, z << q, sign)

    @staticmethod
    def from_text(text: str, n: int | None = None) -> "PauliString":
        sign = 1
        body = text.strip()
        if body[:1] in "+-":
            sign = -1 if body[0] == "-" else 1
            body = body[1:]
        if not body:
            raise ValueError(f"empty Pauli text {text!r}")
        if n is not None and len(body) != n:
            raise ValueError(f"expected {n} Pauli characters, got {len(body)}")
        x = z = 0
        for j, c in enumerate(body):
            if c not in _CHARS:
                raise ValueError(f"invalid Pauli character {c!r} in {text!r}")
            cx, cz = _CHARS[c]
            x |= cx << j
            z |= cz << j
        return PauliString(len(body), x, z, sign)

    def to_text(self) -> str:
        body = "".join(
            _NAMES[(self.x >> j & 1, self.z >> j & 1)] for j in range(self.n)
        )
        return ("-" if self.sign < 0 else "") + body

    __str__ = to_text

    def commutes(self, other: "PauliString") -> int:
        """Symplectic parity: 0 if the operators commute, 1 if not."""
        if self.n != other.n:
            raise ValueError(f"width mismatch: {self.n} vs {other.n}")
        return parity(self.x & other.z) ^ parity(self.z & other.x)

    def mul_phase(self, other: "PauliString") -> tuple["PauliString", int]:
        """Full product as (unsigned canonical string, i-exponent mod 4).

        ``self * other == i**e * result`` with ``result.sign == +1``.
        """
        if self.n != other.n:
            raise ValueError(f"width mismatch: {self.n} vs {other.n}")
        e = 0
        both = (self.x | self.z) & (other.x | other.z)
        while both:
            q = (both & -both).bit_length() - 1
            both &= both - 1
            idx = (
                (self.x >> q & 1) << 3
                | (self.z >> q & 1) << 2
                | (other.x >> q & 1) << 1
                | (other.z >> q & 1)
            )
            e += _PHASE[idx]
        if self.sign < 0:
            e += 2
        if other.sign < 0:
            e += 2
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z, 1), e % 4

    def mul(self, other: "PauliString") -> "PauliString":
        """Hermitian product.  Raises PauliPhaseError if the inputs anticommute."""
        base, e = self.mul_phase(other)
        if e & 1:
            raise PauliPhaseError(
                f"({self}) * ({other}) is anti-Hermitian (phase i^{e})"
            )
        return base if e == 0 else PauliString(base.n, base.x, base.z, -1)

    __mul__ = mul

    def negate(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, -self.sign)

    def support(self) -> set[int]:
        """Qubit indices acted on non-trivially."""
        m = self.x | self.z
        out = set()
        while m:
            out.add((m & -m).bit_length() - 1)
            m &= m - 1
        return out

    def support_mask(self) -> int:
        return self.x | self.z

    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def is_identity_bits(self) -> bool:
        return self.x == 0 and self.z == 0

    def restrict(self, qubits: list[int]) -> "PauliString":
        """Project onto ``qubits`` (new index = position in the list).

        The sign is kept; factors outside the list are dropped, so this is
        only meaningful when the caller knows those factors are I or are
        being traced over.
        """
        x = z = 0
        for new, old in enumerate(qubits):
            x |= (self.x >> old & 1) << new
            z |= (self.z >> old & 1) << new
        return PauliString(len(qubits), x, z, self.sign)

    def embed(self, n: int, qubits: list[int]) -> "PauliString":
        """Inverse of restrict: place factor j on ``qubits[j]`` of an n-register."""
        assert len(qubits) == self.n
        x = z = 0
        for old, new in enumerate(qubits):
            x |= (self.x >> old & 1) << new
            z |= (self.z >> old & 1) << new
        return PauliString(n, x, z, self.sign)

    def apply_gate(self, gate: str, qubits: tuple[int, ...]) -> "PauliString":
        """Conjugate by a Clifford gate: returns U self U^dagger."""
        x, z, s = self.x, self.z, 0
        if gate == "H":
            (q,) = qubits
            b = 1 << q
            s = x & z & b
            xq, zq = x & b, z & b
            x = (x & ~b) | zq
            z = (z & ~b) | xq
        elif gate == "S":
            (q,) = qubits
            b = 1 << q
            s = x & z & b
            z ^= x & b
        elif gate == "SDG":
            (q,) = qubits
            b = 1 << q
            s = x & ~z & b
            z ^= x & b
        elif gate == "X":
            (q,) = qubits
            s = z & (1 << q)
        elif gate == "Y":
            (q,) = qubits
            s = (x ^ z) & (1 << q)
        elif gate == "Z":
            (q,) = qubits
            s = x & (1 << q)
        elif gate == "CNOT":
            c, t = qubits
            bc, bt = 1 << c, 1 << t
            xc, zt = x & bc, z & bt
            if xc and zt and bool(x & bt) == bool(z & bc):
                s = 1
            if xc:
                x ^= bt
            if zt:
                z ^= bc
        elif gate == "CZ":
            a, b_ = qubits
            ba, bb = 1 << a, 1 << b_
            if (x & ba) and (x & bb) and bool(z & ba) != bool(z & bb):
                s = 1
            if x & bb:
                z ^= ba
            if x & ba:
                z ^= bb
        else:
            raise ValueError(f"unknown Clifford gate {gate!r}")
        sign = -self.sign if s else self.sign
        return PauliString(self.n, x, z, sign)


CLIFFORD_GATES = ("H", "S", "SDG", "X", "Y", "Z", "CNOT", "CZ")
GATE_ARITY = {"H": 1, "S": 1, "SDG": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2, "CZ": 2}
