"""Dense density-matrix reference simulation.

Small, slow, and written against the raw linear algebra so it shares no code
with the analytic engine.  Everything else in the package is tested against
this module.  Capped at 12 qubits.

Index convention: qubit 0 is the most significant bit of the basis index,
matching the text form where qubit 0 is the leftmost character.
"""

from __future__ import annotations

import numpy as np

from .errors import OracleError, ZeroProbabilityError
from .pauli import PauliString

MAX_QUBITS = 12
ZERO_PROB = 1e-14

_GATES_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_GATES_2Q = {
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}


def _index_masks(p: PauliString) -> tuple[int, int]:
    """Map qubit-indexed x/z bits to basis-index bit positions."""
    xm = zm = 0
    for j in range(p.n):
        pos = p.n - 1 - j
        if p.x >> j & 1:
            xm |= 1 << pos
        if p.z >> j & 1:
            zm |= 1 << pos
    return xm, zm


def _pauli_scalar(p: PauliString) -> complex:
    return p.sign * (1j) ** ((p.x & p.z).bit_count() % 4)


def pauli_column_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Sparse action of p: column i maps to perm[i] with amplitude coef[i].

    p |i> == coef[i] |perm[i]>.
    """
    dim = 1 << p.n
    xm, zm = _index_masks(p)
    idx = np.arange(dim, dtype=np.uint64)
    perm = (idx ^ np.uint64(xm)).astype(np.int64)
    par = (np.bitwise_count(idx & np.uint64(zm)) & np.uint64(1)).astype(np.float64)
    coef = _pauli_scalar(p) * (1.0 - 2.0 * par)
    return perm, coef


def pauli_matrix(p: PauliString) -> np.ndarray:
    dim = 1 << p.n
    perm, coef = pauli_column_action(p)
    m = np.zeros((dim, dim), dtype=complex)
    m[perm, np.arange(dim)] = coef
    return m


def apply_pauli_left(p: PauliString, rho: np.ndarray) -> np.ndarray:
    """p @ rho without building the dense matrix for p."""
    perm, coef = pauli_column_action(p)
    out = np.empty_like(rho)
    out[perm, :] = coef[:, None] * rho
    return out


def apply_pauli_right(p: PauliString, rho: np.ndarray) -> np.ndarray:
    """rho @ p.  Column c of the product is rho[:, perm[c]] * coef[c]."""
    perm, coef = pauli_column_action(p)
    return rho[:, perm] * coef[None, :]


def _embed_unitary(u: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Full 2^n unitary for a small gate on the given qubits."""
    k = len(qubits)
    assert u.shape == (1 << k, 1 << k)
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        sub = 0
        for a, q in enumerate(qubits):
            sub |= ((col >> (n - 1 - q)) & 1) << (k - 1 - a)
        for sub2 in range(1 << k):
            amp = u[sub2, sub]
            if amp == 0:
                continue
            row = col
            for a, q in enumerate(qubits):
                bit = (sub2 >> (k - 1 - a)) & 1
                pos = n - 1 - q
                row = (row & ~(1 << pos)) | (bit << pos)
            full[row, col] += amp
    return full


def gate_unitary(gate: str, qubits: tuple[int, ...], n: int, theta: float = 0.0) -> np.ndarray:
    if gate == "RZ":
        u = np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    elif gate in _GATES_1Q:
        u = _GATES_1Q[gate]
    elif gate in _GATES_2Q:
        u = _GATES_2Q[gate]
    else:
        raise ValueError(f"unknown gate {gate!r}")
    return _embed_unitary(u, qubits, n)


class DenseState:
    """Mutable dense density matrix with post-selection bookkeeping.

    `weight` accumulates the probability of every forced measurement outcome,
    so after a run it equals the probability of the recorded branch.
    """

    def __init__(self, n: int, rho: np.ndarray | None = None):
        if n > MAX_QUBITS:
            raise OracleError(f"dense reference capped at {MAX_QUBITS} qubits, got {n}")
        self.n = n
        dim = 1 << n
        if rho is None:
            rho = np.zeros((dim, dim), dtype=complex)
            rho[0, 0] = 1.0
        assert rho.shape == (dim, dim)
        self.rho = rho.astype(complex)
        self.weight = 1.0

    def copy(self) -> "DenseState":
        out = DenseState(self.n, self.rho.copy())
        out.weight = self.weight
        return out

    @staticmethod
    def from_stabilizers(rows: list[PauliString]) -> "DenseState":
        n = rows[0].n
        if n > MAX_QUBITS:
            raise OracleError(f"dense reference capped at {MAX_QUBITS} qubits, got {n}")
        rho = np.eye(1 << n, dtype=complex)
        for g in rows:
            rho = (rho + apply_pauli_left(g, rho)) / 2.0
        tr = np.trace(rho).real
        if not np.isclose(tr, 1.0, atol=1e-9):
            raise OracleError(f"stabilizer list does not define a state (trace {tr})")
        out = DenseState(n, rho)
        return out

    def apply_gate(self, gate: str, qubits: tuple[int, ...], theta: float = 0.0):
        u = gate_unitary(gate, qubits, self.n, theta)
        self.rho = u @ self.rho @ u.conj().T

    def apply_channel(self, terms: list[tuple[float, PauliString]]):
        """rho <- sum_j w_j N_j rho N_j (weights may be negative)."""
        out = np.zeros_like(self.rho)
        for w, op in terms:
            out += w * apply_pauli_right(op, apply_pauli_left(op, self.rho))
        self.rho = out

    def apply_general_channel(self, terms: list[tuple[complex, PauliString, PauliString]]):
        """rho <- sum_j a_j P_j rho Q_j."""
        out = np.zeros_like(self.rho)
        for a, left, right in terms:
            out += a * apply_pauli_right(right, apply_pauli_left(left, self.rho))
        self.rho = out

    def expectation(self, p: PauliString) -> float:
        val = np.trace(apply_pauli_left(p, self.rho))
        assert abs(val.imag) < 1e-9, f"non-real expectation {val}"
        return float(val.real)

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def measure(self, p: PauliString, outcome: int | None = None, rng=None):
        """Projective measurement of a Pauli observable.

        Returns (outcome, probability-of-that-outcome).  With `outcome` given
        the state is post-selected and `weight` picks up the probability.
        """
        tr = self.trace()
        exp = self.expectation(p) / tr
        forced = outcome is not None
        if outcome is None:
            prob_plus = (1.0 + exp) / 2.0
            if rng is None:
                rng = np.random.default_rng()
            outcome = 1 if rng.random() < prob_plus else -1
        prob = (1.0 + outcome * exp) / 2.0
        if prob < ZERO_PROB:
            raise ZeroProbabilityError(
                f"outcome {outcome:+d} of {p} has probability {prob}"
            )
        proj_rho = (
            self.rho
            + outcome * apply_pauli_left(p, self.rho)
            + outcome * apply_pauli_right(p, self.rho)
            + apply_pauli_right(p, apply_pauli_left(p, self.rho))
        ) / 4.0
        self.rho = proj_rho / prob
        if forced:
            self.weight *= prob
        return outcome, prob

    def trace_out(self, q: int):
        """Partial trace over one qubit; remaining qubits keep their order."""
        n = self.n
        t = self.rho.reshape((2,) * (2 * n))
        t = np.trace(t, axis1=q, axis2=n + q)
        self.n = n - 1
        self.rho = t.reshape((1 << self.n, 1 << self.n))

    def reduced(self, qubits: list[int]) -> np.ndarray:
        """Density matrix of the listed qubits (in list order)."""
        state = self.copy()
        others = [q for q in range(self.n) if q not in qubits]
        for q in sorted(others, reverse=True):
            state.trace_out(q)
        kept_sorted = sorted(qubits)
        k = len(qubits)
        pos = [kept_sorted.index(q) for q in qubits]
        if pos != list(range(k)):
            t = state.rho.reshape((2,) * (2 * k))
            t = np.transpose(t, pos + [k + p for p in pos])
            state.rho = t.reshape((1 << k, 1 << k))
        return state.rho
