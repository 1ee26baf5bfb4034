import numpy as np
import pytest

from nsfsim.errors import OracleError, ZeroProbabilityError
from nsfsim.oracle import (
    DenseState,
    apply_pauli_left,
    apply_pauli_right,
    gate_unitary,
    pauli_matrix,
)
from nsfsim.pauli import PauliString

from conftest import random_pauli


def test_pauli_matrix_basics():
    x = pauli_matrix(PauliString.from_text("X"))
    z = pauli_matrix(PauliString.from_text("Z"))
    y = pauli_matrix(PauliString.from_text("Y"))
    assert np.allclose(x, [[0, 1], [1, 0]])
    assert np.allclose(z, [[1, 0], [0, -1]])
    assert np.allclose(y, [[0, -1j], [1j, 0]])
    assert np.allclose(
        pauli_matrix(PauliString.from_text("XZ")), np.kron(x, z)
    )
    assert np.allclose(
        pauli_matrix(PauliString.from_text("-Y")), -y
    )


def test_sparse_action_matches_matmul():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        p = random_pauli(rng, n)
        dim = 1 << n
        rho = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m = pauli_matrix(p)
        assert np.allclose(apply_pauli_left(p, rho), m @ rho, atol=1e-12)
        assert np.allclose(apply_pauli_right(p, rho), rho @ m, atol=1e-12)


def test_gate_unitaries_are_unitary():
    for gate, qubits in [
        ("H", (0,)),
        ("S", (2,)),
        ("SDG", (1,)),
        ("CNOT", (0, 2)),
        ("CNOT", (2, 0)),
        ("CZ", (1, 2)),
        ("RZ", (1,)),
    ]:
        u = gate_unitary(gate, qubits, 3, theta=0.7)
        assert np.allclose(u @ u.conj().T, np.eye(8), atol=1e-12)


def test_rz_phases():
    u = gate_unitary("RZ", (0,), 1, theta=np.pi / 2)
    want = np.diag([np.exp(-1j * np.pi / 4), np.exp(1j * np.pi / 4)])
    assert np.allclose(u, want, atol=1e-12)


def test_channel_preserves_trace_and_hermiticity():
    st = DenseState(2)
    st.apply_gate("H", (0,))
    st.apply_gate("CNOT", (0, 1))
    p = 0.2
    terms = [(1 - p, PauliString.from_text("II"))]
    terms += [
        (p / 3, PauliString.from_text(t)) for t in ("XI", "YI", "ZI")
    ]
    st.apply_channel(terms)
    assert abs(st.trace() - 1) < 1e-12
    assert np.allclose(st.rho, st.rho.conj().T, atol=1e-12)


def test_measurement_statistics_on_plus():
    st = DenseState(1)
    st.apply_gate("H", (0,))
    z = PauliString.from_text("Z")
    outcome, prob = st.measure(z, outcome=1)
    assert outcome == 1
    assert abs(prob - 0.5) < 1e-12
    assert abs(st.expectation(z) - 1) < 1e-12
    assert abs(st.weight - 0.5) < 1e-12


def test_measurement_zero_probability():
    st = DenseState(1)
    z = PauliString.from_text("Z")
    with pytest.raises(ZeroProbabilityError):
        st.measure(z, outcome=-1)


def test_from_stabilizers_ghz():
    rows = [
        PauliString.from_text("XXX"),
        PauliString.from_text("ZZI"),
        PauliString.from_text("IZZ"),
    ]
    st = DenseState.from_stabilizers(rows)
    ghz = np.zeros(8, dtype=complex)
    ghz[0] = ghz[7] = 1 / np.sqrt(2)
    assert np.allclose(st.rho, np.outer(ghz, ghz.conj()), atol=1e-12)


def test_reduced_and_trace_out():
    st = DenseState(3)
    st.apply_gate("H", (0,))
    st.apply_gate("CNOT", (0, 1))
    st.apply_gate("CNOT", (1, 2))
    bell_mass = np.zeros((4, 4), dtype=complex)
    bell_mass[0, 0] = bell_mass[3, 3] = 0.5
    assert np.allclose(st.reduced([0, 1]), bell_mass, atol=1e-12)
    assert np.allclose(st.reduced([2]), np.eye(2) / 2, atol=1e-12)
    st.trace_out(1)
    assert st.n == 2
    assert np.allclose(st.rho, bell_mass, atol=1e-12)


def test_dense_evolution_matches_statevector_kron():
    # simple cross-check: H then CNOT builds the Bell state
    st = DenseState(2)
    st.apply_gate("H", (0,))
    st.apply_gate("CNOT", (0, 1))
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    assert np.allclose(st.rho, np.outer(bell, bell.conj()), atol=1e-12)


def test_general_channel_rz_terms():
    # Rz(t) acting by conjugation equals its Pauli-pair expansion
    theta = 0.9
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    ident = PauliString.from_text("I")
    zed = PauliString.from_text("Z")
    st = DenseState(1)
    st.apply_gate("H", (0,))
    expanded = st.copy()
    expanded.apply_general_channel(
        [
            (c * c, ident, ident),
            (1j * c * s, ident, zed),
            (-1j * c * s, zed, ident),
            (s * s, zed, zed),
        ]
    )
    st.apply_gate("RZ", (0,), theta=theta)
    assert np.allclose(expanded.rho, st.rho, atol=1e-12)


def test_qubit_cap():
    with pytest.raises(OracleError):
        DenseState(13)
