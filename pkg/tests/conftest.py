import numpy as np

ONE_QUBIT_GATES = ["H", "S", "SDG", "X", "Y", "Z"]
TWO_QUBIT_GATES = ["CNOT", "CZ"]


def random_clifford_ops(rng: np.random.Generator, n: int, depth: int):
    """Gate list drawn uniformly; two-qubit gates only when n allows."""
    ops = []
    for _ in range(depth):
        if n >= 2 and rng.random() < 0.4:
            gate = TWO_QUBIT_GATES[rng.integers(len(TWO_QUBIT_GATES))]
            a, b = rng.choice(n, size=2, replace=False)
            ops.append((gate, (int(a), int(b))))
        else:
            gate = ONE_QUBIT_GATES[rng.integers(len(ONE_QUBIT_GATES))]
            ops.append((gate, (int(rng.integers(n)),)))
    return ops


def random_pauli(rng: np.random.Generator, n: int, signed: bool = True):
    from nsfsim.pauli import PauliString

    sign = -1 if signed and rng.random() < 0.5 else 1
    return PauliString(
        n, int(rng.integers(1 << n)), int(rng.integers(1 << n)), sign
    )


def oracle_run(circuit, outcomes=None, rng=None):
    """Dense-matrix execution of a circuit.

    `outcomes` maps measurement labels to forced signs; unlisted labels are
    drawn from `rng`.  Returns (DenseState, {label: (outcome, prob)}).
    """
    from nsfsim import circuit as cm
    from nsfsim.oracle import DenseState

    if circuit.ops and isinstance(circuit.ops[0], cm.TableauInit):
        state = DenseState.from_stabilizers(list(circuit.ops[0].stabs))
        ops = circuit.ops[1:]
    else:
        state = DenseState(circuit.n)
        ops = circuit.ops
    recs = {}
    for op in ops:
        if isinstance(op, cm.Gate):
            state.apply_gate(op.kind, op.qubits)
        elif isinstance(op, cm.Rotation):
            state.apply_gate("RZ", (op.q,), theta=op.theta)
        elif isinstance(op, cm.CHANNEL_OPS):
            ch = op.channel(state.n)
            state.apply_channel([(t.coefficient(), t.op) for t in ch.terms])
        elif isinstance(op, cm.Measure):
            forced = op.forced
            if forced is None and outcomes is not None:
                forced = outcomes.get(op.label)
            out, prob = state.measure(op.obs, outcome=forced, rng=rng)
            recs[op.label] = (out, prob)
        elif isinstance(op, cm.TraceOut):
            state.trace_out(op.q)
        elif isinstance(op, cm.Record):
            pass
        else:
            raise AssertionError(f"unhandled op {op!r}")
    return state, recs
