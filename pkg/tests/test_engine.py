import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsfsim.circuit import Circuit, Corr, Depol1, Depol2, Gate, Measure, Rotation, parse
from nsfsim.engine import (
    BranchedState,
    BudgetError,
    FragmentError,
    GeneralState,
    NsfState,
    ParamExpr,
    process_nondeterministic,
    run,
)
from nsfsim.pauli import PauliString
from nsfsim.tableau import FactorError, StabilizerTableau, ZeroProbabilityError

from conftest import oracle_run, random_clifford_ops, random_pauli

P = PauliString.from_text


def build(text: str) -> Circuit:
    return parse("NSFC 1\n" + text)


def compare_all(state, dense, n, tol=1e-10):
    tr = dense.trace()
    worst = 0.0
    for x in range(1 << n):
        for z in range(1 << n):
            p = PauliString(n, x, z, 1)
            worst = max(worst, abs(state.expectation(p) - dense.expectation(p) / tr))
    assert worst <= tol, worst


def random_circuit(rng, n, n_ops, allow_rot=True):
    ops = []
    nm = 0
    for _ in range(n_ops):
        r = rng.random()
        if r < 0.45:
            g, qs = random_clifford_ops(rng, n, 1)[0]
            ops.append(Gate(g, qs))
        elif r < 0.65:
            k = rng.integers(3)
            if k == 0:
                ops.append(Depol1(int(rng.integers(n)), float(rng.uniform(0, 0.5))))
            elif k == 1 and n >= 2:
                a, b = rng.choice(n, 2, replace=False)
                ops.append(Depol2(int(a), int(b), float(rng.uniform(0, 0.5))))
            else:
                p = random_pauli(rng, n, signed=False)
                if p.is_identity_bits():
                    p = PauliString.single(n, 0, "X")
                ops.append(Corr(p, float(rng.uniform(0, 0.5))))
        elif r < 0.85 or not allow_rot:
            p = random_pauli(rng, n, signed=True)
            if p.is_identity_bits():
                p = PauliString.single(n, 0, "Z")
            ops.append(Measure(p, None, f"m{nm}", auto_label=True))
            nm += 1
        else:
            ops.append(Rotation(int(rng.integers(n)), float(rng.uniform(0, 2 * np.pi)), None))
    return Circuit(n, tuple(ops))


class TestNsfState:
    def test_depolarized_zero_state(self):
        state = process_nondeterministic(build("QUBITS 1\nDEPOL1 0 0.03\n"))
        assert state.expectation(P("Z")) == pytest.approx(0.96, abs=1e-12)
        assert state.expectation(P("X")) == 0.0

    def test_bell_with_correlated_noise(self):
        state = process_nondeterministic(
            build("QUBITS 2\nH 0\nCNOT 0 1\nCORR ZZ 0 1 0.2\n")
        )
        assert state.expectation(P("XX")) == 1.0
        assert state.expectation(P("ZZ")) == 1.0
        assert state.expectation(P("XI")) == 0.0

    def test_random_measurement_absorbs_noise(self):
        # CZ on |++> then phase noise on the measured qubit: the witness
        # rewrite pushes the error onto the neighbour
        circuit = build("QUBITS 2\nH 0\nH 1\nCZ 0 1\nCORR Z 0 0.3\nM X 0\n")
        state = process_nondeterministic(circuit, rng=np.random.default_rng(7))
        got = [(t.coefficient(), str(t.op)) for t in state.channels[0].terms]
        assert got == [(0.7, "II"), (0.3, "IX")]
        (rec,) = state.records
        assert rec.label == "m0" and rec.kind == "random" and rec.prob == 0.5
        assert rec.value in (1, -1)

    def test_forced_random_outcome(self):
        circuit = build("QUBITS 1\nM X 0 -> -1\n")
        state = process_nondeterministic(circuit)
        assert state.records[0].value == -1
        assert state.expectation(P("X")) == -1.0

    def test_deterministic_rejected(self):
        with pytest.raises(FragmentError, match="run\\(\\)"):
            process_nondeterministic(build("QUBITS 1\nM Z 0 -> +1\n"))

    def test_rotation_rejected(self):
        with pytest.raises(FragmentError, match="rotation"):
            process_nondeterministic(build("QUBITS 1\nRZ 0 0.5\n"))

    def test_trace_out_matches_oracle(self):
        circuit = build("QUBITS 2\nH 0\nH 1\nDEPOL2 0 1 0.3\nTRACEOUT 1\n")
        state = process_nondeterministic(circuit)
        dense, _ = oracle_run(circuit)
        assert state.n == 1
        compare_all(state, dense, 1, tol=1e-12)

    def test_copy_is_independent(self):
        state = process_nondeterministic(build("QUBITS 1\nDEPOL1 0 0.2\n"))
        clone = state.copy()
        clone.apply_gate("H", (0,))
        clone.channels[0].prune_zeros()
        assert state.expectation(P("Z")) == pytest.approx(1 - 4 * 0.2 / 3)
        assert state.tableau.dump() != clone.tableau.dump()

    def test_symbolic_numeric_expectation_guarded(self):
        state = process_nondeterministic(build("QUBITS 1\nPARAM p\nDEPOL1 0 p\n"))
        with pytest.raises(ValueError, match="expectation_parametric"):
            state.expectation(P("Z"))

    def test_channel_width_checked(self):
        state = NsfState(StabilizerTableau.new_computational(2))
        from nsfsim.noise import depolarizing1

        with pytest.raises(ValueError, match="width"):
            state.apply_channel(depolarizing1(0, 0.1, 1))


class TestParametric:
    def test_single_depolarizing_channel(self):
        state = process_nondeterministic(build("QUBITS 1\nPARAM p\nDEPOL1 0 p\n"))
        expr = state.expectation_parametric(P("Z"))
        for v in (0.0, 0.1, 0.3):
            assert expr.evaluate({"p": v}) == pytest.approx(1 - 4 * v / 3, abs=1e-15)
        assert expr.parameters() == {"p"}

    def test_evaluate_bit_identical_to_bound_run(self):
        text = (
            "QUBITS 2\nPARAM p q\nH 0\nDEPOL1 0 p\nCNOT 0 1\n"
            "DEPOL2 0 1 q\nCORR ZZ 0 1 p\nM X 0 -> +1\n"
        )
        state = process_nondeterministic(build(text))
        for obs in (P("XX"), P("XI"), P("ZZ"), P("IZ")):
            expr = state.expectation_parametric(obs)
            for pv, qv in ((0.0, 0.0), (0.12, 0.3), (0.7, 0.05)):
                asg = {"p": pv, "q": qv}
                late = state.bind(asg).expectation(obs)
                early = process_nondeterministic(build(text).bind(asg)).expectation(obs)
                assert expr.evaluate(asg) == late == early

    def test_nonmember_is_zero_expression(self):
        state = process_nondeterministic(build("QUBITS 1\nPARAM p\nDEPOL1 0 p\n"))
        expr = state.expectation_parametric(P("X"))
        assert expr.sign == 0
        assert expr.evaluate({"p": 0.4}) == 0.0
        assert expr.to_text() == "0"

    def test_expr_text_and_product(self):
        a = ParamExpr(1, [[(1, __import__("nsfsim.noise", fromlist=["Const"]).Const(0.5))]])
        b = ParamExpr(-1, [])
        c = a * b
        assert c.sign == -1 and len(c.factors) == 1
        assert a.to_text() == "(0.5)"
        assert b.to_text() == "-1"
        assert a.evaluate() == 0.5


class TestBranchedState:
    @pytest.mark.parametrize("outcome,prob", [(1, 0.8), (-1, 0.2)])
    def test_deterministic_split_matches_oracle(self, outcome, prob):
        sign = "+1" if outcome > 0 else "-1"
        circuit = build(f"QUBITS 1\nCORR X 0 0.2\nM Z 0 -> {sign}\n")
        state = run(circuit)
        assert isinstance(state, BranchedState)
        assert state.records[-1].prob == pytest.approx(prob, abs=1e-12)
        assert state.norm == pytest.approx(prob, abs=1e-12)
        dense, recs = oracle_run(circuit)
        assert recs["m0"][1] == pytest.approx(prob, abs=1e-12)
        compare_all(state, dense, 1, tol=1e-12)

    def test_outcome_probabilities_sum_to_one(self):
        text = "QUBITS 2\nH 0\nCNOT 0 1\nDEPOL1 1 0.3\nM ZZ 0 1 -> {}\n"
        plus = run(build(text.format("+1"))).records[-1].prob
        minus = run(build(text.format("-1"))).records[-1].prob
        assert plus + minus == pytest.approx(1.0, abs=1e-14)

    def test_repeat_measurement_is_certain(self):
        state = run(build("QUBITS 1\nCORR X 0 0.2\nM Z 0 -> +1\nM Z 0 -> +1\n"))
        assert state.records[-1].prob == 1.0
        assert len(state.terms) == 2  # overlay merge keeps the split compact

    def test_norm_tracks_forced_branch_weight(self):
        circuit = build("QUBITS 1\nCORR X 0 0.2\nM Z 0 -> +1\nX 0\nM Z 0 -> -1\n")
        state = run(circuit)
        dense, _ = oracle_run(circuit)
        assert state.norm == pytest.approx(dense.weight, abs=1e-12)

    def test_random_measurement_still_absorbs(self):
        circuit = build("QUBITS 2\nCORR X 0 0.2\nM Z 0 -> +1\nH 1\nM Z 1 -> -1\n")
        state = run(circuit)
        dense, _ = oracle_run(circuit)
        assert state.records[-1].kind == "random"
        assert state.norm == pytest.approx(0.8 * 0.5, abs=1e-12)
        compare_all(state, dense, 2, tol=1e-12)

    def test_single_term_degenerates_to_nsf(self):
        nsf = process_nondeterministic(build("QUBITS 1\nDEPOL1 0 0.1\n"))
        branched = BranchedState.from_nsf(nsf.copy())
        for obs in (P("Z"), P("X"), P("-Y")):
            assert branched.expectation(obs) == pytest.approx(
                nsf.expectation(obs), abs=1e-15
            )

    def test_budget(self):
        lines = "".join(
            f"CORR X {q} 0.1\nM Z {q} -> +1\n" for q in range(3) for _ in range(2)
        )
        with pytest.raises(BudgetError, match="budget 3"):
            run(build(f"QUBITS 3\n{lines}"), det_budget=3)

    def test_symbolic_weights_refused(self):
        with pytest.raises(FragmentError, match="bind"):
            run(build("QUBITS 1\nPARAM p\nDEPOL1 0 p\nM Z 0 -> +1\n"))

    def test_forced_impossible_outcome(self):
        with pytest.raises(ZeroProbabilityError):
            run(build("QUBITS 1\nM Z 0 -> -1\n"))


class TestGeneralState:
    def test_rz_on_plus_state(self):
        state = run(build("QUBITS 1\nH 0\nRZ 0 pi/4\n"))
        assert isinstance(state, GeneralState)
        assert state.expectation(P("X")) == pytest.approx(
            math.cos(math.pi / 4), abs=1e-12
        )
        assert state.expectation(P("Y")) == pytest.approx(
            math.sin(math.pi / 4), abs=1e-12
        )
        assert state.expectation(P("Z")) == pytest.approx(0.0, abs=1e-12)

    def test_t_gate_alias(self):
        state = run(build("QUBITS 1\nH 0\nT 0\n"))
        assert state.expectation(P("X")) == pytest.approx(
            math.cos(math.pi / 4), abs=1e-12
        )

    def test_zero_angle_keeps_single_term(self):
        state = run(build("QUBITS 1\nH 0\nRZ 0 0.0\n"))
        assert len(state.terms) == 1
        assert state.expectation(P("X")) == 1.0

    @pytest.mark.parametrize("theta", ["0.0", "pi/3"])
    @pytest.mark.parametrize("outcome", ["+1", "-1"])
    def test_random_measurement_after_rotation(self, theta, outcome):
        circuit = build(
            f"QUBITS 2\nH 0\nH 1\nCZ 0 1\nCORR Z 0 0.1\nRZ 0 {theta}\nM X 0 -> {outcome}\n"
        )
        state = run(circuit)
        dense, recs = oracle_run(circuit)
        assert state.records[-1].prob == pytest.approx(recs["m0"][1], abs=1e-12)
        compare_all(state, dense, 2, tol=1e-12)

    def test_deterministic_measurement_after_rotation(self):
        circuit = build("QUBITS 2\nH 1\nCNOT 1 0\nDEPOL1 1 0.2\nRZ 0 pi/5\nM ZZ 0 1 -> -1\n")
        state = run(circuit)
        dense, _ = oracle_run(circuit)
        # Rz is diagonal, so the parity expectation is untouched by it
        assert state.records[-1].prob == pytest.approx(2 / 15, abs=1e-12)
        compare_all(state, dense, 2, tol=1e-12)

    def test_escalation_chain(self):
        circuit = build(
            "QUBITS 2\nH 0\nCNOT 0 1\nDEPOL1 0 0.1\nM ZZ 0 1 -> +1\nRZ 0 pi/3\n"
        )
        state = run(circuit)
        assert isinstance(state, GeneralState)
        dense, _ = oracle_run(circuit)
        compare_all(state, dense, 2, tol=1e-12)

    def test_term_budget(self):
        with pytest.raises(BudgetError, match="budget 4"):
            run(build("QUBITS 2\nH 0\nH 1\nRZ 0 0.3\nRZ 1 0.4\n"), term_budget=4)

    def test_trace_out_refused(self):
        with pytest.raises(FragmentError, match="trace-out"):
            run(build("QUBITS 2\nRZ 0 0.3\nTRACEOUT 1\n"))

    def test_symbolic_weights_refused(self):
        with pytest.raises(FragmentError, match="bind"):
            run(build("QUBITS 1\nPARAM p\nDEPOL1 0 p\nRZ 0 0.2\n"))

    def test_norm_after_two_rotated_measurements(self):
        circuit = build(
            "QUBITS 2\nH 0\nCNOT 0 1\nDEPOL1 0 0.05\nRZ 1 pi/7\n"
            "M XX 0 1 -> +1\nM X 0 -> -1\n"
        )
        state = run(circuit)
        dense, recs = oracle_run(circuit)
        assert state.norm == pytest.approx(dense.weight, abs=1e-12)
        kinds = [r.kind for r in state.records]
        assert kinds == ["deterministic", "random"]
        for rec in state.records:
            assert rec.prob == pytest.approx(recs[rec.label][1], abs=1e-12)
        compare_all(state, dense, 2, tol=1e-12)


class TestRunDispatch:
    def test_stays_nsf_without_branching(self):
        state = run(
            build("QUBITS 2\nH 0\nCNOT 0 1\nDEPOL1 0 0.2\nM Z 0 -> +1\n"),
            rng=np.random.default_rng(0),
        )
        assert isinstance(state, NsfState)

    def test_tableau_init_and_record(self):
        text = (
            "QUBITS 2\nDESTAB ZI\nDESTAB IZ\nSTAB XI\nSTAB IX\n"
            "RECORD g0 -1\nDEPOL1 0 0.15\n"
        )
        state = run(build(text))
        assert state.expectation(P("XX")) == pytest.approx(0.8, abs=1e-12)
        (rec,) = state.records
        assert (rec.label, rec.value, rec.kind) == ("g0", -1, "absorbed")

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_random_circuits_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        circuit = random_circuit(rng, n, int(rng.integers(3, 10)))
        try:
            state = run(circuit, rng=np.random.default_rng(seed ^ 0xA5A5))
        except ZeroProbabilityError:
            return
        forced = {r.label: r.value for r in state.records}
        dense, recs = oracle_run(circuit, outcomes=forced)
        compare_all(state, dense, n, tol=1e-10)
        for rec in state.records:
            assert rec.prob == pytest.approx(recs[rec.label][1], abs=1e-10)
