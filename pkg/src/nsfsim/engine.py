"""Exact expectation engine for noisy stabilizer circuits.

Three state tiers, escalated on demand by ``run``:

  NsfState       pure reference tableau behind a stack of Pauli-diagonal
                 channels; random measurements absorb into both.
  BranchedState  adds deterministic measurements; channel operators stay
                 shared, each branch term only carries per-term sign
                 overlays and a coefficient.
  GeneralState   adds non-Clifford Z rotations as left/right Pauli pairs
                 around the core; the most expensive tier.

Trace-outs exist only at the NsfState tier, where the reference state
factorizes qubit-wise; afterwards qubit indices shift down by one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .circuit import (
    CHANNEL_OPS,
    Circuit,
    Gate,
    Measure,
    Record,
    Rotation,
    TableauInit,
    TraceOut,
)
from .noise import ChannelTerm, Const, NoiseChannel, signed_sum
from .pauli import PauliString
from .tableau import StabilizerTableau, ZeroProbabilityError

PROB_FLOOR = 1e-14
DET_BUDGET = 16
TERM_BUDGET = 4096

_I_POW = (1 + 0j, 1j, -1 + 0j, -1j)


class FragmentError(Exception):
    """Operation outside the supported fragment of the current tier."""


class BudgetError(Exception):
    """Exact tracking would exceed the configured term budget."""


@dataclass(frozen=True)
class Outcome:
    label: str
    value: int
    kind: str  # random | deterministic | absorbed
    prob: float


class ParamExpr:
    """Product of signed weight sums, one factor per channel.

    Evaluation multiplies factors in channel order with the exact same
    float operations the numeric path performs, so an evaluated
    expression is bit-identical to running the bound circuit.
    """

    __slots__ = ("sign", "factors")

    def __init__(self, sign: int, factors: list):
        self.sign = sign
        self.factors = list(factors)

    def evaluate(self, params=None) -> float:
        if self.sign == 0:
            return 0.0
        out = float(self.sign)
        for pairs in self.factors:
            out *= signed_sum(pairs, params)
        return out

    def parameters(self) -> set[str]:
        out: set[str] = set()
        for pairs in self.factors:
            for _, w in pairs:
                if w.is_symbolic():
                    out |= {a.param for _, a in _symbolic_atoms(w)}
        return out

    def __mul__(self, other: "ParamExpr") -> "ParamExpr":
        return ParamExpr(self.sign * other.sign, self.factors + other.factors)

    def to_text(self) -> str:
        if self.sign == 0:
            return "0"
        head = "-" if self.sign < 0 else ""
        if not self.factors:
            return head + "1"
        parts = []
        for pairs in self.factors:
            bits = []
            for s, w in pairs:
                t = _weight_repr(w)
                bits.append(("- " if s < 0 else "+ " if bits else "") + t)
            parts.append("(" + " ".join(bits) + ")")
        return head + " * ".join(parts)


def _symbolic_atoms(w):
    from .noise import Affine, WSum

    if isinstance(w, WSum):
        for s, part in w.parts:
            yield from _symbolic_atoms(part)
    elif isinstance(w, Affine):
        yield (1, w)


def _weight_repr(w) -> str:
    from .noise import Affine, Const, WSum

    if isinstance(w, Const):
        return f"{w.value_:.17g}"
    if isinstance(w, Affine):
        slope = f"{w.num}*{w.param}" if w.num != 1 else w.param
        if w.den != 1:
            slope += f"/{w.den}"
        if w.const == 0:
            return slope
        return f"({w.const:.17g} + {slope})" if w.num > 0 else f"({w.const:.17g} - {slope.lstrip('-')})"
    if isinstance(w, WSum):
        bits = []
        for s, part in w.parts:
            bits.append(("- " if s < 0 else "+ " if bits else "") + _weight_repr(part))
        return "(" + " ".join(bits) + ")"
    raise TypeError(type(w))


def _unsigned(p: PauliString) -> tuple[PauliString, int]:
    if p.sign < 0:
        return PauliString(p.n, p.x, p.z, 1), -1
    return p, 1


def _parity_mask(channel: NoiseChannel, obs: PauliString) -> int:
    mask = 0
    for j, t in enumerate(channel.terms):
        mask |= t.op.commutes(obs) << j
    return mask


def _overlay_factor(channel: NoiseChannel, signs: int) -> float:
    """Signed weight sum with overlay/parity bits folded in."""
    acc = 0.0
    for j, t in enumerate(channel.terms):
        v = t.coefficient()
        acc += -v if signs >> j & 1 else v
    return acc


# -- tier 1: NSF standard form ----------------------------------------


class NsfState:
    __slots__ = ("tableau", "channels", "records")

    def __init__(self, tableau: StabilizerTableau, channels=None, records=None):
        self.tableau = tableau
        self.channels: list[NoiseChannel] = channels if channels is not None else []
        self.records: list[Outcome] = records if records is not None else []

    @property
    def n(self) -> int:
        return self.tableau.n

    @property
    def norm(self) -> float:
        out = 1.0
        for r in self.records:
            out *= r.prob
        return out

    def copy(self) -> "NsfState":
        return NsfState(
            self.tableau.copy(),
            [ch.copy() for ch in self.channels],
            list(self.records),
        )

    def is_symbolic(self) -> bool:
        return any(ch.is_symbolic() for ch in self.channels)

    def bind(self, assignment: dict[str, float]) -> "NsfState":
        """Numeric twin: every weight collapsed to its value."""
        channels = []
        for ch in self.channels:
            terms = [
                ChannelTerm(Const(t.weight.value(assignment)), t.sign, t.op)
                for t in ch.terms
            ]
            channels.append(
                NoiseChannel(ch.n, terms, ch.label, validate=False, dedupe=False)
            )
        return NsfState(self.tableau.copy(), channels, list(self.records))

    def apply_gate(self, gate: str, qubits: tuple[int, ...]) -> None:
        self.tableau.apply_clifford(gate, qubits)
        for ch in self.channels:
            ch.conjugate(gate, qubits)

    def apply_channel(self, ch: NoiseChannel) -> None:
        if ch.n != self.n:
            raise ValueError("channel width does not match state")
        self.channels.append(ch)

    def measure(self, obs: PauliString, forced, rng, label: str) -> int:
        kind, val = self.tableau.classify_measurement(obs)
        if kind == "deterministic":
            raise FragmentError(
                "deterministic measurement in the non-deterministic fragment; "
                "use run() for branch tracking or compress() first"
            )
        witness = self.tableau.stabilizer(val)
        outcome, _ = self.tableau.measure_pauli(obs, outcome=forced, rng=rng)
        for ch in self.channels:
            ch.absorb_random_measurement(obs, witness)
        self.records.append(Outcome(label, outcome, "random", 0.5))
        return outcome

    def trace_out(self, v: int) -> None:
        self.tableau = self.tableau.trace_out(v)
        for ch in self.channels:
            ch.trace_out(v)

    def expectation(self, obs: PauliString, params=None) -> float:
        s = self.tableau.is_member(obs)
        if s == 0:
            return 0.0
        if params is None and self.is_symbolic():
            raise ValueError("symbolic weights; use expectation_parametric")
        out = float(s)
        for ch in self.channels:
            out *= ch.heisenberg_factor(obs, params)
        return out

    def expectation_parametric(self, obs: PauliString) -> ParamExpr:
        s = self.tableau.is_member(obs)
        if s == 0:
            return ParamExpr(0, [])
        return ParamExpr(s, [ch.heisenberg_terms(obs) for ch in self.channels])


# -- tier 2: deterministic-measurement branching ----------------------


class BranchedState:
    __slots__ = ("tableau", "channels", "terms", "norm", "records", "n_det", "det_budget")

    def __init__(self, tableau, channels, terms, records, norm=1.0, det_budget=DET_BUDGET):
        self.tableau = tableau
        self.channels = channels
        self.terms: list[tuple[float, tuple[int, ...]]] = terms
        self.records = records
        self.norm = norm
        self.n_det = 0
        self.det_budget = det_budget

    @classmethod
    def from_nsf(cls, state: NsfState, det_budget=DET_BUDGET) -> "BranchedState":
        if state.is_symbolic():
            raise FragmentError(
                "deterministic measurements need numeric weights; bind parameters first"
            )
        zeros = (0,) * len(state.channels)
        return cls(
            state.tableau, state.channels, [(1.0, zeros)], state.records, 1.0, det_budget
        )

    @property
    def n(self) -> int:
        return self.tableau.n

    def apply_gate(self, gate, qubits) -> None:
        self.tableau.apply_clifford(gate, qubits)
        for ch in self.channels:
            ch.conjugate(gate, qubits)

    def apply_channel(self, ch: NoiseChannel) -> None:
        if ch.is_symbolic():
            raise FragmentError("branched state needs numeric weights")
        self.channels.append(ch)
        self.terms = [(c, ov + (0,)) for c, ov in self.terms]

    def _trace(self) -> float:
        acc = 0.0
        for c, ov in self.terms:
            prod = c
            for i, ch in enumerate(self.channels):
                prod *= _overlay_factor(ch, ov[i])
            acc += prod
        return acc

    def expectation(self, obs: PauliString) -> float:
        s = self.tableau.is_member(obs)
        if s == 0:
            return 0.0
        masks = [_parity_mask(ch, obs) for ch in self.channels]
        num = 0.0
        for c, ov in self.terms:
            prod = c
            for i, ch in enumerate(self.channels):
                prod *= _overlay_factor(ch, masks[i] ^ ov[i])
            num += prod
        den = self._trace()
        if abs(den) < PROB_FLOOR:
            raise ZeroProbabilityError("state trace vanished")
        return s * num / den

    def measure(self, obs: PauliString, forced, rng, label: str) -> int:
        kind, val = self.tableau.classify_measurement(obs)
        if kind == "random":
            witness = self.tableau.stabilizer(val)
            outcome, _ = self.tableau.measure_pauli(obs, outcome=forced, rng=rng)
            for ch in self.channels:
                ch.absorb_random_measurement(obs, witness)
            self.norm *= 0.5
            self.records.append(Outcome(label, outcome, "random", 0.5))
            return outcome
        self.n_det += 1
        if self.n_det > self.det_budget:
            raise BudgetError(
                f"deterministic measurement budget {self.det_budget} exceeded"
            )
        s = val
        mean = self.expectation(obs)
        if forced is None:
            if rng is None:
                raise ValueError("measurement needs a forced outcome or rng")
            outcome = 1 if rng.random() < (1 + mean) / 2 else -1
        else:
            outcome = forced
        prob = (1 + outcome * mean) / 2
        if prob < PROB_FLOOR:
            raise ZeroProbabilityError(
                f"forced outcome {outcome:+d} has probability {prob}"
            )
        masks = tuple(_parity_mask(ch, obs) for ch in self.channels)
        merged: dict[tuple[int, ...], float] = {}
        for c, ov in self.terms:
            keep = c / 2 / prob
            partner = outcome * s * c / 2 / prob
            flipped = tuple(o ^ m for o, m in zip(ov, masks))
            merged[ov] = merged.get(ov, 0.0) + keep
            merged[flipped] = merged.get(flipped, 0.0) + partner
        self.terms = [(c, ov) for ov, c in merged.items()]
        self.norm *= prob
        self.records.append(Outcome(label, outcome, "deterministic", prob))
        return outcome


# -- tier 3: left/right Pauli pairs around the core -------------------


@dataclass
class GeneralTerm:
    alpha: complex
    left: PauliString  # unsigned; signs live in alpha
    right: PauliString
    overlays: tuple[int, ...]


class GeneralState:
    __slots__ = ("tableau", "channels", "terms", "norm", "records", "budget")

    def __init__(self, tableau, channels, terms, records, norm=1.0, budget=TERM_BUDGET):
        self.tableau = tableau
        self.channels = channels
        self.terms: list[GeneralTerm] = terms
        self.records = records
        self.norm = norm
        self.budget = budget

    @classmethod
    def from_nsf(cls, state: NsfState, budget=TERM_BUDGET) -> "GeneralState":
        if state.is_symbolic():
            raise FragmentError(
                "general channels need numeric weights; bind parameters first"
            )
        ident = PauliString.identity(state.n)
        zeros = (0,) * len(state.channels)
        terms = [GeneralTerm(1.0 + 0j, ident, ident, zeros)]
        return cls(state.tableau, state.channels, terms, state.records, 1.0, budget)

    @classmethod
    def from_branched(cls, state: BranchedState, budget=TERM_BUDGET) -> "GeneralState":
        ident = PauliString.identity(state.n)
        terms = [
            GeneralTerm(complex(c), ident, ident, ov) for c, ov in state.terms
        ]
        out = cls(state.tableau, state.channels, terms, state.records, state.norm, budget)
        return out

    @property
    def n(self) -> int:
        return self.tableau.n

    def apply_gate(self, gate, qubits) -> None:
        self.tableau.apply_clifford(gate, qubits)
        for ch in self.channels:
            ch.conjugate(gate, qubits)
        for t in self.terms:
            left = t.left.apply_gate(gate, qubits)
            right = t.right.apply_gate(gate, qubits)
            t.left, sl = _unsigned(left)
            t.right, sr = _unsigned(right)
            t.alpha *= sl * sr

    def apply_channel(self, ch: NoiseChannel) -> None:
        if ch.is_symbolic():
            raise FragmentError("general state needs numeric weights")
        self.channels.append(ch)
        for t in self.terms:
            t.overlays = t.overlays + (0,)

    def apply_rotation(self, rot: Rotation) -> None:
        q = rot.q
        zmasks = tuple(
            sum((ch.terms[j].op.x >> q & 1) << j for j in range(len(ch.terms)))
            for ch in self.channels
        )
        new: dict[tuple, GeneralTerm] = {}
        for t in self.terms:
            for ar, a, b in rot.terms(self.n):
                if (a.z ^ b.z) == 0:
                    overlays = t.overlays
                else:
                    overlays = tuple(o ^ m for o, m in zip(t.overlays, zmasks))
                lbase, e1 = a.mul_phase(t.left)
                rbase, e2 = t.right.mul_phase(b)
                alpha = t.alpha * ar * _I_POW[(e1 + e2) % 4]
                key = (lbase.x, lbase.z, rbase.x, rbase.z, overlays)
                if key in new:
                    new[key].alpha += alpha
                else:
                    new[key] = GeneralTerm(alpha, lbase, rbase, overlays)
        self.terms = [t for t in new.values() if t.alpha != 0]
        if len(self.terms) > self.budget:
            raise BudgetError(
                f"general term budget {self.budget} exceeded ({len(self.terms)} terms)"
            )

    def _term_value(self, t: GeneralTerm, obs: PauliString | None) -> complex:
        prod = t.alpha
        for i, ch in enumerate(self.channels):
            signs = t.overlays[i]
            if obs is not None:
                signs ^= _parity_mask(ch, obs)
            prod *= _overlay_factor(ch, signs)
        if obs is None:
            core, e = t.right.mul_phase(t.left)
        else:
            qa, e1 = t.right.mul_phase(obs)
            core, e2 = qa.mul_phase(t.left)
            e = (e1 + e2) % 4
        memb = self.tableau.is_member(core)
        if memb == 0:
            return 0.0
        return prod * memb * _I_POW[e]

    def _trace(self) -> float:
        acc = 0j
        for t in self.terms:
            acc += self._term_value(t, None)
        if abs(acc.imag) > 1e-9 * max(1.0, abs(acc.real)):
            raise ValueError(f"state trace is not real: {acc}")
        return acc.real

    def expectation(self, obs: PauliString) -> float:
        num = 0j
        for t in self.terms:
            num += self._term_value(t, obs)
        den = self._trace()
        if abs(den) < PROB_FLOOR:
            raise ZeroProbabilityError("state trace vanished")
        if abs(num.imag) > 1e-9 * max(1.0, abs(num.real)):
            raise ValueError(f"expectation is not real: {num}")
        return num.real / den

    def _draw(self, obs, forced, rng) -> int:
        if forced is not None:
            return forced
        if rng is None:
            raise ValueError("measurement needs a forced outcome or rng")
        mean = self.expectation(obs)
        return 1 if rng.random() < (1 + mean) / 2 else -1

    def measure(self, obs: PauliString, forced, rng, label: str) -> int:
        kind, val = self.tableau.classify_measurement(obs)
        prev = self._trace()
        outcome = self._draw(obs, forced, rng)
        if kind == "random":
            self._measure_random(obs, val, outcome)
        else:
            self._measure_deterministic(obs, val, outcome)
        new = self._trace()
        prob = new / prev
        if prob < PROB_FLOOR:
            raise ZeroProbabilityError(
                f"forced outcome {outcome:+d} has probability {prob}"
            )
        for t in self.terms:
            t.alpha /= new
        self.norm *= prob
        self.records.append(Outcome(label, outcome, kind, prob))
        return outcome

    def _measure_random(self, obs: PauliString, l: int, outcome: int) -> None:
        g = self.tableau.stabilizer(l)
        imasks = tuple(_parity_mask(ch, obs) for ch in self.channels)
        for ch in self.channels:
            ch.absorb_random_measurement(obs, g)
        self.tableau.measure_pauli(obs, outcome=outcome)
        out = []
        for t in self.terms:
            overlays = t.overlays
            gflip = t.left.commutes(g) ^ t.right.commutes(g)
            if gflip:
                overlays = tuple(o ^ m for o, m in zip(overlays, imasks))
            alpha = t.alpha * 0.5
            left, right = t.left, t.right
            # crossing an anticommuting factor flips the branch; the old
            # witness maps the kept branch onto the flipped one exactly
            if obs.commutes(left):
                left, e = left.mul_phase(g)
                alpha *= _I_POW[e]
            if obs.commutes(right):
                right, e = g.mul_phase(right)
                alpha *= _I_POW[e]
            out.append(GeneralTerm(alpha, left, right, overlays))
        self.terms = out

    def _measure_deterministic(self, obs: PauliString, s: int, outcome: int) -> None:
        bmasks = tuple(_parity_mask(ch, obs) for ch in self.channels)
        new: dict[tuple, GeneralTerm] = {}

        def add(alpha, left, right, overlays):
            key = (left.x, left.z, right.x, right.z, overlays)
            if key in new:
                new[key].alpha += alpha
            else:
                new[key] = GeneralTerm(alpha, left, right, overlays)

        for t in self.terms:
            bp = obs.commutes(t.left)
            bq = obs.commutes(t.right)
            if bp != bq:
                continue  # projector cross terms cancel exactly
            add(t.alpha / 2, t.left, t.right, t.overlays)
            partner = t.alpha / 2 * outcome * s * (-1 if bp else 1)
            flipped = tuple(o ^ m for o, m in zip(t.overlays, bmasks))
            add(partner, t.left, t.right, flipped)
        self.terms = [t for t in new.values() if t.alpha != 0]
        if len(self.terms) > self.budget:
            raise BudgetError(
                f"general term budget {self.budget} exceeded ({len(self.terms)} terms)"
            )


# -- walkers -----------------------------------------------------------


def _initial_tableau(circuit: Circuit):
    if circuit.ops and isinstance(circuit.ops[0], TableauInit):
        return circuit.ops[0].tableau(), circuit.ops[1:]
    return StabilizerTableau.new_computational(circuit.n), circuit.ops


def process_nondeterministic(circuit: Circuit, rng=None) -> NsfState:
    """Reduce a circuit in the non-deterministic fragment to standard form."""
    tableau, ops = _initial_tableau(circuit)
    state = NsfState(tableau)
    for op in ops:
        if isinstance(op, Gate):
            state.apply_gate(op.kind, op.qubits)
        elif isinstance(op, CHANNEL_OPS):
            state.apply_channel(op.channel(state.n))
        elif isinstance(op, Measure):
            state.measure(op.obs, op.forced, rng, op.label)
        elif isinstance(op, TraceOut):
            state.trace_out(op.q)
        elif isinstance(op, Record):
            state.records.append(Outcome(op.label, op.sign, "absorbed", 0.5))
        elif isinstance(op, Rotation):
            raise FragmentError("non-Clifford rotation; use run()")
        else:
            raise FragmentError(f"unsupported op {type(op).__name__}")
    return state


def run(
    circuit: Circuit,
    rng=None,
    det_budget: int = DET_BUDGET,
    term_budget: int = TERM_BUDGET,
):
    """Full dispatcher: escalates NSF -> branched -> general as needed."""
    tableau, ops = _initial_tableau(circuit)
    state = NsfState(tableau)
    for op in ops:
        if isinstance(op, Gate):
            state.apply_gate(op.kind, op.qubits)
        elif isinstance(op, CHANNEL_OPS):
            state.apply_channel(op.channel(state.n))
        elif isinstance(op, Rotation):
            if isinstance(state, NsfState):
                state = GeneralState.from_nsf(state, term_budget)
            elif isinstance(state, BranchedState):
                state = GeneralState.from_branched(state, term_budget)
            state.apply_rotation(op)
        elif isinstance(op, Measure):
            if isinstance(state, NsfState):
                kind, _ = state.tableau.classify_measurement(op.obs)
                if kind == "deterministic":
                    state = BranchedState.from_nsf(state, det_budget)
            state.measure(op.obs, op.forced, rng, op.label)
        elif isinstance(op, TraceOut):
            if not isinstance(state, NsfState):
                raise FragmentError(
                    "trace-out requires the plain standard form "
                    f"(state is {type(state).__name__})"
                )
            state.trace_out(op.q)
        elif isinstance(op, Record):
            state.records.append(Outcome(op.label, op.sign, "absorbed", 0.5))
        else:
            raise FragmentError(f"unsupported op {type(op).__name__}")
    return state
