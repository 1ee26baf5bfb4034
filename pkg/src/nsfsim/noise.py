"""Pauli-diagonal noise channels and their update rules.

A channel is an ordered list of terms (weight, sign, op) acting as
``rho -> sum_j sign_j * weight_j * op_j rho op_j``.  Because every op is
applied symmetrically, an op's own sign bit never affects the action; the
per-term sign flag is the one that matters, and it only leaves +1 through
non-physical updates such as deterministic-measurement conditioning.

Weights are either plain floats or affine expressions in a named
parameter.  Both are evaluated through the same arithmetic
(``_affine`` and ``signed_sum``) so a parametric evaluation bound at v
and a numeric channel built directly at v produce bit-identical floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import f2
from .pauli import PauliString

SUM_TOL = 1e-12


def _affine(const: float, num: int, den: int, v: float) -> float:
    return const + (num * v) / den


@dataclass(frozen=True)
class Const:
    value_: float

    def value(self, params=None) -> float:
        return self.value_

    def is_symbolic(self) -> bool:
        return False


@dataclass(frozen=True)
class Affine:
    """const + (num * v) / den for parameter ``param`` bound to v."""

    param: str
    const: float
    num: int
    den: int

    def value(self, params=None) -> float:
        if params is None or self.param not in params:
            raise KeyError(f"unbound parameter {self.param!r}")
        return _affine(self.const, self.num, self.den, params[self.param])

    def is_symbolic(self) -> bool:
        return True


@dataclass(frozen=True)
class WSum:
    """Signed sum of weights, evaluated left to right.

    Produced by term merges on symbolic channels, where the combined
    weight may change sign with the parameter and cannot be collapsed
    to a single flagged magnitude.
    """

    parts: tuple[tuple[int, "Weight"], ...]

    def value(self, params=None) -> float:
        acc = 0.0
        for sign, w in self.parts:
            v = w.value(params)
            acc += v if sign > 0 else -v
        return acc

    def is_symbolic(self) -> bool:
        return any(w.is_symbolic() for _, w in self.parts)


Weight = Const | Affine | WSum


def as_weight(p) -> "Weight":
    """Numbers become Const; strings become the bare parameter itself."""
    if isinstance(p, (Const, Affine, WSum)):
        return p
    if isinstance(p, str):
        return Affine(p, 0.0, 1, 1)
    value = float(p)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"probability {value} outside [0, 1]")
    return Const(value)


def _scaled(p: "Weight", const: float, num: int, den: int) -> "Weight":
    """const + (num/den) * p, for p either Const or a bare parameter."""
    if isinstance(p, Const):
        return Const(_affine(const, num, den, p.value_))
    if isinstance(p, Affine) and (p.const, p.num, p.den) == (0.0, 1, 1):
        return Affine(p.param, const, num, den)
    raise ValueError("channel probabilities must be numbers or bare parameters")


@dataclass
class ChannelTerm:
    weight: Weight
    sign: int
    op: PauliString

    def coefficient(self, params=None) -> float:
        v = self.weight.value(params)
        return v if self.sign > 0 else -v


class NoiseChannel:
    __slots__ = ("n", "terms", "label")

    def __init__(
        self,
        n: int,
        terms: list[ChannelTerm],
        label: str = "",
        validate: bool = True,
        dedupe: bool = True,
    ):
        self.n = n
        # dedupe=False keeps the term list verbatim; clones and numeric
        # twins must preserve summation order for bit-stable results
        self.terms = self._dedupe(terms) if dedupe else list(terms)
        self.label = label
        if validate:
            self._validate()

    @staticmethod
    def _dedupe(terms: list[ChannelTerm]) -> list[ChannelTerm]:
        out: list[ChannelTerm] = []
        index: dict[tuple[int, int], int] = {}
        for t in terms:
            key = (t.op.x, t.op.z)
            if key in index:
                _merge_into(out[index[key]], t)
            else:
                index[key] = len(out)
                out.append(ChannelTerm(t.weight, t.sign, t.op))
        return out

    def _validate(self) -> None:
        for t in self.terms:
            if t.op.n != self.n:
                raise ValueError("term width does not match channel")
            if t.sign != 1:
                raise ValueError("terms must start with sign +1")
        if self.is_symbolic():
            self._validate_symbolic_sum()
        else:
            total = sum(t.weight.value() for t in self.terms)
            if abs(total - 1.0) > SUM_TOL:
                raise ValueError(f"weights sum to {total}, not 1")
            for t in self.terms:
                if not -SUM_TOL <= t.weight.value() <= 1.0 + SUM_TOL:
                    raise ValueError(f"weight {t.weight.value()} outside [0, 1]")

    def _validate_symbolic_sum(self) -> None:
        # an affine sum equals 1 for all v iff offsets sum to 1, slopes to 0
        const = Fraction(0)
        slope: dict[str, Fraction] = {}
        for t in self.terms:
            for s, w in _atoms(t.weight):
                if isinstance(w, Const):
                    const += s * Fraction(w.value_)
                else:
                    const += s * Fraction(w.const)
                    slope[w.param] = slope.get(w.param, Fraction(0)) + s * Fraction(
                        w.num, w.den
                    )
        if const != 1 or any(slope.values()):
            raise ValueError("symbolic weights do not sum to 1 identically")

    # -- queries -------------------------------------------------------

    def is_symbolic(self) -> bool:
        return any(t.weight.is_symbolic() for t in self.terms)

    def parameters(self) -> set[str]:
        out: set[str] = set()
        for t in self.terms:
            for _, w in _atoms(t.weight):
                if isinstance(w, Affine):
                    out.add(w.param)
        return out

    def copy(self) -> "NoiseChannel":
        terms = [ChannelTerm(t.weight, t.sign, t.op) for t in self.terms]
        return NoiseChannel(self.n, terms, self.label, validate=False, dedupe=False)

    def numeric_terms(self, params=None) -> list[tuple[float, PauliString]]:
        """(coefficient, op) pairs for the oracle."""
        return [(t.coefficient(params), t.op) for t in self.terms]

    # -- updates -------------------------------------------------------

    def conjugate(self, gate: str, qubits: tuple[int, ...]) -> None:
        for t in self.terms:
            t.op = t.op.apply_gate(gate, qubits)

    def absorb_random_measurement(
        self, observable: PauliString, inserted: PauliString
    ) -> None:
        """Multiply the inserted stabilizer into every anticommuting term.

        The i-phase of an anticommuting op*stabilizer product cancels in
        the symmetric sandwich, so only the bits of the product matter;
        the stored sign is normalized from the even part of the phase.
        """
        if inserted.commutes(observable) != 1:
            raise ValueError("inserted stabilizer must anticommute with observable")
        for t in self.terms:
            if t.op.commutes(observable):
                base, e = t.op.mul_phase(inserted)
                t.op = base if e < 2 else base.negate()

    def reduce_terms(self, tableau) -> None:
        """Merge term pairs whose op product is a stabilizer member."""
        kept: list[ChannelTerm] = []
        for t in self.terms:
            for k in kept:
                product = PauliString(self.n, k.op.x ^ t.op.x, k.op.z ^ t.op.z)
                if tableau.is_member(product):
                    _merge_into(k, t)
                    break
            else:
                kept.append(t)
        self.terms = kept

    def trace_out(self, v: int) -> None:
        keep = [q for q in range(self.n) if q != v]
        terms = [ChannelTerm(t.weight, t.sign, t.op.restrict(keep)) for t in self.terms]
        self.n -= 1
        self.terms = self._dedupe(terms)

    def prune_zeros(self, epsilon: float = 0.0) -> None:
        self.terms = [
            t
            for t in self.terms
            if t.weight.is_symbolic() or abs(t.weight.value()) > epsilon
        ]

    def heisenberg_terms(self, obs: PauliString) -> list[tuple[int, Weight]]:
        """Signed weights with measurement parity folded into the sign."""
        out = []
        for t in self.terms:
            sign = -t.sign if t.op.commutes(obs) else t.sign
            out.append((sign, t.weight))
        return out

    def heisenberg_factor(self, obs: PauliString, params=None):
        """Transposed action on a member observable: obs picks up this factor."""
        pairs = self.heisenberg_terms(obs)
        if params is None and any(w.is_symbolic() for _, w in pairs):
            from .engine import ParamExpr

            return ParamExpr(1, [pairs])
        return signed_sum(pairs, params)


def signed_sum(pairs: list[tuple[int, Weight]], params=None) -> float:
    acc = 0.0
    for sign, w in pairs:
        v = w.value(params)
        acc += v if sign > 0 else -v
    return acc


def _atoms(w: Weight):
    if isinstance(w, WSum):
        for s, part in w.parts:
            for s2, atom in _atoms(part):
                yield (s * s2, atom)
    else:
        yield (1, w)


def _merge_into(dst: ChannelTerm, src: ChannelTerm) -> None:
    """Fold src's coefficient into dst (same coset or identical op)."""
    if dst.weight.is_symbolic() or src.weight.is_symbolic():
        dst.weight = WSum(((dst.sign, dst.weight), (src.sign, src.weight)))
        dst.sign = 1
        return
    c = dst.coefficient() + src.coefficient()
    dst.sign = -1 if c < 0 else 1
    dst.weight = Const(abs(c))


# -- constructors ------------------------------------------------------


def depolarizing1(q: int, p, n: int) -> NoiseChannel:
    if not 0 <= q < n:
        raise ValueError(f"qubit {q} out of range")
    w = as_weight(p)
    terms = [ChannelTerm(_scaled(w, 1.0, -1, 1), 1, PauliString.identity(n))]
    for kind in "XYZ":
        terms.append(
            ChannelTerm(_scaled(w, 0.0, 1, 3), 1, PauliString.single(n, q, kind))
        )
    return NoiseChannel(n, terms, label=f"depol1(q{q})")


def depolarizing2(a: int, b: int, p, n: int) -> NoiseChannel:
    if a == b:
        raise ValueError("two-qubit channel needs distinct qubits")
    for q in (a, b):
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range")
    w = as_weight(p)
    terms = [ChannelTerm(_scaled(w, 1.0, -1, 1), 1, PauliString.identity(n))]
    for ka in "IXYZ":
        for kb in "IXYZ":
            if (ka, kb) == ("I", "I"):
                continue
            op = PauliString.from_text(ka + kb).embed(n, [a, b])
            terms.append(ChannelTerm(_scaled(w, 0.0, 1, 15), 1, op))
    return NoiseChannel(n, terms, label=f"depol2(q{a},q{b})")


def correlated(op: PauliString, p) -> NoiseChannel:
    if op.is_identity_bits():
        raise ValueError("correlated channel needs a non-identity op")
    w = as_weight(p)
    terms = [
        ChannelTerm(_scaled(w, 1.0, -1, 1), 1, PauliString.identity(op.n)),
        ChannelTerm(_scaled(w, 0.0, 1, 1), 1, PauliString(op.n, op.x, op.z)),
    ]
    return NoiseChannel(op.n, terms, label=f"corr({op.to_text()})")


def channel_literal(
    pairs: list[tuple[object, PauliString]], qubits: list[int], n: int
) -> NoiseChannel:
    """CHANNEL {w: op, ...} @ [qubits] with ops given on the support."""
    terms = []
    for p, op in pairs:
        if op.n != len(qubits):
            raise ValueError("op width does not match qubit list")
        terms.append(ChannelTerm(as_weight(p), 1, op.embed(n, qubits)))
    return NoiseChannel(n, terms, label="channel")


# -- channel merging ---------------------------------------------------


def _coset_keys(terms, pivots, reduced, n):
    return [f2.reduce_vector(t.op.x | t.op.z << n, pivots, reduced) for t in terms]


def try_merge_channels(a: NoiseChannel, b: NoiseChannel, tableau):
    """Compose a then b when one side's coset support absorbs the product.

    Returns the composed channel with the invariant side's term order, or
    None when composition would grow the Pauli Kraus rank.  Numeric
    channels only; symbolic channels always return None.
    """
    if a.n != b.n or a.is_symbolic() or b.is_symbolic():
        return None
    n = a.n
    rows = [g.x | g.z << n for g in tableau.stabilizers()]
    pivots, reduced = f2.rref(rows, 2 * n)
    keys_a = _coset_keys(a.terms, pivots, reduced, n)
    keys_b = _coset_keys(b.terms, pivots, reduced, n)
    composed: dict[int, float] = {}
    for ta, ka in zip(a.terms, keys_a):
        for tb, kb in zip(b.terms, keys_b):
            composed[ka ^ kb] = composed.get(ka ^ kb, 0.0) + (
                ta.coefficient() * tb.coefficient()
            )
    for side_terms, side_keys in ((a.terms, keys_a), (b.terms, keys_b)):
        seen: dict[int, ChannelTerm] = {}
        for t, k in zip(side_terms, side_keys):
            seen.setdefault(k, t)
        if set(composed) == set(seen):
            out = []
            for k, rep in seen.items():
                c = composed[k]
                out.append(
                    ChannelTerm(
                        Const(abs(c)), -1 if c < 0 else 1, rep.op
                    )
                )
            return NoiseChannel(
                n, out, label=f"{a.label}*{b.label}", validate=False
            )
    return None
