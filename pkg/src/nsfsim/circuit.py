"""Circuit data model and its line-oriented text format.

A circuit file starts with the version line ``NSFC 1``; ``#`` starts a
comment.  One statement per line:

    QUBITS n
    PARAM name [name ...]
    H q | S q | SDG q | X q | Y q | Z q | CNOT a b | CZ a b
    DEPOL1 q p                  also DEPOL1(q, p)
    DEPOL2 a b p                also DEPOL2(a, b, p)
    CORR pauli q... p           also CORR(fullwidth_pauli, p)
    CHANNEL {w: op, ...} @ [q, ...]
    RZ q theta                  theta: float or pi fraction (pi/4, -pi/2, 3*pi/8)
    T q                         sugar for RZ q pi/4
    M pauli q... [-> s] [@ label]
    TRACEOUT q
    DESTAB row / STAB row       explicit reference tableau (compressed files)
    RECORD label s              absorbed-outcome log entry

``p`` is a probability literal or a declared parameter name.  Unknown
directives are errors; the format is versioned, not forgiving.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

from . import noise
from .noise import ChannelTerm, NoiseChannel, as_weight
from .pauli import GATE_ARITY, PauliString
from .tableau import StabilizerTableau


class CircuitParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, col {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _weight_text(p) -> str:
    return p if isinstance(p, str) else _fmt(p)


# -- operations --------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]

    def to_text(self) -> str:
        return " ".join([self.kind, *map(str, self.qubits)])


@dataclass(frozen=True)
class Depol1:
    q: int
    p: float | str

    def channel(self, n: int) -> NoiseChannel:
        return noise.depolarizing1(self.q, self.p, n)

    def to_text(self) -> str:
        return f"DEPOL1 {self.q} {_weight_text(self.p)}"


@dataclass(frozen=True)
class Depol2:
    a: int
    b: int
    p: float | str

    def channel(self, n: int) -> NoiseChannel:
        return noise.depolarizing2(self.a, self.b, self.p, n)

    def to_text(self) -> str:
        return f"DEPOL2 {self.a} {self.b} {_weight_text(self.p)}"


@dataclass(frozen=True)
class Corr:
    op: PauliString  # full circuit width
    p: float | str

    def channel(self, n: int) -> NoiseChannel:
        return noise.correlated(self.op, self.p)

    def to_text(self) -> str:
        qs = sorted(self.op.support())
        body = self.op.restrict(qs).to_text()
        return " ".join(["CORR", body, *map(str, qs), _weight_text(self.p)])


@dataclass(frozen=True)
class ChannelLiteral:
    # (sign, weight, op on the listed qubits); compression emits signed
    # coefficients, so the literal form is wider than the constructors
    pairs: tuple[tuple[int, float | str, PauliString], ...]
    qubits: tuple[int, ...]

    def channel(self, n: int) -> NoiseChannel:
        terms = [
            ChannelTerm(as_weight(w), s, op.embed(n, list(self.qubits)))
            for s, w, op in self.pairs
        ]
        return NoiseChannel(n, terms, label="channel", validate=False)

    def to_text(self) -> str:
        entries = ", ".join(
            ("-" if s < 0 else "") + f"{_weight_text(w)}: {op.to_text()}"
            for s, w, op in self.pairs
        )
        qs = ", ".join(map(str, self.qubits))
        return f"CHANNEL {{{entries}}} @ [{qs}]"


@dataclass(frozen=True)
class Rotation:
    q: int
    theta: float
    theta_text: str

    def terms(self, n: int) -> list[tuple[complex, PauliString, PauliString]]:
        """Left/right Pauli expansion of conjugation by exp(-i theta Z/2)."""
        c = math.cos(self.theta / 2)
        s = math.sin(self.theta / 2)
        ident = PauliString.identity(n)
        zq = PauliString.single(n, self.q, "Z")
        return [
            (c * c, ident, ident),
            (1j * c * s, ident, zq),
            (-1j * c * s, zq, ident),
            (s * s, zq, zq),
        ]

    def to_text(self) -> str:
        return f"RZ {self.q} {self.theta_text}"


@dataclass(frozen=True)
class Measure:
    obs: PauliString  # full width
    forced: int | None
    label: str
    auto_label: bool = False

    def to_text(self) -> str:
        qs = sorted(self.obs.support())
        parts = ["M", self.obs.restrict(qs).to_text(), *map(str, qs)]
        if self.forced is not None:
            parts += ["->", "+1" if self.forced > 0 else "-1"]
        if not self.auto_label:
            parts += ["@", self.label]
        return " ".join(parts)


@dataclass(frozen=True)
class TraceOut:
    q: int

    def to_text(self) -> str:
        return f"TRACEOUT {self.q}"


@dataclass(frozen=True)
class TableauInit:
    destabs: tuple[PauliString, ...]
    stabs: tuple[PauliString, ...]

    def tableau(self) -> StabilizerTableau:
        return StabilizerTableau.from_rows(list(self.destabs), list(self.stabs))

    def to_text(self) -> str:
        lines = [f"DESTAB {r.to_text()}" for r in self.destabs]
        lines += [f"STAB {r.to_text()}" for r in self.stabs]
        return "\n".join(lines)


@dataclass(frozen=True)
class Record:
    label: str
    sign: int

    def to_text(self) -> str:
        return f"RECORD {self.label} {'+1' if self.sign > 0 else '-1'}"


Op = (
    Gate
    | Depol1
    | Depol2
    | Corr
    | ChannelLiteral
    | Rotation
    | Measure
    | TraceOut
    | TableauInit
    | Record
)

CHANNEL_OPS = (Depol1, Depol2, Corr, ChannelLiteral)


@dataclass
class Circuit:
    n: int
    ops: list
    params: tuple[str, ...] = ()

    def copy(self) -> "Circuit":
        return Circuit(self.n, list(self.ops), self.params)

    def measurements(self) -> list[Measure]:
        return [op for op in self.ops if isinstance(op, Measure)]

    def bind(self, assignment: dict[str, float]) -> "Circuit":
        """Numeric circuit with every declared parameter substituted."""
        missing = [p for p in self.params if p not in assignment]
        if missing:
            raise ValueError(f"unbound parameters: {missing}")
        out = []
        for op in self.ops:
            if isinstance(op, (Depol1, Depol2, Corr)) and isinstance(op.p, str):
                out.append(replace(op, p=float(assignment[op.p])))
            elif isinstance(op, ChannelLiteral):
                pairs = tuple(
                    (s, float(assignment[w]) if isinstance(w, str) else w, p)
                    for s, w, p in op.pairs
                )
                out.append(replace(op, pairs=pairs))
            else:
                out.append(op)
        return Circuit(self.n, out, ())

    def to_text(self) -> str:
        lines = ["NSFC 1", f"QUBITS {self.n}"]
        if self.params:
            lines.append("PARAM " + " ".join(self.params))
        lines += [op.to_text() for op in self.ops]
        return "\n".join(lines) + "\n"


# -- parsing -----------------------------------------------------------

_CALL_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")
_CHANNEL_RE = re.compile(r"^\s*CHANNEL\s*\{(.*)\}\s*@\s*\[(.*)\]\s*$")
_PI_RE = re.compile(r"^(-)?(?:(\d+(?:\.\d+)?)\*)?pi(?:/(\d+(?:\.\d+)?))?$")


def _tokens(body: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]


def _angle(tok: str, line: int, col: int) -> tuple[float, str]:
    m = _PI_RE.match(tok)
    if m:
        sign = -1.0 if m.group(1) else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        return sign * num * math.pi / den, tok
    try:
        value = float(tok)
    except ValueError:
        raise CircuitParseError(f"bad angle {tok!r}", line, col) from None
    return value, _fmt(value)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.n: int | None = None
        self.params: list[str] = []
        self.ops: list = []
        self.labels: set[str] = set()
        self.n_meas = 0
        self.destab_rows: list[PauliString] = []
        self.stab_rows: list[PauliString] = []
        self.rows_done = False

    def fail(self, message: str, line: int, col: int):
        raise CircuitParseError(message, line, col)

    def run(self) -> Circuit:
        header_seen = False
        last_line = 0
        for lineno, raw in enumerate(self.text.splitlines(), 1):
            last_line = lineno
            body = raw.split("#", 1)[0].rstrip()
            if not body.strip():
                continue
            toks = _tokens(body)
            if not header_seen:
                if [t for t, _ in toks] != ["NSFC", "1"]:
                    if toks[0][0] == "NSFC":
                        self.fail(
                            f"unsupported format version {body.strip()!r}",
                            lineno,
                            toks[0][1],
                        )
                    self.fail("missing NSFC 1 header", lineno, toks[0][1])
                header_seen = True
                continue
            self.statement(body, toks, lineno)
        if not header_seen:
            self.fail("missing NSFC 1 header", max(last_line, 1), 1)
        if self.n is None:
            self.fail("missing QUBITS declaration", max(last_line, 1), 1)
        self.finish_rows(last_line, 1)
        return Circuit(self.n, self.ops, tuple(self.params))

    # row collection: DESTAB/STAB lines become one TableauInit op

    def finish_rows(self, line: int, col: int):
        if self.rows_done or not (self.destab_rows or self.stab_rows):
            self.rows_done = True
            return
        self.rows_done = True
        if len(self.destab_rows) != self.n or len(self.stab_rows) != self.n:
            self.fail(
                f"expected {self.n} DESTAB and {self.n} STAB rows, got "
                f"{len(self.destab_rows)} and {len(self.stab_rows)}",
                line,
                col,
            )
        try:
            init = TableauInit(tuple(self.destab_rows), tuple(self.stab_rows))
            init.tableau()
        except ValueError as e:
            self.fail(f"invalid tableau rows: {e}", line, col)
        self.ops.append(init)

    # helpers

    def int_at(self, tok: str, line: int, col: int) -> int:
        try:
            return int(tok, 10)
        except ValueError:
            self.fail(f"expected integer, got {tok!r}", line, col)

    def qubit_at(self, tok: str, line: int, col: int) -> int:
        v = self.int_at(tok, line, col)
        if not 0 <= v < self.n:
            self.fail(f"qubit index {v} out of range for QUBITS {self.n}", line, col)
        return v

    def weight_at(self, tok: str, line: int, col: int, bounded: bool = True):
        try:
            v = float(tok)
        except ValueError:
            if not tok.isidentifier():
                self.fail(f"bad weight {tok!r}", line, col)
            if tok not in self.params:
                self.fail(f"undeclared parameter {tok!r}", line, col)
            return tok
        if bounded and not 0.0 <= v <= 1.0:
            self.fail(f"probability {tok} outside [0, 1]", line, col)
        return v

    def pauli_at(self, tok: str, line: int, col: int, n: int | None = None):
        try:
            return PauliString.from_text(tok, n)
        except ValueError as e:
            self.fail(str(e), line, col)

    def need(self, toks, i, line, what):
        if i >= len(toks):
            end = toks[-1][1] + len(toks[-1][0]) if toks else 1
            self.fail(f"expected {what}", line, end)
        return toks[i]

    def exact_arity(self, toks, count, line):
        if len(toks) > count:
            tok, col = toks[count]
            self.fail(f"unexpected token {tok!r}", line, col)

    def require_qubits(self, line, col):
        if self.n is None:
            self.fail("QUBITS must be declared first", line, col)

    def distinct(self, qubits, toks, line):
        seen = set()
        for q, (tok, col) in zip(qubits, toks):
            if q in seen:
                self.fail(f"duplicate qubit {q}", line, col)
            seen.add(q)

    # statement dispatch

    def statement(self, body: str, toks, line: int):
        head, hcol = toks[0]
        if "(" in head:
            self.call_form(body, line, hcol)
            return
        if head == "CHANNEL":
            self.channel_literal(body, line, hcol)
            return
        if head not in ("DESTAB", "STAB", "QUBITS"):
            # tableau rows are a prefix block; any other op seals it
            pass
        if head == "QUBITS":
            tok, col = self.need(toks, 1, line, "qubit count")
            self.exact_arity(toks, 2, line)
            if self.n is not None:
                self.fail("duplicate QUBITS declaration", line, hcol)
            v = self.int_at(tok, line, col)
            if v < 1:
                self.fail(f"qubit count must be positive, got {v}", line, col)
            self.n = v
            return
        if head == "PARAM":
            if len(toks) < 2:
                self.fail("expected parameter name", line, hcol)
            for tok, col in toks[1:]:
                if not tok.isidentifier():
                    self.fail(f"bad parameter name {tok!r}", line, col)
                if tok in self.params:
                    self.fail(f"duplicate parameter {tok!r}", line, col)
                self.params.append(tok)
            return
        self.require_qubits(line, hcol)
        if head in ("DESTAB", "STAB"):
            if self.rows_done:
                self.fail("tableau rows must precede circuit operations", line, hcol)
            tok, col = self.need(toks, 1, line, "Pauli row")
            self.exact_arity(toks, 2, line)
            row = self.pauli_at(tok, line, col, self.n)
            (self.destab_rows if head == "DESTAB" else self.stab_rows).append(row)
            return
        self.finish_rows(line, hcol)
        if head in GATE_ARITY:
            arity = GATE_ARITY[head]
            qtoks = [self.need(toks, 1 + i, line, "qubit index") for i in range(arity)]
            self.exact_arity(toks, 1 + arity, line)
            qubits = tuple(self.qubit_at(t, line, c) for t, c in qtoks)
            self.distinct(qubits, qtoks, line)
            self.ops.append(Gate(head, qubits))
            return
        if head == "DEPOL1":
            qt = self.need(toks, 1, line, "qubit index")
            pt = self.need(toks, 2, line, "probability")
            self.exact_arity(toks, 3, line)
            q = self.qubit_at(qt[0], line, qt[1])
            p = self.weight_at(pt[0], line, pt[1])
            self.add_channel(Depol1(q, p), line, hcol)
            return
        if head == "DEPOL2":
            at = self.need(toks, 1, line, "qubit index")
            bt = self.need(toks, 2, line, "qubit index")
            pt = self.need(toks, 3, line, "probability")
            self.exact_arity(toks, 4, line)
            a = self.qubit_at(at[0], line, at[1])
            b = self.qubit_at(bt[0], line, bt[1])
            if a == b:
                self.fail(f"duplicate qubit {b}", line, bt[1])
            p = self.weight_at(pt[0], line, pt[1])
            self.add_channel(Depol2(a, b, p), line, hcol)
            return
        if head == "CORR":
            pt = self.need(toks, 1, line, "Pauli text")
            op = self.pauli_at(pt[0], line, pt[1])
            qtoks = [
                self.need(toks, 2 + i, line, "qubit index") for i in range(op.n)
            ]
            wt = self.need(toks, 2 + op.n, line, "probability")
            self.exact_arity(toks, 3 + op.n, line)
            qubits = [self.qubit_at(t, line, c) for t, c in qtoks]
            self.distinct(qubits, qtoks, line)
            p = self.weight_at(wt[0], line, wt[1])
            self.add_channel(Corr(op.embed(self.n, qubits), p), line, hcol)
            return
        if head == "RZ":
            qt = self.need(toks, 1, line, "qubit index")
            tt = self.need(toks, 2, line, "angle")
            self.exact_arity(toks, 3, line)
            q = self.qubit_at(qt[0], line, qt[1])
            theta, text = _angle(tt[0], line, tt[1])
            self.ops.append(Rotation(q, theta, text))
            return
        if head == "T":
            qt = self.need(toks, 1, line, "qubit index")
            self.exact_arity(toks, 2, line)
            q = self.qubit_at(qt[0], line, qt[1])
            self.ops.append(Rotation(q, math.pi / 4, "pi/4"))
            return
        if head == "M":
            self.measure(toks, line)
            return
        if head == "TRACEOUT":
            qt = self.need(toks, 1, line, "qubit index")
            self.exact_arity(toks, 2, line)
            self.ops.append(TraceOut(self.qubit_at(qt[0], line, qt[1])))
            return
        if head == "RECORD":
            lt = self.need(toks, 1, line, "record label")
            st = self.need(toks, 2, line, "outcome sign")
            self.exact_arity(toks, 3, line)
            if st[0] not in ("+1", "-1"):
                self.fail(f"expected +1 or -1, got {st[0]!r}", line, st[1])
            self.ops.append(Record(lt[0], 1 if st[0] == "+1" else -1))
            return
        self.fail(f"unknown directive {head!r}", line, hcol)

    def measure(self, toks, line: int):
        pt = self.need(toks, 1, line, "Pauli observable")
        obs = self.pauli_at(pt[0], line, pt[1])
        if obs.is_identity_bits():
            self.fail("cannot measure the identity", line, pt[1])
        qtoks = [self.need(toks, 2 + i, line, "qubit index") for i in range(obs.n)]
        qubits = [self.qubit_at(t, line, c) for t, c in qtoks]
        self.distinct(qubits, qtoks, line)
        i = 2 + obs.n
        forced = None
        label = None
        while i < len(toks):
            tok, col = toks[i]
            if tok == "->":
                st = self.need(toks, i + 1, line, "outcome sign")
                if st[0] not in ("+1", "-1"):
                    self.fail(f"expected +1 or -1, got {st[0]!r}", line, st[1])
                forced = 1 if st[0] == "+1" else -1
                i += 2
            elif tok == "@":
                lt = self.need(toks, i + 1, line, "record label")
                label = lt[0]
                if label in self.labels:
                    self.fail(f"duplicate record label {label!r}", line, lt[1])
                i += 2
            else:
                self.fail(f"unexpected token {tok!r}", line, col)
        auto = label is None
        if auto:
            label = f"m{self.n_meas}"
        if label in self.labels:
            self.fail(f"duplicate record label {label!r}", line, toks[0][1])
        self.labels.add(label)
        self.n_meas += 1
        self.ops.append(Measure(obs.embed(self.n, qubits), forced, label, auto))

    def add_channel(self, op, line: int, col: int):
        try:
            op.channel(self.n)  # constructor checks surface here with a position
        except ValueError as e:
            self.fail(str(e), line, col)
        self.ops.append(op)

    def call_form(self, body: str, line: int, col: int):
        m = _CALL_RE.match(body)
        if not m:
            self.fail("malformed call syntax", line, col)
        name = m.group(1)
        args = [a.strip() for a in m.group(2).split(",")]
        acol = m.start(2) + 1
        self.require_qubits(line, col)
        self.finish_rows(line, col)
        if name == "DEPOL1":
            if len(args) != 2:
                self.fail("DEPOL1 takes (qubit, p)", line, acol)
            q = self.qubit_at(args[0], line, acol)
            p = self.weight_at(args[1], line, acol)
            self.add_channel(Depol1(q, p), line, col)
        elif name == "DEPOL2":
            if len(args) != 3:
                self.fail("DEPOL2 takes (a, b, p)", line, acol)
            a = self.qubit_at(args[0], line, acol)
            b = self.qubit_at(args[1], line, acol)
            if a == b:
                self.fail(f"duplicate qubit {b}", line, acol)
            p = self.weight_at(args[2], line, acol)
            self.add_channel(Depol2(a, b, p), line, col)
        elif name == "CORR":
            if len(args) != 2:
                self.fail("CORR takes (pauli, p)", line, acol)
            op = self.pauli_at(args[0], line, acol, self.n)
            p = self.weight_at(args[1], line, acol)
            self.add_channel(Corr(op, p), line, col)
        else:
            self.fail(f"unknown directive {name!r}", line, col)

    def channel_literal(self, body: str, line: int, col: int):
        self.require_qubits(line, col)
        self.finish_rows(line, col)
        m = _CHANNEL_RE.match(body)
        if not m:
            self.fail("expected CHANNEL {w: op, ...} @ [qubits]", line, col)
        qubits = []
        qbase = m.start(2)
        off = 0
        for chunk in m.group(2).split(","):
            qcol = qbase + off + (len(chunk) - len(chunk.lstrip())) + 1
            if chunk.strip() == "":
                self.fail("empty qubit entry", line, qcol)
            qubits.append(self.qubit_at(chunk.strip(), line, qcol))
            off += len(chunk) + 1
        if len(set(qubits)) != len(qubits):
            self.fail("duplicate qubit in channel support", line, qbase + 1)
        pairs = []
        base = m.start(1)
        off = 0
        for chunk in m.group(1).split(","):
            ecol = base + off + (len(chunk) - len(chunk.lstrip())) + 1
            if chunk.strip() == "":
                self.fail("empty channel entry", line, ecol)
            if ":" not in chunk:
                self.fail("expected 'weight: pauli'", line, ecol)
            wpart, oppart = chunk.split(":", 1)
            wtext = wpart.strip()
            optext = oppart.strip()
            opcol = (
                base
                + off
                + len(wpart)
                + 1
                + (len(oppart) - len(oppart.lstrip()))
                + 1
            )
            sign = 1
            if wtext[:1] in "+-":
                sign = -1 if wtext[0] == "-" else 1
                wtext = wtext[1:]
            w = self.weight_at(wtext, line, ecol, bounded=False)
            op = self.pauli_at(optext, line, opcol, len(qubits))
            pairs.append((sign, w, op))
            off += len(chunk) + 1
        self.check_literal_trace(pairs, line, col)
        self.ops.append(ChannelLiteral(tuple(pairs), tuple(qubits)))

    def check_literal_trace(self, pairs, line: int, col: int):
        # signed coefficients must sum to 1: numeric offset plus zero slope
        const = 0.0
        slope: dict[str, int] = {}
        for s, w, _ in pairs:
            if isinstance(w, str):
                slope[w] = slope.get(w, 0) + s
            else:
                const += s * w
        if abs(const - 1.0) > noise.SUM_TOL or any(slope.values()):
            self.fail("channel coefficients do not sum to 1", line, col)


def parse(text: str) -> Circuit:
    return _Parser(text).run()
