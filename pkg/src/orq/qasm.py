"""OpenQASM 2.0 subset reader and writer.

Accepts: OPENQASM 2.0 header, optional qelib1 include, exactly one qreg,
the gate alphabet of GateKind, and angle expressions built from decimal
literals, pi, unary minus and + - * /. creg, measure and barrier statements
are accepted and ignored with a recorded warning. Everything else is a
structured parse error carrying line, column and category.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .circuit import Circuit, Gate, GateKind


class ErrorCategory(enum.Enum):
    SYNTAX = "Syntax"
    UNKNOWN_GATE = "UnknownGate"
    ARITY_MISMATCH = "ArityMismatch"
    QUBIT_OUT_OF_RANGE = "QubitOutOfRange"
    UNSUPPORTED_FEATURE = "UnsupportedFeature"


class QasmParseError(Exception):
    def __init__(self, category: ErrorCategory, message: str, line: int, column: int):
        super().__init__(f"{category.value} at {line}:{column}: {message}")
        self.category = category
        self.line = line
        self.column = column
        self.detail = message


_MNEMONICS = {k.value: k for k in GateKind}

_KEYWORDS = {"OPENQASM", "include", "qreg", "creg", "measure", "barrier", "pi"}

# full-QASM constructs outside the subset
_UNSUPPORTED = {"gate", "if", "opaque", "reset", "U", "CX"}


@dataclass(frozen=True)
class _Token:
    kind: str  # id, num, sym, str, eof
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("id", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                c = source[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and j > i:
                    seen_exp = True
                    j += 1
                    if j < n and source[j] in "+-":
                        j += 1
                else:
                    break
            tokens.append(_Token("num", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise QasmParseError(ErrorCategory.SYNTAX, "unterminated string", line, start_col)
                j += 1
            if j >= n:
                raise QasmParseError(ErrorCategory.SYNTAX, "unterminated string", line, start_col)
            tokens.append(_Token("str", source[i + 1 : j], line, start_col))
            col += j - i + 1
            i = j + 1
            continue
        if ch in ";,()[]{}+-*/><=":
            tokens.append(_Token("sym", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise QasmParseError(ErrorCategory.SYNTAX, f"unexpected character {ch!r}", line, start_col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.toks = tokens
        self.pos = 0
        self.warnings: list[str] = []

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def err(self, category: ErrorCategory, message: str, tok: _Token | None = None) -> QasmParseError:
        t = tok or self.peek()
        return QasmParseError(category, message, t.line, t.column)

    def expect_sym(self, s: str) -> _Token:
        t = self.next()
        if t.kind != "sym" or t.text != s:
            raise self.err(ErrorCategory.SYNTAX, f"expected {s!r}, got {t.text!r}", t)
        return t

    def expect_id(self, text: str | None = None) -> _Token:
        t = self.next()
        if t.kind != "id" or (text is not None and t.text != text):
            want = text or "identifier"
            raise self.err(ErrorCategory.SYNTAX, f"expected {want}, got {t.text!r}", t)
        return t

    # angle grammar: expr := term (("+"|"-") term)*
    #                term := factor (("*"|"/") factor)*
    #                factor := "-"* atom ;  atom := num | pi | "(" expr ")"
    def parse_expr(self) -> float:
        val = self.parse_term()
        while self.peek().kind == "sym" and self.peek().text in "+-":
            op = self.next().text
            rhs = self.parse_term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def parse_term(self) -> float:
        val = self.parse_factor()
        while self.peek().kind == "sym" and self.peek().text in "*/":
            op = self.next()
            rhs = self.parse_factor()
            if op.text == "/":
                if rhs == 0.0:
                    raise self.err(ErrorCategory.SYNTAX, "division by zero in angle", op)
                val = val / rhs
            else:
                val = val * rhs
        return val

    def parse_factor(self) -> float:
        sign = 1.0
        while self.peek().kind == "sym" and self.peek().text == "-":
            self.next()
            sign = -sign
        t = self.next()
        if t.kind == "num":
            try:
                return sign * float(t.text)
            except ValueError:
                raise self.err(ErrorCategory.SYNTAX, f"bad number {t.text!r}", t)
        if t.kind == "id" and t.text == "pi":
            return sign * math.pi
        if t.kind == "sym" and t.text == "(":
            val = self.parse_expr()
            self.expect_sym(")")
            return sign * val
        raise self.err(ErrorCategory.SYNTAX, f"expected angle, got {t.text!r}", t)

    def parse_qubit_ref(self, reg_name: str, reg_size: int) -> int:
        t = self.expect_id()
        if t.text != reg_name:
            raise self.err(ErrorCategory.SYNTAX, f"unknown register {t.text!r}", t)
        self.expect_sym("[")
        idx_tok = self.next()
        if idx_tok.kind != "num" or not idx_tok.text.isdigit():
            raise self.err(ErrorCategory.SYNTAX, f"expected qubit index, got {idx_tok.text!r}", idx_tok)
        idx = int(idx_tok.text)
        self.expect_sym("]")
        if idx >= reg_size:
            raise self.err(
                ErrorCategory.QUBIT_OUT_OF_RANGE,
                f"q[{idx}] out of range for register of size {reg_size}",
                idx_tok,
            )
        return idx

    def skip_statement(self) -> None:
        while True:
            t = self.next()
            if t.kind == "eof":
                raise self.err(ErrorCategory.SYNTAX, "missing ';'", t)
            if t.kind == "sym" and t.text == ";":
                return


def parse_with_warnings(source: str) -> tuple[Circuit, list[str]]:
    """Parse a program, returning the circuit and any ignored-statement warnings."""
    p = _Parser(_tokenize(source))

    t = p.next()
    if t.kind != "id" or t.text != "OPENQASM":
        raise p.err(ErrorCategory.SYNTAX, "expected OPENQASM header", t)
    v = p.next()
    if v.kind != "num":
        raise p.err(ErrorCategory.SYNTAX, "expected version number", v)
    if v.text != "2.0":
        raise p.err(ErrorCategory.UNSUPPORTED_FEATURE, f"unsupported version {v.text}", v)
    p.expect_sym(";")

    reg_name: str | None = None
    reg_size = 0
    gates: list[Gate] = []

    while p.peek().kind != "eof":
        t = p.next()
        if t.kind != "id":
            raise p.err(ErrorCategory.SYNTAX, f"expected statement, got {t.text!r}", t)
        name = t.text

        if name == "include":
            tgt = p.next()
            if tgt.kind != "str" or tgt.text != "qelib1.inc":
                raise p.err(ErrorCategory.UNSUPPORTED_FEATURE, f"unsupported include", tgt)
            p.expect_sym(";")
            continue

        if name == "qreg":
            if reg_name is not None:
                raise p.err(ErrorCategory.UNSUPPORTED_FEATURE, "multiple qreg declarations", t)
            nm = p.expect_id()
            p.expect_sym("[")
            sz = p.next()
            if sz.kind != "num" or not sz.text.isdigit():
                raise p.err(ErrorCategory.SYNTAX, f"expected register size, got {sz.text!r}", sz)
            p.expect_sym("]")
            p.expect_sym(";")
            reg_name = nm.text
            reg_size = int(sz.text)
            if reg_size < 1:
                raise p.err(ErrorCategory.SYNTAX, "register size must be >= 1", sz)
            continue

        if name in ("creg", "barrier"):
            p.warnings.append(f"line {t.line}: ignored {name} statement")
            p.skip_statement()
            continue

        if name == "measure":
            p.warnings.append(f"line {t.line}: ignored measure statement")
            p.skip_statement()
            continue

        if name in _UNSUPPORTED:
            raise p.err(ErrorCategory.UNSUPPORTED_FEATURE, f"unsupported statement {name!r}", t)

        kind = _MNEMONICS.get(name)
        if kind is None:
            raise p.err(ErrorCategory.UNKNOWN_GATE, f"unknown gate {name!r}", t)
        if reg_name is None:
            raise p.err(ErrorCategory.SYNTAX, "gate before qreg declaration", t)

        params: list[float] = []
        if p.peek().kind == "sym" and p.peek().text == "(":
            p.next()
            if not (p.peek().kind == "sym" and p.peek().text == ")"):
                params.append(p.parse_expr())
                while p.peek().kind == "sym" and p.peek().text == ",":
                    p.next()
                    params.append(p.parse_expr())
            p.expect_sym(")")
        if len(params) != kind.num_params:
            raise p.err(
                ErrorCategory.ARITY_MISMATCH,
                f"{name} takes {kind.num_params} params, got {len(params)}",
                t,
            )
        for a in params:
            if not math.isfinite(a):
                raise p.err(ErrorCategory.SYNTAX, "non-finite angle", t)

        qubits = [p.parse_qubit_ref(reg_name, reg_size)]
        while p.peek().kind == "sym" and p.peek().text == ",":
            p.next()
            qubits.append(p.parse_qubit_ref(reg_name, reg_size))
        p.expect_sym(";")
        if len(qubits) != kind.num_qubits:
            raise p.err(
                ErrorCategory.ARITY_MISMATCH,
                f"{name} takes {kind.num_qubits} qubits, got {len(qubits)}",
                t,
            )
        if len(set(qubits)) != len(qubits):
            raise p.err(
                ErrorCategory.ARITY_MISMATCH,
                f"{name} operands must be distinct",
                t,
            )
        gates.append(Gate(kind, tuple(qubits), tuple(params)))

    if reg_name is None:
        raise p.err(ErrorCategory.SYNTAX, "missing qreg declaration")
    return Circuit(reg_size, tuple(gates)), p.warnings


def parse(source: str) -> Circuit:
    return parse_with_warnings(source)[0]


def _fmt_angle(a: float) -> str:
    return f"{a:.17g}"


def emit(c: Circuit) -> str:
    """Canonical text form: header, one qreg named q, one gate per line."""
    lines = ["OPENQASM 2.0;", f"qreg q[{c.num_qubits}];"]
    for g in c.gates:
        qs = ",".join(f"q[{q}]" for q in g.qubits)
        if g.params:
            ps = ",".join(_fmt_angle(a) for a in g.params)
            lines.append(f"{g.kind.value}({ps}) {qs};")
        else:
            lines.append(f"{g.kind.value} {qs};")
    return "\n".join(lines) + "\n"
