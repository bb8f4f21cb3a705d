"""Hoq abstract syntax, concrete grammar, substitution and redex splitting."""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg

# --------------------------------------------------------------------------
# Types


class Type:
    __slots__ = ()

    def __str__(self) -> str:
        return print_type(self)


@dataclass(frozen=True)
class NQbit(Type):
    n: int


@dataclass(frozen=True)
class Bang(Type):
    body: Type


@dataclass(frozen=True)
class Lolli(Type):
    dom: Type
    cod: Type


@dataclass(frozen=True)
class Top(Type):
    pass


@dataclass(frozen=True)
class Tensor(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class Sum(Type):
    left: Type
    right: Type


TOP = Top()
BIT = Sum(TOP, TOP)
QBIT = NQbit(1)


def bang_n(n: int, t: Type) -> Type:
    for _ in range(n):
        t = Bang(t)
    return t


def unbang(t: Type) -> tuple[int, Type]:
    """Split ``!^n A`` with ``A`` not a bang type into ``(n, A)``."""
    n = 0
    while isinstance(t, Bang):
        n, t = n + 1, t.body
    return n, t


# --------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return print_term(self)


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Lam(Term):
    var: str
    ty: Type
    body: Term


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class LetPair(Term):
    x: str
    xty: Type
    y: str
    yty: Type
    bound: Term
    body: Term


@dataclass(frozen=True)
class Star(Term):
    pass


@dataclass(frozen=True)
class LetStar(Term):
    bound: Term
    body: Term


@dataclass(frozen=True)
class InjL(Term):
    other: Type  # type label of the right summand
    body: Term


@dataclass(frozen=True)
class InjR(Term):
    other: Type  # type label of the left summand
    body: Term


@dataclass(frozen=True)
class Match(Term):
    scrut: Term
    x: str
    xty: Type
    left: Term
    y: str
    yty: Type
    right: Term


@dataclass(frozen=True)
class LetRec(Term):
    f: str
    dom: Type
    cod: Type
    x: str
    fun_body: Term
    body: Term


class _Matrix:
    """Mixin giving matrix-carrying constants value semantics."""

    __slots__ = ()

    def _key(self):
        m = np.round(self.matrix, 12)
        return (type(self).__name__, m.shape, m.tobytes())

    def __eq__(self, other):
        return type(self) is type(other) and np.allclose(self.matrix, other.matrix, atol=1e-12)

    def __hash__(self):
        return hash(self._key())


class New(_Matrix, Term):
    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = linalg.as_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError("new[...] needs a square matrix")
        linalg.n_qubits(m.shape[0])
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> int:
        return linalg.n_qubits(self.matrix.shape[0])

    def __repr__(self):
        return f"New({format_matrix(self.matrix)})"


class Gate(_Matrix, Term):
    __slots__ = ("matrix", "name")

    def __init__(self, matrix, name: str | None = None):
        m = linalg.as_matrix(matrix)
        if m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError("gate[...] needs a square matrix of size at least 2")
        linalg.n_qubits(m.shape[0])
        if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-9):
            raise ValueError("gate[...] matrix is not unitary")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "name", name)

    @property
    def qubits(self) -> int:
        return linalg.n_qubits(self.matrix.shape[0])

    def __repr__(self):
        return f"Gate({self.name or format_matrix(self.matrix)})"


@dataclass(frozen=True)
class Meas(Term):
    n: int
    i: int

    def __post_init__(self):
        if not 1 <= self.i <= self.n:
            raise ValueError(f"meas[{self.n},{self.i}]: need 1 <= i <= n")


@dataclass(frozen=True)
class Cmp(Term):
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("cmp[m,n] needs m, n >= 1")


CONSTANTS = (New, Gate, Meas, Cmp)

TT = InjL(TOP, Star())
FF = InjR(TOP, Star())


def is_constant(m: Term) -> bool:
    return isinstance(m, CONSTANTS)


def is_value(m: Term) -> bool:
    if isinstance(m, (Var, Lam, Star)) or is_constant(m):
        return True
    if isinstance(m, Pair):
        return is_value(m.left) and is_value(m.right)
    if isinstance(m, (InjL, InjR)):
        return is_value(m.body)
    return False


# --------------------------------------------------------------------------
# Named states and gates

_S2 = 1 / np.sqrt(2)

GATES = {
    "I": np.eye(2),
    "H": _S2 * np.array([[1, 1], [1, -1]]),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "S": np.array([[1, 0], [0, 1j]]),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
}

_KETS = {"0": linalg.ket("0"), "1": linalg.ket("1"),
         "+": np.array([[1], [1]]) * _S2, "-": np.array([[1], [-1]]) * _S2}


def named_state(label: str) -> np.ndarray:
    """``|s><s|`` for ``s`` in ``{+,-}`` or any bit string."""
    if label in _KETS:
        return linalg.pure(_KETS[label])
    if label and set(label) <= {"0", "1"}:
        return linalg.pure(linalg.ket(label))
    raise ValueError(f"unknown named state |{label}>")


def format_matrix(m: np.ndarray) -> str:
    m = linalg.as_matrix(m)
    rows = []
    for row in m:
        rows.append("[" + ",".join(f"[{_num(z.real)},{_num(z.imag)}]" for z in row) + "]")
    return "[" + ",".join(rows) + "]"


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _state_label(m: np.ndarray) -> str | None:
    for lab in ("0", "1", "+", "-"):
        ref = named_state(lab)
        if ref.shape == m.shape and np.allclose(ref, m, atol=1e-12):
            return lab
    k = m.shape[0]
    if k > 2:
        diag = np.diag(m)
        hits = np.flatnonzero(np.abs(diag - 1) < 1e-12)
        if len(hits) == 1 and np.allclose(m, named_state(format(hits[0], f"0{linalg.n_qubits(k)}b")), atol=1e-12):
            return format(hits[0], f"0{linalg.n_qubits(k)}b")
    return None


# --------------------------------------------------------------------------
# Printing

def print_type(t: Type, prec: int = 0) -> str:
    """Precedences: -o (0) < + (1) < * (2) < ! (3)."""
    if t == BIT:
        return "bit"
    if isinstance(t, NQbit):
        return "qbit" if t.n == 1 else f"qbit[{t.n}]"
    if isinstance(t, Top):
        return "top"
    if isinstance(t, Bang):
        return "!" + print_type(t.body, 3)
    if isinstance(t, Lolli):
        s = f"{print_type(t.dom, 1)} -o {print_type(t.cod, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Sum):
        s = f"{print_type(t.left, 2)} + {print_type(t.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, Tensor):
        s = f"{print_type(t.left, 3)} * {print_type(t.right, 3)}"
        return f"({s})" if prec > 2 else s
    raise TypeError(t)


def _print_const(m: Term) -> str:
    if isinstance(m, New):
        lab = _state_label(m.matrix)
        return f"new[|{lab}><{lab}|]" if lab else f"new[{format_matrix(m.matrix)}]"
    if isinstance(m, Gate):
        if m.name in GATES and np.allclose(GATES[m.name], m.matrix):
            return f"gate[{m.name}]"
        return f"gate[{format_matrix(m.matrix)}]"
    if isinstance(m, Meas):
        return f"meas[{m.n},{m.i}]"
    if isinstance(m, Cmp):
        return f"cmp[{m.m},{m.n}]"
    raise TypeError(m)


def print_term(m: Term, prec: int = 0) -> str:
    """Precedences: binders (0) < application (1) < atoms (2)."""
    if m == TT:
        return "tt"
    if m == FF:
        return "ff"
    if isinstance(m, Var):
        return m.name
    if isinstance(m, Star):
        return "*"
    if is_constant(m):
        return _print_const(m)
    if isinstance(m, Pair):
        return f"<{print_term(m.left)}, {print_term(m.right)}>"
    if isinstance(m, App):
        s = f"{print_term(m.fun, 1)} {print_term(m.arg, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(m, (InjL, InjR)):
        kw = "inl" if isinstance(m, InjL) else "inr"
        s = f"{kw}[{print_type(m.other)}] {print_term(m.body, 2)}"
        return f"({s})" if prec > 0 else s
    if isinstance(m, Lam):
        s = f"\\{m.var}:{print_type(m.ty)}. {print_term(m.body)}"
    elif isinstance(m, LetPair):
        s = (f"let <{m.x}:{print_type(m.xty)}, {m.y}:{print_type(m.yty)}> = "
             f"{print_term(m.bound)} in {print_term(m.body)}")
    elif isinstance(m, LetStar):
        s = f"let * = {print_term(m.bound)} in {print_term(m.body)}"
    elif isinstance(m, Match):
        s = (f"match {print_term(m.scrut)} with ({m.x}:{print_type(m.xty)} -> "
             f"{print_term(m.left)} | {m.y}:{print_type(m.yty)} -> {print_term(m.right)})")
    elif isinstance(m, LetRec):
        s = (f"letrec {m.f}:({print_type(Lolli(m.dom, m.cod))}) {m.x} = "
             f"{print_term(m.fun_body)} in {print_term(m.body)}")
    else:
        raise TypeError(m)
    return f"({s})" if prec > 0 else s


# --------------------------------------------------------------------------
# Parsing

class ParseError(SyntaxError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line, self.col = line, col


_TOKEN = re.compile(r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<raw>(?:new|gate)\[)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>-o|->|[\\.:,<>=()*|!+\[\];])
""", re.VERBOSE)

KEYWORDS = {"let", "in", "letrec", "match", "with", "inl", "inr", "tt", "ff",
            "qbit", "bit", "top", "meas", "cmp", "def"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = self._lex(src)
        self.i = 0

    def _where(self, pos: int) -> tuple[int, int]:
        line = self.src.count("\n", 0, pos) + 1
        col = pos - (self.src.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg: str, pos: int | None = None):
        if pos is None:
            pos = self.toks[self.i].pos if self.i < len(self.toks) else len(self.src)
        raise ParseError(msg, *self._where(pos))

    def _lex(self, src: str) -> list[_Tok]:
        toks, pos = [], 0
        while pos < len(src):
            mt = _TOKEN.match(src, pos)
            if not mt:
                raise ParseError(f"unexpected character {src[pos]!r}", *self._where(pos))
            kind = mt.lastgroup
            if kind == "raw":
                # capture a balanced bracket payload verbatim
                depth, j = 1, mt.end()
                while j < len(src) and depth:
                    depth += {"[": 1, "]": -1}.get(src[j], 0)
                    j += 1
                if depth:
                    raise ParseError("unterminated '['", *self._where(pos))
                toks.append(_Tok(mt.group()[:-1], src[mt.end():j - 1].strip(), pos))
                pos = j
                continue
            if kind != "ws":
                toks.append(_Tok(kind, mt.group(), pos))
            pos = mt.end()
        return toks

    # token helpers
    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind in ("sym", "ident") and t.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            t = self.peek()
            self.error(f"expected {text!r}, found {t.text if t else 'end of input'!r}")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def ident(self) -> str:
        t = self.peek()
        if t is None or t.kind != "ident" or t.text in KEYWORDS:
            self.error("expected an identifier")
        self.i += 1
        return t.text

    def number(self) -> int:
        t = self.peek()
        if t is None or t.kind != "num":
            self.error("expected a number")
        self.i += 1
        return int(t.text)

    # types
    def type_(self) -> Type:
        left = self.sum_type()
        if self.at("-o"):
            self.i += 1
            return Lolli(left, self.type_())
        return left

    def sum_type(self) -> Type:
        t = self.tensor_type()
        while self.at("+"):
            self.i += 1
            t = Sum(t, self.tensor_type())
        return t

    def tensor_type(self) -> Type:
        t = self.atom_type()
        while self.at("*"):
            self.i += 1
            t = Tensor(t, self.atom_type())
        return t

    def atom_type(self) -> Type:
        if self.at("!"):
            self.i += 1
            return Bang(self.atom_type())
        if self.at("("):
            self.i += 1
            t = self.type_()
            self.expect(")")
            return t
        if self.at("bit"):
            self.i += 1
            return BIT
        if self.at("top"):
            self.i += 1
            return TOP
        if self.at("qbit"):
            self.i += 1
            if self.at("["):
                self.i += 1
                n = self.number()
                self.expect("]")
                return NQbit(n)
            return QBIT
        self.error("expected a type")

    # terms
    def program(self) -> Term:
        defs = []
        while self.at("def"):
            self.i += 1
            name = self.ident()
            self.expect("=")
            body = self.term()
            self.expect(";")
            defs.append((name, body))
        m = self.term()
        if self.peek() is not None:
            self.error(f"unexpected {self.peek().text!r}")
        for name, body in reversed(defs):
            m = subst(m, name, body)
        return m

    def term(self) -> Term:
        if self.at("\\"):
            self.i += 1
            x = self.ident()
            self.expect(":")
            ty = self.type_()
            self.expect(".")
            return Lam(x, ty, self.term())
        if self.at("let"):
            self.i += 1
            if self.at("*"):
                self.i += 1
                self.expect("=")
                bound = self.term()
                self.expect("in")
                return LetStar(bound, self.term())
            self.expect("<")
            x = self.ident()
            self.expect(":")
            xty = self.type_()
            self.expect(",")
            y = self.ident()
            self.expect(":")
            yty = self.type_()
            self.expect(">")
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return LetPair(x, xty, y, yty, bound, self.term())
        if self.at("letrec"):
            self.i += 1
            f = self.ident()
            self.expect(":")
            pos = self.peek().pos if self.peek() else len(self.src)
            fty = self.atom_type()
            if not isinstance(fty, Lolli):
                self.error("letrec needs a function type A -o B", pos)
            x = self.ident()
            self.expect("=")
            fun_body = self.term()
            self.expect("in")
            return LetRec(f, fty.dom, fty.cod, x, fun_body, self.term())
        if self.at("match"):
            self.i += 1
            scrut = self.term()
            self.expect("with")
            self.expect("(")
            x = self.ident()
            self.expect(":")
            xty = self.type_()
            self.expect("->")
            left = self.term()
            self.expect("|")
            y = self.ident()
            self.expect(":")
            yty = self.type_()
            self.expect("->")
            right = self.term()
            self.expect(")")
            return Match(scrut, x, xty, left, y, yty, right)
        if self.at("inl") or self.at("inr"):
            return self.injection(self.term)
        return self.application()

    def injection(self, body: Callable[[], Term]) -> Term:
        left = self.at("inl")
        self.i += 1
        self.expect("[")
        ty = self.type_()
        self.expect("]")
        m = body()
        return InjL(ty, m) if left else InjR(ty, m)

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if t.kind in ("new", "gate"):
            return True
        if t.kind == "ident":
            return t.text not in KEYWORDS or t.text in ("tt", "ff", "meas", "cmp")
        return t.kind == "sym" and t.text in ("(", "<", "*")

    def application(self) -> Term:
        m = self.atom()
        while True:
            if self._starts_atom():
                m = App(m, self.atom())
            elif self.at("inl") or self.at("inr"):
                m = App(m, self.injection(self.atom))
            elif self.at("\\"):
                m = App(m, self.term())
            else:
                return m

    def atom(self) -> Term:
        t = self.peek()
        if t is None:
            self.error("unexpected end of input")
        if t.kind == "new":
            self.i += 1
            return New(self._state(t))
        if t.kind == "gate":
            self.i += 1
            return self._gate(t)
        if self.at("("):
            self.i += 1
            m = self.term()
            self.expect(")")
            return m
        if self.at("<"):
            self.i += 1
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(">")
            return Pair(a, b)
        if self.at("*"):
            self.i += 1
            return Star()
        if self.at("tt"):
            self.i += 1
            return TT
        if self.at("ff"):
            self.i += 1
            return FF
        if self.at("meas") or self.at("cmp"):
            kw = t.text
            self.i += 1
            self.expect("[")
            a = self.number()
            self.expect(",")
            b = self.number()
            self.expect("]")
            try:
                return Meas(a, b) if kw == "meas" else Cmp(a, b)
            except ValueError as e:
                self.error(str(e), t.pos)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.i += 1
            return Var(t.text)
        self.error(f"unexpected {t.text!r}")

    def _state(self, tok: _Tok) -> np.ndarray:
        text = tok.text
        mt = re.fullmatch(r"\|([01+\-]+)><([01+\-]+)\|", text)
        try:
            if mt:
                if mt.group(1) != mt.group(2):
                    raise ValueError("only diagonal named states |s><s| are supported")
                return named_state(mt.group(1))
            m = _matrix_literal(text)
        except ValueError as e:
            self.error(str(e), tok.pos)
        if not linalg.is_density(m, 1e-9):
            self.error("new[...] payload is not a density matrix", tok.pos)
        return m

    def _gate(self, tok: _Tok) -> Gate:
        text = tok.text
        try:
            if text in GATES:
                return Gate(GATES[text], text)
            return Gate(_matrix_literal(text))
        except ValueError as e:
            self.error(str(e), tok.pos)


def _matrix_literal(text: str) -> np.ndarray:
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"bad matrix literal: {e.msg}") from None

    def entry(z):
        if isinstance(z, list) and len(z) == 2:
            return complex(z[0], z[1])
        if isinstance(z, (int, float)):
            return complex(z)
        raise ValueError("matrix entries must be [re, im] pairs")

    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError("matrix literal must be a list of rows")
    m = np.array([[entry(z) for z in r] for r in rows], dtype=complex)
    if m.ndim != 2:
        raise ValueError("ragged matrix literal")
    return m


def parse(source: str) -> Term:
    """Parse a program: optional ``def name = M;`` lines, then a term."""
    return _Parser(source).program()


def parse_type(source: str) -> Type:
    p = _Parser(source)
    t = p.type_()
    if p.peek() is not None:
        p.error(f"unexpected {p.peek().text!r}")
    return t


# --------------------------------------------------------------------------
# Free variables and substitution

def free_vars(m: Term) -> frozenset:
    if isinstance(m, Var):
        return frozenset([m.name])
    if isinstance(m, Lam):
        return free_vars(m.body) - {m.var}
    if isinstance(m, App):
        return free_vars(m.fun) | free_vars(m.arg)
    if isinstance(m, Pair):
        return free_vars(m.left) | free_vars(m.right)
    if isinstance(m, LetPair):
        return free_vars(m.bound) | (free_vars(m.body) - {m.x, m.y})
    if isinstance(m, LetStar):
        return free_vars(m.bound) | free_vars(m.body)
    if isinstance(m, (InjL, InjR)):
        return free_vars(m.body)
    if isinstance(m, Match):
        return (free_vars(m.scrut) | (free_vars(m.left) - {m.x})
                | (free_vars(m.right) - {m.y}))
    if isinstance(m, LetRec):
        return (free_vars(m.fun_body) - {m.f, m.x}) | (free_vars(m.body) - {m.f})
    return frozenset()


_fresh_counter = itertools.count()


def fresh(base: str, avoid) -> str:
    stem = base.split("%")[0]
    while True:
        cand = f"{stem}%{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def _binder(x: str, body_fv, v_fv, avoid_extra=frozenset()):
    """Rename binder ``x`` if it would capture a free variable of the substituent."""
    if x in v_fv:
        return fresh(x, body_fv | v_fv | avoid_extra)
    return x


def rename(m: Term, old: str, new: str) -> Term:
    return subst(m, old, Var(new))


def subst(m: Term, x: str, v: Term) -> Term:
    """Capture-avoiding ``m[v/x]``."""
    if x not in free_vars(m):
        return m
    vfv = free_vars(v)
    if isinstance(m, Var):
        return v
    if isinstance(m, Lam):
        y = _binder(m.var, free_vars(m.body), vfv)
        body = rename(m.body, m.var, y) if y != m.var else m.body
        return Lam(y, m.ty, subst(body, x, v))
    if isinstance(m, App):
        return App(subst(m.fun, x, v), subst(m.arg, x, v))
    if isinstance(m, Pair):
        return Pair(subst(m.left, x, v), subst(m.right, x, v))
    if isinstance(m, LetPair):
        body = m.body
        a = _binder(m.x, free_vars(body), vfv, {m.y})
        if a != m.x:
            body = rename(body, m.x, a)
        b = _binder(m.y, free_vars(body), vfv, {a})
        if b != m.y:
            body = rename(body, m.y, b)
        new_body = body if x in (m.x, m.y) else subst(body, x, v)
        return LetPair(a, m.xty, b, m.yty, subst(m.bound, x, v), new_body)
    if isinstance(m, LetStar):
        return LetStar(subst(m.bound, x, v), subst(m.body, x, v))
    if isinstance(m, InjL):
        return InjL(m.other, subst(m.body, x, v))
    if isinstance(m, InjR):
        return InjR(m.other, subst(m.body, x, v))
    if isinstance(m, Match):
        def branch(y, body):
            if y == x:
                return y, body
            z = _binder(y, free_vars(body), vfv)
            if z != y:
                body = rename(body, y, z)
            return z, subst(body, x, v)
        a, left = branch(m.x, m.left)
        b, right = branch(m.y, m.right)
        return Match(subst(m.scrut, x, v), a, m.xty, left, b, m.yty, right)
    if isinstance(m, LetRec):
        if x == m.f:
            return m
        f, arg, fb, body = m.f, m.x, m.fun_body, m.body
        nf = _binder(f, free_vars(fb) | free_vars(body), vfv, {arg})
        if nf != f:
            fb, body, f = rename(fb, f, nf), rename(body, f, nf), nf
        if x != arg:
            na = _binder(arg, free_vars(fb), vfv, {f})
            if na != arg:
                fb, arg = rename(fb, arg, na), na
            fb = subst(fb, x, v)
        return LetRec(f, m.dom, m.cod, arg, fb, subst(body, x, v))
    raise TypeError(m)


# --------------------------------------------------------------------------
# Evaluation contexts

@dataclass(frozen=True)
class Frame:
    """One layer of an evaluation context; ``plug`` fills its hole."""

    kind: str
    other: tuple = ()

    def plug(self, t: Term) -> Term:
        k, o = self.kind, self.other
        if k == "app_fun":
            return App(t, o[0])
        if k == "app_arg":
            return App(o[0], t)
        if k == "pair_left":
            return Pair(t, o[0])
        if k == "pair_right":
            return Pair(o[0], t)
        if k == "letpair":
            return LetPair(o[0], o[1], o[2], o[3], t, o[4])
        if k == "letstar":
            return LetStar(t, o[0])
        if k == "inl":
            return InjL(o[0], t)
        if k == "inr":
            return InjR(o[0], t)
        if k == "match":
            return Match(t, *o)
        raise ValueError(k)


@dataclass(frozen=True)
class EvalSplit:
    """``E[redex]`` with ``frames`` listed outermost first."""

    frames: tuple
    redex: Term

    def plug(self, t: Term) -> Term:
        for fr in reversed(self.frames):
            t = fr.plug(t)
        return t

    def context_str(self) -> str:
        return print_term(self.plug(Var("[.]")))


def split_redex(m: Term) -> EvalSplit | None:
    """The unique decomposition ``E[R]`` of a non-value, or ``None`` for values."""
    frames = []
    while True:
        if is_value(m):
            if frames:
                raise AssertionError("split_redex descended into a value")
            return None
        nxt = None
        if isinstance(m, App):
            if not is_value(m.fun):
                nxt = (Frame("app_fun", (m.arg,)), m.fun)
            elif not is_value(m.arg):
                nxt = (Frame("app_arg", (m.fun,)), m.arg)
        elif isinstance(m, Pair):
            if not is_value(m.left):
                nxt = (Frame("pair_left", (m.right,)), m.left)
            else:
                nxt = (Frame("pair_right", (m.left,)), m.right)
        elif isinstance(m, LetPair):
            if not is_value(m.bound):
                nxt = (Frame("letpair", (m.x, m.xty, m.y, m.yty, m.body)), m.bound)
        elif isinstance(m, LetStar):
            if not is_value(m.bound):
                nxt = (Frame("letstar", (m.body,)), m.bound)
        elif isinstance(m, InjL):
            nxt = (Frame("inl", (m.other,)), m.body)
        elif isinstance(m, InjR):
            nxt = (Frame("inr", (m.other,)), m.body)
        elif isinstance(m, Match):
            if not is_value(m.scrut):
                nxt = (Frame("match", (m.x, m.xty, m.left, m.y, m.yty, m.right)), m.scrut)
        if nxt is None:
            return EvalSplit(tuple(frames), m)
        frames.append(nxt[0])
        m = nxt[1]
