"""Random well-typed closed programs of type ``bit``.

The generator is type-directed and keeps linear variables usable at most
once along each sequential path; candidates are still run through the type
checker, so a generator slip can only cost a retry, never a bad sample.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .syntax import (
    BIT, FF, QBIT, Bang, TOP, TT, App, Cmp, Gate, GATES, InjL, InjR, Lam, LetPair, LetRec,
    LetStar, Lolli, Match, Meas, New, NQbit, Pair, Star, Term, Var,
)
from .typing import check

_ONE_QUBIT = ("H", "X", "Y", "Z", "S", "T")


class _Gen:
    def __init__(self, rng: np.random.Generator, max_meas: int):
        self.rng = rng
        self.n = 0
        self.meas_left = max_meas

    def name(self, base: str) -> str:
        self.n += 1
        return f"{base}{self.n}"

    def pick(self, weights: dict):
        keys = [k for k, w in weights.items() if w > 0]
        w = np.array([weights[k] for k in keys], dtype=float)
        return keys[self.rng.choice(len(keys), p=w / w.sum())]

    def state(self, qubits: int) -> New:
        r = self.rng.random()
        if r < 0.4 and qubits == 1:
            m = np.diag([1.0, 0.0]) if self.rng.random() < 0.5 else np.full((2, 2), 0.5)
            return New(m)
        rank = 1 if r < 0.7 else None
        return New(linalg.random_density(2 ** qubits, self.rng, rank=rank))

    def gate(self, qubits: int) -> Gate:
        if qubits == 1 and self.rng.random() < 0.7:
            g = _ONE_QUBIT[self.rng.integers(len(_ONE_QUBIT))]
            return Gate(GATES[g], g)
        if qubits == 2 and self.rng.random() < 0.5:
            return Gate(GATES["CNOT"], "CNOT")
        return Gate(linalg.random_unitary(2 ** qubits, self.rng))

    # -- qubits ----------------------------------------------------------
    def qbits(self, k: int, vars_: list, d: int) -> Term:
        mine = [v for v, t in vars_ if t == NQbit(k)]
        opts = {"new": 3, "gate": 3 if d > 0 else 0, "var": 4 * len(mine)}
        if k >= 2:
            opts["cmp"] = 2 if d > 0 else 0
        if k <= 2:
            opts["lam"] = 1 if d > 0 else 0
        what = self.pick(opts)
        if what == "var":
            v = mine[self.rng.integers(len(mine))]
            vars_.remove((v, NQbit(k)))
            return Var(v)
        if what == "new":
            return self.state(k)
        if what == "gate":
            return App(self.gate(k), self.qbits(k, vars_, d - 1))
        if what == "cmp":
            a = int(self.rng.integers(1, k))
            return App(Cmp(a, k - a), Pair(self.qbits(a, vars_, d - 1), self.qbits(k - a, vars_, d - 1)))
        x = self.name("q")
        body = App(self.gate(k), Var(x))
        return App(Lam(x, NQbit(k), body), self.qbits(k, vars_, d - 1))

    # -- bits ------------------------------------------------------------
    def bit(self, vars_: list, d: int) -> Term:
        bits = [v for v, t in vars_ if t == BIT]
        can_meas = self.meas_left > 0
        opts = {
            "const": 2,
            "var": 3 * len(bits),
            "meas": 4 if can_meas else 0,
            "match": 3 if d > 0 else 0,
            "meas2": 2 if d > 0 and self.meas_left > 1 else 0,
            "letq": 2 if d > 0 else 0,
            "lam": 1 if d > 0 else 0,
            "rec": 1 if d > 0 else 0,
            "star": 1 if d > 0 else 0,
            "hof": 2 if d > 0 and self.meas_left > 1 else 0,
        }
        what = self.pick(opts)
        if what == "const":
            return TT if self.rng.random() < 0.5 else FF
        if what == "var":
            v = bits[self.rng.integers(len(bits))]
            vars_.remove((v, BIT))
            return Var(v)
        if what == "meas":
            self.meas_left -= 1
            return App(Meas(1, 1), self.qbits(1, vars_, max(d - 1, 0)))
        if what == "match":
            scrut = self.bit(vars_, d - 1)
            x, y = self.name("x"), self.name("y")
            left = self.bit(list(vars_), d - 1)
            right = self.bit(list(vars_), d - 1)
            return Match(scrut, x, TOP, left, y, TOP, right)
        if what == "meas2":
            self.meas_left -= 1
            i = int(self.rng.integers(1, 3))
            q2 = self.qbits(2, vars_, d - 1)
            b, q = self.name("b"), self.name("q")
            inner = vars_ + [(b, BIT), (q, QBIT)]
            body = self.bit(inner, d - 1)
            return LetPair(b, BIT, q, QBIT, App(Meas(2, i), q2), body)
        if what == "letq":
            x, y = self.name("u"), self.name("w")
            bound = Pair(self.qbits(1, vars_, d - 1), self.qbits(1, vars_, d - 1))
            body = self.bit(vars_ + [(x, QBIT), (y, QBIT)], d - 1)
            return LetPair(x, QBIT, y, QBIT, bound, body)
        if what == "lam":
            x = self.name("z")
            body = self.bit(vars_ + [(x, BIT)], d - 1)
            return App(Lam(x, BIT, body), self.bit(vars_, d - 1))
        if what == "star":
            return LetStar(Star(), self.bit(vars_, d - 1))
        if what == "hof":
            return self.higher_order(vars_, d)
        # a small recursive function on bits: terminating or divergent
        f, x, a, b = self.name("f"), self.name("r"), self.name("a"), self.name("c")
        kind = self.rng.integers(3)
        if kind == 0:
            fun = Match(Var(x), a, TOP, FF, b, TOP, App(Var(f), TT))
        elif kind == 1:
            fun = Match(Var(x), a, TOP, TT, b, TOP, FF)
        else:
            fun = App(Var(f), Var(x))
        return LetRec(f, BIT, BIT, x, fun, App(Var(f), self.bit(vars_, d - 1)))

    def higher_order(self, vars_: list, d: int) -> Term:
        """Pass a measuring function to a body that may call it twice."""
        self.meas_left -= 2
        g, x = self.name("g"), self.name("x")
        fun = Lam(x, QBIT, App(Meas(1, 1), App(self.gate(1), Var(x))))
        if self.rng.random() < 0.5:
            a, b = self.name("a"), self.name("b")
            body = Match(App(Var(g), self.qbits(1, vars_, d - 1)),
                         a, TOP, App(Var(g), self.qbits(1, vars_, d - 1)),
                         b, TOP, self.bit(list(vars_), d - 1))
            return App(Lam(g, Bang(Lolli(QBIT, Bang(BIT))), body), fun)
        body = App(Var(g), self.qbits(1, vars_, d - 1))
        return App(Lam(g, Lolli(QBIT, BIT), body), fun)


def random_program(rng: np.random.Generator, depth: int = 4, max_meas: int = 4,
                   attempts: int = 100) -> Term:
    """A closed program that type-checks at ``bit``."""
    for _ in range(attempts):
        g = _Gen(rng, max_meas)
        m = g.bit([], depth)
        if check((), m, BIT) is not None:
            return m
    raise RuntimeError("could not generate a well-typed program")


def random_programs(seed: int, count: int, **kw) -> list:
    rng = np.random.default_rng(seed)
    return [random_program(rng, **kw) for _ in range(count)]
