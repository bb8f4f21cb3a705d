"""Denotations of Hoq programs as realizers in the GoI algebra.

Judgments are interpreted in continuation-passing style: a term of type ``A``
becomes a computation ``(⟦A⟧ ⊸ R) ⊸ R`` where ``R`` is the type of
probabilistic binary trees.  Realizers are affine λ-terms over the algebra's
combinators; they are compiled to token nets by :mod:`hoq.goi`.

Value encodings:

* ``N-qbit``: arrows ``Q_ρ``; ``⊤``: ``I``; ``!A``: boxes ``!v``;
* ``A ⊠ B``: ``P a b``; ``A + B``: ``P K a`` or ``P K̄ b``;
* ``A ⊸ B``: ``λa k. …`` taking a value and a continuation.

A tree ``t ∈ R`` is a function from bits to nodes; a node is the additive
pair ``P k₁ (P k₂ u)`` whose first projection ``k₁ u`` is the edge label (a
0-qubit arrow ``Q_p``) and second projection ``k₂ u`` the subtree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import goi, linalg
from .goi import (
    Arrow, Budget, NetArrow, RBang, RConst, RLam, RTerm, RVar, Token, app, fresh, lam,
)
from .operational import ProbPair
from .syntax import (
    BIT, Bang, Cmp, Gate, Lolli, Meas, New, NQbit, Sum, Tensor, Term, Top, Type, bang_n,
    unbang,
)
from .typing import Derivation, HoqTypeError, check_or_raise, subtype

DEFAULT_DEPTH = 32
DEFAULT_FUEL = goi.DEFAULT_FUEL
# Live (ghost) mass below this is treated as an unreachable subtree.
LIVE_TOL = 1e-14
# Rewrite realizer terms to normal form before compiling them to nets.
# The rewriting uses equations of the algebra only; switching it off gives
# the same numbers, just with (much) longer token paths.
NORMALISE = True

# ---------------------------------------------------------------------------
# Combinator constants

_c = goi.combinator
I, K, KBAR, W, D, DELTA, F, A = (RConst(_c(n)) for n in ("I", "K", "K̄", "W", "D", "delta", "F", "A"))
P = RConst(_c("P"))
P_R = RConst(_c("P_r"))


def _v(name: str) -> RVar:
    return RVar(name)


def _pair(a, b) -> RTerm:
    return app(P, a, b)


def _der(v: RTerm, times: int) -> RTerm:
    for _ in range(times):
        v = app(D, v)
    return v


def _dig(v: RTerm, times: int) -> RTerm:
    for _ in range(times):
        v = app(DELTA, v)
    return v


def _delta_nm(v: RTerm, n: int, m: int) -> RTerm:
    """``δ_{n,m} : !ⁿX → !ᵐX`` for ``n, m ≥ 1`` (or ``m = 0`` meaning full dereliction)."""
    return _der(v, n - m) if n >= m else _dig(v, m - n)


def _bang_fn(c: RTerm) -> RTerm:
    """``!c`` acting on boxes: ``λv. F (!c) v``."""
    v = fresh("v")
    return lam(v, app(F, RBang(c), _v(v)))


def _proj(first: bool) -> RTerm:
    w, k, v, l_, u = (fresh(s) for s in "wkvlu")
    pick = app(_v(k), _v(u)) if first else app(_v(l_), _v(u))
    return lam(w, app(_v(w), lam(k, v, app(_v(v), lam(l_, u, pick)))))


PI1 = _proj(True)
PI2 = _proj(False)


def pair_const(x, y) -> RTerm:
    """A node whose components ignore the shared argument."""
    return _pair(app(K, x), _pair(app(K, y), I))


TT_VAL = _pair(K, I)
FF_VAL = _pair(KBAR, I)

# !-distribution over products and sums
_fst = (lambda a, b, p: lam(p, app(_v(p), lam(a, b, _v(a)))))("a", "b", "p")
_snd = (lambda a, b, p: lam(p, app(_v(p), lam(a, b, _v(b)))))("a", "b", "p")
PHI_INV = lam("w", app(W, P, _v("w"), lam("w1", "w2", _pair(
    app(F, RBang(_fst), _v("w1")), app(F, RBang(_snd), _v("w2"))))))
DISTRIBUTE = lam("w", app(W, P, _v("w"), lam("u", "v", _pair(
    app(D, _v("u"), K), app(F, RBang(P_R), _v("v"))))))

# ---------------------------------------------------------------------------
# Result trees


def _zero_label() -> Arrow:
    return goi.q_state(np.zeros((1, 1)))


Q0 = RConst(_zero_label())
Q1 = RConst(goi.q_state(np.ones((1, 1))))
Q0_GHOST = RConst(goi.ghost_zero())


def _lazy(name: str, build, arity: Optional[int] = None) -> NetArrow:
    arrow = NetArrow(None, name, unfold_arity=arity)
    term = build(RConst(arrow))
    arrow._source = term
    if NORMALISE:
        arrow._source = goi.normalise_or_keep(term)
    return arrow


T0 = _lazy("t0", lambda self: lam("b", pair_const(Q0, self)), arity=1)


def _case_bit(tt_branch: RTerm, ff_branch: RTerm) -> RTerm:
    """``λb. case b of tt ↦ tt_branch | ff ↦ ff_branch`` for closed branches."""
    s, u = fresh("s"), fresh("u")
    return lam("b", app(_v("b"), lam(s, u, app(_v(s), tt_branch, ff_branch))))


T_TT = NetArrow(_case_bit(pair_const(Q1, RConst(T0)), pair_const(Q0, RConst(T0))), "t_tt", inlinable=True)
T_FF = NetArrow(_case_bit(pair_const(Q0, RConst(T0)), pair_const(Q1, RConst(T0))), "t_ff", inlinable=True)
TEST = NetArrow(_case_bit(RConst(T_TT), RConst(T_FF)), "test", inlinable=True)


def _mult_term(self: RTerm) -> RTerm:
    k1 = lam("u", app(_v("u"), lam("p", "n", app(A, _v("p"), app(PI1, _v("n"))))))
    k2 = lam("u", app(_v("u"), lam("p", "n", app(self, _v("p"), app(PI2, _v("n"))))))
    return lam("p", "t", "b", _pair(k1, _pair(k2, _pair(_v("p"), app(_v("t"), _v("b"))))))


MULT = _lazy("mult", _mult_term, arity=3)


# ---------------------------------------------------------------------------
# Fixed points


def fix(f: Arrow, mode="lazy") -> Arrow:
    """Least fixed point of ``f`` taking ``!c`` to ``c``.

    ``mode="lazy"`` returns a self-referential arrow ``c = f·!c`` that
    unfolds on demand.  ``mode=("chain", n)`` returns the ``n``-th
    approximant with ``c₀ = ⊥`` and ``c_{k+1} = f·!c_k``.
    """
    if mode == "lazy":
        return _lazy(f"fix({f.name})", lambda self: app(f, RBang(self)))
    kind, n = mode
    if kind != "chain" or n < 0:
        raise ValueError(f"bad fix mode {mode!r}")
    c: Arrow = goi.ZERO
    for _ in range(n):
        term = app(f, RBang(RConst(c)))
        c = NetArrow(goi.normalise_or_keep(term) if NORMALISE else term, f"fix_{n}", inlinable=True)
    return c


def _fixed(build, arity: int, mode, name: str) -> NetArrow:
    """The arrow ``h = build(h)``: lazily self-referential, or its chain approximant."""
    if mode == "lazy":
        return _lazy(name, build, arity)
    kind, n = mode
    if kind != "chain" or n < 0:
        raise ValueError(f"bad fix mode {mode!r}")
    h: Arrow = goi.ZERO
    for _ in range(n):
        term = build(RConst(h))
        h = NetArrow(goi.normalise_or_keep(term) if NORMALISE else term, name, inlinable=True)
    return h


def _box(fun: RTerm, names: list) -> RTerm:
    """``!(fun y₁ … y_k)`` from boxed variables ``y_i``: ``F(…F(!fun)(δ y₁)…)(δ y_k)``."""
    box: RTerm = RBang(fun)
    for y in names:
        box = app(F, box, app(DELTA, _v(y)))
    return box


# ---------------------------------------------------------------------------
# Subtype coercions


def _coe(a: Type, b: Type) -> Optional[RTerm]:
    """Realizer of ``⟦a <: b⟧`` as a closed term, ``None`` for the identity."""
    if not subtype(a, b):
        raise HoqTypeError(f"{a} is not a subtype of {b}")
    n, x = unbang(a)
    m, y = unbang(b)
    core = _coe_core(x, y)
    if m == 0:
        if n == 0:
            return core
        v = fresh("v")
        body = _der(_v(v), n)
        return lam(v, body if core is None else app(core, body))
    inner = core
    if inner is not None:
        for _ in range(m):
            inner = _bang_fn(inner)
    if n == m:
        return inner
    v = fresh("v")
    body = _delta_nm(_v(v), n, m)
    return lam(v, body if inner is None else app(inner, body))


def _coe_core(x: Type, y: Type) -> Optional[RTerm]:
    if isinstance(x, (NQbit, Top)):
        return None
    if isinstance(x, Tensor):
        c1, c2 = _coe(x.left, y.left), _coe(x.right, y.right)
        if c1 is None and c2 is None:
            return None
        w, a, b = fresh("w"), fresh("a"), fresh("b")
        return lam(w, app(_v(w), lam(a, b, _pair(_ap(c1, _v(a)), _ap(c2, _v(b))))))
    if isinstance(x, Sum):
        c1, c2 = _coe(x.left, y.left), _coe(x.right, y.right)
        if c1 is None and c2 is None:
            return None
        s, sel, v, v1, v2 = (fresh(t) for t in ("s", "sel", "v", "v1", "v2"))
        left = lam(v1, _pair(K, _ap(c1, _v(v1))))
        right = lam(v2, _pair(KBAR, _ap(c2, _v(v2))))
        return lam(s, app(_v(s), lam(sel, v, app(_v(sel), left, right, _v(v)))))
    if isinstance(x, Lolli):
        cd, cc = _coe(y.dom, x.dom), _coe(x.cod, y.cod)
        if cd is None and cc is None:
            return None
        f, b, k = fresh("f"), fresh("b"), fresh("k")
        return lam(f, b, k, app(_v(f), _ap(cd, _v(b)), _tmap(cc, _v(k))))
    raise TypeError(x)


def _ap(c: Optional[RTerm], v: RTerm) -> RTerm:
    return v if c is None else app(c, v)


def _tmap(c: Optional[RTerm], k: RTerm) -> RTerm:
    """Continuation ``k`` precomposed with the coercion ``c``."""
    if c is None:
        return k
    v = fresh("v")
    return lam(v, app(k, app(c, _v(v))))


def _lift(comp: RTerm, c: Optional[RTerm]) -> RTerm:
    """``T(c)`` applied to a computation."""
    if c is None:
        return comp
    k = fresh("k")
    return lam(k, app(comp, _tmap(c, _v(k))))


def interp_subtype(a: Type, b: Type) -> Arrow:
    """The coercion ``⟦a <: b⟧`` as an arrow."""
    c = _coe(a, b)
    return goi.combinator("I") if c is None else NetArrow(c, f"⟦{a} <: {b}⟧")


# ---------------------------------------------------------------------------
# Constants


def const_value(c: Term) -> RTerm:
    """The realizer of ``⟦DType(c)⟧`` for a constant."""
    if isinstance(c, New):
        return RConst(goi.q_state(c.matrix))
    if isinstance(c, Gate):
        uu = RConst(goi.quantum_combinator("U_U", c.matrix))
        return lam("a", "k", app(_v("k"), app(uu, _v("a"))))
    if isinstance(c, Cmp):
        return lam("w", "k", app(_v("k"), app(_v("w"), A)))
    if isinstance(c, Meas):
        return _meas_value(c.n, c.i)
    raise TypeError(f"not a constant: {c!r}")


def _meas_value(n1: int, i: int) -> RTerm:
    def branch(bit: int, bit_val: RTerm) -> RTerm:
        pr = RConst(goi.quantum_combinator("Pr", (n1, i, bit)))
        projected = app(pr, _v("a"))
        if n1 == 1:
            child = app(RConst(MULT), projected, app(_v("k"), RBang(bit_val)))
        else:
            child = app(_v("k"), _pair(RBang(bit_val), projected))
        return lam("a", "k", pair_const(Q0_GHOST, child))

    return lam("a", "k", "b", app(_v("b"), lam("s", "u", app(
        _v("s"), branch(0, TT_VAL), branch(1, FF_VAL), _v("a"), _v("k")))))


def interp_const(c: Term) -> Arrow:
    return NetArrow(const_value(c), f"⟦{type(c).__name__}⟧")


# ---------------------------------------------------------------------------
# Judgments


class _Translator:
    """CPS translation of principal derivations into realizer terms.

    ``env`` maps each program variable in scope to the realizer variable
    holding its value; every realizer variable is used at most once, with
    shared (necessarily banged) program variables duplicated by ``W P``.
    """

    def __init__(self, fix_mode="lazy"):
        self.fix_mode = fix_mode

    def contract(self, shared, env: dict, build):
        env1, env2 = dict(env), dict(env)
        pairs = []
        for y in sorted(shared):
            a, b = fresh(y), fresh(y)
            env1[y], env2[y] = a, b
            pairs.append((env[y], a, b))
        term = build(env1, env2)
        for src, a, b in reversed(pairs):
            term = app(W, P, _v(src), lam(a, b, term))
        return term

    def comp(self, d: Derivation, env: dict) -> RTerm:
        rule = d.rule
        handler = getattr(self, "r_" + _RULE_NAMES[rule])
        return handler(d, env)

    # values ------------------------------------------------------------
    @staticmethod
    def ret(v: RTerm) -> RTerm:
        k = fresh("k")
        return lam(k, app(_v(k), v))

    def r_ax1(self, d, env):
        return self.ret(_v(env[d.term.name]))

    def r_ax2(self, d, env):
        return self.ret(RBang(const_value(d.term)))

    def r_top_i(self, d, env):
        return self.ret(RBang(I))

    def r_lam1(self, d, env):
        x = fresh(d.term.var)
        body = self.comp(d.premises[0], {**env, d.term.var: x})
        return self.ret(RLam(x, body))

    def r_lam2(self, d, env):
        ys = [y for y, _ in d.ctx]
        inner = {y: fresh(y) for y in ys}
        x = fresh(d.term.var)
        body = self.comp(d.premises[0], {**inner, d.term.var: x})
        box: RTerm = RBang(lam(*[inner[y] for y in ys], RLam(x, body)))
        for y in ys:
            box = app(F, box, app(DELTA, _v(env[y])))
        return self.ret(box)

    # eliminations ------------------------------------------------------
    def r_app(self, d, env):
        df, da = d.premises
        n = d.get("n")
        coe = _coe(*d.get("coerce"))

        def build(e1, e2):
            k, f, a = fresh("k"), fresh("f"), fresh("a")
            call = app(_der(_v(f), n), _ap(coe, _v(a)), _v(k))
            return lam(k, app(self.comp(df, e1), lam(f, app(self.comp(da, e2), lam(a, call)))))

        return self.contract(d.get("shared"), env, build)

    def r_pair(self, d, env):
        d1, d2 = d.premises
        n, m = d.get("n"), d.get("m")

        def build(e1, e2):
            k, v1, v2 = fresh("k"), fresh("v1"), fresh("v2")
            if m == 0:
                pv = _pair(_v(v1), _v(v2))
            else:
                pv = app(F, app(F, RBang(P), _delta_nm(_v(v1), n, 2)), _delta_nm(_v(v2), n, 2))
            return lam(k, app(self.comp(d1, e1), lam(v1, app(self.comp(d2, e2),
                                                            lam(v2, app(_v(k), pv))))))

        return self.contract(d.get("shared"), env, build)

    def r_letpair(self, d, env):
        db, dn = d.premises
        m = d.get("m")
        (c1, _), (c2, _) = d.get("coerce")
        t = d.term
        if m >= 1:
            c1, c2 = Bang(c1), Bang(c2)
        k1, k2 = _coe(c1, t.xty), _coe(c2, t.yty)

        def build(e1, e2):
            k, w, a, b = fresh("k"), fresh("w"), fresh("a"), fresh("b")
            x, y = fresh(t.x), fresh(t.y)
            body = app(self.comp(dn, {**e2, t.x: x, t.y: y}), _v(k))
            use = lam(a, b, app(lam(x, y, body), _ap(k1, _v(a)), _ap(k2, _v(b))))
            scrut = _v(w) if m == 0 else app(PHI_INV, _der(_v(w), m - 1))
            return lam(k, app(self.comp(db, e1), lam(w, app(scrut, use))))

        return self.contract(d.get("shared"), env, build)

    def r_top_e(self, d, env):
        db, dn = d.premises

        def build(e1, e2):
            k, u = fresh("k"), fresh("u")
            return lam(k, app(self.comp(db, e1), lam(u, app(self.comp(dn, e2), _v(k)))))

        return self.contract(d.get("shared"), env, build)

    def r_inj(self, d, env, sel):
        n, m = d.get("n"), d.get("m")
        k, v = fresh("k"), fresh("v")
        if m == 0:
            val = _pair(sel, _v(v))
        else:
            val = app(F, RBang(app(P, sel)), _delta_nm(_v(v), n, 2))
        return lam(k, app(self.comp(d.premises[0], env), lam(v, app(_v(k), val))))

    def r_inl(self, d, env):
        return self.r_inj(d, env, K)

    def r_inr(self, d, env):
        return self.r_inj(d, env, KBAR)

    def r_match(self, d, env):
        dp, d1, d2 = d.premises
        m = d.get("m")
        (c1, _), (c2, _) = d.get("coerce")
        (b1, ty), (b2, _) = d.get("branch_coerce")
        t = d.term
        if m >= 1:
            c1, c2 = Bang(c1), Bang(c2)
        branch_vars = sorted({y for y, _ in d1.ctx if y != t.x} | {y for y, _ in d2.ctx if y != t.y})

        def branch(db, x, xty, cin, bty):
            xr, g, kk, xi = fresh("xr"), fresh("g"), fresh("k"), fresh(x)
            zs = {y: fresh(y) for y in branch_vars}
            body = app(self.comp(db, {**zs, x: xi}), _tmap(_coe(bty, ty), _v(kk)))
            body = app(RLam(xi, body), _ap(_coe(cin, xty), _v(xr)))
            return lam(xr, g, kk, app(_v(g), lam(*[zs[y] for y in branch_vars], body)))

        br1 = branch(d1, t.x, t.xty, c1, b1)
        br2 = branch(d2, t.y, t.yty, c2, b2)

        def build(e1, e2):
            k, s, sel, v, z = fresh("k"), fresh("s"), fresh("sel"), fresh("v"), fresh("z")
            gamma = lam(z, app(_v(z), *[_v(e2[y]) for y in branch_vars]))
            scrut = _v(s) if m == 0 else app(DISTRIBUTE, _der(_v(s), m - 1))
            use = lam(sel, v, app(_v(sel), br1, br2, _v(v), gamma, _v(k)))
            return lam(k, app(self.comp(dp, e1), lam(s, app(scrut, use))))

        return self.contract(d.get("shared"), env, build)

    def r_rec(self, d, env):
        dm, dn = d.premises
        t = d.term
        ys = [y for y, _ in dm.ctx if y not in (t.f, t.x)]
        coe = _coe(*d.get("coerce"))

        # H = λzs x. ⟦M⟧ with f bound to the box !(H zs), so that the
        # recursive value is a box the normaliser can see through
        def build(self_ref: RTerm) -> RTerm:
            z = {y: fresh(y) for y in ys}

            def body(e1, e2):
                f, x = fresh(t.f), fresh(t.x)
                m = _lift(self.comp(dm, {**e2, t.f: f, t.x: x}), coe)
                return app(RLam(f, RLam(x, m)), _box(self_ref, [e1[y] for y in ys]))

            return lam(*[z[y] for y in ys], self.contract(set(ys), z, body))

        h = _fixed(build, len(ys) + 1, self.fix_mode, "rec")

        def outer(e1, e2):
            if t.f not in {y for y, _ in dn.ctx}:
                return self.comp(dn, e2)
            fv = fresh(t.f)
            return app(RLam(fv, self.comp(dn, {**e2, t.f: fv})),
                       _box(RConst(h), [e1[y] for y in ys]))

        return self.contract(d.get("shared"), env, outer)

    def r_sub(self, d, env):
        return _lift(self.comp(d.premises[0], env), _coe(*d.get("coerce")))


_RULE_NAMES = {
    "Ax1": "ax1", "Ax2": "ax2", "⊸I1": "lam1", "⊸I2": "lam2", "⊸E": "app",
    "⊠I": "pair", "⊠E": "letpair", "⊤I": "top_i", "⊤E": "top_e",
    "+I1": "inl", "+I2": "inr", "+E": "match", "rec": "rec", "Sub": "sub",
}


def interp_term(d: Derivation, env: Optional[dict] = None, fix_mode="lazy") -> RTerm:
    """The CPS realizer term of a derivation; free variables follow ``env``."""
    env = {x: x for x, _ in d.ctx} if env is None else env
    return _Translator(fix_mode).comp(d, env)


def interp(d: Derivation, fix_mode="lazy") -> Arrow:
    """``⟦Δ ⊢ M : A⟧`` as an arrow ``⟦Δ⟧ → T⟦A⟧``.

    The context is consumed as a right-nested tuple ``P v₁ (P v₂ …)`` in
    the canonical variable order; a closed judgment is just its computation.
    """
    names = [x for x, _ in d.ctx]
    body = interp_term(d, fix_mode=fix_mode)
    if not names:
        return NetArrow(body, "⟦⊢⟧")
    g = fresh("γ")
    term = _unpack(names, _v(g), body)
    return NetArrow(RLam(g, term), "⟦Δ⊢⟧")


def _unpack(names, tup: RTerm, body: RTerm) -> RTerm:
    if len(names) == 1:
        return app(RLam(names[0], body), tup)
    rest = fresh("rest")
    return app(tup, lam(names[0], rest, _unpack(names[1:], _v(rest), body)))


def context_value(values: list) -> RTerm:
    """Right-nested tuple matching :func:`interp`'s context convention."""
    if len(values) == 1:
        return goi.lift(values[0])
    return _pair(values[0], context_value(values[1:]))


# ---------------------------------------------------------------------------
# Trees


@dataclass(frozen=True)
class NodeRead:
    """One edge of a tree: label mass, the subtree, and bookkeeping."""

    label: float
    child: "TreeHandle"
    live: float = 0.0
    exhausted: float = 0.0
    transitions: int = 0

    def __iter__(self):
        yield self.label
        yield self.child

    def __len__(self):
        return 2

    def __getitem__(self, i):
        return (self.label, self.child)[i]


@dataclass
class TreeHandle:
    """An element of ``R`` given by a closed realizer term, with cached reads."""

    term: RTerm
    name: str = "tree"
    _reads: dict = field(default_factory=dict, repr=False)

    @staticmethod
    def of(x, name: str = "tree") -> "TreeHandle":
        return x if isinstance(x, TreeHandle) else TreeHandle(goi.lift(x), name)

    def read(self, branch: str, fuel: int = DEFAULT_FUEL) -> NodeRead:
        key = (branch, fuel)
        if key not in self._reads:
            self._reads[key] = _read(self, branch, fuel)
        return self._reads[key]


def _bit(branch) -> RTerm:
    if branch in ("tt", True, 0):
        return TT_VAL
    if branch in ("ff", False, 1):
        return FF_VAL
    raise ValueError(f"branch must be tt or ff, not {branch!r}")


def scalar(code, fuel: int = DEFAULT_FUEL):
    """Run ``(0, 1)`` through a 0-qubit code; returns ``(value, live, exhausted, steps)``."""
    arrow = code if isinstance(code, Arrow) else NetArrow(code, "label")
    res = goi.run_token(arrow, Token.unit(0), budget=Budget(fuel))
    value = sum(o.weight for o in res.outcomes if not o.ghost)
    live = sum(o.weight for o in res.outcomes if o.ghost)
    return value, live, res.exhausted_mass, res.transitions


def _read(t: TreeHandle, branch, fuel: int) -> NodeRead:
    node = app(t.term, _bit(branch))
    norm = goi.normalise_or_keep if NORMALISE else (lambda x: x)
    value, live, exhausted, steps = scalar(norm(app(PI1, node)), fuel)
    child = TreeHandle(norm(app(PI2, node)), f"{t.name}.{branch}")
    return NodeRead(value, child, live, exhausted, steps)


def read_node(t, branch, fuel: int = DEFAULT_FUEL) -> NodeRead:
    """``(label, child)`` of the ``branch`` edge; extra fields on the result."""
    return TreeHandle.of(t).read(branch, fuel)


def mult(p, t) -> TreeHandle:
    """The tree ``t`` with every label scaled by the 0-qubit code ``p``."""
    t = TreeHandle.of(t)
    return TreeHandle(app(RConst(MULT), goi.lift(p), t.term), f"mult({t.name})")


def scalar_code(p: float) -> Arrow:
    """``Q_p`` for a probability ``p``."""
    return goi.q_state(np.array([[p]], dtype=complex))


def t0() -> TreeHandle:
    return TreeHandle(RConst(T0), "t0")


def t_tt() -> TreeHandle:
    return TreeHandle(RConst(T_TT), "t_tt")


def t_ff() -> TreeHandle:
    return TreeHandle(RConst(T_FF), "t_ff")


def tree_of(m: Term, fix_mode="lazy") -> TreeHandle:
    """``tree(M)``: the computation of ``⊢ M : bit`` run against ``test``."""
    d = check_or_raise((), m, BIT)
    return TreeHandle(app(interp_term(d, fix_mode=fix_mode), RConst(TEST)), "tree")


@dataclass
class Explored:
    """The explored part of a tree: edges ``(path, branch, label)``."""

    edges: list = field(default_factory=list)
    exhausted: float = 0.0
    transitions: int = 0
    truncated: bool = False

    @property
    def prob(self) -> ProbPair:
        p = sum(lab for _, b, lab in self.edges if b == "tt")
        q = sum(lab for _, b, lab in self.edges if b == "ff")
        return ProbPair(p, q)


def explore(t, depth: int = DEFAULT_DEPTH, fuel: int = DEFAULT_FUEL) -> Explored:
    """Read the tree to ``depth`` levels, skipping subtrees no mass can reach.

    Measurement nodes carry ghost labels: observationally zero, but the
    ghost mass reaching them tells whether the subtree below can still
    carry probability.  Every other edge leads to an all-zero subtree.
    """
    out = Explored()
    stack = [(TreeHandle.of(t), (), depth)]
    while stack:
        node, path, d = stack.pop()
        if d <= 0:
            continue
        for branch in ("ff", "tt"):
            r = node.read(branch, fuel)
            out.edges.append((path, branch, r.label))
            out.exhausted += r.exhausted
            out.transitions += r.transitions
            if r.live > LIVE_TOL:
                if d > 1:
                    stack.append((r.child, path + (branch,), d - 1))
                else:
                    out.truncated = True
    out.edges.sort(key=lambda e: (e[0], e[1] != "tt"))
    return out


def prob(t, depth: int = DEFAULT_DEPTH, fuel: int = DEFAULT_FUEL) -> ProbPair:
    """Sums of left- and right-edge labels over the first ``depth`` levels."""
    return explore(t, depth, fuel).prob


def denote(m: Term, depth: int = DEFAULT_DEPTH, fuel: int = DEFAULT_FUEL) -> ProbPair:
    """``M ⇓ (p, q)`` read off the tree to the given depth."""
    return prob(tree_of(m), depth, fuel)


def explored_to_dot(e: Explored) -> str:
    lines = ["digraph tree {", "  node [shape=point];"]
    name = lambda path: "n_" + ("".join("l" if b == "tt" else "r" for b in path) or "root")
    seen = {()}
    lines.append(f"  {name(())};")
    for path, branch, label in e.edges:
        child = path + (branch,)
        if child not in seen:
            seen.add(child)
            lines.append(f"  {name(child)};")
        lines.append(f'  {name(path)} -> {name(child)} [label="{label:.6g}"];')
    lines.append("}")
    return "\n".join(lines)
