"""Subtyping, default constant types and syntax-directed principal typing.

Every typable judgment ``Δ ⊢ M : A`` factors as a principal derivation of
``Δ|FV(M) ⊢ M : A°`` followed by one subtype coercion ``A° <: A``.  ``check``
returns exactly that shape, which is what the denotational interpreter consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .syntax import (
    BIT, TOP, App, Bang, Cmp, Gate, InjL, InjR, Lam, LetPair, LetRec, LetStar,
    Lolli, Match, Meas, New, NQbit, Pair, Star, Sum, Tensor, Term, Top, Type, Var,
    bang_n, free_vars, print_term, unbang,
)

RULES = ("Ax1", "Ax2", "⊸I1", "⊸I2", "⊸E", "⊠I", "⊠E", "⊤I", "⊤E",
         "+I1", "+I2", "+E", "rec", "Sub")


class HoqTypeError(TypeError):
    """Raised by :func:`infer_or_raise` with a human readable reason."""


# --------------------------------------------------------------------------
# Contexts

Context = tuple  # canonical form: tuple of (name, Type) sorted by name


def make_context(ctx: Mapping[str, Type] | Iterable | None) -> Context:
    if ctx is None:
        return ()
    items = ctx.items() if isinstance(ctx, Mapping) else ctx
    seen = {}
    for name, ty in items:
        if name in seen and seen[name] != ty:
            raise ValueError(f"variable {name} declared twice")
        seen[name] = ty
    return tuple(sorted(seen.items()))


def restrict(ctx: Context, names) -> Context:
    return tuple((x, t) for x, t in ctx if x in names)


def is_banged_context(ctx: Context) -> bool:
    return all(isinstance(t, Bang) for _, t in ctx)


# --------------------------------------------------------------------------
# Subtyping


def subtype(a: Type, b: Type) -> bool:
    """Decide ``a <: b``; bangs may be added or dropped unless ``a`` has none."""
    n, ca = unbang(a)
    m, cb = unbang(b)
    if n == 0 and m > 0:
        return False
    if isinstance(ca, NQbit):
        return isinstance(cb, NQbit) and ca.n == cb.n
    if isinstance(ca, Top):
        return isinstance(cb, Top)
    if isinstance(ca, Tensor):
        return isinstance(cb, Tensor) and subtype(ca.left, cb.left) and subtype(ca.right, cb.right)
    if isinstance(ca, Sum):
        return isinstance(cb, Sum) and subtype(ca.left, cb.left) and subtype(ca.right, cb.right)
    if isinstance(ca, Lolli):
        return isinstance(cb, Lolli) and subtype(cb.dom, ca.dom) and subtype(ca.cod, cb.cod)
    raise TypeError(a)


def _bound(a: Type, b: Type, upper: bool) -> Optional[Type]:
    n, ca = unbang(a)
    m, cb = unbang(b)
    if upper:
        k = 0 if n == 0 or m == 0 else min(n, m)
    else:
        k = max(n, m)
    if isinstance(ca, NQbit) and isinstance(cb, NQbit) and ca.n == cb.n:
        core = ca
    elif isinstance(ca, Top) and isinstance(cb, Top):
        core = ca
    elif type(ca) is type(cb) and isinstance(ca, (Tensor, Sum)):
        left, right = _bound(ca.left, cb.left, upper), _bound(ca.right, cb.right, upper)
        if left is None or right is None:
            return None
        core = type(ca)(left, right)
    elif isinstance(ca, Lolli) and isinstance(cb, Lolli):
        dom, cod = _bound(ca.dom, cb.dom, not upper), _bound(ca.cod, cb.cod, upper)
        if dom is None or cod is None:
            return None
        core = Lolli(dom, cod)
    else:
        return None
    return bang_n(k, core)


def join(a: Type, b: Type) -> Optional[Type]:
    """A least common supertype, or ``None`` if the shapes differ."""
    return _bound(a, b, True)


def meet(a: Type, b: Type) -> Optional[Type]:
    """A greatest common subtype, or ``None`` if the shapes differ."""
    return _bound(a, b, False)


def qbits(n: int) -> Type:
    return NQbit(n)


def default_type(c: Term) -> Type:
    """``DType(c)`` of a constant."""
    if isinstance(c, New):
        return NQbit(c.qubits)
    if isinstance(c, Gate):
        k = c.qubits
        return Lolli(NQbit(k), NQbit(k))
    if isinstance(c, Meas):
        if c.n == 1:
            return Lolli(NQbit(1), Bang(BIT))
        return Lolli(NQbit(c.n), Tensor(Bang(BIT), NQbit(c.n - 1)))
    if isinstance(c, Cmp):
        return Lolli(Tensor(NQbit(c.m), NQbit(c.n)), NQbit(c.m + c.n))
    raise TypeError(f"not a constant: {c!r}")


# --------------------------------------------------------------------------
# Derivations


@dataclass(frozen=True)
class Derivation:
    """One rule instance: conclusion ``ctx ⊢ term : type`` over ``premises``.

    ``side`` carries rule data: bang exponents ``n``/``m``, subtype witnesses
    as ``(sub, super)`` pairs, and the shared (``!``-typed) variables of a
    context split.
    """

    rule: str
    ctx: Context
    term: Term
    type: Type
    premises: tuple = ()
    side: tuple = ()
    principal: bool = True

    def get(self, key, default=None):
        return dict(self.side).get(key, default)

    def pretty(self, indent: int = 0) -> str:
        ctx = ", ".join(f"{x}:{t}" for x, t in self.ctx)
        line = " " * indent + f"[{self.rule}] {ctx} ⊢ {print_term(self.term)} : {self.type}"
        return "\n".join([line] + [p.pretty(indent + 2) for p in self.premises])

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


def _node(rule, ctx, term, ty, premises=(), **side) -> Derivation:
    return Derivation(rule, ctx, term, ty, tuple(premises), tuple(sorted(side.items())))


# --------------------------------------------------------------------------
# Principal inference


class _Fail(Exception):
    pass


def _fail(msg: str):
    raise _Fail(msg)


def _shared(ctx: Context, *groups) -> frozenset:
    """Variables used by more than one subterm; all must be !-typed."""
    counts: dict = {}
    for g in groups:
        for x in g:
            counts[x] = counts.get(x, 0) + 1
    shared = frozenset(x for x, c in counts.items() if c > 1)
    env = dict(ctx)
    for x in sorted(shared):
        if not isinstance(env[x], Bang):
            _fail(f"linear variable {x} : {env[x]} is used more than once")
    return shared


def _split_label(la: Type, lb: Type, ca: Type, cb: Type, m: int):
    """Choose ``n`` with labels ``!^n A_i``, ``C_i <: A_i`` and ``m=0 ⇒ n=0``."""
    top = min(unbang(la)[0], unbang(lb)[0])
    if m == 0:
        top = 0
    for n in range(top, -1, -1):
        a1, a2 = _strip(la, n), _strip(lb, n)
        if subtype(ca, a1) and subtype(cb, a2):
            return n, a1, a2
    return None


def _strip(t: Type, n: int) -> Type:
    for _ in range(n):
        t = t.body
    return t


def _infer(ctx: Context, m: Term) -> Derivation:
    fv = free_vars(m)
    ctx = restrict(ctx, fv)
    missing = fv - {x for x, _ in ctx}
    if missing:
        _fail(f"unbound variable(s): {', '.join(sorted(missing))}")
    env = dict(ctx)

    if isinstance(m, Var):
        return _node("Ax1", ctx, m, env[m.name])

    if isinstance(m, (New, Gate, Meas, Cmp)):
        return _node("Ax2", ctx, m, Bang(default_type(m)))

    if isinstance(m, Star):
        return _node("⊤I", ctx, m, Bang(TOP))

    if isinstance(m, Lam):
        extra = [(m.var, m.ty)] if m.var in free_vars(m.body) else []
        body = _infer(make_context(list(ctx) + extra), m.body)
        ty = Lolli(m.ty, body.type)
        if is_banged_context(ctx):
            return _node("⊸I2", ctx, m, Bang(ty), [body])
        return _node("⊸I1", ctx, m, ty, [body])

    if isinstance(m, App):
        shared = _shared(ctx, free_vars(m.fun), free_vars(m.arg))
        df = _infer(ctx, m.fun)
        da = _infer(ctx, m.arg)
        n, core = unbang(df.type)
        if not isinstance(core, Lolli):
            _fail(f"{print_term(m.fun)} : {df.type} is not a function")
        if not subtype(da.type, core.dom):
            _fail(f"argument {print_term(m.arg)} : {da.type} is not a subtype of {core.dom}")
        return _node("⊸E", ctx, m, core.cod, [df, da], n=n, shared=shared,
                     coerce=(da.type, core.dom))

    if isinstance(m, Pair):
        shared = _shared(ctx, free_vars(m.left), free_vars(m.right))
        d1, d2 = _infer(ctx, m.left), _infer(ctx, m.right)
        n = min(unbang(d1.type)[0], unbang(d2.type)[0])
        a1, a2 = _strip(d1.type, n), _strip(d2.type, n)
        k = min(n, 1)
        ty = bang_n(k, Tensor(bang_n(k, a1), bang_n(k, a2)))
        return _node("⊠I", ctx, m, ty, [d1, d2], n=n, m=k, shared=shared)

    if isinstance(m, LetPair):
        if m.x == m.y:
            _fail(f"pattern binds {m.x} twice")
        body_fv = free_vars(m.body) - {m.x, m.y}
        shared = _shared(ctx, free_vars(m.bound), body_fv)
        db = _infer(ctx, m.bound)
        k, core = unbang(db.type)
        if not isinstance(core, Tensor):
            _fail(f"{print_term(m.bound)} : {db.type} is not a pair")
        split = _split_label(m.xty, m.yty, core.left, core.right, k)
        if split is None:
            _fail(f"pattern types {m.xty}, {m.yty} do not fit {db.type}")
        n, a1, a2 = split
        inner = [p for p in restrict(ctx, body_fv)]
        bfv = free_vars(m.body)
        if m.x in bfv:
            inner.append((m.x, m.xty))
        if m.y in bfv:
            inner.append((m.y, m.yty))
        dn = _infer(make_context(inner), m.body)
        return _node("⊠E", ctx, m, dn.type, [db, dn], n=n, m=k, shared=shared,
                     coerce=((core.left, a1), (core.right, a2)))

    if isinstance(m, LetStar):
        shared = _shared(ctx, free_vars(m.bound), free_vars(m.body))
        db = _infer(ctx, m.bound)
        n, core = unbang(db.type)
        if not isinstance(core, Top):
            _fail(f"{print_term(m.bound)} : {db.type} is not of type top")
        dn = _infer(ctx, m.body)
        return _node("⊤E", ctx, m, dn.type, [db, dn], n=n, shared=shared)

    if isinstance(m, (InjL, InjR)):
        d = _infer(ctx, m.body)
        n, a = unbang(d.type)
        k = min(n, 1)
        if isinstance(m, InjL):
            return _node("+I1", ctx, m, bang_n(k, Sum(bang_n(k, a), m.other)), [d], n=n, m=k)
        return _node("+I2", ctx, m, bang_n(k, Sum(m.other, bang_n(k, a))), [d], n=n, m=k)

    if isinstance(m, Match):
        lfv = free_vars(m.left) - {m.x}
        rfv = free_vars(m.right) - {m.y}
        shared = _shared(ctx, free_vars(m.scrut), lfv | rfv)
        dp = _infer(ctx, m.scrut)
        k, core = unbang(dp.type)
        if not isinstance(core, Sum):
            _fail(f"{print_term(m.scrut)} : {dp.type} is not a sum")
        split = _split_label(m.xty, m.yty, core.left, core.right, k)
        if split is None:
            _fail(f"branch types {m.xty}, {m.yty} do not fit {dp.type}")
        n, a1, a2 = split

        def branch(x, xty, body, outer):
            inner = list(restrict(ctx, outer))
            if x in free_vars(body):
                inner.append((x, xty))
            return _infer(make_context(inner), body)

        d1 = branch(m.x, m.xty, m.left, lfv)
        d2 = branch(m.y, m.yty, m.right, rfv)
        ty = join(d1.type, d2.type)
        if ty is None:
            _fail(f"branches have incompatible types {d1.type} and {d2.type}")
        return _node("+E", ctx, m, ty, [dp, d1, d2], n=n, m=k, shared=shared,
                     coerce=((core.left, a1), (core.right, a2)),
                     branch_coerce=((d1.type, ty), (d2.type, ty)))

    if isinstance(m, LetRec):
        fty = Bang(Lolli(m.dom, m.cod))
        mfv = free_vars(m.fun_body) - {m.f, m.x}
        for x in sorted(mfv):
            if not isinstance(env[x], Bang):
                _fail(f"recursive function body uses linear variable {x} : {env[x]}")
        nfv = free_vars(m.body) - {m.f}
        shared = _shared(ctx, mfv, nfv)
        inner_m = list(restrict(ctx, mfv))
        if m.f in free_vars(m.fun_body):
            inner_m.append((m.f, fty))
        if m.x in free_vars(m.fun_body):
            inner_m.append((m.x, m.dom))
        if m.f == m.x:
            _fail("letrec binds the same name twice")
        dm = _infer(make_context(inner_m), m.fun_body)
        if not subtype(dm.type, m.cod):
            _fail(f"recursive body has type {dm.type}, not a subtype of {m.cod}")
        inner_n = list(restrict(ctx, nfv))
        if m.f in free_vars(m.body):
            inner_n.append((m.f, fty))
        dn = _infer(make_context(inner_n), m.body)
        return _node("rec", ctx, m, dn.type, [dm, dn], shared=shared,
                     coerce=(dm.type, m.cod))

    raise TypeError(f"unknown term {m!r}")


def infer_or_raise(ctx, m: Term) -> tuple[Type, Derivation]:
    """Like :func:`infer_principal` but raises :class:`HoqTypeError`."""
    try:
        d = _infer(make_context(ctx), m)
    except _Fail as e:
        raise HoqTypeError(str(e)) from None
    return d.type, d


def infer_principal(ctx, m: Term) -> Optional[tuple[Type, Derivation]]:
    """The principal type and derivation of ``m`` under ``ctx|FV(m)``."""
    try:
        return infer_or_raise(ctx, m)
    except HoqTypeError:
        return None


def check_or_raise(ctx, m: Term, a: Type) -> Derivation:
    ty, d = infer_or_raise(ctx, m)
    if not subtype(ty, a):
        raise HoqTypeError(f"principal type {ty} is not a subtype of {a}")
    return _node("Sub", d.ctx, m, a, [d], coerce=(ty, a))


def check(ctx, m: Term, a: Type) -> Optional[Derivation]:
    """Principal derivation wrapped in a ``Sub`` node witnessing ``A° <: a``."""
    try:
        return check_or_raise(ctx, m, a)
    except HoqTypeError:
        return None
