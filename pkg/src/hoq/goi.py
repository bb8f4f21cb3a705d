"""A token machine for the Kleisli category of the quantum branching monad.

An arrow ``ℕ ⇸ ℕ`` sends a token ``(index, state)`` to finitely many outcome
tokens whose states are the images of the input state under quantum
operations.  Arrows form a linear combinatory algebra: application is the
execution formula (feedback through the right summand of ``ℕ ≅ ℕ + ℕ``) and
``!`` makes countably many copies indexed through a pairing ``ℕ·ℕ ≅ ℕ``.

Everything larger than a primitive is a *net*: a tree of nodes (λ-binders,
applications, boxes, constants, and a few categorical glue nodes) that the
runner walks with an explicit stack, so arbitrarily deep or self-referential
arrows never touch the Python call stack.
"""

from __future__ import annotations

import heapq
import itertools
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import linalg

DEFAULT_FUEL = 10_000
# Hard ceiling on node transitions, as a multiple of fuel; guards against
# runs that never cross a loop edge yet do not terminate (impossible for
# finite nets, possible through lazily self-referential constants).
TRANSITIONS_PER_FUEL = 2_000
# Branches lighter than this fraction of the input trace are not followed;
# their mass is booked as exhausted.  Decaying feedback loops would otherwise
# spend the shared fuel on contributions far below any useful tolerance.
NEGLIGIBLE = 1e-16

# --------------------------------------------------------------------------
# Index encodings


def encode_sum(side: str, n: int) -> int:
    """``left n ↦ 2n``, ``right n ↦ 2n+1``."""
    if side in ("left", "l", "L", 0):
        return 2 * n
    if side in ("right", "r", "R", 1):
        return 2 * n + 1
    raise ValueError(f"unknown side {side!r}")


def decode_sum(k: int) -> tuple[str, int]:
    return ("right", k >> 1) if k & 1 else ("left", k >> 1)


def encode_pair(i: int, n: int) -> int:
    """Cantor pairing."""
    s = i + n
    return s * (s + 1) // 2 + n


def decode_pair(k: int) -> tuple[int, int]:
    w = (math.isqrt(8 * k + 1) - 1) // 2
    n = k - w * (w + 1) // 2
    return w - n, n


# --------------------------------------------------------------------------
# Tokens and results


@dataclass(frozen=True)
class Token:
    """A token at ``index`` carrying ``state``.

    ``ghost`` marks tokens that crossed a ghost label (see
    :func:`ghost_zero`); it is bookkeeping for tree exploration and never
    alters how a token moves.
    """

    index: int
    state: np.ndarray
    ghost: bool = False

    @staticmethod
    def unit(index: int = 0) -> "Token":
        return Token(index, np.ones((1, 1), dtype=complex))


@dataclass(frozen=True)
class BranchOutcome:
    index: int
    state: np.ndarray
    ghost: bool = False

    @property
    def weight(self) -> float:
        return linalg.trace(self.state)


@dataclass
class RunResult:
    outcomes: list
    exhausted_mass: float = 0.0
    transitions: int = 0

    def total(self, ghost: Optional[bool] = False) -> float:
        """Trace mass of outcomes (only non-ghost by default; ``None`` for all)."""
        return sum(o.weight for o in self.outcomes if ghost is None or o.ghost == ghost)

    def by_index(self) -> dict:
        out: dict = {}
        for o in self.outcomes:
            key = (o.index, o.ghost)
            out[key] = out.get(key, 0) + o.state
        return out

    def close_to(self, other: "RunResult", tol: float = 1e-9) -> bool:
        """Outcome-wise comparison after merging equal indices."""
        a, b = self.by_index(), other.by_index()
        for key in set(a) | set(b):
            x, y = a.get(key), b.get(key)
            if x is None or y is None:
                z = x if y is None else y
                if np.abs(z).max(initial=0.0) > tol:
                    return False
                continue
            if x.shape != y.shape or not np.allclose(x, y, atol=tol, rtol=0):
                return False
        return abs(self.exhausted_mass - other.exhausted_mass) <= tol


class Budget:
    """Fuel shared by every run charged to it.

    One unit of fuel is one *loop iteration*: a token re-entering a function
    from its argument side (an application's feedback edge), entering a
    trace feedback edge, or entering a primitive constant.
    """

    def __init__(self, fuel: int = DEFAULT_FUEL):
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.fuel = fuel
        self.used = 0
        self.transitions = 0
        self.max_transitions = fuel * TRANSITIONS_PER_FUEL

    @property
    def exhausted(self) -> bool:
        return self.used >= self.fuel or self.transitions >= self.max_transitions


# --------------------------------------------------------------------------
# Arrows


class Arrow:
    """An element of A_Q: a step procedure on tokens plus a debug name."""

    name: str = "arrow"

    def step(self, token: Token) -> list:
        res = run_token(self, token)
        return res.outcomes

    def __call__(self, other: "Arrow") -> "Arrow":
        return lca_apply(self, other)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Prim(Arrow):
    """A primitive arrow given by ``fn(index, state, ghost) -> [(index, state, ghost)]``."""

    def __init__(self, fn: Callable, name: str):
        self.fn = fn
        self.name = name

    def step(self, token: Token) -> list:
        return [BranchOutcome(i, s, g) for i, s, g in self.fn(token.index, token.state, token.ghost)]


class Wiring(Arrow):
    """A state-preserving partial map on indices (``None`` drops the token)."""

    def __init__(self, fn: Callable[[int], Optional[int]], name: str):
        self.fn = fn
        self.name = name

    def step(self, token: Token) -> list:
        j = self.fn(token.index)
        return [] if j is None else [BranchOutcome(j, token.state, token.ghost)]


class NetArrow(Arrow):
    """An arrow presented by a closed term over the node language below.

    ``source`` is an :class:`RTerm` or a zero-argument callable producing
    one; the callable form allows self-reference (the term may mention this
    very arrow as a constant).
    """

    def __init__(self, source, name: str = "net", inlinable: bool = False,
                 unfold_arity: Optional[int] = None):
        self._source = source
        self._net: Optional[_Net] = None
        self.name = name
        # the normaliser may replace this constant by its term (non-recursive
        # terms only), or unfold it once applied to ``unfold_arity`` arguments
        self.inlinable = inlinable
        self.unfold_arity = unfold_arity

    @property
    def term(self) -> "RTerm":
        src = self._source
        return src() if callable(src) and not isinstance(src, RTerm) else src

    @property
    def net(self) -> "_Net":
        if self._net is None:
            self._net = _Net(self.term, self.name)
        return self._net

    def step(self, token: Token) -> list:
        return run_token(self, token).outcomes


# --------------------------------------------------------------------------
# Term language for nets


class RTerm:
    __slots__ = ()

    def __call__(self, *args: "RTerm") -> "RTerm":
        t = self
        for a in args:
            t = RApp(t, lift(a))
        return t


@dataclass(frozen=True, eq=False)
class RVar(RTerm):
    name: str


@dataclass(frozen=True, eq=False)
class RLam(RTerm):
    var: str
    body: RTerm


@dataclass(frozen=True, eq=False)
class RApp(RTerm):
    fun: RTerm
    arg: RTerm


@dataclass(frozen=True, eq=False)
class RConst(RTerm):
    arrow: Arrow


@dataclass(frozen=True, eq=False)
class RBang(RTerm):
    """``!t`` for a closed ``t``."""

    body: RTerm


@dataclass(frozen=True, eq=False)
class RComp(RTerm):
    """Kleisli composite ``g ⊙ f`` (``f`` runs first)."""

    g: RTerm
    f: RTerm


@dataclass(frozen=True, eq=False)
class RCoprod(RTerm):
    f: RTerm
    g: RTerm


@dataclass(frozen=True, eq=False)
class RTrace(RTerm):
    f: RTerm


@dataclass(frozen=True, eq=False)
class RFamily(RTerm):
    """``⟨i, n⟩ ↦ ⟨i, x_i(n)⟩`` for a lazily produced family of arrows."""

    get: Callable[[int], Arrow]


def lift(x) -> RTerm:
    if isinstance(x, RTerm):
        return x
    if isinstance(x, Arrow):
        return RConst(x)
    raise TypeError(f"cannot use {x!r} as a term")


_gensym = itertools.count()


def fresh(base: str = "v") -> str:
    return f"{base}#{next(_gensym)}"


def lam(*names_and_body) -> RTerm:
    """``lam("x", "y", body)`` builds ``λx.λy.body``."""
    *names, body = names_and_body
    body = lift(body)
    for n in reversed(names):
        body = RLam(n, body)
    return body


def app(f, *args) -> RTerm:
    t = lift(f)
    for a in args:
        t = RApp(t, lift(a))
    return t


def rfree_vars(t: RTerm) -> frozenset:
    out = set()
    stack = [(t, frozenset())]
    while stack:
        u, bound = stack.pop()
        if isinstance(u, RVar):
            if u.name not in bound:
                out.add(u.name)
        elif isinstance(u, RLam):
            stack.append((u.body, bound | {u.var}))
        elif isinstance(u, RApp):
            stack.append((u.fun, bound))
            stack.append((u.arg, bound))
        elif isinstance(u, RBang):
            stack.append((u.body, bound))
        elif isinstance(u, RComp):
            stack.extend([(u.g, bound), (u.f, bound)])
        elif isinstance(u, RCoprod):
            stack.extend([(u.f, bound), (u.g, bound)])
        elif isinstance(u, RTrace):
            stack.append((u.f, bound))
    return frozenset(out)


def show(t: RTerm, limit: int = 400) -> str:
    """Compact rendering for debugging."""
    def go(u):
        if isinstance(u, RVar):
            return u.name
        if isinstance(u, RLam):
            return f"(λ{u.var}.{go(u.body)})"
        if isinstance(u, RApp):
            return f"({go(u.fun)} {go(u.arg)})"
        if isinstance(u, RConst):
            return u.arrow.name
        if isinstance(u, RBang):
            return f"!{go(u.body)}"
        if isinstance(u, RComp):
            return f"({go(u.g)}⊙{go(u.f)})"
        if isinstance(u, RCoprod):
            return f"({go(u.f)}+{go(u.g)})"
        if isinstance(u, RTrace):
            return f"tr({go(u.f)})"
        return "fam"
    s = go(t)
    return s if len(s) <= limit else s[:limit] + "…"


class AffinityError(ValueError):
    """A bound variable is used more than once, or a box is not closed."""


# --------------------------------------------------------------------------
# Net compilation

(K_VAR, K_LAM, K_APP, K_CONST, K_BANG, K_COMP, K_COPROD, K_TRACE, K_FAMILY) = range(9)


class _Net:
    """Flat arrays describing a closed term as a graph of nodes."""

    def __init__(self, term: RTerm, name: str = "net"):
        self.name = name
        self.kind: list = []
        self.a: list = []       # first child / binder of a variable
        self.b: list = []       # second child / variable occurrence of a binder
        self.parent: list = []
        self.slot: list = []
        self.payload: list = []  # arrow for constants, getter for families
        root = self._build(term)
        self.root = root

    def _new(self, kind, parent, slot, payload=None) -> int:
        k = len(self.kind)
        self.kind.append(kind)
        self.a.append(-1)
        self.b.append(-1)
        self.parent.append(parent)
        self.slot.append(slot)
        self.payload.append(payload)
        return k

    def _build(self, term: RTerm) -> int:
        # iterative construction; env maps a variable name to its binder node
        root = None
        stack = [(term, -1, 0, {})]
        while stack:
            t, parent, slot, env = stack.pop()
            if isinstance(t, RVar):
                if t.name not in env:
                    raise AffinityError(f"free variable {t.name} in a closed net")
                binder = env[t.name]
                if self.b[binder] != -1:
                    raise AffinityError(f"variable {t.name} used more than once")
                k = self._new(K_VAR, parent, slot)
                self.a[k] = binder
                self.b[binder] = k
            elif isinstance(t, RLam):
                k = self._new(K_LAM, parent, slot)
                env2 = dict(env)
                env2[t.var] = k
                stack.append((t.body, k, 0, env2))
            elif isinstance(t, RApp):
                k = self._new(K_APP, parent, slot)
                stack.append((t.fun, k, 0, env))
                stack.append((t.arg, k, 1, env))
            elif isinstance(t, RConst):
                k = self._new(K_CONST, parent, slot, t.arrow)
            elif isinstance(t, RBang):
                k = self._new(K_BANG, parent, slot)
                stack.append((t.body, k, 0, {}))
            elif isinstance(t, RComp):
                k = self._new(K_COMP, parent, slot)
                stack.append((t.f, k, 0, env))
                stack.append((t.g, k, 1, env))
            elif isinstance(t, RCoprod):
                k = self._new(K_COPROD, parent, slot)
                stack.append((t.f, k, 0, env))
                stack.append((t.g, k, 1, env))
            elif isinstance(t, RTrace):
                k = self._new(K_TRACE, parent, slot)
                stack.append((t.f, k, 0, env))
            elif isinstance(t, RFamily):
                k = self._new(K_FAMILY, parent, slot, t.get)
            else:
                raise TypeError(f"not a net term: {t!r}")
            if parent == -1:
                root = k
            elif slot == 0:
                self.a[parent] = k
            else:
                self.b[parent] = k
        return root


# --------------------------------------------------------------------------
# The runner

DOWN, UP = 0, 1


def _is_zero(state: np.ndarray) -> bool:
    return not state.any()


def run_token(a: Arrow, t: Token, fuel: int = DEFAULT_FUEL, budget: Optional[Budget] = None,
              trace_hook: Optional[Callable] = None) -> RunResult:
    """Run ``t`` through ``a`` until every branch exits or the fuel is spent.

    Branch states are merged whenever two tokens meet at the same place with
    the same stack; this is sound because every arrow is linear in the state.
    """
    budget = budget if budget is not None else Budget(fuel)
    start_transitions = budget.transitions
    state = linalg.as_matrix(t.state)
    floor = NEGLIGIBLE * max(linalg.trace(state), 1e-300)
    outcomes: dict = {}
    exhausted = 0.0
    work: dict = {}
    heap: list = []
    tick = itertools.count()

    def push(net, node, direction, index, stack, st, ghost):
        nonlocal exhausted
        if _is_zero(st):
            return
        key = (id(net), node, direction, index, stack, ghost, st.shape[0])
        if key in work:
            work[key][5] = work[key][5] + st
            return
        mass = linalg.trace(st)
        if mass < floor:
            exhausted += mass
            return
        work[key] = [net, node, direction, index, stack, st, ghost]
        # heaviest branch first, so a tight budget truncates the lightest mass
        heapq.heappush(heap, (-mass, next(tick), key))

    def emit(index, st, ghost):
        key = (index, ghost, st.shape[0])
        outcomes[key] = outcomes[key] + st if key in outcomes else st

    # the outermost arrow is entered as a constant call with an empty stack
    if isinstance(a, NetArrow):
        push(a.net, a.net.root, DOWN, t.index, None, state, t.ghost)
    else:
        for o in _prim_step(a, t.index, state, t.ghost):
            emit(*o)

    while heap:
        key = heapq.heappop(heap)[2]
        net, node, direction, index, stack, st, ghost = work.pop(key)
        while True:
            if budget.exhausted:
                exhausted += linalg.trace(st)
                break
            budget.transitions += 1
            if trace_hook is not None:
                trace_hook(net.name, node, direction, index, st, ghost)
            if direction == DOWN:
                kind = net.kind[node]
                if kind == K_APP:
                    node, index = net.a[node], index << 1
                elif kind == K_LAM:
                    if index & 1:
                        occ = net.b[node]
                        if occ == -1:
                            break
                        node, index, direction = occ, index >> 1, UP
                    else:
                        node, index = net.a[node], index >> 1
                elif kind == K_VAR:
                    node, index, direction = net.a[node], (index << 1) | 1, UP
                elif kind == K_CONST or kind == K_FAMILY:
                    arrow = net.payload[node]
                    if kind == K_FAMILY:
                        i, index = decode_pair(index)
                        stack = (i, stack)
                        arrow = arrow(i)
                    budget.used += 1
                    if isinstance(arrow, NetArrow):
                        stack = ((net, node), stack)
                        net = arrow.net
                        node = net.root
                        continue
                    if isinstance(arrow, Wiring):
                        j = arrow.fn(index)
                        if j is None:
                            break
                        index, direction = j, UP
                        continue
                    outs = _prim_step(arrow, index, st, ghost)
                    if not outs:
                        break
                    for j, s2, g2 in outs[1:]:
                        push(net, node, UP, j, stack, s2, g2)
                    index, st, ghost = outs[0]
                    if _is_zero(st):
                        break
                    mass = linalg.trace(st)
                    if mass < floor:
                        exhausted += mass
                        break
                    if heap and -heap[0][0] > mass:
                        push(net, node, UP, index, stack, st, ghost)
                        break
                    direction = UP
                elif kind == K_BANG:
                    i, index = decode_pair(index)
                    stack = (i, stack)
                    node = net.a[node]
                elif kind == K_COMP:
                    node = net.a[node]
                elif kind == K_COPROD:
                    node, index = (net.b[node] if index & 1 else net.a[node]), index >> 1
                elif kind == K_TRACE:
                    node, index = net.a[node], index << 1
                else:  # pragma: no cover
                    raise AssertionError(kind)
            else:
                # UP: ``node`` answers ``index`` to its parent
                kind = net.kind[node]
                if kind == K_FAMILY:
                    i, stack = stack
                    index = encode_pair(i, index)
                parent = net.parent[node]
                if parent == -1:
                    if stack is None:
                        emit(index, st, ghost)
                        break
                    (net, node), stack = stack
                    if net.kind[node] == K_FAMILY:
                        i, stack = stack
                        index = encode_pair(i, index)
                    parent = net.parent[node]
                    if parent == -1:
                        if stack is None:
                            emit(index, st, ghost)
                            break
                        # the constant was itself the root of a called net
                        direction = UP
                        continue
                pk = net.kind[parent]
                slot = net.slot[node]
                if pk == K_APP:
                    if slot == 0:
                        if index & 1:
                            node, index, direction = net.b[parent], index >> 1, DOWN
                        else:
                            node, index = parent, index >> 1
                    else:
                        budget.used += 1
                        node, index, direction = net.a[parent], (index << 1) | 1, DOWN
                elif pk == K_LAM:
                    node, index = parent, index << 1
                elif pk == K_BANG:
                    i, stack = stack
                    node, index = parent, encode_pair(i, index)
                elif pk == K_COMP:
                    if slot == 0:
                        node, direction = net.b[parent], DOWN
                    else:
                        node = parent
                elif pk == K_COPROD:
                    node, index = parent, (index << 1) | slot
                elif pk == K_TRACE:
                    if index & 1:
                        budget.used += 1
                        node, direction = net.a[parent], DOWN
                    else:
                        node, index = parent, index >> 1
                else:  # pragma: no cover
                    raise AssertionError(pk)

    outs = [BranchOutcome(i, s, g) for (i, g, _), s in sorted(outcomes.items(), key=lambda kv: kv[0][:2])]
    return RunResult(outs, exhausted, budget.transitions - start_transitions)


def _prim_step(arrow: Arrow, index: int, st: np.ndarray, ghost: bool) -> list:
    if isinstance(arrow, Prim):
        return list(arrow.fn(index, st, ghost))
    if isinstance(arrow, Wiring):
        j = arrow.fn(index)
        return [] if j is None else [(j, st, ghost)]
    return [(o.index, o.state, o.ghost) for o in arrow.step(Token(index, st, ghost))]


# --------------------------------------------------------------------------
# Categorical and LCA structure


def compose(g: Arrow, f: Arrow) -> Arrow:
    """Kleisli composite: tokens go through ``f`` and then ``g``."""
    return NetArrow(RComp(lift(g), lift(f)), f"({g.name}⊙{f.name})")


def coprod(f: Arrow, g: Arrow) -> Arrow:
    """``f + g`` on even/odd indices."""
    return NetArrow(RCoprod(lift(f), lift(g)), f"({f.name}+{g.name})")


def trace_feedback(f: Arrow) -> Arrow:
    """Execution formula: odd outputs of ``f`` are fed back until an even exit."""
    return NetArrow(RTrace(lift(f)), f"tr({f.name})")


def copow(f: Arrow) -> Arrow:
    """``ℕ·f`` under the pairing: fibre ``i`` runs ``f`` and keeps ``i``."""
    return NetArrow(RBang(lift(f)), f"ℕ·{f.name}")


def lca_apply(a: Arrow, b: Arrow) -> Arrow:
    """``a·b``: ``a`` on the left summand with its right summand routed through ``b``."""
    return NetArrow(RApp(lift(a), lift(b)), f"({a.name} {b.name})")


def lca_bang(a: Arrow) -> Arrow:
    """``!a``: countably many copies of ``a``, one per first pairing component."""
    return NetArrow(RBang(lift(a)), f"!{a.name}")


def compile_term(t: RTerm, name: str = "term") -> NetArrow:
    """Compile a closed affine λ-term with constants directly to a net."""
    net = NetArrow(t, name)
    net.net  # build eagerly so affinity errors surface here
    return net


def apply_all(f: Arrow, *args: Arrow) -> Arrow:
    return NetArrow(app(f, *args), "app")


# --------------------------------------------------------------------------
# Combinators as index wirings
#
# Address notation: ``L n = 2n`` and ``R n = 2n+1``; a combinator applied to
# arguments x, y, z sees them at ``R``, ``L R`` and ``L L R``.

def _L(n):
    return n << 1


def _R(n):
    return (n << 1) | 1


def _split(n):
    """Return ``(is_right, payload)``."""
    return n & 1, n >> 1


def _path(n: int, depth: int):
    """Peel ``depth`` sum layers: returns (tuple of sides, payload)."""
    sides = []
    for _ in range(depth):
        sides.append(n & 1)
        n >>= 1
    return tuple(sides), n


def _build(sides, payload):
    for s in reversed(sides):
        payload = (payload << 1) | s
    return payload


_L_, _R_ = 0, 1


def _table_wiring(name: str, rules: list) -> Wiring:
    """Wiring from rules ``(in_path, out_path)``; each path is a side tuple.

    An input index is matched against the longest applicable path prefix; the
    payload is carried unchanged to the output path.
    """
    rules = sorted(rules, key=lambda r: -len(r[0]))

    def fn(n):
        for src, dst in rules:
            sides, payload = _path(n, len(src))
            if sides == src:
                return _build(dst, payload)
        return None

    return Wiring(fn, name)


def _sym(rules):
    return rules + [(b, a) for a, b in rules]


L, R = _L_, _R_
_I = _table_wiring("I", _sym([((L,), (R,))]))
_K = _table_wiring("K", _sym([((L, L), (R,))]))
_KBAR = _table_wiring("K̄", _sym([((L, L), (L, R))]))
_B = _table_wiring("B", _sym([
    ((L, L, L), (R, L)),
    ((R, R), (L, R, L)),
    ((L, R, R), (L, L, R)),
]))
_C = _table_wiring("C", _sym([
    ((L, L, L), (R, L, L)),
    ((R, R), (L, L, R)),
    ((R, L, R), (L, R)),
]))
_A = _table_wiring("A", [
    ((L, L), (L, R)),
    ((L, R), (R,)),
    ((R,), (L, L)),
])
_PDOT = _table_wiring("Ṗ", _sym([
    ((L, L, L), (R,)),
    ((L, L, R), (L, R)),
]))
_PDOT_L = _table_wiring("Ṗ_l", _sym([((L,), (R, L))]))
_PDOT_R = _table_wiring("Ṗ_r", _sym([((L,), (R, R))]))
_CONV_DOT_TO_P = _table_wiring("C_{Ṗ→P}", _sym([
    ((L, L), (L, R, L, L)),
    ((L, R, R), (R, L)),
    ((L, R, L, R), (R, R)),
]))


def _bang_wiring(name, fwd, bwd):
    """Wiring for exponential combinators, given as two index functions."""
    def fn(n):
        if n & 1:
            return bwd(n >> 1)
        return fwd(n >> 1)
    return Wiring(fn, name)


def _der_fwd(n):
    return _R(encode_pair(0, n))


def _der_bwd(m):
    i, k = decode_pair(m)
    return _L(k) if i == 0 else None


_D = _bang_wiring("D", _der_fwd, _der_bwd)


def _dig_fwd(n):
    i, r = decode_pair(n)
    j, k = decode_pair(r)
    return _R(encode_pair(encode_pair(i, j), k))


def _dig_bwd(m):
    ij, k = decode_pair(m)
    i, j = decode_pair(ij)
    return _L(encode_pair(i, encode_pair(j, k)))


_DELTA = _bang_wiring("δ", _dig_fwd, _dig_bwd)


def _F(n):
    if n & 1:  # R⟨i, m⟩
        i, m = decode_pair(n >> 1)
        if m & 1:
            return _L(_R(encode_pair(i, m >> 1)))
        return _L(_L(encode_pair(i, m >> 1)))
    rest = n >> 1
    if rest & 1:  # L R ⟨i, k⟩
        i, k = decode_pair(rest >> 1)
        return _R(encode_pair(i, _R(k)))
    i, k = decode_pair(rest >> 1)  # L L ⟨i, k⟩
    return _R(encode_pair(i, _L(k)))


_FUN = Wiring(_F, "F")


def _W(n):
    if n & 1:
        m = n >> 1  # answers of x
        if m & 1:  # R R ⟨i, k⟩ : x's first argument
            i, k = decode_pair(m >> 1)
            return _L(_R(encode_pair(2 * i, k)))
        m >>= 1
        if m & 1:  # R L R ⟨i, k⟩ : x's second argument
            i, k = decode_pair(m >> 1)
            return _L(_R(encode_pair(2 * i + 1, k)))
        return _L(_L(m >> 1))  # R L L n
    rest = n >> 1
    if rest & 1:  # L R ⟨c, k⟩ : answers of the copies of y
        c, k = decode_pair(rest >> 1)
        if c & 1:
            return _R(_L(_R(encode_pair(c >> 1, k))))
        return _R(_R(encode_pair(c >> 1, k)))
    return _R(_L(_L(rest >> 1)))  # L L n


_WCOMB = Wiring(_W, "W")


def d_i(i: int) -> Arrow:
    """``D_i``: dereliction onto copy ``i``."""
    def fwd(n):
        return _R(encode_pair(i, n))

    def bwd(m):
        j, k = decode_pair(m)
        return _L(k) if j == i else None

    return _bang_wiring(f"D_{i}", fwd, bwd)


def seq(xs) -> Arrow:
    """The sequence ``⟨x_0, x_1, …⟩`` from a list or a function ``i ↦ x_i``."""
    if callable(xs) and not isinstance(xs, Arrow):
        get = xs
    else:
        items = list(xs)

        def get(i):
            return items[i] if i < len(items) else ZERO
    return NetArrow(RFamily(get), "seq")


ZERO = Prim(lambda i, s, g: [], "⊥")


def bracket_abstract(expr: RTerm) -> NetArrow:
    """Compile an affine λ-expression to I/K/B/C combinators (no binders left)."""
    return NetArrow(_abstract_term(expr), "bracket")


def _abstract_term(t: RTerm) -> RTerm:
    if isinstance(t, (RVar, RConst, RFamily)):
        return t
    if isinstance(t, RApp):
        return RApp(_abstract_term(t.fun), _abstract_term(t.arg))
    if isinstance(t, RBang):
        if rfree_vars(t.body):
            raise AffinityError("boxes must be closed")
        return RBang(_abstract_term(t.body))
    if isinstance(t, RLam):
        return _abs(t.var, _abstract_term(t.body))
    if isinstance(t, (RComp, RCoprod, RTrace)):
        raise AffinityError("bracket abstraction works on λ-expressions only")
    raise TypeError(t)


def _abs(x: str, e: RTerm) -> RTerm:
    if isinstance(e, RVar) and e.name == x:
        return RConst(_I)
    fv = rfree_vars(e)
    if x not in fv:
        return RApp(RConst(_K), e)
    if isinstance(e, RApp):
        in_f, in_a = x in rfree_vars(e.fun), x in rfree_vars(e.arg)
        if in_f and in_a:
            raise AffinityError(f"variable {x} used more than once")
        if in_f:
            return RApp(RApp(RConst(_C), _abs(x, e.fun)), e.arg)
        return RApp(RApp(RConst(_B), e.fun), _abs(x, e.arg))
    raise AffinityError(f"cannot abstract {x} out of {show(e)}")


def _net(expr: RTerm, name: str) -> NetArrow:
    return NetArrow(expr, name)


_x, _y, _z, _w = RVar("x"), RVar("y"), RVar("z"), RVar("w")
_P = _net(RLam("x", RLam("y", RLam("z", RApp(RApp(_z, _x), _y)))), "P")
_P_L = _net(RLam("w", RApp(_w, RConst(_K))), "P_l")
_P_R = _net(RLam("w", RApp(_w, RConst(_KBAR))), "P_r")
_CONV_P_TO_DOT = _net(RLam("w", RApp(_w, RConst(_PDOT))), "C_{P→Ṗ}")
for _a in (_P, _P_L, _P_R, _CONV_P_TO_DOT):
    _a.inlinable = True

_COMBINATORS = {
    "I": _I, "K": _K, "K̄": _KBAR, "Kbar": _KBAR, "B": _B, "C": _C, "W": _WCOMB,
    "D": _D, "delta": _DELTA, "δ": _DELTA, "F": _FUN, "A": _A,
    "P": _P, "P_l": _P_L, "P_r": _P_R,
    "Ṗ": _PDOT, "Pdot": _PDOT, "Ṗ_l": _PDOT_L, "Pdot_l": _PDOT_L,
    "Ṗ_r": _PDOT_R, "Pdot_r": _PDOT_R,
    "C_{P→Ṗ}": _CONV_P_TO_DOT, "C_P_to_Pdot": _CONV_P_TO_DOT,
    "C_{Ṗ→P}": _CONV_DOT_TO_P, "C_Pdot_to_P": _CONV_DOT_TO_P,
    "zero": ZERO, "⊥": ZERO,
}


def combinator(name: str, arg=None) -> Arrow:
    """Look up a combinator; ``D_i`` and ``seq`` take an argument."""
    if name in ("D_i", "D_") or (name.startswith("D_") and name[2:].isdigit()):
        return d_i(int(arg if arg is not None else name[2:]))
    if name == "seq":
        return seq(arg)
    try:
        return _COMBINATORS[name]
    except KeyError:
        raise KeyError(f"unknown combinator {name!r}") from None


# --------------------------------------------------------------------------
# Quantum combinators


def q_state(rho) -> Prim:
    """``Q_ρ``: adjoin ``ρ`` in front of the carried state."""
    rho = linalg.as_matrix(rho)

    def fn(i, s, g):
        return [(i, np.kron(rho, s), g)]

    return Prim(fn, f"Q[{rho.shape[0]}]")


def q_unitary(u) -> Prim:
    """``Q_U``: conjugate the leading qubits by ``U``; wrong dimensions drop the token."""
    u = linalg.as_matrix(u)
    d = u.shape[0]

    def fn(i, s, g):
        m = s.shape[0]
        if m % d:
            return []
        big = np.kron(u, np.eye(m // d)) if m != d else u
        return [(i, big @ s @ big.conj().T, g)]

    return Prim(fn, f"Q_U[{d}]")


def q_project(n_plus_1: int, i: int, bit: int) -> Prim:
    """``Q^{N+1}_{|b_i⟩}``: project qubit ``i`` of the leading ``N+1`` and drop it."""
    e = linalg.basis_projector(n_plus_1, i, bit)
    d = 2 ** n_plus_1

    def fn(k, s, g):
        m = s.shape[0]
        if m % d:
            return []
        big = np.kron(e, np.eye(m // d)) if m != d else e
        return [(k, big @ s @ big.conj().T, g)]

    return Prim(fn, f"Q_|{bit}_{i}>^{n_plus_1}")


def ghost_zero() -> Prim:
    """Observationally ``Q_0`` for trace purposes: its outcomes are flagged ghost.

    The state passes through unchanged so the flagged mass measures how much
    weight reaches a measurement label; callers count ghost outcomes as zero.
    """
    return Prim(lambda i, s, g: [(i, s, True)], "Q_0'")


def quantum_combinator(kind: str, payload=None) -> Arrow:
    """``Q_ρ``, ``Q_U``, projections ``Q^{N+1}_{|b_i⟩}`` and the derived ``U_U``, ``Pr``.

    ``payload`` is a density matrix for ``"Q_rho"``, a unitary for ``"Q_U"``
    and ``"U_U"``, and a triple ``(N+1, i, bit)`` for ``"Q_proj"``/``"Pr"``.
    """
    if kind in ("Q_rho", "Q_ρ", "state"):
        m = linalg.as_matrix(payload)
        if m.shape[0] != m.shape[1]:
            raise linalg.DimensionError("Q_ρ needs a square matrix")
        return q_state(m)
    if kind in ("Q_U", "unitary"):
        m = linalg.as_matrix(payload)
        linalg.n_qubits(m.shape[0])
        return q_unitary(m)
    if kind in ("Q_proj", "project"):
        n1, i, bit = payload
        return q_project(n1, i, bit)
    if kind == "U_U":
        return lca_apply(_A, quantum_combinator("Q_U", payload))
    if kind in ("Pr", "Pr_proj"):
        return lca_apply(_A, quantum_combinator("Q_proj", payload))
    if kind == "ghost":
        return ghost_zero()
    raise KeyError(f"unknown quantum combinator {kind!r}")


# --------------------------------------------------------------------------
# Normalisation
#
# Realizer terms contain many administrative redexes; every redex left in a
# net costs token traversals.  The passes below rewrite a term with
# equations valid in the algebra (β, and the defining equations of I, K, K̄,
# D, δ, F, W), so the compiled net computes the same arrow.


class NormalisationLimit(RuntimeError):
    """Raised when normalisation exceeds its step budget."""


class _Clo:
    __slots__ = ("var", "body", "env")

    def __init__(self, var, body, env):
        self.var, self.body, self.env = var, body, env


class _Stuck:
    """A head (variable name or arrow) applied to values."""

    __slots__ = ("head", "args")

    def __init__(self, head, args):
        self.head, self.args = head, args


class _BangV:
    __slots__ = ("body",)

    def __init__(self, body):
        self.body = body


class _Norm:
    def __init__(self, limit: int, max_unfolds: int = 256):
        self.steps = 0
        self.limit = limit
        self.unfolds = max_unfolds

    def tick(self):
        self.steps += 1
        if self.steps > self.limit:
            raise NormalisationLimit(f"more than {self.limit} normalisation steps")

    def eval(self, t: RTerm, env: dict):
        self.tick()
        if isinstance(t, RVar):
            return env[t.name] if t.name in env else _Stuck(t.name, ())
        if isinstance(t, RLam):
            return _Clo(t.var, t.body, env)
        if isinstance(t, RApp):
            return self.apply(self.eval(t.fun, env), self.eval(t.arg, env))
        if isinstance(t, RConst):
            a = t.arrow
            if isinstance(a, NetArrow) and a.inlinable:
                return self.eval(a.term, {})
            return _Stuck(a, ())
        if isinstance(t, RBang):
            return _BangV(self.eval(t.body, {}))
        # categorical glue nodes are left alone
        return _Stuck(_Opaque(t, env, self), ())

    def apply(self, f, a):
        self.tick()
        if isinstance(f, _Clo):
            env = dict(f.env)
            env[f.var] = a
            return self.eval(f.body, env)
        if isinstance(f, _Stuck):
            args = f.args + (a,)
            head = f.head
            if isinstance(head, Arrow):
                out = self.rule(head, args)
                if out is not None:
                    return out
            return _Stuck(head, args)
        return _Stuck(f, (a,))  # a box in head position

    def rule(self, c: Arrow, args):
        n = len(args)
        if c is _I and n == 1:
            return args[0]
        if c is _K and n == 2:
            return args[0]
        if c is _KBAR and n == 2:
            return args[1]
        if c is _D and n == 1 and isinstance(args[0], _BangV):
            return args[0].body
        if c is _DELTA and n == 1 and isinstance(args[0], _BangV):
            return _BangV(args[0])
        if c is _FUN and n == 2 and isinstance(args[0], _BangV) and isinstance(args[1], _BangV):
            return _BangV(self.apply(args[0].body, args[1].body))
        if c is _WCOMB and n == 2 and isinstance(args[1], _BangV):
            return self.apply(self.apply(args[0], args[1]), args[1])
        if (isinstance(c, NetArrow) and c.unfold_arity is not None and n == c.unfold_arity
                and self.unfolds > 0):
            self.unfolds -= 1
            v = self.eval(c.term, {})
            for x in args:
                v = self.apply(v, x)
            return v
        return None

    def readback(self, v) -> RTerm:
        self.tick()
        if isinstance(v, _Clo):
            x = fresh(v.var.split("#")[0])
            return RLam(x, self.readback(self.apply(v, _Stuck(x, ()))))
        if isinstance(v, _BangV):
            return RBang(self.readback(v.body))
        head = v.head
        if isinstance(head, str):
            t: RTerm = RVar(head)
        elif isinstance(head, Arrow):
            t = RConst(head)
        elif isinstance(head, _Opaque):
            t = head.term()
        else:
            t = self.readback(head)
        for a in v.args:
            t = RApp(t, self.readback(a))
        return t


class _Opaque:
    """A glue node (composite, coproduct, trace, family) kept as is."""

    def __init__(self, t, env, norm):
        self.t, self.env, self.norm = t, env, norm

    def term(self):
        if rfree_vars(self.t):
            raise NormalisationLimit("glue node with free variables")
        return self.t


def normalise(t: RTerm, limit: int = 200_000) -> RTerm:
    """β-normal form modulo the exponential equations; raises on budget overrun."""
    n = _Norm(limit)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 50_000))
    try:
        return n.readback(n.eval(t, {}))
    finally:
        sys.setrecursionlimit(old)


def normalise_or_keep(t: RTerm, limit: int = 200_000) -> RTerm:
    try:
        return normalise(t, limit)
    except (NormalisationLimit, RecursionError):
        return t
