"""Labelled small-step reduction and big-step probabilities of bit programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import linalg
from .syntax import (
    FF, TT, App, Cmp, Gate, InjL, InjR, Lam, LetPair, LetRec, LetStar, Match, Meas,
    New, Pair, Star, Term, free_vars, fresh, print_term, rename, split_redex, subst,
)

MEASUREMENT_RULES = ("meas1", "meas2", "meas3", "meas4")


class StuckError(RuntimeError):
    """A closed non-value with no reduction; for typable terms this is a bug."""


@dataclass(frozen=True)
class Reduction:
    """``m →_label target``; measurement steps carry their ``buddy``."""

    label: float
    target: Term
    rule: str = ""
    buddy: Optional["Reduction"] = None


@dataclass(frozen=True)
class ProbPair:
    p: float
    q: float

    def __iter__(self):
        yield self.p
        yield self.q

    def close_to(self, other, tol: float = 1e-6) -> bool:
        op, oq = other
        return abs(self.p - op) <= tol and abs(self.q - oq) <= tol


def _contract(redex: Term):
    """Reduce a redex; returns a list of ``(label, rule, result)`` (two for measurement)."""
    if isinstance(redex, App):
        f, v = redex.fun, redex.arg
        if isinstance(f, Lam):
            return [(1.0, "⊸", subst(f.body, f.var, v))]
        if isinstance(f, Gate) and isinstance(v, New) and v.matrix.shape == f.matrix.shape:
            u = f.matrix
            return [(1.0, "U", New(u @ v.matrix @ u.conj().T))]
        if (isinstance(f, Cmp) and isinstance(v, Pair) and isinstance(v.left, New)
                and isinstance(v.right, New) and v.left.qubits == f.m and v.right.qubits == f.n):
            return [(1.0, "cmp", New(linalg.tensor(v.left.matrix, v.right.matrix)))]
        if isinstance(f, Meas) and isinstance(v, New) and v.qubits == f.n:
            rho = v.matrix
            if f.n == 1:
                return [(float(rho[0, 0].real), "meas3", TT), (float(rho[1, 1].real), "meas4", FF)]
            r0, r1 = linalg.project(rho, f.i, 0), linalg.project(rho, f.i, 1)
            return [(1.0, "meas1", Pair(TT, New(r0))), (1.0, "meas2", Pair(FF, New(r1)))]
        return None
    if isinstance(redex, LetPair) and isinstance(redex.bound, Pair):
        v, w = redex.bound.left, redex.bound.right
        body = redex.body
        if redex.x == redex.y:
            return None
        # simultaneous substitution: rename y first so V cannot capture it
        if redex.y in free_vars(v) or redex.x in free_vars(w):
            tmp = fresh(redex.y, free_vars(body) | free_vars(v) | free_vars(w))
            body = rename(body, redex.y, tmp)
            return [(1.0, "⊠", subst(subst(body, redex.x, v), tmp, w))]
        return [(1.0, "⊠", subst(subst(body, redex.x, v), redex.y, w))]
    if isinstance(redex, LetStar) and isinstance(redex.bound, Star):
        return [(1.0, "⊤", redex.body)]
    if isinstance(redex, Match):
        s = redex.scrut
        if isinstance(s, InjL):
            return [(1.0, "+1", subst(redex.left, redex.x, s.body))]
        if isinstance(s, InjR):
            return [(1.0, "+2", subst(redex.right, redex.y, s.body))]
        return None
    if isinstance(redex, LetRec):
        unrolled = Lam(redex.x, redex.dom,
                       LetRec(redex.f, redex.dom, redex.cod, redex.x, redex.fun_body, redex.fun_body))
        return [(1.0, "rec", subst(redex.body, redex.f, unrolled))]
    return None


def step(m: Term) -> Optional[Reduction]:
    """The reduction of ``m`` (with buddy for measurements), ``None`` on values."""
    split = split_redex(m)
    if split is None:
        return None
    out = _contract(split.redex)
    if out is None:
        raise StuckError(f"stuck term: {print_term(split.redex)}")
    if len(out) == 1:
        label, rule, t = out[0]
        return Reduction(label, split.plug(t), rule)
    (l0, r0, t0), (l1, r1, t1) = out
    buddy = Reduction(l1, split.plug(t1), r1)
    return Reduction(l0, split.plug(t0), r0, buddy)


def _base(m: Term) -> tuple[float, float]:
    if isinstance(m, InjL) and isinstance(m.body, Star):
        return 1.0, 0.0
    if isinstance(m, InjR) and isinstance(m.body, Star):
        return 0.0, 1.0
    return 0.0, 0.0


def bigstep(m: Term, fuel: int) -> ProbPair:
    """``M ⇓^fuel (p, q)``, computed over the leaves of the reduction tree.

    The recursive definition is linear in the leaf contributions, so a branch
    reached with weight ``w`` and ``k`` steps left adds ``w * base`` of the term
    it reaches once fuel or reductions run out.  Zero-weight branches are
    dropped since they add nothing.
    """
    p = q = 0.0
    work = [(m, 1.0, fuel)]
    while work:
        t, w, k = work.pop()
        while k > 0:
            r = step(t)
            if r is None:
                break
            k -= 1
            if r.buddy is not None:
                if r.buddy.label * w > 0:
                    work.append((r.buddy.target, w * r.buddy.label, k))
                w *= r.label
                if w <= 0:
                    break
            t = r.target
        if w > 0:
            bp, bq = _base(t)
            p += w * bp
            q += w * bq
    return ProbPair(p, q)


def approximants(m: Term, fuel: int) -> list:
    """Every distinct ``⇓^k`` for ``k ≤ fuel`` as ``[(k, ProbPair)]``.

    A leaf value reached after ``s`` steps counts towards ``⇓^k`` exactly for
    ``k ≥ s``, so the whole chain comes from one walk: bucket the leaf mass by
    depth and accumulate.  The list starts at ``k = 0`` and only records the
    step counts where the pair changes.
    """
    buckets: dict = {}
    work = [(m, 1.0, 0)]
    while work:
        t, w, s = work.pop()
        while s < fuel:
            r = step(t)
            if r is None:
                break
            s += 1
            if r.buddy is not None:
                if r.buddy.label * w > 0:
                    work.append((r.buddy.target, w * r.buddy.label, s))
                w *= r.label
                if w <= 0:
                    break
            t = r.target
        bp, bq = _base(t)
        if w > 0 and (bp or bq):
            acc = buckets.setdefault(s, [0.0, 0.0])
            acc[0] += w * bp
            acc[1] += w * bq
    out, p, q = [(0, ProbPair(0.0, 0.0))], 0.0, 0.0
    for s in sorted(buckets):
        p += buckets[s][0]
        q += buckets[s][1]
        if s == 0:
            out = []
        out.append((s, ProbPair(p, q)))
    return out


def approximant_at(chain: list, k: int) -> ProbPair:
    """Look up ``⇓^k`` in the output of :func:`approximants`."""
    best = chain[0][1]
    for s, pair in chain:
        if s > k:
            break
        best = pair
    return best


@dataclass
class TreeNode:
    """A node of the labelled reduction tree."""

    term: Term
    children: list = field(default_factory=list)  # [(label, rule, TreeNode)]

    def leaves(self):
        """Yield ``(weight, term)`` for every leaf, multiplying edge labels."""
        stack = [(1.0, self)]
        while stack:
            w, n = stack.pop()
            if not n.children:
                yield w, n.term
            for label, _, c in reversed(n.children):
                stack.append((w * label, c))

    def depth(self) -> int:
        d, stack = 0, [(0, self)]
        while stack:
            k, n = stack.pop()
            d = max(d, k)
            stack.extend((k + 1, c) for _, _, c in n.children)
        return d


def reduction_tree(m: Term, fuel: int) -> TreeNode:
    """The labelled tree of all reduction paths up to depth ``fuel``."""
    root = TreeNode(m)
    work = [(root, fuel)]
    while work:
        node, k = work.pop()
        if k == 0:
            continue
        r = step(node.term)
        if r is None:
            continue
        for red in (r, r.buddy) if r.buddy is not None else (r,):
            child = TreeNode(red.target)
            node.children.append((red.label, red.rule, child))
            work.append((child, k - 1))
    return root


def tree_to_dot(root: TreeNode, prune_zero: bool = True) -> str:
    """Graphviz rendering; zero-label edges are hidden by default."""
    lines = ["digraph reduction {", '  node [shape=box, fontname="monospace"];']
    ids = {}
    stack = [root]
    while stack:
        n = stack.pop()
        ids[id(n)] = f"n{len(ids)}"
        label = print_term(n.term).replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'  {ids[id(n)]} [label="{label}"];')
        for lab, _, c in reversed(n.children):
            if prune_zero and lab == 0:
                continue
            stack.append(c)
    stack = [root]
    while stack:
        n = stack.pop()
        for lab, rule, c in n.children:
            if prune_zero and lab == 0:
                continue
            lines.append(f'  {ids[id(n)]} -> {ids[id(c)]} [label="{lab:.6g} ({rule})"];')
            stack.append(c)
    lines.append("}")
    return "\n".join(lines)
