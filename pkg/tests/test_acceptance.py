"""Acceptance criteria, one check per criterion.

Each check returns ``(ok, detail)``.  Under pytest every criterion is its own
test and its PASS/FAIL line is echoed in the terminal summary; run this file
directly to print the lines without pytest.
"""

from __future__ import annotations

import itertools
import sys
import time

import numpy as np
import pytest

from hoq import denotation as dn
from hoq import linalg
from hoq.generate import random_programs
from hoq.goi import Token, apply_all, combinator, compose, lca_apply, lca_bang, run_token
from hoq.operational import approximants, bigstep, reduction_tree, step
from hoq.programs import CORPUS, direct_source, teleport_source
from hoq.syntax import (
    FF, GATES, TOP, TT, App, Bang, Lolli, Meas, New, NQbit, Pair, Sum, Tensor, is_value, parse,
)
from hoq.typing import check, infer_or_raise, join, meet, subtype

from support import (
    as_prim, eta, kleisli_arrows, monad_elements, oracle_compose, oracle_run, plug,
    probe_indices, random_arrow, random_context, same_on,
)

RESULTS: dict = {}
ZERO = np.diag([1.0, 0.0])


def _both(m, fuel=10_000, depth=32):
    return bigstep(m, fuel), dn.denote(m, depth)


# ---------------------------------------------------------------------------


def fair_coin():
    start = time.perf_counter()
    op, den = _both(parse(CORPUS["fcoin"]))
    took = time.perf_counter() - start
    ok = op.close_to((0.5, 0.5), 1e-6) and den.close_to((0.5, 0.5), 1e-6) and took < 1
    return ok, f"op={tuple(op)} den={tuple(den)} {took:.2f}s"


def teleportation():
    start = time.perf_counter()
    problems = []
    for g in ("I", "H", "X"):
        u = GATES[g]
        rho = u @ ZERO @ u.conj().T
        leaves = list(reduction_tree(parse(teleport_source(g, measure=False)), 200).leaves())
        if len(leaves) != 4 or not all(
                isinstance(t, New) and np.allclose(t.matrix, rho / 4, atol=1e-9, rtol=0)
                for _, t in leaves):
            problems.append(f"{g}: leaves")
        tel, direct = parse(teleport_source(g, measure=True)), parse(direct_source(g))
        for sem in (lambda m: bigstep(m, 10_000), dn.denote):
            if not sem(tel).close_to(sem(direct), 1e-6):
                problems.append(f"{g}: meas")
    took = time.perf_counter() - start
    if took >= 5:
        problems.append(f"slow {took:.2f}s")
    return not problems, "; ".join(problems) or f"I/H/X ok in {took:.2f}s"


def tree_example():
    e = dn.explore(dn.tree_of(parse(CORPUS["tree"])), 32)
    edges = {(p, b): lab for p, b, lab in e.edges}
    ok = (edges[((), "tt")] == 0 and edges[((), "ff")] == 0
          and abs(edges[(("tt",), "tt")] - 0.5) <= 1e-6 and abs(edges[(("ff",), "ff")] - 0.5) <= 1e-6
          and e.prob.close_to((0.5, 0.5), 1e-6))
    return ok, f"prob={tuple(e.prob)}"


def two_measurements():
    m = parse(CORPUS["twomeas"])
    op, den = _both(m)
    want = (5 / 6, 1 / 6)
    edges = {(p, b): lab for p, b, lab in dn.explore(dn.tree_of(m), 32).edges if lab > 1e-12}
    # 0-0 root, a measurement under one root edge splitting 1/2, then 1/3 and 1/6 below
    shape = sorted(round(v, 9) for v in edges.values()) == [round(1 / 6, 9), round(1 / 3, 9), 0.5]
    root = all(lab == 0 for (p, _), lab in edges.items() if p == ())
    ok = op.close_to(want, 1e-6) and den.close_to(want, 1e-6) and shape and root
    return ok, f"op={tuple(op)} den={tuple(den)} labels={sorted(edges.values())}"


def adequacy_fuzz():
    start = time.perf_counter()
    worst, unsound = 0.0, 0
    programs = random_programs(7, 200)
    for m in programs:
        chain = approximants(m, 10_000)
        op, den = chain[-1][1], dn.denote(m, 32)
        worst = max(worst, abs(op.p - den.p), abs(op.q - den.q))
        unsound += any(b.p > den.p + 1e-9 or b.q > den.q + 1e-9 for _, b in chain)
    took = time.perf_counter() - start
    ok = worst <= 1e-5 and unsound == 0 and took < 300
    return ok, f"{len(programs)} programs, worst diff {worst:.2e}, unsound {unsound}, {took:.1f}s"


def _lca_equations(x, y, z):
    c = combinator
    bx, by = lca_bang(x), lca_bang(y)
    return {
        "B": (apply_all(c("B"), x, y, z), apply_all(x, lca_apply(y, z))),
        "C": (apply_all(c("C"), x, y, z), apply_all(x, z, y)),
        "I": (apply_all(c("I"), x), x),
        "K": (apply_all(c("K"), x, by), x),
        "W": (apply_all(c("W"), x, by), apply_all(x, by, by)),
        "D": (apply_all(c("D"), bx), x),
        "δ": (apply_all(c("delta"), bx), lca_bang(lca_bang(x))),
        "F": (apply_all(c("F"), bx, by), lca_bang(lca_apply(x, y))),
        "K full": (apply_all(c("K"), x, y), x),
    }


def lca_laws():
    counts, failures = {}, []
    for seed in range(2):
        rng = np.random.default_rng(1000 + seed)
        x, y, z = (random_arrow(rng, n) for n in "xyz")
        for law, (lhs, rhs) in _lca_equations(x, y, z).items():
            for n in probe_indices():
                if not same_on(lhs, rhs, Token(n, linalg.random_density(2, rng)), 1e-9):
                    failures.append(f"{law}@{n}")
                counts[law] = counts.get(law, 0) + 1
    ok = not failures and min(counts.values()) >= 50 and len(counts) == 9
    return ok, f"{min(counts.values())}+ instances x 9 equations; failures {failures[:5]}"


_STATES = {1: np.ones((1, 1), complex), 2: linalg.random_density(2, np.random.default_rng(26))}


def _same_arrow(a, b, dom):
    return all(run_token(a, Token(x, r)).close_to(run_token(b, Token(x, r)), 1e-9)
               for x in range(dom) for r in _STATES.values())


def monad_laws():
    bad, checked = 0, 0
    for dom, cod in itertools.product((1, 2), repeat=2):
        for f in kleisli_arrows(dom, cod):
            F = as_prim(f)
            bad += not _same_arrow(compose(as_prim(eta(cod)), F), F, dom)
            bad += not _same_arrow(compose(F, as_prim(eta(dom))), F, dom)
            checked += 2
    # associativity acts pointwise in the domain, so a one-point domain is exhaustive
    for y, z, w in itertools.product((1, 2), repeat=3):
        gs, hs = kleisli_arrows(y, z), kleisli_arrows(z, w)
        for f in monad_elements(y):
            F = as_prim((f,))
            for g in gs:
                G = as_prim(g)
                for h in hs:
                    H = as_prim(h)
                    left, right = compose(H, compose(G, F)), compose(compose(H, G), F)
                    bad += not _same_arrow(left, right, 1)
                    want = oracle_compose(h, oracle_compose(g, (f,)))
                    for r in _STATES.values():
                        got = run_token(left, Token(0, r)).by_index()
                        exp = oracle_run(want, 0, r)
                        bad += not all(np.allclose(got.get((k, False), 0), exp.get(k, 0), atol=1e-9)
                                       for k in set(exp) | {k for k, _ in got})
                    checked += 1
    return bad == 0, f"{checked} unit/associativity instances, {bad} failures"


def _reachable(m, fuel):
    out, work = [], [(m, fuel)]
    while work:
        t, k = work.pop()
        out.append(t)
        r = step(t) if k else None
        if r is not None:
            work.append((r.target, k - 1))
            if r.buddy is not None:
                work.append((r.buddy.target, k - 1))
    return out


def _lattice():
    base = [NQbit(0), NQbit(1), TOP]
    banged = lambda ts: [Bang(Bang(t)) for t in ts] + [Bang(t) for t in ts] + list(ts)
    level0 = banged(base)
    return level0 + banged([k(a, b) for k in (Lolli, Tensor, Sum) for a in level0 for b in level0])


def type_safety():
    problems = 0
    programs = [m for seed in range(250) for m in random_programs(10_000 + seed, 2)]
    for m in programs:
        ty, _ = infer_or_raise((), m)
        for t in _reachable(m, 40):
            problems += check((), t, ty) is None
            problems += step(t) is None and not is_value(t)
    lattice = _lattice()
    rng = np.random.default_rng(3)
    sample = [lattice[i] for i in rng.choice(len(lattice), 40, replace=False)]
    for a in sample:
        problems += not subtype(a, a)
        ups = [b for b in lattice if subtype(a, b)]
        problems += sum(not subtype(a, c) for b in ups[:6] for c in lattice if subtype(b, c))
        for b in sample[:12]:
            common_up = [c for c in lattice if subtype(a, c) and subtype(b, c)]
            common_down = [c for c in lattice if subtype(c, a) and subtype(c, b)]
            j, mt = join(a, b), meet(a, b)
            problems += (j is None) != (not common_up) or (j is not None and not all(
                subtype(j, c) for c in common_up))
            problems += (mt is None) != (not common_down) or (mt is not None and not all(
                subtype(c, mt) for c in common_down))
    return problems == 0, f"{len(programs)} programs, lattice of {len(lattice)} types, {problems} violations"


def loewner():
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(100):
        d = int(rng.choice([2, 4]))
        a = linalg.random_density(d, rng) * 0.5
        gap = linalg.random_density(d, rng) * 0.5
        b = a + gap
        c = b + linalg.random_density(d, rng) * 0.1
        bad += not linalg.loewner_leq(a, a)
        bad += not (linalg.loewner_leq(a, b) and linalg.loewner_leq(b, c) and linalg.loewner_leq(a, c))
        # antisymmetry: the only way back down is equality
        bad += linalg.loewner_leq(b, a) != bool(np.allclose(gap, 0, atol=1e-9))
        x = linalg.random_density(d, rng)
        oracle = np.linalg.eigvalsh(x - a).min() >= -1e-9
        bad += linalg.loewner_leq(a, x) != oracle
    for _ in range(20):
        incs = [linalg.random_density(2, rng) * 0.1 * 0.5 ** k for k in range(8)]
        chain = list(itertools.accumulate(incs))
        for i, j in itertools.combinations(range(len(chain)), 2):
            diff = linalg.trace_norm(chain[j] - chain[i]) - (linalg.trace(chain[j]) - linalg.trace(chain[i]))
            bad += abs(diff) > 1e-9
    return bad == 0, f"100 pairs, 20 chains, {bad} violations"


def measurement_decomposition():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        rho = linalg.random_density(2, rng)
        ctx = random_context(rng, "bit", nest=int(rng.integers(1, 3)))
        whole = dn.denote(plug(ctx, App(Meas(1, 1), New(rho))))
        tt, ff = dn.denote(plug(ctx, TT)), dn.denote(plug(ctx, FF))
        p0, p1 = rho[0, 0].real, rho[1, 1].real
        worst = max(worst, abs(whole.p - p0 * tt.p - p1 * ff.p), abs(whole.q - p0 * tt.q - p1 * ff.q))
    for _ in range(20):
        n = int(rng.integers(2, 4))
        i = int(rng.integers(1, n + 1))
        rho = linalg.random_density(2 ** n, rng)
        ctx = random_context(rng, "pair", nest=int(rng.integers(1, 3)), rest=n - 1)
        whole = dn.denote(plug(ctx, App(Meas(n, i), New(rho))))
        parts = [dn.denote(plug(ctx, Pair(b, New(linalg.project(rho, i, bit)))))
                 for bit, b in ((0, TT), (1, FF))]
        worst = max(worst, abs(whole.p - parts[0].p - parts[1].p), abs(whole.q - parts[0].q - parts[1].q))
    return worst <= 1e-6, f"40 contexts (20 per lemma), worst diff {worst:.2e}"


CRITERIA = {
    1: ("fair coin", fair_coin),
    2: ("teleportation", teleportation),
    3: ("tree example", tree_example),
    4: ("two measurements", two_measurements),
    5: ("adequacy fuzzing", adequacy_fuzz),
    6: ("combinatory algebra laws", lca_laws),
    7: ("monad laws", monad_laws),
    8: ("type safety", type_safety),
    9: ("Löwner order and chains", loewner),
    10: ("measurement decomposition", measurement_decomposition),
}


def line(num: int, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'}  criterion {num:>2} {CRITERIA[num][0]}: {detail}"


@pytest.mark.parametrize("num", list(CRITERIA), ids=lambda n: CRITERIA[n][0].replace(" ", "_"))
def test_criterion(num):
    ok, detail = CRITERIA[num][1]()
    RESULTS[num] = line(num, ok, detail)
    print(RESULTS[num])
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, (_, check_fn) in CRITERIA.items():
        ok, detail = check_fn()
        failed += not ok
        print(line(num, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
