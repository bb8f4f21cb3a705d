"""Shared helpers for the test suite: random arrows and observational equality."""

from __future__ import annotations

import itertools

import numpy as np

from hoq import linalg
from hoq.goi import Prim, Token, encode_pair, run_token

ROWS = 5


def random_arrow(rng: np.random.Generator, name: str = "x", damping: float = 0.7) -> Prim:
    """An index- and state-sensitive arrow with a random finite table.

    Each index class mod ``ROWS`` sends the token to one or two new indices
    through a random quantum operation on the leading qubit, scaled so the
    trace condition holds with room to spare.
    """
    table = []
    for _ in range(ROWS):
        outs = []
        for _ in range(int(rng.integers(1, 3))):
            outs.append((int(rng.integers(0, 12)), linalg.random_qo(2, 2, rng)))
        table.append(outs)
    share = damping / 2

    def fn(n, s, g):
        res = []
        for off, qo in table[n % ROWS]:
            d = s.shape[0]
            if d % 2 == 0:
                kraus = [np.kron(np.sqrt(share) * k, np.eye(d // 2)) for k in qo.kraus]
            else:
                kraus = [np.sqrt(share) * np.eye(d)]
            res.append(((n // ROWS) * 3 + off, sum(k @ s @ k.conj().T for k in kraus), g))
        return res

    return Prim(fn, name)


def probe_indices() -> list:
    """Plain indices plus indices that look like bang-copy encodings."""
    return list(range(24)) + [encode_pair(i, n) for i in range(4) for n in range(6)]


def same_on(a, b, token: Token, tol: float = 1e-9, fuel: int = 10_000, escalations: int = 2) -> bool:
    """Compare the runs of one token, raising the fuel while truncation could explain a gap.

    Two arrows that are equal as suprema can spend fuel differently, so runs
    cut off at the same budget may differ by mass still in flight.  A gap is
    only final once neither run has exhausted mass left or the budget has
    been raised ``escalations`` times (by 8x each).
    """
    for _ in range(escalations + 1):
        ra, rb = run_token(a, token, fuel=fuel), run_token(b, token, fuel=fuel)
        if ra.close_to(rb, tol):
            return True
        if ra.exhausted_mass <= tol and rb.exhausted_mass <= tol:
            return False
        fuel *= 8
    return False


def observably_equal(a, b, rng: np.random.Generator, indices=None, tol: float = 1e-9,
                     fuel: int = 10_000):
    """Compare two arrows on random qubit tokens; returns the first failing index or ``None``."""
    for n in probe_indices() if indices is None else indices:
        rho = linalg.random_density(2, rng)
        if not same_on(a, b, Token(n, rho), tol, fuel):
            return n
    return None


def outcome_map(arrow, index: int, state) -> dict:
    """``{(index, ghost): summed state}`` after running one token."""
    return run_token(arrow, Token(index, linalg.as_matrix(state))).by_index()


# --------------------------------------------------------------------------
# A finite model of the quantum branching monad
#
# An element of QY (for one input) assigns to each input dimension d in {1, 2}
# a finite list of (y, QuantumOp) branches whose M-matrices sum below I_d.
# Kleisli arrows X -> QY are tuples of such elements indexed by X.

def _catalogue_ops():
    s = np.sqrt(0.5)
    zero, one = linalg.ket("0"), linalg.ket("1")
    plus = (zero + one) * s
    qo = linalg.QuantumOp.from_kraus
    return {
        "id1": linalg.QuantumOp.identity(1),
        "id2": linalg.QuantumOp.identity(2),
        "prep0": qo([zero]),                                # 1 -> 2
        "discard": qo([zero.T, one.T]),                     # 2 -> 1
        "half": qo([[[s]]]),                                # 1 -> 1, weight 1/2
        "half_plus": qo([s * plus]),                        # 1 -> 2, weight 1/2
        "p0": qo([np.diag([1.0, 0.0])]),
        "p1": qo([np.diag([0.0, 1.0])]),
        "had": linalg.QuantumOp.unitary(np.array([[1, 1], [1, -1]]) * s),
    }


OPS = _catalogue_ops()


def monad_elements(size: int) -> list:
    """A catalogue of elements of ``QY`` for ``Y = {0, .., size-1}``."""
    last = size - 1
    out = [{1: [], 2: []}]
    for y in range(size):
        out.append({1: [(y, OPS["id1"])], 2: [(y, OPS["id2"])]})
        out.append({1: [(y, OPS["prep0"])], 2: [(y, OPS["discard"])]})
    out.append({1: [(0, OPS["half"]), (last, OPS["half_plus"])], 2: [(0, OPS["p0"]), (last, OPS["p1"])]})
    out.append({1: [], 2: [(last, OPS["had"])]})
    return out


def kleisli_arrows(dom: int, cod: int) -> list:
    """All tuples of catalogue elements: the arrows ``dom -> Q(cod)``."""
    return list(itertools.product(monad_elements(cod), repeat=dom))


def as_prim(table, name: str = "k") -> Prim:
    def fn(x, s, g):
        if x >= len(table):
            return []
        return [(y, linalg.apply_qo(e, s), g) for y, e in table[x].get(s.shape[0], [])]
    return Prim(fn, name)


def eta(size: int) -> tuple:
    return tuple({1: [(y, OPS["id1"])], 2: [(y, OPS["id2"])]} for y in range(size))


def oracle_compose(g, f) -> tuple:
    """Kleisli composition by direct QO composition, independent of the token machine."""
    out = []
    for elem in f:
        comp = {}
        for d, branches in elem.items():
            comp[d] = [(z, linalg.qo_compose(ge, fe))
                       for y, fe in branches for z, ge in g[y].get(fe.out_dim, [])]
        out.append(comp)
    return tuple(out)


def oracle_run(table, x: int, rho) -> dict:
    out: dict = {}
    for y, e in table[x].get(rho.shape[0], []):
        out[y] = out.get(y, 0) + linalg.apply_qo(e, rho)
    return out


# --------------------------------------------------------------------------
# Random evaluation contexts

HOLE = "hole_"


def random_context(rng: np.random.Generator, kind: str = "bit", nest: int = 1, rest: int = 1):
    """A closed evaluation context as a term with the free variable ``HOLE``.

    ``kind="bit"`` expects a ``bit`` in the hole; ``kind="pair"`` expects a
    ``!bit ⊠ qbit[rest]`` (the result of ``meas[rest+1,i]``).  Bodies come from the
    program generator, so they may measure, recurse and call functions.
    """
    from hoq.generate import _Gen
    from hoq.syntax import BIT, TOP, App, Bang, Lam, LetPair, Match, NQbit, Tensor, Var
    from hoq.typing import check

    g = _Gen(rng, 2)
    hole = Var(HOLE)
    if kind == "pair":
        b, q = g.name("b"), g.name("q")
        ctx = LetPair(b, BIT, q, NQbit(rest), hole, g.bit([(b, BIT), (q, NQbit(rest))], 3))
    else:
        ctx = hole
    for _ in range(nest):
        if rng.random() < 0.5:
            z = g.name("z")
            ctx = App(Lam(z, BIT, g.bit([(z, BIT)], 3)), ctx)
        else:
            ctx = Match(ctx, g.name("a"), TOP, g.bit([], 2), g.name("c"), TOP, g.bit([], 2))
    hole_type = BIT if kind == "bit" else Tensor(Bang(BIT), NQbit(rest))
    if check({HOLE: hole_type}, ctx, BIT) is None:
        return random_context(rng, kind, nest, rest)
    return ctx


def plug(ctx, m):
    from hoq.syntax import subst
    return subst(ctx, HOLE, m)
