import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoq import linalg
from hoq.generate import random_programs
from hoq.operational import (
    ProbPair, approximant_at, approximants, bigstep, reduction_tree, step, tree_to_dot,
)
from hoq.programs import CORPUS, teleport_source
from hoq.syntax import GATES, TT, FF, App, Meas, New, is_value, parse, print_term
from hoq.typing import check, infer_or_raise

H = GATES["H"]
ZERO = np.diag([1.0, 0.0])


class TestStep:
    def test_beta(self):
        r = step(parse(r"(\x:qbit. x) new[|0><0|]"))
        assert r.label == 1 and r.buddy is None and r.target == New(ZERO)

    def test_unitary(self):
        r = step(parse("gate[H] new[|0><0|]"))
        assert np.allclose(r.target.matrix, H @ ZERO @ H.conj().T)

    def test_single_measurement(self):
        rho = linalg.random_density(2, np.random.default_rng(0), trace_value=1.0)
        r = step(App(Meas(1, 1), New(rho)))
        assert r.target == TT and r.buddy.target == FF
        assert r.label == pytest.approx(rho[0, 0].real)
        assert r.buddy.label == pytest.approx(rho[1, 1].real)

    def test_measurement_keeps_rest(self):
        rho = linalg.random_density(4, np.random.default_rng(1))
        r = step(App(Meas(2, 2), New(rho)))
        assert r.label == 1 and r.buddy.label == 1
        assert np.allclose(r.target.right.matrix, linalg.project(rho, 2, 0))
        assert np.allclose(r.buddy.target.right.matrix, linalg.project(rho, 2, 1))

    def test_value_does_not_step(self):
        assert step(TT) is None


class TestBigstep:
    def test_tt_at_zero_fuel(self):
        assert bigstep(TT, 0) == ProbPair(1.0, 0.0)

    def test_stuck_at_zero_fuel(self):
        assert bigstep(parse(CORPUS["tree"]), 0) == ProbPair(0.0, 0.0)

    def test_fair_coin(self):
        assert bigstep(parse(CORPUS["fcoin"]), 6).close_to((0.5, 0.5), 1e-12)

    def test_two_measurements(self):
        assert bigstep(parse(CORPUS["twomeas"]), 100).close_to((5 / 6, 1 / 6), 1e-12)

    def test_divergence(self):
        assert bigstep(parse(CORPUS["omega"]), 500) == ProbPair(0.0, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone_in_fuel(self, seed):
        for m in random_programs(seed, 2):
            prev = (0.0, 0.0)
            for k in range(0, 40):
                cur = bigstep(m, k)
                assert cur.p >= prev[0] - 1e-12 and cur.q >= prev[1] - 1e-12
                prev = tuple(cur)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_approximants_match_bigstep(self, seed):
        for m in random_programs(seed, 2):
            chain = approximants(m, 10_000)
            assert chain[-1][1].close_to(bigstep(m, 10_000), 1e-12)
            for k in range(0, 30):
                assert approximant_at(chain, k).close_to(bigstep(m, k), 1e-12)


class TestTrees:
    @pytest.mark.parametrize("gate", ["I", "H", "X"])
    def test_teleportation_leaves(self, gate):
        root = reduction_tree(parse(teleport_source(gate, measure=False)), 200)
        leaves = list(root.leaves())
        u = GATES[gate]
        rho = u @ ZERO @ u.conj().T
        assert len(leaves) == 4
        for w, term in leaves:
            assert w == 1 and isinstance(term, New)
            assert np.allclose(term.matrix, rho / 4, atol=1e-9)

    def test_value_tree(self):
        root = reduction_tree(TT, 10)
        assert root.children == [] and list(root.leaves()) == [(1.0, TT)]

    def test_diverging_path(self):
        root = reduction_tree(parse(CORPUS["omega"]), 25)
        assert root.depth() == 25 and len(list(root.leaves())) == 1

    def test_dot(self):
        dot = tree_to_dot(reduction_tree(parse(CORPUS["fcoin"]), 20))
        assert dot.startswith("digraph") and dot.count("->") >= 4 and "0.5" in dot


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_buddy_labels_sum_to_trace(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    rho = linalg.random_density(2 ** n, rng)
    i = int(rng.integers(1, n + 1))
    r = step(App(Meas(n, i), New(rho)))
    if n == 1:
        assert r.label + r.buddy.label == pytest.approx(linalg.trace(rho))
    else:
        total = linalg.trace(r.target.right.matrix) + linalg.trace(r.buddy.target.right.matrix)
        assert total == pytest.approx(linalg.trace(rho))


def _walk(m, fuel):
    """Every term reachable by at most ``fuel`` steps along all buddies."""
    out, work = [], [(m, fuel)]
    while work:
        t, k = work.pop()
        out.append(t)
        if k == 0:
            continue
        r = step(t)
        if r is None:
            continue
        work.append((r.target, k - 1))
        if r.buddy is not None:
            work.append((r.buddy.target, k - 1))
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_subject_reduction_and_progress(seed):
    for m in random_programs(seed, 2):
        ty, _ = infer_or_raise((), m)
        for t in _walk(m, 60):
            assert check((), t, ty) is not None, print_term(t)
            # progress: a term that does not step is a value (stuck terms raise)
            assert step(t) is not None or is_value(t)
