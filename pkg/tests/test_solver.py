from __future__ import annotations

import numpy as np
import pytest

from conftest import random_channel, random_comps
from ifcx.baseline import baseline_objective
from ifcx.channel import CompositionPair
from ifcx.entropic import CompiledObjective, D, Layout
from ifcx.feasible import EmptyFeasibleSetError, FeasibleSet, check_feasible, sample_feasible
from ifcx.solver import SmoothObjective, SolveOptions, minimize, oracle_minimize
from ifcx.theorem1 import f1_objective, f2_objective


def _sq_dist(target: np.ndarray):
    def fun(x):
        r = x - target
        return float(r @ r), 2.0 * r

    return fun


class TestOptions:
    """Option validation."""

    @pytest.mark.parametrize(
        "kw", [{"max_iters": 0}, {"grad_tol": 0.0}, {"step_rule": "newton"}, {"restarts": 0}, {"interior_floor": 1e-3}]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolveOptions(**kw)


class TestKnownMinima:
    """Objectives whose minimizer is known in closed form."""

    def test_squared_distance(self, rng):
        comps = random_comps(rng)
        fs = FeasibleSet.s1(comps, 2)
        target = sample_feasible(fs, rng, batch=1)[0]
        # the stationarity tolerance sets how close the value gets to 0
        res = minimize(SmoothObjective(_sq_dist(target), fs.size), fs, SolveOptions(grad_tol=1e-10))
        assert res.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(res.x, target, atol=1e-6)
        assert res.converged

    def test_plain_callable(self, rng, uniform):
        fs = FeasibleSet.single(uniform, 2)
        target = sample_feasible(fs, rng, batch=1)[0]
        assert minimize(_sq_dist(target), fs).value == pytest.approx(0.0, abs=1e-9)

    def test_divergence_vanishes_at_channel(self, rng):
        ch, comps = random_channel(rng, floor=0.02), random_comps(rng)

        obj = CompiledObjective(Layout((2, 2, 2), 1), ch.kernel1, D(0), [])
        res = minimize(obj, FeasibleSet.single(comps, 2))
        assert res.value == pytest.approx(0.0, abs=1e-8)
        # any input coupling works; the conditional law must be the channel
        t = res.argmin.table
        np.testing.assert_allclose(t / t.sum(axis=2, keepdims=True), ch.kernel1, atol=1e-4)

    def test_baseline_saturates_at_large_rate(self, zch, uniform):
        obj = baseline_objective("e1", 5.0, 0.0, zch)
        assert minimize(obj, FeasibleSet.single(uniform, 2)).value == pytest.approx(0.0, abs=1e-8)


class TestIterates:
    """Monotone descent and feasibility along the path."""

    def test_monotone_and_feasible(self, zch, uniform):
        fs = FeasibleSet.s1(uniform, 2)
        trace = []
        res = minimize(f1_objective(1.0, 0.5, 0.139, zch), fs, callback=lambda x, f: trace.append((x.copy(), f)))
        vals = np.array([f for _, f in trace])
        assert len(vals) > 2
        assert np.all(np.diff(vals) <= 1e-12)
        for x, _ in trace:
            assert x.min() > 0
            assert check_feasible(x, fs, tol=1e-8)
        assert check_feasible(res.argmin, fs, tol=1e-8)

    def test_converged_implies_small_residual(self, zch, uniform):
        opts = SolveOptions()
        res = minimize(f1_objective(0.6, 0.2, 0.277, zch), FeasibleSet.s1(uniform, 2), opts)
        assert res.converged
        assert res.kkt_residual <= opts.grad_tol

    def test_iteration_cap(self, zch, uniform):
        res = minimize(f1_objective(1.0, 0.5, 0.139, zch), FeasibleSet.s1(uniform, 2), SolveOptions(max_iters=1))
        assert not res.converged
        assert res.iterations == 1

    def test_fixed_step_rule_descends(self, zch, uniform):
        fs = FeasibleSet.s2(uniform, 2)
        start = minimize(f2_objective(1.0, 0.5, 0.139, zch), fs, SolveOptions(max_iters=1)).value
        res = minimize(f2_objective(1.0, 0.5, 0.139, zch), fs, SolveOptions(step_rule="fixed", max_iters=300))
        assert res.value <= start


class TestOracle:
    """The multistart oracle and its agreement with the main solver."""

    def test_restart_count_irrelevant_for_convex(self, rng, uniform):
        fs = FeasibleSet.single(uniform, 2)
        target = sample_feasible(fs, rng, batch=1)[0]
        one = oracle_minimize(_sq_dist(target), fs, restarts=1, seed=1)
        many = oracle_minimize(_sq_dist(target), fs, restarts=20, seed=1)
        assert one == pytest.approx(many, abs=1e-5)
        assert many == pytest.approx(0.0, abs=1e-6)

    def test_f1_reference_instance(self, zch, uniform):
        fs = FeasibleSet.s1(uniform, 2)
        obj = f1_objective(1.0, 0.5, 0.139, zch)
        assert minimize(obj, fs).value == pytest.approx(oracle_minimize(obj, fs), abs=1e-3)

    def test_baselines_random_channel(self, rng):
        ch, comps = random_channel(rng, floor=0.01), random_comps(rng)
        fs = FeasibleSet.single(comps, 2)
        for kind in ("e12", "e1_given_2", "e1"):
            obj = baseline_objective(kind, 0.1, 0.1, ch)
            assert minimize(obj, fs).value == pytest.approx(oracle_minimize(obj, fs), abs=1e-3)

    def test_solver_is_never_worse_than_oracle(self, rng):
        # the oracle value is an upper bound on the minimum
        ch, comps = random_channel(rng, floor=0.01), random_comps(rng)
        fs = FeasibleSet.s1(comps, 2)
        obj = f1_objective(0.7, 0.3, 0.05, ch)
        assert minimize(obj, fs).value <= oracle_minimize(obj, fs) + 1e-9


class TestErrors:
    """Failure modes."""

    def test_empty_interior(self):
        fs = FeasibleSet.single(CompositionPair([0.5, 0.5], [0.5, 0.5]), 2)
        pinned = np.zeros(fs.size, dtype=bool)
        pinned[:2] = True

        class Pinned:
            groups: list = []

            def __init__(self):
                self.pinned = pinned

            def rows(self, X):
                return np.zeros((np.atleast_2d(X).shape[0], 1))

            def rows_and_grads(self, X):
                X = np.atleast_2d(X)
                return np.zeros((len(X), 1)), np.zeros((len(X), 1, X.shape[1]))

            def combine(self, R):
                return R[:, 0]

            def value(self, X):
                return 0.0

        with pytest.raises(EmptyFeasibleSetError):
            minimize(Pinned(), fs)
