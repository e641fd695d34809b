from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_comps
from ifcx.channel import CompositionPair, z_channel
from ifcx.feasible import (
    Coupling,
    EmptyFeasibleSetError,
    FeasibleSet,
    ProductSet,
    channel_start,
    check_feasible,
    from_flat,
    project_feasible,
    sample_feasible,
    to_flat,
)
from ifcx.info import JointDist, JointPair, mutual_info


def _sets(comps, y=2):
    return [
        FeasibleSet.single(comps, y),
        FeasibleSet.s1(comps, y),
        FeasibleSet.s2(comps, y),
        ProductSet(comps, y),
    ]


class TestMembership:
    """check_feasible names the violated constraint."""

    def test_product_is_in_s1(self, zch, uniform):
        from ifcx.channel import product_joint

        t = JointDist.from_table(product_joint(zch, uniform))
        assert check_feasible(JointPair(t, t), FeasibleSet.s1(uniform, 2))

    def test_output_mismatch_named(self, uniform):
        a = np.full((2, 2, 2), 1 / 8)
        b = a.copy()
        b[0, 0] = [0.2, 0.05]
        rep = check_feasible(JointPair(JointDist.from_table(a), JointDist.from_table(b)), FeasibleSet.s1(uniform, 2))
        assert not rep
        assert any(name.startswith("P_Y") for name, _ in rep.violations)

    def test_composition_mismatch_named(self):
        comps = CompositionPair([0.3, 0.7], [0.5, 0.5])
        rep = check_feasible(JointDist.from_table(np.full((2, 2, 2), 1 / 8)), FeasibleSet.single(comps, 2))
        assert [n for n, _ in rep.violations] == ["P_X1(0) = Q1(0)", "P_X1(1) = Q1(1)"]

    def test_rate_condition(self, uniform):
        fs = FeasibleSet.s2(uniform, 2, r2=0.1)
        t = JointDist.from_table(np.full((2, 2, 2), 1 / 8))  # I(X2;Y) = 0
        rep = check_feasible(JointPair(t, t), fs)
        assert [n for n, _ in rep.violations] == ["rate condition R2 <= I(X2;Y1)"]

    def test_rate_only_with_x2y(self, uniform):
        with pytest.raises(ValueError):
            FeasibleSet(uniform, Coupling.Y, 2, r2=0.1)

    def test_wrong_copy_count(self, uniform):
        t = JointDist.from_table(np.full((2, 2, 2), 1 / 8))
        with pytest.raises(ValueError, match="joint laws"):
            check_feasible((t, t, t), FeasibleSet.s1(uniform, 2))


class TestProjection:
    """Projection onto the equality constraints."""

    def test_normalization_rescale(self, uniform):
        # a feasible point off only by an overall scale comes back rescaled
        for fs in (FeasibleSet.single(uniform, 2), FeasibleSet.s1(uniform, 2)):
            c = fs.system().center
            out = to_flat(project_feasible(1.01 * c, fs), fs)
            np.testing.assert_allclose(out, c, atol=1e-12)

    def test_idempotent(self, rng):
        comps = random_comps(rng)
        for fs in _sets(comps):
            x = sample_feasible(fs, rng, batch=1)[0]
            y = to_flat(project_feasible(x, fs), fs)
            np.testing.assert_allclose(y, x, atol=1e-12)

    def test_projects_infeasible_point(self, rng):
        comps = random_comps(rng)
        for fs in _sets(comps, 3):
            x = rng.uniform(size=fs.size)
            assert check_feasible(project_feasible(x, fs), fs, tol=1e-9)


class TestSampling:
    """Random interior points."""

    def test_samples_feasible_and_positive(self, rng):
        comps = random_comps(rng, 3, 2)
        for fs in _sets(comps, 3):
            X = sample_feasible(fs, rng, batch=20)
            assert X.min() > 0
            for x in X:
                assert check_feasible(x, fs, tol=1e-10)

    def test_seeded(self, uniform):
        fs = FeasibleSet.s1(uniform, 2)
        a = sample_feasible(fs, np.random.default_rng(3), batch=4)
        b = sample_feasible(fs, np.random.default_rng(3), batch=4)
        np.testing.assert_array_equal(a, b)

    def test_from_flat_types(self, rng, uniform):
        assert isinstance(sample_feasible(FeasibleSet.single(uniform, 2), rng), JointDist)
        assert isinstance(sample_feasible(FeasibleSet.s2(uniform, 2), rng), JointPair)
        assert len(sample_feasible(ProductSet(uniform, 2), rng)) == 4

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_s2_matches_x2y_marginal(self, seed):
        r = np.random.default_rng(seed)
        comps = random_comps(r, 2, 3)
        u, p = sample_feasible(FeasibleSet.s2(comps, 2), r)
        np.testing.assert_allclose(u.marginal(("x2", "y")), p.marginal(("x2", "y")), atol=1e-10)
        # the shared (X2, Y) law fixes I(X2;Y) for both copies
        assert mutual_info(u, "x2", "y") == pytest.approx(mutual_info(p, "x2", "y"), abs=1e-9)


    def test_s2_points_are_s1_points(self, rng):
        comps = random_comps(rng, 3, 2)
        s1, s2 = FeasibleSet.s1(comps, 3), FeasibleSet.s2(comps, 3)
        for x in sample_feasible(s2, rng, batch=100):
            assert check_feasible(x, s1, tol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_projection_idempotent_everywhere(self, seed):
        r = np.random.default_rng(seed)
        fs = FeasibleSet.s1(random_comps(r), 2)
        x = r.uniform(0.01, 1.0, size=fs.size)
        once = to_flat(project_feasible(x, fs), fs)
        assert check_feasible(once, fs, tol=1e-9)
        np.testing.assert_allclose(to_flat(project_feasible(once, fs), fs), once, atol=1e-9)


class TestDegenerate:
    """Zero patterns and empty interiors."""

    def test_zero_composition_entry(self, rng):
        comps = CompositionPair([0.0, 1.0], [0.5, 0.5])
        fs = FeasibleSet.s1(comps, 2)
        x = sample_feasible(fs, rng, batch=5)
        assert np.all(x[:, fs.structural_zeros()] == 0)
        assert np.all(x[:, ~fs.structural_zeros()] > 0)

    def test_pinned_propagates_across_coupling(self, uniform):
        fs = FeasibleSet.s1(uniform, 2)
        pinned = np.zeros(fs.size, dtype=bool)
        pinned[np.arange(8)[np.arange(8) % 2 == 0]] = True  # every y = 0 cell of copy 0
        z = fs.implied_zeros(pinned)
        assert z[8:][np.arange(8) % 2 == 0].all()

    def test_empty_interior(self, uniform):
        fs = FeasibleSet.single(uniform, 2)
        pinned = np.zeros(fs.size, dtype=bool)
        pinned[:2] = True  # both cells with (x1, x2) = (0, 0)
        with pytest.raises(EmptyFeasibleSetError):
            fs.system(pinned)

    def test_channel_start_avoids_null_cells(self):
        ch = z_channel(0.0)
        comps = CompositionPair.uniform(2, 2)
        fs = FeasibleSet.s1(comps, 2)
        pinned = np.tile(ch.kernel1.ravel() == 0, 2)
        x = channel_start(fs, ch, comps, pinned)
        assert np.all(x[pinned] == 0)
        assert check_feasible(x, fs)


class TestFlat:
    """Coordinate layout."""

    def test_round_trip(self, rng, uniform):
        fs = ProductSet(uniform, 3)
        x = sample_feasible(fs, rng, batch=1)[0]
        np.testing.assert_array_equal(to_flat(from_flat(x, fs), fs), x)

    def test_copy_order(self, rng, uniform):
        fs = FeasibleSet.s1(uniform, 2)
        u, p = sample_feasible(fs, rng)
        x = to_flat(JointPair(u, p), fs)
        np.testing.assert_array_equal(x[:8], u.p)
        np.testing.assert_array_equal(x[8:], p.p)
