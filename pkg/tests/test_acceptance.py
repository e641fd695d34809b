"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria that are known to be unattainable are left failing; the blocking
analysis lives in the decisions ledger, not in weakened thresholds.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import random_channel, random_comps
from ifcx.baseline import BASELINE_KINDS, baseline_exponents, baseline_objective
from ifcx.channel import CompositionPair, z_channel
from ifcx.feasible import FeasibleSet, sample_feasible
from ifcx.info import cond_entropy, cond_kl_to_channel, expected_log_channel, mutual_info
from ifcx.lower_bound import lower_bound_r1zero, region_contains
from ifcx.montecarlo import CodebookConfig, estimate_error, ml_decode_user1
from ifcx.solver import minimize, oracle_minimize
from ifcx.theorem1 import (
    InnerMinima,
    RatePair,
    exponent_fixed,
    exponent_user2,
    f1_objective,
    f2_objective,
    maxmin_over_comps,
    GallagerParams,
)

R2_REFERENCE = (0.139, 0.277)
R1_GRID = np.round(np.arange(31) * 0.02, 10)  # 0 : 0.02 : 0.6
ZCH = z_channel(0.01)
UNIFORM = CompositionPair.uniform(2, 2)


def report(request, ok: bool, detail: str) -> None:
    num = request.node.get_closest_marker("criterion").args[0]
    with request.config.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sweeps():
    """E_R1*, E_B1 and optimal parameters along the R1 grid, per reference R2."""
    out = {}
    for r2 in R2_REFERENCE:
        cache = InnerMinima(r2, UNIFORM, ZCH)
        rows = []
        for r1 in R1_GRID:
            res, _ = cache.optimize(float(r1))
            eb = baseline_exponents(float(r1), r2, UNIFORM, ZCH).e_b1
            rows.append((res.value, eb, res.best_params.rho, res.best_params.lam))
        out[r2] = np.array(rows)
    return out


def _critical_run(table: np.ndarray) -> int:
    """Length of the initial run of grid points where rho* = 1."""
    k = 0
    while k < len(table) and table[k, 2] == 1.0:
        k += 1
    return k


@pytest.mark.criterion(1)
def test_dominance(request, sweeps):
    parts, ok = [], True
    for r2, t in sweeps.items():
        worst = float(np.min(t[:, 0] - t[:, 1]))
        gap = float(np.max(t[:, 0] - t[:, 1]))
        at = float(R1_GRID[int(np.argmax(t[:, 0] - t[:, 1]))])
        good = worst >= -1e-4 and gap > 0.005
        ok &= good
        parts.append(f"R2={r2}: min(E_R1-E_B1)={worst:.2e}, max gap={gap:.4f} at R1={at}")
    report(request, ok, "; ".join(parts))


@pytest.mark.criterion(2)
def test_linear_region(request, sweeps):
    parts, ok = [], True
    for r2, t in sweeps.items():
        k = _critical_run(t)
        if k < 3:
            ok = False
            parts.append(f"R2={r2}: only {k} points with rho*=1")
            continue
        slopes = np.diff(t[:k, 0]) / np.diff(R1_GRID[:k])
        params_ok = bool(np.all(t[:k, 3] == 0.5))
        slope_ok = bool(np.all(np.abs(slopes + 1.0) <= 0.02))
        ok &= params_ok and slope_ok
        parts.append(
            f"R2={r2}: {k} points up to R1={R1_GRID[k - 1]}, slopes in [{slopes.min():.4f}, {slopes.max():.4f}], "
            f"params (1, 0.5) {'everywhere' if params_ok else 'NOT everywhere'}"
        )
    report(request, ok, "; ".join(parts))


@pytest.mark.criterion(3)
def test_sandwich(request, sweeps):
    parts, ok = [], True
    for r2, t in sweeps.items():
        e_star, eb = t[0, 0], t[0, 1]
        lb = lower_bound_r1zero(r2, UNIFORM, ZCH)
        good = eb <= lb <= e_star + 2e-3
        ok &= good
        parts.append(f"R2={r2}: E_B1={eb:.6f} <= LB={lb:.6f} <= E_R1*={e_star:.6f}")
    report(request, ok, "; ".join(parts))


@pytest.mark.criterion(4)
def test_positivity_region(request):
    rng = np.random.default_rng(4)
    pairs = []
    while len(pairs) < 20:
        rates = RatePair(*rng.uniform(0.0, 0.7, size=2))
        v = region_contains(rates, UNIFORM, ZCH)
        if min(v.margins) > 0.05:
            pairs.append(rates)
    # a positive value at any lattice point certifies E_R1* > 0; the full
    # search is used only if none of the probe points is positive
    probes = [GallagerParams(r, l) for r in (1.0, 0.5, 0.25, 0.1) for l in (0.5, 0.25, 1.0)]
    lowest = math.inf
    for rates in pairs:
        best = -math.inf
        for gp in probes:
            best = max(best, exponent_fixed(rates, UNIFORM, gp, ZCH).value)
            if best > 0:
                break
        if best <= 0:
            from ifcx.theorem1 import exponent_optimized

            best = exponent_optimized(rates, UNIFORM, ZCH).value
        lowest = min(lowest, best)
    disagreements = 0
    for _ in range(1000):
        ch, comps = random_channel(rng), random_comps(rng, low=0.0)
        try:
            region_contains(RatePair(*rng.uniform(0.0, 1.0, size=2)), comps, ch)
        except RuntimeError:
            disagreements += 1
    ok = lowest > 0 and disagreements == 0
    report(request, ok, f"smallest certified E_R1* over 20 interior pairs = {lowest:.4g}; {disagreements}/1000 region disagreements")


@pytest.mark.criterion(5)
def test_oracle_equivalence(request):
    rng = np.random.default_rng(5)
    worst = {"f1": 0.0, "f2": 0.0, "baseline": 0.0}
    for _ in range(20):
        ch, comps = random_channel(rng, floor=0.005), random_comps(rng)
        rho, lam = rng.uniform(size=2)
        r1, r2 = rng.uniform(0.0, 0.4, size=2)
        cases = [
            ("f1", f1_objective(rho, rho * lam, r2, ch), FeasibleSet.s1(comps, 2)),
            ("f2", f2_objective(rho, rho * lam, r2, ch), FeasibleSet.s2(comps, 2)),
        ] + [("baseline", baseline_objective(k, r1, r2, ch), FeasibleSet.single(comps, 2)) for k in BASELINE_KINDS]
        for name, obj, fs in cases:
            gap = abs(minimize(obj, fs).value - oracle_minimize(obj, fs))
            worst[name] = max(worst[name], gap)
    ok = max(worst.values()) <= 1e-3
    report(request, ok, ", ".join(f"max |minimize - oracle| {k} = {v:.2e}" for k, v in worst.items()))


def _midpoint_violation(obj, fs, rng, n=1000) -> float:
    A = sample_feasible(fs, rng, batch=n)
    B = sample_feasible(fs, rng, batch=n)
    return float(np.max(obj.value(0.5 * (A + B)) - 0.5 * (obj.value(A) + obj.value(B))))


@pytest.mark.criterion(6)
def test_convexity(request):
    rng = np.random.default_rng(6)
    v1 = v2 = -math.inf
    for _ in range(10):
        ch, comps = random_channel(rng, floor=0.005), random_comps(rng)
        rho, lam, r2 = rng.uniform(size=3)
        v1 = max(v1, _midpoint_violation(f1_objective(rho, rho * lam, r2, ch), FeasibleSet.s1(comps, 2), rng, 100))
        v2 = max(v2, _midpoint_violation(f2_objective(rho, rho * lam, r2, ch), FeasibleSet.s2(comps, 2), rng, 100))
    ok = v1 <= 1e-9 and v2 <= 1e-9
    report(request, ok, f"1000 midpoints each: max violation f1 = {v1:.2e}, f2 = {v2:.2e}")


@pytest.mark.criterion(7)
def test_boundary_identity(request):
    rng = np.random.default_rng(7)
    worst, found = 0.0, 0
    while found < 50:
        ch, comps = random_channel(rng, floor=0.005), random_comps(rng)
        fs = FeasibleSet.s2(comps, 2)
        a, b = sample_feasible(fs, rng, batch=2)
        ia, ib = (mutual_info(fs.split(x)[0], "x2", "y") for x in (a, b))
        if abs(ia - ib) < 1e-3:
            continue
        r2 = 0.5 * (ia + ib)
        lo, hi = (a, b) if ia < ib else (b, a)
        for _ in range(200):  # bisection on the segment; both copies share P_X2Y
            mid = 0.5 * (lo + hi)
            if mutual_info(fs.split(mid)[0], "x2", "y") < r2:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        u, p = fs.split(x)
        assert abs(mutual_info(u, "x2", "y") - r2) < 1e-12 and abs(mutual_info(p, "x2", "y") - r2) < 1e-12
        rho, lam = rng.uniform(size=2)
        d = abs(f1_objective(rho, rho * lam, r2, ch).value(x) - f2_objective(rho, rho * lam, r2, ch).value(x))
        worst = max(worst, d)
        found += 1
    report(request, worst <= 1e-6, f"50 boundary pairs: max |f1 - f2| = {worst:.2e}")


@pytest.mark.criterion(8)
def test_information_identities(request):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        ch = random_channel(rng, (2, 3, 2), floor=0.01)
        t = rng.dirichlet(np.full(12, 0.6)).reshape(2, 3, 2)
        chain = mutual_info(t, ("x1", "x2"), "y") - mutual_info(t, "x1", "y") - mutual_info(t, "x2", "y", given="x1")
        chain2 = mutual_info(t, "x2", ("x1", "y")) - mutual_info(t, "x1", "x2") - mutual_info(t, "x2", "y", given="x1")
        split = cond_kl_to_channel(t, ch) + cond_entropy(t, "y", ("x1", "x2")) + expected_log_channel(t, ch)
        worst = max(worst, abs(chain), abs(chain2), abs(split))
    report(request, worst <= 1e-12, f"1000 joints: max identity residual = {worst:.2e}")


@pytest.mark.criterion(9)
def test_noiseless_closed_form(request):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        a = rng.uniform(0.1, 0.9)
        comps = CompositionPair([0.5, 0.5], [a, 1 - a])
        h = -(a * math.log(a) + (1 - a) * math.log(1 - a))
        r2 = rng.uniform(0.0, math.log(2))
        v = exponent_user2(RatePair(0.05, r2), comps, ZCH).value
        worst = max(worst, abs(v - max(h - r2, 0.0)))
    report(request, worst <= 1e-3, f"10 pairs: max |E_R2 - max(H(Q2) - R2, 0)| = {worst:.2e}")


@pytest.mark.criterion(10)
def test_maxmin_symmetry(request):
    res = maxmin_over_comps(RatePair(0.05, 0.139), ZCH, 0.05)
    gap = abs(res.e_r1 - res.e_r2)
    report(
        request,
        gap <= 0.02,
        f"Q1={res.comps.q1_comp.tolist()}, Q2={res.comps.q2_comp.tolist()}: E_R1={res.e_r1:.5f}, E_R2={res.e_r2:.5f}, gap={gap:.4f}",
    )


@pytest.mark.criterion(11)
def test_monte_carlo(request):
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        m1, m2 = (int(v) for v in rng.integers(1, 5, size=2))
        ch = random_channel(rng)
        cb1, cb2 = rng.integers(2, size=(m1, n)), rng.integers(2, size=(m2, n))
        y = rng.integers(2, size=n)
        q = ch.kernel1
        likes = [sum(np.prod([q[x1[t], x2[t], y[t]] for t in range(n)]) for x2 in cb2) for x1 in cb1]
        top = max(likes)
        expect = next(m for m, v in enumerate(likes) if v >= top * (1 - 1e-12))
        mismatches += ml_decode_user1(y, cb1, cb2, ch) != expect
    trends, monotone = [], True
    for r1, r2 in ((0.15, 0.139), (0.05, 0.277)):
        assert region_contains(RatePair(r1, r2), UNIFORM, ZCH).inside
        ests = [estimate_error(CodebookConfig.from_rates(n, r1, r2, UNIFORM, seed=0, trials=10_000), ZCH) for n in (6, 8, 10, 12)]
        for a, b in zip(ests, ests[1:]):
            monotone &= b.rate - b.half_width <= a.rate + a.half_width
        trends.append(f"R=({r1}, {r2}): " + ", ".join(f"{e.rate:.4f}+-{e.half_width:.4f}" for e in ests))
    ok = mismatches == 0 and monotone
    report(request, ok, f"{mismatches}/1000 decoder mismatches; " + "; ".join(trends))
