"""Optimum-decoding exponent of user 1 for the two-user interference channel.

For Gallager parameters (rho, lambda) in [0, 1]^2 and gamma = rho*lambda,

    E(rho, lambda) = R2 - rho*R1 + min(min_{S1} f1, min_{S2} f2),

where S1 holds pairs (P, P') with input marginals (Q1, Q2) and equal
output marginals, and S2 holds pairs with equal (X2, Y1) marginals and
R2 <= I(X2;Y1) under P.  The S2 rate condition is never imposed
directly: the relaxed problem is solved, and if its minimizer violates
the condition, the S2 branch cannot undercut the S1 branch, so the S1
minimum is used.

The exponent is maximized over (rho, lambda) on a lattice of step 1/500:
a 21 x 21 grid followed by two local refinements by a factor of 5.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .channel import ChannelError, ChannelSpec, CompositionPair, product_joint
from .entropic import CompiledObjective, Expr, Hc, I, Layout, elogq
from .feasible import FeasibleSet, _AffineSet, channel_start
from .info import (
    JointPair,
    cond_entropy,
    expected_log_channel,
    mutual_info,
)
from .solver import SolveOptions, SolveResult, minimize

__all__ = [
    "GallagerParams",
    "RatePair",
    "ExponentResult",
    "InnerMinima",
    "g_term",
    "f1",
    "f2",
    "f1_objective",
    "f2_objective",
    "exponent_fixed",
    "exponent_optimized",
    "exponent_user2",
    "maxmin_over_comps",
    "MaxMinResult",
    "composition_grid",
    "exponent_upper_bound",
    "RATE_SLACK",
    "LATTICE",
]

RATE_SLACK = 1e-8
LATTICE = 500  # (rho, lambda) lattice denominator; (1, 1/2) is a lattice point
_COARSE, _MID, _FINE = 25, 5, 1
_IMPROVE_TOL = 1e-10


@dataclass(frozen=True)
class GallagerParams:
    rho: float
    lam: float

    def __post_init__(self) -> None:
        for name in ("rho", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def gamma(self) -> float:
        return self.rho * self.lam


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self) -> None:
        if not (self.r1 >= 0 and self.r2 >= 0):
            raise ValueError(f"rates must be nonnegative, got ({self.r1}, {self.r2})")

    def swapped(self) -> RatePair:
        return RatePair(self.r2, self.r1)


@dataclass
class ExponentResult:
    """``branch`` is one of ``"S1"``, ``"S2"``, ``"S2-dominated-by-S1"``."""

    value: float
    best_params: GallagerParams
    branch: str
    argmin: JointPair
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------- direct formulas


def _tables(jp) -> tuple[NDArray, NDArray]:
    u, p = jp
    return np.asarray(u, dtype=np.float64), np.asarray(p, dtype=np.float64)


def g_term(gp: GallagerParams, jp, ch: ChannelSpec) -> float:
    u, p = _tables(jp)
    g = gp.gamma
    # a zero weight never multiplies an infinite log-likelihood
    a = 0.0 if g == 1.0 else -(1.0 - g) * expected_log_channel(u, ch)
    b = 0.0 if g == 0.0 else -g * expected_log_channel(p, ch)
    return a + b


def f1(gp: GallagerParams, jp, ch: ChannelSpec, r2: float) -> float:
    u, p = _tables(jp)
    rho, g = gp.rho, gp.gamma
    A = mutual_info(u, "x2", ("x1", "y"))
    Ap = mutual_info(p, "x2", ("x1", "y"))
    Bp = mutual_info(p, "x2", "y")
    return (
        g_term(gp, jp, ch)
        - cond_entropy(u, "y", "x1")
        + rho * mutual_info(p, "x1", "y")
        + max(A - r2, (1.0 - g) * (A - r2))
        + max((1.0 - rho) * Bp + rho * Ap - r2, rho * (Ap - r2), g * (Ap - r2))
    )


def f2(gp: GallagerParams, jp, ch: ChannelSpec, r2: float) -> float:
    u, p = _tables(jp)
    return (
        g_term(gp, jp, ch)
        - cond_entropy(u, "y", "x1")
        + gp.rho * mutual_info(p, "x1", ("x2", "y"))
        + mutual_info(u, "x2", ("x1", "y"))
        - r2
    )


# ---------------------------------------------------------------- compiled objectives


def _g_expr(gamma: float) -> Expr:
    return -(1.0 - gamma) * elogq(0) - gamma * elogq(1)


def f1_objective(rho: float, gamma: float, r2: float, ch: ChannelSpec) -> CompiledObjective:
    smooth = _g_expr(gamma) - Hc(0, "y", "x1") + rho * I(1, "x1", "y")
    A = I(0, "x2", ("x1", "y"))
    Ap = I(1, "x2", ("x1", "y"))
    Bp = I(1, "x2", "y")
    groups = [
        [A - r2, (1.0 - gamma) * (A - r2)],
        [(1.0 - rho) * Bp + rho * Ap - r2, rho * (Ap - r2), gamma * (Ap - r2)],
    ]
    return CompiledObjective(_layout(ch, 2), ch.kernel1, smooth, groups)


def f2_objective(rho: float, gamma: float, r2: float, ch: ChannelSpec) -> CompiledObjective:
    smooth = (
        _g_expr(gamma)
        - Hc(0, "y", "x1")
        + rho * I(1, "x1", ("x2", "y"))
        + I(0, "x2", ("x1", "y"))
        - r2
    )
    return CompiledObjective(_layout(ch, 2), ch.kernel1, smooth, [])


def _layout(ch: ChannelSpec, ncopies: int) -> Layout:
    return Layout((ch.x1_size, ch.x2_size, ch.y1_size), ncopies)


def _solve(obj: CompiledObjective, fs: _AffineSet, ch, comps, opts: SolveOptions | None) -> SolveResult:
    return minimize(obj, fs, opts, x0=channel_start(fs, ch, comps, obj.pinned))


@dataclass
class _Inner:
    m1: float
    m2: float | None  # None when the relaxed S2 minimizer violates the rate condition
    m2_relaxed: float
    rate_at_s2: float
    res1: SolveResult
    res2: SolveResult


def _inner(rho: float, gamma: float, r2: float, comps: CompositionPair, ch: ChannelSpec, opts) -> _Inner:
    s1 = FeasibleSet.s1(comps, ch.y1_size)
    s2 = FeasibleSet.s2(comps, ch.y1_size)
    res1 = _solve(f1_objective(rho, gamma, r2, ch), s1, ch, comps, opts)
    res2 = _solve(f2_objective(rho, gamma, r2, ch), s2, ch, comps, opts)
    rate = mutual_info(res2.argmin.unprimed, "x2", "y")
    m2 = res2.value if r2 <= rate + RATE_SLACK else None
    return _Inner(res1.value, m2, res2.value, rate, res1, res2)


def _assemble(rates: RatePair, gp: GallagerParams, inner: _Inner) -> ExponentResult:
    if inner.m2 is None:
        branch, m, arg = "S2-dominated-by-S1", inner.m1, inner.res1.argmin
    elif inner.m2 < inner.m1:
        branch, m, arg = "S2", inner.m2, inner.res2.argmin
    else:
        branch, m, arg = "S1", inner.m1, inner.res1.argmin
    diag = {
        "m1": inner.m1,
        "m2_relaxed": inner.m2_relaxed,
        "rate_at_s2_argmin": inner.rate_at_s2,
        "s1_converged": inner.res1.converged,
        "s2_converged": inner.res2.converged,
        "s1_argmin": inner.res1.argmin,
        "s2_argmin": inner.res2.argmin,
    }
    return ExponentResult(rates.r2 - gp.rho * rates.r1 + m, gp, branch, arg, diag)


def _check(rates: RatePair, comps: CompositionPair, ch: ChannelSpec) -> None:
    comps.check_against(ch)


def exponent_fixed(
    rates: RatePair,
    comps: CompositionPair,
    gp: GallagerParams,
    ch: ChannelSpec,
    opts: SolveOptions | None = None,
) -> ExponentResult:
    """The exponent at fixed (rho, lambda)."""
    _check(rates, comps, ch)
    return _assemble(rates, gp, _inner(gp.rho, gp.gamma, rates.r2, comps, ch, opts))


class InnerMinima:
    """Cache of inner minima on the (rho, lambda) lattice.

    The inner minimizations depend on (rho, gamma), R2, the compositions
    and the channel, but not on R1, so one cache serves a whole R1 sweep.
    Lattice point (i, j) means rho = i/500, lambda = j/500; it is keyed on
    the exact integers (i, i*j).
    """

    def __init__(self, r2: float, comps: CompositionPair, ch: ChannelSpec, opts: SolveOptions | None = None):
        comps.check_against(ch)
        self.r2, self.comps, self.ch, self.opts = r2, comps, ch, opts
        self._store: dict[tuple[int, int], _Inner] = {}

    def __len__(self) -> int:
        return len(self._store)

    def get(self, i: int, j: int) -> _Inner:
        key = (i, i * j)
        if key not in self._store:
            self._store[key] = _inner(i / LATTICE, i * j / LATTICE**2, self.r2, self.comps, self.ch, self.opts)
        return self._store[key]

    def value(self, r1: float, i: int, j: int) -> float:
        inner = self.get(i, j)
        m = inner.m1 if inner.m2 is None else min(inner.m1, inner.m2)
        return self.r2 - (i / LATTICE) * r1 + m

    def optimize(self, r1: float) -> tuple[ExponentResult, list[float]]:
        """Grid search plus two refinements; also returns the incumbent after each round."""
        rates = RatePair(r1, self.r2)
        best, best_ij = -math.inf, (0, 0)
        history = []
        center, half = None, None
        for step in (_COARSE, _MID, _FINE):
            if center is None:
                axis_i = axis_j = range(0, LATTICE + 1, step)
            else:
                ci, cj = center
                axis_i = range(max(0, ci - half), min(LATTICE, ci + half) + 1, step)
                axis_j = range(max(0, cj - half), min(LATTICE, cj + half) + 1, step)
            for i, j in itertools.product(axis_i, axis_j):
                v = self.value(r1, i, j)
                if v > best + _IMPROVE_TOL:
                    best, best_ij = v, (i, j)
            history.append(best)
            center, half = best_ij, step
        i, j = best_ij
        gp = GallagerParams(i / LATTICE, j / LATTICE)
        res = _assemble(rates, gp, self.get(i, j))
        res.diagnostics["lattice_index"] = best_ij
        res.diagnostics["refinement_history"] = history
        return res, history


def exponent_optimized(
    rates: RatePair,
    comps: CompositionPair,
    ch: ChannelSpec,
    opts: SolveOptions | None = None,
    cache: InnerMinima | None = None,
) -> ExponentResult:
    """The exponent maximized over (rho, lambda) in [0, 1]^2."""
    _check(rates, comps, ch)
    if cache is None:
        cache = InnerMinima(rates.r2, comps, ch, opts)
    elif cache.r2 != rates.r2:
        raise ValueError("cache was built for a different R2")
    res, _ = cache.optimize(rates.r1)
    return res


def exponent_user2(
    rates: RatePair,
    comps: CompositionPair,
    ch: ChannelSpec,
    opts: SolveOptions | None = None,
) -> ExponentResult:
    """User 2's exponent: inputs, compositions, rates and receivers exchanged."""
    if ch.q2 is None:
        raise ChannelError("channel has no q2 table; cannot analyze user 2")
    comps.check_against(ch)
    return exponent_optimized(rates.swapped(), comps.swapped(), ch.swapped(), opts)


# ---------------------------------------------------------------- max-min over compositions


def composition_grid(size: int, grid_step: float) -> list[NDArray[np.float64]]:
    """All probability vectors of length ``size`` with entries on multiples of ``grid_step``."""
    k = round(1.0 / grid_step)
    if k < 1 or abs(k * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step must divide 1, got {grid_step}")
    out = []
    for parts in itertools.product(range(k + 1), repeat=size - 1):
        s = sum(parts)
        if s <= k:
            out.append(np.array((*parts, k - s), dtype=np.float64)[::-1] / k)
    return out


class MaxMinResult(NamedTuple):
    comps: CompositionPair
    value: float
    e_r1: float
    e_r2: float
    evaluated: int
    pruned: int


def _lattice() -> tuple[NDArray, NDArray]:
    grid = np.arange(LATTICE + 1) / LATTICE
    return np.meshgrid(grid, grid, indexing="ij")


def _f1_on_lattice(u: NDArray, p: NDArray, ch: ChannelSpec, r2: float) -> NDArray:
    """f1 at the fixed pair (u, p) for every lattice point (rho, lambda)."""
    rho, lam = _lattice()
    g = rho * lam
    A = mutual_info(u, "x2", ("x1", "y"))
    Ap = mutual_info(p, "x2", ("x1", "y"))
    Bp = mutual_info(p, "x2", "y")
    elq, elqp = expected_log_channel(u, ch), expected_log_channel(p, ch)
    # a zero weight never multiplies an infinite log-likelihood
    gterm = np.where(g < 1, -(1 - g) * elq if np.isfinite(elq) else np.inf, 0.0)
    gterm = gterm + np.where(g > 0, -g * elqp if np.isfinite(elqp) else np.inf, 0.0)
    return (
        gterm
        - cond_entropy(u, "y", "x1")
        + rho * mutual_info(p, "x1", "y")
        + np.maximum(A - r2, (1 - g) * (A - r2))
        + np.maximum.reduce([(1 - rho) * Bp + rho * Ap - r2, rho * (Ap - r2), g * (Ap - r2)])
    )


_BOUND_POINTS = tuple((r, l) for r in (0.25, 0.5, 0.75, 1.0) for l in (0.25, 0.5, 0.75))
_BOUND_MARGIN = 1e-7


def exponent_upper_bound(
    rates: RatePair,
    comps: CompositionPair,
    ch: ChannelSpec,
    opts: SolveOptions | None = None,
    refine: bool = True,
) -> float:
    """Upper bound on :func:`exponent_optimized` from a few S1-feasible pairs.

    Any S1-feasible pair bounds the inner minimum from above at every
    (rho, lambda), and the S2 branch can only lower it further.  The
    candidates are the product pair Q1 x Q2 x q1 and, with ``refine``,
    the S1 minimizers at a handful of fixed (rho, lambda); the bound is
    maximized over the whole lattice in closed form.
    """
    rho, _ = _lattice()
    t = product_joint(ch, comps)
    m = _f1_on_lattice(t, t, ch, rates.r2)
    if refine:
        s1 = FeasibleSet.s1(comps, ch.y1_size)
        for r, lam in _BOUND_POINTS:
            res = _solve(f1_objective(r, r * lam, rates.r2, ch), s1, ch, comps, opts)
            m = np.minimum(m, _f1_on_lattice(np.asarray(res.argmin.unprimed), np.asarray(res.argmin.primed), ch, rates.r2))
    return float(np.max(rates.r2 - rho * rates.r1 + m)) + _BOUND_MARGIN


def maxmin_over_comps(
    rates: RatePair,
    ch: ChannelSpec,
    grid_step: float,
    opts: SolveOptions | None = None,
) -> MaxMinResult:
    """Grid search of (Q1, Q2) maximizing min(E_R1, E_R2).

    Exact best-first branch and bound: each composition pair carries an
    upper bound on min(E_R1, E_R2) that is tightened in stages (product
    pair, then S1 minimizers at a few fixed parameters, then the exact
    value).  The pair with the largest bound is processed next, and the
    search ends when no remaining bound can beat the incumbent.  Ties go
    to the pair listed first in the grid order.
    """
    if ch.q2 is None:
        raise ChannelError("channel has no q2 table; cannot analyze user 2")
    g1 = composition_grid(ch.x1_size, grid_step)
    g2 = composition_grid(ch.x2_size, grid_step)
    combos = [CompositionPair(a, b) for a in g1 for b in g2]
    rates2, ch2 = rates.swapped(), ch.swapped()

    def bound(k: int, refine: bool) -> float:
        c = combos[k]
        u1 = exponent_upper_bound(rates, c, ch, opts, refine)
        u2 = exponent_upper_bound(rates2, c.swapped(), ch2, opts, refine)
        return max(min(u1, u2), 0.0)

    # stage 0 = product bound, 1 = refined bound, 2 = exact value
    heap = [(-bound(k, False), k, 0) for k in range(len(combos))]
    heapq.heapify(heap)
    best_k, best, best_pair = -1, -math.inf, (math.nan, math.nan)
    evaluated = 0
    while heap:
        negb, k, stage = heapq.heappop(heap)
        b = -negb
        if b < best or (b == best and k > best_k):
            break
        if stage == 0:
            heapq.heappush(heap, (-min(b, bound(k, True)), k, 1))
            continue
        evaluated += 1
        c = combos[k]
        e1 = exponent_optimized(rates, c, ch, opts).value
        e2 = exponent_user2(rates, c, ch, opts).value if e1 >= best else -math.inf
        v = min(e1, e2)
        if v > best or (v == best and k < best_k):
            best_k, best, best_pair = k, v, (e1, e2)
    return MaxMinResult(combos[best_k], best, best_pair[0], best_pair[1], evaluated, len(combos) - evaluated)
