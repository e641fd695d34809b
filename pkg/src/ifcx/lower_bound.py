"""Closed-form-free lower bound on the optimized exponent and the positivity region.

The bound mixes an S1-type pair (P1, P1') with equal output marginals and
an S2-type pair (P2, P2') with equal (X2, Y1) marginals, the S2 rate
condition dropped.  For a mixing weight theta it minimizes over all four
laws the largest of three expressions built from

    D(k)   = D(P_{Y|X1X2} || q1 | P_{X1X2}) under copy k,
    Ixx(k) = I(X1;X2) under copy k,

and takes the smallest value over a uniform theta grid.  Copies are
numbered 0 = P1, 1 = P1', 2 = P2, 3 = P2'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .channel import ChannelSpec, CompositionPair, product_joint
from .entropic import CompiledObjective, D, Expr, I, Layout, const
from .feasible import FeasibleSet, ProductSet, channel_start
from .info import mutual_info
from .solver import SolveOptions, minimize
from .theorem1 import RatePair

__all__ = [
    "ThetaMix",
    "RegionVerdict",
    "lower_bound",
    "lower_bound_profile",
    "lower_bound_objective",
    "lower_bound_r1zero",
    "region_contains",
    "DEFAULT_THETA_GRID",
]

DEFAULT_THETA_GRID = 41


@dataclass(frozen=True)
class ThetaMix:
    theta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


def _base(k: int) -> Expr:
    return D(k) + I(k, "x1", "x2")


def lower_bound_objective(theta: float, rates: RatePair, ch: ChannelSpec) -> CompiledObjective:
    """Max of the three mixed expressions, each with its |.|^+ split in two pieces."""
    t, tb = float(theta), 1.0 - float(theta)
    r1, r2 = rates.r1, rates.r2
    # (always-present part, part inside t*|.|^+)
    terms = [
        (t * _base(0) + tb * _base(2), I(1, "x2", "y") - r2),
        (
            -r1 + t * (_base(0) + I(1, "x1", "y")) + tb * (_base(2) + I(3, "x1", ("x2", "y"))),
            I(1, "x2", ("x1", "y")) - r2,
        ),
        (
            -r1 + t * (_base(1) + I(0, "x1", "y")) + tb * (_base(3) + I(2, "x1", ("x2", "y"))),
            I(0, "x2", ("x1", "y")) - r2,
        ),
    ]
    pieces = []
    for a, b in terms:
        pieces += [a, a + t * b]
    return CompiledObjective(Layout((ch.x1_size, ch.x2_size, ch.y1_size), 4), ch.kernel1, const(0.0), [pieces])


def lower_bound_profile(
    rates: RatePair,
    comps: CompositionPair,
    ch: ChannelSpec,
    theta_grid: int = DEFAULT_THETA_GRID,
    opts: SolveOptions | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Theta grid and the inner minimum at each grid point."""
    if theta_grid < 2:
        raise ValueError("theta_grid must be at least 2")
    comps.check_against(ch)
    fs = ProductSet(comps, ch.y1_size)
    thetas = np.linspace(0.0, 1.0, int(theta_grid))
    vals = np.empty_like(thetas)
    for k, th in enumerate(thetas):
        obj = lower_bound_objective(th, rates, ch)
        vals[k] = minimize(obj, fs, opts, x0=channel_start(fs, ch, comps, obj.pinned)).value
    return thetas, vals


def lower_bound(
    rates: RatePair,
    comps: CompositionPair,
    ch: ChannelSpec,
    theta_grid: int = DEFAULT_THETA_GRID,
    opts: SolveOptions | None = None,
) -> float:
    """Grid minimum over theta of the four-law bound."""
    _, vals = lower_bound_profile(rates, comps, ch, theta_grid, opts)
    return float(vals.min())


def lower_bound_r1zero(
    r2: float, comps: CompositionPair, ch: ChannelSpec, opts: SolveOptions | None = None
) -> float:
    """The bound at R1 = 0, where it reduces to two single-law minimizations."""
    if r2 < 0:
        raise ValueError("R2 must be nonnegative")
    comps.check_against(ch)
    fs = FeasibleSet.single(comps, ch.y1_size)
    layout = Layout((ch.x1_size, ch.x2_size, ch.y1_size), 1)
    first = CompiledObjective(
        layout, ch.kernel1, _base(0) + I(0, "x1", "y"), [[const(0.0), I(0, "x2", ("x1", "y")) - r2]]
    )
    second = CompiledObjective(layout, ch.kernel1, _base(0) + I(0, "x1", ("x2", "y")), [])
    vals = [
        minimize(obj, fs, opts, x0=channel_start(fs, ch, comps, obj.pinned)).value for obj in (first, second)
    ]
    return float(max(min(vals), 0.0))


@dataclass(frozen=True)
class RegionVerdict:
    """``margins`` are I(X1;Y) + |I(X2;Y|X1) - R2|^+ - R1 and I(X1;Y|X2) - R1."""

    inside: bool
    margins: tuple[float, float]


def region_contains(rates: RatePair, comps: CompositionPair, ch: ChannelSpec) -> RegionVerdict:
    """Positivity region test at the independent-input law Q1 x Q2 x q1.

    Evaluates the slack form and the union form
    {R1 < I(X1;Y)} or ({R1 + R2 < I(Y;X1,X2)} and {R1 < I(X1;Y|X2)})
    and checks that they agree.
    """
    t = product_joint(ch, comps)
    i1y = mutual_info(t, "x1", "y")
    i2y_1 = mutual_info(t, "x2", "y", given="x1")
    i1y_2 = mutual_info(t, "x1", "y", given="x2")
    r1, r2 = rates.r1, rates.r2
    m1 = i1y + max(i2y_1 - r2, 0.0) - r1
    m2 = i1y_2 - r1
    inside = m1 > 0 and m2 > 0
    # chain rule: I(Y;X1,X2) = I(X1;Y) + I(X2;Y|X1)
    union = (r1 < i1y) or (r1 + r2 < i1y + i2y_1 and r1 < i1y_2)
    if union != inside:
        raise RuntimeError(
            f"region characterizations disagree at R=({r1}, {r2}): slack form {inside}, union form {union}"
        )
    return RegionVerdict(inside, (m1, m2))
