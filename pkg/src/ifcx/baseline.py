"""Exponents of the suboptimal decoders used as a benchmark.

Each exponent minimizes, over single joint laws with input marginals
(Q1, Q2),

    D(P_{Y|X1X2} || q1 | P_{X1X2}) + I(X1;X2) + |T - R|^+

with the rate term T - R set by the decoder:

* joint decoding of both messages:  I(X1;Y) + I(X2;X1,Y) - R1 - R2
* decoding user 1 given user 2:     I(X1;X2,Y) - R1
* treating interference as noise:   I(X1;Y) - R1

and the combined benchmark is max(E1, min(E12, E1|2)).
"""
from __future__ import annotations

from dataclasses import dataclass

from .channel import ChannelSpec, CompositionPair
from .entropic import CompiledObjective, D, Expr, I, Layout, const
from .feasible import FeasibleSet, channel_start
from .info import JointDist
from .solver import SolveOptions, SolveResult, minimize

__all__ = ["BaselineResult", "baseline_exponents", "baseline_objective", "BASELINE_KINDS"]

BASELINE_KINDS = ("e12", "e1_given_2", "e1")


@dataclass
class BaselineResult:
    e_12: float
    e_1_given_2: float
    e_1: float
    e_b1: float
    argmins: tuple[JointDist, JointDist, JointDist]
    converged: bool = True


def _rate_term(kind: str, r1: float, r2: float) -> Expr:
    if kind == "e12":
        return I(0, "x1", "y") + I(0, "x2", ("x1", "y")) - (r1 + r2)
    if kind == "e1_given_2":
        return I(0, "x1", ("x2", "y")) - r1
    if kind == "e1":
        return I(0, "x1", "y") - r1
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")


def baseline_objective(kind: str, r1: float, r2: float, ch: ChannelSpec) -> CompiledObjective:
    smooth = D(0) + I(0, "x1", "x2")
    # |T|^+ as max(0, T); the zero piece is listed first
    groups = [[const(0.0), _rate_term(kind, r1, r2)]]
    return CompiledObjective(Layout((ch.x1_size, ch.x2_size, ch.y1_size), 1), ch.kernel1, smooth, groups)


def _solve(kind: str, r1: float, r2: float, comps: CompositionPair, ch: ChannelSpec, opts) -> SolveResult:
    fs = FeasibleSet.single(comps, ch.y1_size)
    obj = baseline_objective(kind, r1, r2, ch)
    return minimize(obj, fs, opts, x0=channel_start(fs, ch, comps, obj.pinned))


def baseline_exponents(
    r1: float,
    r2: float,
    comps: CompositionPair,
    ch: ChannelSpec,
    opts: SolveOptions | None = None,
) -> BaselineResult:
    if r1 < 0 or r2 < 0:
        raise ValueError(f"rates must be nonnegative, got ({r1}, {r2})")
    comps.check_against(ch)
    res = [_solve(k, r1, r2, comps, ch, opts) for k in BASELINE_KINDS]
    # the objective is nonnegative; clip solver rounding below zero
    e12, e1g2, e1 = (max(r.value, 0.0) for r in res)
    return BaselineResult(
        e_12=e12,
        e_1_given_2=e1g2,
        e_1=e1,
        e_b1=max(e1, min(e12, e1g2)),
        argmins=tuple(r.argmin for r in res),
        converged=all(r.converged for r in res),
    )
