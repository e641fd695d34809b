"""Minimization of piecewise-smooth convex objectives over feasible sets.

An objective is a smooth part plus a sum of maxima of smooth pieces.  The
main method, :func:`minimize`, is a projected descent in the metric
``diag(x)``: at each iterate the direction is the minimum-norm element of
the convex hull of the gradients of all nearly-active pieces (within
``eps`` of their group maximum), projected onto the tangent space of the
equality constraints.  ``eps`` shrinks each time the iterate becomes
stationary for the current value.  Steps use Armijo backtracking capped so
that every coordinate stays above the interior floor.

:func:`oracle_minimize` is deliberately different: Euclidean projected
subgradient steps with diminishing step sizes from random feasible starts.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import nnls

from .feasible import AffineSystem, _AffineSet, from_flat, sample_feasible

__all__ = [
    "PiecewiseObjective",
    "SmoothObjective",
    "SolveOptions",
    "SolveResult",
    "minimize",
    "oracle_minimize",
]

EPS_START = 1e-2
EPS_MIN = 1e-9
EPS_REPORT = 1e-6
ARMIJO = 1e-4
_BIG = 1e4
_TRIALS = 8


class PiecewiseObjective(Protocol):
    """Row 0 is the smooth part, ``groups`` index the max-groups of pieces."""

    groups: list[NDArray[np.intp]]
    pinned: NDArray[np.bool_]

    def rows(self, X: NDArray) -> NDArray: ...

    def rows_and_grads(self, X: NDArray) -> tuple[NDArray, NDArray]: ...

    def combine(self, R: NDArray) -> NDArray: ...

    def value(self, X: NDArray) -> NDArray: ...


class SmoothObjective:
    """Adapter for a plain differentiable function of the flat coordinates.

    ``fun(x)`` returns ``(value, gradient)`` for a single point.
    """

    def __init__(self, fun: Callable[[NDArray], tuple[float, NDArray]], size: int):
        self.fun = fun
        self.groups: list[NDArray[np.intp]] = []
        self.pinned = np.zeros(size, dtype=bool)

    def rows(self, X: NDArray) -> NDArray:
        X = np.atleast_2d(X)
        return np.array([[self.fun(x)[0]] for x in X])

    def rows_and_grads(self, X: NDArray) -> tuple[NDArray, NDArray]:
        X = np.atleast_2d(X)
        out = [self.fun(x) for x in X]
        vals = np.array([[v] for v, _ in out])
        grads = np.array([[np.asarray(g, dtype=np.float64)] for _, g in out])
        return vals, grads

    def combine(self, R: NDArray) -> NDArray:
        return R[..., 0]

    def value(self, X: NDArray) -> NDArray:
        X = np.asarray(X, dtype=np.float64)
        v = self.combine(self.rows(np.atleast_2d(X)))
        return v[0] if X.ndim == 1 else v


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-7
    step_rule: str = "backtracking"
    restarts: int = 8
    seed: int = 0
    interior_floor: float = 1e-12

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError("step_rule must be 'fixed' or 'backtracking'")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not 0 < self.interior_floor <= 1e-6:
            raise ValueError("interior_floor must lie in (0, 1e-6]")


@dataclass
class SolveResult:
    value: float
    argmin: object  # JointDist, JointPair or 4-tuple, by number of copies
    converged: bool
    iterations: int
    kkt_residual: float
    x: NDArray[np.float64]


def _as_objective(objective, size: int) -> PiecewiseObjective:
    if hasattr(objective, "rows_and_grads"):
        return objective
    if callable(objective):
        return SmoothObjective(objective, size)
    raise TypeError("objective must be a piecewise objective or a callable returning (value, gradient)")


def _min_norm(c: NDArray, G: NDArray, blocks: list[NDArray]) -> NDArray:
    """argmin_w ||c + G w|| with w >= 0 and unit sum on each block of columns."""
    k = G.shape[1]
    E = np.zeros((len(blocks), k))
    for j, idx in enumerate(blocks):
        E[j, idx] = 1.0
    w, _ = nnls(np.vstack([G, _BIG * E]), np.concatenate([-c, np.full(len(blocks), _BIG)]))
    for idx in blocks:
        s = w[idx].sum()
        w[idx] = w[idx] / s if s > 0 else 1.0 / len(idx)
    return w


class _Direction:
    """Scaled steepest-descent machinery for one objective and system."""

    def __init__(self, obj: PiecewiseObjective, sys_: AffineSystem):
        self.obj = obj
        self.sys = sys_
        self.F = np.flatnonzero(sys_.free)

    def __call__(self, x: NDArray, eps: float) -> tuple[float, NDArray, float, float]:
        """Return (value, full-length direction d, predicted decrease, residual)."""
        vals, grads = self.obj.rows_and_grads(x)
        vals, grads = vals[0], grads[0][:, self.F]
        value = float(self.obj.combine(vals))
        xf = x[self.F]
        s = np.sqrt(xf)
        A = self.sys.A
        if A.shape[0]:
            Qb, _ = np.linalg.qr((A * s).T)
        else:
            Qb = np.zeros((len(s), 0))
        cols, blocks, k = [], [], 0
        for g in self.obj.groups:
            gv = vals[g]
            act = g[gv >= gv.max() - eps]
            cols.extend(act)
            blocks.append(np.arange(k, k + len(act)))
            k += len(act)
        M = s[:, None] * grads[[0, *cols]].T
        M -= Qb @ (Qb.T @ M)
        c, G = M[:, 0], M[:, 1:]
        v = c + G @ _min_norm(c, G, blocks) if cols else c
        d = np.zeros_like(x)
        d[self.F] = s * v
        return value, d, float(v @ v), float(np.max(np.abs(d)))


def minimize(
    objective,
    fs: _AffineSet,
    opts: SolveOptions | None = None,
    x0: NDArray | None = None,
    callback: Callable[[NDArray, float], None] | None = None,
) -> SolveResult:
    """Minimize ``objective`` over the strictly positive part of ``fs``.

    ``x0`` is an optional starting point in flat coordinates; it is
    projected onto the constraints.  The default start is the interior
    center of the set.  ``callback(x, f)`` sees the start and every
    accepted iterate.
    """
    opts = opts or SolveOptions()
    obj = _as_objective(objective, fs.size)
    sys_ = fs.system(obj.pinned)
    floor = opts.interior_floor
    if x0 is None:
        x = sys_.center.copy()
    else:
        x = sys_.project(np.asarray(x0, dtype=np.float64), floor)
    direction = _Direction(obj, sys_)
    F = direction.F

    eps = EPS_START
    it = 0
    f = float(obj.value(x))
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    if callback is not None:
        callback(x, f)
    for it in range(1, opts.max_iters + 1):
        f, d, dec, resid = direction(x, eps)
        if resid < opts.grad_tol:
            if eps <= EPS_MIN:
                break
            eps *= 0.1
            continue
        pos = d[F] > 0
        tmax = 0.99 * np.min((x[F][pos] - floor) / d[F][pos]) if pos.any() else np.inf
        t0 = min(1.0, tmax)
        if opts.step_rule == "fixed":
            x = x - 0.5 * t0 * d
            f = float(obj.value(x))
            if callback is not None:
                callback(x, f)
            continue
        accepted = False
        while t0 > 1e-14 and not accepted:
            ts = t0 * 0.5 ** np.arange(_TRIALS)
            vals = obj.value(x[None, :] - ts[:, None] * d[None, :])
            ok = np.flatnonzero(vals <= f - ARMIJO * ts * dec)
            if ok.size:
                t = ts[ok[0]]
                x = x - t * d
                f = float(vals[ok[0]])
                accepted = True
            t0 = ts[-1] * 0.5
        if not accepted:
            if eps <= EPS_MIN:
                break
            eps *= 0.1
            continue
        if it % 50 == 0:
            drift = np.max(np.abs(sys_.A @ x[F] - sys_.b), initial=0.0)
            if drift > 1e-13:
                x = sys_.project(x, floor)
                f = float(obj.value(x))
        if callback is not None:
            callback(x, f)

    f, _, _, resid = direction(x, EPS_REPORT)
    return SolveResult(
        value=f,
        argmin=from_flat(x, fs),
        converged=bool(resid <= opts.grad_tol),
        iterations=it,
        kkt_residual=resid,
        x=x,
    )


def oracle_minimize(
    objective,
    fs: _AffineSet,
    restarts: int = 8,
    seed: int = 0,
    iters: int = 5000,
    step0: float = 0.05,
    floor: float = 1e-12,
) -> float:
    """Best value over ``restarts`` runs of projected subgradient descent.

    Each run starts at an independent :func:`sample_feasible` point and
    uses normalized Euclidean subgradient steps of length
    ``step0 / sqrt(k + 1)``; the subgradient of a max-group is the
    gradient of its first maximal piece.  Runs stop individually once the
    projected subgradient norm falls below 1e-6.
    """
    obj = _as_objective(objective, fs.size)
    rng = np.random.default_rng(seed)
    sys_ = fs.system(obj.pinned)
    X = sample_feasible(fs, rng, batch=restarts, pinned=obj.pinned)
    F = sys_.free
    A = sys_.A
    P = np.eye(A.shape[1]) - (np.linalg.pinv(A) @ A if A.shape[0] else 0.0)
    best = np.array(obj.value(X), dtype=np.float64).reshape(-1)
    active = np.ones(restarts, dtype=bool)
    for k in range(iters):
        vals, grads = obj.rows_and_grads(X)
        g = grads[:, 0, :].copy()
        b = np.arange(len(X))
        for grp in obj.groups:
            pick = grp[np.argmax(vals[:, grp], axis=1)]
            g += grads[b, pick, :]
        gf = g[:, F] @ P
        norm = np.linalg.norm(gf, axis=1)
        active &= norm >= 1e-6
        if not active.any():
            break
        step = np.zeros_like(gf)
        step[active] = (step0 / np.sqrt(k + 1)) * gf[active] / norm[active, None]
        X[:, F] -= step
        X = sys_.project(X, floor)
        best = np.minimum(best, obj.value(X))
    return float(best.min())
