"""Linear feasible sets of the exponent minimizations.

Each copy of a joint law over X1 x X2 x Y1 must have input marginals
(Q1, Q2).  Pairs of copies may additionally be coupled through the
output marginal (``Coupling.Y``) or the joint (X2, Y1) marginal
(``Coupling.X2Y``).  The optional rate condition R2 <= I(X2;Y1) on the
unprimed copy is checked but never projected onto.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import qr
from scipy.optimize import linprog

from .channel import ChannelSpec, CompositionPair, product_joint
from .info import JointDist, JointPair, mutual_info

__all__ = [
    "Coupling",
    "EmptyFeasibleSetError",
    "FeasibleSet",
    "ProductSet",
    "FeasibilityReport",
    "AffineSystem",
    "check_feasible",
    "project_feasible",
    "sample_feasible",
    "to_flat",
    "from_flat",
    "channel_start",
]

FLOOR = 1e-12
START_BLEND = 0.01
MAX_ROUNDS = 100


class Coupling(enum.Enum):
    NONE = "none"
    Y = "y"
    X2Y = "x2y"


class EmptyFeasibleSetError(ValueError):
    """The constraints leave no strictly positive feasible point."""


@dataclass(frozen=True)
class AffineSystem:
    """Independent equality rows ``A x = b`` over the free coordinates."""

    free: NDArray[np.bool_]
    A: NDArray[np.float64]
    b: NDArray[np.float64]
    center: NDArray[np.float64]  # strictly positive on free coordinates, full length

    def project(self, x: NDArray, floor: float = FLOOR) -> NDArray:
        """Euclidean projection onto the affine set, floored and re-projected.

        Works on a batch (leading dimensions) of full-length points.
        """
        out = np.array(x, dtype=np.float64)
        out[..., ~self.free] = 0.0
        xf = out[..., self.free]
        for _ in range(MAX_ROUNDS):
            xf = xf - self._correction(xf)
            if np.all(xf >= floor * 0.5):
                break
            xf = np.maximum(xf, floor)
        else:
            xf = self._shrink(xf - self._correction(xf), floor)
        out[..., self.free] = xf
        return out

    def _shrink(self, xf: NDArray, floor: float) -> NDArray:
        # pull stragglers toward the interior center along the affine set
        c = self.center[self.free]
        low = xf < floor
        gap = np.where(low, (c - floor) / np.where(low, c - xf, 1.0), 1.0)
        t = np.min(gap, axis=-1, keepdims=True)
        return c + t * (xf - c)

    @cached_property
    def _solve(self) -> NDArray:
        # A^+ for the minimum-norm correction
        return np.linalg.pinv(self.A)

    def _correction(self, xf: NDArray) -> NDArray:
        r = xf @ self.A.T - self.b
        return r @ self._solve.T

    @cached_property
    def null_basis(self) -> NDArray:
        """Orthonormal basis (columns) of the null space of A, free coordinates."""
        nf = self.A.shape[1]
        if self.A.shape[0] == 0:
            return np.eye(nf)
        Qm, _ = np.linalg.qr(self.A.T, mode="complete")
        return Qm[:, self.A.shape[0]:]


def _independent_rows(A: NDArray, b: NDArray, tol: float = 1e-10) -> tuple[NDArray, NDArray]:
    if A.shape[0] == 0:
        return A, b
    _, R, piv = qr(A.T, pivoting=True, mode="economic")
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > tol * max(d.max(), 1.0)))
    keep = np.sort(piv[:rank])
    return A[keep], b[keep]


class _AffineSet:
    """Shared machinery: equality rows, structural zeros, reduced systems."""

    shape: tuple[int, int, int]
    ncopies: int

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def size(self) -> int:
        return self.ncopies * self.cell_count

    def _couplings(self) -> list[tuple[int, int, Coupling]]:
        raise NotImplementedError

    def _comps(self) -> CompositionPair:
        raise NotImplementedError

    @cached_property
    def _labelled_rows(self) -> tuple[NDArray, NDArray, list[str]]:
        a, b, c = self.shape
        N, n = self.cell_count, self.size
        comps = self._comps()
        idx = np.arange(N).reshape(self.shape)
        rows, rhs, names = [], [], []

        def row(cells_by_copy: dict[int, tuple[NDArray, float]]) -> NDArray:
            r = np.zeros(n)
            for copy, (cells, sgn) in cells_by_copy.items():
                r[copy * N + cells.ravel()] += sgn
            return r

        tag = {1: [""], 2: ["", "'"]}.get(self.ncopies) or [f"[{k}]" for k in range(self.ncopies)]
        for k in range(self.ncopies):
            for i in range(a):
                rows.append(row({k: (idx[i], 1.0)}))
                rhs.append(comps.q1_comp[i])
                names.append(f"P_X1{tag[k]}({i}) = Q1({i})")
            for j in range(b):
                rows.append(row({k: (idx[:, j], 1.0)}))
                rhs.append(comps.q2_comp[j])
                names.append(f"P_X2{tag[k]}({j}) = Q2({j})")
        for u, v, kind in self._couplings():
            if kind is Coupling.Y:
                for y in range(c):
                    rows.append(row({u: (idx[:, :, y], 1.0), v: (idx[:, :, y], -1.0)}))
                    rhs.append(0.0)
                    names.append(f"P_Y{tag[u]}({y}) = P_Y{tag[v]}({y})")
            elif kind is Coupling.X2Y:
                for j in range(b):
                    for y in range(c):
                        rows.append(row({u: (idx[:, j, y], 1.0), v: (idx[:, j, y], -1.0)}))
                        rhs.append(0.0)
                        names.append(f"P_X2Y{tag[u]}({j},{y}) = P_X2Y{tag[v]}({j},{y})")
        return np.array(rows), np.array(rhs), names

    def equality_system(self) -> tuple[NDArray, NDArray]:
        """All equality rows (possibly redundant) over every coordinate."""
        A, b, _ = self._labelled_rows
        return A, b

    def structural_zeros(self) -> NDArray[np.bool_]:
        """Cells forced to zero by a zero entry of Q1 or Q2."""
        comps = self._comps()
        cell = (comps.q1_comp[:, None, None] == 0) | (comps.q2_comp[None, :, None] == 0)
        cell = np.broadcast_to(cell, self.shape).ravel()
        return np.tile(cell, self.ncopies)

    def implied_zeros(self, pinned: NDArray[np.bool_] | None = None) -> NDArray[np.bool_]:
        """Close a set of pinned cells under the coupling constraints.

        If every cell of some coupled marginal is pinned in one copy, the
        matching cells of the partner copy must vanish as well.
        """
        z = self.structural_zeros().copy()
        if pinned is not None:
            z |= pinned
        N = self.cell_count
        groups_by_kind = {
            Coupling.Y: lambda t: [t[:, :, y] for y in range(self.shape[2])],
            Coupling.X2Y: lambda t: [t[:, j, y] for j in range(self.shape[1]) for y in range(self.shape[2])],
        }
        idx = np.arange(N).reshape(self.shape)
        changed = True
        while changed:
            changed = False
            for u, v, kind in self._couplings():
                for cells in groups_by_kind[kind](idx):
                    cu, cv = u * N + cells.ravel(), v * N + cells.ravel()
                    if z[cu].all() and not z[cv].all():
                        z[cv] = True
                        changed = True
                    elif z[cv].all() and not z[cu].all():
                        z[cu] = True
                        changed = True
        return z

    def _product_center(self) -> NDArray:
        comps = self._comps()
        t = comps.q1_comp[:, None, None] * comps.q2_comp[None, :, None] * np.full(self.shape[2], 1.0 / self.shape[2])
        return np.tile(t.ravel(), self.ncopies)

    def system(self, pinned: NDArray[np.bool_] | None = None) -> AffineSystem:
        """Reduced equality system with extra pinned cells, plus an interior point."""
        zeros = self.implied_zeros(pinned)
        key = zeros.tobytes()
        cache = self.__dict__.setdefault("_systems", {})
        if key in cache:
            return cache[key]
        free = ~zeros
        A_full, b_full = self.equality_system()
        A, b = _independent_rows(A_full[:, free], b_full)
        # consistency of the rows dropped as dependent
        xs, *_ = np.linalg.lstsq(A_full[:, free], b_full, rcond=None)
        if np.max(np.abs(A_full[:, free] @ xs - b_full), initial=0.0) > 1e-9:
            raise EmptyFeasibleSetError("marginal and coupling constraints are inconsistent with the pinned cells")
        center = self._product_center()
        if np.any(center[zeros]) or np.any(center[free] <= 0):
            center = self._lp_center(free, A, b)
        else:
            center = center.copy()
        sys_ = AffineSystem(free=free, A=A, b=b, center=center)
        cache[key] = sys_
        return sys_

    def _lp_center(self, free: NDArray, A: NDArray, b: NDArray) -> NDArray:
        nf = int(free.sum())
        # maximize t subject to A x = b, x_i >= t, t <= 1
        c = np.zeros(nf + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-np.eye(nf), np.ones((nf, 1))])
        res = linprog(
            c, A_ub=A_ub, b_ub=np.zeros(nf), A_eq=np.hstack([A, np.zeros((A.shape[0], 1))]), b_eq=b,
            bounds=[(0, None)] * nf + [(0, 1)], method="highs",
        )
        if res.status != 0 or res.x[-1] <= 1e-10:
            raise EmptyFeasibleSetError(
                "feasible set has empty interior on the admissible cells "
                "(a composition or channel zero pattern leaves no strictly positive point)"
            )
        out = np.zeros(self.size)
        out[free] = res.x[:nf]
        return out

    def split(self, x: NDArray) -> list[NDArray]:
        N = self.cell_count
        return [x[k * N:(k + 1) * N].reshape(self.shape) for k in range(self.ncopies)]

    def rate_violation(self, x: NDArray) -> float:
        return 0.0


@dataclass(frozen=True, eq=False)
class FeasibleSet(_AffineSet):
    """Single copy (``Coupling.NONE``) or an unprimed/primed pair.

    ``r2`` is the optional rate condition R2 <= I(X2;Y1) of the unprimed
    copy; it is only allowed together with ``Coupling.X2Y``.
    """

    comps: CompositionPair
    coupling: Coupling
    y_size: int
    r2: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.coupling, Coupling):
            object.__setattr__(self, "coupling", Coupling(self.coupling))
        if self.r2 is not None and self.coupling is not Coupling.X2Y:
            raise ValueError("the rate condition is only used with the (X2, Y1) coupling")
        if self.r2 is not None and self.r2 < 0:
            raise ValueError("R2 must be nonnegative")
        if int(self.y_size) < 1:
            raise ValueError("y_size must be positive")

    @classmethod
    def s1(cls, comps: CompositionPair, y_size: int) -> FeasibleSet:
        return cls(comps, Coupling.Y, y_size)

    @classmethod
    def s2(cls, comps: CompositionPair, y_size: int, r2: float | None = None) -> FeasibleSet:
        return cls(comps, Coupling.X2Y, y_size, r2)

    @classmethod
    def single(cls, comps: CompositionPair, y_size: int) -> FeasibleSet:
        return cls(comps, Coupling.NONE, y_size)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.comps.q1_comp.size, self.comps.q2_comp.size, int(self.y_size))

    @property
    def ncopies(self) -> int:
        return 1 if self.coupling is Coupling.NONE else 2

    def _couplings(self):
        return [] if self.coupling is Coupling.NONE else [(0, 1, self.coupling)]

    def _comps(self) -> CompositionPair:
        return self.comps

    def rate_violation(self, x: NDArray) -> float:
        if self.r2 is None:
            return 0.0
        return self.r2 - mutual_info(self.split(x)[0], "x2", "y")


@dataclass(frozen=True, eq=False)
class ProductSet(_AffineSet):
    """Four copies: a pair coupled through P_Y and a pair coupled through P_X2Y."""

    comps: CompositionPair
    y_size: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.comps.q1_comp.size, self.comps.q2_comp.size, int(self.y_size))

    @property
    def ncopies(self) -> int:
        return 4

    def _couplings(self):
        return [(0, 1, Coupling.Y), (2, 3, Coupling.X2Y)]

    def _comps(self) -> CompositionPair:
        return self.comps


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list[tuple[str, float]]

    def __bool__(self) -> bool:
        return self.ok


def to_flat(point, fs: _AffineSet) -> NDArray[np.float64]:
    """Concatenate the copies of a point into one coordinate vector."""
    if isinstance(point, JointDist):
        parts = [point]
    elif isinstance(point, (tuple, list)) and point and isinstance(point[0], JointDist):
        parts = list(point)
    else:
        x = np.asarray(point, dtype=np.float64).ravel()
        if x.size != fs.size:
            raise ValueError(f"point has {x.size} coordinates, feasible set expects {fs.size}")
        return x
    if len(parts) != fs.ncopies:
        raise ValueError(f"expected {fs.ncopies} joint laws, got {len(parts)}")
    for p in parts:
        if p.shape != fs.shape:
            raise ValueError(f"joint shape {p.shape} does not match {fs.shape}")
    return np.concatenate([p.p for p in parts])


def from_flat(x: ArrayLike, fs: _AffineSet):
    """JointDist, JointPair or a 4-tuple of JointDists, by number of copies."""
    x = np.asarray(x, dtype=np.float64)
    parts = [JointDist.from_table(t) for t in fs.split(x)]
    if fs.ncopies == 1:
        return parts[0]
    if fs.ncopies == 2:
        return JointPair(*parts)
    return tuple(parts)


def check_feasible(point, fs: _AffineSet, tol: float = 1e-9) -> FeasibilityReport:
    x = to_flat(point, fs)
    A, b, names = fs._labelled_rows
    viol = []
    neg = np.minimum(x, 0.0)
    if np.any(neg < -tol):
        viol.append(("nonnegativity", float(-neg.min())))
    for k, part in enumerate(fs.split(x)):
        s = abs(part.sum() - 1.0)
        if s > tol:
            viol.append((f"normalization of copy {k}", float(s)))
    r = A @ x - b
    for i in np.flatnonzero(np.abs(r) > tol):
        viol.append((names[i], float(abs(r[i]))))
    rv = fs.rate_violation(x)
    if rv > tol:
        viol.append(("rate condition R2 <= I(X2;Y1)", float(rv)))
    return FeasibilityReport(not viol, viol)


def project_feasible(point, fs: _AffineSet):
    """Euclidean projection onto the equality constraints, kept strictly positive."""
    x = to_flat(point, fs)
    return from_flat(fs.system().project(x), fs)


def sample_feasible(
    fs: _AffineSet,
    rng: np.random.Generator,
    batch: int | None = None,
    pinned: NDArray[np.bool_] | None = None,
):
    """Random strictly positive feasible point(s).

    A uniform direction in the null space is drawn and the point is placed
    uniformly on the segment from the interior center to the boundary.
    With ``batch`` set, returns flat coordinates of shape ``(batch, size)``.
    ``pinned`` marks extra cells held at zero.
    """
    sys_ = fs.system(pinned)
    Z = sys_.null_basis
    count = 1 if batch is None else int(batch)
    out = np.empty((count, fs.size))
    c = sys_.center[sys_.free]
    for k in range(count):
        while True:
            if Z.shape[1] == 0:
                xf = c.copy()
                break
            u = Z @ rng.standard_normal(Z.shape[1])
            u /= np.linalg.norm(u)
            neg = u < 0
            tmax = np.min(c[neg] / -u[neg]) if neg.any() else 1.0
            xf = c + rng.uniform() * tmax * u
            if xf.min() > FLOOR:
                break
        row = np.zeros(fs.size)
        row[sys_.free] = xf
        out[k] = row
    if batch is None:
        return from_flat(out[0], fs)
    return out


def channel_start(
    fs: _AffineSet, ch: ChannelSpec, comps: CompositionPair, pinned: NDArray[np.bool_] | None = None
) -> NDArray[np.float64]:
    """Every copy at Q1 x Q2 x q1, nudged toward the interior center of the free cells."""
    prod = np.tile(product_joint(ch, comps).ravel(), fs.ncopies)
    center = fs.system(pinned).center
    return (1.0 - START_BLEND) * prod + START_BLEND * center
