"""Compiled linear combinations of marginal entropies.

Every objective minimized in this package is built from entropies of
marginals of one or more joint laws over X1 x X2 x Y1 (the "copies"),
expected log-likelihoods under the channel, and constants.  An
:class:`Expr` records such a combination symbolically; a
:class:`CompiledObjective` turns a smooth part plus groups of pieces
(each group contributing the max of its pieces) into stacked matrices so
that values and gradients of all rows come from one marginalization
product.

Coordinates are the concatenated flat tables of all copies.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .info import var_mask

__all__ = ["Expr", "Layout", "CompiledObjective", "H", "Hc", "I", "D", "elogq", "const"]

_MASKS = tuple(range(1, 8))


@dataclass
class Expr:
    """sum c*H(copy, mask) + sum w*E_copy[log q] + constant."""

    ent: dict[tuple[int, int], float] = field(default_factory=dict)
    loglik: dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    def _combine(self, other: Expr | float, sign: float) -> Expr:
        if not isinstance(other, Expr):
            return Expr(dict(self.ent), dict(self.loglik), self.const + sign * float(other))
        ent = defaultdict(float, self.ent)
        for k, v in other.ent.items():
            ent[k] += sign * v
        ll = defaultdict(float, self.loglik)
        for k, v in other.loglik.items():
            ll[k] += sign * v
        return Expr(dict(ent), dict(ll), self.const + sign * other.const)

    def __add__(self, other: Expr | float) -> Expr:
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other: Expr | float) -> Expr:
        return self._combine(other, -1.0)

    def __rsub__(self, other: float) -> Expr:
        return (-1.0 * self) + other

    def __mul__(self, s: float) -> Expr:
        s = float(s)
        return Expr(
            {k: s * v for k, v in self.ent.items()},
            {k: s * v for k, v in self.loglik.items()},
            s * self.const,
        )

    __rmul__ = __mul__

    def __neg__(self) -> Expr:
        return -1.0 * self


def H(copy: int, group) -> Expr:
    m = var_mask(group)
    return Expr({(copy, m): 1.0}) if m else Expr()


def Hc(copy: int, group, given=()) -> Expr:
    """H(group | given) on one copy."""
    return H(copy, (*_names(group), *_names(given))) - H(copy, given)


def I(copy: int, a, b, given=()) -> Expr:
    c = (*_names(given),)
    return H(copy, (*_names(a), *c)) + H(copy, (*_names(b), *c)) - H(copy, (*_names(a), *_names(b), *c)) - H(copy, c)


def elogq(copy: int) -> Expr:
    """E_copy[log q1(Y|X1,X2)]."""
    return Expr(loglik={copy: 1.0})


def D(copy: int) -> Expr:
    """Conditional divergence to the channel: -H(Y|X1,X2) - E[log q1]."""
    return -Hc(copy, "y", ("x1", "x2")) - elogq(copy)


def const(c: float) -> Expr:
    return Expr(const=float(c))


def _names(group) -> tuple[str, ...]:
    if isinstance(group, str):
        return (group,)
    return tuple(group)


@dataclass(frozen=True)
class Layout:
    """Alphabet shape of one copy and the number of copies."""

    shape: tuple[int, int, int]
    ncopies: int

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def size(self) -> int:
        return self.ncopies * self.cell_count


def _marginal_rows(shape: tuple[int, int, int], mask: int) -> NDArray[np.float64]:
    """0/1 matrix mapping a flat table to the flat marginal on ``mask``."""
    n = int(np.prod(shape))
    idx = np.indices(shape).reshape(3, n)
    kept = [ax for ax in range(3) if mask >> ax & 1]
    kshape = tuple(shape[ax] for ax in kept)
    target = np.ravel_multi_index(tuple(idx[ax] for ax in kept), kshape)
    T = np.zeros((int(np.prod(kshape)), n))
    T[target, np.arange(n)] = 1.0
    return T


class CompiledObjective:
    """smooth(x) + sum over groups of max(pieces), all rows entropic.

    Row 0 is the smooth part; rows ``1..`` are the pieces, and
    ``groups[g]`` lists the rows of group ``g``.  Evaluation accepts a
    batch ``X`` of shape ``(B, size)``.
    """

    def __init__(self, layout: Layout, kernel: NDArray, smooth: Expr, groups: list[list[Expr]]):
        self.layout = layout
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.shape != layout.shape:
            raise ValueError(f"kernel shape {kernel.shape} does not match layout {layout.shape}")
        rows = [smooth] + [e for g in groups for e in g]
        self.groups: list[NDArray[np.intp]] = []
        k = 1
        for g in groups:
            if not g:
                raise ValueError("empty max-group")
            self.groups.append(np.arange(k, k + len(g)))
            k += len(g)
        self.row_count = len(rows)

        # atoms: every (copy, mask) entropy that appears in some row
        used = sorted({key for e in rows for key in e.ent})
        n, N = layout.size, layout.cell_count
        blocks, starts, seg_of_atom = [], [], []
        pos = 0
        for s, (copy, mask) in enumerate(used):
            if not 0 <= copy < layout.ncopies:
                raise ValueError(f"copy index {copy} outside layout")
            Tm = _marginal_rows(layout.shape, mask)
            full = np.zeros((Tm.shape[0], n))
            full[:, copy * N:(copy + 1) * N] = Tm
            blocks.append(full)
            starts.append(pos)
            seg_of_atom += [s] * Tm.shape[0]
            pos += Tm.shape[0]
        self.T = np.vstack(blocks) if blocks else np.zeros((0, n))
        self.starts = np.array(starts, dtype=np.intp)
        C = np.zeros((len(rows), len(used)))
        for r, e in enumerate(rows):
            for key, v in e.ent.items():
                C[r, used.index(key)] += v
        self.C = C
        self.C_atom = C[:, np.array(seg_of_atom, dtype=np.intp)] if used else np.zeros((len(rows), 0))

        # channel log-likelihood weights; cells with q = 0 carrying a nonzero
        # weight in some row must stay at zero for the value to be finite
        logq = np.log(np.where(kernel > 0, kernel, 1.0)).ravel()
        null = (kernel == 0).ravel()
        Lin = np.zeros((len(rows), n))
        pinned = np.zeros(n, dtype=bool)
        for r, e in enumerate(rows):
            for copy, w in e.loglik.items():
                if not 0 <= copy < layout.ncopies:
                    raise ValueError(f"copy index {copy} outside layout")
                if w != 0.0:
                    Lin[r, copy * N:(copy + 1) * N] += w * logq
                    pinned[copy * N:(copy + 1) * N] |= null
        self.Lin = Lin
        self.pinned = pinned
        self.k = np.array([e.const for e in rows])

    def _entropies(self, X: NDArray) -> tuple[NDArray, NDArray]:
        m = X @ self.T.T
        L = np.log(np.where(m > 0, m, 1.0))
        if self.starts.size:
            Hs = -np.add.reduceat(m * L, self.starts, axis=-1)
        else:
            Hs = np.zeros(X.shape[:-1] + (0,))
        return Hs, L

    def rows(self, X: NDArray) -> NDArray:
        """Values of every row, shape ``(B, row_count)``."""
        Hs, _ = self._entropies(X)
        return Hs @ self.C.T + X @ self.Lin.T + self.k

    def combine(self, R: NDArray) -> NDArray:
        val = R[..., 0].copy()
        for g in self.groups:
            val += R[..., g].max(axis=-1)
        return val

    def value(self, X: NDArray) -> NDArray:
        """Objective values for a batch; a single point gives a 0-d result."""
        X = np.asarray(X, dtype=np.float64)
        v = self.combine(self.rows(np.atleast_2d(X)))
        return v[0] if X.ndim == 1 else v

    def rows_and_grads(self, X: NDArray) -> tuple[NDArray, NDArray]:
        """Row values ``(B, R)`` and row gradients ``(B, R, size)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Hs, L = self._entropies(X)
        vals = Hs @ self.C.T + X @ self.Lin.T + self.k
        # dH_s/dx = -sum_{atoms a in s} (log m_a + 1) T_a
        grads = -((L + 1.0)[:, None, :] * self.C_atom[None]) @ self.T + self.Lin
        return vals, grads
