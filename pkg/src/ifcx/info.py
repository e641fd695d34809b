"""Information quantities of joint laws over X1 x X2 x Y1, in nats.

Variables are named ``"x1"``, ``"x2"`` and ``"y"`` (``"y1"`` is accepted as
an alias).  A joint law is stored flat with index ``(x1*|X2| + x2)*|Y1| + y``,
which is plain C order for an array of shape ``(|X1|, |X2|, |Y1|)``.
"""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channel import ChannelSpec

__all__ = [
    "JOINT_TOL",
    "JointDist",
    "JointPair",
    "entropy",
    "joint_entropy",
    "cond_entropy",
    "mutual_info",
    "cond_kl_to_channel",
    "expected_log_channel",
    "var_mask",
]

JOINT_TOL = 1e-10

_VAR_BITS = {"x1": 1, "x2": 2, "y": 4, "y1": 4}
_AXES = (0, 1, 2)


def var_mask(group: str | Iterable[str]) -> int:
    """Bitmask of a variable group: x1 -> 1, x2 -> 2, y -> 4."""
    names = (group,) if isinstance(group, str) else tuple(group)
    mask = 0
    for name in names:
        try:
            mask |= _VAR_BITS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown variable {name!r}; use 'x1', 'x2' or 'y'") from None
    return mask


@dataclass(frozen=True)
class JointDist:
    """A probability table over X1 x X2 x Y1."""

    p: NDArray[np.float64]
    shape: tuple[int, int, int]

    def __post_init__(self) -> None:
        shape = tuple(int(s) for s in self.shape)
        p = np.array(self.p, dtype=np.float64).ravel()
        if len(shape) != 3 or p.size != int(np.prod(shape)):
            raise ValueError(f"table of size {p.size} does not fit shape {shape}")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("joint distribution has negative or non-finite entries")
        if abs(p.sum() - 1.0) > JOINT_TOL:
            raise ValueError(f"joint distribution sums to {p.sum():.15g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_table(cls, table: ArrayLike) -> JointDist:
        t = np.asarray(table, dtype=np.float64)
        if t.ndim != 3:
            raise ValueError(f"expected a 3-D table indexed [x1, x2, y], got ndim={t.ndim}")
        return cls(t.ravel(), t.shape)

    @classmethod
    def from_flat(cls, flat: ArrayLike, shape: tuple[int, int, int]) -> JointDist:
        return cls(np.asarray(flat, dtype=np.float64), shape)

    @property
    def table(self) -> NDArray[np.float64]:
        return self.p.reshape(self.shape)

    def marginal(self, group: str | Iterable[str]) -> NDArray[np.float64]:
        return _marginal(self.table, var_mask(group))

    def __array__(self, dtype=None, copy=None) -> NDArray:
        t = self.table
        return t.astype(dtype) if dtype is not None else t


class JointPair(NamedTuple):
    """The unprimed and primed joint laws optimized jointly."""

    unprimed: JointDist
    primed: JointDist


def _as_table(j: JointDist | ArrayLike) -> NDArray[np.float64]:
    if isinstance(j, JointDist):
        return j.table
    t = np.asarray(j, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"expected a JointDist or a 3-D table, got ndim={t.ndim}")
    return t


def _marginal(table: NDArray, mask: int) -> NDArray:
    drop = tuple(ax for ax in _AXES if not mask >> ax & 1)
    return table.sum(axis=drop)


def entropy(d: ArrayLike) -> float:
    """Shannon entropy of a probability vector (any shape), 0 log 0 = 0."""
    v = np.asarray(d, dtype=np.float64).ravel()
    nz = v[v > 0]
    return float(-np.sum(nz * np.log(nz)))


def _h(table: NDArray, mask: int) -> float:
    return entropy(_marginal(table, mask)) if mask else 0.0


def joint_entropy(j: JointDist | ArrayLike, group: str | Iterable[str]) -> float:
    return _h(_as_table(j), var_mask(group))


def cond_entropy(
    j: JointDist | ArrayLike, group: str | Iterable[str], given: str | Iterable[str] = ()
) -> float:
    """H(group | given)."""
    t = _as_table(j)
    a, c = var_mask(group), var_mask(given) if given else 0
    if a & c:
        raise ValueError("conditioned and conditioning groups overlap")
    return _h(t, a | c) - _h(t, c)


def mutual_info(
    j: JointDist | ArrayLike,
    group_a: str | Iterable[str],
    group_b: str | Iterable[str],
    given: str | Iterable[str] = (),
) -> float:
    """I(group_a; group_b | given) = H(A,C) + H(B,C) - H(A,B,C) - H(C)."""
    t = _as_table(j)
    a, b = var_mask(group_a), var_mask(group_b)
    c = var_mask(given) if given else 0
    if not a or not b:
        raise ValueError("mutual information needs two nonempty groups")
    if a & b or a & c or b & c:
        raise ValueError("variable groups must be pairwise disjoint")
    val = _h(t, a | c) + _h(t, b | c) - _h(t, a | b | c) - _h(t, c)
    # exact identity I >= 0; only rounding can push it below
    return max(val, 0.0)


def _check_shape(t: NDArray, ch: ChannelSpec) -> None:
    if t.shape != (ch.x1_size, ch.x2_size, ch.y1_size):
        raise ValueError(
            f"joint shape {t.shape} does not match channel alphabets "
            f"({ch.x1_size}, {ch.x2_size}, {ch.y1_size})"
        )


def expected_log_channel(j: JointDist | ArrayLike, ch: ChannelSpec) -> float:
    """E_P[log q1(Y|X1,X2)]; -inf when P charges a cell with q1 = 0."""
    t = _as_table(j)
    _check_shape(t, ch)
    q = ch.kernel1
    charged = t > 0
    if np.any(charged & (q == 0)):
        return -np.inf
    return float(np.sum(t[charged] * np.log(q[charged])))


def cond_kl_to_channel(j: JointDist | ArrayLike, ch: ChannelSpec) -> float:
    """D(P_{Y|X1X2} || q1 | P_{X1X2}); +inf when P charges a cell with q1 = 0."""
    t = _as_table(j)
    _check_shape(t, ch)
    q = ch.kernel1
    charged = t > 0
    if np.any(charged & (q == 0)):
        return np.inf
    p12 = np.broadcast_to(t.sum(axis=2, keepdims=True), t.shape)
    ratio = t[charged] / (p12[charged] * q[charged])
    return max(float(np.sum(t[charged] * np.log(ratio))), 0.0)
