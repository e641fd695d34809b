"""Two-user discrete memoryless interference channel descriptions.

A channel is stored as two conditional probability tables, one per
receiver.  Row ``x1 * |X2| + x2`` of ``q1`` is the output distribution
seen by receiver 1 when the inputs are ``(x1, x2)``; ``q2`` follows the
same convention for receiver 2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "ChannelError",
    "ChannelSpec",
    "CompositionPair",
    "load_channel",
    "save_channel",
    "z_channel",
    "output_dist",
    "product_joint",
]

ROW_TOL = 1e-12


class ChannelError(ValueError):
    """Raised for malformed channel descriptions or compositions."""


def _check_stochastic(table: NDArray, name: str) -> None:
    if np.any(~np.isfinite(table)) or np.any(table < 0):
        bad = np.argwhere(~np.isfinite(table) | (table < 0))[0]
        raise ChannelError(f"{name} row {bad[0]} has a negative or non-finite entry")
    dev = np.abs(table.sum(axis=1) - 1.0)
    if np.any(dev > ROW_TOL):
        row = int(np.argmax(dev))
        raise ChannelError(
            f"{name} row {row} sums to {table[row].sum():.15g} "
            f"(deviation {dev[row]:.3g} exceeds {ROW_TOL:g})"
        )


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSpec:
    """Finite alphabets plus the per-symbol kernels of both receivers.

    ``q1`` has shape ``(x1_size * x2_size, y1_size)``; ``q2`` is optional
    and has shape ``(x1_size * x2_size, y2_size)``.
    """

    x1_size: int
    x2_size: int
    y1_size: int
    y2_size: int
    q1: NDArray[np.float64]
    q2: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        for name in ("x1_size", "x2_size", "y1_size", "y2_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ChannelError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        rows = self.x1_size * self.x2_size
        q1 = _frozen(self.q1)
        if q1.shape != (rows, self.y1_size):
            raise ChannelError(
                f"q1 has shape {q1.shape}, expected ({rows}, {self.y1_size}) "
                f"from x1_size={self.x1_size}, x2_size={self.x2_size}, y1_size={self.y1_size}"
            )
        _check_stochastic(q1, "q1")
        object.__setattr__(self, "q1", q1)
        if self.q2 is not None:
            q2 = _frozen(self.q2)
            if q2.shape != (rows, self.y2_size):
                raise ChannelError(
                    f"q2 has shape {q2.shape}, expected ({rows}, {self.y2_size})"
                )
            _check_stochastic(q2, "q2")
            object.__setattr__(self, "q2", q2)

    @property
    def kernel1(self) -> NDArray[np.float64]:
        """q1 as an array indexed ``[x1, x2, y1]``."""
        return self.q1.reshape(self.x1_size, self.x2_size, self.y1_size)

    @property
    def kernel2(self) -> NDArray[np.float64]:
        if self.q2 is None:
            raise ChannelError("channel has no q2 table; receiver 2 is undefined")
        return self.q2.reshape(self.x1_size, self.x2_size, self.y2_size)

    def swapped(self) -> ChannelSpec:
        """The same channel seen from user 2: inputs exchanged, q1 and q2 exchanged."""
        if self.q2 is None:
            raise ChannelError("channel has no q2 table; cannot analyze user 2")
        k1 = self.kernel1.transpose(1, 0, 2)
        k2 = self.kernel2.transpose(1, 0, 2)
        return ChannelSpec(
            x1_size=self.x2_size,
            x2_size=self.x1_size,
            y1_size=self.y2_size,
            y2_size=self.y1_size,
            q1=k2.reshape(-1, self.y2_size),
            q2=k1.reshape(-1, self.y1_size),
        )

    def to_dict(self) -> dict:
        d = {
            "x1_size": self.x1_size,
            "x2_size": self.x2_size,
            "y1_size": self.y1_size,
            "y2_size": self.y2_size,
            "q1": self.q1.tolist(),
        }
        if self.q2 is not None:
            d["q2"] = self.q2.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ChannelSpec:
        try:
            return cls(
                x1_size=d["x1_size"],
                x2_size=d["x2_size"],
                y1_size=d["y1_size"],
                y2_size=d["y2_size"],
                q1=d["q1"],
                q2=d.get("q2"),
            )
        except KeyError as e:
            raise ChannelError(f"channel description is missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, ChannelError):
                raise
            raise ChannelError(f"channel table is not a rectangular numeric array: {e}") from None


def _as_prob_vector(q: ArrayLike, name: str) -> NDArray[np.float64]:
    v = _frozen(q)
    if v.ndim != 1 or v.size == 0:
        raise ChannelError(f"{name} must be a nonempty 1-D probability vector")
    if np.any(~np.isfinite(v)) or np.any(v < 0):
        raise ChannelError(f"{name} has negative or non-finite entries: {v}")
    if abs(v.sum() - 1.0) > ROW_TOL:
        raise ChannelError(f"{name} sums to {v.sum():.15g}, not 1")
    return v


@dataclass(frozen=True)
class CompositionPair:
    """Input compositions (Q1, Q2) of the constant-composition ensemble."""

    q1_comp: NDArray[np.float64] = field()
    q2_comp: NDArray[np.float64] = field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "q1_comp", _as_prob_vector(self.q1_comp, "Q1"))
        object.__setattr__(self, "q2_comp", _as_prob_vector(self.q2_comp, "Q2"))

    @classmethod
    def uniform(cls, x1_size: int, x2_size: int) -> CompositionPair:
        return cls(np.full(x1_size, 1.0 / x1_size), np.full(x2_size, 1.0 / x2_size))

    def swapped(self) -> CompositionPair:
        return CompositionPair(self.q2_comp, self.q1_comp)

    def check_against(self, channel: ChannelSpec) -> None:
        if self.q1_comp.size != channel.x1_size or self.q2_comp.size != channel.x2_size:
            raise ChannelError(
                f"composition sizes ({self.q1_comp.size}, {self.q2_comp.size}) do not match "
                f"channel input alphabets ({channel.x1_size}, {channel.x2_size})"
            )


def load_channel(path: str | Path) -> ChannelSpec:
    """Read and validate a channel JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ChannelError(f"cannot read channel file {path}: {e}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ChannelError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(d, dict):
        raise ChannelError(f"{path}: top-level JSON value must be an object")
    return ChannelSpec.from_dict(d)


def save_channel(channel: ChannelSpec, path: str | Path) -> None:
    # repr-exact floats so that load_channel(save_channel(c)) == c
    Path(path).write_text(json.dumps(channel.to_dict(), indent=2) + "\n")


def z_channel(p: float) -> ChannelSpec:
    """Binary Z-interference channel: Y1 = X1*X2 xor Z with Z ~ Bern(p), Y2 = X2."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"crossover probability must lie in [0, 1], got {p}")
    q1 = np.empty((4, 2))
    q2 = np.zeros((4, 2))
    for x1 in range(2):
        for x2 in range(2):
            row = 2 * x1 + x2
            clean = x1 * x2
            q1[row, clean] = 1.0 - p
            q1[row, 1 - clean] = p
            q2[row, x2] = 1.0
    return ChannelSpec(2, 2, 2, 2, q1, q2)


def output_dist(channel: ChannelSpec, comps: CompositionPair) -> NDArray[np.float64]:
    """Distribution of Y1 when independent inputs with laws Q1, Q2 enter q1."""
    comps.check_against(channel)
    return np.einsum("a,b,aby->y", comps.q1_comp, comps.q2_comp, channel.kernel1)


def product_joint(channel: ChannelSpec, comps: CompositionPair) -> NDArray[np.float64]:
    """Joint law of (X1, X2, Y1) for independent inputs through q1, shape (|X1|, |X2|, |Y1|)."""
    comps.check_against(channel)
    return comps.q1_comp[:, None, None] * comps.q2_comp[None, :, None] * channel.kernel1
