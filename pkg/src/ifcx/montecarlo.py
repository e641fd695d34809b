"""Small-blocklength random-coding simulation with exact ML decoding of user 1.

Codewords of user i are drawn independently and uniformly from the type
class of a composition with denominator n (repeats allowed).  Receiver 1
decodes with the likelihood averaged over the whole codebook of user 2,

    m_hat = argmax_m  sum_i prod_t q1(y_t | x1_m,t, x2_i,t),

evaluated in the log domain.  Errors are averaged jointly over codebooks,
messages and channel noise.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp
from scipy.stats import norm

from .channel import ChannelSpec, CompositionPair

__all__ = [
    "CodebookConfig",
    "ErrorEstimate",
    "quantize_composition",
    "generate_codebook",
    "ml_decode_user1",
    "estimate_error",
    "messages_for_rate",
    "BLOCK_TRIALS",
    "TIE_TOL",
]

BLOCK_TRIALS = 500


def quantize_composition(q: ArrayLike, n: int) -> NDArray[np.float64]:
    """Nearest composition with denominator n in total variation (largest remainder).

    Ties in the fractional parts go to the lower index.
    """
    if n < 1:
        raise ValueError("blocklength must be positive")
    q = np.asarray(q, dtype=np.float64)
    scaled = q * n
    k = np.floor(scaled + 1e-12).astype(np.int64)
    frac = scaled - k
    short = n - int(k.sum())
    # stable sort on -frac keeps lower indices first among equal remainders
    order = np.argsort(-frac, kind="stable")
    k[order[:short]] += 1
    return k / n


def _counts(q: NDArray, n: int) -> NDArray[np.int64]:
    k = np.rint(np.asarray(q) * n).astype(np.int64)
    if k.sum() != n or np.any(np.abs(k - np.asarray(q) * n) > 1e-9):
        raise ValueError(f"composition {q} does not have denominator {n}")
    return k


def generate_codebook(q: ArrayLike, n: int, m: int, rng: np.random.Generator) -> NDArray[np.int64]:
    """``m`` sequences of length ``n``, each a uniform permutation of the type ``q``."""
    k = _counts(np.asarray(q, dtype=np.float64), n)
    base = np.repeat(np.arange(k.size), k)
    return rng.permuted(np.tile(base, (m, 1)), axis=1)


def _scores(y: NDArray, cb1: NDArray, cb2: NDArray, logq: NDArray) -> NDArray:
    """log of sum_i q1(y|x1_m, x2_i) for every message m; leading batch axes allowed."""
    # ll[..., m, i] = sum_t log q1(y_t | x1_m,t, x2_i,t)
    ll = logq[cb1[..., :, None, :], cb2[..., None, :, :], y[..., None, None, :]].sum(axis=-1)
    return logsumexp(ll, axis=-1)


TIE_TOL = 1e-12


def _first_max(scores: NDArray) -> NDArray:
    """Index of the first score within TIE_TOL of the row maximum.

    Likelihoods that are equal in exact arithmetic can differ by a few ulps
    once logs are summed in different orders; treating those as ties keeps
    the lowest-index rule exact.
    """
    top = scores.max(axis=-1, keepdims=True)
    return np.argmax(scores >= top - TIE_TOL, axis=-1)


def ml_decode_user1(y: ArrayLike, cb1: ArrayLike, cb2: ArrayLike, ch: ChannelSpec) -> int:
    """Maximum-likelihood message of user 1; ties (to 1e-12 in log-likelihood) go to the lowest index."""
    y = np.asarray(y, dtype=np.int64)
    cb1 = np.atleast_2d(np.asarray(cb1, dtype=np.int64))
    cb2 = np.atleast_2d(np.asarray(cb2, dtype=np.int64))
    if cb1.shape[1] != y.size or cb2.shape[1] != y.size:
        raise ValueError("codeword length does not match the received sequence")
    with np.errstate(divide="ignore"):
        logq = np.log(ch.kernel1)
    return int(_first_max(_scores(y, cb1, cb2, logq)))


def messages_for_rate(n: int, rate: float) -> int:
    """M = ceil(exp(n R))."""
    return max(1, math.ceil(math.exp(n * rate) - 1e-9))


@dataclass(frozen=True)
class CodebookConfig:
    n: int
    m1: int
    m2: int
    comps: CompositionPair
    seed: int = 0
    trials: int = 10_000

    def __post_init__(self) -> None:
        if self.n < 1 or self.m1 < 1 or self.m2 < 1 or self.trials < 1:
            raise ValueError("n, m1, m2 and trials must all be positive")
        q = CompositionPair(
            quantize_composition(self.comps.q1_comp, self.n),
            quantize_composition(self.comps.q2_comp, self.n),
        )
        object.__setattr__(self, "comps", q)

    @classmethod
    def from_rates(
        cls, n: int, r1: float, r2: float, comps: CompositionPair, seed: int = 0, trials: int = 10_000
    ) -> CodebookConfig:
        return cls(n, messages_for_rate(n, r1), messages_for_rate(n, r2), comps, seed, trials)


@dataclass(frozen=True)
class ErrorEstimate:
    rate: float
    half_width: float
    errors: int
    trials: int

    def __iter__(self):
        return iter((self.rate, self.half_width))


def _wilson_half_width(errors: int, trials: int, level: float = 0.95) -> float:
    z = norm.ppf(0.5 + level / 2)
    p = errors / trials
    denom = 1 + z * z / trials
    return float(z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom)


def _run_block(args) -> int:
    cfg, ch, block, count = args
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, block]))
    n = cfg.n
    k1 = _counts(cfg.comps.q1_comp, n)
    k2 = _counts(cfg.comps.q2_comp, n)
    b1 = np.repeat(np.arange(k1.size), k1)
    b2 = np.repeat(np.arange(k2.size), k2)
    cb1 = rng.permuted(np.broadcast_to(b1, (count, cfg.m1, n)).copy(), axis=-1)
    cb2 = rng.permuted(np.broadcast_to(b2, (count, cfg.m2, n)).copy(), axis=-1)
    msg1 = rng.integers(cfg.m1, size=count)
    msg2 = rng.integers(cfg.m2, size=count)
    rows = np.arange(count)
    x1, x2 = cb1[rows, msg1], cb2[rows, msg2]
    # inverse-CDF sampling of Y_t given (x1_t, x2_t)
    cdf = np.cumsum(ch.kernel1, axis=-1)[x1, x2]
    u = rng.random((count, n, 1))
    y = np.minimum((u >= cdf).sum(axis=-1), ch.y1_size - 1)
    with np.errstate(divide="ignore"):
        logq = np.log(ch.kernel1)
    decided = _first_max(_scores(y, cb1, cb2, logq))
    return int(np.sum(decided != msg1))


def estimate_error(cfg: CodebookConfig, ch: ChannelSpec, workers: int = 1) -> ErrorEstimate:
    """Ensemble-average error rate of user 1 with a 95% Wilson half-width.

    Trials run in blocks of ``BLOCK_TRIALS`` with seeds derived from
    ``(cfg.seed, block index)``, so the result does not depend on
    ``workers``.
    """
    cfg.comps.check_against(ch)
    blocks = []
    done, b = 0, 0
    while done < cfg.trials:
        c = min(BLOCK_TRIALS, cfg.trials - done)
        blocks.append((cfg, ch, b, c))
        done += c
        b += 1
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(_run_block, blocks))
    else:
        errs = [_run_block(a) for a in blocks]
    e = int(sum(errs))
    return ErrorEstimate(e / cfg.trials, _wilson_half_width(e, cfg.trials), e, cfg.trials)
