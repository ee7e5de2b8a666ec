"""Numerical rank with an explicit, shared tolerance policy."""

from __future__ import annotations

import os
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = ["TolerancePolicy", "RankResult", "numerical_rank", "streamed_r_factor", "rank_from_singular_values",
           "max_workers", "parallel_map"]


@dataclass(frozen=True)
class TolerancePolicy:
    """Thresholds used for every rank decision in the package.

    A singular value counts toward the rank when it exceeds
    ``sigma_max * max(m, n) * eps_rank``. Matrices with more than
    ``stream_factor * n_cols`` rows are reduced block-by-block to their
    triangular QR factor first, which preserves singular values.
    """

    eps_rank: float = 2.0**-40
    eps_orth: float = 1e-10
    stream_factor: int = 4
    block_rows: int = 2048
    marginal_factor: float = 8.0

    def __post_init__(self):
        for name in ("eps_rank", "eps_orth"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.stream_factor < 1 or self.block_rows < 1 or self.marginal_factor < 1.0:
            raise ValueError("stream_factor, block_rows and marginal_factor must be >= 1")

    def with_overrides(self, **kwargs) -> TolerancePolicy:
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_POLICY = TolerancePolicy()


@dataclass(frozen=True)
class RankResult:
    rank: int
    target: int
    singular_values: np.ndarray = field(repr=False)
    tolerance_used: float
    marginal_factor: float = field(default=8.0, repr=False)

    @property
    def full(self) -> bool:
        """True when the rank reaches ``target``."""
        return self.rank >= self.target

    @property
    def marginal(self) -> bool:
        """Some singular value lies within ``marginal_factor`` of the threshold."""
        sv = self.singular_values
        if self.tolerance_used <= 0 or sv.size == 0:
            return False
        lo = self.tolerance_used / self.marginal_factor
        hi = self.tolerance_used * self.marginal_factor
        return bool(np.any((sv >= lo) & (sv <= hi)))

    @property
    def smallest_retained(self) -> float:
        return float(self.singular_values[self.rank - 1]) if self.rank else 0.0

    @property
    def gap_ratio(self) -> float:
        """smallest retained singular value / threshold (inf when rank is 0)."""
        if self.rank == 0:
            return float("inf")
        return self.smallest_retained / self.tolerance_used

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "target": self.target,
            "tolerance": self.tolerance_used,
            "marginal": self.marginal,
            "singular_values": [float(s) for s in self.singular_values],
        }


def rank_from_singular_values(sv: np.ndarray, shape: tuple[int, int], policy: TolerancePolicy = DEFAULT_POLICY,
                              target: int | None = None) -> RankResult:
    sv = np.sort(np.asarray(sv, dtype=float))[::-1]
    if sv.size == 0 or sv[0] == 0.0:
        tol = 0.0
        rank = 0
    else:
        tol = float(sv[0] * max(shape) * policy.eps_rank)
        rank = int(np.count_nonzero(sv > tol))
    return RankResult(rank=rank, target=min(shape) if target is None else target, singular_values=sv,
                      tolerance_used=tol, marginal_factor=policy.marginal_factor)


def streamed_r_factor(blocks: Iterable[np.ndarray], n_cols: int) -> tuple[np.ndarray, int]:
    """Triangular factor of the row-stack of ``blocks`` and its total row count.

    Only one block plus an ``n_cols x n_cols`` factor is held at a time.
    """
    r = None
    n_rows = 0
    for block in blocks:
        block = np.asarray(block)
        n_rows += block.shape[0]
        stacked = block if r is None else np.vstack([r, block])
        r = np.linalg.qr(stacked, mode="r")
    if r is None:
        r = np.zeros((0, n_cols))
    return r, n_rows


def numerical_rank(a: np.ndarray, policy: TolerancePolicy = DEFAULT_POLICY, target: int | None = None) -> RankResult:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, n = a.shape
    if m == 0 or n == 0:
        return rank_from_singular_values(np.zeros(0), (m, n), policy, target)
    if m > policy.stream_factor * n:
        step = policy.block_rows
        r, _ = streamed_r_factor((a[i:i + step] for i in range(0, m, step)), n)
        sv = np.linalg.svd(r, compute_uv=False)
    else:
        sv = np.linalg.svd(a, compute_uv=False)
    return rank_from_singular_values(sv, (m, n), policy, target)


def max_workers() -> int:
    """Thread cap from ``QSTABLE_THREADS`` (default 1)."""
    raw = os.environ.get("QSTABLE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items: list) -> list:
    """Order-preserving map, threaded when ``QSTABLE_THREADS`` > 1."""
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
