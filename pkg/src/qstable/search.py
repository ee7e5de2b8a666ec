"""Randomized exploration of small stable sets.

Nothing here proves anything; every witness is re-checked with the
exhaustive bipartition checker before it is reported.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import DEFAULT_POLICY, TolerancePolicy
from .stability import cardinality_bounds, check_every_bipartition, check_locally_stable
from .tensor_core import ShapeError, StateSet, SystemShape

__all__ = ["NothingToMinimizeError", "SearchConfig", "SearchOutcome", "haar_unitary", "random_orthogonal_set",
           "minimize_subset", "probe_bound", "EXHAUSTIVE_LIMIT"]

EXHAUSTIVE_LIMIT = 12


class NothingToMinimizeError(ValueError):
    """The starting set does not pass the requested check."""


@dataclass(frozen=True)
class SearchConfig:
    trials: int = 10
    seed: int = 0
    target_size: int = 2
    mode: str = "all-bipartitions"
    time_budget: float = 60.0
    exhaustive: bool = False
    perturb_steps: int = 20

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.target_size < 2:
            raise ValueError("target_size must be >= 2")
        if self.mode not in ("single-party", "all-bipartitions"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class SearchOutcome:
    best_found: StateSet | None
    best_size: int
    verdict_log: list[dict] = field(default_factory=list)
    exhausted: bool = False
    best_indices: tuple[int, ...] | None = None
    timed_out: bool = False

    def to_json(self) -> dict:
        from .io import state_set_to_json

        return {
            "best_size": self.best_size,
            "best_indices": list(self.best_indices) if self.best_indices is not None else None,
            "exhausted": self.exhausted,
            "timed_out": self.timed_out,
            "best_found": state_set_to_json(self.best_found) if self.best_found is not None else None,
            "verdict_log": self.verdict_log,
        }


def _passes(S: StateSet, mode: str, policy: TolerancePolicy) -> bool:
    if mode == "single-party":
        return check_locally_stable(S, policy).stable
    return check_every_bipartition(S, "shortcut", policy).stable


def _lower_bound(shape: SystemShape, mode: str) -> int:
    lower_s, lower_S = cardinality_bounds(shape)
    return lower_s if mode == "single-party" else lower_S


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Gaussian, R's diagonal phases removed."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_orthogonal_set(shape: SystemShape | tuple[int, ...], size: int, seed: int) -> StateSet:
    """First ``size`` columns of a seeded Haar unitary on the full space."""
    shape = shape if isinstance(shape, SystemShape) else SystemShape(shape)
    if not 1 <= size <= shape.total_dim:
        raise ShapeError(f"cannot fit {size} orthogonal states in dimension {shape.total_dim}")
    U = haar_unitary(shape.total_dim, np.random.default_rng(seed))
    return StateSet(shape, U[:, :size].T, label=f"haar seed={seed} size={size}")


def minimize_subset(S: StateSet, cfg: SearchConfig, policy: TolerancePolicy = DEFAULT_POLICY) -> SearchOutcome:
    """Greedy random removal with restarts, or subset enumeration when ``cfg.exhaustive``.

    Subsets smaller than the cardinality lower bound for the mode are
    rejected without computing ranks.
    """
    if S.shape.n_parties < 2 or not _passes(S, cfg.mode, policy):
        raise NothingToMinimizeError(f"set does not pass the {cfg.mode} check")
    if cfg.exhaustive:
        return _enumerate(S, cfg, policy)

    floor = max(_lower_bound(S.shape, cfg.mode), 2)
    deadline = time.monotonic() + cfg.time_budget
    log: list[dict] = []
    best = tuple(range(S.cardinality))
    best_exhausted = False
    timed_out = False

    for trial in range(cfg.trials):
        rng = np.random.default_rng(cfg.seed + trial)
        current = list(range(S.cardinality))
        stuck = False
        while len(current) > cfg.target_size and not timed_out:
            progressed = False
            for victim in rng.permutation(current):
                if time.monotonic() > deadline:
                    timed_out = True
                    break
                candidate = [i for i in current if i != victim]
                if len(candidate) < floor:
                    verdict = "below-bound"
                else:
                    verdict = "stable" if _passes(S.subset(candidate), cfg.mode, policy) else "not-stable"
                log.append({"trial": trial, "subset": candidate, "verdict": verdict})
                if verdict == "stable":
                    current = candidate
                    progressed = True
                    break
            if not progressed:
                stuck = not timed_out
                break
        if len(current) < len(best) or (len(current) == len(best) and stuck and not best_exhausted):
            best, best_exhausted = tuple(current), stuck
        if timed_out or len(best) <= cfg.target_size:
            break

    return SearchOutcome(S.subset(best, label=f"{S.label} subset"), len(best), log, best_exhausted, best, timed_out)


def _enumerate(S: StateSet, cfg: SearchConfig, policy: TolerancePolicy) -> SearchOutcome:
    if S.cardinality > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive subset search is limited to {EXHAUSTIVE_LIMIT} states")
    floor = max(_lower_bound(S.shape, cfg.mode), cfg.target_size, 2)
    deadline = time.monotonic() + cfg.time_budget
    log: list[dict] = []
    for size in range(floor, S.cardinality + 1):
        for combo in itertools.combinations(range(S.cardinality), size):
            if time.monotonic() > deadline:
                full = tuple(range(S.cardinality))
                return SearchOutcome(S, S.cardinality, log, False, full, True)
            ok = _passes(S.subset(combo), cfg.mode, policy)
            log.append({"trial": 0, "subset": list(combo), "verdict": "stable" if ok else "not-stable"})
            if ok:
                return SearchOutcome(S.subset(combo, label=f"{S.label} subset"), size, log, True, combo)
    raise AssertionError("the full set passed but no subset did")


def _perturb(S: StateSet, rng: np.random.Generator, scale: float) -> StateSet:
    d = S.shape.total_dim
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (h + h.conj().T) / 2
    V = scipy.linalg.expm(1j * scale * h)
    return StateSet(S.shape, S.amplitude_matrix() @ V.T, label=S.label)


def _deficit(S: StateSet, mode: str, policy: TolerancePolicy) -> int:
    report = check_locally_stable(S, policy) if mode == "single-party" else check_every_bipartition(S, "shortcut", policy)
    return sum(e.result.target - e.result.rank for e in report.entries)


def probe_bound(shape: SystemShape | tuple[int, ...], cfg: SearchConfig,
                policy: TolerancePolicy = DEFAULT_POLICY) -> SearchOutcome:
    """Look for stable sets of exactly ``cfg.target_size`` states.

    Each trial draws a seeded Haar set, then hill-climbs on the total rank
    deficit with small global unitary perturbations. A candidate counts only
    if the exhaustive bipartition checker (or the single-party checker in
    that mode) agrees.
    """
    shape = shape if isinstance(shape, SystemShape) else SystemShape(shape)
    size = cfg.target_size
    deadline = time.monotonic() + cfg.time_budget
    log: list[dict] = []
    witness = None
    for trial in range(cfg.trials):
        if time.monotonic() > deadline:
            return SearchOutcome(witness, size if witness else 0, log, False, None, True)
        rng = np.random.default_rng(cfg.seed + trial)
        S = random_orthogonal_set(shape, size, int(rng.integers(2**63)))
        deficit = _deficit(S, cfg.mode, policy)
        for _ in range(cfg.perturb_steps):
            if deficit == 0 or time.monotonic() > deadline:
                break
            candidate = _perturb(S, rng, 0.3)
            d = _deficit(candidate, cfg.mode, policy)
            if d < deficit:
                S, deficit = candidate, d
        confirmed = False
        if deficit == 0:
            if cfg.mode == "single-party":
                confirmed = check_locally_stable(S, policy).stable
            else:
                confirmed = check_every_bipartition(S, "exhaustive", policy).stable
        log.append({"trial": trial, "size": size, "deficit": deficit,
                    "verdict": "stable" if confirmed else "not-stable"})
        if confirmed:
            witness = StateSet(shape, S.amplitude_matrix(), label=f"probe witness trial={trial}")
            break
    return SearchOutcome(witness, size if witness else 0, log, False, None, False)
