"""Headline checks at desk scale, run by ``qstable reproduce``."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .constructions import bell_example, sg_set, theorem5_cardinality, theorem5_set, w_basis
from .entanglement import is_genuinely_entangled
from .numerics import DEFAULT_POLICY, TolerancePolicy
from .stability import Verdict, build_dmatrix, check_every_bipartition, check_locally_stable, rank_of
from .tensor_core import Bipartition

__all__ = ["CheckResult", "BELL_DMATRIX", "W3_TABLE", "run_reproduce", "format_table"]

BELL_DMATRIX = np.array([
    [1, 0, 0, -1],
    [0, 1, 1, 0],
    [1, 0, 0, -1],
    [0, 1, -1, 0],
    [0, 1, 1, 0],
    [0, -1, 1, 0],
])

# U|ijk> for the 3-qubit W operator, as {basis string: coefficient}.
W3_TABLE = [
    {"100": 1, "010": 1, "001": 1},
    {"101": 1, "011": 1, "000": 1},
    {"110": 1, "000": 1, "011": -1},
    {"111": 1, "001": 1, "010": -1},
    {"000": 1, "110": -1, "101": -1},
    {"001": 1, "111": -1, "100": -1},
    {"010": 1, "100": -1, "111": 1},
    {"011": 1, "101": -1, "110": 1},
]

MIN_GAP = 1e3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, ok, detail, time.perf_counter() - t0)


def _bell(policy: TolerancePolicy) -> tuple[bool, str]:
    S = bell_example()
    D = build_dmatrix(S, Bipartition([0], [1]), "right")
    same = np.array_equal(D.rows(), BELL_DMATRIX)
    r_ab = rank_of(D, policy)
    r_ba = rank_of(build_dmatrix(S, Bipartition([0], [1]), "left"), policy)
    verdict = check_locally_stable(S, policy).overall
    ok = same and r_ab.rank == 3 and r_ba.rank == 3 and verdict is Verdict.LOCALLY_STABLE
    return ok, f"matrix match={same} rank A|B={r_ab.rank} B|A={r_ba.rank} {verdict.value}"


def _theorem5(dims: tuple[int, ...], policy: TolerancePolicy) -> tuple[bool, str]:
    S = theorem5_set(dims)
    report = check_every_bipartition(S, "exhaustive", policy)
    gap = min(e.result.gap_ratio for e in report.entries)
    ok = (len(S) == theorem5_cardinality(dims) and report.overall is Verdict.STABLE_EVERY_BIPARTITION
          and gap >= MIN_GAP and not report.marginal)
    return ok, f"|S|={len(S)} ranks={report.ranks()} min gap={gap:.2e}"


def _sg(policy: TolerancePolicy) -> tuple[bool, str]:
    S = sg_set((2, 2, 2))
    genuine = all(is_genuinely_entangled(psi, policy) for psi in S)
    report = check_every_bipartition(S, "exhaustive", policy)
    ok = len(S) == 8 and genuine and report.overall is Verdict.STABLE_EVERY_BIPARTITION
    return ok, f"|S|={len(S)} genuinely entangled={genuine} {report.overall.value}"


def _w3(policy: TolerancePolicy) -> tuple[bool, str]:
    S = w_basis(3)
    table_ok = True
    for psi, row in zip(S, W3_TABLE):
        expected = np.zeros(8)
        for bits, c in row.items():
            expected[int(bits, 2)] = c
        table_ok &= np.array_equal(psi.amplitudes, expected)
    report = check_every_bipartition(S, "shortcut", policy)
    ranks = report.ranks()
    ok = table_ok and ranks == [15, 15, 15]
    return ok, f"table match={table_ok} one-vs-rest ranks={ranks}"


def _wn(n: int, policy: TolerancePolicy) -> tuple[bool, str]:
    report = check_every_bipartition(w_basis(n), "shortcut", policy)
    return report.overall is Verdict.STABLE_EVERY_BIPARTITION, f"ranks={report.ranks()}"


def _subsets(n: int, size: int, draws: int, seed: int, policy: TolerancePolicy) -> tuple[bool, str]:
    S = w_basis(n)
    rng = np.random.default_rng(seed)
    passed = 0
    for _ in range(draws):
        idx = np.sort(rng.choice(len(S), size=size, replace=False))
        passed += check_every_bipartition(S.subset(idx), "shortcut", policy).stable
    return passed == draws, f"{passed}/{draws} subsets of size {size} stable"


def run_reproduce(policy: TolerancePolicy = DEFAULT_POLICY, include_n6: bool = False,
                  include_large: bool = False, seed: int = 0) -> list[CheckResult]:
    checks: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("bell D-matrix and rank", lambda: _bell(policy)),
        ("theorem5 (2,2,2)", lambda: _theorem5((2, 2, 2), policy)),
        ("theorem5 (2,2,3)", lambda: _theorem5((2, 2, 3), policy)),
        ("theorem5 (3,3)", lambda: _theorem5((3, 3), policy)),
        ("sg (2,2,2)", lambda: _sg(policy)),
        ("wbasis n=3 table and ranks", lambda: _w3(policy)),
        ("wbasis n=4 all-bipartitions", lambda: _wn(4, policy)),
        ("wbasis n=5 all-bipartitions", lambda: _wn(5, policy)),
        ("wbasis n=3 random 6-subsets", lambda: _subsets(3, 6, 20, seed, policy)),
        ("wbasis n=4 random 12-subsets", lambda: _subsets(4, 12, 20, seed, policy)),
    ]
    if include_n6 or include_large:
        checks.append(("wbasis n=6 all-bipartitions", lambda: _wn(6, policy)))
    if include_large:
        checks.append(("wbasis n=7 all-bipartitions", lambda: _wn(7, policy)))
    return [_timed(name, fn) for name, fn in checks]


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.3f}  {r.detail}")
    total = sum(r.seconds for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} passed in {total:.2f} s")
    return "\n".join(lines)
