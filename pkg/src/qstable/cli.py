"""``qstable`` command line.

Exit codes for ``verify``: 0 stable, 1 not stable, 2 marginal (some singular
value within 8x of the rank threshold), 3 input error. ``certify`` returns
0 when every certificate passes its checks, 1 when there is nothing to
certify, 2 when a certificate fails a check.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import constructions, search, stability
from .entanglement import schmidt_profile
from .io import InputError, dump_json, load_state_set, state_set_to_json
from .numerics import TolerancePolicy
from .reproduce import format_table, run_reproduce
from .tensor_core import Bipartition, DEFAULT_ORTH_TOL

EXIT_STABLE, EXIT_NOT_STABLE, EXIT_MARGINAL, EXIT_INPUT = 0, 1, 2, 3
ALL_BIPARTITION_PARTY_CAP = 6


@dataclass(frozen=True)
class RunConfig:
    tol_rank: float | None = None
    tol_orth: float | None = None
    allow_large: bool = False
    out: str | None = None

    def __post_init__(self):
        for name in ("tol_rank", "tol_orth"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1e-2:
                raise InputError(f"--{name.replace('_', '-')} must lie in (0, 1e-2), got {value}")

    @property
    def policy(self) -> TolerancePolicy:
        return TolerancePolicy().with_overrides(eps_rank=self.tol_rank, eps_orth=self.tol_orth)

    @property
    def orth_tol(self) -> float:
        return self.tol_orth if self.tol_orth is not None else DEFAULT_ORTH_TOL


def _dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _bipartition(text: str) -> Bipartition:
    try:
        left, right = text.split("|")
        return Bipartition([int(x) for x in left.split(",")], [int(x) for x in right.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected e.g. '0|1,2', got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-rank", type=float, default=None, help="relative rank threshold (default 2^-40)")
    p.add_argument("--tol-orth", type=float, default=None, help="relative orthogonality tolerance (default 1e-10)")
    p.add_argument("--out", default=None, help="write JSON output here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstable", description="Local stability of orthogonal state sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="emit a constructed state set as JSON")
    p.add_argument("kind", choices=["theorem5", "sg", "wbasis", "bell"])
    p.add_argument("--dims", type=_dims)
    p.add_argument("--n", type=int)
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="rank-based stability verdict")
    p.add_argument("set_file")
    p.add_argument("--mode", choices=["single-party", "all-bipartitions"], default="single-party")
    p.add_argument("--exhaustive", action="store_true", help="check both sides of every bipartition")
    p.add_argument("--allow-large", action="store_true")
    _common(p)

    p = sub.add_parser("certify", help="orthogonality-preserving POVM for each deficient side")
    p.add_argument("set_file")
    p.add_argument("--mode", choices=["single-party", "all-bipartitions"], default="single-party")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--bipartition", type=_bipartition, default=None, help="e.g. '0|1,2'")
    p.add_argument("--measuring", choices=["left", "right"], default="right")
    p.add_argument("--allow-large", action="store_true")
    _common(p)

    p = sub.add_parser("bounds", help="cardinality lower bounds")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("entanglement", help="Schmidt profile of every state")
    p.add_argument("set_file")
    _common(p)

    p = sub.add_parser("search", help="shrink a stable set by random removals")
    p.add_argument("set_file")
    p.add_argument("--target-size", type=int, default=2)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["single-party", "all-bipartitions"], default="all-bipartitions")
    p.add_argument("--exhaustive", action="store_true", help="enumerate subsets (at most 12 states)")
    p.add_argument("--time-budget", type=float, default=60.0)
    _common(p)

    p = sub.add_parser("probe", help="look for stable sets at the cardinality lower bound")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--target-size", type=int, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["single-party", "all-bipartitions"], default="all-bipartitions")
    p.add_argument("--time-budget", type=float, default=60.0)
    _common(p)

    p = sub.add_parser("reproduce", help="run the headline checks")
    p.add_argument("--n6", action="store_true", help="add the 6-qubit W basis")
    p.add_argument("--allow-large", action="store_true", help="also add the 7-qubit W basis")
    p.add_argument("--seed", type=int, default=0)
    _common(p)
    return parser


def _print_report(report: stability.StabilityReport) -> None:
    print(f"mode: {report.mode.value}   set: {report.label or '-'}")
    for e in report.entries:
        flag = " (marginal)" if e.result.marginal else ""
        measuring = "".join(chr(65 + p) for p in e.measuring_parties)
        print(f"  {str(e.bipartition):>12}  measuring {measuring:<8} rank {e.result.rank:>6} / {e.result.target:<6}"
              f" {'ok' if e.stable else 'deficient'}{flag}")
    print(f"overall: {report.overall.value}{' (marginal)' if report.marginal else ''}")


def _guard_size(S, mode: str, allow_large: bool) -> None:
    if mode == "all-bipartitions" and S.shape.n_parties > ALL_BIPARTITION_PARTY_CAP and not allow_large:
        raise InputError(f"{S.shape.n_parties} parties exceeds the all-bipartitions cap "
                         f"{ALL_BIPARTITION_PARTY_CAP}; pass --allow-large")


def verify_exit_code(report: stability.StabilityReport) -> int:
    if report.marginal:
        return EXIT_MARGINAL
    return EXIT_STABLE if report.stable else EXIT_NOT_STABLE


def cmd_construct(args) -> int:
    kind = args.kind
    if kind in ("theorem5", "sg"):
        if not args.dims:
            raise InputError(f"construct {kind} needs --dims")
        S = constructions.theorem5_set(args.dims) if kind == "theorem5" else constructions.sg_set(args.dims)
    elif kind == "wbasis":
        if args.n is None:
            raise InputError("construct wbasis needs --n")
        S = constructions.w_basis(args.n)
    else:
        S = constructions.bell_example()
    text = dump_json(state_set_to_json(S), args.out)
    if args.out is None:
        print(text)
    else:
        print(f"wrote {len(S)} states over dims {S.shape.dims} to {args.out}")
    return 0


def cmd_verify(args, cfg: RunConfig) -> int:
    S = load_state_set(args.set_file, cfg.orth_tol)
    _guard_size(S, args.mode, cfg.allow_large)
    report = stability.check(S, args.mode, args.exhaustive, cfg.policy)
    _print_report(report)
    if cfg.out:
        dump_json(report.to_json(), cfg.out)
    return verify_exit_code(report)


def cmd_certify(args, cfg: RunConfig) -> int:
    S = load_state_set(args.set_file, cfg.orth_tol)
    if args.bipartition is not None:
        sides = [(args.bipartition, args.measuring)]
    else:
        _guard_size(S, args.mode, cfg.allow_large)
        report = stability.check(S, args.mode, args.exhaustive, cfg.policy)
        sides = [(e.bipartition, e.measuring_side) for e in report.entries if not e.stable]
    certs = []
    for bp, side in sides:
        try:
            certs.append(stability.extract_certificate(S, bp, side, cfg.policy))
        except stability.NoCertificateError as exc:
            print(f"{bp} measuring {side}: {exc}")
    for c in certs:
        print(f"{c.bipartition} measuring {c.measuring_side}: rank {c.rank.rank}/{c.rank.target}, "
              f"checks {'all pass' if c.valid else c.checks}")
    if cfg.out:
        dump_json({"certificates": [c.to_json() for c in certs]}, cfg.out)
    if not certs:
        print("no certificate: every requested side is stable")
        return EXIT_NOT_STABLE
    return 0 if all(c.valid for c in certs) else EXIT_MARGINAL


def cmd_bounds(args) -> int:
    lower_s, lower_S = stability.cardinality_bounds(args.dims)
    out = {"dims": list(args.dims), "lower_s": lower_s, "lower_S": lower_S}
    print(dump_json(out, args.out))
    return 0


def cmd_entanglement(args, cfg: RunConfig) -> int:
    S = load_state_set(args.set_file, cfg.orth_tol)
    profiles = [schmidt_profile(psi, cfg.policy) for psi in S]
    for k, prof in enumerate(profiles):
        ranks = " ".join(f"{e.bipartition}:{e.schmidt_rank}" for e in prof.entries)
        print(f"state {k}: {ranks}{'  genuinely entangled' if prof.genuinely_entangled else ''}")
    if cfg.out:
        dump_json({"states": [p.to_json() for p in profiles]}, cfg.out)
    return 0


def cmd_search(args, cfg: RunConfig) -> int:
    S = load_state_set(args.set_file, cfg.orth_tol)
    sc = search.SearchConfig(trials=args.trials, seed=args.seed, target_size=args.target_size, mode=args.mode,
                             time_budget=args.time_budget, exhaustive=args.exhaustive)
    try:
        outcome = search.minimize_subset(S, sc, cfg.policy)
    except search.NothingToMinimizeError as exc:
        print(exc)
        return EXIT_NOT_STABLE
    print(f"best size {outcome.best_size} (indices {list(outcome.best_indices)}), "
          f"exhausted={outcome.exhausted}, {len(outcome.verdict_log)} verdicts")
    if cfg.out:
        dump_json(outcome.to_json(), cfg.out)
    return 0


def cmd_probe(args, cfg: RunConfig) -> int:
    lower_s, lower_S = stability.cardinality_bounds(args.dims)
    target = args.target_size or (lower_s if args.mode == "single-party" else lower_S)
    sc = search.SearchConfig(trials=args.trials, seed=args.seed, target_size=target, mode=args.mode,
                             time_budget=args.time_budget)
    outcome = search.probe_bound(args.dims, sc, cfg.policy)
    found = outcome.best_found is not None
    print(f"target size {target}: {'witness found' if found else 'no witness'} after {len(outcome.verdict_log)} trials")
    if cfg.out:
        dump_json(outcome.to_json(), cfg.out)
    return 0


def cmd_reproduce(args, policy: TolerancePolicy) -> int:
    results = run_reproduce(policy, include_n6=args.n6, include_large=args.allow_large, seed=args.seed)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(tol_rank=getattr(args, "tol_rank", None), tol_orth=getattr(args, "tol_orth", None),
                        allow_large=getattr(args, "allow_large", False), out=getattr(args, "out", None))
        cmd = args.command
        if cmd == "construct":
            return cmd_construct(args)
        if cmd == "verify":
            return cmd_verify(args, cfg)
        if cmd == "certify":
            return cmd_certify(args, cfg)
        if cmd == "bounds":
            return cmd_bounds(args)
        if cmd == "entanglement":
            return cmd_entanglement(args, cfg)
        if cmd == "search":
            return cmd_search(args, cfg)
        if cmd == "probe":
            return cmd_probe(args, cfg)
        return cmd_reproduce(args, cfg.policy)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
