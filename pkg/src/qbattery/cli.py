"""Batch command-line front end.

Four subcommands: ``verify`` (seeded Monte Carlo sweep of the power bound and
its identity chain), ``evolve`` (trajectory of a scenario under exact unitary
evolution), ``search`` (zero-power / saturation optimization), and ``demo``
(built-in worked cases with pass/fail checks).

Every file-writing subcommand stores its data payload at --out and a sidecar
manifest at <out>.manifest.json with the resolved configuration, seed, tool
version, input digests, and wall-clock duration. Payload bytes depend only on
configuration and seed — never on --threads or timing. Exit codes: 0 success,
1 a mathematical claim failed to hold (or a search goal was not reached),
2 bad input.
"""

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    TRAJECTORY_COLUMNS,
    ScenarioError,
    builtin_exchange_scenario,
    parse_scenario,
    trajectory_report,
    trajectory_rows,
)
from .ensembles import (
    SeedSpec,
    battery_eigenstate_product,
    draw_instance,
    gue_hermitian,
    haar_pure,
)
from .moments import compute_moments, verify_instance
from .operators import (
    DensityMatrix,
    HermitianOperator,
    NumericalIntegrityError,
    RejectedInputError,
    TensorStructure,
    partial_trace_to_battery,
    to_matrix_literal,
)
from .search import (
    SearchConfig,
    SearchThresholds,
    find_saturating,
    find_zero_power,
)

ENSEMBLES = {"haar": "haar", "ginibre": "ginibre", "gue-ops": "mix"}

TRIAL_COLUMNS = (
    "trial",
    "kind",
    "power",
    "power_sq",
    "term_fv",
    "term_vf",
    "term_cross",
    "corrected_bound",
    "loose_bound",
    "slack",
    "saturation_ratio",
    "mean_f",
    "mean_v",
    "var_f",
    "var_v",
    "cov_re",
    "cov_im",
)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: str, subcommand: str, config: dict, seed: int,
                    digests: dict, started: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "version": __version__,
        "input_digests": digests,
        "duration_seconds": time.perf_counter() - started,
    }
    Path(out + ".manifest.json").write_bytes(_json_bytes(manifest))


def _parse_dims(text: str) -> TensorStructure:
    parts = text.split(",")
    if len(parts) != 4:
        raise RejectedInputError(f"--dims wants dW,dS,dB,dA (4 integers), got {text!r}")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise RejectedInputError(f"--dims entries must be integers, got {text!r}") from None
    return TensorStructure.from_dims(dims)


def _g17(x: float) -> str:
    return "%.17g" % x


def _map_ordered(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------- verify

def _run_trial(structure: TensorStructure, kind: str, seed: int, rank, index: int) -> dict:
    rho, f, v, used = draw_instance(structure, kind, seed, index, rank=rank)
    row = {"trial": index, "kind": used}
    try:
        report = verify_instance(rho, f, v, structure)
    except NumericalIntegrityError as exc:
        row["violation"] = str(exc)
        row["instance"] = {
            "rho": to_matrix_literal(rho),
            "f": to_matrix_literal(f),
            "v": to_matrix_literal(v),
        }
        return row
    row["report"] = report.to_dict()
    row["moments"] = compute_moments(rho, f, v, structure).to_dict()
    return row


def cmd_verify(args) -> int:
    structure = _parse_dims(args.dims)
    if args.trials < 0:
        raise RejectedInputError(f"--trials must be non-negative, got {args.trials}")
    if args.rank is not None and not 1 <= args.rank <= structure.dim:
        raise RejectedInputError(
            f"--rank must be in [1, {structure.dim}] for these dims, got {args.rank}"
        )
    kind = ENSEMBLES[args.ensemble]
    started = time.perf_counter()

    def one(i: int) -> dict:
        return _run_trial(structure, kind, args.seed, args.rank, i)

    rows = _map_ordered(one, range(args.trials), args.threads)

    violations = [r for r in rows if "violation" in r]
    clean = [r for r in rows if "report" in r]
    summary = {
        "trials": args.trials,
        "violations": len(violations),
        "max_power_sq": None,
        "min_slack": None,
        "mean_saturation_ratio": None,
        "worst_case": None,
    }
    if clean:
        slacks = [r["report"]["slack"] for r in clean]
        worst = clean[int(np.argmin(slacks))]
        summary["max_power_sq"] = max(r["report"]["power_sq"] for r in clean)
        summary["min_slack"] = min(slacks)
        summary["mean_saturation_ratio"] = math.fsum(
            r["report"]["saturation_ratio"] for r in clean
        ) / len(clean)
        rho, f, v, used = draw_instance(structure, kind, args.seed, worst["trial"], rank=args.rank)
        summary["worst_case"] = {
            "trial": worst["trial"],
            "kind": used,
            "rho": to_matrix_literal(rho),
            "f": to_matrix_literal(f),
            "v": to_matrix_literal(v),
            "report": worst["report"],
        }
    if violations:
        summary["worst_case"] = violations[0]

    Path(args.out).write_bytes(_json_bytes(summary))
    if args.format == "csv":
        lines = [",".join(TRIAL_COLUMNS)]
        for r in clean:
            rep, mom = r["report"], r["moments"]
            lines.append(",".join([
                str(r["trial"]),
                r["kind"],
                _g17(rep["power"]),
                _g17(rep["power_sq"]),
                _g17(rep["term_fv"]),
                _g17(rep["term_vf"]),
                _g17(rep["term_cross"]),
                _g17(rep["corrected_bound"]),
                _g17(rep["loose_bound"]),
                _g17(rep["slack"]),
                _g17(rep["saturation_ratio"]),
                _g17(mom["mean_f"]),
                _g17(mom["mean_v"]),
                _g17(mom["var_f"]),
                _g17(mom["var_v"]),
                _g17(mom["cov"]["re"]),
                _g17(mom["cov"]["im"]),
            ]))
        Path(args.out + ".trials.csv").write_bytes(("\n".join(lines) + "\n").encode())

    config = {
        "dims": args.dims,
        "trials": args.trials,
        "ensemble": args.ensemble,
        "rank": args.rank,
        "threads": args.threads,
        "format": args.format,
    }
    _write_manifest(args.out, "verify", config, args.seed, {}, started)

    print(f"verify: {args.trials} trials, {len(violations)} violations -> {args.out}")
    return 0 if not violations else 1


# ---------------------------------------------------------------- evolve

def cmd_evolve(args) -> int:
    started = time.perf_counter()
    digests = {}
    if args.config == "exchange" and not Path(args.config).exists():
        rho0, hspec, f, grid = parse_scenario(builtin_exchange_scenario())
        config_doc = "builtin:exchange"
    else:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise RejectedInputError(f"config: cannot read {args.config!r}: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"config: not valid JSON: {exc}") from None
        digests[str(path)] = _sha256(path)
        rho0, hspec, f, grid = parse_scenario(doc)
        config_doc = str(path)

    records = trajectory_report(rho0, hspec, f, grid)

    if args.format == "json":
        docs = [
            dict(zip(TRAJECTORY_COLUMNS, (float(v) if v else None for v in row)))
            for row in trajectory_rows(records)
        ]
        payload = _json_bytes(docs)
    else:
        lines = [",".join(TRAJECTORY_COLUMNS)]
        lines.extend(",".join(row) for row in trajectory_rows(records))
        payload = ("\n".join(lines) + "\n").encode()
    Path(args.out).write_bytes(payload)

    config = {"config": config_doc, "format": args.format, "threads": args.threads}
    _write_manifest(args.out, "evolve", config, args.seed, digests, started)

    max_power = max(abs(r.report.power) for r in records)
    min_purity = min(r.battery_purity for r in records)
    print(
        f"evolve: {len(records)} points, max |power| = {max_power:.6g}, "
        f"min battery purity = {min_purity:.6g} -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------- search

def cmd_search(args) -> int:
    structure = _parse_dims(args.dims)
    started = time.perf_counter()
    thresholds = SearchThresholds(
        min_var_f=args.min_var_f,
        min_abs_cov=args.min_abs_cov,
        max_abs_power=args.max_abs_power,
        require_entangled=args.require_entangled,
    )
    config = SearchConfig(
        structure=structure,
        mode=args.mode,
        thresholds=thresholds,
        budget=args.budget,
        seed=SeedSpec(args.seed),
        restarts=args.restarts,
    )
    if args.mode == "zero-power":
        result = find_zero_power(config, threads=args.threads)
    else:
        result = find_saturating(config, threads=args.threads)

    Path(args.out).write_bytes(_json_bytes(result.to_dict()))
    cli_config = {
        "dims": args.dims,
        "mode": args.mode,
        "min_var_f": args.min_var_f,
        "min_abs_cov": args.min_abs_cov,
        "max_abs_power": args.max_abs_power,
        "require_entangled": args.require_entangled,
        "budget": args.budget,
        "restarts": args.restarts,
        "threads": args.threads,
    }
    _write_manifest(args.out, "search", cli_config, args.seed, {}, started)

    status = "succeeded" if result.succeeded else "exhausted budget"
    print(
        f"search[{args.mode}]: {status} after {result.evaluations} evaluations, "
        f"objective {result.objective:.6g} -> {args.out}"
    )
    return 0 if result.succeeded else 1


# ---------------------------------------------------------------- demo

_SIGMA_X = [[0.0, 1.0], [1.0, 0.0]]
_SIGMA_Z = [[1.0, 0.0], [0.0, -1.0]]


def _demo_eigenstate(seed: int):
    s = TensorStructure.from_dims([2, 2, 1, 1])
    spec = SeedSpec(seed)
    f = HermitianOperator(np.array(_SIGMA_Z, dtype=complex))
    rest = haar_pure(s.env_dim, spec.stream(0))
    rho = battery_eigenstate_product(f, 0, rest, s).state
    v = gue_hermitian(s.dim, 1.0, spec.stream(1))
    checks = [
        ("power is 0 within 1e-10", lambda rep, mom: abs(rep.power) <= 1e-10),
        ("var_f is 0 within 1e-10", lambda rep, mom: mom.var_f <= 1e-10),
        ("|cov| is 0 within 1e-10", lambda rep, mom: abs(mom.cov) <= 1e-10),
        ("saturation ratio defined as 0", lambda rep, mom: rep.saturation_ratio == 0.0),
    ]
    return s, rho, f, v, checks


def _demo_saturating(seed: int):
    s = TensorStructure.from_dims([2, 1, 1, 1])
    rho = DensityMatrix(np.array([[0.5, -0.5j], [0.5j, 0.5]]))
    f = HermitianOperator(np.array(_SIGMA_Z, dtype=complex))
    v = HermitianOperator(np.array(_SIGMA_X, dtype=complex))
    checks = [
        ("power equals 2 within 1e-9", lambda rep, mom: abs(rep.power - 2.0) <= 1e-9),
        ("corrected bound equals 4 within 1e-9", lambda rep, mom: abs(rep.corrected_bound - 4.0) <= 1e-9),
        ("saturation ratio equals 1 within 1e-9", lambda rep, mom: abs(rep.saturation_ratio - 1.0) <= 1e-9),
        ("corrected bound does not exceed the loose bound", lambda rep, mom: rep.corrected_bound <= rep.loose_bound + 1e-12),
    ]
    return s, rho, f, v, checks


def _demo_real_cov(seed: int):
    s = TensorStructure.from_dims([2, 1, 1, 1])
    rho = DensityMatrix(np.diag([0.75, 0.25]).astype(complex))
    f = HermitianOperator(np.array(_SIGMA_Z, dtype=complex))
    v = HermitianOperator(np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex))
    checks = [
        ("power equals 0 within 1e-12", lambda rep, mom: abs(rep.power) <= 1e-12),
        ("var_f equals 0.75 within 1e-12", lambda rep, mom: abs(mom.var_f - 0.75) <= 1e-12),
        ("cov equals 0.75 within 1e-12", lambda rep, mom: abs(mom.cov - 0.75) <= 1e-12),
        ("corrected bound equals 1.5 within 1e-12", lambda rep, mom: abs(rep.corrected_bound - 1.5) <= 1e-12),
        ("slack equals 1.5 within 1e-12", lambda rep, mom: abs(rep.slack - 1.5) <= 1e-12),
    ]
    return s, rho, f, v, checks


_DEMO_CASES = {
    "eigenstate": _demo_eigenstate,
    "saturating": _demo_saturating,
    "real-cov": _demo_real_cov,
}


def cmd_demo(args) -> int:
    started = time.perf_counter()
    s, rho, f, v, checks = _DEMO_CASES[args.case](args.seed)
    report = verify_instance(rho, f, v, s)
    moments = compute_moments(rho, f, v, s)
    results = [(name, bool(fn(report, moments))) for name, fn in checks]
    all_passed = all(ok for _, ok in results)

    doc = {
        "case": args.case,
        "report": report.to_dict(),
        "moments": moments.to_dict(),
        "battery_purity": partial_trace_to_battery(rho, s).purity(),
        "checks": [{"name": name, "passed": ok} for name, ok in results],
        "passed": all_passed,
    }
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(f"demo case: {args.case}")
        for key in ("power", "power_sq", "corrected_bound", "loose_bound", "slack", "saturation_ratio"):
            print(f"  {key:<18} = {_g17(report.to_dict()[key])}")
        m = moments.to_dict()
        print(f"  {'var_f':<18} = {_g17(m['var_f'])}")
        print(f"  {'var_v':<18} = {_g17(m['var_v'])}")
        print(f"  {'cov':<18} = {_g17(m['cov']['re'])} + {_g17(m['cov']['im'])}i")
        for name, ok in results:
            print(f"  {'PASS' if ok else 'FAIL'}  {name}")
        print(f"result: {'PASS' if all_passed else 'FAIL'}")
    if args.out:
        Path(args.out).write_bytes(_json_bytes(doc))
        _write_manifest(args.out, "demo", {"case": args.case, "format": args.format},
                        args.seed, {}, started)
    return 0 if all_passed else 1


# ---------------------------------------------------------------- wiring

def _add_common(sp, out_required: bool = True, formats=("json", "csv"), default_format="json"):
    sp.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    sp.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    if out_required:
        sp.add_argument("--out", required=True, help="output payload path")
    else:
        sp.add_argument("--out", default=None, help="optional output payload path")
    sp.add_argument("--format", choices=formats, default=default_format,
                    help=f"payload format (default {default_format})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qbattery",
        description="Charging-power bound verification, dynamics, and counterexample search.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="Monte Carlo sweep of the power bound and identities")
    sp.add_argument("--dims", required=True, help="tensor dims dW,dS,dB,dA, e.g. 2,2,1,1")
    sp.add_argument("--trials", type=int, default=1000, help="number of seeded trials")
    sp.add_argument("--ensemble", choices=sorted(ENSEMBLES), default="gue-ops",
                    help="state ensemble; operators are always GUE (default gue-ops)")
    sp.add_argument("--rank", type=int, default=None, help="Ginibre state rank (default full)")
    _add_common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("evolve", help="integrate a scenario and write the trajectory table")
    sp.add_argument("--config", required=True,
                    help="scenario JSON path, or 'exchange' for the built-in model")
    _add_common(sp, formats=("csv", "json"), default_format="csv")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("search", help="optimize for zero-power or bound-saturating instances")
    sp.add_argument("--mode", required=True, choices=["zero-power", "saturation"])
    sp.add_argument("--dims", required=True, help="tensor dims dW,dS,dB,dA")
    sp.add_argument("--min-var-f", type=float, default=0.0, dest="min_var_f")
    sp.add_argument("--min-abs-cov", type=float, default=0.0, dest="min_abs_cov")
    sp.add_argument("--max-abs-power", type=float, default=1e-8, dest="max_abs_power")
    sp.add_argument("--require-entangled", action="store_true", dest="require_entangled")
    sp.add_argument("--budget", type=int, default=100_000, help="max objective evaluations")
    sp.add_argument("--restarts", type=int, default=8)
    _add_common(sp, formats=("json",))
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("demo", help="run a built-in worked case with pass/fail checks")
    sp.add_argument("--case", required=True, choices=sorted(_DEMO_CASES))
    _add_common(sp, out_required=False, formats=("text", "json"), default_format="text")
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except RejectedInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"claim falsified: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
