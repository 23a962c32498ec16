"""Command-line interface: compute, verify, mc, oracle and sweep.

Exit codes: 0 success, 1 verification failure, 2 non-convergence, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from pydantic import ValidationError

from .config import RunConfig, load_config
from .fredholm import F_t
from .oracles import MCConfig, master_equation_oracle, mc_estimate, schutz_F
from .verification import SUITES, kolmogorov_residual, run_suite

EXIT_OK, EXIT_FAIL, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _emit(args, payload: dict, rows: list[dict], columns: list[str]) -> None:
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        text = json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
    except (OSError, ValidationError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        updates["samples"] = args.samples
    if updates:
        cfg = cfg.model_copy(update={"mc": cfg.mc.model_copy(update=updates)})
    return cfg


def _det_block(cfg: RunConfig, t: float) -> dict:
    res = F_t(t, cfg.X0, cfg.spec, cfg.rates, cfg.window.plan())
    return {
        "t": t,
        "F_det": res.value,
        "F_det_raw": res.raw,
        "F_det_err": res.error_estimate,
        "converged": res.converged,
        "in_bounds": res.in_bounds,
        "depth": res.depth,
        "history": [list(h) for h in res.history],
    }


def _mc_block(cfg: RunConfig, t: float) -> dict:
    p, se = mc_estimate(cfg.X0, cfg.spec, cfg.rates, MCConfig(cfg.mc.samples, cfg.mc.seed, t))
    return {"F_mc": p, "F_mc_stderr": se, "mc_samples": cfg.mc.samples, "mc_seed": cfg.mc.seed}


def _oracle_block(cfg: RunConfig, t: float) -> dict:
    p, bound = master_equation_oracle(cfg.X0, cfg.spec, cfg.rates, t, cfg.oracle.cap, cfg.oracle.epsilon)
    out = {"F_oracle": p, "oracle_bound": bound}
    if cfg.rates.l == 0 and cfg.spec.indices[-1] <= 4:
        s, tail = schutz_F(cfg.X0, cfg.spec, cfg.rates.r * t, cfg.oracle.schutz_cap)
        out.update({"F_schutz": s, "schutz_tail": tail})
    return out


DET_COLUMNS = ["t", "F_det", "F_det_err", "converged", "depth"]
CROSS_COLUMNS = ["F_mc", "F_mc_stderr", "F_oracle", "oracle_bound", "F_schutz", "schutz_tail"]


def cmd_compute(args) -> int:
    cfg = _config(args)
    rows = []
    for t in cfg.times:
        row = _det_block(cfg, t)
        if args.cross_check:
            row.update(_mc_block(cfg, t))
            row.update(_oracle_block(cfg, t))
        rows.append(row)
    _emit(args, {"inputs": cfg.model_dump(), "rows": rows}, rows, DET_COLUMNS + (CROSS_COLUMNS if args.cross_check else []))
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def cmd_mc(args) -> int:
    cfg = _config(args)
    rows = [{"t": t, **_mc_block(cfg, t)} for t in cfg.times]
    _emit(args, {"inputs": cfg.model_dump(), "rows": rows}, rows, ["t", "F_mc", "F_mc_stderr", "mc_samples", "mc_seed"])
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    rows = [{"t": t, **_oracle_block(cfg, t)} for t in cfg.times]
    _emit(args, {"inputs": cfg.model_dump(), "rows": rows}, rows, ["t", "F_oracle", "oracle_bound", "F_schutz", "schutz_tail"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if len(cfg.times) < 2:
        raise UsageError("sweep needs a grid of at least 2 times in the config's 't'")
    rows = []
    for t in cfg.times:
        row = _det_block(cfg, t)
        row.update(_mc_block(cfg, t))
        row.update(_oracle_block(cfg, t))
        if t > 1e-3:
            trace = kolmogorov_residual(t, cfg.X0, cfg.spec, cfg.rates, cfg.window.plan())[1]
            row["kolmogorov_residual"] = trace.residual
        else:
            row["kolmogorov_residual"] = None
        rows.append(row)
    columns = ["t", "F_det", "F_det_err", "F_mc", "F_mc_stderr", "F_oracle", "oracle_bound", "kolmogorov_residual"]
    _emit(args, {"inputs": cfg.model_dump(), "rows": rows}, rows, columns)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def cmd_verify(args) -> int:
    cfg = _config(args)
    reports = run_suite(
        args.suite,
        cfg.window.plan(),
        seed=cfg.mc.seed,
        mc_samples=args.samples or 0,
        tolerance_scale=args.tolerance_scale,
    )
    rows = [r.as_dict() for r in reports]
    ok = all(r.passed for r in reports)
    payload = {
        "suite": args.suite,
        "passed": ok,
        "n_checks": len(rows),
        "n_failed": sum(not r.passed for r in reports),
        "window": cfg.window.model_dump(),
        "checks": rows,
    }
    _emit(args, payload, rows, ["name", "instance", "residual", "tolerance", "passed"])
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration (defaults if omitted)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, help="Monte Carlo master seed")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")

    p = _Parser(prog="tasep-fredholm", description="Fredholm-determinant transition probabilities for TASEP and PushASEP.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compute", parents=[common], help="F_t as a Fredholm determinant")
    c.add_argument("--cross-check", action="store_true", help="add Monte Carlo and master-equation values")
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    v.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every float tolerance (0 forces failures)")
    v.set_defaults(func=cmd_verify)

    sub.add_parser("mc", parents=[common], help="Monte Carlo estimate").set_defaults(func=cmd_mc)
    sub.add_parser("oracle", parents=[common], help="master-equation (and Schutz) values").set_defaults(func=cmd_oracle)
    sub.add_parser("sweep", parents=[common], help="CSV-ready table over a time grid").set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.samples is not None and args.samples < 1:
        parser.error("--samples must be >= 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tasep-fredholm: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
