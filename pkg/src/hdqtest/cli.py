"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields

from . import dataio, sim
from .errors import DataError, NumericalError
from .stats import CombinationRule

log = logging.getLogger("hdqtest")

FULL_SCALE_REPLICATIONS = 2000

# flag dest -> config key
_FLAG_KEYS = {
    "tau": "tau", "alpha": "alpha", "seed": "master_seed", "replications": "replications",
    "rule": "rule", "trace": "trace_mode", "out": "out", "threads": "threads",
    "n": "n", "p": "p_dim", "q": "q", "dist": "dist", "error_dist": "error_dist",
    "cov": "cov", "s_grid": "s_grid", "beta_norm_sq": "beta_norm_sq",
    "data": "data", "response": "response", "z_cols": "z_columns", "x_cols": "x_columns",
    "subsample_size": "subsample_size", "tau_grid": "tau_grid", "drop_bad_rows": "drop_bad_rows",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv_list(kind):
    def parse(text):
        return [kind(t) for t in text.split(",") if t.strip()]
    return parse


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values; flags win")
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--rule", choices=[r.value for r in CombinationRule])
    p.add_argument("--trace", choices=["estimate", "oracle"])
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _data_flags(p):
    p.add_argument("--data", help="input CSV with a header row")
    p.add_argument("--response")
    p.add_argument("--z-cols", type=_csv_list(str), help="comma-separated nuisance columns")
    p.add_argument("--x-cols", type=_csv_list(str),
                   help="comma-separated test columns (default: all remaining)")
    p.add_argument("--drop-bad-rows", action="store_true", default=None)


def _sim_flags(p):
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--dist", choices=["normal", "laplace", "logistic", "t2"])
    p.add_argument("--error-dist", choices=["normal", "laplace", "logistic", "t2"])
    p.add_argument("--cov", choices=["I", "II", "III"])
    p.add_argument("--beta-norm-sq", type=float)
    p.add_argument("--full-scale", action="store_true",
                   help=f"use {FULL_SCALE_REPLICATIONS} replications unless given explicitly")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdqtest", description="Adaptive tests for high-dimensional quantile regression")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run all three tests on one CSV dataset")
    _common(p)
    _data_flags(p)

    p = sub.add_parser("simulate-size", help="Monte Carlo empirical size")
    _common(p)
    _sim_flags(p)

    p = sub.add_parser("simulate-power", help="Monte Carlo power over a sparsity grid")
    _common(p)
    _sim_flags(p)
    p.add_argument("--s-grid", type=_csv_list(int))
    p.add_argument("--report-json", help="also write the full reports as JSON")

    p = sub.add_parser("independence-probe", help="joint vs product CDF of the two statistics")
    _common(p)
    _sim_flags(p)

    p = sub.add_parser("subsample-study", help="rejection rates over repeated subsamples")
    _common(p)
    _data_flags(p)
    p.add_argument("--subsample-size", type=int)
    p.add_argument("--tau-grid", type=_csv_list(float))
    return parser


def _config_keys() -> set:
    return (set(_FLAG_KEYS.values()) | {f.name for f in fields(sim.ExperimentConfig)}
            | {f.name for f in fields(dataio.SubsampleProtocol)} | {"report_json"})


def resolve(args: argparse.Namespace) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"cannot parse config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise DataError("config must be a JSON object")
        unknown = sorted(set(cfg) - _config_keys())
        if unknown:
            raise DataError(f"unknown config key(s): {unknown}")
    for dest, key in _FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "full_scale", False) and args.replications is None:
        cfg["replications"] = FULL_SCALE_REPLICATIONS
    return cfg


def _experiment_config(cfg: dict, **override) -> sim.ExperimentConfig:
    names = {f.name for f in fields(sim.ExperimentConfig)}
    kwargs = {k: v for k, v in cfg.items() if k in names}
    kwargs.update(override)
    return sim.ExperimentConfig.from_dict(kwargs)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_dataset(cfg: dict, tau: float):
    if not cfg.get("data") or not cfg.get("response"):
        raise UsageError("--data and --response are required")
    z_cols = list(cfg.get("z_columns") or [])
    x_cols = cfg.get("x_columns")
    if not x_cols:
        if not os.path.exists(cfg["data"]):
            raise FileNotFoundError(f"no such file: {cfg['data']}")
        with open(cfg["data"], encoding="utf-8", newline="") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        taken = {cfg["response"], *z_cols}
        x_cols = [h for h in header if h and h not in taken]
    mapping = dataio.ColumnMapping(cfg["response"], z_cols, x_cols)
    data, report = dataio.ingest_csv(cfg["data"], mapping, tau, bool(cfg.get("drop_bad_rows")))
    log.info("read %d rows (kept %d); n=%d q=%d p=%d", report.rows_read, report.rows_kept,
             data.n, data.q, data.p)
    if report.rejected_rows:
        log.warning("dropped rows with bad values: %s", report.rejected_rows)
    return data


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_test(cfg):
    tau = cfg.get("tau", 0.5)
    data = _load_dataset(cfg, tau)
    return dataio.run_dataset_test(data, tau, cfg.get("rule", "cauchy"), cfg.get("alpha", 0.05))


def cmd_simulate_size(cfg):
    c = _experiment_config(cfg, s=0)
    return _json(sim.run_size_experiment(c, cfg.get("threads", 1)).to_dict())


def cmd_simulate_power(cfg):
    grid = cfg.get("s_grid")
    if not grid:
        raise UsageError("--s-grid is required")
    c = _experiment_config(cfg, s=int(grid[0]))
    reports = sim.run_power_experiment(c, grid, cfg.get("threads", 1))
    if cfg.get("report_json"):
        with open(cfg["report_json"], "w", encoding="utf-8") as fh:
            fh.write(_json([r.to_dict() for r in reports]))
    return dataio.power_table(reports)


def cmd_independence_probe(cfg):
    c = _experiment_config(cfg, s=0)
    probe = sim.run_independence_probe(c, threads=cfg.get("threads", 1))
    lines = ["x,y,joint_cdf,product_cdf,gap,limit_cdf,correlation,replications,failures"]
    for r in probe.rows:
        lines.append(",".join(dataio.fmt(v) for v in (
            r.x, r.y, r.joint, r.product, r.gap, r.limit,
            probe.correlation, probe.replications, probe.failures)))
    return "\n".join(lines) + "\n"


def cmd_subsample_study(cfg):
    proto_keys = {f.name for f in fields(dataio.SubsampleProtocol)}
    proto = dataio.SubsampleProtocol(**{k: v for k, v in cfg.items() if k in proto_keys})
    data = _load_dataset(cfg, proto.tau_grid[0])
    rows = dataio.run_subsample_study(data, proto, cfg.get("rule", "cauchy"), cfg.get("threads", 1))
    return dataio.study_csv(rows)


COMMANDS = {
    "test": cmd_test,
    "simulate-size": cmd_simulate_size,
    "simulate-power": cmd_simulate_power,
    "independence-probe": cmd_independence_probe,
    "subsample-study": cmd_subsample_study,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve(args)
        if getattr(args, "report_json", None):
            cfg["report_json"] = args.report_json
        text = COMMANDS[args.command](cfg)
        _emit(text, cfg.get("out"))
    except UsageError as exc:
        print(f"hdqtest: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"hdqtest: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"hdqtest: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
