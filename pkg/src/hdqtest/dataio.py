"""CSV ingestion, result serialization and the real-data subsample protocol."""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import (
    BadValue,
    DataError,
    EmptyAfterFiltering,
    HDQTestError,
    InconsistentConfigs,
    MissingColumn,
    SubsampleTooLarge,
)
from .qr_core import Dataset
from .stats import CombinationRule, TestResult, run_full_test

RESULT_HEADER = (
    "tau", "t_sum", "z_sum", "p_sum", "t_max", "t_max_centered", "p_max",
    "t_cc", "p_cc", "trace_estimate", "n", "p", "q", "rule",
)
STUDY_HEADER = ("tau", "test_name", "rejection_rate", "ci_low", "ci_high", "replications", "failures")
POWER_HEADER = ("s", "test_name", "power", "se")
TEST_NAMES = ("t_cc", "t_max", "t_sum")
WILSON_Z = float(ndtri(0.975))


def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used in every output file."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{float(x):.12g}"
    return str(x)


@dataclass
class ColumnMapping:
    response: str
    z_columns: list = field(default_factory=list)
    x_columns: list = field(default_factory=list)

    def __post_init__(self):
        self.z_columns = list(self.z_columns)
        self.x_columns = list(self.x_columns)
        if not self.x_columns:
            raise DataError("mapping needs at least one X column")
        names = [self.response, *self.z_columns, *self.x_columns]
        if len(set(names)) != len(names):
            raise DataError("response, Z and X columns must be disjoint and unique")

    @property
    def columns(self) -> list:
        return [self.response, *self.z_columns, *self.x_columns]


@dataclass
class IngestReport:
    rows_read: int
    rows_kept: int
    rejected_rows: list


def _parse(cell: str) -> float:
    v = float(cell.strip())
    if not math.isfinite(v):
        raise ValueError(cell)
    return v


def ingest_csv(path, mapping: ColumnMapping, tau: float = 0.5, drop_bad_rows: bool = False):
    """Read a header-row CSV into a Dataset; an intercept column is prepended to Z.

    Row numbers in errors count data rows from 1 (the header is not counted).
    By default any bad cell raises ``BadValue``; with ``drop_bad_rows`` the
    offending rows are removed and listed in the returned report instead.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyAfterFiltering(f"{path} is empty") from None
        for name in mapping.columns:
            if name not in header:
                raise MissingColumn(name)
        pos = [header.index(c) for c in mapping.columns]
        values, bad, first_bad = [], [], None
        rows_read = 0
        for rownum, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            rows_read += 1
            parsed = []
            for col, j in zip(mapping.columns, pos):
                try:
                    parsed.append(_parse(raw[j]))
                except (ValueError, IndexError):
                    bad.append(rownum)
                    first_bad = first_bad or (rownum, col)
                    break
            else:
                values.append(parsed)
    if bad and not drop_bad_rows:
        raise BadValue(first_bad[0], first_bad[1], bad)
    if not values:
        raise EmptyAfterFiltering(f"no usable rows in {path}")
    arr = np.asarray(values, dtype=float)
    nz = len(mapping.z_columns)
    Y = arr[:, 0]
    Z = np.column_stack([np.ones(len(arr)), arr[:, 1 : 1 + nz]])
    X = arr[:, 1 + nz :]
    report = IngestReport(rows_read, len(arr), bad)
    return Dataset(Y, Z, X, tau), report


def write_dataset_csv(path, data: Dataset, mapping: ColumnMapping) -> None:
    """Write (Y, Z without intercept, X) with lossless float repr."""
    if len(mapping.z_columns) != data.q - 1 or len(mapping.x_columns) != data.p:
        raise DataError("mapping does not match dataset dimensions")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(mapping.columns)
        body = np.column_stack([data.Y, data.Z[:, 1:], data.X])
        for row in body:
            w.writerow([repr(float(v)) for v in row])


def result_row(res: TestResult) -> list:
    d = res.to_dict()
    d["p"] = d["p_dim"]
    return [fmt(d[k]) for k in RESULT_HEADER]


def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for r in results:
        w.writerow(result_row(r))
    return buf.getvalue()


def run_dataset_test(data: Dataset, tau: float, rule=CombinationRule.CAUCHY, alpha: float = 0.05) -> str:
    """Run all tests at ``tau`` and return a one-row CSV document."""
    res = run_full_test(data.with_tau(tau), rule, alpha=alpha)
    return results_csv([res])


def wilson_interval(k: int, m: int, z: float = WILSON_Z) -> tuple[float, float]:
    if m <= 0:
        return 0.0, 1.0
    phat = k / m
    denom = 1.0 + z * z / m
    centre = (phat + z * z / (2 * m)) / denom
    half = z * math.sqrt(phat * (1 - phat) / m + z * z / (4 * m * m)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == m else min(1.0, centre + half)
    return lo, hi


@dataclass
class SubsampleProtocol:
    subsample_size: int = 500
    replications: int = 1000
    tau_grid: list = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 0.9])
    alpha: float = 0.05
    master_seed: int = 20240101

    def __post_init__(self):
        self.tau_grid = [float(t) for t in self.tau_grid]
        if any(not 0 < t < 1 for t in self.tau_grid):
            raise DataError("tau_grid entries must lie strictly in (0, 1)")
        if self.tau_grid != sorted(self.tau_grid):
            raise DataError("tau_grid must be sorted")
        if self.replications < 1 or self.subsample_size < 1:
            raise DataError("replications and subsample_size must be positive")


@dataclass
class StudyRow:
    tau: float
    test_name: str
    rejections: int
    replications: int
    failures: int

    @property
    def rate(self) -> float:
        m = self.replications - self.failures
        return self.rejections / m if m else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.rejections, self.replications - self.failures)


def _subsample_rows(seed: int, rep: int, n: int, size: int) -> np.ndarray:
    # same rows for replication rep at every tau
    ss = np.random.SeedSequence(seed, spawn_key=(rep,))
    rng = np.random.Generator(np.random.PCG64(ss))
    return np.sort(rng.choice(n, size=size, replace=False))


def run_subsample_study(data: Dataset, protocol: SubsampleProtocol, rule=CombinationRule.CAUCHY,
                        threads: int = 1) -> list[StudyRow]:
    if protocol.subsample_size > data.n:
        raise SubsampleTooLarge(
            f"subsample of {protocol.subsample_size} requested from {data.n} rows"
        )
    rows = []
    for tau in protocol.tau_grid:
        def one(rep, tau=tau):
            idx = _subsample_rows(protocol.master_seed, rep, data.n, protocol.subsample_size)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    return run_full_test(data.take(idx).with_tau(tau), rule, alpha=protocol.alpha)
            except (HDQTestError, np.linalg.LinAlgError):
                return None

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, range(protocol.replications)))
        else:
            results = [one(r) for r in range(protocol.replications)]
        ok = [r for r in results if r is not None]
        failures = len(results) - len(ok)
        counts = {
            "t_cc": sum(r.reject_cc for r in ok),
            "t_max": sum(r.reject_max for r in ok),
            "t_sum": sum(r.reject_sum for r in ok),
        }
        for name in TEST_NAMES:
            rows.append(StudyRow(tau, name, counts[name], protocol.replications, failures))
    return rows


def study_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_HEADER)
    for r in rows:
        lo, hi = r.interval
        w.writerow([fmt(r.tau), r.test_name, fmt(r.rate), fmt(lo), fmt(hi),
                    fmt(r.replications), fmt(r.failures)])
    return buf.getvalue()


def power_table(reports) -> str:
    """Long-format (s, test_name, power, se) CSV for power curves."""
    reports = list(reports)
    if not reports:
        raise InconsistentConfigs("no reports given")
    base = {k: v for k, v in reports[0].config.items() if k != "s"}
    for rep in reports[1:]:
        other = {k: v for k, v in rep.config.items() if k != "s"}
        if other != base:
            diff = sorted(k for k in base if base[k] != other.get(k))
            raise InconsistentConfigs(f"reports differ in more than s: {diff}")
    lines = []
    for rep in reports:
        rates, ses = rep.rates, rep.standard_errors
        for name in TEST_NAMES:
            lines.append((rep.config["s"], name, rates[name], ses[name]))
    lines.sort(key=lambda t: (t[0], t[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POWER_HEADER)
    for s, name, pw, se in lines:
        w.writerow([fmt(s), name, fmt(pw), fmt(se)])
    return buf.getvalue()


def emit_power_table(reports, path) -> None:
    text = power_table(reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv_rows(text: str) -> list[dict]:
    """Parse an output CSV into dicts keyed by header name."""
    return list(csv.DictReader(io.StringIO(text)))
