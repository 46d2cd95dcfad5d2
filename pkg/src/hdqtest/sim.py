"""Synthetic data and seeded Monte Carlo size / power / independence studies.

Random streams: every experiment derives its generators from
``numpy.random.SeedSequence(master_seed)`` with PCG64 bit generators.
Replication ``i`` uses spawn key ``(0, i)``, the Case-III spike vector uses
``(1,)`` and the alternative coefficient vector uses ``(2, s)``. Streams
are therefore independent of scheduling and thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import AllReplicationsFailed, DataError, HDQTestError, SparsityOutOfRange
from .numlin import DistributionKind, base_quantile, psd_sqrt, std_normal_cdf
from .qr_core import Dataset
from .stats import CombinationRule, TestResult, gumbel_cdf, run_full_test

TESTS = ("t_cc", "t_max", "t_sum")

_REPLICATION_KEY = 0
_SPIKE_KEY = 1
_BETA_KEY = 2


@dataclass(frozen=True)
class CovarianceSpec:
    case: str = "I"  # one of I, II, III, explicit
    rho: float = 0.5
    matrix: Optional[tuple] = None

    def __post_init__(self):
        case = str(self.case).upper()
        aliases = {"IDENTITY": "I", "1": "I", "AR": "II", "2": "II", "SPIKED": "III",
                   "3": "III", "EXPLICIT": "EXPLICIT"}
        object.__setattr__(self, "case", aliases.get(case, case))
        if self.case not in ("I", "II", "III", "EXPLICIT"):
            raise DataError(f"unknown covariance case {self.case!r}")
        if self.case == "EXPLICIT" and self.matrix is None:
            raise DataError("explicit covariance needs a matrix")
        if self.matrix is not None:
            object.__setattr__(self, "matrix", tuple(map(tuple, np.asarray(self.matrix, float))))


def _stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=key)))


def spike_count(dim: int) -> int:
    return int(math.floor(dim ** 0.3 + 1e-12))


def build_sigma(spec: CovarianceSpec, dim: int, seed: int = 0) -> np.ndarray:
    """Population covariance of the stacked covariate vector (Z-tilde, X)."""
    if dim < 1:
        raise DataError("covariance dimension must be at least 1")
    if spec.case == "I":
        return np.eye(dim)
    if spec.case == "II":
        idx = np.arange(dim)
        return spec.rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)
    if spec.case == "III":
        b = np.zeros(dim)
        k = spike_count(dim)
        b[:k] = _stream(seed, _SPIKE_KEY).uniform(0.7, 0.9, size=k)
        return np.eye(dim) + np.outer(b, b) - np.diag(b * b)
    S = np.asarray(spec.matrix, dtype=float)
    if S.shape != (dim, dim):
        raise DataError(f"explicit covariance has shape {S.shape}, expected {(dim, dim)}")
    psd_sqrt(S)  # raises NotPSD / NotSymmetric
    return S


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 100
    p_dim: int = 120
    q: int = 2
    tau: float = 0.5
    dist: DistributionKind = DistributionKind.NORMAL
    error_dist: DistributionKind = DistributionKind.NORMAL
    cov: CovarianceSpec = field(default_factory=CovarianceSpec)
    s: int = 0
    beta_norm_sq: float = 0.5
    replications: int = 500
    alpha: float = 0.05
    master_seed: int = 20240101
    rule: CombinationRule = CombinationRule.CAUCHY
    trace_mode: str = "estimate"

    def __post_init__(self):
        object.__setattr__(self, "dist", DistributionKind(self.dist))
        object.__setattr__(self, "error_dist", DistributionKind(self.error_dist))
        object.__setattr__(self, "rule", CombinationRule(self.rule))
        if isinstance(self.cov, dict):
            object.__setattr__(self, "cov", CovarianceSpec(**self.cov))
        elif isinstance(self.cov, str):
            object.__setattr__(self, "cov", CovarianceSpec(self.cov))
        if self.trace_mode not in ("estimate", "oracle"):
            raise DataError(f"trace_mode must be 'estimate' or 'oracle', got {self.trace_mode!r}")
        if self.trace_mode == "oracle" and not math.isfinite(self.dist.variance):
            raise DataError(f"oracle trace is undefined for {self.dist.value} covariates")
        if not 0 <= self.s <= self.p_dim:
            raise SparsityOutOfRange(f"s={self.s} outside [0, {self.p_dim}]")
        if self.replications < 1:
            raise DataError("replications must be at least 1")
        if self.q < 1 or self.n < self.q + 1:
            raise DataError(f"invalid (n, q) = ({self.n}, {self.q})")
        if self.cov.case == "EXPLICIT" and len(self.cov.matrix) != self.dim:
            raise DataError(f"explicit covariance must be {self.dim}x{self.dim}")

    @property
    def dim(self) -> int:
        return self.p_dim + self.q - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dist"] = self.dist.value
        d["error_dist"] = self.error_dist.value
        d["rule"] = self.rule.value
        d["cov"] = {"case": self.cov.case, "rho": self.cov.rho,
                    "matrix": None if self.cov.matrix is None else [list(r) for r in self.cov.matrix]}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)


def draw_beta(s: int, p_dim: int, norm_sq: float, rng: np.random.Generator) -> np.ndarray:
    """First s entries N(0, 1), rescaled so that ||beta||^2 == norm_sq."""
    if not 1 <= s <= p_dim:
        raise SparsityOutOfRange(f"s={s} outside [1, {p_dim}]")
    if not norm_sq > 0:
        raise DataError("norm_sq must be positive")
    beta = np.zeros(p_dim)
    head = rng.standard_normal(s)
    beta[:s] = head * math.sqrt(norm_sq / float(head @ head))
    return beta


class Simulator:
    """Holds the per-experiment fixed quantities (Sigma, its root, beta)."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.sigma = build_sigma(cfg.cov, cfg.dim, cfg.master_seed)
        self.root = psd_sqrt(self.sigma)
        self.sigma_x = self.sigma[cfg.q - 1 :, cfg.q - 1 :]
        if cfg.s > 0:
            self.beta = draw_beta(cfg.s, cfg.p_dim, cfg.beta_norm_sq,
                                  _stream(cfg.master_seed, _BETA_KEY, cfg.s))
        else:
            self.beta = None
        self.alpha_true = np.zeros(cfg.q)
        self.error_shift = base_quantile(cfg.error_dist, cfg.tau)

    def dataset(self, replication_index: int) -> Dataset:
        return gen_dataset(self.cfg, self.beta, replication_index, self)

    def oracle_sigma_x(self) -> np.ndarray:
        # Cov(X) = Var(u) * Sigma_x for unit-scale innovations
        return self.cfg.dist.variance * self.sigma_x


def gen_dataset(cfg: ExperimentConfig, beta, replication_index: int, sim: Simulator | None = None) -> Dataset:
    """One synthetic sample drawn from the replication's own substream."""
    sim = sim or Simulator(cfg)
    rng = _stream(cfg.master_seed, _REPLICATION_KEY, replication_index)
    u = cfg.dist.sample(rng, (cfg.n, cfg.dim))
    U = u @ sim.root
    Z = np.column_stack([np.ones(cfg.n), U[:, : cfg.q - 1]])
    X = U[:, cfg.q - 1 :]
    eps = cfg.error_dist.sample(rng, cfg.n) - sim.error_shift
    Y = Z @ sim.alpha_true + eps
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        if beta.size != cfg.p_dim:
            raise DataError(f"beta has length {beta.size}, expected {cfg.p_dim}")
        Y = Y + X @ beta
    return Dataset(Y, Z, X, cfg.tau)


@dataclass
class ExperimentReport:
    config: dict
    replications: int
    failures: int
    rejections: dict

    @property
    def rates(self) -> dict:
        m = self.replications - self.failures
        return {t: self.rejections[t] / m for t in TESTS}

    @property
    def standard_errors(self) -> dict:
        m = self.replications - self.failures
        return {t: math.sqrt(r * (1.0 - r) / m) for t, r in self.rates.items()}

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "replications": self.replications,
            "failures": self.failures,
            "rejections": dict(self.rejections),
            "rates": self.rates,
            "standard_errors": self.standard_errors,
        }


def _one_replication(sim: Simulator, i: int):
    cfg = sim.cfg
    try:
        data = sim.dataset(i)
        sigma_x = sim.oracle_sigma_x() if cfg.trace_mode == "oracle" else None
        return run_full_test(data, cfg.rule, sigma_x=sigma_x, alpha=cfg.alpha)
    except (HDQTestError, np.linalg.LinAlgError):
        return None


def run_replications(cfg: ExperimentConfig, threads: int = 1) -> list[TestResult | None]:
    """Per-replication results in index order; ``None`` marks a failure."""
    sim = Simulator(cfg)
    idx = range(cfg.replications)
    if threads <= 1:
        return [_one_replication(sim, i) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: _one_replication(sim, i), idx))


def summarize(cfg: ExperimentConfig, results) -> ExperimentReport:
    ok = [r for r in results if r is not None]
    if not ok:
        raise AllReplicationsFailed(f"all {len(results)} replications failed")
    rejections = {
        "t_cc": sum(r.reject_cc for r in ok),
        "t_max": sum(r.reject_max for r in ok),
        "t_sum": sum(r.reject_sum for r in ok),
    }
    return ExperimentReport(cfg.to_dict(), len(results), len(results) - len(ok), rejections)


def run_size_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    if cfg.s != 0:
        cfg = replace(cfg, s=0)
    return summarize(cfg, run_replications(cfg, threads))


def run_power_experiment(cfg: ExperimentConfig, s_grid, threads: int = 1) -> list[ExperimentReport]:
    reports = []
    for s in s_grid:
        c = replace(cfg, s=int(s))
        reports.append(summarize(c, run_replications(c, threads)))
    return reports


def default_probe_grid(levels=(0.1, 0.3, 0.5, 0.7, 0.9)):
    """5x5 grid at the limiting-marginal quantiles of (z_sum, centered max)."""
    from scipy.special import ndtri

    from .stats import gumbel_ppf

    xs = [float(ndtri(a)) for a in levels]
    ys = [float(gumbel_ppf(a)) for a in levels]
    return [(x, y) for x in xs for y in ys]


@dataclass
class ProbeRow:
    x: float
    y: float
    joint: float
    product: float
    gap: float
    limit: float


@dataclass
class IndependenceProbe:
    rows: list
    correlation: float
    replications: int
    failures: int

    @property
    def max_gap(self) -> float:
        return max(r.gap for r in self.rows)


def probe_pairs(z, y, grid) -> tuple[list, float]:
    """Joint empirical CDF against the product of empirical marginals."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    rows = []
    for gx, gy in grid:
        fz = z <= gx
        fy = y <= gy
        joint = float(np.mean(fz & fy))
        prod = float(np.mean(fz) * np.mean(fy))
        limit = float(std_normal_cdf(gx) * gumbel_cdf(gy))
        rows.append(ProbeRow(float(gx), float(gy), joint, prod, abs(joint - prod), limit))
    corr = float(np.corrcoef(z, y)[0, 1]) if z.size > 1 and z.std() > 0 and y.std() > 0 else float("nan")
    return rows, corr


def run_independence_probe(cfg: ExperimentConfig, grid=None, threads: int = 1) -> IndependenceProbe:
    if cfg.s != 0:
        cfg = replace(cfg, s=0)
    grid = grid if grid is not None else default_probe_grid()
    results = run_replications(cfg, threads)
    ok = [r for r in results if r is not None]
    if not ok:
        raise AllReplicationsFailed(f"all {len(results)} replications failed")
    z = np.array([r.z_sum for r in ok])
    y = np.array([r.t_max_centered for r in ok])
    rows, corr = probe_pairs(z, y, grid)
    return IndependenceProbe(rows, corr, len(results), len(results) - len(ok))
