"""Sum-type, max-type and combined tests for H0: beta_tau = 0."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import (
    AllColumnsDegenerate,
    DegeneratePValue,
    DimensionMismatch,
    DimensionTooSmall,
    NonpositiveTrace,
    TooFewRows,
)
from .numlin import check_tau, project_out
from .qr_core import Dataset, fit_nuisance

TRACE_FLOOR = 1e-12
P_CLAMP = 1e-15
DEGENERATE_COLUMN = 1e-12


class CombinationRule(str, enum.Enum):
    CAUCHY = "cauchy"
    CAUCHY_SUM = "cauchy-sum"
    MINP = "minp"


class MaxStatistic(NamedTuple):
    t_max: float
    argmax: int
    n_retained: int


@dataclass
class TestResult:
    t_sum: float
    z_sum: float
    p_sum: float
    t_max: float
    t_max_centered: float
    p_max: float
    t_cc: float
    p_cc: float
    trace_estimate: float
    tau: float
    n: int
    p_dim: int
    q: int
    rule: str
    alpha: float
    argmax: int
    trace_mode: str

    __test__ = False  # not a pytest class

    @property
    def reject_sum(self) -> bool:
        return self.p_sum <= self.alpha

    @property
    def reject_max(self) -> bool:
        return self.p_max <= self.alpha

    @property
    def reject_cc(self) -> bool:
        if self.rule == CombinationRule.MINP.value:
            return self.t_cc <= 1.0 - math.sqrt(1.0 - self.alpha)
        return self.p_cc <= self.alpha

    def to_dict(self) -> dict:
        return asdict(self)


def sum_statistic(X, psi_hat) -> float:
    """2/(n(n-1)) * sum_{i != j} X_i'X_j psi_i psi_j, evaluated in O(np)."""
    X = np.asarray(X, dtype=float)
    psi = np.asarray(psi_hat, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if psi.size != n:
        raise DimensionMismatch(f"psi has length {psi.size}, X has {n} rows")
    if n < 2:
        raise TooFewRows("sum statistic needs at least two rows")
    v = X.T @ psi
    diag = np.einsum("ij,ij->i", X, X) @ (psi * psi)
    return float(2.0 * (v @ v - diag) / (n * (n - 1)))


def trace_sigma2_estimate(X, block: int = 1024) -> float:
    """Unbiased estimate of tr(Sigma^2) from rows of X with unknown mean.

    Averages (X_j'(X_i - m_ij)) (X_i'(X_j - m_ij)) over ordered pairs i != j,
    where m_ij is the sample mean with rows i and j removed. Computed from
    blocks of the Gram matrix, O(n^2 p) time and O(block * n) memory.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 4:
        raise TooFewRows("trace estimate needs at least four rows")
    colsum = X.sum(axis=0)
    rowsum = X @ colsum  # S_k = sum_l X_k'X_l
    sq = np.einsum("ij,ij->i", X, X)
    total = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        G = X[start:stop] @ X.T  # G[i, j] = X_i'X_j for i in block
        Si = rowsum[start:stop, None]
        Gii = sq[start:stop, None]
        a = G - (rowsum[None, :] - G - sq[None, :]) / (n - 2)
        b = G - (Si - G - Gii) / (n - 2)
        prod = a * b
        idx = np.arange(start, stop)
        prod[idx - start, idx] = 0.0
        total += float(prod.sum())
    return max(total / (n * (n - 1)), TRACE_FLOOR)


def sum_pvalue(t_sum: float, n: int, tau: float, trace_est: float) -> tuple[float, float]:
    """Standardize T_SUM and return (z_sum, upper-tail p-value).

    The null variance of n * T_SUM is 8 tau^2 (1 - tau)^2 tr(Sigma^2), hence the
    factor 2 in front of tau (1 - tau) sqrt(2 tr(Sigma^2)).
    """
    tau = check_tau(tau)
    if not trace_est > 0:
        raise NonpositiveTrace(f"trace estimate must be positive, got {trace_est}")
    z = n * t_sum / (2.0 * tau * (1.0 - tau) * math.sqrt(2.0 * trace_est))
    return float(z), float(special.ndtr(-z))


def max_statistic(W, psi_hat, tau: float) -> MaxStatistic:
    """max_j S_j^2 with S_j = W_j'psi / sqrt(tau (1 - tau) ||W_j||^2).

    Columns with ||W_j||^2 <= 1e-12 n are dropped with a warning.
    """
    tau = check_tau(tau)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    psi = np.asarray(psi_hat, dtype=float).ravel()
    n = W.shape[0]
    if psi.size != n:
        raise DimensionMismatch(f"psi has length {psi.size}, W has {n} rows")
    norms = np.einsum("ij,ij->j", W, W)
    keep = norms > DEGENERATE_COLUMN * n
    if not np.any(keep):
        raise AllColumnsDegenerate("every column of the projected design has zero norm")
    if not np.all(keep):
        dropped = np.flatnonzero(~keep)
        warnings.warn(
            f"dropping {dropped.size} degenerate column(s) from the max statistic: "
            f"{dropped[:10].tolist()}",
            RuntimeWarning,
            stacklevel=2,
        )
    s2 = np.full(W.shape[1], -np.inf)
    s2[keep] = (W[:, keep].T @ psi) ** 2 / (tau * (1.0 - tau) * norms[keep])
    j = int(np.argmax(s2))  # first index on ties
    return MaxStatistic(float(s2[j]), j, int(keep.sum()))


def gumbel_cdf(y):
    """G(y) = exp(-pi^{-1/2} exp(-y / 2))."""
    return np.exp(-np.exp(-np.asarray(y, dtype=float) / 2.0) / math.sqrt(math.pi))


def gumbel_ppf(u):
    u = np.asarray(u, dtype=float)
    return -2.0 * np.log(-math.sqrt(math.pi) * np.log(u))


def centered_max(t_max: float, p_dim: int) -> float:
    if p_dim < 3:
        raise DimensionTooSmall(f"Gumbel centering needs p >= 3, got {p_dim}")
    return t_max - 2.0 * math.log(p_dim) + math.log(math.log(p_dim))


def max_pvalue(t_max: float, p_dim: int) -> float:
    y = centered_max(t_max, p_dim)
    # 1 - G(y) without cancellation for large y
    return float(-math.expm1(-math.exp(-y / 2.0) / math.sqrt(math.pi)))


def clamp_pvalue(p: float) -> float:
    return min(max(float(p), P_CLAMP), 1.0 - P_CLAMP)


def _cauchy_score(p: float) -> float:
    # tan((0.5 - p) pi) == cot(p pi), better conditioned for small p
    return 1.0 / math.tan(p * math.pi)


def _cauchy_sf(t: float) -> float:
    # 0.5 - arctan(t) / pi, accurate in both tails
    if t > 0:
        return math.atan(1.0 / t) / math.pi
    return 0.5 - math.atan(t) / math.pi


def combine(p_sum: float, p_max: float, rule=CombinationRule.CAUCHY, alpha: float = 0.05):
    """Combine the two p-values; returns (statistic, combined p-value, reject)."""
    rule = CombinationRule(rule)
    for name, p in (("p_sum", p_sum), ("p_max", p_max)):
        if not 0.0 < p < 1.0:
            raise DegeneratePValue(f"{name}={p} must lie strictly inside (0, 1); clamp first")
    if not 0.0 < alpha < 1.0:
        raise DegeneratePValue(f"alpha={alpha} must lie strictly inside (0, 1)")
    if rule is CombinationRule.MINP:
        stat = min(p_sum, p_max)
        return stat, 1.0 - (1.0 - stat) ** 2, stat <= 1.0 - math.sqrt(1.0 - alpha)
    stat = _cauchy_score(p_sum) + _cauchy_score(p_max)
    if rule is CombinationRule.CAUCHY:
        stat *= 0.5
    p_comb = _cauchy_sf(stat)
    return stat, p_comb, p_comb <= alpha


def run_full_test(
    data: Dataset,
    rule=CombinationRule.CAUCHY,
    sigma_x=None,
    alpha: float = 0.05,
) -> TestResult:
    """Fit the nuisance model and compute all three tests.

    With ``sigma_x`` given, tr(Sigma_x^2) is taken from it (oracle mode, for
    simulations); otherwise it is estimated from X.
    """
    rule = CombinationRule(rule)
    n, tau = data.n, data.tau
    if n * tau * (1.0 - tau) < 5:
        warnings.warn(
            f"extreme quantile: n*tau*(1-tau) = {n * tau * (1 - tau):.2f} < 5; "
            "asymptotic calibration may be poor",
            RuntimeWarning,
            stacklevel=2,
        )
    fit = fit_nuisance(data.Y, data.Z, tau)
    psi = fit.psi_hat

    t_sum = sum_statistic(data.X, psi)
    if sigma_x is not None:
        sigma_x = np.asarray(sigma_x, dtype=float)
        trace = float(np.sum(sigma_x * sigma_x))
        trace_mode = "oracle"
    else:
        trace = trace_sigma2_estimate(data.X)
        trace_mode = "estimate"
    z_sum, p_sum = sum_pvalue(t_sum, n, tau, trace)

    W = project_out(data.Z, data.X)
    mx = max_statistic(W, psi, tau)
    p_max = max_pvalue(mx.t_max, mx.n_retained)

    stat, p_cc, _ = combine(clamp_pvalue(p_sum), clamp_pvalue(p_max), rule, alpha)
    return TestResult(
        t_sum=t_sum,
        z_sum=z_sum,
        p_sum=p_sum,
        t_max=mx.t_max,
        t_max_centered=centered_max(mx.t_max, mx.n_retained),
        p_max=p_max,
        t_cc=stat,
        p_cc=p_cc,
        trace_estimate=trace,
        tau=tau,
        n=n,
        p_dim=mx.n_retained,
        q=data.q,
        rule=rule.value,
        alpha=alpha,
        argmax=mx.argmax,
        trace_mode=trace_mode,
    )
