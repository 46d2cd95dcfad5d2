"""Nuisance quantile regression of Y on Z and the quantile score vector.

The check-loss problem is solved through its bounded dual

    max_a  Y'a   s.t.  Z'a = (1 - tau) Z'1,  0 <= a <= 1

with a Frisch-Newton (primal-dual, Mehrotra predictor-corrector) interior
point method. The coefficient vector is the negated dual multiplier of the
equality constraint. The interior solution is then rounded to an optimal
vertex (q observations interpolated exactly) when that does not increase
the objective, so residual signs at the optimum are well defined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, RankDeficientZ, TooFewRows
from .numlin import check_tau, orthonormal_basis

GAP_TOL = 1e-9
MAX_ITER = 200
STEP_DAMPING = 0.99995


@dataclass
class Dataset:
    """Response ``Y`` (n,), nuisance design ``Z`` (n, q) with an intercept
    column first, and high-dimensional covariates ``X`` (n, p)."""

    Y: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    tau: float = 0.5

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.Z = as_columns(self.Z)
        self.X = as_columns(self.X)
        self.tau = check_tau(self.tau)
        n = self.Y.size
        if self.Z.shape[0] != n or self.X.shape[0] != n:
            raise DimensionMismatch(
                f"row counts differ: Y {n}, Z {self.Z.shape[0]}, X {self.X.shape[0]}"
            )
        if n < self.q + 1:
            raise TooFewRows(f"need n >= q + 1, got n={n}, q={self.q}")
        if not np.all(self.Z[:, 0] == 1.0):
            raise DimensionMismatch("first column of Z must be identically one")
        for name in ("Y", "Z", "X"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionMismatch(f"{name} contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.Y.size

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_tau(self, tau: float) -> "Dataset":
        return Dataset(self.Y, self.Z, self.X, tau)

    def take(self, rows) -> "Dataset":
        return Dataset(self.Y[rows], self.Z[rows], self.X[rows], self.tau)


@dataclass
class QuantileFit:
    alpha_hat: np.ndarray
    psi_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    duality_gap: float
    vertex: bool


def as_columns(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def check_loss(t, tau: float):
    """rho_tau(t) = t * (tau - I(t < 0)), elementwise."""
    tau = check_tau(tau)
    t = np.asarray(t, dtype=float)
    out = t * (tau - (t < 0))
    return float(out) if out.ndim == 0 else out


def total_check_loss(Y, Z, alpha, tau) -> float:
    return float(np.sum(check_loss(Y - Z @ alpha, tau)))


def quantile_score(Y, Z, alpha_hat, tau) -> np.ndarray:
    """psi_i = I(Y_i - Z_i' alpha_hat <= 0) - tau."""
    tau = check_tau(tau)
    Y = np.asarray(Y, dtype=float).ravel()
    Z = as_columns(Z)
    alpha_hat = np.atleast_1d(np.asarray(alpha_hat, dtype=float))
    if Z.shape[0] != Y.size or Z.shape[1] != alpha_hat.size:
        raise DimensionMismatch(
            f"incompatible shapes: Y {Y.shape}, Z {Z.shape}, alpha {alpha_hat.shape}"
        )
    resid = Y - Z @ alpha_hat
    return (resid <= 0).astype(float) - tau


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _solve_normal(A, q, rhs):
    M = (A * q) @ A.T
    try:
        c = scipy.linalg.cho_factor(M, check_finite=False)
        return scipy.linalg.cho_solve(c, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, rhs, rcond=None)[0]


def _frisch_newton(Z, Y, tau, tol=GAP_TOL, max_iter=MAX_ITER):
    n, q = Z.shape
    A = Z.T
    c = -Y
    b = (1.0 - tau) * Z.sum(axis=0)
    u = np.ones(n)
    x = np.full(n, 1.0 - tau)
    s = u - x
    y = np.linalg.lstsq(Z, c, rcond=None)[0]
    r = c - Z @ y
    # keep z - w = r exactly while bounding both away from zero
    floor = 1e-8 * max(1.0, float(np.max(np.abs(r))))
    z = np.maximum(r, 0.0) + floor
    w = z - r

    def gap_of(x, y, w):
        return float(c @ x - y @ b + w @ u)

    gap = gap_of(x, y, w)
    it = 0
    while it < max_iter:
        scale = 1.0 + abs(float(c @ x))
        if gap <= tol * scale:
            break
        it += 1
        qv = 1.0 / (z / x + w / s)
        r = z - w
        dy = _solve_normal(A, qv, A @ (qv * r))
        dx = qv * (Z @ dy - r)
        ds = -dx
        dz = -z * (dx / x + 1.0)
        dw = -w * (ds / s + 1.0)
        fp = min(STEP_DAMPING * min(_max_step(x, dx), _max_step(s, ds)), 1.0)
        fd = min(STEP_DAMPING * min(_max_step(z, dz), _max_step(w, dw)), 1.0)
        if min(fp, fd) < 1.0:
            mu = z @ x + w @ s
            g = (z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2 * n)
            dxdz = dx * dz
            dsdw = ds * dw
            xinv = 1.0 / x
            sinv = 1.0 / s
            xi = mu * (xinv - sinv)
            corr = xi - r - dxdz * xinv + dsdw * sinv
            dy = _solve_normal(A, qv, -(A @ (qv * corr)))
            dx = qv * (Z @ dy + corr)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz * xinv
            dw = mu * sinv - w - sinv * w * ds - dsdw * sinv
            fp = min(STEP_DAMPING * min(_max_step(x, dx), _max_step(s, ds)), 1.0)
            fd = min(STEP_DAMPING * min(_max_step(z, dz), _max_step(w, dw)), 1.0)
        x = x + fp * dx
        s = s + fp * ds
        y = y + fd * dy
        w = w + fd * dw
        z = z + fd * dz
        gap = gap_of(x, y, w)
    scale = 1.0 + abs(float(c @ x))
    return -y, it, gap <= tol * scale, gap / scale


def _round_to_vertex(Z, Y, alpha, tau, objective, extra=3):
    """Try bases built from the observations with the smallest |residual|."""
    n, q = Z.shape
    order = np.argsort(np.abs(Y - Z @ alpha), kind="stable")
    pool = order[: min(n, q + extra)]
    slack = 1e-9 * max(1.0, abs(objective))
    for rows in itertools.combinations(pool, q):
        Zh = Z[list(rows)]
        if np.linalg.matrix_rank(Zh) < q:
            continue
        cand = np.linalg.solve(Zh, Y[list(rows)])
        obj = total_check_loss(Y, Z, cand, tau)
        if obj <= objective + slack:
            return cand, obj
    return None


def fit_nuisance(Y, Z, tau: float, tol: float = GAP_TOL, max_iter: int = MAX_ITER) -> QuantileFit:
    """Minimize sum_i rho_tau(Y_i - Z_i' alpha) over alpha."""
    tau = check_tau(tau)
    Y = np.asarray(Y, dtype=float).ravel()
    Z = as_columns(Z)
    if Z.shape[0] != Y.size:
        raise DimensionMismatch(f"Z has {Z.shape[0]} rows, Y has {Y.size}")
    n, q = Z.shape
    if n < q + 1:
        raise TooFewRows(f"need n >= q + 1, got n={n}, q={q}")
    orthonormal_basis(Z)  # rank check only

    # work on a scaled copy so tolerances are unit-free
    ysc = float(np.max(np.abs(Y))) or 1.0
    alpha, iters, converged, gap = _frisch_newton(Z, Y / ysc, tau, tol, max_iter)
    alpha = alpha * ysc
    if not converged:
        raise NoConvergence(
            f"interior point stopped after {iters} iterations with relative gap {gap:.2e}"
        )
    objective = total_check_loss(Y, Z, alpha, tau)
    vertex = _round_to_vertex(Z, Y, alpha, tau, objective)
    is_vertex = vertex is not None
    if is_vertex:
        alpha, objective = vertex
    if not np.all(np.isfinite(alpha)):
        raise RankDeficientZ("non-finite coefficients; Z is numerically rank deficient")
    psi = quantile_score(Y, Z, alpha, tau)
    return QuantileFit(alpha, psi, objective, iters, converged, gap, is_vertex)
