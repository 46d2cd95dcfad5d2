"""Dense numerical primitives: PSD square roots, projections, distribution helpers."""

from __future__ import annotations

import enum

import numpy as np
from scipy import special, stats

from .errors import NotPSD, NotSymmetric, RankDeficientZ, TauOutOfRange

_SYM_TOL = 1e-10


class DistributionKind(str, enum.Enum):
    """Centered, unit-scale innovation distributions used in the simulations."""

    NORMAL = "normal"
    LAPLACE = "laplace"
    LOGISTIC = "logistic"
    STUDENT_T2 = "t2"

    @property
    def frozen(self):
        return _FROZEN[self]

    @property
    def variance(self) -> float:
        return float(self.frozen.var())

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self is DistributionKind.NORMAL:
            return rng.standard_normal(size)
        if self is DistributionKind.LAPLACE:
            return rng.laplace(0.0, 1.0, size)
        if self is DistributionKind.LOGISTIC:
            return rng.logistic(0.0, 1.0, size)
        return rng.standard_t(2, size)


_FROZEN = {
    DistributionKind.NORMAL: stats.norm(),
    DistributionKind.LAPLACE: stats.laplace(),
    DistributionKind.LOGISTIC: stats.logistic(),
    DistributionKind.STUDENT_T2: stats.t(2),
}


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise TauOutOfRange(f"tau must lie strictly in (0, 1), got {tau}")
    return tau


def _require_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def psd_sqrt(S) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition.

    Eigenvalues in ``[-1e-10 * max|S|, 0)`` are clamped to zero; anything more
    negative raises ``NotPSD``.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    _require_finite(S, "S")
    if S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"matrix is not square: {S.shape}")
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    tol = _SYM_TOL * max(scale, np.finfo(float).tiny)
    if np.max(np.abs(S - S.T), initial=0.0) > tol:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    if evals.size and evals.min() < -tol:
        raise NotPSD(f"smallest eigenvalue {evals.min():.3e} below -{tol:.1e}")
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    return 0.5 * (root + root.T)


def orthonormal_basis(Z) -> np.ndarray:
    """Thin-QR orthonormal basis of col(Z); raises if Z is rank deficient."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, q = Z.shape
    if n <= q:
        raise RankDeficientZ(f"need more rows than columns in Z, got {Z.shape}")
    sv = np.linalg.svd(Z, compute_uv=False)
    if not sv.max() > 0 or sv.min() <= 1e-10 * sv.max():
        raise RankDeficientZ("Z does not have full column rank")
    return np.linalg.qr(Z)[0]


def project_out(Z, X) -> np.ndarray:
    """Residual of X after regressing on the columns of Z: ``X - Q (Q' X)``."""
    X = np.asarray(X, dtype=float)
    vec = X.ndim == 1
    X2 = X[:, None] if vec else X
    Q = orthonormal_basis(Z)
    if X2.shape[0] != Q.shape[0]:
        raise ValueError("Z and X must have the same number of rows")
    W = X2 - Q @ (Q.T @ X2)
    return W[:, 0] if vec else W


def std_normal_cdf(x):
    return special.ndtr(x)


def base_quantile(dist: DistributionKind | str, tau: float) -> float:
    """tau-quantile of the unit-scale form of ``dist``."""
    tau = check_tau(tau)
    return float(DistributionKind(dist).frozen.ppf(tau))
