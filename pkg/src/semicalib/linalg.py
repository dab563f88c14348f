"""Gaussian algebra for low-rank-plus-diagonal covariances.

``Sigma = K S K^T + s2 I`` with ``K`` m x J and ``S`` J x J SPD.  Inverse and
determinant go through the Sherman-Morrison-Woodbury and matrix determinant
identities, so the cost is O(m J^2 + J^3).
"""

from __future__ import annotations


import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def _chol(A, what: str):
    try:
        return cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{what} is not positive definite") from exc


class LowRankGaussian:
    """Zero-mean Gaussian with covariance ``Kplus Sigma_core Kplus^T + noise_var I``."""

    def __init__(self, Kplus, Sigma_core, noise_var: float):
        self.Kplus = np.asarray(Kplus, dtype=float)
        self.Sigma_core = np.atleast_2d(np.asarray(Sigma_core, dtype=float))
        self.noise_var = float(noise_var)
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")
        J = self.Kplus.shape[1]
        if self.Sigma_core.shape != (J, J):
            raise ValueError("Sigma_core must be J x J")
        core_cf = _chol(self.Sigma_core, "Sigma_core")
        core_inv = cho_solve(core_cf, np.eye(J), check_finite=False)
        self._KtK = self.Kplus.T @ self.Kplus
        inner = core_inv + self._KtK / self.noise_var
        self._inner_cf = _chol(0.5 * (inner + inner.T), "Woodbury inner matrix")
        self._logdet_core = 2.0 * np.sum(np.log(np.diag(core_cf[0])))

    @classmethod
    def from_blocks(cls, K_u, var_xi, K_r, Sigma_r, noise_var):
        """``Sigma_core`` = diag(var_xi) (+) Sigma_r for ``Kplus = [K_u K_r]``."""
        Kplus = np.hstack([K_u, K_r])
        core = block_diag(np.diag(np.asarray(var_xi, dtype=float)), np.atleast_2d(Sigma_r))
        return cls(Kplus, core, noise_var)

    @property
    def m(self) -> int:
        return self.Kplus.shape[0]

    def dense(self) -> np.ndarray:
        return self.Kplus @ self.Sigma_core @ self.Kplus.T + self.noise_var * np.eye(self.m)


def smw_solve(model: LowRankGaussian, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    s2 = model.noise_var
    Ktr = model.Kplus.T @ rhs
    return rhs / s2 - model.Kplus @ cho_solve(model._inner_cf, Ktr, check_finite=False) / (s2 * s2)


def smw_logdet(model: LowRankGaussian) -> float:
    logdet_inner = 2.0 * np.sum(np.log(np.diag(model._inner_cf[0])))
    return float(model.m * np.log(model.noise_var) + logdet_inner + model._logdet_core)


def gaussian_loglik_lowrank(model: LowRankGaussian, residual) -> float:
    residual = np.asarray(residual, dtype=float)
    quad = float(residual @ smw_solve(model, residual))
    return -0.5 * (model.m * np.log(2 * np.pi) + smw_logdet(model) + quad)
