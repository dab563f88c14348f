"""Probabilistic PCA with missing entries, fitted by EM.

Observed entries follow ``h_ij = k_j . u_i + e_ij`` with ``u_i ~ N(0, I)``
and ``e_ij ~ N(0, sigma_e2)``; there is no separate column mean.  The E-step
uses only each row's observed cells, the M-step updates each loading row and
the noise variance in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InputError, write_matrix
from .lpca import canonical_factors

# sigma_e2 floor relative to the mean square of the observed data.
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class PpcaModel:
    Ku: np.ndarray
    U: np.ndarray
    sigma_e2: float
    mask: np.ndarray
    loglik_trace: np.ndarray

    @property
    def J_u(self) -> int:
        return self.Ku.shape[1]

    def reconstruction(self) -> np.ndarray:
        return self.U @ self.Ku.T


def _estep(H, M, K, s2):
    n = H.shape[0]
    J = K.shape[1]
    counts = M.sum(axis=1)
    KK = np.einsum("pj,pk->pjk", K, K).reshape(K.shape[0], J * J)
    Mi = (M @ KK).reshape(n, J, J) + s2 * np.eye(J)
    b = H @ K
    L = np.linalg.cholesky(Mi)
    Ez = np.linalg.solve(Mi, b[:, :, None])[:, :, 0]
    Minv = np.linalg.inv(Mi)
    Ezz = s2 * Minv + np.einsum("ij,ik->ijk", Ez, Ez)
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    quad = (np.sum(H * H, axis=1) - np.sum(b * Ez, axis=1)) / s2
    ll = -0.5 * np.sum(counts * np.log(2 * np.pi) + (counts - J) * np.log(s2) + logdet + quad)
    return Ez, Ezz, float(ll)


def _mstep(H, M, Ez, Ezz, sumsq, nobs, floor):
    n, J = Ez.shape
    S = (M.T @ Ezz.reshape(n, J * J)).reshape(-1, J, J)
    t = H.T @ Ez
    K = np.linalg.solve(S, t[:, :, None])[:, :, 0]
    s2 = (sumsq - np.sum(K * t)) / nobs
    return K, max(s2, floor)


def observed_loglik(h, mask, K, s2) -> float:
    """Observed-data Gaussian log-likelihood of the factor model."""
    M = np.asarray(mask, dtype=float)
    H = np.where(mask, h, 0.0)
    return _estep(H, M, np.asarray(K, dtype=float), float(s2))[2]


def fit_ppca_missing(h, mask, J_u: int, max_iter: int = 1000, tol: float = 1e-6) -> PpcaModel:
    """Fit probabilistic PCA to the entries of ``h`` where ``mask`` is true.

    The returned ``Ku`` has orthonormal columns and ``U`` holds least-squares
    scores of each row's observed cells on that basis, so the reconstruction is
    ``U @ Ku.T``.  ``loglik_trace`` records the observed-data log-likelihood
    of the EM iterates and never decreases.
    """
    mask = np.asarray(mask, dtype=bool)
    h = np.asarray(h, dtype=float)
    if h.shape != mask.shape or h.ndim != 2:
        raise InputError("h and mask must be matching 2-d arrays")
    n, p = h.shape
    if not 1 <= J_u < min(n, p):
        raise InputError(f"J_u must satisfy 1 <= J_u < min(n, p) = {min(n, p)}")
    if not mask.any(axis=1).all():
        raise InputError("every row needs at least one observed entry")
    if not mask.any(axis=0).all():
        raise InputError("every column needs at least one observed entry")
    if np.any(~np.isfinite(h[mask])):
        raise InputError("observed entries must be finite")

    M = mask.astype(float)
    H = np.where(mask, h, 0.0)
    nobs = float(M.sum())
    sumsq = float(np.sum(H * H))
    floor = NOISE_FLOOR * max(sumsq / nobs, 1e-300)

    col_mean = H.sum(axis=0) / M.sum(axis=0)
    filled = np.where(mask, h, col_mean[None, :])
    _, s, Vt = np.linalg.svd(filled, full_matrices=False)
    K = Vt[:J_u].T * (s[:J_u] / np.sqrt(n))
    approx = (filled @ Vt[:J_u].T) @ Vt[:J_u]
    s2 = max(float(np.sum((H - approx * M) ** 2) / nobs), floor)

    Ez, Ezz, ll = _estep(H, M, K, s2)
    trace = [ll]
    for _ in range(max_iter):
        K_new, s2_new = _mstep(H, M, Ez, Ezz, sumsq, nobs, floor)
        Ez_new, Ezz_new, ll_new = _estep(H, M, K_new, s2_new)
        if ll_new < ll:
            # EM cannot decrease the likelihood; this is rounding at convergence.
            break
        gain = (ll_new - ll) / max(abs(ll), 1e-300)
        K, s2, Ez, Ezz, ll = K_new, s2_new, Ez_new, Ezz_new, ll_new
        trace.append(ll)
        if gain < tol:
            break

    Q, _ = np.linalg.qr(K)
    U = least_squares_scores(H, M, Q)
    U, Ku = canonical_factors(U, Q)
    return PpcaModel(Ku=Ku, U=U, sigma_e2=float(s2), mask=mask, loglik_trace=np.array(trace))


def least_squares_scores(H, M, K):
    """Per-row minimum-norm least-squares coefficients on the observed cells."""
    n = H.shape[0]
    J = K.shape[1]
    KK = np.einsum("pj,pk->pjk", K, K).reshape(K.shape[0], J * J)
    G = (M @ KK).reshape(n, J, J)
    b = (H * M) @ K
    return np.einsum("ijk,ik->ij", np.linalg.pinv(G, hermitian=True), b)


def ppca_reconstruct(model: PpcaModel, i: int) -> np.ndarray:
    """Row ``i`` of ``U Ku^T``; cells outside the mask are NaN."""
    row = model.U[i] @ model.Ku.T
    return np.where(model.mask[i], row, np.nan)


def save_ppca(path, model: PpcaModel) -> None:
    with open(path, "w") as fh:
        fh.write(f"{model.Ku.shape[0]} {model.U.shape[0]} {model.J_u} {float(model.sigma_e2)!r}\n")
        write_matrix(fh, model.Ku)
        write_matrix(fh, model.U)


def load_ppca(path, mask=None) -> PpcaModel:
    tokens = open(path).read().split()
    p, n, J = (int(t) for t in tokens[:3])
    s2 = float(tokens[3])
    vals = np.array(tokens[4:], dtype=float)
    if vals.size != p * J + n * J:
        raise InputError(f"{path}: malformed PPCA model file")
    Ku = vals[: p * J].reshape(p, J)
    U = vals[p * J:].reshape(n, J)
    if mask is None:
        mask = np.ones((n, p), dtype=bool)
    return PpcaModel(Ku=Ku, U=U, sigma_e2=s2, mask=np.asarray(mask, dtype=bool),
                     loglik_trace=np.array([]))
