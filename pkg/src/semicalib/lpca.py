"""Logistic PCA of a binary n x p matrix by majorization-minimization.

The logit matrix is ``1 mu^T + W Kw^T``.  Each MM iteration replaces the
Bernoulli deviance by its quadratic majorizer with curvature 1/4 and takes one
sweep of closed-form least-squares updates of ``mu``, ``W`` and ``Kw`` on the
working response ``Gamma + 4 (I - sigmoid(Gamma))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InputError, write_matrix

LOGIT_CAP = 30.0


@dataclass(frozen=True)
class LogisticPcaModel:
    mu: np.ndarray
    Kw: np.ndarray
    W: np.ndarray
    loglik_trace: np.ndarray

    @property
    def J_w(self) -> int:
        return self.Kw.shape[1]

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.Kw.shape[0]


def sigmoid(t):
    t = np.clip(t, -LOGIT_CAP, LOGIT_CAP)
    return 1.0 / (1.0 + np.exp(-t))


def bernoulli_loglik(presence, logits) -> float:
    """Sum of Bernoulli log-probabilities with logits capped at +-30."""
    g = np.clip(logits, -LOGIT_CAP, LOGIT_CAP)
    return float(np.sum(presence * g - np.logaddexp(0.0, g)))


def lpca_loglik(presence, mu, W, Kw) -> float:
    logits = np.asarray(mu)[None, :] + np.asarray(W) @ np.asarray(Kw).T
    return bernoulli_loglik(presence, logits)


def lpca_logits(model: LogisticPcaModel) -> np.ndarray:
    return model.mu[None, :] + model.W @ model.Kw.T


def canonical_factors(W, K):
    """Rewrite ``W K^T`` with orthonormal K columns, decreasing score energy.

    Column signs are fixed so the largest-magnitude loading of each column is
    positive.
    """
    Qk, Rk = np.linalg.qr(K)
    A, s, Bt = np.linalg.svd(W @ Rk.T, full_matrices=False)
    W_new = A * s
    K_new = Qk @ Bt.T
    flip = np.sign(K_new[np.argmax(np.abs(K_new), axis=0), np.arange(K_new.shape[1])])
    flip[flip == 0] = 1.0
    return W_new * flip, K_new * flip


def _check_binary(presence) -> np.ndarray:
    presence = np.asarray(presence)
    if presence.ndim != 2:
        raise InputError("presence must be a 2-d matrix")
    if not np.all((presence == 0) | (presence == 1)):
        raise InputError("presence matrix must be binary")
    return presence.astype(float)


def fit_lpca(presence, J_w: int, max_iter: int = 2000, tol: float = 1e-6) -> LogisticPcaModel:
    """Fit the logistic PCA decomposition of a binary matrix.

    Parameters
    ----------
    presence : (n, p) array of 0/1
    J_w : int
        Number of components, ``1 <= J_w < min(n, p)``.
    max_iter, tol
        Stop when the relative log-likelihood gain drops below ``tol`` or after
        ``max_iter`` MM iterations.

    Returns
    -------
    LogisticPcaModel
        ``W`` is column-centered, so ``mu`` is the column mean of the logits;
        ``Kw`` has orthonormal columns.
    """
    Y = _check_binary(presence)
    n, p = Y.shape
    if not 1 <= J_w < min(n, p):
        raise InputError(f"J_w must satisfy 1 <= J_w < min(n, p) = {min(n, p)}")

    freq = Y.mean(axis=0)
    with np.errstate(divide="ignore"):
        mu = np.clip(np.log(freq) - np.log1p(-freq), -4.0, 4.0)
    centered = (2.0 * Y - 1.0)
    centered = centered - centered.mean(axis=0)
    U, s, Vt = np.linalg.svd(centered, full_matrices=False)
    W = U[:, :J_w] * s[:J_w]
    K = Vt[:J_w].T.copy()

    gamma = mu[None, :] + W @ K.T
    ll = bernoulli_loglik(Y, gamma)
    trace = [ll]
    ridge = 1e-12
    eye = np.eye(J_w)
    for _ in range(max_iter):
        X = gamma + 4.0 * (Y - sigmoid(gamma))
        mu_new = (X - W @ K.T).mean(axis=0)
        Xc = X - mu_new[None, :]
        KtK = K.T @ K
        W_new = np.linalg.solve(KtK + ridge * max(np.trace(KtK), 1.0) * eye, K.T @ Xc.T).T
        WtW = W_new.T @ W_new
        K_new = np.linalg.solve(WtW + ridge * max(np.trace(WtW), 1.0) * eye, W_new.T @ Xc).T
        gamma_new = mu_new[None, :] + W_new @ K_new.T
        ll_new = bernoulli_loglik(Y, gamma_new)
        if ll_new < ll:
            # The majorizer forbids a decrease; one here is rounding at convergence.
            break
        mu, W, K, gamma = mu_new, W_new, K_new, gamma_new
        gain = (ll_new - ll) / max(abs(ll), 1e-300)
        ll = ll_new
        trace.append(ll)
        if gain < tol:
            break

    shift = W.mean(axis=0)
    mu = mu + K @ shift
    W, K = canonical_factors(W - shift, K)
    return LogisticPcaModel(mu=mu, Kw=K, W=W, loglik_trace=np.array(trace))


def save_lpca(path, model: LogisticPcaModel) -> None:
    with open(path, "w") as fh:
        fh.write(f"{model.p} {model.n} {model.J_w}\n")
        write_matrix(fh, model.mu[None, :])
        write_matrix(fh, model.Kw)
        write_matrix(fh, model.W)


def load_lpca(path) -> LogisticPcaModel:
    tokens = open(path).read().split()
    p, n, J = (int(t) for t in tokens[:3])
    vals = np.array(tokens[3:], dtype=float)
    if vals.size != p + p * J + n * J:
        raise InputError(f"{path}: malformed logistic PCA model file")
    mu = vals[:p]
    Kw = vals[p:p + p * J].reshape(p, J)
    W = vals[p + p * J:].reshape(n, J)
    return LogisticPcaModel(mu=mu, Kw=Kw, W=W, loglik_trace=np.array([]))
