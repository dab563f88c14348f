"""One-dimensional GP emulators of principal-component scores.

Covariance between input settings::

    zeta * 1[theta == theta'] + kappa * exp(-sum_b |theta_b - theta'_b| / phi_b)

Zero-mean emulators are fitted by maximum likelihood; emulators whose mean is
a sum of natural splines of the logistic-PCA scores are fitted by REML with
the spline degrees of freedom chosen by k-fold cross-validation.
Optimization runs in log-parameter space ``(log zeta, log kappa, log phi_1..d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.stats import qmc

from .splines import NaturalSpline, SingularBasisError

LOG_PHI_BOUNDS = (np.log(0.01), np.log(10.0))
N_STARTS = 8
_PENALTY = 1e20


class FitError(RuntimeError):
    """An emulator could not be fitted."""


@dataclass(frozen=True)
class ExpCovParams:
    zeta: float
    kappa: float
    phi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if self.zeta < 0 or not self.kappa > 0 or np.any(phi <= 0):
            raise ValueError("need zeta >= 0, kappa > 0, phi > 0")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_log(cls, logp) -> "ExpCovParams":
        logp = np.asarray(logp, dtype=float)
        return cls(float(np.exp(logp[0])), float(np.exp(logp[1])), np.exp(logp[2:]))

    def to_log(self) -> np.ndarray:
        return np.concatenate([[np.log(self.zeta), np.log(self.kappa)], np.log(self.phi)])


def cov_exp(theta, theta2, params: ExpCovParams) -> float:
    """Covariance between two input settings, nugget included when they coincide."""
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    same = float(np.array_equal(theta, theta2))
    return params.zeta * same + params.kappa * float(
        np.exp(-np.sum(np.abs(theta - theta2) / params.phi)))


def correlation(X1, X2, phi) -> np.ndarray:
    diff = np.abs(np.asarray(X1)[:, None, :] - np.asarray(X2)[None, :, :])
    return np.exp(-np.sum(diff / phi, axis=2))


def _abs_diffs(X):
    return np.abs(X[:, None, :] - X[None, :, :]).transpose(2, 0, 1)


def _factor(logp, D):
    zeta, kappa, phi = np.exp(logp[0]), np.exp(logp[1]), np.exp(logp[2:])
    E = np.exp(-np.tensordot(1.0 / phi, D, axes=1))
    C = kappa * E
    C[np.diag_indices_from(C)] += zeta
    return zeta, kappa, phi, E, cho_factor(C, lower=True)


def _grad_from(G, zeta, kappa, phi, E, D):
    """0.5 * tr(G dC/dp) for each log-parameter, G symmetric."""
    kE = kappa * E
    g = [0.5 * zeta * np.trace(G), 0.5 * np.sum(G * kE)]
    for b in range(phi.size):
        g.append(0.5 * np.sum(G * kE * D[b]) / phi[b])
    return np.array(g)


def loglik_zero_mean(logp, X, y, D=None):
    """Zero-mean Gaussian log-likelihood and its gradient in log-parameters."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    D = _abs_diffs(X) if D is None else D
    zeta, kappa, phi, E, cf = _factor(np.asarray(logp, dtype=float), D)
    n = y.size
    alpha = cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    ll = -0.5 * (y @ alpha) - 0.5 * logdet - 0.5 * n * np.log(2 * np.pi)
    Cinv = cho_solve(cf, np.eye(n))
    G = np.outer(alpha, alpha) - Cinv
    return float(ll), _grad_from(G, zeta, kappa, phi, E, D)


def reml_loglik(logp, X, y, F, D=None):
    """Restricted log-likelihood with the linear mean ``F beta`` profiled out.

    Includes ``+0.5 log|F^T F|`` so the value does not depend on the choice of
    basis for the column space of ``F``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    F = np.asarray(F, dtype=float)
    D = _abs_diffs(X) if D is None else D
    zeta, kappa, phi, E, cf = _factor(np.asarray(logp, dtype=float), D)
    n, q = F.shape
    CiF = cho_solve(cf, F)
    A = F.T @ CiF
    Acf = cho_factor(A, lower=True)
    Cinv = cho_solve(cf, np.eye(n))
    P = Cinv - CiF @ cho_solve(Acf, CiF.T)
    Py = P @ y
    logdetC = 2.0 * np.sum(np.log(np.diag(cf[0])))
    logdetA = 2.0 * np.sum(np.log(np.diag(Acf[0])))
    logdetFF = np.linalg.slogdet(F.T @ F)[1]
    ll = (-0.5 * (y @ Py) - 0.5 * logdetC - 0.5 * logdetA + 0.5 * logdetFF
          - 0.5 * (n - q) * np.log(2 * np.pi))
    G = np.outer(Py, Py) - P
    return float(ll), _grad_from(G, zeta, kappa, phi, E, D)


def gls_beta(params: ExpCovParams, X, y, F):
    C = params.kappa * correlation(X, X, params.phi) + params.zeta * np.eye(len(X))
    cf = cho_factor(C, lower=True)
    CiF = cho_solve(cf, F)
    return np.linalg.solve(F.T @ CiF, CiF.T @ y)


# ---------------------------------------------------------------------------
# Mean specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineMean:
    """Intercept plus one natural spline per logistic-PCA score."""

    splines: tuple
    beta: np.ndarray = field(default=None)

    @property
    def dofs(self):
        return tuple(s.dof for s in self.splines)

    def basis(self, w) -> np.ndarray:
        w = np.atleast_2d(np.asarray(w, dtype=float))
        cols = [np.ones((w.shape[0], 1))]
        cols.extend(s(w[:, k]) for k, s in enumerate(self.splines))
        return np.hstack(cols)

    def __call__(self, w) -> np.ndarray:
        return self.basis(w) @ self.beta

    @classmethod
    def build(cls, w_scores, dof: int) -> "SplineMean":
        w_scores = np.atleast_2d(w_scores)
        return cls(tuple(NaturalSpline.from_quantiles(w_scores[:, k], dof)
                         for k in range(w_scores.shape[1])))


# ---------------------------------------------------------------------------
# Emulator
# ---------------------------------------------------------------------------

class ScoreEmulator:
    """GP over input space for one score.

    Prediction is for the latent smooth process: the nugget is neither added to
    the predictive variance nor to cross-covariances with new points.
    """

    def __init__(self, design, targets, cov: ExpCovParams, mean: SplineMean | None = None,
                 w_train=None, info=None):
        self.design = np.asarray(design, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        self.cov = cov
        self.mean = mean
        self.w_train = None if w_train is None else np.asarray(w_train, dtype=float)
        self.info = dict(info or {})
        n = self.targets.size
        C = cov.kappa * correlation(self.design, self.design, cov.phi) + cov.zeta * np.eye(n)
        self._chol = np.linalg.cholesky(C)
        resid = self.targets - self.prior_mean_train()
        self._alpha = cho_solve((self._chol, True), resid)

    @property
    def kappa(self) -> float:
        return self.cov.kappa

    def prior_mean_train(self) -> np.ndarray:
        if self.mean is None:
            return np.zeros_like(self.targets)
        return self.mean(self.w_train)

    def krige(self, thetas):
        """Kriged residual means and variances, excluding any spline mean term."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        c = self.cov.kappa * correlation(thetas, self.design, self.cov.phi)
        v = solve_triangular(self._chol, c.T, lower=True)
        var = self.cov.kappa - np.sum(v * v, axis=0)
        tol = 1e-8 * (self.cov.kappa + self.cov.zeta)
        assert np.all(var >= -tol), "negative predictive variance"
        # kappa - |v|^2 cannot resolve values below a few n * eps * kappa
        round_off = 8.0 * self.targets.size * np.finfo(float).eps * self.cov.kappa
        var[var <= round_off] = 0.0
        return c @ self._alpha, var

    def predict_many(self, thetas, w_at=None):
        """Predictive means and variances at many settings (rows of ``thetas``)."""
        mean, var = self.krige(thetas)
        if self.mean is not None:
            if w_at is None:
                raise ValueError("spline-mean emulator needs the LPC scores at theta")
            mean = mean + self.mean(np.atleast_2d(w_at))
        return mean, var

    def predict(self, theta, w_at_theta=None):
        mean, var = self.predict_many(np.atleast_2d(theta),
                                      None if w_at_theta is None else np.atleast_2d(w_at_theta))
        return float(mean[0]), float(var[0])


class ScaledPredictor:
    """Prediction rule with the conditional variance rescaled by ``kappa_new / kappa``."""

    def __init__(self, emulator: ScoreEmulator, kappa_new: float):
        if not kappa_new > 0:
            raise ValueError("kappa_new must be positive")
        self.emulator = emulator
        self.factor = kappa_new / emulator.kappa

    def predict(self, theta, w_at_theta=None):
        mean, var = self.emulator.predict(theta, w_at_theta)
        return mean, var * self.factor

    def predict_many(self, thetas, w_at=None):
        mean, var = self.emulator.predict_many(thetas, w_at)
        return mean, var * self.factor


def scale_partial_sill(emulator: ScoreEmulator, kappa_new: float) -> ScaledPredictor:
    return ScaledPredictor(emulator, kappa_new)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def canonical_order(design) -> np.ndarray:
    """Row order that depends only on row contents (lexicographic)."""
    design = np.asarray(design)
    return np.lexsort(design.T[::-1])


def log_bounds(scale: float, d: int):
    ls = np.log(scale)
    return [(ls - 12.0, ls + 5.0), (ls - 10.0, ls + 10.0)] + [LOG_PHI_BOUNDS] * d


def start_points(bounds, n_starts: int = N_STARTS) -> np.ndarray:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    u = qmc.Sobol(d=len(bounds), scramble=True, seed=20190).random(n_starts)
    # Keep starts off the box faces.
    return lo + (0.1 + 0.8 * u) * (hi - lo)


def _maximize(objective, bounds, n_starts=N_STARTS):
    best = None
    for x0 in start_points(bounds, n_starts):
        def negobj(x):
            try:
                val, grad = objective(x)
            except np.linalg.LinAlgError:
                return _PENALTY, np.zeros_like(x)
            if not np.isfinite(val):
                return _PENALTY, np.zeros_like(x)
            return -val, -grad

        res = minimize(negobj, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 500, "ftol": 1e-13, "gtol": 1e-9})
        if res.fun < _PENALTY and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitError("likelihood was not finite at any start")
    return best


def _is_degenerate(resid, y) -> bool:
    scale = max(float(np.mean(y ** 2)), 1.0)
    return float(np.mean(resid ** 2)) <= 1e-20 * scale


def _degenerate_params(y, d) -> ExpCovParams:
    warnings.warn("score is constant after the mean fit; partial sill clamped", RuntimeWarning,
                  stacklevel=3)
    kappa = 1e-12 * max(float(np.var(y)), 1.0)
    return ExpCovParams(zeta=kappa, kappa=kappa, phi=np.ones(d))


def fit_mle_zero_mean(design, scores, n_starts: int = N_STARTS) -> ScoreEmulator:
    """Zero-mean emulator with ML covariance parameters."""
    X = np.asarray(getattr(design, "rows", design), dtype=float)
    y = np.asarray(scores, dtype=float)
    n, d = X.shape
    if n < d + 2:
        raise FitError("need at least d + 2 runs")
    if np.any(~np.isfinite(y)):
        raise FitError("scores must be finite")
    order = canonical_order(X)
    X, y = X[order], y[order]
    if _is_degenerate(y, y):
        return ScoreEmulator(X, y, _degenerate_params(y, d), info={"degenerate": True})
    D = _abs_diffs(X)
    scale = float(np.mean(y ** 2))
    bounds = log_bounds(scale, d)
    res = _maximize(lambda lp: loglik_zero_mean(lp, X, y, D), bounds, n_starts)
    return ScoreEmulator(X, y, ExpCovParams.from_log(res.x),
                         info={"objective": -float(res.fun), "kind": "mle"})


def _spline_design(w, dof):
    mean = SplineMean.build(w, dof)
    F = mean.basis(w)
    if F.shape[0] <= F.shape[1] or np.linalg.matrix_rank(F) < F.shape[1]:
        raise SingularBasisError(f"spline basis with dof={dof} is rank deficient")
    return mean, F


def _cv_rmse(params: ExpCovParams, X, y, F, folds: int) -> float:
    n = y.size
    fold_of = np.arange(n) % folds
    R = correlation(X, X, params.phi)
    sq = 0.0
    for f in range(folds):
        te = fold_of == f
        tr = ~te
        C = params.kappa * R[np.ix_(tr, tr)] + params.zeta * np.eye(tr.sum())
        cf = cho_factor(C, lower=True)
        CiF = cho_solve(cf, F[tr])
        beta = np.linalg.lstsq(F[tr].T @ CiF, CiF.T @ y[tr], rcond=None)[0]
        alpha = cho_solve(cf, y[tr] - F[tr] @ beta)
        pred = F[te] @ beta + params.kappa * R[np.ix_(te, tr)] @ alpha
        sq += float(np.sum((y[te] - pred) ** 2))
    return float(np.sqrt(sq / n))


def fit_reml_spline_mean(design, scores, w_scores, dof_grid=(1, 2, 3, 4, 5), folds: int = 5,
                         n_starts: int = N_STARTS) -> ScoreEmulator:
    """Spline-mean emulator with REML covariance parameters.

    For every candidate dof (shared by all LPC scores) the covariance is fitted
    by REML on all runs; the dof is then chosen by k-fold CV RMSE with those
    parameters held fixed and the spline coefficients refitted by GLS on each
    training fold.  Ties (within 0.1%) go to the smaller dof.
    """
    X = np.asarray(getattr(design, "rows", design), dtype=float)
    y = np.asarray(scores, dtype=float)
    w = np.atleast_2d(np.asarray(w_scores, dtype=float))
    if w.shape[0] != y.size:
        w = w.T
    n, d = X.shape
    if n < d + 2:
        raise FitError("need at least d + 2 runs")
    if not len(dof_grid):
        raise FitError("dof_grid must be nonempty")
    if np.any(~np.isfinite(y)):
        raise FitError("scores must be finite")
    order = canonical_order(X)
    X, y, w = X[order], y[order], w[order]
    D = _abs_diffs(X)

    candidates = []
    for dof in sorted(set(int(v) for v in dof_grid)):
        try:
            mean, F = _spline_design(w, dof)
        except SingularBasisError:
            continue
        resid = y - F @ np.linalg.lstsq(F, y, rcond=None)[0]
        if _is_degenerate(resid, y):
            params = _degenerate_params(y, d)
            objective = np.nan
        else:
            scale = float(np.mean(resid ** 2))
            res = _maximize(lambda lp: reml_loglik(lp, X, y, F, D), log_bounds(scale, d), n_starts)
            params = ExpCovParams.from_log(res.x)
            objective = -float(res.fun)
        rmse = _cv_rmse(params, X, y, F, folds)
        candidates.append((dof, mean, F, params, objective, rmse))
    if not candidates:
        raise FitError("spline basis is singular for every dof (duplicated scores?)")

    best = min(c[5] for c in candidates)
    slack = 1e-3 * best + 1e-10 * np.sqrt(np.mean(y ** 2))
    dof, mean, F, params, objective, _ = next(c for c in candidates if c[5] <= best + slack)
    beta = gls_beta(params, X, y, F)
    mean = SplineMean(mean.splines, beta)
    info = {"objective": objective, "kind": "reml", "dof": dof,
            "cv_rmse": {c[0]: c[5] for c in candidates}}
    return ScoreEmulator(X, y, params, mean=mean, w_train=w, info=info)
