"""Data generators shared by the test modules."""

import numpy as np
from scipy.stats import qmc

from semicalib.data import DesignMatrix, EnsembleOutput, transform_q


def emulator_class_ensemble(n=40, p=100, noise=5.0, seed=0):
    """Ensemble drawn from the emulator's own model class.

    Presence is a steep logit threshold moving with theta1; the transformed
    thickness is two smooth PCs plus iid noise of standard deviation ``noise``.
    """
    rng = np.random.default_rng(seed)
    th = qmc.LatinHypercube(d=2, seed=seed).random(n)
    x = np.linspace(0.0, 1.0, p)
    present = (0.3 + 0.5 * th[:, [0]] - x[None, :]) > 0
    Ku = np.column_stack([np.ones(p), np.cos(np.pi * x)]) / np.sqrt(p)
    U = np.column_stack([(1000 + 400 * th[:, 1]) * np.sqrt(p), 200 * th[:, 0] * np.sqrt(p)])
    h = U @ Ku.T + noise * rng.standard_normal((n, p))
    return DesignMatrix(th), EnsembleOutput(np.where(present, transform_q(h), 0.0))


def low_rank_binary(n=200, p=400, J=3, seed=0, scale=4.0):
    """Bernoulli matrix with known logits of magnitude at most ``scale``."""
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-1, 1, p)
    W = rng.standard_normal((n, J))
    K = rng.standard_normal((p, J)) / np.sqrt(J)
    G = mu + W @ K.T
    G *= scale / np.max(np.abs(G))
    Y = (rng.uniform(size=G.shape) < 1 / (1 + np.exp(-G))).astype(np.int8)
    return Y, G


def random_spd(rng, J):
    A = rng.standard_normal((J, J))
    return A @ A.T / J + 0.5 * np.eye(J)


def kriging_oracle(design, targets, cov, theta, prior_train=None, prior_at=0.0):
    n = len(targets)
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = cov.kappa * np.exp(-np.sum(np.abs(design[i] - design[j]) / cov.phi))
        C[i, i] += cov.zeta
    c = cov.kappa * np.exp(-np.sum(np.abs(design - theta) / cov.phi, axis=1))
    resid = targets - (0.0 if prior_train is None else prior_train)
    return prior_at + c @ np.linalg.solve(C, resid)


def kriging_var_oracle(design, cov, theta):
    n = len(design)
    C = np.array([[cov.kappa * np.exp(-np.sum(np.abs(design[i] - design[j]) / cov.phi))
                   + (cov.zeta if i == j else 0.0) for j in range(n)] for i in range(n)])
    c = cov.kappa * np.exp(-np.sum(np.abs(design - theta) / cov.phi, axis=1))
    return cov.kappa - c @ np.linalg.solve(C, c)


def dense_log_posterior(state, problem):
    """Monolithic log-posterior: explicit kriging, dense Gaussian density, scipy priors."""
    from scipy import stats

    from semicalib.calibration import VAR_FLOOR
    from semicalib.data import inverse_q

    th = state.theta_star
    if np.any(th < 0) or np.any(th > 1) or np.linalg.norm(state.R, 2) >= 1:
        return -np.inf
    em = problem.emulator
    mu_psi = np.array([kriging_oracle(g.design, g.targets, g.cov, th) for g in em.w_emulators])
    var_psi = np.array([max(kriging_var_oracle(g.design, g.cov, th), VAR_FLOOR * g.cov.kappa)
                        for g in em.w_emulators])
    mu_xi = np.array([kriging_oracle(g.design, g.targets, g.cov, th, g.mean(g.w_train),
                                     g.mean.basis(state.psi[None, :])[0] @ g.mean.beta)
                      for g in em.u_emulators])
    khat = np.array([g.cov.kappa for g in em.u_emulators])
    var_xi = np.array([kriging_var_oracle(g.design, g.cov, th) for g in em.u_emulators])
    var_xi = np.maximum(var_xi * state.kappa_u / khat, VAR_FLOOR * khat)

    pos = problem.obs.positive_cells
    Ku = em.Ku[pos]
    Kr = problem.kr.Kr
    J_r = Kr.shape[1]
    mean_r = np.sqrt(state.sigma_r2 / state.sigma_v2) * state.R @ state.v
    cov_r = state.sigma_r2 * (np.eye(J_r) - state.R @ state.R.T)
    Sigma = (Ku @ np.diag(var_xi) @ Ku.T + Kr @ cov_r @ Kr.T
             + state.sigma_eps2 * np.eye(pos.size))
    y = inverse_q(problem.obs.z[pos])
    l1 = stats.multivariate_normal(Ku @ mu_xi + Kr @ mean_r, Sigma).logpdf(y)

    lam = em.mu + em.Kw @ state.psi + problem.kv.kv * state.v[0]
    l2 = 0.0
    for j, z in enumerate(problem.obs.presence):
        lj = min(max(lam[j], -30.0), 30.0)
        l2 += -np.log1p(np.exp(-lj)) if z else -np.log1p(np.exp(lj))

    pr = problem.priors
    lp = stats.invgamma.logpdf(state.sigma_v2, pr.sigma_v2[0], scale=pr.sigma_v2[1])
    lp += stats.invgamma.logpdf(state.sigma_r2, pr.sigma_r2[0], scale=pr.sigma_r2[1])
    lp += stats.invgamma.logpdf(state.sigma_eps2, pr.sigma_eps2[0], scale=pr.sigma_eps2[1])
    lp += stats.invgamma.logpdf(state.kappa_u, pr.kappa_shape, scale=pr.kappa_ratio * khat).sum()
    lp += stats.norm.logpdf(state.v, 0, np.sqrt(state.sigma_v2)).sum()
    lp += stats.norm.logpdf(state.psi, mu_psi, np.sqrt(var_psi)).sum()
    return float(l1 + l2 + lp)


def random_state(problem, rng, near=None, spread=1.0):
    from semicalib.calibration import CalibrationState

    dims = problem.dims
    if near is None:
        theta = rng.uniform(0.05, 0.95, dims["d"])
        mu_psi, var_psi = problem.psi_moments(theta)
        psi = mu_psi + np.sqrt(var_psi) * rng.normal(size=dims["J_w"])
        R = rng.normal(size=(dims["J_r"], dims["J_v"]))
        R *= rng.uniform(0, 0.95) / np.linalg.norm(R, 2)
        return CalibrationState(theta, psi, rng.normal(size=dims["J_v"]),
                                float(rng.uniform(0.5, 6)), float(rng.uniform(500, 3000)),
                                float(rng.uniform(0.2, 3)),
                                problem.kappa_u_hat * rng.uniform(0.5, 3, dims["J_u"]), R)
    s = near.copy()
    s.theta_star = np.clip(s.theta_star + 0.01 * spread * rng.normal(size=dims["d"]), 0, 1)
    s.psi = s.psi + 0.01 * spread * rng.normal(size=dims["J_w"]) * np.sqrt(
        problem.psi_moments(s.theta_star)[1])
    s.v = s.v + 0.05 * spread * rng.normal(size=dims["J_v"])
    s.sigma_eps2 *= np.exp(0.02 * spread * rng.normal())
    s.sigma_r2 *= np.exp(0.02 * spread * rng.normal())
    return s


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def without_nuggets(em):
    """Copy of an emulator with every nugget set to zero (interpolating GPs)."""
    from dataclasses import replace

    from semicalib.gp import ScoreEmulator

    w = [ScoreEmulator(g.design, g.targets, replace(g.cov, zeta=0.0)) for g in em.w_emulators]
    u = [ScoreEmulator(g.design, g.targets, replace(g.cov, zeta=0.0), mean=g.mean,
                       w_train=g.w_train) for g in em.u_emulators]
    return replace(em, w_emulators=w, u_emulators=u)
