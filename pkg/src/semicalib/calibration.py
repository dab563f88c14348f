"""Bayesian calibration of the input setting against a semi-continuous observation.

The posterior couples a Gaussian marginal likelihood for the transformed
positive thickness (spatial discrepancy integrated out) with a Bernoulli
likelihood for presence, and is explored by Metropolis-within-Gibbs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .bases import BinaryBasis, KernelBasis
from .data import InputError, ObservationField, inverse_q
from .linalg import LowRankGaussian, NotPositiveDefinite, gaussian_loglik_lowrank
from .lpca import bernoulli_loglik

MODES = ("full", "binary-only", "prior")
VAR_FLOOR = 1e-10
TARGET_ACCEPT = 0.3


@dataclass
class CalibrationState:
    theta_star: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    sigma_r2: float
    sigma_eps2: float
    sigma_v2: float
    kappa_u: np.ndarray
    R: np.ndarray

    def copy(self) -> "CalibrationState":
        return CalibrationState(self.theta_star.copy(), self.psi.copy(), self.v.copy(),
                                float(self.sigma_r2), float(self.sigma_eps2), float(self.sigma_v2),
                                self.kappa_u.copy(), self.R.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.theta_star, self.psi, self.v,
                               [self.sigma_v2, self.sigma_r2, self.sigma_eps2],
                               self.kappa_u, self.R.ravel()])

    @classmethod
    def from_vector(cls, x, d, J_w, J_v, J_u, J_r) -> "CalibrationState":
        x = np.asarray(x, dtype=float)
        i = 0

        def take(k):
            nonlocal i
            out = x[i:i + k].copy()
            i += k
            return out

        theta, psi, v = take(d), take(J_w), take(J_v)
        sv, sr, se = take(3)
        kappa = take(J_u)
        R = take(J_r * J_v).reshape(J_r, J_v)
        return cls(theta, psi, v, float(sr), float(se), float(sv), kappa, R)

    def is_valid(self) -> bool:
        if not (self.sigma_r2 > 0 and self.sigma_eps2 > 0 and self.sigma_v2 > 0):
            return False
        if np.any(self.kappa_u <= 0):
            return False
        return r_is_admissible(self.R)


def r_is_admissible(R) -> bool:
    """``I - R R^T`` positive definite, i.e. the largest singular value of R is below 1."""
    R = np.atleast_2d(R)
    if R.size == 0:
        return True
    return bool(np.linalg.norm(R, 2) < 1.0)


@dataclass(frozen=True)
class Priors:
    """Inverse-gamma (shape, scale) pairs; ``kappa_ratio`` scales the fitted partial sills."""

    sigma_v2: tuple = (2.0, 1.0)
    sigma_r2: tuple = (2.0, 3.0)
    sigma_eps2: tuple = (10.0, 11000.0)
    kappa_shape: float = 5.0
    kappa_ratio: float = 6.0

    def __post_init__(self):
        for a, _ in (self.sigma_v2, self.sigma_r2, self.sigma_eps2):
            if not a > 1:
                raise ValueError("inverse-gamma shapes must exceed 1")
        if not self.kappa_shape > 1:
            raise ValueError("inverse-gamma shapes must exceed 1")


def log_invgamma(x, shape, scale) -> float:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        return -np.inf
    return float(np.sum(shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x)
                        - scale / x))


def log_normal(x, mean, var) -> float:
    x = np.asarray(x, dtype=float)
    var = np.broadcast_to(np.asarray(var, dtype=float), x.shape)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var))


# ---------------------------------------------------------------------------
# Problem assembly
# ---------------------------------------------------------------------------

class CalibrationProblem:
    """Everything the posterior needs that does not change along the chain."""

    def __init__(self, emulator, obs: ObservationField, kr: KernelBasis, kv: BinaryBasis,
                 priors: Priors = Priors(), mode: str = "full"):
        if mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        if obs.p != emulator.Kw.shape[0]:
            raise InputError("observation and emulator grids differ")
        self.emulator = emulator
        self.obs = obs
        self.kr = kr
        self.kv = kv
        self.priors = priors
        self.mode = mode
        pos = obs.positive_cells
        self.y_plus = inverse_q(obs.z_positive) if pos.size else np.zeros(0)
        self.Ku_plus = emulator.Ku[pos]
        self.Kr = kr.Kr
        if self.Kr.shape[0] != pos.size:
            raise InputError("K_r rows must match the positive cells of the observation")
        self.mu = emulator.mu
        self.Kw = emulator.Kw
        self.Kv = kv.Kv
        self.presence = obs.presence.astype(float)
        self.kappa_u_hat = emulator.kappa_u_hat
        self.d = emulator.w_emulators[0].design.shape[1]

    @property
    def dims(self):
        return dict(d=self.d, J_w=self.emulator.J_w, J_v=self.Kv.shape[1],
                    J_u=self.emulator.J_u, J_r=self.Kr.shape[1])

    def with_mode(self, mode: str) -> "CalibrationProblem":
        return CalibrationProblem(self.emulator, self.obs, self.kr, self.kv, self.priors, mode)

    # emulator-side quantities ------------------------------------------------
    def psi_moments(self, theta):
        mu = np.empty(self.emulator.J_w)
        var = np.empty(self.emulator.J_w)
        for k, em in enumerate(self.emulator.w_emulators):
            m, s = em.predict_many(theta[None, :])
            mu[k], var[k] = m[0], s[0]
        return mu, np.maximum(var, VAR_FLOOR * self.psi_scale)

    @property
    def psi_scale(self) -> np.ndarray:
        return np.array([em.kappa for em in self.emulator.w_emulators])

    def xi_krige(self, theta):
        mean = np.empty(self.emulator.J_u)
        var = np.empty(self.emulator.J_u)
        for l, em in enumerate(self.emulator.u_emulators):
            m, s = em.krige(theta[None, :])
            mean[l], var[l] = m[0], s[0]
        return mean, var

    def xi_spline(self, psi):
        return np.array([em.mean(psi[None, :])[0] for em in self.emulator.u_emulators])


def default_state(problem: CalibrationProblem, theta=None) -> CalibrationState:
    dims = problem.dims
    theta = np.full(dims["d"], 0.5) if theta is None else np.asarray(theta, dtype=float)
    psi, _ = problem.psi_moments(theta)
    a, b = problem.priors.sigma_eps2
    return CalibrationState(theta_star=theta.copy(), psi=psi, v=np.zeros(dims["J_v"]),
                            sigma_r2=problem.priors.sigma_r2[1] / (problem.priors.sigma_r2[0] - 1),
                            sigma_eps2=b / (a - 1), sigma_v2=1.0,
                            kappa_u=problem.kappa_u_hat.copy(),
                            R=np.zeros((dims["J_r"], dims["J_v"])))


# ---------------------------------------------------------------------------
# Posterior terms
# ---------------------------------------------------------------------------

def conditional_r_given_v(state: CalibrationState):
    """Moments of the thickness discrepancy coefficients given the presence ones."""
    R = np.atleast_2d(state.R)
    if not r_is_admissible(R):
        raise NotPositiveDefinite("I - R R^T is not positive definite")
    ratio = np.sqrt(state.sigma_r2 / state.sigma_v2)
    mean = ratio * (R @ state.v)
    cov = state.sigma_r2 * (np.eye(R.shape[0]) - R @ R.T)
    return mean, cov


def _xi_moments(problem: CalibrationProblem, state: CalibrationState, krige=None):
    kmean, kvar = problem.xi_krige(state.theta_star) if krige is None else krige
    mean = kmean + problem.xi_spline(state.psi)
    var = kvar * state.kappa_u / problem.kappa_u_hat
    return mean, np.maximum(var, VAR_FLOOR * problem.kappa_u_hat)


def loglik_continuous(state: CalibrationState, problem: CalibrationProblem, krige=None) -> float:
    """Marginal log-density of the transformed positive thickness."""
    m = problem.y_plus.size
    if m == 0:
        return 0.0
    mu_xi, var_xi = _xi_moments(problem, state, krige)
    mu_r, cov_r = conditional_r_given_v(state)
    mean = problem.Ku_plus @ mu_xi + problem.Kr @ mu_r
    model = LowRankGaussian.from_blocks(problem.Ku_plus, var_xi, problem.Kr, cov_r,
                                        state.sigma_eps2)
    return gaussian_loglik_lowrank(model, problem.y_plus - mean)


def binary_logits(state: CalibrationState, mu, Kw, Kv) -> np.ndarray:
    return mu + Kw @ state.psi + np.atleast_2d(Kv).reshape(len(mu), -1) @ state.v


def loglik_binary(state: CalibrationState, presence, mu, Kw, Kv) -> float:
    return bernoulli_loglik(np.asarray(presence, dtype=float), binary_logits(state, mu, Kw, Kv))


def log_prior(state: CalibrationState, problem: CalibrationProblem, psi_moments=None) -> float:
    th = state.theta_star
    if np.any(th < 0) or np.any(th > 1):
        return -np.inf
    if not r_is_admissible(state.R):
        return -np.inf
    pr = problem.priors
    lp = log_invgamma(state.sigma_v2, *pr.sigma_v2)
    lp += log_invgamma(state.sigma_r2, *pr.sigma_r2)
    lp += log_invgamma(state.sigma_eps2, *pr.sigma_eps2)
    lp += log_invgamma(state.kappa_u, pr.kappa_shape, pr.kappa_ratio * problem.kappa_u_hat) \
        if np.all(state.kappa_u > 0) else -np.inf
    if not np.isfinite(lp):
        return -np.inf
    lp += log_normal(state.v, 0.0, state.sigma_v2)
    mu_psi, var_psi = problem.psi_moments(th) if psi_moments is None else psi_moments
    lp += log_normal(state.psi, mu_psi, var_psi)
    return lp


def posterior_terms(state: CalibrationState, problem: CalibrationProblem):
    """(continuous, binary, prior) log terms; likelihood terms are 0 when switched off."""
    lp = log_prior(state, problem)
    if not np.isfinite(lp):
        return -np.inf, -np.inf, -np.inf
    l1 = loglik_continuous(state, problem) if problem.mode == "full" else 0.0
    l2 = (loglik_binary(state, problem.presence, problem.mu, problem.Kw, problem.Kv)
          if problem.mode != "prior" else 0.0)
    return l1, l2, lp


def log_posterior(state: CalibrationState, problem: CalibrationProblem) -> float:
    l1, l2, lp = posterior_terms(state, problem)
    if not np.isfinite(lp):
        return -np.inf
    return l1 + l2 + lp


# ---------------------------------------------------------------------------
# Sampler
# ---------------------------------------------------------------------------

BLOCKS = ("theta", "psi", "v", "sigma_v2", "sigma_r2", "sigma_eps2", "kappa_u", "R")


@dataclass
class McmcConfig:
    n_iter: int = 150_000
    burn_in: int = 30_000
    thin: int = 1
    seed: int = 0
    adapt_until: int | None = None
    checkpoint_every: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1 or not 0 <= self.burn_in < self.n_iter:
            raise InputError("need n_iter >= 1, thin >= 1 and 0 <= burn_in < n_iter")

    @property
    def adapt_end(self) -> int:
        return self.burn_in if self.adapt_until is None else self.adapt_until

    @property
    def n_kept(self) -> int:
        return len(range(self.burn_in, self.n_iter, self.thin))


@dataclass
class McmcChain:
    columns: list
    samples: np.ndarray
    logpost: np.ndarray
    accepted: dict
    proposed: dict
    seed: int
    n_iter: int
    mode: str
    step_sizes: dict = field(default_factory=dict)

    @property
    def acceptance_rates(self) -> dict:
        return {b: self.accepted[b] / self.proposed[b] if self.proposed[b] else np.nan
                for b in self.accepted}

    def column(self, name) -> np.ndarray:
        return self.samples[:, self.columns.index(name)]

    @property
    def theta(self) -> np.ndarray:
        idx = [i for i, c in enumerate(self.columns) if c.startswith("theta")]
        return self.samples[:, idx]


def state_columns(dims) -> list:
    cols = [f"theta{k + 1}" for k in range(dims["d"])]
    cols += [f"psi{k + 1}" for k in range(dims["J_w"])]
    cols += [f"v{k + 1}" for k in range(dims["J_v"])]
    cols += ["sigma_v2", "sigma_r2", "sigma_eps2"]
    cols += [f"kappa_u{k + 1}" for k in range(dims["J_u"])]
    cols += [f"R{i + 1}_{j + 1}" for i in range(dims["J_r"]) for j in range(dims["J_v"])]
    return cols


def draw_sigma_v2(v, prior=(2.0, 1.0), rng=None) -> float:
    """Exact draw from the inverse-gamma full conditional of sigma_v2 given v alone."""
    rng = np.random.default_rng() if rng is None else rng
    v = np.atleast_1d(v)
    a = prior[0] + 0.5 * v.size
    b = prior[1] + 0.5 * float(v @ v)
    return float(b / rng.gamma(a))


class _Cache:
    """Log-posterior pieces of the current state, recomputed only when their inputs move."""

    def __init__(self, problem, state):
        self.problem = problem
        self.set(state)

    def set(self, state, psi_mom=None, krige=None):
        p = self.problem
        self.state = state
        self.psi_mom = p.psi_moments(state.theta_star) if psi_mom is None else psi_mom
        self.krige = p.xi_krige(state.theta_star) if krige is None else krige
        self.lp = log_prior(state, p, self.psi_mom)
        self.l1 = (loglik_continuous(state, p, self.krige)
                   if p.mode == "full" and np.isfinite(self.lp) else 0.0)
        self.l2 = (loglik_binary(state, p.presence, p.mu, p.Kw, p.Kv)
                   if p.mode != "prior" else 0.0)
        self.total = self.l1 + self.l2 + self.lp if np.isfinite(self.lp) else -np.inf

    def evaluate(self, state, psi_mom=None, krige=None):
        c = object.__new__(_Cache)
        c.problem = self.problem
        try:
            c.set(state, psi_mom if psi_mom is not None else self.psi_mom if
                  state.theta_star is self.state.theta_star else None,
                  krige if krige is not None else self.krige if
                  state.theta_star is self.state.theta_star else None)
        except NotPositiveDefinite:
            c.state, c.total = state, -np.inf
        return c


def _log_rw(x, s, rng):
    return x * np.exp(s * rng.standard_normal(np.shape(x)))


class _Sampler:
    def __init__(self, problem, config, state, rng):
        self.p = problem
        self.cfg = config
        self.rng = rng
        self.cur = _Cache(problem, state)
        if not np.isfinite(self.cur.total):
            raise InputError("initial state has non-finite log-posterior")
        self.log_step = {b: np.log(0.5) for b in BLOCKS}
        self.log_step["theta"] = np.log(0.05)
        self.log_step["v"] = np.log(0.3)
        self.log_step["R"] = np.log(0.1)
        self.log_step["kappa_u"] = np.log(0.2)
        self.accepted = {b: 0 for b in BLOCKS}
        self.proposed = {b: 0 for b in BLOCKS}
        self.it = 0

    def step_size(self, b):
        return float(np.exp(self.log_step[b]))

    def _mh(self, block, cand, log_extra=0.0):
        self.proposed[block] += 1
        a = cand.total - self.cur.total + log_extra if np.isfinite(cand.total) else -np.inf
        accept = np.log(self.rng.uniform()) < a
        if accept:
            self.cur = cand
            self.accepted[block] += 1
        if self.it < self.cfg.adapt_end:
            rate = min(1.0, np.exp(a)) if np.isfinite(a) else 0.0
            self.log_step[block] += (rate - TARGET_ACCEPT) / (1.0 + self.it) ** 0.6
        return accept

    # blocks -------------------------------------------------------------------
    def update_theta(self):
        s = self.cur.state
        theta = s.theta_star + self.step_size("theta") * self.rng.standard_normal(s.theta_star.size)
        if np.any(theta < 0) or np.any(theta > 1):
            self.proposed["theta"] += 1
            if self.it < self.cfg.adapt_end:
                self.log_step["theta"] -= TARGET_ACCEPT / (1.0 + self.it) ** 0.6
            return
        mu0, var0 = self.cur.psi_mom
        mu1, var1 = self.p.psi_moments(theta)
        # psi rides along at a fixed standardised residual
        ratio = np.sqrt(var1 / var0)
        psi = mu1 + ratio * (s.psi - mu0)
        new = replace(s, theta_star=theta, psi=psi)
        cand = self.cur.evaluate(new, (mu1, var1), self.p.xi_krige(theta))
        self._mh("theta", cand, float(np.sum(np.log(ratio))))

    def update_psi(self):
        s = self.cur.state
        sd = np.sqrt(self.cur.psi_mom[1])
        psi = s.psi + self.step_size("psi") * sd * self.rng.standard_normal(sd.size)
        self._mh("psi", self.cur.evaluate(replace(s, psi=psi)))

    def update_v(self):
        s = self.cur.state
        v = s.v + self.step_size("v") * self.rng.standard_normal(s.v.size)
        self._mh("v", self.cur.evaluate(replace(s, v=v)))

    def update_sigma_v2(self):
        s = self.cur.state
        new_val = draw_sigma_v2(s.v, self.p.priors.sigma_v2, self.rng)
        cand = self.cur.evaluate(replace(s, sigma_v2=new_val))
        if self.p.mode != "full" or not np.any(s.R):
            # L1* does not involve sigma_v2: the draw is an exact Gibbs step
            self.proposed["sigma_v2"] += 1
            self.accepted["sigma_v2"] += 1
            self.cur = cand
            return
        # independence proposal from the conditional ignoring L1*; correct by the L1* ratio
        self.proposed["sigma_v2"] += 1
        a = cand.l1 - self.cur.l1 if np.isfinite(cand.total) else -np.inf
        if np.log(self.rng.uniform()) < a:
            self.cur = cand
            self.accepted["sigma_v2"] += 1

    def _update_positive(self, block, attr):
        s = self.cur.state
        old = getattr(s, attr)
        new = _log_rw(old, self.step_size(block), self.rng)
        cand = self.cur.evaluate(replace(s, **{attr: new if np.ndim(old) else float(new)}))
        jac = float(np.sum(np.log(new)) - np.sum(np.log(old)))
        self._mh(block, cand, jac)

    def update_R(self):
        s = self.cur.state
        R = s.R + self.step_size("R") * self.rng.standard_normal(s.R.shape)
        if not r_is_admissible(R):
            self.proposed["R"] += 1
            if self.it < self.cfg.adapt_end:
                self.log_step["R"] -= TARGET_ACCEPT / (1.0 + self.it) ** 0.6
            return
        self._mh("R", self.cur.evaluate(replace(s, R=R)))

    def sweep(self):
        self.update_theta()
        self.update_psi()
        self.update_v()
        self.update_sigma_v2()
        self._update_positive("sigma_r2", "sigma_r2")
        self._update_positive("sigma_eps2", "sigma_eps2")
        self._update_positive("kappa_u", "kappa_u")
        self.update_R()
        self.it += 1


def _state_to_json(state: CalibrationState) -> dict:
    return {k: (np.asarray(v).tolist()) for k, v in state.__dict__.items()}


def _state_from_json(d) -> CalibrationState:
    return CalibrationState(theta_star=np.array(d["theta_star"], dtype=float),
                            psi=np.array(d["psi"], dtype=float), v=np.array(d["v"], dtype=float),
                            sigma_r2=float(d["sigma_r2"]), sigma_eps2=float(d["sigma_eps2"]),
                            sigma_v2=float(d["sigma_v2"]),
                            kappa_u=np.array(d["kappa_u"], dtype=float),
                            R=np.array(d["R"], dtype=float))


def _write_checkpoint(path, sampler, records, lps, config):
    payload = {
        "iteration": sampler.it, "seed": config.seed, "mode": sampler.p.mode,
        "rng": sampler.rng.bit_generator.state, "state": _state_to_json(sampler.cur.state),
        "log_step": sampler.log_step, "accepted": sampler.accepted, "proposed": sampler.proposed,
        "records": [r.tolist() for r in records], "logpost": lps,
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)


def run_mcmc(problem: CalibrationProblem, init: CalibrationState | None = None,
             config: McmcConfig = McmcConfig(), resume_from=None, progress=None) -> McmcChain:
    """Metropolis-within-Gibbs over (theta*, psi, v, sigma_v2, sigma_r2, sigma_eps2, kappa_u, R).

    Step sizes adapt by Robbins-Monro towards 30% acceptance until
    ``config.adapt_end`` and are frozen afterwards.  With a checkpoint path the
    full sampler state, including the generator state, is written every
    ``checkpoint_every`` iterations so that ``resume_from`` continues the
    identical stream.
    """
    dims = problem.dims
    if resume_from is not None:
        ck = json.loads(Path(resume_from).read_text())
        if ck["mode"] != problem.mode:
            raise InputError("checkpoint mode differs from the problem mode")
        rng = np.random.default_rng()
        rng.bit_generator.state = ck["rng"]
        sampler = _Sampler(problem, config, _state_from_json(ck["state"]), rng)
        sampler.log_step = {k: float(v) for k, v in ck["log_step"].items()}
        sampler.accepted = {k: int(v) for k, v in ck["accepted"].items()}
        sampler.proposed = {k: int(v) for k, v in ck["proposed"].items()}
        sampler.it = int(ck["iteration"])
        records = [np.array(r, dtype=float) for r in ck["records"]]
        lps = [float(x) for x in ck["logpost"]]
    else:
        init = default_state(problem) if init is None else init.copy()
        sampler = _Sampler(problem, config, init, np.random.default_rng(config.seed))
        records, lps = [], []

    while sampler.it < config.n_iter:
        sampler.sweep()
        i = sampler.it - 1
        if i >= config.burn_in and (i - config.burn_in) % config.thin == 0:
            records.append(sampler.cur.state.as_vector())
            lps.append(sampler.cur.total)
        if (config.checkpoint_every and config.checkpoint_path
                and sampler.it % config.checkpoint_every == 0):
            _write_checkpoint(config.checkpoint_path, sampler, records, lps, config)
        if progress is not None:
            progress(sampler.it)
    samples = np.array(records).reshape(len(records), -1)
    return McmcChain(columns=state_columns(dims), samples=samples, logpost=np.array(lps),
                     accepted=dict(sampler.accepted), proposed=dict(sampler.proposed),
                     seed=config.seed, n_iter=config.n_iter, mode=problem.mode,
                     step_sizes={b: sampler.step_size(b) for b in BLOCKS})


# ---------------------------------------------------------------------------
# Diagnostics and I/O
# ---------------------------------------------------------------------------

def effective_sample_size(x) -> float:
    """Geyer initial-positive-sequence ESS; NaN (with a warning) for a constant series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if n < 4 or var <= 1e-300 * max(1.0, float(np.max(np.abs(x)))) ** 2:
        warnings.warn("degenerate series: ESS undefined", RuntimeWarning, stacklevel=2)
        return float("nan")
    f = np.fft.rfft(xc, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / max(tau, 1e-12))


def chain_diagnostics(chain: McmcChain) -> dict:
    n = chain.samples.shape[0]
    if n < 1000:
        raise InputError("chain_diagnostics needs at least 1000 kept iterations")
    half = chain.samples[: n // 2]
    out = {"n": n, "acceptance": chain.acceptance_rates, "parameters": {}}
    for j, name in enumerate(chain.columns):
        x = chain.samples[:, j]
        ess = effective_sample_size(x)
        out["parameters"][name] = {
            "mean_full": float(x.mean()), "mean_first_half": float(half[:, j].mean()),
            "q_full": np.quantile(x, [0.025, 0.5, 0.975]).tolist(),
            "q_first_half": np.quantile(half[:, j], [0.025, 0.5, 0.975]).tolist(),
            "ess": ess, "degenerate": bool(np.isnan(ess)),
        }
    return out


def write_chain(path, chain: McmcChain) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(chain.columns + ["logpost"]) + "\n")
        for row, lp in zip(chain.samples, chain.logpost):
            fh.write(" ".join(repr(float(v)) for v in row) + f" {float(lp)!r}\n")


def read_chain(path):
    """Column names and sample matrix (log-posterior column dropped) of a chain table."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    lines = path.read_text().splitlines()
    cols = lines[0].split()
    data = np.array([ln.split() for ln in lines[1:]], dtype=float).reshape(len(lines) - 1, len(cols))
    return cols[:-1], data[:, :-1]
