"""The two-track semi-continuous emulator and its hold-out validation."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .data import (ZERO_THICKNESS, DesignMatrix, EnsembleOutput, InputError, inverse_q,
                   transform_q)
from .gp import (ExpCovParams, ScoreEmulator, SplineMean, fit_mle_zero_mean,
                 fit_reml_spline_mean)
from .lpca import LogisticPcaModel, fit_lpca
from .ppca import PpcaModel, fit_ppca_missing
from .serialize import read_blocks, write_blocks
from .splines import NaturalSpline

BUNDLE_HEADER = "semicalib-emulator 1"
PRESENT_FLOOR = 2.0 * ZERO_THICKNESS


class EmulatorFitError(RuntimeError):
    pass


@contextmanager
def _component(name: str):
    """Prefix sub-model failures with the component name; input errors stay input errors."""
    try:
        yield
    except InputError as exc:
        raise InputError(f"{name}: {exc}") from exc
    except Exception as exc:
        raise EmulatorFitError(f"{name}: {exc}") from exc


@dataclass
class SemiContinuousEmulator:
    """Logistic PCA + PPCA reductions with one GP per score.

    ``Ku`` is the full p x J_u loading matrix; rows of cells that never carry
    ice in the ensemble are zero.
    """

    lpca: LogisticPcaModel
    ppca: PpcaModel
    Ku: np.ndarray
    w_emulators: list
    u_emulators: list
    meta: dict = field(default_factory=dict)

    @property
    def J_w(self) -> int:
        return len(self.w_emulators)

    @property
    def J_u(self) -> int:
        return len(self.u_emulators)

    @property
    def mu(self) -> np.ndarray:
        return self.lpca.mu

    @property
    def Kw(self) -> np.ndarray:
        return self.lpca.Kw

    @property
    def kappa_u_hat(self) -> np.ndarray:
        return np.array([em.kappa for em in self.u_emulators])

    def predict_scores(self, thetas):
        """Means and variances of the LPC scores and PC scores at each row of ``thetas``.

        The PC-score spline means are evaluated at the predicted LPC means.
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        k = thetas.shape[0]
        mu_psi = np.empty((k, self.J_w))
        var_psi = np.empty((k, self.J_w))
        for j, em in enumerate(self.w_emulators):
            mu_psi[:, j], var_psi[:, j] = em.predict_many(thetas)
        mu_xi = np.empty((k, self.J_u))
        var_xi = np.empty((k, self.J_u))
        for j, em in enumerate(self.u_emulators):
            mu_xi[:, j], var_xi[:, j] = em.predict_many(thetas, mu_psi)
        return mu_psi, var_psi, mu_xi, var_xi

    def predict_fields(self, thetas):
        mu_psi, _, mu_xi, _ = self.predict_scores(thetas)
        logits = self.mu[None, :] + mu_psi @ self.Kw.T
        presence = (logits > 0).astype(np.int8)
        # exp(x - 1) underflows for strongly negative scores; keep present cells positive
        thick = np.maximum(transform_q(mu_xi @ self.Ku.T), PRESENT_FLOOR)
        thickness = np.where(presence == 1, thick, 0.0)
        return logits, thickness, presence

    def predict_field(self, theta):
        """(logits, thickness, presence) p-vectors at one input setting."""
        logits, thickness, presence = self.predict_fields(np.atleast_2d(theta))
        return logits[0], thickness[0], presence[0]


def fit_emulator(ensemble: EnsembleOutput, design: DesignMatrix, J_w: int = 10, J_u: int = 20,
                 dof_grid=(1, 2, 3, 4, 5), folds: int = 5, lpca_iter: int = 2000,
                 ppca_iter: int = 1000, tol: float = 1e-6) -> SemiContinuousEmulator:
    """Fit logistic PCA, PPCA on ``inverse_q`` of the positive thickness, then the score GPs."""
    if ensemble.n != design.n:
        raise InputError("ensemble and design have different run counts")
    if J_w < 1 or J_u < 1:
        raise InputError("J_w and J_u must be at least 1")
    presence = ensemble.presence
    with _component("logistic PCA"):
        lpca = fit_lpca(presence, J_w, max_iter=lpca_iter, tol=tol)

    mask = presence.astype(bool)
    cols = np.flatnonzero(mask.any(axis=0))
    h = np.zeros(ensemble.values.shape)
    h[mask] = inverse_q(ensemble.values[mask])
    with _component("PPCA"):
        ppca = fit_ppca_missing(h[:, cols], mask[:, cols], J_u, max_iter=ppca_iter, tol=tol)
    Ku = np.zeros((ensemble.p, J_u))
    Ku[cols] = ppca.Ku

    w_emulators = []
    for k in range(J_w):
        with _component(f"LPC score emulator {k + 1}"):
            w_emulators.append(fit_mle_zero_mean(design, lpca.W[:, k]))
    u_emulators = []
    for l in range(J_u):
        with _component(f"PC score emulator {l + 1}"):
            u_emulators.append(fit_reml_spline_mean(design, ppca.U[:, l], lpca.W,
                                                    dof_grid=dof_grid, folds=folds))
    meta = {"ppca_columns": cols}
    return SemiContinuousEmulator(lpca=lpca, ppca=ppca, Ku=Ku, w_emulators=w_emulators,
                                  u_emulators=u_emulators, meta=meta)


# ---------------------------------------------------------------------------
# Hold-out validation
# ---------------------------------------------------------------------------

@dataclass
class CVReport:
    mae_m: float
    sensitivity: float
    specificity: float
    test_index: np.ndarray
    per_run: list

    def __iter__(self):
        return iter((self.mae_m, self.sensitivity, self.specificity))


def presence_metrics(true_thickness, pred_thickness, pred_presence):
    true_pres = true_thickness > 0
    pred_pres = np.asarray(pred_presence).astype(bool)
    pos = true_pres.sum()
    neg = (~true_pres).sum()
    mae = float(np.mean(np.abs(pred_thickness[true_pres] - true_thickness[true_pres]))) if pos else np.nan
    sens = float((pred_pres & true_pres).sum() / pos) if pos else np.nan
    spec = float((~pred_pres & ~true_pres).sum() / neg) if neg else np.nan
    return mae, sens, spec


def cross_validate(ensemble: EnsembleOutput, design: DesignMatrix, holdout_frac: float = 0.1,
                   seed: int = 0, fit=None, **fit_kwargs) -> CVReport:
    """Single random hold-out split: refit on the retained runs, predict the rest.

    ``fit(ensemble, design, **fit_kwargs)`` must return an object with
    ``predict_fields``; it defaults to :func:`fit_emulator`.
    """
    if not 0 < holdout_frac < 0.5:
        raise InputError("holdout_frac must lie in (0, 0.5)")
    fit = fit_emulator if fit is None else fit
    n = ensemble.n
    n_test = max(1, int(round(holdout_frac * n)))
    perm = np.random.default_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    model = fit(ensemble.subset(train), design.subset(train), **fit_kwargs)
    _, thick, pres = model.predict_fields(design.rows[test])
    truth = ensemble.values[test]
    mae, sens, spec = presence_metrics(truth, thick, pres)
    per_run = []
    for r, i in enumerate(test):
        m_i, s_i, c_i = presence_metrics(truth[r], thick[r], pres[r])
        per_run.append({"run": int(i), "mae_m": m_i, "sensitivity": s_i, "specificity": c_i})
    return CVReport(mae, sens, spec, test, per_run)


def write_cv_report(path, report: CVReport, diagnostics_path=None) -> None:
    with open(path, "w") as fh:
        fh.write("metric value\n")
        fh.write(f"mae_m {float(report.mae_m)!r}\n")
        fh.write(f"sensitivity {float(report.sensitivity)!r}\n")
        fh.write(f"specificity {float(report.specificity)!r}\n")
    if diagnostics_path is not None:
        with open(diagnostics_path, "w") as fh:
            fh.write("run mae_m sensitivity specificity\n")
            for row in report.per_run:
                fh.write(f"{row['run']} {float(row['mae_m'])!r} {float(row['sensitivity'])!r} "
                         f"{float(row['specificity'])!r}\n")


# ---------------------------------------------------------------------------
# Bundle I/O
# ---------------------------------------------------------------------------

def save_emulator(path, em: SemiContinuousEmulator) -> None:
    blocks = {
        "lpca.mu": em.lpca.mu, "lpca.Kw": em.lpca.Kw, "lpca.W": em.lpca.W,
        "lpca.trace": em.lpca.loglik_trace,
        "ppca.Ku": em.Ku, "ppca.U": em.ppca.U, "ppca.sigma_e2": em.ppca.sigma_e2,
        "ppca.columns": em.meta["ppca_columns"], "ppca.mask": em.ppca.mask,
        "ppca.trace": em.ppca.loglik_trace,
    }
    for k, g in enumerate(em.w_emulators):
        tag = f"w{k}"
        blocks[f"{tag}.design"] = g.design
        blocks[f"{tag}.targets"] = g.targets
        blocks[f"{tag}.cov"] = np.concatenate([[g.cov.zeta, g.cov.kappa], g.cov.phi])
    for l, g in enumerate(em.u_emulators):
        tag = f"u{l}"
        blocks[f"{tag}.design"] = g.design
        blocks[f"{tag}.targets"] = g.targets
        blocks[f"{tag}.cov"] = np.concatenate([[g.cov.zeta, g.cov.kappa], g.cov.phi])
        blocks[f"{tag}.w_train"] = g.w_train
        blocks[f"{tag}.beta"] = g.mean.beta
        for k, s in enumerate(g.mean.splines):
            blocks[f"{tag}.knots{k}"] = s.knots
    write_blocks(path, BUNDLE_HEADER, blocks)


def _cov(vec) -> ExpCovParams:
    return ExpCovParams(zeta=float(vec[0]), kappa=float(vec[1]), phi=vec[2:])


def load_emulator(path) -> SemiContinuousEmulator:
    b = read_blocks(path, BUNDLE_HEADER)
    lpca = LogisticPcaModel(mu=b["lpca.mu"], Kw=b["lpca.Kw"], W=b["lpca.W"],
                            loglik_trace=b["lpca.trace"])
    cols = b["ppca.columns"].astype(int)
    Ku = b["ppca.Ku"]
    ppca = PpcaModel(Ku=Ku[cols], U=b["ppca.U"], sigma_e2=float(b["ppca.sigma_e2"]),
                     mask=b["ppca.mask"].astype(bool), loglik_trace=b["ppca.trace"])
    w_em = [ScoreEmulator(b[f"w{k}.design"], b[f"w{k}.targets"], _cov(b[f"w{k}.cov"]))
            for k in range(lpca.J_w)]
    u_em = []
    for l in range(Ku.shape[1]):
        tag = f"u{l}"
        splines = tuple(NaturalSpline(b[f"{tag}.knots{k}"]) for k in range(lpca.J_w))
        mean = SplineMean(splines, b[f"{tag}.beta"])
        u_em.append(ScoreEmulator(b[f"{tag}.design"], b[f"{tag}.targets"], _cov(b[f"{tag}.cov"]),
                                  mean=mean, w_train=b[f"{tag}.w_train"]))
    return SemiContinuousEmulator(lpca=lpca, ppca=ppca, Ku=Ku, w_emulators=w_em,
                                  u_emulators=u_em, meta={"ppca_columns": cols})
