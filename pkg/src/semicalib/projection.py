"""Scalar GP emulator of a projected ice-volume change, driven by posterior input draws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde

from .data import DesignMatrix, InputError
from .gp import ScoreEmulator, fit_mle_zero_mean


def volume_change_from_fields(field_now, field_future, cell_area_km2: float) -> float:
    """Total thickness change times cell area, in cubic metres."""
    now = np.asarray(field_now, dtype=float)
    fut = np.asarray(field_future, dtype=float)
    if now.shape != fut.shape:
        raise InputError("fields do not conform")
    return float(np.sum(fut - now) * cell_area_km2 * 1e6)


@dataclass
class ProjectionEmulator:
    design: np.ndarray
    volume_change: np.ndarray
    offset: float
    gp: ScoreEmulator
    units: str = "m^3"
    meta: dict = field(default_factory=dict)

    @property
    def cov(self):
        return self.gp.cov

    def predict_many(self, thetas):
        mean, var = self.gp.predict_many(thetas)
        return mean + self.offset, var

    def predict(self, theta):
        mean, var = self.gp.predict(theta)
        return mean + self.offset, var


def fit_projection(design: DesignMatrix, volume_change, units: str = "m^3") -> ProjectionEmulator:
    """Zero-mean GP with exponential covariance fitted by maximum likelihood to the centred response."""
    y = np.asarray(volume_change, dtype=float)
    if y.shape != (design.n,):
        raise InputError("one volume change per design run is required")
    offset = float(y.mean())
    gp = fit_mle_zero_mean(design, y - offset)
    return ProjectionEmulator(design=design.rows.copy(), volume_change=y.copy(), offset=offset,
                              gp=gp, units=units)


def project_posterior(theta_draws, proj: ProjectionEmulator, include_emulator_noise: bool = True,
                      seed: int = 0) -> np.ndarray:
    """One projected value per kept draw: the predictive mean, or a predictive normal draw."""
    thetas = np.atleast_2d(np.asarray(theta_draws, dtype=float))
    if thetas.shape[0] == 0:
        raise InputError("empty chain")
    mean, var = proj.predict_many(thetas)
    if not include_emulator_noise:
        return mean
    rng = np.random.default_rng(seed)
    return mean + np.sqrt(var) * rng.standard_normal(mean.size)


@dataclass
class DensityTable:
    sample: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    units: str

    @property
    def mode(self) -> float:
        return float(self.grid[np.argmax(self.density)])


def density_table(sample, n_grid: int = 512, units: str = "m^3", pad: float = 0.1) -> DensityTable:
    """Sorted sample plus a Gaussian kernel density (Scott bandwidth) on an even grid."""
    x = np.sort(np.asarray(sample, dtype=float))
    lo, hi = x[0], x[-1]
    span = hi - lo
    if span <= 0:
        grid = np.full(n_grid, lo)
        return DensityTable(x, grid, np.full(n_grid, np.inf), 0.0, units)
    kde = gaussian_kde(x)
    grid = np.linspace(lo - pad * span, hi + pad * span, n_grid)
    bw = float(np.sqrt(kde.covariance[0, 0]))
    return DensityTable(x, grid, kde(grid), bw, units)


def write_density_table(prefix, table: DensityTable) -> None:
    """``<prefix>.sample`` (sorted draws) and ``<prefix>.density`` (grid, density)."""
    with open(f"{prefix}.sample", "w") as fh:
        fh.write(f"# units {table.units}\nvalue\n")
        fh.writelines(f"{float(v)!r}\n" for v in table.sample)
    with open(f"{prefix}.density", "w") as fh:
        fh.write(f"# units {table.units} bandwidth {table.bandwidth!r} n_grid {table.grid.size}\n")
        fh.write("x density\n")
        fh.writelines(f"{float(g)!r} {float(d)!r}\n" for g, d in zip(table.grid, table.density))
