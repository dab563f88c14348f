"""Synthetic-truth scenarios: presence contamination plus a Gaussian-random-field discrepancy.

Also provides a small analytic ice-dome simulator used to build desk-scale
ensembles with known structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .data import (DesignMatrix, EnsembleOutput, InputError, ObservationField, SpatialGrid,
                   write_observation)


@dataclass(frozen=True)
class SyntheticScenario:
    true_theta: np.ndarray
    true_field: np.ndarray
    contaminated_obs: ObservationField
    discrepancy_field: np.ndarray
    contaminated_presence: np.ndarray
    truth_index: int
    seed: int


def closest_runs(ensemble: EnsembleOutput, truth_index: int) -> np.ndarray:
    """Indices of the other runs ordered by mean squared thickness difference to the truth run."""
    Y = ensemble.values
    mse = np.mean((Y - Y[truth_index]) ** 2, axis=1)
    others = np.array([i for i in range(ensemble.n) if i != truth_index], dtype=int)
    return others[np.argsort(mse[others], kind="stable")]


def contaminate_binary(ensemble: EnsembleOutput, truth_index: int, frac: float = 0.3,
                       return_field: bool = False):
    """Presence after subtracting the mean run-minus-truth difference of the closest runs."""
    if not 0 < frac <= 1:
        raise InputError("frac must lie in (0, 1]")
    if not 0 <= truth_index < ensemble.n:
        raise InputError("truth_index out of range")
    order = closest_runs(ensemble, truth_index)
    if order.size == 0:
        raise InputError("need at least one run besides the truth")
    k = max(1, math.ceil(frac * order.size - 1e-9))
    truth = ensemble.values[truth_index]
    diff = (ensemble.values[order[:k]] - truth).mean(axis=0)
    contaminated = truth - diff
    presence = (contaminated > 0).astype(np.int8)
    return (presence, contaminated) if return_field else presence


def exponential_covariance(coords, sill: float, range_km: float, nugget: float) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    C = nugget * np.eye(len(coords))
    if sill > 0:
        C += sill * np.exp(-dist / range_km)
    return C


def sample_grf_exponential(coords, sill: float = 4.0, range_km: float = 400.0,
                           nugget: float = 0.01, seed: int = 0, size: int | None = None):
    """Zero-mean Gaussian field draw(s) with exponential covariance plus nugget, by Cholesky."""
    if isinstance(coords, SpatialGrid):
        coords = coords.coords
    if sill < 0 or nugget < 0 or range_km <= 0:
        raise InputError("sill and nugget must be nonnegative and range positive")
    C = exponential_covariance(coords, sill, range_km, nugget)
    rng = np.random.default_rng(seed)
    p = C.shape[0]
    if sill == 0 and nugget == 0:
        return np.zeros(p) if size is None else np.zeros((size, p))
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("field covariance factorization failed") from exc
    z = rng.standard_normal(p if size is None else (size, p))
    return L @ z if size is None else z @ L.T


def rank_by_centroid_distance(design: DesignMatrix) -> np.ndarray:
    """Run indices from farthest to nearest the design centroid."""
    dist = np.linalg.norm(design.rows - design.rows.mean(axis=0), axis=1)
    return np.argsort(-dist, kind="stable")


def make_scenario(ensemble: EnsembleOutput, design: DesignMatrix, truth_index: int, seed: int,
                  grid: SpatialGrid, frac: float = 0.3, sill: float = 4.0,
                  range_km: float = 400.0, nugget: float = 0.01) -> SyntheticScenario:
    presence = contaminate_binary(ensemble, truth_index, frac)
    truth = ensemble.values[truth_index]
    disc = sample_grf_exponential(grid.coords, sill, range_km, nugget, seed)
    z = np.where(presence == 1, np.maximum(truth + disc, 0.0), 0.0)
    return SyntheticScenario(true_theta=design.rows[truth_index].copy(), true_field=truth.copy(),
                             contaminated_obs=ObservationField(z), discrepancy_field=disc,
                             contaminated_presence=presence, truth_index=int(truth_index),
                             seed=int(seed))


def write_scenario(directory, scenario: SyntheticScenario, extra=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_observation(directory / "observation.txt", scenario.contaminated_obs)
    manifest = {"truth_index": scenario.truth_index, "seed": scenario.seed,
                "true_theta": [float(x) for x in scenario.true_theta]}
    manifest.update(extra or {})
    (directory / "scenario.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Toy simulator
# ---------------------------------------------------------------------------

def toy_grid(nx: int = 20, ny: int = 20, cell_km: float = 20.0) -> SpatialGrid:
    return SpatialGrid(nx, ny, cell_km)


def dome_field(theta, grid: SpatialGrid, future: bool = False) -> np.ndarray:
    """Elliptical ice dome controlled by four inputs in [0, 1].

    theta1, theta2 set the semi-axes, theta3 the central thickness and theta4
    shifts the dome along x.  The ``future`` state thins and shrinks the dome
    by amounts that depend on all four inputs.
    """
    t = np.asarray(theta, dtype=float)
    xmin, xmax, ymin, ymax = grid.extent
    cx = 0.5 * (xmin + xmax) + 80.0 * (t[3] - 0.5)
    cy = 0.5 * (ymin + ymax)
    a = 100.0 + 80.0 * t[0]
    b = 100.0 + 80.0 * t[1]
    h0 = 1500.0 + 2000.0 * t[2]
    if future:
        a *= 0.9 - 0.1 * t[2]
        b *= 0.95 - 0.05 * t[3]
        h0 *= 0.85 + 0.1 * t[0] - 0.05 * t[1]
    xy = grid.coords
    r2 = ((xy[:, 0] - cx) / a) ** 2 + ((xy[:, 1] - cy) / b) ** 2
    return np.where(r2 < 1.0, h0 * np.sqrt(np.clip(1.0 - r2, 0.0, None)), 0.0)


def toy_design(n: int, d: int = 4, seed: int = 0) -> DesignMatrix:
    sampler = qmc.LatinHypercube(d=d, seed=seed)
    return DesignMatrix(sampler.random(n))


def toy_ensemble(n: int = 125, seed: int = 0, grid: SpatialGrid | None = None):
    """(design, ensemble, future ensemble) from the dome simulator."""
    grid = toy_grid() if grid is None else grid
    design = toy_design(n, 4, seed)
    now = np.array([dome_field(t, grid) for t in design.rows])
    fut = np.array([dome_field(t, grid, future=True) for t in design.rows])
    return design, EnsembleOutput(now), EnsembleOutput(fut)
