"""Discrepancy bases for the thickness track (kernel convolution) and the binary track."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InputError, SpatialGrid

DIF_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class KernelBasis:
    Kr: np.ndarray
    knots: np.ndarray
    kernel_range_km: float
    kernel: np.ndarray

    @property
    def J_r(self) -> int:
        return self.Kr.shape[1]


@dataclass(frozen=True)
class BinaryBasis:
    kv: np.ndarray
    dif: np.ndarray
    threshold: float = 0.5

    @property
    def J_v(self) -> int:
        return 1

    @property
    def Kv(self) -> np.ndarray:
        return self.kv[:, None]


def knot_lattice(grid: SpatialGrid, n_knots: int = 40) -> np.ndarray:
    """Most nearly square ``a x b = n_knots`` lattice over the grid's bounding box.

    The longer side of the lattice follows the longer grid axis; knots sit at
    the centers of the ``a x b`` equal tiles of the box.
    """
    b = max(f for f in range(1, int(np.sqrt(n_knots)) + 1) if n_knots % f == 0)
    a = n_knots // b
    xmin, xmax, ymin, ymax = grid.extent
    nkx, nky = (a, b) if (xmax - xmin) >= (ymax - ymin) else (b, a)
    xs = xmin + (np.arange(nkx) + 0.5) * (xmax - xmin) / nkx
    ys = ymin + (np.arange(nky) + 0.5) * (ymax - ymin) / nky
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def kernel_matrix(coords, knots, range_km: float) -> np.ndarray:
    dist = np.linalg.norm(np.asarray(coords)[:, None, :] - np.asarray(knots)[None, :, :], axis=2)
    return np.exp(-dist / range_km)


def build_kr(grid: SpatialGrid, positive_cells, n_knots: int = 40, range_km: float = 400.0,
             J_r: int = 10, knots=None) -> KernelBasis:
    """Leading left singular vectors of the exponential kernel matrix on the positive cells."""
    positive_cells = np.asarray(positive_cells, dtype=int)
    m = positive_cells.size
    if m < J_r:
        raise InputError(f"need at least J_r={J_r} positive cells, got {m}")
    knots = knot_lattice(grid, n_knots) if knots is None else np.atleast_2d(knots)
    if J_r > len(knots):
        raise InputError("J_r cannot exceed the number of knots")
    kern = kernel_matrix(grid.coords[positive_cells], knots, range_km)
    U, _, _ = np.linalg.svd(kern, full_matrices=False)
    Kr = U[:, :J_r]
    flip = np.sign(Kr[np.argmax(np.abs(Kr), axis=0), np.arange(J_r)])
    return KernelBasis(Kr=Kr * flip, knots=knots, kernel_range_km=float(range_km), kernel=kern)


def kv_from_dif(dif, threshold: float = 0.5) -> np.ndarray:
    dif = np.clip(np.asarray(dif, dtype=float), -DIF_CLAMP, DIF_CLAMP)
    kv = np.where(np.abs(dif) > threshold, np.log1p(dif) - np.log1p(-dif), 0.0)
    assert np.all(np.isfinite(kv))
    return kv


def build_kv(presence_ensemble, presence_obs, threshold: float = 0.5) -> BinaryBasis:
    """Signed model-minus-data presence mismatch, mapped to the logit scale."""
    Iy = np.asarray(presence_ensemble, dtype=float)
    Iz = np.asarray(presence_obs, dtype=float)
    if Iy.ndim != 2 or Iy.shape[1] != Iz.size:
        raise InputError("presence shapes do not conform")
    dif = (Iy - Iz[None, :]).mean(axis=0)
    return BinaryBasis(kv=kv_from_dif(dif, threshold), dif=dif, threshold=threshold)
