"""Grids, ensemble and observation containers, the thickness transform, and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Thickness at or below this is float dust and counts as no ice.
ZERO_THICKNESS = 1e-12


class InputError(ValueError):
    """Malformed or inconsistent input data."""


# ---------------------------------------------------------------------------
# Thickness transform q : R -> R+
# ---------------------------------------------------------------------------

def transform_q(x):
    """Map a latent value to a positive thickness.

    Identity above 1, ``exp(x - 1)`` at or below 1, so the map is C1 at 1.
    """
    x = np.asarray(x, dtype=float)
    out = np.where(x > 1.0, x, np.exp(np.minimum(x, 1.0) - 1.0))
    return out if out.ndim else float(out)


def inverse_q(y):
    """Inverse of :func:`transform_q`; ``y`` must be strictly positive."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("inverse_q is defined only for positive values")
    out = np.where(y > 1.0, y, 1.0 + np.log(np.minimum(y, 1.0)))
    return out if out.ndim else float(out)


def log_jacobian_q(x):
    """log dq/dx; diagnostic only, it does not enter inference."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 1.0, 0.0, np.minimum(x, 1.0) - 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialGrid:
    """Regular planar grid; cell ``j = iy * nx + ix`` sits at ``(x0 + ix*h, y0 + iy*h)``."""

    nx: int
    ny: int
    cell_size_km: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InputError("grid needs at least one cell in each direction")
        if not self.cell_size_km > 0:
            raise InputError("cell size must be positive")

    @property
    def p(self) -> int:
        return self.nx * self.ny

    @property
    def coords(self) -> np.ndarray:
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        xs = self.x0 + ix.ravel() * self.cell_size_km
        ys = self.y0 + iy.ravel() * self.cell_size_km
        return np.column_stack([xs, ys])

    @property
    def cell_area_km2(self) -> float:
        return self.cell_size_km ** 2

    @property
    def extent(self):
        """(xmin, xmax, ymin, ymax) of the cell centers."""
        return (self.x0, self.x0 + (self.nx - 1) * self.cell_size_km,
                self.y0, self.y0 + (self.ny - 1) * self.cell_size_km)


@dataclass(frozen=True)
class DesignMatrix:
    """Input settings rescaled to the unit cube, one row per model run."""

    rows: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if np.any(~np.isfinite(rows)) or rows.min() < 0 or rows.max() > 1:
            raise InputError("design entries must lie in [0, 1]")
        if len(np.unique(rows, axis=0)) != len(rows):
            raise InputError("design contains duplicate rows")
        names = tuple(self.names) or tuple(f"theta{b + 1}" for b in range(rows.shape[1]))
        if len(names) != rows.shape[1]:
            raise InputError("one name per design column is required")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def subset(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.rows[idx], self.names)


def _clean_thickness(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)):
        raise InputError("thickness values must be finite")
    if values.size and values.min() < 0:
        raise InputError("thickness values must be nonnegative")
    values = np.where(values <= ZERO_THICKNESS, 0.0, values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class EnsembleOutput:
    """n x p matrix of model thickness; presence is derived."""

    values: np.ndarray

    def __post_init__(self):
        values = _clean_thickness(np.atleast_2d(self.values))
        object.__setattr__(self, "values", values)

    @property
    def presence(self) -> np.ndarray:
        return (self.values > 0).astype(np.int8)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, idx) -> "EnsembleOutput":
        return EnsembleOutput(self.values[idx])


@dataclass(frozen=True)
class ObservationField:
    """Observed thickness over the p grid cells.

    ``positive_index`` lists the positive cells first (in grid order) and then
    the empty ones; grid data are never reordered themselves.
    """

    z: np.ndarray
    presence: np.ndarray = field(init=False)
    m: int = field(init=False)
    positive_index: np.ndarray = field(init=False)

    def __post_init__(self):
        z = _clean_thickness(np.ravel(self.z))
        presence = (z > 0).astype(np.int8)
        order = np.concatenate([np.flatnonzero(presence), np.flatnonzero(presence == 0)])
        presence.setflags(write=False)
        order.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "presence", presence)
        object.__setattr__(self, "m", int(presence.sum()))
        object.__setattr__(self, "positive_index", order)

    @property
    def p(self) -> int:
        return self.z.size

    @property
    def positive_cells(self) -> np.ndarray:
        return self.positive_index[: self.m]

    @property
    def z_positive(self) -> np.ndarray:
        return self.z[self.positive_cells]


# ---------------------------------------------------------------------------
# Regridding
# ---------------------------------------------------------------------------

def regrid_linear(fine_field, fine_grid: SpatialGrid, target: SpatialGrid) -> np.ndarray:
    """Bilinear interpolation of a fine-grid field at the target cell centers.

    Raises :class:`InputError` when the target centers fall outside the fine grid.
    """
    fine = np.asarray(fine_field, dtype=float).reshape(fine_grid.ny, fine_grid.nx)
    pts = target.coords
    fx = (pts[:, 0] - fine_grid.x0) / fine_grid.cell_size_km
    fy = (pts[:, 1] - fine_grid.y0) / fine_grid.cell_size_km
    tol = 1e-9
    if (fx.min() < -tol or fy.min() < -tol
            or fx.max() > fine_grid.nx - 1 + tol or fy.max() > fine_grid.ny - 1 + tol):
        raise InputError("fine grid does not cover the target grid extent")
    fx = np.clip(fx, 0, fine_grid.nx - 1)
    fy = np.clip(fy, 0, fine_grid.ny - 1)
    ix = np.minimum(np.floor(fx).astype(int), max(fine_grid.nx - 2, 0))
    iy = np.minimum(np.floor(fy).astype(int), max(fine_grid.ny - 2, 0))
    tx = fx - ix
    ty = fy - iy
    ix1 = np.minimum(ix + 1, fine_grid.nx - 1)
    iy1 = np.minimum(iy + 1, fine_grid.ny - 1)
    out = ((1 - tx) * (1 - ty) * fine[iy, ix] + tx * (1 - ty) * fine[iy, ix1]
           + (1 - tx) * ty * fine[iy1, ix] + tx * ty * fine[iy1, ix1])
    return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def write_matrix(fh, a) -> None:
    a = np.atleast_2d(a)
    for row in a:
        fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_grid(path) -> SpatialGrid:
    path = Path(path)
    if not path.exists():
        raise InputError(f"grid file not found: {path}")
    tokens = path.read_text().split()
    if len(tokens) != 5:
        raise InputError(f"{path}: expected 'nx ny cell_size_km x0 y0'")
    return SpatialGrid(int(tokens[0]), int(tokens[1]), float(tokens[2]),
                       float(tokens[3]), float(tokens[4]))


def write_grid(path, grid: SpatialGrid) -> None:
    Path(path).write_text(f"{grid.nx} {grid.ny} {_fmt(grid.cell_size_km)} "
                          f"{_fmt(grid.x0)} {_fmt(grid.y0)}\n")


def read_observation(path) -> ObservationField:
    path = Path(path)
    if not path.exists():
        raise InputError(f"observation file not found: {path}")
    try:
        values = np.array(path.read_text().split(), dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry") from exc
    return ObservationField(values)


def write_observation(path, obs) -> None:
    z = obs.z if isinstance(obs, ObservationField) else np.ravel(obs)
    Path(path).write_text("\n".join(_fmt(v) for v in z) + "\n")


def read_ensemble(path):
    """Read ``(DesignMatrix, EnsembleOutput)`` from text or binary form.

    Text: header ``n p d``, n design rows, n output rows.  Binary (``.bin``):
    header in the sidecar ``<path>.hdr``, then little-endian float64 with the
    design block followed by the output block.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"ensemble file not found: {path}")
    if path.suffix == ".bin":
        hdr = Path(str(path) + ".hdr")
        if not hdr.exists():
            raise InputError(f"binary ensemble header not found: {hdr}")
        n, p, d = (int(t) for t in hdr.read_text().split()[:3])
        flat = np.fromfile(path, dtype="<f8")
    else:
        tokens = path.read_text().split()
        if len(tokens) < 3:
            raise InputError(f"{path}: missing 'n p d' header")
        n, p, d = (int(t) for t in tokens[:3])
        try:
            flat = np.array(tokens[3:], dtype=float)
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric entry") from exc
    if flat.size != n * d + n * p:
        raise InputError(f"{path}: expected {n * d + n * p} values, found {flat.size}")
    design = DesignMatrix(flat[: n * d].reshape(n, d))
    ensemble = EnsembleOutput(flat[n * d:].reshape(n, p))
    return design, ensemble


def write_ensemble(path, design: DesignMatrix, ensemble: EnsembleOutput) -> None:
    path = Path(path)
    n, p, d = ensemble.n, ensemble.p, design.d
    if path.suffix == ".bin":
        Path(str(path) + ".hdr").write_text(f"{n} {p} {d}\n")
        np.concatenate([design.rows.ravel(), ensemble.values.ravel()]).astype("<f8").tofile(path)
        return
    with open(path, "w") as fh:
        fh.write(f"{n} {p} {d}\n")
        write_matrix(fh, design.rows)
        write_matrix(fh, ensemble.values)
