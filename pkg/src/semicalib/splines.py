"""Natural cubic spline regression bases."""

from __future__ import annotations

import numpy as np


class SingularBasisError(ValueError):
    pass


class NaturalSpline:
    """Natural cubic spline basis without intercept, ``dof = len(knots) - 1`` columns.

    Uses the truncated-power construction on inputs rescaled to the boundary
    knots, so the fit is linear beyond them.
    """

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if knots.size < 2 or np.any(np.diff(knots) <= 0):
            raise SingularBasisError("spline knots must be strictly increasing")
        self.knots = knots

    @classmethod
    def from_quantiles(cls, x, dof: int) -> "NaturalSpline":
        if dof < 1:
            raise ValueError("dof must be at least 1")
        x = np.asarray(x, dtype=float)
        probs = np.arange(1, dof) / dof
        knots = np.concatenate([[x.min()], np.quantile(x, probs), [x.max()]])
        return cls(knots)

    @property
    def dof(self) -> int:
        return self.knots.size - 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.knots[0], self.knots[-1]
        xs = (x - lo) / (hi - lo)
        ks = (self.knots - lo) / (hi - lo)
        cols = [xs]
        if ks.size > 2:
            def d(k):
                return ((np.maximum(xs - ks[k], 0.0) ** 3 - np.maximum(xs - ks[-1], 0.0) ** 3)
                        / (ks[-1] - ks[k]))
            last = d(ks.size - 2)
            cols.extend(d(k) - last for k in range(ks.size - 2))
        return np.column_stack(cols)
