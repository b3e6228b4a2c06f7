"""Linear stability of mean-field fixed points and solution-count maps."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _mean_field as mf
from ._pool import ordered_map
from .model import ModelParams

if TYPE_CHECKING:
    from .semiclassical import FixedPoint

MARGINAL_TOL = 1e-9


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def drift_matrix(fp: "FixedPoint", params: ModelParams) -> np.ndarray:
    """4x4 drift matrix ``A`` with ``d/dt u = A u``, ``u = (da, db, da*, db*)``."""
    s = fp.state
    return mf.jacobian(np.complex128(s.alpha), np.complex128(s.beta), mf.coefficients(params))[0]


def classify(
    matrix: np.ndarray | None = None,
    *,
    eigenvalues: np.ndarray | None = None,
    marginal_tol: float = MARGINAL_TOL,
) -> Stability:
    """Stable iff every eigenvalue has real part below ``-marginal_tol``."""
    if eigenvalues is None:
        if matrix is None:
            raise TypeError("classify needs a matrix or its eigenvalues")
        eigenvalues = np.linalg.eigvals(matrix)
    top = float(np.max(np.real(eigenvalues)))
    if top < -marginal_tol:
        return Stability.STABLE
    if top > marginal_tol:
        return Stability.UNSTABLE
    return Stability.MARGINAL


@dataclass
class CountMap:
    """Number of distinct fixed points on an ``(x, F)`` grid.

    Arrays are indexed ``[i_x, i_f]``.  ``flagged`` marks cells where the
    solver returned nothing; those cells carry a count of 0.
    """

    x_axis: str
    x_values: np.ndarray
    f_values: np.ndarray
    total: np.ndarray
    stable: np.ndarray
    flagged: np.ndarray = field(repr=False)

    def rows(self) -> list[tuple[float, float, int, int]]:
        return [
            (float(x), float(f), int(self.total[i, j]), int(self.stable[i, j]))
            for i, x in enumerate(self.x_values)
            for j, f in enumerate(self.f_values)
        ]

    def argmax_x(self, layer: str = "total") -> np.ndarray:
        """x positions of the cells holding the maximal count."""
        grid = getattr(self, layer)
        i, _ = np.nonzero(grid == grid.max())
        return self.x_values[np.unique(i)]


def solution_count_map(
    params: ModelParams,
    x_axis: str,
    x_values: Sequence[float],
    f_values: Sequence[float],
    n_starts: int = 64,
    seed: int = 0,
    threads: int = 1,
) -> CountMap:
    """Count fixed points over a ``delta`` or ``epsilon`` versus drive grid.

    Each cell gets its own seed derived from its index, so the result does not
    depend on evaluation order.
    """
    from .semiclassical import _solve_rows

    if x_axis not in ("delta", "epsilon"):
        raise ValueError("x_axis must be 'delta' or 'epsilon'")
    x_values = np.asarray(x_values, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    if x_values.size == 0 or f_values.size == 0:
        raise ValueError("grids must be non-empty")

    def row(i):
        base = params.replace(**{x_axis: float(x_values[i])})
        rows = [base.with_drive(float(f)) for f in f_values]
        seeds = [seed + i * f_values.size + j for j in range(f_values.size)]
        points = _solve_rows(rows, seeds, n_starts)
        return [len(p) for p in points], [sum(fp.is_stable for fp in p) for p in points]

    counts = ordered_map(row, range(x_values.size), threads)
    total = np.array([c[0] for c in counts], dtype=int)
    stable = np.array([c[1] for c in counts], dtype=int)
    return CountMap(x_axis, x_values, f_values, total, stable, total == 0)


def trsb_response(
    params: ModelParams,
    imj_values: Sequence[float],
    f_in: float,
    n_starts: int = 64,
    seed: int = 0,
) -> list[tuple[float, list["FixedPoint"]]]:
    """All fixed-point branches versus ``Im J`` at a fixed drive."""
    from .semiclassical import sweep_parameter

    return sweep_parameter(params.with_drive(f_in), "j_im", imj_values, n_starts, seed)
