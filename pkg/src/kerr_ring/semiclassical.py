"""Mean-field dynamics, fixed points and drive sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import _mean_field as mf
from .exceptions import DegenerateState, StepSizeUnderflow
from .model import ModelParams
from .stability import Stability, classify

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200
DEDUP_RADIUS = 1e-6
STATE_EQ_RTOL = 1e-8
START_RADIUS = 4.0
DEFAULT_STARTS = 64
POPULATION_GRID = 20


@dataclass(frozen=True)
class SemiclassicalState:
    alpha: complex
    beta: complex

    @property
    def n_alpha(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def n_beta(self) -> float:
        return abs(self.beta) ** 2

    @classmethod
    def from_populations(cls, n_alpha: float, n_beta: float) -> "SemiclassicalState":
        """Zero-phase amplitudes with the given photon numbers."""
        return cls(complex(math.sqrt(n_alpha)), complex(math.sqrt(n_beta)))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    final_residual: float

    def __post_init__(self):
        if not (len(self.times) == len(self.alpha) == len(self.beta)):
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n_alpha(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2

    @property
    def n_beta(self) -> np.ndarray:
        return np.abs(self.beta) ** 2

    @property
    def states(self) -> list[SemiclassicalState]:
        return [SemiclassicalState(complex(a), complex(b)) for a, b in zip(self.alpha, self.beta)]

    @property
    def final(self) -> SemiclassicalState:
        return SemiclassicalState(complex(self.alpha[-1]), complex(self.beta[-1]))


@dataclass(frozen=True)
class FixedPoint:
    state: SemiclassicalState
    residual_norm: float
    stability: Stability
    f_in: float

    @property
    def n_alpha(self) -> float:
        return self.state.n_alpha

    @property
    def n_beta(self) -> float:
        return self.state.n_beta

    @property
    def is_stable(self) -> bool:
        return self.stability is Stability.STABLE


def eom_rhs(state: SemiclassicalState, params: ModelParams) -> tuple[complex, complex]:
    """Time derivatives ``(d alpha/dt, d beta/dt)`` of the mean-field amplitudes."""
    da, db = mf.rhs(np.complex128(state.alpha), np.complex128(state.beta), mf.coefficients(params))
    return complex(da[0]), complex(db[0])


def steady_state_residual(state: SemiclassicalState, params: ModelParams) -> float:
    da, db = eom_rhs(state, params)
    return math.hypot(abs(da), abs(db))


def integrate(
    state0: SemiclassicalState,
    params: ModelParams,
    t_end: float,
    tol: float = 1e-9,
    n_samples: int | None = None,
) -> Trajectory:
    """Adaptive Dormand-Prince (8th order) integration of the mean-field equations.

    With ``n_samples`` the trajectory is reported on a uniform grid; otherwise
    every accepted solver step is kept.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    c = mf.coefficients(params)

    def f(_t, y):
        da, db = mf.rhs(np.complex128(y[0] + 1j * y[1]), np.complex128(y[2] + 1j * y[3]), c)
        return [da[0].real, da[0].imag, db[0].real, db[0].imag]

    y0 = [state0.alpha.real, state0.alpha.imag, state0.beta.real, state0.beta.imag]
    t_eval = None if n_samples is None else np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(f, (0.0, t_end), y0, method="DOP853", rtol=tol, atol=tol * 1e-2, t_eval=t_eval)
    if sol.status != 0:
        raise StepSizeUnderflow(sol.message)
    alpha = sol.y[0] + 1j * sol.y[1]
    beta = sol.y[2] + 1j * sol.y[3]
    final = SemiclassicalState(complex(alpha[-1]), complex(beta[-1]))
    return Trajectory(sol.t, alpha, beta, steady_state_residual(final, params))


def asymmetry_ratio(state: SemiclassicalState) -> float:
    """Population imbalance ``(n_a - n_b) / (n_a + n_b)``."""
    total = state.n_alpha + state.n_beta
    if total == 0:
        raise DegenerateState("both mode populations are zero")
    return (state.n_alpha - state.n_beta) / total


def state_equation_residuals(state: SemiclassicalState, params: ModelParams) -> tuple[float, float]:
    """Relative violation of the two real "state equations".

    Multiplying each stationary amplitude equation by its conjugate gives
    ``kappa |F|^2 = |mu|^2 n_a + |J|^2 n_b - 2 Re(mu a conj(iJ* b))`` and the
    mirrored equation for mode b.
    """
    a, b = state.alpha, state.beta
    na, nb = state.n_alpha, state.n_beta
    j = params.j
    eps = params.epsilon_eff
    mu = 1j * (params.delta + eps + params.u_a * na + params.v * nb) + params.gamma / 2
    chi = 1j * (params.delta - eps + params.u_b * nb + params.v * na) + params.gamma / 2
    # an undriven mode can sit at ~1e-100, so errors are measured against the total drive power
    power = params.kappa * (params.f_a**2 + params.f_b**2)
    out = []
    for m, x, y, coupling, f in (
        (mu, a, b, 1j * j.conjugate(), params.f_a),
        (chi, b, a, 1j * j, params.f_b),
    ):
        lhs = params.kappa * f * f
        diag = abs(m) ** 2 * abs(x) ** 2 + abs(j) ** 2 * abs(y) ** 2
        rhs = diag - 2.0 * (m * x * (coupling * y).conjugate()).real
        scale = max(power, abs(lhs), diag)
        out.append(abs(lhs - rhs) / scale if scale > 0 else 0.0)
    return out[0], out[1]


def random_starts(n_starts: int, seed: int, radius: float = START_RADIUS) -> tuple[np.ndarray, np.ndarray]:
    """Seeded amplitudes with ``|alpha|, |beta|`` uniform on ``[0, radius]``."""
    rng = np.random.default_rng(seed)
    mag = radius * rng.random((2, n_starts))
    phase = 2 * np.pi * rng.random((2, n_starts))
    z = mag * np.exp(1j * phase)
    return z[0], z[1]


def _solve_rows(
    rows: Sequence[ModelParams],
    seeds: Sequence[int],
    n_starts: int,
    warm: Sequence[Sequence[SemiclassicalState]] | None = None,
) -> list[list[FixedPoint]]:
    """Multistart Newton for several parameter sets in one batched call."""
    warm = warm or [[] for _ in rows]
    coeff = mf.coefficients(rows)
    # Random starts alone miss small-basin (mostly unstable) branches, so the
    # population-space roots are added as further starts.
    if np.all(coeff.half_gamma > 0):
        pa, pb, pok = mf.population_roots(coeff, n_grid=POPULATION_GRID)
        extra_pop = []
        for r in range(len(rows)):
            a, b = pa[r][pok[r]], pb[r][pok[r]]
            key = np.round(np.stack([a.real, a.imag, b.real, b.imag], axis=1), 7)
            _, first = np.unique(key, axis=0, return_index=True)
            first.sort()
            extra_pop.append((a[first], b[first]))
    else:
        extra_pop = [(np.empty(0), np.empty(0)) for _ in rows]
    width = 1 + n_starts + max(len(w) + len(e[0]) for w, e in zip(warm, extra_pop))
    a0 = np.zeros((len(rows), width), dtype=complex)
    b0 = np.zeros((len(rows), width), dtype=complex)
    for r, (seed, extra) in enumerate(zip(seeds, warm)):
        ra, rb = random_starts(n_starts, seed)
        # column 0 is the origin; unused slots repeat it harmlessly
        a0[r, 1 : n_starts + 1], b0[r, 1 : n_starts + 1] = ra, rb
        k = n_starts + 1
        for s in extra:
            a0[r, k], b0[r, k] = s.alpha, s.beta
            k += 1
        ea, eb = extra_pop[r]
        a0[r, k : k + len(ea)], b0[r, k : k + len(ea)] = ea, eb
    coeff = mf.Coefficients(*(x[:, None] for x in coeff))
    alpha, beta, residual, ok = mf.newton(a0, b0, coeff, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER)

    out: list[list[FixedPoint]] = []
    for r, p in enumerate(rows):
        found: list[tuple[complex, complex, float]] = []
        for k in np.nonzero(ok[r])[0]:
            a, b = complex(alpha[r, k]), complex(beta[r, k])
            if any(math.hypot(abs(a - fa), abs(b - fb)) < DEDUP_RADIUS for fa, fb, _ in found):
                continue
            if max(state_equation_residuals(SemiclassicalState(a, b), p)) > STATE_EQ_RTOL:
                continue
            found.append((a, b, float(residual[r, k])))
        points = []
        if found:
            arr_a = np.array([f[0] for f in found])
            arr_b = np.array([f[1] for f in found])
            eig = np.linalg.eigvals(mf.jacobian(arr_a, arr_b, mf.coefficients(p)))
            for (a, b, res), ev in zip(found, eig):
                points.append(FixedPoint(SemiclassicalState(a, b), res, classify(eigenvalues=ev), p.f_a))
        points.sort(key=lambda fp: (round(fp.n_alpha + fp.n_beta, 9), fp.n_alpha))
        out.append(points)
    return out


def find_steady_states(
    params: ModelParams,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    warm_starts: Iterable[SemiclassicalState] = (),
) -> list[FixedPoint]:
    """All fixed points reachable by Newton from seeded random starts.

    Results are deduplicated, verified against the state equations and
    labelled with their linear stability.  Non-converging starts are dropped.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    return _solve_rows([params], [seed], n_starts, [list(warm_starts)])[0]


def sweep_drive(
    params: ModelParams,
    f_values: Sequence[float],
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
) -> list[tuple[float, list[FixedPoint]]]:
    """Fixed points along a drive sweep (``f_a = f_b = F``).

    Each drive value is warm-started from the previous value's solutions in
    addition to fresh random starts, so branches are followed up to their folds
    and new branches are still discovered past them.
    """
    if len(f_values) == 0:
        raise ValueError("f_values must be non-empty")
    out = []
    previous: list[SemiclassicalState] = []
    for i, f in enumerate(f_values):
        p = params.with_drive(float(f))
        points = find_steady_states(p, n_starts, seed + i, previous)
        out.append((float(f), points))
        previous = [fp.state for fp in points]
    return out


def sweep_parameter(
    params: ModelParams,
    name: str,
    values: Sequence[float],
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
) -> list[tuple[float, list[FixedPoint]]]:
    """Warm-started continuation in ``delta``, ``epsilon`` or ``j_im``."""
    if name in ("f_in", "f"):
        return sweep_drive(params, values, n_starts, seed)
    if name not in ("delta", "epsilon", "j_im"):
        raise ValueError(f"cannot sweep {name!r}")
    out = []
    previous: list[SemiclassicalState] = []
    for i, x in enumerate(values):
        p = params.replace(**{name: float(x)})
        points = find_steady_states(p, n_starts, seed + i, previous)
        out.append((float(x), points))
        previous = [fp.state for fp in points]
    return out


def calibrate_collapse_drive(
    params: ModelParams,
    f_values: Sequence[float] | None = None,
    initial: tuple[float, float] = (6.0, 0.0),
    t_end: float = 200.0,
    collapse_tol: float = 0.05,
    asymmetric_min: float = 0.2,
) -> float | None:
    """Smallest drive where cross-Kerr pulls an asymmetric start to a symmetric state.

    A drive qualifies when the run with ``params.v`` ends with
    ``|dn/n| < collapse_tol`` while the same run with ``v = 0`` keeps
    ``|dn/n| > asymmetric_min``.  Returns ``None`` when nothing qualifies.
    """
    if f_values is None:
        f_values = np.round(np.arange(1.5, 3.5 + 1e-9, 0.05), 10)
    state0 = SemiclassicalState.from_populations(*initial)
    for f in f_values:
        p = params.with_drive(float(f))
        with_v = integrate(state0, p, t_end).final
        without_v = integrate(state0, p.replace(v=0.0), t_end).final
        if abs(asymmetry_ratio(with_v)) < collapse_tol and abs(asymmetry_ratio(without_v)) > asymmetric_min:
            return float(f)
    return None


def branch_rows(results: Sequence[tuple[float, Sequence[FixedPoint]]]) -> list[tuple]:
    """Flatten sweep output to ``(x, re_a, im_a, re_b, im_b, n_a, n_b, stability)`` rows."""
    rows = []
    for x, points in results:
        for fp in points:
            s = fp.state
            rows.append((x, s.alpha.real, s.alpha.imag, s.beta.real, s.beta.imag, fp.n_alpha, fp.n_beta, fp.stability.value))
    return rows
