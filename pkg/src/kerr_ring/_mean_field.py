"""Vectorised mean-field right-hand side and its linearisation.

Every function here broadcasts over a leading batch axis so that multistart
Newton and grid maps can run thousands of starts in one numpy call.

Equations (rotating frame, one drive tone)::

    da/dt = (-i(D + e + Ua|a|^2 + V|b|^2) - g/2) a + i conj(J) b + sqrt(k) Fa
    db/dt = (-i(D - e + Ub|b|^2 + V|a|^2) - g/2) b + i J a       + sqrt(k) Fb

which are the Heisenberg equations of the hopping Hamiltonian
``-(J a b^dag + conj(J) a^dag b)``.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .model import ModelParams


class Coefficients(NamedTuple):
    """Per-element parameter arrays, all broadcastable to the batch shape."""

    det_a: np.ndarray  # delta + epsilon
    det_b: np.ndarray  # delta - epsilon
    u_a: np.ndarray
    u_b: np.ndarray
    v: np.ndarray
    j: np.ndarray  # complex
    half_gamma: np.ndarray
    drive_a: np.ndarray  # sqrt(kappa) * f_a
    drive_b: np.ndarray

    def take(self, index) -> "Coefficients":
        return Coefficients(*(np.asarray(c)[index] for c in self))


def coefficients(params: ModelParams | Sequence[ModelParams]) -> Coefficients:
    if isinstance(params, ModelParams):
        params = [params]
    rows = [
        (
            p.delta + p.epsilon_eff,
            p.delta - p.epsilon_eff,
            p.u_a,
            p.u_b,
            p.v,
            p.j,
            0.5 * p.gamma,
            np.sqrt(p.kappa) * p.f_a,
            np.sqrt(p.kappa) * p.f_b,
        )
        for p in params
    ]
    cols = list(zip(*rows))
    return Coefficients(
        *(np.asarray(c, dtype=complex if i == 5 else float) for i, c in enumerate(cols))
    )


def rhs(alpha, beta, c: Coefficients):
    na = (alpha * alpha.conj()).real
    nb = (beta * beta.conj()).real
    dalpha = (-1j * (c.det_a + c.u_a * na + c.v * nb) - c.half_gamma) * alpha + 1j * c.j.conj() * beta + c.drive_a
    dbeta = (-1j * (c.det_b + c.u_b * nb + c.v * na) - c.half_gamma) * beta + 1j * c.j * alpha + c.drive_b
    return dalpha, dbeta


def jacobian(alpha, beta, c: Coefficients) -> np.ndarray:
    """Linearisation in the basis (d alpha, d beta, d alpha*, d beta*).

    Returns shape ``batch + (4, 4)``; the lower blocks are the complex
    conjugates of the upper ones with the column blocks swapped.
    """
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    shape = np.broadcast(alpha, beta, *c).shape
    na = (alpha * alpha.conj()).real
    nb = (beta * beta.conj()).real
    m = np.empty(shape + (2, 2), dtype=complex)
    n = np.empty(shape + (2, 2), dtype=complex)
    m[..., 0, 0] = -1j * (c.det_a + 2 * c.u_a * na + c.v * nb) - c.half_gamma
    m[..., 0, 1] = -1j * c.v * alpha * beta.conj() + 1j * c.j.conj()
    m[..., 1, 0] = -1j * c.v * alpha.conj() * beta + 1j * c.j
    m[..., 1, 1] = -1j * (c.det_b + 2 * c.u_b * nb + c.v * na) - c.half_gamma
    n[..., 0, 0] = -1j * c.u_a * alpha**2
    n[..., 0, 1] = -1j * c.v * alpha * beta
    n[..., 1, 0] = -1j * c.v * alpha * beta
    n[..., 1, 1] = -1j * c.u_b * beta**2
    out = np.empty(shape + (4, 4), dtype=complex)
    out[..., :2, :2] = m
    out[..., :2, 2:] = n
    out[..., 2:, :2] = n.conj()
    out[..., 2:, 2:] = m.conj()
    return out


def newton(alpha0, beta0, c: Coefficients, tol: float = 1e-12, max_iter: int = 200, max_step: float = 2.0):
    """Batched Newton on the fixed-point equations.

    Returns ``(alpha, beta, residual, converged)``.  Steps are clipped to
    ``max_step`` in amplitude so far-off starts cannot overflow.
    """
    alpha = np.array(alpha0, dtype=complex)
    beta = np.array(beta0, dtype=complex)
    shape = np.broadcast(alpha, beta, *c).shape
    alpha = np.broadcast_to(alpha, shape).copy()
    beta = np.broadcast_to(beta, shape).copy()
    c = Coefficients(*(np.broadcast_to(x, shape) for x in c))
    active = np.ones(shape, dtype=bool)
    residual = np.full(shape, np.inf)
    for _ in range(max_iter):
        idx = np.nonzero(active)
        if not idx[0].size:
            break
        ci = c.take(idx)
        a, b = alpha[idx], beta[idx]
        fa, fb = rhs(a, b, ci)
        res = np.sqrt(np.abs(fa) ** 2 + np.abs(fb) ** 2)
        residual[idx] = res
        done = res <= tol
        bad = ~np.isfinite(res)
        keep = ~(done | bad)
        if bad.any():
            residual[tuple(i[bad] for i in idx)] = np.inf
        active[tuple(i[done | bad] for i in idx)] = False
        if not keep.any():
            continue
        sub = tuple(i[keep] for i in idx)
        a, b, fa, fb = a[keep], b[keep], fa[keep], fb[keep]
        jac = jacobian(a, b, ci.take(keep))
        f = np.stack([fa, fb, fa.conj(), fb.conj()], axis=-1)
        try:
            step = np.linalg.solve(jac, -f[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(j_, -f_, rcond=None)[0] for j_, f_ in zip(jac, f)])
        size = np.sqrt(np.abs(step[..., 0]) ** 2 + np.abs(step[..., 1]) ** 2)
        scale = np.where(size > max_step, max_step / np.maximum(size, 1e-300), 1.0)
        alpha[sub] = a + scale * step[..., 0]
        beta[sub] = b + scale * step[..., 1]
    # final residual for anything still iterating
    idx = np.nonzero(active)
    if idx[0].size:
        fa, fb = rhs(alpha[idx], beta[idx], c.take(idx))
        residual[idx] = np.sqrt(np.abs(fa) ** 2 + np.abs(fb) ** 2)
    residual = np.where(np.isfinite(residual), residual, np.inf)
    return alpha, beta, residual, residual <= tol


def population_bound(c: Coefficients) -> np.ndarray:
    """Upper bound on ``n_a + n_b`` at any fixed point.

    Energy balance at a fixed point gives ``g N = Re(conj(Fa) a + conj(Fb) b)``
    with ``g = gamma/2``; Cauchy-Schwarz then bounds ``N``.
    """
    drive2 = np.abs(c.drive_a) ** 2 + np.abs(c.drive_b) ** 2
    return drive2 / np.maximum(c.half_gamma, 1e-300) ** 2


def amplitudes_from_populations(x, y, c: Coefficients):
    """Amplitudes that solve the stationary equations for frozen populations.

    With ``n_a = x`` and ``n_b = y`` held fixed the equations are linear in
    ``(a, b)``; the system determinant never vanishes when ``gamma > 0``.
    """
    ma = 1j * (c.det_a + c.u_a * x + c.v * y) + c.half_gamma
    mb = 1j * (c.det_b + c.u_b * y + c.v * x) + c.half_gamma
    det = ma * mb + np.abs(c.j) ** 2
    a = (mb * c.drive_a + 1j * c.j.conj() * c.drive_b) / det
    b = (ma * c.drive_b + 1j * c.j * c.drive_a) / det
    return a, b, ma, mb, det


def population_roots(c: Coefficients, n_grid: int = 20, max_iter: int = 60, tol: float = 1e-9):
    """Fixed-point candidates from Newton in population space.

    Solves ``|a(x, y)|^2 = x, |b(x, y)|^2 = y`` from a grid of starts covering
    the admissible population range (denser near zero).  Returns amplitude
    arrays with shape ``batch + (n_grid**2,)`` and a mask of converged entries.
    """
    bound = population_bound(c)[..., None]
    t = np.linspace(0.0, 1.0, n_grid) ** 2
    gx, gy = (g.ravel() for g in np.meshgrid(t, t))
    c = Coefficients(*(np.asarray(v)[..., None] for v in c))
    x = gx * bound
    y = gy * bound
    for _ in range(max_iter):
        a, b, ma, mb, det = amplitudes_from_populations(x, y, c)
        g1 = np.abs(a) ** 2 - x
        g2 = np.abs(b) ** 2 - y
        # derivatives of the frozen-population amplitudes
        ddet_x = 1j * c.u_a * mb + ma * 1j * c.v
        ddet_y = 1j * c.v * mb + ma * 1j * c.u_b
        da_x = (1j * c.v * c.drive_a - a * ddet_x) / det
        da_y = (1j * c.u_b * c.drive_a - a * ddet_y) / det
        db_x = (1j * c.u_a * c.drive_b - b * ddet_x) / det
        db_y = (1j * c.v * c.drive_b - b * ddet_y) / det
        j11 = 2 * (a.conj() * da_x).real - 1
        j12 = 2 * (a.conj() * da_y).real
        j21 = 2 * (b.conj() * db_x).real
        j22 = 2 * (b.conj() * db_y).real - 1
        jdet = j11 * j22 - j12 * j21
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = (-g1 * j22 + g2 * j12) / jdet
            dy = (-g2 * j11 + g1 * j21) / jdet
        dx = np.where(np.isfinite(dx), dx, 0.0)
        dy = np.where(np.isfinite(dy), dy, 0.0)
        x = np.clip(x + dx, 0.0, bound)
        y = np.clip(y + dy, 0.0, bound)
    a, b, *_ = amplitudes_from_populations(x, y, c)
    err = np.abs(np.abs(a) ** 2 - x) + np.abs(np.abs(b) ** 2 - y)
    return a, b, err <= tol * np.maximum(1.0, bound)
