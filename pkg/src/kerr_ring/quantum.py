"""Lindblad treatment of the two-mode resonator on a truncated Fock space.

Operators are ``scipy.sparse`` matrices on the product basis
``|n_a, n_b>`` with flat index ``n_a * (n_max + 1) + n_b``.  Density
matrices are dense ``ndarray`` objects; superoperators act on the row-major
flattening ``rho.ravel()``.
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import ztrsyl
from scipy.stats import norm

from ._pool import ordered_map
from .exceptions import DegenerateVariance, DimensionTooLarge, SingularSolve
from .model import ModelParams

DEFAULT_N_MAX = 12
DEFAULT_MAX_DIM = 100_000
MAX_DIM_ENV = "KERR_RING_MAX_DIM"


@dataclass(frozen=True)
class FockSpace:
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.local_dim**2

    def index(self, n_a: int, n_b: int) -> int:
        return n_a * self.local_dim + n_b

    def basis_state(self, n_a: int, n_b: int) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(n_a, n_b)] = 1.0
        return psi

    @cached_property
    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        """Photon numbers ``(n_a, n_b)`` of every basis state."""
        n = np.arange(self.local_dim, dtype=float)
        return np.repeat(n, self.local_dim), np.tile(n, self.local_dim)


def max_liouvillian_dim() -> int:
    value = os.environ.get(MAX_DIM_ENV)
    return int(value) if value else DEFAULT_MAX_DIM


def _check_dim(space: FockSpace, limit: int | None = None) -> None:
    limit = max_liouvillian_dim() if limit is None else limit
    if space.dim**2 > limit:
        raise DimensionTooLarge(space.dim**2, limit)


def ladder_operators(space: FockSpace) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    local = sp.diags(np.sqrt(np.arange(1, space.local_dim, dtype=float)), 1, format="csr")
    eye = sp.identity(space.local_dim, format="csr")
    return sp.kron(local, eye, format="csr"), sp.kron(eye, local, format="csr")


def hamiltonian(params: ModelParams, space: FockSpace) -> sp.csr_matrix:
    """Rotating-frame Hamiltonian.

    ``H = D(na + nb) + e(na - nb) + U/2 (a^+2 a^2 + b^+2 b^2) + V na nb
    - (J a b^+ + J* a^+ b) + i sqrt(k) (Fa a^+ + Fb b^+ - h.c.)``

    The hopping and drive signs are those whose Heisenberg equations are the
    mean-field equations in :mod:`kerr_ring.semiclassical`, so ``<a>`` and
    ``alpha`` share a phase convention.  Hermitian by construction.
    """
    a, b = ladder_operators(space)
    na, nb = space.occupations
    eps = params.epsilon_eff
    diag = (
        params.delta * (na + nb)
        + eps * (na - nb)
        + 0.5 * params.u_a * na * (na - 1)
        + 0.5 * params.u_b * nb * (nb - 1)
        + params.v * na * nb
    )
    sk = math.sqrt(params.kappa)
    # H = diag + X + X^+ with X holding one half of every off-diagonal pair
    x = -params.j * (b.conj().T @ a) + 1j * sk * (params.f_a * a.conj().T + params.f_b * b.conj().T)
    x = sp.csr_matrix(x, dtype=complex)
    return (sp.diags(diag.astype(complex)) + x + x.conj().T).tocsr()


@dataclass
class Liouvillian:
    """Generator ``L rho = -i[H, rho] + sum_k r_k D[c_k] rho``."""

    space: FockSpace
    hamiltonian: sp.csr_matrix
    jumps: list[tuple[float, sp.csr_matrix]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.space.dim**2

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Sparse superoperator on row-major ``vec(rho)``."""
        _check_dim(self.space)
        d = self.space.dim
        eye = sp.identity(d, format="csr")
        h = self.hamiltonian
        out = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
        for rate, c in self.jumps:
            cdc = (c.conj().T @ c).tocsr()
            out = out + rate * (sp.kron(c, c.conj()) - 0.5 * sp.kron(cdc, eye) - 0.5 * sp.kron(eye, cdc.T))
        return out.tocsr()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        h = self.hamiltonian
        out = -1j * (h @ rho - (h.T @ rho.T).T)
        for rate, c in self.jumps:
            cdc = c.conj().T @ c
            crho = c @ rho
            out = out + rate * ((c.conj() @ crho.T).T - 0.5 * (cdc @ rho) - 0.5 * (cdc.T @ rho.T).T)
        return out


def liouvillian(params: ModelParams, space: FockSpace, max_dim: int | None = None) -> Liouvillian:
    """Loss ``gamma(1 + n_th)``, thermal gain ``gamma n_th`` and dephasing ``gamma_phi`` on each mode.

    The per-mode loss rate equals ``gamma`` so that a coherent amplitude decays
    at ``gamma/2``, the damping used in the mean-field equations.
    """
    _check_dim(space, max_dim)
    h = hamiltonian(params, space)
    jumps = []
    for c in ladder_operators(space):
        if params.gamma > 0:
            jumps.append((params.gamma * (1 + params.n_th), c))
        if params.gamma > 0 and params.n_th > 0:
            jumps.append((params.gamma * params.n_th, c.conj().T.tocsr()))
        if params.gamma_phi > 0:
            jumps.append((params.gamma_phi, (c.conj().T @ c).tocsr()))
    return Liouvillian(space, h, jumps)


def steady_state(
    liouv: Liouvillian,
    tol: float = 1e-10,
    shift: float | None = None,
    max_restarts: int = 4,
) -> np.ndarray:
    """Unique stationary density matrix of ``liouv``.

    The generator is split as ``S + J`` with ``S rho = K rho + rho K^+``
    (``K = -iH - 1/2 sum r c^+c - s/2``) and ``J`` the jump terms plus ``s``.
    ``S`` is inverted exactly through one Schur factorisation of ``K``, and
    GMRES solves for the fixed point of the trace-preserving map
    ``sigma -> J(-S^{-1} sigma)``; the state is ``rho ~ -S^{-1} sigma``.
    This avoids factorising the ``dim^2`` superoperator.
    """
    d = liouv.space.dim
    h = liouv.hamiltonian.toarray()
    jumps = [(r, c.toarray()) for r, c in liouv.jumps]
    if shift is None:
        shift = 0.5 * max([r for r, _ in jumps], default=1.0)
    k = -1j * h - 0.5 * shift * np.eye(d)
    for r, c in jumps:
        k -= 0.5 * r * (c.conj().T @ c)
    t, q = sla.schur(k, output="complex")
    qh = q.conj().T

    def s_inv(x):
        y, scale, info = ztrsyl(t, t, qh @ x @ q, trana="N", tranb="C", isgn=1)
        if info < 0:
            raise SingularSolve(f"triangular Sylvester solve failed (info={info})")
        return q @ (y / scale) @ qh

    def jump_map(x):
        out = shift * x
        for r, c in jumps:
            out = out + r * (c @ x @ c.conj().T)
        return out

    ref = np.eye(d, dtype=complex) / d

    def matvec(v):
        s = v.reshape(d, d)
        return (s - jump_map(-s_inv(s)) + ref * np.trace(s)).ravel()

    op = spla.LinearOperator((d * d, d * d), matvec=matvec, dtype=complex)
    sigma = ref.ravel()
    rho = None
    for _ in range(max_restarts):
        sigma, info = spla.gmres(op, ref.ravel(), x0=sigma, rtol=1e-14, atol=0.0, restart=200, maxiter=4)
        rho = -s_inv(sigma.reshape(d, d))
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if not np.isfinite(tr) or abs(tr) < 1e-300:
            raise SingularSolve("steady-state trace vanished")
        rho = rho / tr
        if np.abs(liouv.apply(rho)).max() < tol:
            return rho
    raise SingularSolve(
        f"steady-state residual {np.abs(liouv.apply(rho)).max():.2e} above {tol:.0e}; "
        "the generator may have more than one stationary state"
    )


def evolve(rho0: np.ndarray, liouv: Liouvillian, t: float) -> np.ndarray:
    """``exp(L t) rho0`` via the truncated-Taylor action of the sparse generator."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.array(rho0, dtype=complex, copy=True)
    d = liouv.space.dim
    vec = spla.expm_multiply(liouv.matrix * t, np.asarray(rho0, dtype=complex).ravel())
    rho = vec.reshape(d, d)
    return 0.5 * (rho + rho.conj().T)


def coherent_state(space: FockSpace, alpha: complex, beta: complex = 0.0) -> np.ndarray:
    """Truncated, renormalised product coherent state as a density matrix."""
    n = np.arange(space.local_dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])

    def amps(z):
        if z == 0:
            out = np.zeros(space.local_dim, dtype=complex)
            out[0] = 1.0
            return out
        return np.exp(-abs(z) ** 2 / 2 + n * np.log(complex(z)) - 0.5 * log_fact)

    psi = np.kron(amps(alpha), amps(beta))
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def thermal_state(space: FockSpace, n_th: float) -> np.ndarray:
    n = np.arange(space.local_dim, dtype=float)
    p = (n_th / (1 + n_th)) ** n / (1 + n_th) if n_th > 0 else (n == 0).astype(float)
    return np.diag(np.kron(p, p).astype(complex))


def _local_dim(rho: np.ndarray) -> int:
    d = math.isqrt(rho.shape[0])
    if d * d != rho.shape[0]:
        raise ValueError("density matrix dimension is not a square of the local dimension")
    return d


def photon_distribution(rho: np.ndarray, mode: str) -> np.ndarray:
    """``P(n)`` of one mode: the other mode is traced out, then the diagonal taken."""
    d = _local_dim(rho)
    r = rho.reshape(d, d, d, d)
    if mode == "a":
        reduced = np.einsum("ijkj->ik", r)
    elif mode == "b":
        reduced = np.einsum("ijil->jl", r)
    else:
        raise ValueError("mode must be 'a' or 'b'")
    return np.real(np.diagonal(reduced)).copy()


def mean_number(rho: np.ndarray, mode: str) -> float:
    p = photon_distribution(rho, mode)
    return float(p @ np.arange(p.size))


def _occupation_probs(rho: np.ndarray):
    d = _local_dim(rho)
    n = np.arange(d, dtype=float)
    return np.real(np.diagonal(rho)), np.repeat(n, d), np.tile(n, d)


def mean_delta_n(rho: np.ndarray) -> float:
    p, na, nb = _occupation_probs(rho)
    return float(p @ (na - nb))


def variance_delta_n(rho: np.ndarray) -> float:
    """``<(n_a - n_b)^2> - <n_a - n_b>^2`` (the operator is diagonal in Fock space)."""
    p, na, nb = _occupation_probs(rho)
    dn = na - nb
    mean = p @ dn
    return float(max(p @ (dn - mean) ** 2, 0.0))


def pdf(mu: float, sigma2: float, x):
    """Normal density with mean ``mu`` and variance ``sigma2``."""
    if not sigma2 > 0:
        raise DegenerateVariance(f"variance must be positive, got {sigma2}")
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mu) ** 2) / (2 * sigma2)) / np.sqrt(2 * np.pi * sigma2)


def sem_sigma(sigma_shot: float, kappa: float, tau: float) -> float:
    """Standard error of a time-averaged readout, ``sigma_shot / sqrt(kappa tau)``."""
    kt = kappa * tau
    if not kt > 0:
        raise ValueError("kappa * tau must be positive")
    return sigma_shot / math.sqrt(kt)


@dataclass(frozen=True)
class StatisticsReport:
    p_a: np.ndarray
    p_b: np.ndarray
    mean_a: float
    mean_b: float
    mean_delta_n: float
    var_delta_n: float
    kappa: float
    snr: float | None = None

    @property
    def sigma_shot(self) -> float:
        return math.sqrt(self.var_delta_n)

    def sem(self, tau: float) -> float:
        return sem_sigma(self.sigma_shot, self.kappa, tau)

    def pdf_variance(self, tau: float | None = None) -> float:
        """Single-shot variance, or its time-averaged value when ``tau`` is given."""
        return self.var_delta_n if tau is None else self.sem(tau) ** 2

    def pdfs(self, x, tau: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        s2 = self.pdf_variance(tau)
        return pdf(self.mean_a, s2, x), pdf(self.mean_b, s2, x)

    def snr_against(self, reference: "StatisticsReport", tau: float) -> float:
        return abs(self.mean_delta_n - reference.mean_delta_n) / self.sem(tau)


def statistics(
    rho: np.ndarray,
    kappa: float,
    reference: StatisticsReport | None = None,
    tau: float | None = None,
) -> StatisticsReport:
    p_a = photon_distribution(rho, "a")
    p_b = photon_distribution(rho, "b")
    n = np.arange(p_a.size)
    report = StatisticsReport(
        p_a, p_b, float(p_a @ n), float(p_b @ n), mean_delta_n(rho), variance_delta_n(rho), kappa
    )
    if reference is not None and tau is not None:
        report = StatisticsReport(**{**report.__dict__, "snr": report.snr_against(reference, tau)})
    return report


def pdf_overlap(report: StatisticsReport, tau: float | None = None, n_points: int = 20001) -> float:
    """``integral min(PDF_a, PDF_b) dx`` on a grid spanning both densities."""
    s = math.sqrt(report.pdf_variance(tau))
    lo = min(report.mean_a, report.mean_b) - 12 * s
    hi = max(report.mean_a, report.mean_b) + 12 * s
    x = np.linspace(lo, hi, n_points)
    fa, fb = report.pdfs(x, tau)
    return float(np.trapezoid(np.minimum(fa, fb), x))


def solve_statistics(params: ModelParams, space: FockSpace | None = None) -> tuple[np.ndarray, StatisticsReport]:
    space = space or FockSpace()
    rho = steady_state(liouvillian(params, space))
    return rho, statistics(rho, params.kappa)


def drive_sweep(
    params: ModelParams,
    f_values: Sequence[float],
    space: FockSpace | None = None,
    threads: int = 1,
) -> list[StatisticsReport]:
    """Steady-state statistics at each drive ``f_a = f_b = F``."""
    space = space or FockSpace()
    return ordered_map(lambda f: solve_statistics(params.with_drive(float(f)), space)[1], f_values, threads)


@dataclass
class SNRMap:
    noise_kind: str
    tau_values: np.ndarray
    noise_values: np.ndarray
    snr: np.ndarray  # [i_noise, i_tau]
    signal: np.ndarray  # |<dn>_signal - <dn>_null| per noise value
    sigma_shot: np.ndarray
    flagged: np.ndarray  # per noise value
    kappa: float = 1.0

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(n), float(self.snr[i, j]))
            for i, n in enumerate(self.noise_values)
            for j, t in enumerate(self.tau_values)
        ]

    def threshold_tau(self, level: float = 5.0) -> np.ndarray:
        """``kappa * tau`` at which the SNR of each noise row reaches ``level``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (level * self.sigma_shot / self.signal) ** 2


def snr_map(
    params: ModelParams,
    tau_values: Sequence[float],
    noise_values: Sequence[float],
    noise_kind: str,
    space: FockSpace | None = None,
    threads: int = 1,
) -> SNRMap:
    """SNR of the ``Im J`` signal over an integration-time / noise grid.

    ``SNR = |<dn>_signal - <dn>_null| / (sigma_shot / sqrt(kappa tau))`` with
    the signal at ``params.j_im``, the null at ``j_im = 0`` and ``sigma_shot``
    from the signal state.  Steady states do not depend on ``tau``, so each
    noise value needs two solves.
    """
    field_name = {"thermal": "n_th", "dephasing": "gamma_phi"}.get(noise_kind)
    if field_name is None:
        raise ValueError("noise_kind must be 'thermal' or 'dephasing'")
    tau_values = np.asarray(tau_values, dtype=float)
    noise_values = np.asarray(noise_values, dtype=float)
    if tau_values.size == 0 or noise_values.size == 0:
        raise ValueError("grids must be non-empty")
    space = space or FockSpace()
    snr = np.full((noise_values.size, tau_values.size), np.nan)
    signal = np.full(noise_values.size, np.nan)
    sigma = np.full(noise_values.size, np.nan)
    flagged = np.zeros(noise_values.size, dtype=bool)

    def solve(noise):
        p = params.replace(**{field_name: float(noise)})
        try:
            _, sig = solve_statistics(p, space)
            _, null = solve_statistics(p.replace(j_im=0.0), space)
        except SingularSolve:
            return None
        return abs(sig.mean_delta_n - null.mean_delta_n), sig.sigma_shot

    for i, res in enumerate(ordered_map(solve, noise_values, threads)):
        if res is None:
            flagged[i] = True
            continue
        signal[i], sigma[i] = res
        snr[i] = [signal[i] / sem_sigma(sigma[i], params.kappa, t) for t in tau_values]
    return SNRMap(noise_kind, tau_values, noise_values, snr, signal, sigma, flagged, params.kappa)


def undriven_spectrum(params: ModelParams, v_values: Sequence[float], n_total: int) -> list[tuple[float, np.ndarray]]:
    """Exact eigenvalues in the ``n_a + n_b = n_total`` sector versus cross-Kerr.

    Uses lab-frame mode frequencies ``omega0 +- epsilon`` (``delta`` stands in
    for ``omega0`` when the latter is unset).  The drive is ignored: without
    it total photon number is conserved and the sector block is exact.
    """
    if n_total < 0:
        raise ValueError("n_total must be >= 0")
    out = []
    for v in v_values:
        h = _sector_hamiltonian(params.replace(v=float(v)), n_total)
        out.append((float(v), np.linalg.eigvalsh(h)))
    return out


def mean_field_spectrum(params: ModelParams, v_values: Sequence[float], n_total: int) -> list[tuple[float, np.ndarray]]:
    """Diagonal energies ``E(n_a, n_total - n_a)`` of the same sector, sorted."""
    out = []
    for v in v_values:
        h = _sector_hamiltonian(params.replace(v=float(v)), n_total)
        out.append((float(v), np.sort(np.real(np.diagonal(h)))))
    return out


def _sector_hamiltonian(params: ModelParams, n_total: int) -> np.ndarray:
    w0 = params.omega0 if params.omega0 is not None else params.delta
    eps = params.epsilon_eff
    na = np.arange(n_total + 1, dtype=float)
    nb = n_total - na
    diag = (
        (w0 + eps) * na
        + (w0 - eps) * nb
        + 0.5 * params.u_a * na * (na - 1)
        + 0.5 * params.u_b * nb * (nb - 1)
        + params.v * na * nb
    )
    h = np.diag(diag).astype(complex)
    # <n_a + 1, n_b - 1| -J* a^+ b |n_a, n_b>
    off = -np.conj(params.j) * np.sqrt((na[:-1] + 1) * nb[:-1])
    h[np.arange(1, n_total + 1), np.arange(n_total)] = off
    h[np.arange(n_total), np.arange(1, n_total + 1)] = off.conj()
    return h


_HEADER = struct.Struct("<Q")


def save_density_matrix(path: str | Path, rho: np.ndarray) -> None:
    """Binary dump: little-endian uint64 dimension, then row-major (re, im) float64 pairs."""
    rho = np.asarray(rho, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(rho.shape[0]))
        fh.write(np.ascontiguousarray(rho).tobytes())


def load_density_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (dim,) = _HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if data.size != dim * dim:
        raise ValueError(f"expected {dim * dim} entries, found {data.size}")
    return data.reshape(dim, dim).astype(complex)
