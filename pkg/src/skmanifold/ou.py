"""Exact mode-wise simulation of the stationary linear heat and wave solutions.

Per mode k, with unit amplitude (the field amplitude ``s_k = sigma sqrt(q_k)``
multiplies everything), the processes driven by one scalar Brownian motion
``beta`` are::

    heat:  dy = -k^2 y dt + d beta
    wave:  nu z'' + z' + k^2 z = beta'     i.e.  d(z, z') = B (z, z') dt + (0, 1/nu) d beta

One time step consumes four iid normals per mode, mapped through the lower
Cholesky factor of the joint Gram matrix of ``(d beta, eta_heat, eta_z,
eta_zdot)``.  Lower-triangularity makes ``d beta`` depend on the first normal
only and the heat increment on the first two, so heat and wave paths built
from one :class:`NoisePath` share their Brownian increments exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._numerics import expm_2x2, phi_functions, psd_cholesky
from .spectral import QSpectrum, wavenumbers

_BLOCK_BUDGET = 1 << 18  # floats per generated block


def _zigzag(n: int) -> int:
    # bijection Z -> N so negative indices get their own spawn keys
    return 2 * n if n >= 0 else -2 * n - 1


@dataclass(frozen=True)
class NoisePath:
    """Seeded two-sided stream of standard normals on the integer time grid ``t = i dt``.

    Step ``i`` (covering ``[i dt, (i+1) dt]``) owns four normals per mode and
    replica.  Normals are generated in fixed blocks keyed by the block index,
    so any window of steps is reproduced bit-exactly regardless of which
    other windows were requested.
    """

    seed: int
    dt: float
    M: int
    replicas: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.replicas is not None and self.replicas < 1:
            raise ValueError("replicas must be positive")

    @property
    def _shape(self) -> tuple:
        return (self.M, 4) if self.replicas is None else (self.replicas, self.M, 4)

    @property
    def block_len(self) -> int:
        return max(1, _BLOCK_BUDGET // int(np.prod(self._shape)))

    def _block(self, b: int) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(0, _zigzag(b)))
        return np.random.default_rng(ss).standard_normal((self.block_len,) + self._shape)

    def normals(self, i_start: int, i_stop: int) -> np.ndarray:
        """Normals for steps ``i_start .. i_stop - 1``, shape ``(L, [R,] M, 4)``."""
        if i_stop < i_start:
            raise ValueError("empty or reversed window")
        B = self.block_len
        out = np.empty((i_stop - i_start,) + self._shape)
        i = i_start
        while i < i_stop:
            b = i // B
            lo = i - b * B
            hi = min(B, i_stop - b * B)
            out[i - i_start:i - i_start + hi - lo] = self._block(b)[lo:hi]
            i = b * B + hi
        return out

    def increments(self, i_start: int, i_stop: int) -> np.ndarray:
        """Standard Brownian increments ``d beta_k ~ N(0, dt)``, shape ``(L, [R,] M)``."""
        return math.sqrt(self.dt) * self.normals(i_start, i_stop)[..., 0]

    def initial_normals(self, i0: int) -> np.ndarray:
        """Normals for a stationary draw anchored at grid index ``i0``, shape ``([R,] M, 3)``."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(1, _zigzag(i0)))
        return np.random.default_rng(ss).standard_normal(self._shape[:-1] + (3,))


def wave_generator(k, nu: float) -> np.ndarray:
    """Matrix ``B`` of ``d(z, z')/dt = B (z, z')`` for ``nu z'' + z' + k^2 z = 0``; shape ``(m, 2, 2)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    B = np.zeros(k.shape + (2, 2))
    B[..., 0, 1] = 1.0
    B[..., 1, 0] = -(k**2) / nu
    B[..., 1, 1] = -1.0 / nu
    return B


def stationary_joint_covariance(M: int, nu: float) -> np.ndarray:
    """Unit-amplitude stationary covariance of ``(y_heat, z, z')`` per mode, shape ``(M, 3, 3)``.

    Solves ``D P + P D^T + b b^T = 0`` with ``D = diag(-k^2, B)`` and
    ``b = (1, 0, 1/nu)`` in closed form.
    """
    k2 = wavenumbers(M) ** 2
    P = np.zeros((M, 3, 3))
    P[:, 0, 0] = 1.0 / (2.0 * k2)
    P[:, 1, 1] = 1.0 / (2.0 * k2)
    P[:, 2, 2] = 1.0 / (2.0 * nu)
    P[:, 0, 1] = P[:, 1, 0] = 1.0 / (k2 * (2.0 + nu * k2))
    P[:, 0, 2] = P[:, 2, 0] = 1.0 / (2.0 + nu * k2)
    return P


def _int_expm_2x2(B: np.ndarray, dt: float) -> np.ndarray:
    """``int_0^dt e^{B tau} d tau`` for stacked 2x2 ``B`` via the augmented exponential."""
    from scipy.linalg import expm

    out = np.empty_like(B)
    for i, Bi in enumerate(B):
        big = np.zeros((4, 4))
        big[:2, :2] = Bi * dt
        big[:2, 2:] = np.eye(2) * dt
        out[i] = expm(big)[:2, 2:]
    return out


@dataclass(frozen=True)
class StepFactors:
    """Exact one-step transition data for all modes at step ``dt``.

    decay_heat:  ``e^{-k^2 dt}``, shape ``(M,)``.
    phi_wave:    ``e^{B dt}``, shape ``(M, 2, 2)`` (None for heat-only).
    gram:        unit-amplitude covariance of ``(d beta, eta_h[, eta_z, eta_zdot])``.
    chol:        lower Cholesky factor of ``gram``.
    """

    dt: float
    nu: float | None
    decay_heat: np.ndarray
    phi1_heat: np.ndarray
    phi_wave: np.ndarray | None
    gram: np.ndarray
    chol: np.ndarray


@lru_cache(maxsize=64)
def step_factors(M: int, dt: float, nu: float | None = None) -> StepFactors:
    k2 = wavenumbers(M) ** 2
    e_h, p1_h, _ = phi_functions(-k2 * dt)
    if nu is None:
        G = np.zeros((M, 2, 2))
        G[:, 0, 0] = dt
        G[:, 0, 1] = G[:, 1, 0] = dt * p1_h
        G[:, 1, 1] = -np.expm1(-2.0 * k2 * dt) / (2.0 * k2)
        return StepFactors(dt, None, e_h, p1_h, None, G, psd_cholesky(G))
    if not nu > 0:
        raise ValueError("nu must be positive")
    B = wave_generator(np.sqrt(k2), nu)
    Phi_B = expm_2x2(B * dt)
    P = stationary_joint_covariance(M, nu)
    Phi_S = np.zeros((M, 3, 3))
    Phi_S[:, 0, 0] = e_h
    Phi_S[:, 1:, 1:] = Phi_B
    G = np.zeros((M, 4, 4))
    G[:, 0, 0] = dt
    G[:, 0, 1] = G[:, 1, 0] = dt * p1_h
    cross = _int_expm_2x2(B, dt)[:, :, 1] / nu
    G[:, 0, 2:] = cross
    G[:, 2:, 0] = cross
    G_SS = P - Phi_S @ P @ np.swapaxes(Phi_S, -1, -2)
    # the heat-heat entry loses digits to cancellation at small k^2 dt
    G_SS[:, 0, 0] = -np.expm1(-2.0 * k2 * dt) / (2.0 * k2)
    G[:, 1:, 1:] = 0.5 * (G_SS + np.swapaxes(G_SS, -1, -2))
    return StepFactors(dt, nu, e_h, p1_h, Phi_B, G, psd_cholesky(G))


def correlated_increments(factors: StepFactors, normals: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
    """Map iid normals ``(..., M, 4)`` to scaled ``(d beta, eta_h, eta_z, eta_zdot)``."""
    n = factors.chol.shape[-1]
    x = np.einsum("mij,...mj->...mi", factors.chol, normals[..., :n])
    return x * amplitude[:, None]


def sample_stationary_heat(Q: QSpectrum, seed: int, size: int | None = None) -> np.ndarray:
    """Draw from the stationary heat law: mode k ~ N(0, sigma^2 q_k / (2 k^2))."""
    rng = np.random.default_rng(seed)
    shape = (Q.M,) if size is None else (size, Q.M)
    std = Q.amplitudes / np.sqrt(2.0) / wavenumbers(Q.M)
    return rng.standard_normal(shape) * std


def sample_stationary_wave(Q: QSpectrum, nu: float, seed: int, size: int | None = None):
    """Draw ``(z, z')`` from the stationary wave law.

    Position mode k ~ N(0, sigma^2 q_k/(2k^2)), velocity ~ N(0, sigma^2 q_k/(2 nu)),
    all independent.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    rng = np.random.default_rng(seed)
    shape = (Q.M,) if size is None else (size, Q.M)
    amp = Q.amplitudes
    z = rng.standard_normal(shape) * amp / np.sqrt(2.0) / wavenumbers(Q.M)
    zdot = rng.standard_normal(shape) * amp / math.sqrt(2.0 * nu)
    return z, zdot


class OUStepper:
    """Advance heat and (optionally) wave OU states one exact step at a time."""

    def __init__(self, Q: QSpectrum, dt: float, nu: float | None = None):
        self.Q = Q
        self.factors = step_factors(Q.M, float(dt), None if nu is None else float(nu))
        self.amp = Q.amplitudes

    def step(self, state: dict, normals: np.ndarray) -> dict:
        f = self.factors
        inc = correlated_increments(f, normals, self.amp)
        out = {"heat": f.decay_heat * state["heat"] + inc[..., 1]}
        if f.nu is not None:
            zw = np.stack([state["z"], state["zdot"]], axis=-1)
            zw = np.einsum("mij,...mj->...mi", f.phi_wave, zw) + inc[..., 2:]
            out["z"], out["zdot"] = zw[..., 0], zw[..., 1]
        return out


def stationary_initial_state(noise: NoisePath, Q: QSpectrum, nu: float | None, i0: int) -> dict:
    """Joint stationary draw of ``(y_heat, z, z')`` anchored at grid index ``i0``."""
    P = stationary_joint_covariance(Q.M, 1.0 if nu is None else nu)
    L = psd_cholesky(P)
    x = np.einsum("mij,...mj->...mi", L, noise.initial_normals(i0)) * Q.amplitudes[:, None]
    state = {"heat": x[..., 0]}
    if nu is not None:
        state["z"], state["zdot"] = x[..., 1], x[..., 2]
    return state


@dataclass(frozen=True, eq=False)
class OUPath:
    """Realised OU processes on the grid ``t_i = (i0 + i) dt``, i = 0..L-1.

    Arrays have shape ``(L, [R,] M)``.  ``z_wave``/``zdot_wave`` are None for
    heat-only paths.
    """

    i0: int
    dt: float
    z_heat: np.ndarray
    z_wave: np.ndarray | None = None
    zdot_wave: np.ndarray | None = None
    nu: float | None = None
    seed: int | None = None

    @property
    def n_nodes(self) -> int:
        return self.z_heat.shape[0]

    @property
    def times(self) -> np.ndarray:
        return (self.i0 + np.arange(self.n_nodes)) * self.dt

    @property
    def t_start(self) -> float:
        return self.i0 * self.dt

    @property
    def t_end(self) -> float:
        return (self.i0 + self.n_nodes - 1) * self.dt

    def steps_of(self, s: float) -> int:
        n = round(s / self.dt)
        if abs(n * self.dt - s) > 1e-9 * max(1.0, abs(s)):
            raise ValueError(f"shift {s} is not a multiple of dt={self.dt}")
        return n

    def index(self, t: float) -> int:
        """Array index of grid time ``t``."""
        i = self.steps_of(t) - self.i0
        if not 0 <= i < self.n_nodes:
            raise ValueError(f"time {t} outside [{self.t_start}, {self.t_end}]")
        return i

    def at(self, t: float, which: str = "heat") -> np.ndarray:
        return self.field(which)[self.index(t)]

    def field(self, which: str) -> np.ndarray:
        arr = {"heat": self.z_heat, "wave": self.z_wave, "zdot": self.zdot_wave}[which]
        if arr is None:
            raise ValueError(f"path has no {which!r} component")
        return arr

    def shift(self, s: float) -> "OUPath":
        """Path of the shifted fibre: ``shift(s).at(t) == at(t + s)``.

        Realised by relabelling the grid, so shifts compose exactly.
        """
        n = self.steps_of(s)
        if not self.i0 <= n <= self.i0 + self.n_nodes - 1:
            raise ValueError(f"shift {s} moves time 0 outside the grid")
        return OUPath(self.i0 - n, self.dt, self.z_heat, self.z_wave, self.zdot_wave, self.nu, self.seed)

    def window(self, t_lo: float, t_hi: float) -> "OUPath":
        a, b = self.index(t_lo), self.index(t_hi)
        sl = slice(a, b + 1)
        pick = lambda x: None if x is None else x[sl]
        return OUPath(self.i0 + a, self.dt, self.z_heat[sl], pick(self.z_wave), pick(self.zdot_wave), self.nu, self.seed)

    def as_heat_forcing(self) -> "OUPath":
        """Heat-shaped view whose ``z_heat`` is the wave position path (the fibre substitution)."""
        if self.z_wave is None:
            raise ValueError("path has no wave component")
        return OUPath(self.i0, self.dt, self.z_wave, None, None, self.nu, self.seed)

    def to_csv(self, path, replica: int = 0) -> None:
        """Dump columns ``t, mode, z_heat, z_wave, zdot_wave`` (one row per time and mode)."""
        zh = self.z_heat if self.z_heat.ndim == 2 else self.z_heat[:, replica]
        zw = self.z_wave if self.z_wave is None or self.z_wave.ndim == 2 else self.z_wave[:, replica]
        zd = self.zdot_wave if self.zdot_wave is None or self.zdot_wave.ndim == 2 else self.zdot_wave[:, replica]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mode", "z_heat", "z_wave", "zdot_wave"])
            for i, t in enumerate(self.times):
                for k in range(zh.shape[1]):
                    w.writerow([
                        repr(float(t)), k + 1, repr(float(zh[i, k])),
                        "" if zw is None else repr(float(zw[i, k])),
                        "" if zd is None else repr(float(zd[i, k])),
                    ])


def evolve_ou(noise: NoisePath, Q: QSpectrum, nu: float | None, i0: int, n_steps: int,
              init="stationary") -> OUPath:
    """Exact OU paths on grid indices ``i0 .. i0 + n_steps``.

    ``init`` is ``"stationary"`` (joint stationary draw keyed by ``i0``), or a
    dict with ``heat`` and, for wave paths, ``z``/``zdot`` arrays.
    """
    if Q.M != noise.M:
        raise ValueError("QSpectrum and NoisePath disagree on M")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if isinstance(init, str):
        if init != "stationary":
            raise ValueError(f"unknown init {init!r}")
        state = stationary_initial_state(noise, Q, nu, i0)
    else:
        state = {key: np.asarray(val, dtype=float) for key, val in init.items()}
        shape = noise._shape[:-1]
        for key in ("heat",) + (("z", "zdot") if nu is not None else ()):
            state[key] = np.broadcast_to(state.get(key, np.zeros(shape)), shape).astype(float)
    stepper = OUStepper(Q, noise.dt, nu)
    shape = (n_steps + 1,) + noise._shape[:-1]
    zh = np.empty(shape)
    zw = np.empty(shape) if nu is not None else None
    zd = np.empty(shape) if nu is not None else None
    zh[0] = state["heat"]
    if nu is not None:
        zw[0], zd[0] = state["z"], state["zdot"]
    B = noise.block_len
    i = 0
    while i < n_steps:
        j = min(n_steps, i + B)
        nrm = noise.normals(i0 + i, i0 + j)
        for s in range(j - i):
            state = stepper.step(state, nrm[s])
            zh[i + s + 1] = state["heat"]
            if nu is not None:
                zw[i + s + 1], zd[i + s + 1] = state["z"], state["zdot"]
        i = j
    return OUPath(i0, noise.dt, zh, zw, zd, nu, noise.seed)


def build_path(seed: int, Q: QSpectrum, dt: float, t_lo: float, t_hi: float, nu: float | None = None) -> OUPath:
    """Stationary path covering ``[t_lo, t_hi]`` (endpoints rounded outward to the grid)."""
    i_lo = math.floor(t_lo / dt + 1e-9)
    i_hi = math.ceil(t_hi / dt - 1e-9)
    return evolve_ou(NoisePath(seed, dt, Q.M), Q, nu, i_lo, i_hi - i_lo)
