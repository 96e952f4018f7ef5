"""Sine-series fields on (0, pi) with homogeneous Dirichlet conditions.

A field is stored as its coefficient vector ``a`` (last axis, length ``M``)
on the orthonormal basis ``e_k(x) = sqrt(2/pi) sin(k x)``, so that the L2
norm is the Euclidean norm of ``a`` and ``-Laplacian e_k = k^2 e_k``.
Leading axes (time, replica) broadcast through every operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft

SpectralField = np.ndarray
"""Coefficient vector(s) on the sine basis; last axis indexes modes 1..M."""


def wavenumbers(M: int) -> np.ndarray:
    return np.arange(1, M + 1, dtype=float)


def laplacian_eigenvalues(M: int) -> np.ndarray:
    """Eigenvalues ``k^2`` of ``-Laplacian`` for modes 1..M."""
    return wavenumbers(M) ** 2


def physical_grid(M_phys: int) -> np.ndarray:
    """Interior quadrature nodes ``x_j = j pi / (M_phys + 1)``, j = 1..M_phys."""
    return np.arange(1, M_phys + 1) * math.pi / (M_phys + 1)


def basis(k: int, x) -> np.ndarray:
    return math.sqrt(2.0 / math.pi) * np.sin(k * np.asarray(x))


def dst_forward(samples, M: int) -> SpectralField:
    """Sine coefficients of grid samples, truncated to ``M`` modes.

    ``samples`` holds values at :func:`physical_grid` nodes on its last axis.
    Exact (to rounding) for fields band-limited to modes ``<= M_phys``.
    """
    samples = np.asarray(samples, dtype=float)
    M_phys = samples.shape[-1]
    if M > M_phys:
        raise ValueError(f"cannot resolve {M} modes from {M_phys} samples")
    coeffs = fft.dst(samples, type=1, axis=-1) * (math.sqrt(math.pi / 2.0) / (M_phys + 1))
    return coeffs[..., :M]


def dst_backward(coeffs, M_phys: int) -> np.ndarray:
    """Grid samples of the field with sine coefficients ``coeffs``."""
    coeffs = np.asarray(coeffs, dtype=float)
    M = coeffs.shape[-1]
    if M > M_phys:
        raise ValueError(f"{M} modes need at least {M} samples, got M_phys={M_phys}")
    if M < M_phys:
        pad = np.zeros(coeffs.shape[:-1] + (M_phys - M,))
        coeffs = np.concatenate([coeffs, pad], axis=-1)
    return fft.dst(coeffs, type=1, axis=-1) / math.sqrt(2.0 * math.pi)


def l2_norm(a) -> np.ndarray:
    return np.linalg.norm(a, axis=-1)


def h1_seminorm(a) -> np.ndarray:
    a = np.asarray(a)
    k = wavenumbers(a.shape[-1])
    return np.linalg.norm(k * a, axis=-1)


def quadrature_l2(samples) -> np.ndarray:
    """L2 norm of grid samples by the trapezoid rule (exact for band-limited fields)."""
    samples = np.asarray(samples, dtype=float)
    M_phys = samples.shape[-1]
    return np.sqrt(math.pi / (M_phys + 1) * np.sum(samples**2, axis=-1))


def project_low(u, N: int) -> SpectralField:
    """Keep modes 1..N (the orthogonal projection onto span{e_1..e_N})."""
    u = np.asarray(u, dtype=float)
    _check_cutoff(N, u.shape[-1])
    out = np.zeros_like(u)
    out[..., :N] = u[..., :N]
    return out


def project_high(u, N: int) -> SpectralField:
    """Keep modes N+1..M."""
    u = np.asarray(u, dtype=float)
    _check_cutoff(N, u.shape[-1])
    out = np.zeros_like(u)
    out[..., N:] = u[..., N:]
    return out


def _check_cutoff(N: int, M: int) -> None:
    if not 1 <= N <= M:
        raise ValueError(f"cutoff N={N} outside 1..{M}")


@dataclass(frozen=True)
class Nonlinearity:
    """Pointwise Lipschitz nonlinearity with ``f(0) = 0``.

    kind:
        ``"zero"``, ``"sine"`` (``a sin u``), ``"linear"`` (``a u``) or
        ``"table"`` (piecewise-linear through ``(table_x, table_y)``, constant
        slope extrapolation).
    """

    kind: str = "sine"
    a: float = 0.5
    table_x: tuple = ()
    table_y: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "sine", "linear", "table"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "table":
            x = np.asarray(self.table_x, dtype=float)
            y = np.asarray(self.table_y, dtype=float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
                raise ValueError("table needs matching, strictly increasing abscissae")
        if abs(float(self(np.array(0.0)))) > 1e-14:
            raise ValueError("nonlinearity must satisfy f(0) = 0")
        if self.lipschitz > 1.0 + 1e-12:
            raise ValueError(f"Lipschitz constant {self.lipschitz} exceeds sqrt(lambda_1) = 1")

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls("zero", 0.0)

    @classmethod
    def sine(cls, a: float = 0.5) -> "Nonlinearity":
        return cls("sine", a)

    @classmethod
    def linear(cls, a: float) -> "Nonlinearity":
        return cls("linear", a)

    @property
    def lipschitz(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind in ("sine", "linear"):
            return abs(self.a)
        slopes = np.diff(self.table_y) / np.diff(self.table_x)
        return float(np.max(np.abs(slopes)))

    @property
    def bound(self) -> float | None:
        """Sup of ``|f|`` when finite, else None."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "sine":
            return abs(self.a)
        return None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "sine":
            return self.a * np.sin(x)
        if self.kind == "linear":
            return self.a * x
        return self._table(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "sine":
            return self.a * np.cos(x)
        if self.kind == "linear":
            return np.full_like(x, self.a)
        tx = np.asarray(self.table_x, dtype=float)
        slopes = np.diff(self.table_y) / np.diff(tx)
        idx = np.clip(np.searchsorted(tx, x, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    def _table(self, x):
        tx = np.asarray(self.table_x, dtype=float)
        ty = np.asarray(self.table_y, dtype=float)
        y = np.interp(x, tx, ty)
        lo, hi = x < tx[0], x > tx[-1]
        s_lo = (ty[1] - ty[0]) / (tx[1] - tx[0])
        s_hi = (ty[-1] - ty[-2]) / (tx[-1] - tx[-2])
        y = np.where(lo, ty[0] + s_lo * (x - tx[0]), y)
        return np.where(hi, ty[-1] + s_hi * (x - tx[-1]), y)


def apply_nonlinearity(u, z, f: Nonlinearity | Callable, M_phys: int | None = None) -> SpectralField:
    """Pseudo-spectral Nemytskii map ``u, z -> f(u + z)`` in coefficient space."""
    w = np.asarray(u, dtype=float) + np.asarray(z, dtype=float)
    M = w.shape[-1]
    M_phys = M_phys or 4 * M
    if getattr(f, "kind", None) == "zero":
        return np.zeros_like(w)
    return dst_forward(f(dst_backward(w, M_phys)), M)


@dataclass(frozen=True)
class QSpectrum:
    """Diagonal covariance of the Q-Wiener process: mode k has variance rate ``sigma^2 q_k``."""

    q: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("q must be a finite nonnegative vector")
        object.__setattr__(self, "q", q)

    @classmethod
    def power_law(cls, M: int, p: float = 4.0, sigma: float = 1.0) -> "QSpectrum":
        """``q_k = k^-p``; summable (trace class) for ``p > 1``."""
        if p <= 1:
            raise ValueError("q_k = k^-p is trace class only for p > 1")
        return cls(wavenumbers(M) ** (-p), sigma)

    @classmethod
    def zeros(cls, M: int) -> "QSpectrum":
        return cls(np.zeros(M), 0.0)

    @property
    def M(self) -> int:
        return self.q.size

    @property
    def trace(self) -> float:
        return float(np.sum(self.q))

    @property
    def amplitudes(self) -> np.ndarray:
        """Per-mode noise amplitude ``sigma sqrt(q_k)``."""
        return self.sigma * np.sqrt(self.q)


@dataclass(frozen=True)
class GridConfig:
    M: int = 16
    M_phys: int | None = None
    dt: float = 1e-3
    T_back: float | None = None
    T_fwd: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.M_phys is None:
            object.__setattr__(self, "M_phys", 4 * self.M)
        if self.M < 1:
            raise ValueError("M must be positive")
        if self.M_phys < 2 * self.M:
            raise ValueError(f"M_phys={self.M_phys} must be at least 2M={2 * self.M}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T_back is not None and not self.T_back > 0:
            raise ValueError("T_back must be positive")
