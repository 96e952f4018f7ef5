"""Phase-space operator of the transformed damped wave equation.

With ``v = nu u_t + u/2`` the linear part acts on each sine mode k as::

    C_k = [[-1/(2 nu),          1/nu     ],
           [1/(4 nu) - k^2,   -1/(2 nu)  ]]

whose eigenvalues are ``(-1 +/- sqrt(1 - 4 nu k^2)) / (2 nu)`` with
eigenvectors ``(1, +/- c_k)``, ``c_k = sqrt(1 - 4 nu k^2)/2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._numerics import expm_2x2
from .spectral import wavenumbers


@dataclass(frozen=True)
class EigenPair:
    k: int
    nu: float
    lambda_plus: complex | float
    lambda_minus: complex | float
    c: complex | float
    real: bool


def eigen(k: int, nu: float) -> EigenPair:
    """Closed-form eigenpair of ``C_k``; complex when ``4 nu k^2 >= 1``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    disc = 1.0 - 4.0 * nu * k * k
    if disc > 0:
        s = math.sqrt(disc)
        # -1 + s cancels for small nu k^2; use the conjugate form instead
        lam_p = -2.0 * k * k / (1.0 + s)
        lam_m = (-1.0 - s) / (2.0 * nu)
        return EigenPair(k, nu, lam_p, lam_m, s / 2.0, True)
    s = 1j * math.sqrt(-disc)
    return EigenPair(k, nu, (-1.0 + s) / (2.0 * nu), (-1.0 - s) / (2.0 * nu), s / 2.0, False)


def lambda_plus(k, nu: float) -> np.ndarray:
    """Vectorised ``lambda_k^+`` for the real regime."""
    k = np.asarray(k, dtype=float)
    s = np.sqrt(1.0 - 4.0 * nu * k * k)
    return -2.0 * k * k / (1.0 + s)


def C_blocks(M: int, nu: float) -> np.ndarray:
    """Stacked 2x2 blocks ``C_k``, k = 1..M, shape ``(M, 2, 2)``."""
    k2 = wavenumbers(M) ** 2
    C = np.empty((M, 2, 2))
    C[:, 0, 0] = -0.5 / nu
    C[:, 0, 1] = 1.0 / nu
    C[:, 1, 0] = 0.25 / nu - k2
    C[:, 1, 1] = -0.5 / nu
    return C


def max_nu(N: int) -> float:
    """Exclusive upper bound on nu keeping modes 1..N+1 in the real regime."""
    return 1.0 / (4.0 * (N + 1) ** 2)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Element ``(u, v)`` of the phase space; arrays may carry leading batch axes."""

    u: np.ndarray
    v: np.ndarray
    nu: float
    N: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape:
            raise ValueError("u and v must share their truncation")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def M(self) -> int:
        return self.u.shape[-1]

    def _like(self, u, v) -> "PhasePoint":
        return PhasePoint(u, v, self.nu, self.N)

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        _check_compatible(self, other)
        return self._like(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        _check_compatible(self, other)
        return self._like(self.u - other.u, self.v - other.v)

    def scale(self, a) -> "PhasePoint":
        return self._like(a * self.u, a * self.v)

    @classmethod
    def from_velocity(cls, u, u_t, nu: float, N: int) -> "PhasePoint":
        """Phase point of a state ``(u, u_t)``: ``v = nu u_t + u/2``."""
        u = np.asarray(u, dtype=float)
        return cls(u, nu * np.asarray(u_t, dtype=float) + 0.5 * u, nu, N)

    def velocity(self) -> np.ndarray:
        return (self.v - 0.5 * self.u) / self.nu


def _check_compatible(a: PhasePoint, b: PhasePoint) -> None:
    if a.nu != b.nu or a.N != b.N or a.M != b.M:
        raise ValueError("phase points carry different (nu, N, M)")


def e_weights(M: int, nu: float, N: int) -> np.ndarray:
    """Per-mode weight on ``u_k^2`` in the E-norm (the ``v`` weight is 1).

    Low modes: ``1/4 - nu k^2``.  High modes: ``nu k^2 + 1/4 - 2 nu (N+1)^2``.
    """
    if not nu < max_nu(N):
        raise ValueError(f"nu={nu} must be below 1/(4(N+1)^2)={max_nu(N)}")
    k2 = wavenumbers(M) ** 2
    w = 0.25 - nu * k2
    w[N:] = nu * k2[N:] + 0.25 - 2.0 * nu * (N + 1) ** 2
    return w


def inner_E(U1: PhasePoint, U2: PhasePoint) -> np.ndarray:
    _check_compatible(U1, U2)
    w = e_weights(U1.M, U1.nu, U1.N)
    return np.sum(w * U1.u * U2.u + U1.v * U2.v, axis=-1)


def norm_E(U: PhasePoint) -> np.ndarray:
    return np.sqrt(inner_E(U, U))


def e_norm_arrays(u, v, nu: float, N: int) -> np.ndarray:
    w = e_weights(np.shape(u)[-1], nu, N)
    return np.sqrt(np.sum(w * np.square(u) + np.square(v), axis=-1))


def equivalence_constants(M: int, nu: float, N: int) -> tuple[float, float]:
    """``(c1, c2)`` with ``c1 |U|_std <= |U|_E <= c2 |U|_std``, ``|U|_std^2 = |grad u|^2 + |v|^2``."""
    k2 = wavenumbers(M) ** 2
    ratio = e_weights(M, nu, N) / k2
    return math.sqrt(min(1.0, ratio.min())), math.sqrt(max(1.0, ratio.max()))


def apply_C(U: PhasePoint) -> PhasePoint:
    k2 = wavenumbers(U.M) ** 2
    nu = U.nu
    return U._like((-0.5 * U.u + U.v) / nu, (0.25 / nu - k2) * U.u - 0.5 * U.v / nu)


def eigenvector(k: int, sign: int, M: int, nu: float, N: int) -> PhasePoint:
    """``e_k^+`` (sign=+1) or ``e_k^-`` (sign=-1) as a phase point."""
    ep = eigen(k, nu)
    if not ep.real:
        raise ValueError(f"mode {k} is oscillatory at nu={nu}")
    u = np.zeros(M)
    v = np.zeros(M)
    u[k - 1] = 1.0
    v[k - 1] = sign * ep.c
    return PhasePoint(u, v, nu, N)


def low_c(N: int, nu: float) -> np.ndarray:
    return 0.5 * np.sqrt(1.0 - 4.0 * nu * wavenumbers(N) ** 2)


def low_coordinates(U: PhasePoint) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates ``(a_plus, a_minus)`` of modes 1..N on the eigenbasis."""
    c = low_c(U.N, U.nu)
    u, v = U.u[..., :U.N], U.v[..., :U.N]
    return 0.5 * (u + v / c), 0.5 * (u - v / c)


def from_low_coordinates(a_plus, a_minus, M: int, nu: float, N: int) -> PhasePoint:
    a_plus = np.asarray(a_plus, dtype=float)
    a_minus = np.asarray(a_minus, dtype=float)
    c = low_c(N, nu)
    shape = np.broadcast_shapes(a_plus.shape, a_minus.shape)[:-1] + (M,)
    u = np.zeros(shape)
    v = np.zeros(shape)
    u[..., :N] = a_plus + a_minus
    v[..., :N] = c * (a_plus - a_minus)
    return PhasePoint(u, v, nu, N)


def project(U: PhasePoint, which: str) -> PhasePoint:
    """Spectral projection ``"P1"``, ``"Pm1"`` or ``"P22"``."""
    if which == "P22":
        u = U.u.copy()
        v = U.v.copy()
        u[..., :U.N] = 0.0
        v[..., :U.N] = 0.0
        return U._like(u, v)
    a_p, a_m = low_coordinates(U)
    if which == "P1":
        return from_low_coordinates(a_p, np.zeros_like(a_m), U.M, U.nu, U.N)
    if which == "Pm1":
        return from_low_coordinates(np.zeros_like(a_p), a_m, U.M, U.nu, U.N)
    raise ValueError(f"unknown projection {which!r}")


def high_propagators(M: int, nu: float, t: float) -> np.ndarray:
    """``exp(C_k t)`` for every mode, shape ``(M, 2, 2)``."""
    return expm_2x2(C_blocks(M, nu) * t)


def semigroup_apply(U: PhasePoint, t: float, branch: str) -> PhasePoint:
    """Apply the restricted linear flow.

    ``"C1"``: ``e^{C t} P1 U`` for ``t <= 0`` (eigen-decay on the + branch).
    ``"C2"``: ``e^{C t} (P-1 + P22) U`` for ``t >= 0``.
    """
    N, M, nu = U.N, U.M, U.nu
    if branch == "C1":
        if t > 0:
            raise ValueError("C1 branch runs backward: need t <= 0")
        a_p, _ = low_coordinates(U)
        lam = lambda_plus(wavenumbers(N), nu)
        return from_low_coordinates(a_p * np.exp(lam * t), np.zeros_like(a_p), M, nu, N)
    if branch == "C2":
        if t < 0:
            raise ValueError("C2 branch runs forward: need t >= 0")
        _, a_m = low_coordinates(U)
        lam_m = (-1.0 - 2.0 * low_c(N, nu)) / (2.0 * nu)
        out = from_low_coordinates(np.zeros_like(a_m), a_m * np.exp(lam_m * t), M, nu, N)
        P = high_propagators(M, nu, t)[N:]
        uv = np.stack([U.u[..., N:], U.v[..., N:]], axis=-1)
        uv = np.einsum("mij,...mj->...mi", P, uv)
        out.u[..., N:] = uv[..., 0]
        out.v[..., N:] = uv[..., 1]
        return out
    raise ValueError(f"unknown branch {branch!r}")


@dataclass(frozen=True)
class GapReport:
    system: str
    N: int
    nu: float | None
    alpha: float
    beta: float
    eta: float
    K: float
    L_F: float
    L_h: float
    gap_value: float
    strong_gap_value: float
    L_h_bound: float
    regime_ok: bool
    passes: bool
    strong_passes: bool

    def to_dict(self) -> dict:
        return asdict(self)


def wave_lipschitz(L_f: float, nu: float, N: int, kind: str = "sharp") -> float:
    """Lipschitz constant of ``U -> (0, f(u + z))`` in the E-norm.

    ``"sharp"`` uses ``|u| <= |U|_E / sqrt(1/4 - nu (N+1)^2)``; ``"crude"`` is ``3 L_f``.
    """
    if kind == "crude":
        return 3.0 * L_f
    if kind != "sharp":
        raise ValueError(f"unknown lipschitz kind {kind!r}")
    return L_f / math.sqrt(0.25 - nu * (N + 1) ** 2)


def gap_check(N: int, nu: float | None = None, K: float = 1.0, L_F: float | None = None,
              L_f: float | None = None, L_h: float = 0.0, lipschitz: str = "sharp") -> GapReport:
    """Evaluate the spectral gap condition for the heat (``nu=None``) or wave system.

    Give either ``L_F`` (used as is) or ``L_f`` (converted per system).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if (L_F is None) == (L_f is None):
        raise ValueError("give exactly one of L_F and L_f")
    if nu is None:
        system, regime_ok = "heat", True
        alpha, beta = -float(N * N), -float((N + 1) ** 2)
        if L_F is None:
            L_F = float(L_f)
    else:
        system = "wave"
        if not nu > 0:
            raise ValueError("nu must be positive")
        regime_ok = nu < max_nu(N)
        if regime_ok:
            alpha = float(lambda_plus(N, nu))
            beta = float(lambda_plus(N + 1, nu))
        else:
            alpha = beta = float("nan")
        if L_F is None:
            L_F = wave_lipschitz(L_f, nu, N, lipschitz) if regime_ok else float("nan")
    eta = 0.5 * (alpha + beta)
    gap = K * L_F * (1.0 / (alpha - eta) + 1.0 / (eta - beta))
    strong = gap + K * K * L_h * L_F / (alpha - eta)
    L_h_bound = K * K * L_F / ((eta - beta) * (1.0 - gap)) if gap < 1 else float("inf")
    return GapReport(system, N, nu, alpha, beta, eta, K, float(L_F), L_h, gap, strong, L_h_bound,
                     regime_ok, bool(regime_ok and gap < 1), bool(regime_ok and strong < 1))


def tempered_bound(xi_norm: float, f_bound: float | None, report: GapReport) -> float:
    """Diagnostic bound on the weighted norm of an LP solution.

    ``|xi| + B_F (1/|alpha| + 1/|beta|)`` with ``B_F`` the sup of ``|F|``;
    infinite when ``f`` is unbounded.
    """
    if f_bound is None:
        return float("inf")
    return xi_norm + f_bound * (1.0 / abs(report.alpha) + 1.0 / abs(report.beta))
