"""Lyapunov-Perron solvers for the random manifold graphs.

Discretisation, shared by every solver here:

* The OU forcing is held constant on cells ``[(n - 1/2) dt, (n + 1/2) dt]``
  around path node ``n``.  The solver step is ``h = dt / m`` with ``m`` even,
  so cell edges fall on solver nodes and refining ``m`` resolves the same
  forcing more finely.
* Each step integrates the linear part exactly and the nonlinear term by
  linear interpolation between its end values (exponential trapezoid), both
  ends evaluated with the step's own cell forcing.
* The fixed point is found by Picard iteration on the whole trajectory.  One
  sweep is a set of per-mode linear recurrences: backward from ``t = 0`` on
  the low (dichotomy "P") modes, forward from a steady-state tail closure at
  ``-T_back`` on the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._numerics import affine_recurrence, affine_recurrence_2x2, exp_weights, phi_functions
from .ou import OUPath
from .spectral import Nonlinearity, apply_nonlinearity, dst_backward, dst_forward, wavenumbers
from .wave_operator import (
    C_blocks,
    GapReport,
    PhasePoint,
    e_norm_arrays,
    from_low_coordinates,
    gap_check,
    lambda_plus,
    low_c,
    low_coordinates,
    max_nu,
    tempered_bound,
)


class LPConvergenceError(RuntimeError):
    """The fixed-point iteration did not reach its tolerance."""


@dataclass(frozen=True)
class LPConfig:
    N: int = 2
    tol: float = 1e-10
    max_iters: int = 200
    substeps: int = 2
    T_back: float | None = None
    M_phys: int | None = None
    lipschitz: str = "sharp"

    def __post_init__(self):
        if self.substeps < 2 or self.substeps % 2:
            raise ValueError("substeps must be even and >= 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.N < 1:
            raise ValueError("N must be at least 1")

    def refined(self, T_back: float) -> "LPConfig":
        """Half the solver step and twice the horizon."""
        return replace(self, substeps=2 * self.substeps, T_back=2.0 * T_back)


@dataclass(frozen=True, eq=False)
class WeightedTrajectory:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray | None
    eta: float

    def weights(self) -> np.ndarray:
        return np.exp(-self.eta * self.times)


@dataclass(frozen=True, eq=False)
class LPSolution:
    """Converged Lyapunov-Perron fixed point.

    ``graph_value`` is the high-mode field (heat) or the ``P-1 + P22``
    phase point (wave) at ``t = 0``; ``point`` is the full state there.
    """

    system: str
    trajectory: WeightedTrajectory
    base: np.ndarray
    graph_value: np.ndarray | PhasePoint
    point: np.ndarray | PhasePoint
    iterations: int
    residuals: list
    gap: GapReport
    T_back: float
    h: float
    weighted_norm: float = float("nan")
    tempered_bound: float = float("inf")
    extra: dict = field(default_factory=dict)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0

    @property
    def ratios(self) -> np.ndarray:
        r = np.asarray(self.residuals, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return r[1:] / r[:-1]

    @property
    def contraction_estimate(self) -> float:
        """Largest ratio of successive residuals past the first iterate."""
        r = self.ratios
        r = r[np.isfinite(r)]
        return float(r.max()) if r.size else 0.0

    def graph_norm(self) -> float:
        if isinstance(self.graph_value, PhasePoint):
            return float(e_norm_arrays(self.graph_value.u, self.graph_value.v, self.graph_value.nu, self.graph_value.N))
        return float(np.linalg.norm(self.graph_value))


def auto_T_back(report: GapReport, f: Nonlinearity, tol: float) -> float:
    """Horizon making the truncated tail ``e^{-(eta - beta) T} B_F`` below ``tol / 10``."""
    B = f.bound if f.bound is not None else 1.0
    B = max(B * math.sqrt(math.pi), 1e-300)
    return max(1.0, math.log(10.0 * B / tol) / (report.eta - report.beta))


# ---------------------------------------------------------------------------
# held forcing


def cell_node(g, m: int):
    """Path node whose forcing cell contains fine step ``g`` (covering ``[g h, (g+1) h]``)."""
    return np.floor_divide(2 * np.asarray(g) + 1 + m, 2 * m)


def held_field(path: OUPath, arr: np.ndarray, g_lo: int, n_steps: int, m: int) -> np.ndarray:
    """Per-step held values ``arr[node(g)]`` for fine steps ``g_lo .. g_lo + n_steps - 1``."""
    nodes = cell_node(np.arange(g_lo, g_lo + n_steps), m)
    idx = nodes - path.i0
    if idx.size and (idx.min() < 0 or idx.max() >= path.n_nodes):
        t_need = (nodes.min() * path.dt, nodes.max() * path.dt)
        raise ValueError(f"path [{path.t_start}, {path.t_end}] does not cover forcing cells {t_need}")
    return arr[idx]


def _steps_for(T: float, dt: float, m: int) -> int:
    """Whole path steps covering ``T``, as fine steps."""
    return int(math.ceil(T / dt - 1e-9)) * m


class _Forcing:
    """``g = F(y + bg) - F(sub)`` at both ends of every step."""

    def __init__(self, f: Nonlinearity, M_phys: int, bg_a, bg_b, fsub_a=None, fsub_b=None):
        self.f, self.M_phys = f, M_phys
        self.bg_a, self.bg_b = bg_a, bg_b
        self.fsub_a, self.fsub_b = fsub_a, fsub_b

    def __call__(self, Y: np.ndarray):
        ga = apply_nonlinearity(Y[:-1], self.bg_a, self.f, self.M_phys)
        gb = apply_nonlinearity(Y[1:], self.bg_b, self.f, self.M_phys)
        if self.fsub_a is not None:
            ga = ga - self.fsub_a
            gb = gb - self.fsub_b
        return ga, gb


def _scalar_weights(lam: np.ndarray, H: float):
    e, p1, p2 = phi_functions(lam * H)
    return e, H * (p1 - p2), H * p2


def _sweep_forward(lam, pa, pb, y0, h):
    e, wa, wb = _scalar_weights(lam, h)
    return affine_recurrence(e, wa * pa + wb * pb, y0)


def _sweep_backward(lam, pa, pb, y_end, h):
    e, wa, wb = _scalar_weights(lam, -h)
    # step from t_{j+1} back to t_j: start value pb[j], end value pa[j]
    w = (wa * pb + wb * pa)[::-1]
    return affine_recurrence(e, w, y_end)[::-1]


def _weighted_sup(times, norms, eta) -> float:
    return float(np.max(np.exp(-eta * times) * norms))


# ---------------------------------------------------------------------------
# heat


def _heat_fixed_point(zeta_low, forcing: _Forcing, M: int, N: int, h: float, times, eta, tol, max_iters,
                      Y0=None):
    """Picard iteration for the heat LP map; returns ``(Y, residuals)``."""
    lam = -wavenumbers(M) ** 2
    J = times.size - 1
    if Y0 is None:
        Y = np.zeros((J + 1, M))
        Y[:, :N] = np.exp(np.outer(times, lam[:N])) * zeta_low
    else:
        Y = Y0
    residuals = []
    for _ in range(max_iters):
        ga, gb = forcing(Y)
        new = np.empty_like(Y)
        new[:, :N] = _sweep_backward(lam[:N], ga[:, :N], gb[:, :N], zeta_low, h)
        closure = ga[0, N:] / -lam[N:]
        new[:, N:] = _sweep_forward(lam[N:], ga[:, N:], gb[:, N:], closure, h)
        r = _weighted_sup(times, np.linalg.norm(new - Y, axis=-1), eta)
        Y = new
        residuals.append(r)
        if not np.isfinite(r):
            raise LPConvergenceError("weighted norm overflow")
        if r <= tol:
            return Y, residuals
    raise LPConvergenceError(f"no convergence in {max_iters} iterations (last residual {residuals[-1]:.3e})")


def _heat_setup(path: OUPath, f: Nonlinearity, cfg: LPConfig, report: GapReport | None):
    M = path.z_heat.shape[-1]
    if cfg.N > M:
        raise ValueError("N exceeds the truncation")
    if report is None:
        report = gap_check(cfg.N, L_f=f.lipschitz)
    T = cfg.T_back if cfg.T_back is not None else auto_T_back(report, f, cfg.tol)
    m = cfg.substeps
    J = _steps_for(T, path.dt, m)
    h = path.dt / m
    times = np.arange(-J, 1) * h
    return M, report, J, h, times, J * h


def lp_solve_heat(zeta, ou: OUPath, f: Nonlinearity, cfg: LPConfig = LPConfig(),
                  report: GapReport | None = None, background=None) -> LPSolution:
    """Heat-side graph ``h(zeta, omega)``: fixed point of the truncated LP map on ``[-T_back, 0]``.

    ``ou.z_heat`` supplies the forcing path (pass ``ou.as_heat_forcing()`` to
    drive the heat equation with a wave path).  ``background`` optionally
    replaces the held forcing with explicit per-step arrays ``(bg_a, bg_b,
    fsub_a, fsub_b)`` on the same grid.
    """
    M, report, J, h, times, T = _heat_setup(ou, f, cfg, report)
    if not report.passes:
        raise ValueError(f"gap condition fails (gap={report.gap_value:.4f})")
    zeta = np.asarray(zeta, dtype=float)
    zeta_low = zeta[:cfg.N] if zeta.shape[-1] in (cfg.N, M) else None
    if zeta_low is None:
        raise ValueError("zeta must hold N low-mode coordinates or a full field")
    M_phys = cfg.M_phys or 4 * M
    if background is None:
        zc = held_field(ou, ou.z_heat, -J, J, cfg.substeps)
        forcing = _Forcing(f, M_phys, zc, zc)
    else:
        forcing = _Forcing(f, M_phys, *background)
    Y, res = _heat_fixed_point(zeta_low, forcing, M, cfg.N, h, times, report.eta, cfg.tol, cfg.max_iters)
    traj = WeightedTrajectory(times, Y, None, report.eta)
    graph = Y[-1].copy()
    graph[:cfg.N] = 0.0
    wn = _weighted_sup(times, np.linalg.norm(Y, axis=-1), report.eta)
    bound = tempered_bound(float(np.linalg.norm(zeta_low)), None if f.bound is None else f.bound * math.sqrt(math.pi), report)
    return LPSolution("heat", traj, zeta_low.copy(), graph, Y[-1].copy(), len(res), res, report, T, h, wn, bound)


def manifold_point_heat(sol: LPSolution, ou: OUPath, f: Nonlinearity, M_phys: int | None = None):
    """``(u0, u0_t)``: manifold point and the RDS right-hand side there."""
    u0 = sol.point
    M = u0.shape[-1]
    z0 = ou.at(0.0, "heat")
    u_t = -wavenumbers(M) ** 2 * u0 + apply_nonlinearity(u0, z0, f, M_phys or 4 * M)
    return u0, u_t


# ---------------------------------------------------------------------------
# forward integration of the heat RDS with the same discrete scheme


def integrate_heat_rds(u0, path: OUPath, f: Nonlinearity, t0: float, t1: float, substeps: int = 2,
                       M_phys: int | None = None, window: float = 0.5, background=None, tol: float = 1e-14,
                       max_sweeps: int = 100):
    """Forward solution of ``u' = A u + f(u + z)`` on ``[t0, t1]`` (held forcing, exponential trapezoid).

    The implicit end-value dependence is resolved by waveform relaxation on
    windows of length ``window``.  Returns ``(times, U)`` on the fine grid.
    ``background`` replaces the held path with a callable ``(g_lo, n) ->
    (bg_a, bg_b, fsub_a, fsub_b)``.
    """
    u0 = np.asarray(u0, dtype=float)
    M = u0.shape[-1]
    M_phys = M_phys or 4 * M
    m = substeps
    h = path.dt / m
    g0 = path.steps_of(t0) * m
    n_total = (path.steps_of(t1) - path.steps_of(t0)) * m
    lam = -wavenumbers(M) ** 2
    wlen = max(1, int(round(window / h)))
    U = np.empty((n_total + 1, M))
    U[0] = u0
    i = 0
    while i < n_total:
        n = min(wlen, n_total - i)
        if background is None:
            zc = held_field(path, path.z_heat, g0 + i, n, m)
            forcing = _Forcing(f, M_phys, zc, zc)
        else:
            forcing = _Forcing(f, M_phys, *background(g0 + i, n))
        Y = np.repeat(U[i][None], n + 1, axis=0)
        for _ in range(max_sweeps):
            ga, gb = forcing(Y)
            new = _sweep_forward(lam, ga, gb, U[i], h)
            change = np.max(np.abs(new - Y))
            Y = new
            if change <= tol * max(1.0, np.max(np.abs(Y))):
                break
        else:
            raise LPConvergenceError("waveform relaxation stalled")
        U[i:i + n + 1] = Y
        i += n
    return (g0 + np.arange(n_total + 1)) * h, U


def invariance_residual(zeta, ou: OUPath, f: Nonlinearity, cfg: LPConfig, T_inv: float = 0.5,
                        sample_every: float = 0.05, perturb=None) -> dict:
    """Distance of a forward orbit from the manifold of the shifted fibre.

    Starts at ``zeta + h(zeta)`` (plus ``perturb`` on the high modes for an
    off-manifold start), integrates the heat RDS to ``T_inv`` and, at each
    sampled time ``t``, compares the high modes with ``h(P u(t), theta_t omega)``.
    """
    sol0 = lp_solve_heat(zeta, ou, f, cfg)
    u0 = sol0.point.copy()
    if perturb is not None:
        u0[cfg.N:] += np.asarray(perturb, dtype=float)[cfg.N:]
    fixed = replace(cfg, T_back=sol0.T_back)
    times, U = integrate_heat_rds(u0, ou, f, 0.0, T_inv, cfg.substeps, cfg.M_phys)
    stride = max(1, int(round(sample_every / ou.dt))) * cfg.substeps
    sample_t, resid = [], []
    for idx in range(0, U.shape[0], stride):
        t = times[idx]
        shifted = ou.shift(ou.steps_of(t) * ou.dt)
        sol = lp_solve_heat(U[idx][:cfg.N], shifted, f, fixed, sol0.gap)
        resid.append(float(np.linalg.norm(U[idx][cfg.N:] - sol.graph_value[cfg.N:])))
        sample_t.append(float(t))
    return {"times": np.array(sample_t), "residuals": np.array(resid), "max": float(max(resid)),
            "T_back": sol0.T_back, "trajectory": (times, U)}


# ---------------------------------------------------------------------------
# consistency with the manifold built around a pullback stationary solution


def pullback_stationary(ou: OUPath, f: Nonlinearity, T_back: float, T_pb: float, substeps: int,
                        M_phys: int | None = None):
    """Approximate ``V* = u* - z*`` on ``[-T_back, 0]`` by integrating from ``V = 0`` at ``-T_back - T_pb``."""
    M = ou.z_heat.shape[-1]
    start = -(ou.steps_of(T_back) + ou.steps_of(T_pb)) * ou.dt
    times, V = integrate_heat_rds(np.zeros(M), ou, f, start, 0.0, substeps, M_phys)
    keep = ou.steps_of(T_back) * substeps
    return times[-keep - 1:], V[-keep - 1:]


def consistency_check(xi, ou: OUPath, f: Nonlinearity, cfg: LPConfig, pullback_tol: float = 1e-8,
                      T_pb0: float = 5.0, T_pb_max: float = 160.0) -> dict:
    """Compare the manifold point over ``xi`` from the two constructions.

    (A) ``z*``-shift: solve the LP for ``V`` with ``zeta = xi - P z*(0)``, add ``z*(0)``.
    (B) Build ``u*`` by pullback, solve the LP for ``U = u - u*`` with
        ``zeta = xi - P u*(0)``, add ``u*(0)``.
    ``xi`` holds the N low-mode coordinates of the physical point.
    """
    N = cfg.N
    M = ou.z_heat.shape[-1]
    M_phys = cfg.M_phys or 4 * M
    xi = np.asarray(xi, dtype=float)[:N]
    z0 = ou.at(0.0, "heat")
    sol_a = lp_solve_heat(xi - z0[:N], ou, f, cfg)
    point_a = sol_a.point + z0

    T = sol_a.T_back
    m = cfg.substeps
    J = _steps_for(T, ou.dt, m)
    zc = held_field(ou, ou.z_heat, -J, J, m)
    history, prev, T_pb, settled = [], None, T_pb0, False
    while True:
        _, V = pullback_stationary(ou, f, T, T_pb, m, M_phys)
        if prev is not None:
            change = float(np.max(np.linalg.norm(V - prev, axis=-1)))
            history.append({"T_pb": T_pb, "change": change})
            if change <= pullback_tol:
                settled = True
                break
        prev = V
        if 2 * T_pb > T_pb_max:
            break
        T_pb *= 2
    u_a, u_b = V[:-1] + zc, V[1:] + zc
    fu_a = apply_nonlinearity(u_a, 0.0, f, M_phys)
    fu_b = apply_nonlinearity(u_b, 0.0, f, M_phys)
    u_star0 = V[-1] + z0
    fixed = replace(cfg, T_back=T)
    sol_b = lp_solve_heat(xi - u_star0[:N], ou, f, fixed, sol_a.gap, background=(u_a, u_b, fu_a, fu_b))
    point_b = sol_b.point + u_star0
    return {
        "point_shift": point_a,
        "point_pullback": point_b,
        "discrepancy": float(np.linalg.norm(point_a - point_b)),
        "T_pb": T_pb,
        "settled": settled,
        "pullback_history": history,
        "lp_residuals": (sol_a.final_residual, sol_b.final_residual),
        "T_back": T,
    }


# ---------------------------------------------------------------------------
# wave


def _wave_fixed_point(xi, forcing: _Forcing, M, N, nu, h, times, eta, tol, max_iters):
    c = low_c(N, nu)
    k = wavenumbers(N)
    lam_p = lambda_plus(k, nu)
    lam_m = (-1.0 - 2.0 * c) / (2.0 * nu)
    C = C_blocks(M, nu)[N:]
    Phi, W1, W2 = exp_weights(C, h)
    wa_vec = (W1 - W2)[:, :, 1]
    wb_vec = W2[:, :, 1]
    Cinv = np.linalg.inv(C)
    J = times.size - 1
    ap = np.exp(np.outer(times, lam_p)) * xi
    am = np.zeros((J + 1, N))
    Yh = np.zeros((J + 1, M - N, 2))

    def assemble(ap, am, Yh):
        u = np.empty((J + 1, M))
        v = np.empty((J + 1, M))
        u[:, :N] = ap + am
        v[:, :N] = c * (ap - am)
        u[:, N:] = Yh[..., 0]
        v[:, N:] = Yh[..., 1]
        return u, v

    u, v = assemble(ap, am, Yh)
    residuals = []
    for _ in range(max_iters):
        ga, gb = forcing(u)
        pa, pb = ga[:, :N] / (2.0 * c), gb[:, :N] / (2.0 * c)
        ap = _sweep_backward(lam_p, pa, pb, xi, h)
        am = _sweep_forward(lam_m, -pa, -pb, pa[0] / lam_m, h)
        gha, ghb = ga[:, N:], gb[:, N:]
        w = gha[..., None] * wa_vec + ghb[..., None] * wb_vec
        y0 = -Cinv[:, :, 1] * gha[0][:, None]
        Yh = affine_recurrence_2x2(Phi, w, y0)
        nu_, nv_ = assemble(ap, am, Yh)
        r = _weighted_sup(times, e_norm_arrays(nu_ - u, nv_ - v, nu, N), eta)
        u, v = nu_, nv_
        residuals.append(r)
        if not np.isfinite(r):
            raise LPConvergenceError("weighted norm overflow")
        if r <= tol:
            return u, v, residuals
    raise LPConvergenceError(f"no convergence in {max_iters} iterations (last residual {residuals[-1]:.3e})")


def lp_solve_wave(xi, ou: OUPath, nu: float, f: Nonlinearity, cfg: LPConfig = LPConfig(),
                  report: GapReport | None = None) -> LPSolution:
    """Wave-side graph ``h^nu(xi, omega)`` in the ``(u, v)`` phase variables.

    ``xi`` holds the N coordinates of ``P1 U`` on ``e_k^+`` (or a PhasePoint,
    whose P1 part is used).  Forcing is ``f(u + z_wave)`` with the path's
    wave position.
    """
    if ou.z_wave is None:
        raise ValueError("wave LP needs a wave OU path")
    M = ou.z_wave.shape[-1]
    N = cfg.N
    if not nu < max_nu(N):
        raise ValueError(f"nu={nu} outside the real regime nu < {max_nu(N)}")
    if isinstance(xi, PhasePoint):
        xi = low_coordinates(xi)[0]
    xi = np.asarray(xi, dtype=float)[:N]
    if report is None:
        report = gap_check(N, nu=nu, L_f=f.lipschitz, lipschitz=cfg.lipschitz)
    if not report.passes:
        raise ValueError(f"gap condition fails (gap={report.gap_value:.4f})")
    T = cfg.T_back if cfg.T_back is not None else auto_T_back(report, f, cfg.tol)
    m = cfg.substeps
    J = _steps_for(T, ou.dt, m)
    h = ou.dt / m
    times = np.arange(-J, 1) * h
    M_phys = cfg.M_phys or 4 * M
    zc = held_field(ou, ou.z_wave, -J, J, m)
    forcing = _Forcing(f, M_phys, zc, zc)
    u, v, res = _wave_fixed_point(xi, forcing, M, N, nu, h, times, report.eta, cfg.tol, cfg.max_iters)
    traj = WeightedTrajectory(times, u, v, report.eta)
    point = PhasePoint(u[-1].copy(), v[-1].copy(), nu, N)
    ap, am = low_coordinates(point)
    low_minus = from_low_coordinates(np.zeros_like(ap), am, M, nu, N)
    gu, gv = low_minus.u, low_minus.v
    gu[N:], gv[N:] = point.u[N:], point.v[N:]
    graph = PhasePoint(gu, gv, nu, N)
    wn = _weighted_sup(times, e_norm_arrays(u, v, nu, N), report.eta)
    xi_norm = float(e_norm_arrays(*_p1_arrays(xi, M, nu, N), nu, N))
    bound = tempered_bound(xi_norm, None if f.bound is None else f.bound * math.sqrt(math.pi), report)
    return LPSolution("wave", traj, xi.copy(), graph, point, len(res), res, report, T, h, wn, bound)


def _p1_arrays(xi, M, nu, N):
    P = from_low_coordinates(xi, np.zeros_like(xi), M, nu, N)
    return P.u, P.v


# ---------------------------------------------------------------------------
# manifold samples and distances


def base_grid(N: int, R: float = 1.0, points: int = 5) -> np.ndarray:
    """Tensor grid over the first ``min(N, 2)`` low coordinates, kept inside ``|zeta| <= R``."""
    d = min(N, 2)
    axis = np.linspace(-R, R, points)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    mesh = mesh[np.linalg.norm(mesh, axis=1) <= R * (1 + 1e-12)]
    out = np.zeros((mesh.shape[0], N))
    out[:, :d] = mesh
    return out


@dataclass(frozen=True, eq=False)
class ManifoldSample:
    bases: np.ndarray
    solutions: list
    seed: int | None
    R: float

    def __post_init__(self):
        if np.any(np.linalg.norm(self.bases, axis=1) > self.R * (1 + 1e-12)):
            raise ValueError("base points must lie in the ball of radius R")

    @property
    def points(self) -> list:
        return [s.point for s in self.solutions]


def sample_heat_manifold(ou: OUPath, f: Nonlinearity, cfg: LPConfig, R: float = 1.0, points: int = 5,
                         bases=None) -> ManifoldSample:
    bases = base_grid(cfg.N, R, points) if bases is None else np.atleast_2d(bases)
    report = gap_check(cfg.N, L_f=f.lipschitz)
    sols = [lp_solve_heat(b, ou, f, cfg, report) for b in bases]
    return ManifoldSample(bases, sols, ou.seed, R)


def graph_lipschitz_estimate(sample: ManifoldSample) -> float:
    """Largest finite-difference slope of the graph over pairs of base points."""
    B = sample.bases
    G = np.array([np.asarray(s.graph_value.u if isinstance(s.graph_value, PhasePoint) else s.graph_value)
                  for s in sample.solutions])
    best = 0.0
    for i in range(len(B)):
        for j in range(i + 1, len(B)):
            d = np.linalg.norm(B[i] - B[j])
            if d > 0:
                best = max(best, float(np.linalg.norm(G[i] - G[j]) / d))
    return best


def matched_wave_base(u0, u_t, nu: float, N: int) -> tuple[PhasePoint, np.ndarray]:
    """``U~ = (u0, u0/2 + nu u_t)`` and its P1 coordinates."""
    U = PhasePoint(u0, 0.5 * np.asarray(u0) + nu * np.asarray(u_t), nu, N)
    return U, low_coordinates(U)[0]


def manifold_distance(zeta, ou: OUPath, nu: float, f: Nonlinearity, cfg: LPConfig,
                      heat_report: GapReport | None = None, wave_report: GapReport | None = None) -> dict:
    """Matched distance between the heat manifold (on the substituted fibre) and the wave manifold.

    The heat LP is driven by the wave position path.  Its point ``u0`` and
    velocity ``u_t`` give ``U~``; the wave manifold point over ``xi = P1 U~``
    is compared in the E-norm and in L2 on the ``u`` components.
    """
    N = cfg.N
    M = ou.z_wave.shape[-1]
    M_phys = cfg.M_phys or 4 * M
    heat_path = ou.as_heat_forcing()
    hs = lp_solve_heat(zeta, heat_path, f, cfg, heat_report)
    u0, u_t = manifold_point_heat(hs, heat_path, f, M_phys)
    U_t, xi = matched_wave_base(u0, u_t, nu, N)
    ws = lp_solve_wave(xi, ou, nu, f, cfg, wave_report)
    diff = U_t - ws.point
    d_E = float(e_norm_arrays(diff.u, diff.v, nu, N))
    d_L2 = float(np.linalg.norm(diff.u))
    z0 = ou.at(0.0, "wave")
    zd0 = ou.at(0.0, "zdot")
    # u_tt = A u_t + f'(u + z) (u_t + z_t), evaluated pseudo-spectrally
    grid_w = dst_backward(u0 + z0, M_phys)
    grid_v = dst_backward(u_t + zd0, M_phys)
    u_tt = -wavenumbers(M) ** 2 * u_t + dst_forward(f.derivative(grid_w) * grid_v, M)
    return {
        "zeta": np.asarray(zeta, dtype=float),
        "dist_E": d_E,
        "dist_L2": d_L2,
        "nu_u_tt": float(nu * np.linalg.norm(u_tt)),
        "heat": hs,
        "wave": ws,
    }
