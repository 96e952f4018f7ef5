"""Experiment drivers behind the command-line interface.

Each ``run_*`` takes a validated :class:`ExperimentConfig`, writes its CSV
and JSON outputs under ``cfg.out`` and returns the summary dict, whose
``passed`` entry decides the exit code.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import replace

import numpy as np

from .config import ExperimentConfig
from .integrators import CoupledParams, run_coupled
from .lyapunov_perron import (
    LPConfig,
    LPConvergenceError,
    auto_T_back,
    base_grid,
    consistency_check,
    graph_lipschitz_estimate,
    lp_solve_heat,
    lp_solve_wave,
    manifold_distance,
    ManifoldSample,
)
from .ou import NoisePath, OUStepper, build_path
from .spectral import wavenumbers
from .wave_operator import gap_check


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"not serialisable: {type(x)}")


def _clean(obj):
    # json cannot carry inf/nan; spell them out
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def write_csv(path: str, header: list, rows: list) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _lp_config(cfg: ExperimentConfig) -> LPConfig:
    return LPConfig(N=cfg.N, tol=cfg.tol, max_iters=cfg.max_iters, substeps=cfg.substeps,
                    T_back=cfg.t_back, M_phys=cfg.m_phys, lipschitz=cfg.lipschitz)


def _gap_report(cfg: ExperimentConfig, nu=None, L_h=None):
    kwargs = {"L_F": cfg.L_F} if cfg.L_F >= 0 else {"L_f": cfg.nonlinearity().lipschitz}
    return gap_check(cfg.N, nu=nu, K=cfg.K, L_h=cfg.L_h if L_h is None else L_h, lipschitz=cfg.lipschitz, **kwargs)


def _finish(cfg: ExperimentConfig, name: str, summary: dict) -> dict:
    summary["config"] = cfg.resolved()
    write_json(os.path.join(cfg.out, f"{name}.json"), summary)
    return summary


# ---------------------------------------------------------------------------


def run_gap(cfg: ExperimentConfig) -> dict:
    report = _gap_report(cfg, None if cfg.heat else cfg.nu)
    summary = {"experiment": "gap-check", "report": report.to_dict(), "passed": report.passes}
    return _finish(cfg, "gap_check", summary)


def _variance_rows(x: np.ndarray, target: np.ndarray, label: str, nu):
    n = x.shape[0]
    sq = x * x
    var = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(n)
    rows, ok = [], True
    for k in range(x.shape[1]):
        dev = abs(var[k] - target[k])
        good = bool(dev <= 3.0 * se[k]) or dev == 0.0
        ok &= good
        z = dev / se[k] if se[k] > 0 else 0.0
        rows.append([label, "" if nu is None else nu, k + 1, target[k], var[k], se[k], z, int(good)])
    return rows, ok


def run_stationary(cfg: ExperimentConfig) -> dict:
    """Evolve the exact OU transitions from zero to ``T`` and compare per-mode variances with the laws."""
    Q = cfg.spectrum()
    R = cfg.replicas
    n_steps = int(round(cfg.T / cfg.dt))
    k2 = wavenumbers(cfg.M) ** 2
    rows, passed, velocity = [], True, []
    heat_done = False
    for nu in cfg.nus:
        stepper = OUStepper(Q, cfg.dt, nu)
        noise = NoisePath(cfg.seed, cfg.dt, cfg.M, R)
        zero = np.zeros((R, cfg.M))
        state = {"heat": zero, "z": zero, "zdot": zero}
        for i in range(n_steps):
            state = stepper.step(state, noise.normals(i, i + 1)[0])
        if not heat_done:
            r, ok = _variance_rows(state["heat"], Q.sigma**2 * Q.q / (2 * k2), "z_heat", None)
            rows += r
            passed &= ok
            heat_done = True
        for key, label, target in (("z", "z_wave", Q.sigma**2 * Q.q / (2 * k2)),
                                   ("zdot", "zdot_wave", Q.sigma**2 * Q.q / (2 * nu))):
            r, ok = _variance_rows(state[key], target, label, nu)
            rows += r
            passed &= ok
        e = nu * nu * np.sum(state["zdot"] ** 2, axis=1)
        mean, se = float(e.mean()), float(e.std(ddof=1) / math.sqrt(R))
        target = nu * Q.sigma**2 * Q.trace / 2.0
        velocity.append({"nu": nu, "nu2_E_zdot2": mean, "se": se, "target": target,
                         "within_3se": bool(abs(mean - target) <= 3 * se or mean == target)})
    ratios = []
    for a, b in zip(velocity, velocity[1:]):
        if b["nu2_E_zdot2"] > 0:
            ratios.append({"nus": [a["nu"], b["nu"]], "ratio": a["nu2_E_zdot2"] / b["nu2_E_zdot2"],
                           "nu_ratio": a["nu"] / b["nu"]})
    write_csv(os.path.join(cfg.out, "stationary.csv"),
              ["quantity", "nu", "mode", "target", "variance", "se", "z_score", "pass"], rows)
    summary = {"experiment": "stationary", "replicas": R, "T": cfg.T, "dt": cfg.dt,
               "variances_pass": passed, "velocity_law": velocity, "velocity_ratios": ratios,
               "rows": len(rows), "passed": passed}
    return _finish(cfg, "stationary", summary)


def run_sk(cfg: ExperimentConfig) -> dict:
    """Exceedance probability of ``sup_t |u^nu - u| >= delta`` over the nu sweep."""
    Q = cfg.spectrum()
    f = cfg.nonlinearity()
    u0 = np.zeros(cfg.M)
    u0[0] = cfg.u0_amp
    table = []
    for nu in cfg.nus:
        noise = NoisePath(cfg.seed, cfg.dt, cfg.M, cfg.replicas)
        _, _, stats = run_coupled(u0, np.zeros(cfg.M), CoupledParams(nu, f, Q, cfg.dt, cfg.m_phys), noise, cfg.T,
                                  store_fields=False)
        sup = stats["sup_diff"][~stats["blown"]]
        n = sup.size
        p = float(np.mean(sup >= cfg.delta)) if n else float("nan")
        table.append({"nu": nu, "exceedance": p, "se": math.sqrt(p * (1 - p) / n) if n else float("nan"),
                      "mean_sup": float(sup.mean()) if n else float("nan"),
                      "sd_sup": float(sup.std(ddof=1)) if n > 1 else 0.0,
                      "blown": int(stats["blown"].sum()), "replicas": cfg.replicas})
    exc = [row["exceedance"] for row in table]
    means = [row["mean_sup"] for row in table]
    strictly = all(b < a for a, b in zip(exc, exc[1:]))
    write_csv(os.path.join(cfg.out, "sk.csv"), ["nu", "exceedance", "se", "mean_sup", "sd_sup", "blown"],
              [[r["nu"], r["exceedance"], r["se"], r["mean_sup"], r["sd_sup"], r["blown"]] for r in table])
    summary = {"experiment": "sk", "delta": cfg.delta, "T": cfg.T, "table": table,
               "exceedance_strictly_decreasing": strictly,
               "mean_sup_strictly_decreasing": all(b < a for a, b in zip(means, means[1:])),
               "passed": strictly}
    return _finish(cfg, "sk", summary)


def _path_for(cfg: ExperimentConfig, T_back: float, nu=None, extra_past: float = 0.0, future: float = 0.0):
    return build_path(cfg.seed, cfg.spectrum(), cfg.dt, -(T_back + extra_past + 2 * cfg.dt), future, nu=nu)


def run_manifold(cfg: ExperimentConfig) -> dict:
    """Sample one manifold (heat, or wave at ``nu``) over the base grid."""
    f = cfg.nonlinearity()
    lp = _lp_config(cfg)
    nu = None if cfg.heat else cfg.nu
    report = _gap_report(cfg, nu)
    if not report.passes:
        return _finish(cfg, "manifold", {"experiment": "manifold", "gap": report.to_dict(), "passed": False,
                                         "error": "gap condition fails"})
    T_back = cfg.t_back or auto_T_back(report, f, cfg.tol)
    path = _path_for(cfg, T_back, nu)
    lp = replace(lp, T_back=T_back)
    bases = base_grid(cfg.N, cfg.R, cfg.grid_points)
    sols, rows = [], []
    for b in bases:
        try:
            s = lp_solve_heat(b, path, f, lp, report) if nu is None else lp_solve_wave(b, path, nu, f, lp, report)
        except LPConvergenceError as exc:
            raise LPConvergenceError(f"base point {b.tolist()}: {exc}") from exc
        sols.append(s)
        rows.append(list(b) + [s.graph_norm(), s.iterations, s.final_residual, s.contraction_estimate])
    sample = ManifoldSample(bases, sols, cfg.seed, cfg.R)
    L_h = graph_lipschitz_estimate(sample)
    strong = _gap_report(cfg, nu, L_h=L_h)
    contraction = max(s.contraction_estimate for s in sols)
    write_csv(os.path.join(cfg.out, "manifold.csv"),
              [f"base_{i + 1}" for i in range(cfg.N)] + ["graph_norm", "iterations", "residual", "contraction"], rows)
    ok = contraction <= report.gap_value + 0.1 and all(s.final_residual <= cfg.tol for s in sols)
    summary = {"experiment": "manifold", "system": report.system, "gap": report.to_dict(), "T_back": T_back,
               "points": len(bases), "sup_graph_norm": max(s.graph_norm() for s in sols),
               "max_contraction": contraction, "L_h_estimate": L_h, "L_h_bound": report.L_h_bound,
               "strong_gap_value": strong.strong_gap_value, "strong_gap_passes": strong.strong_passes,
               "max_weighted_norm": max(s.weighted_norm for s in sols),
               "tempered_bound": max(s.tempered_bound for s in sols), "passed": bool(ok)}
    return _finish(cfg, "manifold", summary)


def manifold_distance_sweep(cfg: ExperimentConfig, nus=None, bases=None, lp: LPConfig | None = None):
    """Sup matched distances per nu; returns ``(table, per_point_rows)``."""
    f = cfg.nonlinearity()
    lp = lp or _lp_config(cfg)
    bases = base_grid(cfg.N, cfg.R, cfg.grid_points) if bases is None else np.atleast_2d(bases)
    heat_report = _gap_report(cfg, None)
    table, rows = [], []
    for nu in (cfg.nus if nus is None else nus):
        wave_report = _gap_report(cfg, nu)
        if not (heat_report.passes and wave_report.passes):
            raise ValueError(f"gap condition fails at nu={nu}")
        T_back = lp.T_back or max(auto_T_back(heat_report, f, lp.tol), auto_T_back(wave_report, f, lp.tol))
        path = _path_for(cfg, T_back, nu)
        run = replace(lp, T_back=T_back)
        dE, dL2, dtt = [], [], []
        t0 = time.time()
        for b in bases:
            try:
                d = manifold_distance(b, path, nu, f, run, heat_report, wave_report)
            except LPConvergenceError as exc:
                raise LPConvergenceError(f"nu={nu}, base point {b.tolist()}: {exc}") from exc
            dE.append(d["dist_E"])
            dL2.append(d["dist_L2"])
            dtt.append(d["nu_u_tt"])
            rows.append([nu] + list(b) + [d["dist_E"], d["dist_L2"], d["nu_u_tt"]])
        table.append({"nu": nu, "sup_dist_E": max(dE), "sup_dist_L2": max(dL2), "sup_nu_u_tt": max(dtt),
                      "points": len(bases), "T_back": T_back, "seconds": time.time() - t0})
    return table, rows


def run_manifold_dist(cfg: ExperimentConfig) -> dict:
    table, rows = manifold_distance_sweep(cfg)
    dec = lambda key: all(b[key] < a[key] for a, b in zip(table, table[1:]))
    write_csv(os.path.join(cfg.out, "manifold_dist.csv"), ["nu", "sup_dist_E", "sup_dist_L2", "sup_nu_u_tt"],
              [[r["nu"], r["sup_dist_E"], r["sup_dist_L2"], r["sup_nu_u_tt"]] for r in table])
    write_csv(os.path.join(cfg.out, "manifold_dist_points.csv"),
              ["nu"] + [f"base_{i + 1}" for i in range(cfg.N)] + ["dist_E", "dist_L2", "nu_u_tt"], rows)
    summary = {"experiment": "manifold-dist", "table": table, "E_strictly_decreasing": dec("sup_dist_E"),
               "L2_strictly_decreasing": dec("sup_dist_L2"), "nu_u_tt_decreasing": dec("sup_nu_u_tt"),
               "note": "matched distance: an upper bound on the semi-distance, not a certified infimum"}
    summary["passed"] = summary["E_strictly_decreasing"] and summary["L2_strictly_decreasing"]
    return _finish(cfg, "manifold_dist", summary)


def run_consistency(cfg: ExperimentConfig, T_pb0: float = 5.0, T_pb_max: float = 160.0) -> dict:
    f = cfg.nonlinearity()
    lp = _lp_config(cfg)
    report = _gap_report(cfg, None)
    T_back = cfg.t_back or auto_T_back(report, f, cfg.tol)
    path = _path_for(cfg, T_back, None, extra_past=T_pb_max)
    lp = replace(lp, T_back=T_back)
    xi = np.zeros(cfg.N)
    xi[0] = cfg.zeta1
    if cfg.N > 1:
        xi[1] = cfg.zeta2
    res = consistency_check(xi, path, f, lp, cfg.pullback_tol, T_pb0, T_pb_max)
    budget = 10.0 * (cfg.tol + cfg.pullback_tol)
    changes = [h["change"] for h in res["pullback_history"]]
    halving = all(b <= 0.5 * a for a, b in zip(changes, changes[1:]))
    summary = {"experiment": "consistency", "xi": xi, "discrepancy": res["discrepancy"], "budget": budget,
               "T_pb": res["T_pb"], "settled": res["settled"], "pullback_history": res["pullback_history"],
               "pullback_change_halves": halving, "T_back": T_back,
               "warning": None if res["settled"] else "pullback estimate has not settled",
               "passed": bool(res["settled"] and res["discrepancy"] <= budget)}
    return _finish(cfg, "consistency", summary)


RUNNERS = {
    "gap-check": run_gap,
    "stationary": run_stationary,
    "sk": run_sk,
    "manifold": run_manifold,
    "manifold-dist": run_manifold_dist,
    "consistency": run_consistency,
}
