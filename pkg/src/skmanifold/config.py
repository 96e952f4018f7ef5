"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .spectral import Nonlinearity, QSpectrum
from .wave_operator import max_nu


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


# experiment-specific defaults for keys left unset
EXPERIMENT_DEFAULTS = {
    "gap-check": {},
    "stationary": {"nus": (1e-1, 1e-2), "replicas": 100_000, "dt": 1.0, "T": 12.0},
    "sk": {"nus": (1e-1, 1e-2, 1e-3), "replicas": 200, "T": 1.0},
    "manifold": {"nus": ()},
    "manifold-dist": {"nus": (1e-2, 1e-3, 1e-4)},
    "consistency": {},
}


@dataclass
class ExperimentConfig:
    """All experiment parameters; every field has a default.

    experiment:   subcommand name.
    M, M_phys:    spectral truncation and quadrature points (M_phys 0 means 4M).
    N:            low-mode cutoff.
    heat:         gap-check/manifold on the heat system instead of the wave one.
    nu:           single damping parameter (gap-check, manifold).
    nus:          parameter sweep; empty means the experiment default.
    K, L_F, lipschitz, L_h: gap-condition inputs (L_F < 0 means derive from f).
    f, a:         nonlinearity kind (sine, linear, zero) and amplitude.
    sigma, q_law, q_p: noise intensity and spectrum (q_law power: q_k = k^-p; zero; single: q_1 = 1).
    dt, T, T_back, T_inv: path step, forward horizon, LP horizon (0 = auto), invariance horizon.
    tol, pullback_tol, max_iters, substeps: solver controls.
    R, grid_points, zeta1, zeta2: manifold base ball, grid density and a single base point.
    replicas, seed, delta, u0_amp: Monte Carlo controls.
    out:          output directory.
    """

    experiment: str = "gap-check"
    M: int = 16
    M_phys: int = 0
    N: int = 2
    heat: bool = False
    nu: float = 1e-4
    nus: tuple = ()
    K: float = 1.0
    L_F: float = -1.0
    lipschitz: str = "sharp"
    L_h: float = 0.0
    f: str = "sine"
    a: float = 0.5
    sigma: float = 1.0
    q_law: str = "power"
    q_p: float = 4.0
    dt: float = 1e-3
    T: float = 1.0
    T_back: float = 0.0
    T_inv: float = 0.5
    tol: float = 1e-10
    pullback_tol: float = 1e-8
    max_iters: int = 200
    substeps: int = 2
    R: float = 1.0
    grid_points: int = 5
    zeta1: float = 0.3
    zeta2: float = 0.0
    replicas: int = 0
    seed: int = 42
    delta: float = 0.1
    u0_amp: float = 0.3
    out: str = "out"
    _explicit: set = field(default_factory=set, repr=False, compare=False)

    # derived objects -------------------------------------------------------

    def nonlinearity(self) -> Nonlinearity:
        if self.f == "zero":
            return Nonlinearity.zero()
        if self.f in ("sine", "linear"):
            return Nonlinearity(self.f, self.a)
        raise ConfigError(f"unknown f {self.f!r}")

    def spectrum(self) -> QSpectrum:
        if self.q_law == "power":
            return QSpectrum.power_law(self.M, self.q_p, self.sigma)
        if self.q_law == "zero":
            return QSpectrum.zeros(self.M)
        if self.q_law == "single":
            q = [1.0] + [0.0] * (self.M - 1)
            return QSpectrum(q, self.sigma)
        raise ConfigError(f"unknown q_law {self.q_law!r}")

    @property
    def m_phys(self) -> int:
        return self.M_phys or 4 * self.M

    @property
    def t_back(self) -> float | None:
        return self.T_back or None

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("_explicit")
        d["M_phys"] = self.m_phys
        d["nus"] = list(self.nus)
        return d

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENT_DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for key, val in EXPERIMENT_DEFAULTS[self.experiment].items():
            if key not in self._explicit:
                setattr(self, key, val)
        if self.M < 1 or not 1 <= self.N <= self.M:
            raise ConfigError("need 1 <= N <= M")
        if self.M_phys and self.M_phys < 2 * self.M:
            raise ConfigError("M_phys must be at least 2M")
        if not self.dt > 0 or not self.T > 0 or self.T_back < 0:
            raise ConfigError("dt and T must be positive, T_back nonnegative")
        if self.substeps < 2 or self.substeps % 2:
            raise ConfigError("substeps must be even and >= 2")
        if not self.tol > 0 or not self.pullback_tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.q_law == "power" and self.q_p <= 1:
            raise ConfigError("q_p must exceed 1 for a trace-class Q")
        try:
            f = self.nonlinearity()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if f.lipschitz > 1.0:
            raise ConfigError("L_f must not exceed 1")
        self.spectrum()
        limit = max_nu(self.N)
        for nu in (self.nu,) + tuple(self.nus):
            if not 0 < nu:
                raise ConfigError(f"nu={nu} must be positive")
        wave_nus = list(self.nus)
        if self.experiment in ("gap-check", "manifold") and not self.heat:
            wave_nus.append(self.nu)
        if self.experiment in ("manifold-dist",) or (self.experiment in ("gap-check", "manifold") and not self.heat):
            bad = [nu for nu in wave_nus if nu >= limit]
            if bad:
                raise ConfigError(f"nu {bad} violates nu < 1/(4(N+1)^2) = {limit:.6g}")
        if self.replicas < 0:
            raise ConfigError("replicas must be nonnegative")
        return self


_TYPES = {f.name: f.type for f in fields(ExperimentConfig) if not f.name.startswith("_")}


def _coerce(key: str, raw: str):
    typ = _TYPES[key]
    raw = raw.strip()
    try:
        if typ == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if typ == "float":
            val = float(raw)
            if math.isnan(val):
                raise ValueError(raw)
            return val
        if typ == "tuple":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def build_config(experiment: str, file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, file values and flag overrides (in that order) and validate."""
    values = {**(file_values or {}), **(overrides or {})}
    values.pop("experiment", None)
    cfg = ExperimentConfig(experiment=experiment, **values)
    cfg._explicit = set(values)
    return cfg.validate()


def load_config(experiment: str, path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    file_values = {}
    if path is not None:
        try:
            with open(path) as fh:
                file_values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(experiment, file_values, overrides)
