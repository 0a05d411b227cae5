"""Experiment configuration loaded from TOML."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


EXPERIMENTS = ("smoothing", "stability", "optimality", "compact_support", "be_check", "hamiltonian")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass
class ExperimentConfig:
    """All knobs of the lab experiments.

    Every field has a default; :data:`EXPERIMENT_DEFAULTS` adjusts a few of
    them per experiment before the TOML file is applied.

    Attributes
    ----------
    n, K : manifold dimension and curvature magnitude (curvature ``-K``).
    m, c0, c1, coeff : pressure law ``coeff * rho^m`` and its declared constants.
    M, M_hat : masses of the primary and secondary data.
    N, R_max : radial grid.
    t_start, t_end, n_checkpoints : log-spaced checkpoint window.
    dt_initial, dt_max, dt_rel_max, newton_tol, newton_max_iters : time stepping.
    eps_scale : regularisation ``eps = eps_scale / sup rho0``.
    width, width_hat : radii of the near-Dirac data.
    delta : distance between the centres of the two data.
    delta_max : largest separation for which the optimality verdicts are issued.
    masses : mass sweep for the smoothing scaling fit.
    K_sweep : curvatures for the optimality proportionality check.
    t0_barenblatt : age of the Barenblatt datum used by the optimality scan.
    ot_engine, ent_reg : transport engine for discrete upper bounds
        (``"simplex"`` or ``"sinkhorn"``; ``ent_reg`` is relative to the median cost).
    n_shells, n_dirs : point-cloud discretisation for upper bounds.
    quad_n_r, quad_n_alpha : Gauss-Legendre orders for the bisector bound.
    slack : relative slack of the stability verdict.
    collar, datum_radius, barrier_gap, datum_height : compact-support geometry.
    be_sizes : grid sizes of the Bakry-Emery refinement study.
    euclidean_control : also run the co-centred flat control in ``stability``.
    cartan_hadamard : drop the linear-in-time term of the stability factor.
    C_fit : smoothing constant for the growth factors; fitted on the run when unset.
    slope_tol, mass_exponent_tol, optimality_slope_tol, k_sweep_tol : verdict tolerances.
    seed : recorded in the manifest; seeds any randomised choice.
    out_dir : output directory.
    write_checkpoints : emit ``rho_t*.csv`` files.
    """

    experiment: str = "smoothing"
    n: int = 3
    K: float = 1.0
    m: float = 2.0
    c0: float = 1.0
    c1: float = 1.0
    coeff: float = 1.0
    M: float = 1.0
    M_hat: float | None = None
    N: int = 1024
    R_max: float = 3.0
    t_start: float = 1e-3
    t_end: float = 1e-1
    n_checkpoints: int = 9
    dt_initial: float = 1e-8
    dt_max: float = 1e-3
    dt_rel_max: float = 0.02
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    eps_scale: float = 1e-3
    width: float = 0.02
    width_hat: float = 0.04
    delta: float = 0.05
    delta_max: float = 0.05
    masses: list = field(default_factory=list)
    K_sweep: list = field(default_factory=list)
    t0_barenblatt: float = 1e-6
    ot_engine: str = "simplex"
    ent_reg: float = 1e-3
    n_shells: int = 8
    n_dirs: int = 16
    quad_n_r: int = 4
    quad_n_alpha: int = 128
    slack: float = 0.05
    collar: float = 0.2
    datum_radius: float = 0.5
    barrier_gap: float = 0.05
    datum_height: float = 1.0
    be_sizes: list = field(default_factory=lambda: [200, 400, 800])
    euclidean_control: bool = True
    cartan_hadamard: bool = False
    C_fit: float | None = None
    slope_tol: float = 0.05
    mass_exponent_tol: float = 0.05
    optimality_slope_tol: float = 0.1
    k_sweep_tol: float = 0.1
    seed: int = 0
    out_dir: str = "out"
    write_checkpoints: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError("n must be an integer >= 2")
        if self.K < 0:
            raise ConfigError("K must be >= 0")
        if self.m <= 1:
            raise ConfigError("m must exceed 1")
        if self.M <= 0 or (self.M_hat is not None and self.M_hat <= 0):
            raise ConfigError("masses must be positive")
        if self.C_fit is not None and self.C_fit < 1:
            raise ConfigError("C_fit must be >= 1")
        if self.c0 <= 0 or self.c1 < self.c0:
            raise ConfigError("need 0 < c0 <= c1")
        if not 0 < self.t_start < self.t_end:
            raise ConfigError("need 0 < t_start < t_end")
        if self.ot_engine not in ("simplex", "sinkhorn"):
            raise ConfigError(f"unknown ot_engine {self.ot_engine!r}")
        if self.N < 4 or self.R_max <= 0:
            raise ConfigError("grid needs N >= 4 and R_max > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self, include_paths: bool = False) -> dict:
        """Field values; ``out_dir`` is left out unless asked for, so reports do not depend on where they are written."""
        d = asdict(self)
        if not include_paths:
            d.pop("out_dir")
        return d


EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "smoothing": dict(n=3, K=1.0, M=1e-3, N=4096, R_max=1.0, width=0.02, masses=[2.5e-4, 1e-3, 4e-3]),
    "stability": dict(n=2, K=1.0, M=1.0, N=600, R_max=3.0, width=0.1, width_hat=0.2, delta=0.05,
                      t_start=1e-3, t_end=1e-1, n_checkpoints=5),
    "optimality": dict(n=2, K=1.0, M=1.0, N=1000, R_max=2.0, t_start=1e-4, t_end=1e-2, n_checkpoints=7,
                       dt_rel_max=0.005, delta=0.01, K_sweep=[0.25, 0.5, 1.0]),
    "compact_support": dict(n=3, K=1.0, m=2.0, N=1500, R_max=1.5, eps_scale=1e-6, n_checkpoints=6),
    "be_check": dict(n=2, K=1.0, R_max=3.0),
    "hamiltonian": dict(n=2, K=1.0, m=2.0, M=1.0, N=400, R_max=3.0, width=0.1, t_end=0.5, dt_max=2e-3),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    base = dict(EXPERIMENT_DEFAULTS[experiment])
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, **base)


_OPTIONAL_FLOATS = ("M_hat", "C_fit")


def _coerce(name: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool) and name not in _OPTIONAL_FLOATS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(default, float) or name in _OPTIONAL_FLOATS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name} must be an array")
        return list(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    return value


def config_from_mapping(data: dict, experiment: str | None = None) -> ExperimentConfig:
    """Build a config from parsed TOML; unknown keys are errors."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    exp = experiment or data.get("experiment") or "smoothing"
    if experiment is not None and "experiment" in data and data["experiment"] != experiment:
        raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
    cfg = default_config(exp)
    updates = {}
    for key, value in data.items():
        if key == "experiment":
            continue
        updates[key] = _coerce(key, value, getattr(cfg, key))
    try:
        return replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data, experiment)
