"""Implicit finite-volume solver for radial porous medium flows.

The equation ``rho_t = Lap P_eps(rho)`` is discretised on cells
``[i dr, (i + 1) dr)`` of a radial grid.  Face fluxes are

    F_{i+1/2} = |S^{n-1}| psi(r_{i+1/2})^{n-1} (P(rho_{i+1}) - P(rho_i)) / dr,

with zero flux at the pole and at the outer radius, and time is advanced
by backward Euler.  Each step solves the nonlinear system with Newton's
method; the Jacobian is tridiagonal and column-wise diagonally dominant, so
every Newton iterate conserves the discrete mass exactly up to rounding.

The module also provides the Euclidean Barenblatt profile and the
travelling-wave barrier used to certify finite propagation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import beta as beta_fn

from .geometry import ModelManifold, radial_laplacian_coefficient, shell_volumes, warping
from .nonlinearity import PorousNonlinearity, RegularizedNonlinearity, potential_psi, regularize


class SolverError(RuntimeError):
    """Raised when time stepping cannot proceed."""


class DomainTooSmallError(SolverError):
    """The support reached the outer buffer of the grid."""


class BarrierError(ValueError):
    """Invalid use of the travelling-wave barrier."""


class RadialGrid:
    """Uniform radial cell grid on ``[0, R_max]``.

    Attributes
    ----------
    faces : ndarray, shape (N + 1,)
    centers : ndarray, shape (N,)
    volumes : ndarray, shape (N,)
        Exact cell volumes.
    face_areas : ndarray, shape (N + 1,)
        ``|S^{n-1}| psi(r_face)^{n-1}``.
    """

    def __init__(self, manifold: ModelManifold, R_max: float, N: int):
        if N < 4:
            raise ValueError("need at least 4 cells")
        if not R_max > 0:
            raise ValueError("R_max must be positive")
        self.manifold = manifold
        self.R_max = float(R_max)
        self.N = int(N)
        self.dr = self.R_max / self.N
        self.faces = np.arange(self.N + 1) * self.dr
        self.centers = self.faces[:-1] + 0.5 * self.dr
        self.volumes = shell_volumes(manifold, self.faces[:-1], self.faces[1:])
        self.face_areas = manifold.sphere_area * warping(manifold, self.faces) ** (manifold.n - 1)
        # Transmissibilities of the N - 1 interior faces.
        self.trans = self.face_areas[1:-1] / self.dr

    def __repr__(self):
        return f"RadialGrid(n={self.manifold.n}, K={self.manifold.K}, R_max={self.R_max}, N={self.N})"

    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        """Flux-form Laplacian ``(L u)_i`` (zero flux at both ends)."""
        flux = self.trans * np.diff(u)
        div = np.zeros_like(u)
        div[:-1] += flux
        div[1:] -= flux
        return div / self.volumes

    def laplacian_bands(self, diag_scale=None) -> np.ndarray:
        """Banded form of ``V L D`` with ``D = diag(diag_scale)``, for ``solve_banded``."""
        N = self.N
        d = np.ones(N) if diag_scale is None else np.asarray(diag_scale, dtype=float)
        T = self.trans
        ab = np.zeros((3, N))
        ab[0, 1:] = T * d[1:]
        ab[2, :-1] = T * d[:-1]
        main = np.zeros(N)
        main[:-1] -= T * d[:-1]
        main[1:] -= T * d[1:]
        ab[1] = main
        return ab


@dataclass
class DensityField:
    """Cell averages of a radial density at time ``t``."""

    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise ValueError("density values do not match the grid")

    def mass(self) -> float:
        return float(np.dot(self.values, self.grid.volumes))

    def lp_norm(self, p: float) -> float:
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float(np.dot(np.abs(self.values) ** p, self.grid.volumes) ** (1.0 / p))

    def sup(self) -> float:
        return float(np.max(self.values))

    def support_radius(self, threshold: float = 1e-12) -> float:
        """Outer face of the last cell with density above ``threshold``."""
        idx = np.nonzero(self.values > threshold)[0]
        return 0.0 if idx.size == 0 else float(self.grid.faces[idx[-1] + 1])

    def copy(self, t: float | None = None) -> "DensityField":
        return DensityField(self.grid, self.values.copy(), self.t if t is None else t)


@dataclass
class SolverConfig:
    """Time-stepping controls.

    ``dt_rel_max`` caps the step relative to the current time, which keeps
    the relative time error uniform over logarithmic time windows.
    """

    dt_initial: float = 1e-6
    dt_max: float = 1e-3
    dt_rel_max: float | None = None
    dt_growth: float = 1.2
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    max_halvings: int = 40
    checkpoints: tuple = ()
    buffer_fraction: float = 0.05
    support_threshold: float = 1e-12
    keep_steps: bool = False

    def __post_init__(self):
        if not (0 < self.dt_initial <= self.dt_max):
            raise ValueError("need 0 < dt_initial <= dt_max")
        if not 0 < self.newton_tol <= 1e-8:
            raise ValueError("newton_tol must lie in (0, 1e-8]")


@dataclass
class StepInfo:
    newton_iters: int
    residual: float
    mass_change: float


@dataclass
class Trajectory:
    """Solution snapshots plus step statistics.

    ``checkpoints`` holds the states at the requested times (and the initial
    datum); ``steps`` holds every accepted state when the solver ran with
    ``keep_steps``.
    """

    Pe: RegularizedNonlinearity
    checkpoints: list[DensityField]
    steps: list[DensityField] = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0
    newton_iters: int = 0
    max_step_mass_change: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([c.t for c in self.checkpoints])

    def at(self, t: float) -> DensityField:
        for c in self.checkpoints:
            if abs(c.t - t) <= 1e-12 * max(1.0, abs(t)):
                return c
        raise KeyError(f"no checkpoint at t={t}")


def _newton(grid: RadialGrid, rho_old: np.ndarray, Pe: RegularizedNonlinearity, dt: float, tol: float, max_iters: int):
    V = grid.volumes
    scale = max(float(np.max(np.abs(rho_old))), 1e-300)
    rho = rho_old.copy()
    res = np.inf
    for it in range(1, max_iters + 1):
        p = Pe.value(rho)
        G = V * (rho - rho_old) - dt * V * grid.apply_laplacian(p)
        res = float(np.max(np.abs(G) / V)) / scale
        if not np.isfinite(res):
            return None, it, res
        if res < tol and it > 1:
            return rho, it - 1, res
        ab = -dt * grid.laplacian_bands(Pe.derivative(rho))
        ab[1] += V
        rho = rho - solve_banded((1, 1), ab, G, check_finite=False)
    return None, max_iters, res


def pme_step(rho: DensityField, Pe: RegularizedNonlinearity, dt: float, cfg: SolverConfig | None = None):
    """One backward-Euler step.

    Returns
    -------
    (DensityField, StepInfo)

    Raises
    ------
    SolverError
        If Newton fails to converge within the iteration budget.
    """
    cfg = cfg or SolverConfig()
    if dt <= 0:
        raise ValueError("dt must be positive")
    new, iters, res = _newton(rho.grid, rho.values, Pe, dt, cfg.newton_tol, cfg.newton_max_iters)
    if new is None:
        raise SolverError(f"Newton failed at t={rho.t:.6g}, dt={dt:.3g}: residual {res:.3g} after {iters} iterations")
    floor = -1e-9 * max(float(np.max(rho.values)), 1e-300)
    if np.min(new) < floor:
        raise SolverError(f"negative density {np.min(new):.3g} after step at t={rho.t:.6g}")
    new = np.maximum(new, 0.0)
    out = DensityField(rho.grid, new, rho.t + dt)
    m0 = rho.mass()
    info = StepInfo(iters, res, abs(out.mass() - m0) / max(abs(m0), 1e-300))
    return out, info


def _check_buffer(field_: DensityField, cfg: SolverConfig):
    grid = field_.grid
    start = int(math.floor((1.0 - cfg.buffer_fraction) * grid.N))
    if np.any(field_.values[start:] > cfg.support_threshold):
        raise DomainTooSmallError(
            f"support reached r={field_.support_radius(cfg.support_threshold):.4g} "
            f"(buffer starts at {grid.faces[start]:.4g}, R_max={grid.R_max}) at t={field_.t:.6g}"
        )


def default_eps(rho0: DensityField, scale: float = 0.5) -> float:
    """Regularisation ``eps = scale / sup rho0``; ``scale <= 1`` keeps the datum below ``1/eps``."""
    s = rho0.sup()
    if s <= 0:
        raise ValueError("datum must be positive somewhere")
    return scale / s


def evolve(rho0: DensityField, P, T: float, cfg: SolverConfig | None = None, eps: float | None = None) -> Trajectory:
    """Advance ``rho0`` to time ``T`` with adaptive backward Euler.

    Parameters
    ----------
    rho0 : DensityField
    P : PorousNonlinearity or RegularizedNonlinearity
        A bare law is regularised with ``eps`` (default ``1 / (2 sup rho0)``).
    T : float
        Final time; always recorded as the last checkpoint.
    cfg : SolverConfig

    Raises
    ------
    DomainTooSmallError
        When the support enters the outer 5% of the grid.
    SolverError
        When Newton keeps failing after ``max_halvings`` step halvings.
    """
    cfg = cfg or SolverConfig()
    if isinstance(P, PorousNonlinearity):
        P = regularize(P, default_eps(rho0) if eps is None else eps)
    if rho0.sup() > P.rho_cut * (1 + 1e-12):
        raise ValueError("datum exceeds 1/eps; choose a smaller eps")
    stops = sorted({float(t) for t in cfg.checkpoints if rho0.t < t < T} | {float(T)})
    traj = Trajectory(P, [rho0.copy()])
    if cfg.keep_steps:
        traj.steps.append(rho0.copy())
    _check_buffer(rho0, cfg)

    cur = rho0.copy()
    dt = cfg.dt_initial
    for stop in stops:
        while cur.t < stop:
            step = min(dt, stop - cur.t)
            if stop - (cur.t + step) < 1e-12 * max(stop, 1.0):
                step = stop - cur.t
            halvings = 0
            while True:
                try:
                    nxt, info = pme_step(cur, P, step, cfg)
                    break
                except SolverError:
                    traj.n_rejected += 1
                    halvings += 1
                    if halvings > cfg.max_halvings:
                        raise
                    step *= 0.5
                    dt = step
            if stop - nxt.t < 1e-12 * max(stop, 1.0):
                nxt.t = stop
            cur = nxt
            traj.n_steps += 1
            traj.newton_iters += info.newton_iters
            traj.max_step_mass_change = max(traj.max_step_mass_change, info.mass_change)
            _check_buffer(cur, cfg)
            if cfg.keep_steps:
                traj.steps.append(cur.copy())
            if info.newton_iters <= 4 and step >= dt:
                dt = dt * cfg.dt_growth
            dt = min(dt, cfg.dt_max)
            if cfg.dt_rel_max is not None:
                dt = min(dt, max(cfg.dt_rel_max * cur.t, cfg.dt_initial))
        traj.checkpoints.append(cur.copy())
    return traj


def dirichlet_dissipation(field_: DensityField, Pe: RegularizedNonlinearity) -> float:
    """Discrete ``int |grad P_eps(rho)|^2 dV`` on the interior faces."""
    p = np.asarray(Pe.value(field_.values), dtype=float)
    return float(np.sum(field_.grid.trans * np.diff(p) ** 2))


def energy_balance(traj: Trajectory) -> np.ndarray:
    """Slack ``int Psi(rho0) - [sum dt D(rho^{k+1}) + int Psi(rho(t_k))]`` after every kept step.

    Backward Euler with a convex ``Psi_eps`` makes every entry non-negative
    up to round-off.  Needs a trajectory run with ``keep_steps``.
    """
    if len(traj.steps) < 2:
        raise ValueError("energy balance needs a trajectory with keep_steps=True")
    Pe = traj.Pe
    vol = traj.steps[0].grid.volumes
    psi0 = float(np.dot(potential_psi(Pe, traj.steps[0].values), vol))
    out = np.empty(len(traj.steps) - 1)
    dissipated = 0.0
    for k in range(1, len(traj.steps)):
        cur = traj.steps[k]
        dissipated += (cur.t - traj.steps[k - 1].t) * dirichlet_dissipation(cur, Pe)
        out[k - 1] = psi0 - dissipated - float(np.dot(potential_psi(Pe, cur.values), vol))
    return out


# ---------------------------------------------------------------------------
# Initial data and reference profiles


def near_dirac_datum(grid: RadialGrid, M: float, width: float) -> DensityField:
    """Uniform density on the ball of radius ``width`` carrying mass ``M``.

    ``width`` is snapped to the nearest cell face and must cover at least
    two cells.
    """
    k = int(round(width / grid.dr))
    if k < 2:
        raise ValueError(f"width {width} covers fewer than two cells (dr={grid.dr:.3g})")
    if k > grid.N:
        raise ValueError("width exceeds the grid")
    vals = np.zeros(grid.N)
    vals[:k] = M / float(np.sum(grid.volumes[:k]))
    return DensityField(grid, vals, 0.0)


@dataclass(frozen=True)
class BarenblattConstants:
    """Constants of ``U(r, t) = t^{-alpha} (D - k r^2 t^{-2 beta})_+^{1/(m-1)}``."""

    n: int
    m: float
    M: float
    D: float
    k: float
    alpha: float
    beta: float

    def front(self, t):
        """Radius of the support at time ``t``."""
        return np.sqrt(self.D / self.k) * np.asarray(t, dtype=float) ** self.beta


def barenblatt_constants(n: int, m: float, M: float) -> BarenblattConstants:
    alpha = n / (2.0 + n * (m - 1.0))
    beta = alpha / n
    k = alpha * (m - 1.0) / (2.0 * m * n)
    q = 1.0 / (m - 1.0)
    area = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    # M = area * D^q (D/k)^{n/2} * B(n/2, q + 1) / 2
    c = area * k ** (-n / 2.0) * 0.5 * beta_fn(n / 2.0, q + 1.0)
    D = (M / c) ** (1.0 / (q + n / 2.0))
    return BarenblattConstants(n, m, M, D, k, alpha, beta)


def barenblatt_euclidean(n: int, m: float, M: float, r, t):
    """Euclidean source-type solution of ``rho_t = Lap rho^m`` with mass ``M``."""
    t = float(t)
    if t <= 0:
        raise ValueError("Barenblatt profile needs t > 0")
    c = barenblatt_constants(n, m, M)
    r = np.asarray(r, dtype=float)
    core = np.maximum(c.D - c.k * r ** 2 * t ** (-2 * c.beta), 0.0)
    out = t ** (-c.alpha) * core ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def barenblatt_datum(grid: RadialGrid, M: float, t0: float, m: float) -> DensityField:
    """Euclidean Barenblatt profile at time ``t0`` sampled at cell centres.

    Rescaled so that the discrete mass on ``grid`` equals ``M``; on curved
    grids the factor is below one, so the datum lies under the profile.
    """
    vals = barenblatt_euclidean(grid.manifold.n, m, M, grid.centers, t0)
    vals = vals * (M / float(np.dot(vals, grid.volumes)))
    return DensityField(grid, vals, 0.0)


# ---------------------------------------------------------------------------
# Travelling-wave barrier


@dataclass(frozen=True)
class TravelingWaveSupersolution:
    """Barrier ``u(delta, t) = P^{-1}([C1 (C2 t + delta - eps/2)_+]^{m/(m-1)})``.

    ``delta`` is the distance to the outer boundary of the exhaustion ball
    and ranges over the collar ``[0, eps]``.  Valid for ``0 <= t <= t1``.
    """

    P: PorousNonlinearity
    C1: float
    C2: float
    eps: float
    sigma: float

    @property
    def t1(self) -> float:
        return self.eps / (4.0 * self.C2)

    def front_offset(self, t: float) -> float:
        """Distance to the boundary below which the barrier vanishes."""
        return self.eps / 2.0 - self.C2 * t


def supersolution_constants(P: PorousNonlinearity, rho0_sup: float, eps: float, sigma: float) -> TravelingWaveSupersolution:
    """Smallest admissible ``C1, C2`` for a datum bounded by ``rho0_sup``.

    ``sigma`` bounds the Laplacian of the distance function on the collar.
    """
    if eps <= 0 or rho0_sup <= 0:
        raise ValueError("need eps > 0 and a positive bound on the datum")
    m, c0, c1 = P.m, P.c0, P.c1
    C1 = 2.0 / eps * c1 ** ((m - 1) / m) * rho0_sup ** (m - 1)
    C2 = C1 * c1 * m / ((m - 1) * c0 ** ((m - 1) / m)) * (1.0 + 3.0 * (m - 1) * sigma * eps / 4.0)
    return TravelingWaveSupersolution(P, C1, C2, eps, sigma)


def collar_sigma(manifold: ModelManifold, inner_radius: float) -> float:
    """``(n - 1) sqrt(K) coth(sqrt(K) r)`` at the inner collar radius."""
    return float(radial_laplacian_coefficient(manifold, inner_radius))


def traveling_wave_value(tw: TravelingWaveSupersolution, delta, t: float):
    """Evaluate the barrier at boundary distance ``delta`` and time ``t``."""
    if t < 0 or t > tw.t1 * (1 + 1e-12):
        raise BarrierError(f"barrier valid only for 0 <= t <= t1 = {tw.t1:.6g}, got t = {t}")
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0) or np.any(delta > tw.eps * (1 + 1e-12)):
        raise BarrierError("delta must lie in the collar [0, eps]")
    m = tw.P.m
    inner = np.maximum(tw.C1 * (tw.C2 * t + delta - tw.eps / 2.0), 0.0)
    return tw.P.inverse(inner ** (m / (m - 1.0)))


# ---------------------------------------------------------------------------
# Checkpoint files


def checkpoint_name(t: float) -> str:
    return f"rho_t{t:.9f}.csv"


def write_checkpoint(field_: DensityField, directory) -> Path:
    path = Path(directory) / checkpoint_name(field_.t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "rho"])
        for r, v in zip(field_.grid.centers, field_.values):
            w.writerow([repr(float(r)), repr(float(v))])
    return path


def read_checkpoint(path, grid: RadialGrid, t: float | None = None) -> DensityField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.N or not np.allclose(data[:, 0], grid.centers, rtol=0, atol=1e-12):
        raise ValueError(f"{path} does not match {grid!r}")
    if t is None:
        t = float(Path(path).stem[len("rho_t"):])
    return DensityField(grid, data[:, 1], t)
