"""Gamma calculus on radial grids and the Hamiltonian along porous medium flows.

Two discrete calculi are used:

* pointwise finite differences at cell centres for ``Gamma``, ``Gamma_2``
  and the Bakry-Emery defect of radial test functions;
* the flux-form Laplacian of :class:`~pmelab.solver.RadialGrid` for the
  linearised flow ``w_t = Lap(P_eps'(rho) w)`` and its adjoint
  ``phi_t = -P_eps'(rho) Lap phi``.  Both are stepped by backward Euler with
  transposed matrices, so the pairing ``sum V w phi`` is conserved exactly
  and the adjoint obeys a discrete maximum principle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .geometry import radial_laplacian_coefficient
from .solver import DensityField, RadialGrid, Trajectory


@dataclass
class PotentialField:
    """Radial potential ``phi`` sampled at cell centres at time ``t``."""

    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise ValueError("potential values do not match the grid")


@dataclass
class LinearizedField:
    """Solution ``w`` of the linearised equation at time ``t``."""

    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0


def _values(f):
    return f.values if hasattr(f, "values") else np.asarray(f, dtype=float)


def carre_du_champ(f: PotentialField) -> np.ndarray:
    """``Gamma(f) = |f'|^2`` with centred differences (one-sided at the ends)."""
    return np.gradient(_values(f), f.grid.dr) ** 2


def fd_laplacian(f: PotentialField) -> np.ndarray:
    """``f'' + (n - 1) psi'/psi f'`` by centred differences; NaN in the end cells."""
    u = _values(f)
    grid = f.grid
    h = grid.dr
    out = np.full_like(u, np.nan)
    d1 = (u[2:] - u[:-2]) / (2 * h)
    d2 = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    out[1:-1] = d2 + radial_laplacian_coefficient(grid.manifold, grid.centers[1:-1]) * d1
    return out


def gamma2(f: PotentialField) -> np.ndarray:
    """Iterated carre du champ ``1/2 Lap Gamma(f) - f' (Lap f)'``.

    Valid on cells at least two away from either end; NaN elsewhere.
    """
    u = _values(f)
    grid = f.grid
    h = grid.dr
    d1 = np.full_like(u, np.nan)
    d1[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    gam = PotentialField(grid, np.nan_to_num(d1 ** 2), f.t)
    lap_gam = fd_laplacian(gam)
    lap_f = fd_laplacian(f)
    out = np.full_like(u, np.nan)
    dlap = (lap_f[3:-1] - lap_f[1:-3]) / (2 * h)
    out[2:-2] = 0.5 * lap_gam[2:-2] - d1[2:-2] * dlap
    return out


def be_defect_profile(f: PotentialField, lam: float, n: float | None = None) -> np.ndarray:
    """Pointwise ``Gamma_2(f) - lam Gamma(f) - (Lap f)^2 / n`` on interior cells."""
    n = f.grid.manifold.n if n is None else n
    u = _values(f)
    h = f.grid.dr
    d1 = np.full_like(u, np.nan)
    d1[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    return gamma2(f) - lam * d1 ** 2 - fd_laplacian(f) ** 2 / n


def be_defect(f: PotentialField, lam: float, n: float | None = None) -> float:
    """Minimum Bakry-Emery defect over cells two away from the grid ends.

    Non-negative (up to discretisation error) when the curvature-dimension
    condition ``BE(lam, n)`` holds.
    """
    return float(np.nanmin(be_defect_profile(f, lam, n)))


def hamiltonian_energy(rho: DensityField, phi: PotentialField) -> float:
    """``E_rho[phi] = sum Gamma(phi)_i rho_i V_i``."""
    return float(np.sum(carre_du_champ(phi) * rho.values * rho.grid.volumes))


# ---------------------------------------------------------------------------
# Linearised and adjoint flows


def _rho_on(traj: Trajectory, times: np.ndarray):
    """States of ``traj`` at ``times``, interpolating linearly between stored steps."""
    states = traj.steps if traj.steps else traj.checkpoints
    ts = np.array([s.t for s in states])
    out = []
    for t in times:
        k = int(np.searchsorted(ts, t))
        if k < len(ts) and abs(ts[k] - t) <= 1e-12 * max(1.0, abs(t)):
            out.append(states[k].values)
        elif 0 < k < len(ts):
            lam = (t - ts[k - 1]) / (ts[k] - ts[k - 1])
            out.append((1 - lam) * states[k - 1].values + lam * states[k].values)
        elif k > 0 and abs(t - ts[-1]) <= 1e-12 * max(1.0, abs(t)):
            out.append(states[-1].values)
        else:
            raise ValueError(f"time {t} outside the trajectory")
    return out


def _time_grid(traj: Trajectory, t_grid):
    if t_grid is not None:
        return np.asarray(t_grid, dtype=float)
    states = traj.steps if traj.steps else traj.checkpoints
    return np.array([s.t for s in states])


def _implicit_matrix(grid: RadialGrid, dt: float, d: np.ndarray, transpose: bool) -> np.ndarray:
    """Banded ``I - dt L D`` (forward) or ``I - dt D L`` (adjoint), ``D = diag(d)``."""
    ab = grid.laplacian_bands(None)
    V = grid.volumes
    # Entry (i, j) is stored at ab[1 + i - j, j].
    if transpose:
        ab[0, 1:] *= d[:-1] / V[:-1]
        ab[1] *= d / V
        ab[2, :-1] *= d[1:] / V[1:]
    else:
        ab[0, 1:] *= d[1:] / V[:-1]
        ab[1] *= d / V
        ab[2, :-1] *= d[:-1] / V[1:]
    ab = -dt * ab
    ab[1] += 1.0
    return ab


def forward_linearized_solve(traj: Trajectory, w0: LinearizedField, t_grid=None) -> list[LinearizedField]:
    """Backward-Euler solve of ``w_t = Lap(P_eps'(rho) w)`` along ``traj``."""
    Pe = traj.Pe
    grid = w0.grid
    times = _time_grid(traj, t_grid)
    rhos = _rho_on(traj, times)
    out = [LinearizedField(grid, np.asarray(w0.values, float).copy(), times[0])]
    w = out[0].values
    for k in range(1, len(times)):
        dt = times[k] - times[k - 1]
        ab = _implicit_matrix(grid, dt, Pe.derivative(rhos[k]), transpose=False)
        w = solve_banded((1, 1), ab, w, check_finite=False)
        out.append(LinearizedField(grid, w, times[k]))
    return out


def backward_adjoint_solve(traj: Trajectory, phi_T: PotentialField, t_grid=None) -> list[PotentialField]:
    """Solve ``phi_t = -P_eps'(rho) Lap phi`` backwards from ``phi_T`` at the final time.

    Returns the potentials in increasing time order.  Each step solves
    ``(I - dt D L) phi^k = phi^{k+1}`` with ``D`` evaluated at the later
    time, the transpose (in the volume-weighted inner product) of the
    forward linearised step, so ``sum V w^k phi^k`` is constant in ``k``.
    """
    Pe = traj.Pe
    grid = phi_T.grid
    times = _time_grid(traj, t_grid)
    rhos = _rho_on(traj, times)
    phi = np.asarray(phi_T.values, float).copy()
    out = [PotentialField(grid, phi, times[-1])]
    for k in range(len(times) - 1, 0, -1):
        dt = times[k] - times[k - 1]
        ab = _implicit_matrix(grid, dt, Pe.derivative(rhos[k]), transpose=True)
        phi = solve_banded((1, 1), ab, phi, check_finite=False)
        out.append(PotentialField(grid, phi, times[k - 1]))
    return out[::-1]


def duality_pairing(w: LinearizedField, phi: PotentialField) -> float:
    return float(np.sum(w.values * phi.values * w.grid.volumes))


# ---------------------------------------------------------------------------
# Hamiltonian decay


def g_m(s, n: int, m: float):
    """``(s^{-n/(2+n(m-1))} + 1)^{m-1}``, the smoothing envelope raised to ``m - 1``."""
    s = np.asarray(s, dtype=float)
    a = n / (2.0 + n * (m - 1.0))
    return (s ** (-a) + 1.0) ** (m - 1.0)


def g_m_envelope(s, n: int, m: float):
    """Piecewise power majorant of :func:`g_m`: ``2^{m-1} s^{-n(m-1)/(2+n(m-1))}`` below 1, ``2^{m-1}`` above."""
    s = np.asarray(s, dtype=float)
    a = n * (m - 1.0) / (2.0 + n * (m - 1.0))
    return np.where(s < 1.0, 2.0 ** (m - 1.0) * s ** (-a), 2.0 ** (m - 1.0))


def growth_constant(C: float, n: int, m: float) -> float:
    """``C^{m-1} 2^{m-2} (2 + n(m-1))``, the constant in the exponential stability factor."""
    return C ** (m - 1.0) * 2.0 ** (m - 2.0) * (2.0 + n * (m - 1.0))


def growth_exponent(t, M: float, n: int, m: float, linear_term: bool = True):
    """``(t M^{m-1})^{2/(2+n(m-1))}``, maxed with ``t M^{m-1}`` when ``linear_term``."""
    s = np.asarray(t, dtype=float) * M ** (m - 1.0)
    p = s ** (2.0 / (2.0 + n * (m - 1.0)))
    return np.maximum(p, s) if linear_term else p


def smoothing_envelope(t, M: float, n: int, m: float):
    """``t^{-n/(2+n(m-1))} M^{2/(2+n(m-1))} + M``."""
    d = 2.0 + n * (m - 1.0)
    return np.asarray(t, dtype=float) ** (-n / d) * M ** (2.0 / d) + M


def fit_smoothing_constant(traj: Trajectory, M: float | None = None) -> float:
    """Smallest ``C >= 1`` with ``sup rho(t) <= C * smoothing_envelope(t)`` on the checkpoints."""
    grid = traj.checkpoints[0].grid
    n = grid.manifold.n
    m = traj.Pe.m
    M = traj.checkpoints[0].mass() if M is None else M
    ratios = [c.sup() / float(smoothing_envelope(c.t, M, n, m)) for c in traj.checkpoints if c.t > 0]
    return max([1.0] + ratios)


@dataclass
class HamiltonianReport:
    """Per-step decay defects and the integrated lower bound."""

    t_mid: np.ndarray
    defects: np.ndarray
    tol: float
    times: np.ndarray
    energies: np.ndarray
    lower_bounds: np.ndarray
    C_fit: float
    extra: dict = field(default_factory=dict)

    @property
    def min_defect(self) -> float:
        return float(np.min(self.defects))

    @property
    def pointwise_ok(self) -> bool:
        return bool(np.all(self.defects >= -self.tol))

    @property
    def integrated_ok(self) -> bool:
        return bool(np.all(self.energies >= self.lower_bounds * (1 - 1e-12)))


def integrated_lower_bound(E0: float, t, M: float, n: int, m: float, c1: float, C: float, K: float, eps: float):
    """``E0 exp{-2 K c1 c_m [(t M^{m-1})^{2/(2+n(m-1))} v t M^{m-1} + eps t/(c1 c_m)]}``."""
    cm = growth_constant(C, n, m)
    t = np.asarray(t, dtype=float)
    expo = growth_exponent(t, M, n, m) + eps * t / (c1 * cm)
    return E0 * np.exp(-2.0 * K * c1 * cm * expo)


def hamiltonian_decay_check(
    traj: Trajectory,
    phis: list[PotentialField],
    K: float,
    C_fit: float | None = None,
    tol_factor: float = 10.0,
) -> HamiltonianReport:
    """Check the decay of ``E_{rho(t)}[phi(t)]`` along a flow and its adjoint.

    Pointwise: ``(E^{k+1} - E^k) / (2 dt) + K sum Gamma(phi) P_eps(rho) V >= -tol``
    on every step, with the midpoint average of the curvature term and
    ``tol = tol_factor (dt_max + dr^2) max_k E^k``.
    Integrated: ``E(t) >= integrated_lower_bound(E(0), t, ...)``, with the
    smoothing constant fitted on ``traj`` unless ``C_fit`` is given.
    """
    Pe = traj.Pe
    grid = phis[0].grid
    n = grid.manifold.n
    times = np.array([p.t for p in phis])
    rhos = _rho_on(traj, times)
    energies = np.array([float(np.sum(carre_du_champ(p) * r * grid.volumes)) for p, r in zip(phis, rhos)])
    curv = np.array([float(np.sum(carre_du_champ(p) * Pe.value(r) * grid.volumes)) for p, r in zip(phis, rhos)])
    dts = np.diff(times)
    defects = np.diff(energies) / (2.0 * dts) + K * 0.5 * (curv[1:] + curv[:-1])
    tol = tol_factor * (float(np.max(dts)) + grid.dr ** 2) * float(np.max(np.abs(energies)))
    M = float(np.dot(rhos[0], grid.volumes))
    C = fit_smoothing_constant(traj, M) if C_fit is None else C_fit
    lower = integrated_lower_bound(energies[0], times - times[0], M, n, Pe.m, Pe.c1, C, K, Pe.eps)
    return HamiltonianReport(0.5 * (times[1:] + times[:-1]), defects, tol, times, energies, lower, C)
