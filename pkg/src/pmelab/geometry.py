"""Rotationally symmetric model manifolds and the hyperboloid model.

A model manifold of dimension ``n`` and curvature ``-K`` (``K >= 0``) is
described in polar coordinates around a pole by the warping function

    psi_K(r) = sinh(sqrt(K) r) / sqrt(K),      psi_0(r) = r,

so that the metric reads ``dr^2 + psi_K(r)^2 g_{S^{n-1}}``.  Radial
functions ``f(r)`` then have Laplacian ``f'' + (n - 1) psi'/psi f'``.

For ``K > 0`` the space is also realised as the upper sheet of the
hyperboloid ``<p, p> = -1/K`` in Minkowski space ``R^{n,1}``, with the
time-like coordinate stored last.  All ambient arithmetic below works on
arrays whose last axis holds the ``n + 1`` coordinates, so quadrature code
can push whole batches of points through the same routines.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np


class GeometryError(ValueError):
    """Raised on invalid geometric input (off-sheet points, bad radii, ...)."""


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ModelManifold:
    """Model manifold of dimension ``n`` with sectional curvature ``-K``.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    K : float
        Curvature magnitude; ``K = 0`` is Euclidean space, ``K > 0`` the
        hyperbolic space of curvature ``-K``.
    """

    n: int
    K: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise GeometryError(f"dimension must be an integer >= 2, got {self.n}")
        if not np.isfinite(self.K) or self.K < 0:
            raise GeometryError(f"curvature magnitude K must be >= 0, got {self.K}")

    @property
    def sqrt_k(self) -> float:
        return float(np.sqrt(self.K))

    @property
    def sphere_area(self) -> float:
        """Area of the unit sphere ``S^{n-1}``."""
        return 2.0 * pi ** (self.n / 2) / gamma(self.n / 2)

    @property
    def is_flat(self) -> bool:
        return self.K == 0

    @property
    def ricci_lower_bound(self) -> float:
        """The optimal Bakry-Emery constant ``lambda = -(n - 1) K``."""
        return -(self.n - 1) * self.K


def _check_radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise GeometryError("radius must be finite and non-negative")
    return r


def warping(manifold: ModelManifold, r):
    """Warping function ``psi_K(r)``; vectorised over ``r``."""
    r = _check_radius(r)
    if manifold.is_flat:
        return r.copy() if r.ndim else float(r)
    s = manifold.sqrt_k
    out = np.sinh(s * r) / s
    return out if out.ndim else float(out)


def warping_derivative(manifold: ModelManifold, r):
    """Derivative ``psi_K'(r) = cosh(sqrt(K) r)``."""
    r = _check_radius(r)
    if manifold.is_flat:
        out = np.ones_like(r)
    else:
        out = np.cosh(manifold.sqrt_k * r)
    return out if out.ndim else float(out)


def radial_laplacian_coefficient(manifold: ModelManifold, r):
    """First-order coefficient ``(n - 1) psi'/psi`` of the radial Laplacian.

    Singular at the pole, so ``r = 0`` is rejected.
    """
    r = _check_radius(r)
    if np.any(r == 0):
        raise GeometryError("the radial Laplacian coefficient is singular at r = 0")
    n1 = manifold.n - 1
    if manifold.is_flat:
        out = n1 / r
    else:
        s = manifold.sqrt_k
        out = n1 * s / np.tanh(s * r)
    return out if out.ndim else float(out)


def _sinh_power_integral(k: int, x: float) -> float:
    # I_k(x) = int_0^x sinh(s)^k ds through the standard reduction formula.
    if k == 0:
        return x
    if k == 1:
        return np.cosh(x) - 1.0
    return np.sinh(x) ** (k - 1) * np.cosh(x) / k - (k - 1) / k * _sinh_power_integral(k - 2, x)


def shell_volumes(manifold: ModelManifold, r_inner, r_outer) -> np.ndarray:
    """Volumes of the annuli ``{r_inner <= r < r_outer}``.

    Each shell is integrated with an 8-point Gauss-Legendre rule, which is
    accurate to rounding for the cell sizes used on solver grids.
    """
    a = _check_radius(r_inner)
    b = _check_radius(r_outer)
    if np.any(b < a):
        raise GeometryError("shell outer radius below inner radius")
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    psi = warping(manifold, nodes)
    vals = np.sum(_GL_WEIGHTS * psi ** (manifold.n - 1), axis=-1) * half
    return manifold.sphere_area * vals


def ball_volume(manifold: ModelManifold, R: float) -> float:
    """Volume of the geodesic ball of radius ``R``, in closed form."""
    R = float(_check_radius(R))
    n = manifold.n
    if manifold.is_flat:
        return manifold.sphere_area * R ** n / n
    s = manifold.sqrt_k
    x = s * R
    if x < 0.1:
        # The reduction formula cancels badly near zero.
        return float(shell_volumes(manifold, np.array([0.0]), np.array([R]))[0])
    return manifold.sphere_area * _sinh_power_integral(n - 1, x) / s ** n


# ---------------------------------------------------------------------------
# Hyperboloid model


def minkowski(a, b) -> np.ndarray:
    """Minkowski product of signature ``(n, 1)`` along the last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sum(a[..., :-1] * b[..., :-1], axis=-1) - a[..., -1] * b[..., -1]


def _require_hyperbolic(manifold: ModelManifold):
    if manifold.is_flat:
        raise GeometryError("the hyperboloid model needs K > 0")


def project_to_sheet(manifold: ModelManifold, coords) -> np.ndarray:
    """Rescale ambient vectors onto the upper sheet ``<p, p> = -1/K``."""
    _require_hyperbolic(manifold)
    c = np.array(coords, dtype=float)
    q = minkowski(c, c)
    if np.any(q >= 0) or np.any(c[..., -1] <= 0):
        raise GeometryError("vector is not future time-like; cannot project to the sheet")
    return c / np.sqrt(-manifold.K * q)[..., None]


@dataclass(frozen=True, eq=False)
class HyperboloidPoint:
    """A point on the hyperboloid sheet of ``manifold``.

    The coordinates are renormalised to the sheet on construction; inputs
    further than ``tol`` (relative) from the sheet are rejected.
    """

    manifold: ModelManifold
    coords: np.ndarray = field(repr=False)
    tol: float = 1e-10

    def __post_init__(self):
        _require_hyperbolic(self.manifold)
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.manifold.n + 1,):
            raise GeometryError(f"expected {self.manifold.n + 1} coordinates, got shape {c.shape}")
        q = -self.manifold.K * minkowski(c, c)
        if not np.isfinite(q) or abs(q - 1.0) > self.tol * max(1.0, float(np.dot(c, c)) * self.manifold.K):
            raise GeometryError(f"point is off the sheet: -K<p,p> = {q!r}")
        object.__setattr__(self, "coords", project_to_sheet(self.manifold, c))

    def __repr__(self):
        return f"HyperboloidPoint(n={self.manifold.n}, K={self.manifold.K}, coords={self.coords.tolist()})"


def origin(manifold: ModelManifold) -> HyperboloidPoint:
    _require_hyperbolic(manifold)
    c = np.zeros(manifold.n + 1)
    c[-1] = 1.0 / manifold.sqrt_k
    return HyperboloidPoint(manifold, c)


def _distance(x, y, K: float) -> np.ndarray:
    # Chordal form 2/sqrt(K) asinh(sqrt(K)/2 |x - y|_M); equal to
    # acosh(-K<x, y>)/sqrt(K) but accurate for nearby points.
    d = np.asarray(x) - np.asarray(y)
    chord2 = np.maximum(minkowski(d, d), 0.0)
    s = np.sqrt(K)
    return 2.0 / s * np.arcsinh(0.5 * s * np.sqrt(chord2))


def geodesic_distance(p: HyperboloidPoint, q: HyperboloidPoint) -> float:
    """Geodesic distance ``acosh(-K<p, q>) / sqrt(K)``."""
    if p.manifold != q.manifold:
        raise GeometryError("points live on different manifolds")
    return float(_distance(p.coords, q.coords, p.manifold.K))


def pairwise_distances(manifold: ModelManifold, X, Y) -> np.ndarray:
    """Matrix of geodesic distances between two batches of sheet coordinates."""
    _require_hyperbolic(manifold)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return _distance(X[:, None, :], Y[None, :, :], manifold.K)


def tangent_projection(p: HyperboloidPoint, a) -> np.ndarray:
    """Project an ambient vector onto the tangent space at ``p``."""
    a = np.asarray(a, dtype=float)
    return a + p.manifold.K * minkowski(a, p.coords)[..., None] * p.coords


def _exp(p, v, r, K: float) -> np.ndarray:
    s = np.sqrt(K)
    r = np.asarray(r, dtype=float)[..., None]
    return p * np.cosh(s * r) + v * (np.sinh(s * r) / s)


def exp_map(p: HyperboloidPoint, v, r: float) -> HyperboloidPoint:
    """Point at distance ``r`` from ``p`` along the unit tangent ``v``.

    ``exp_p(r v) = p cosh(sqrt(K) r) + v sinh(sqrt(K) r) / sqrt(K)``.
    """
    v = np.asarray(v, dtype=float)
    scale = max(1.0, float(np.sqrt(np.dot(p.coords, p.coords) * p.manifold.K)))
    if abs(minkowski(p.coords, v)) > 1e-8 * scale * max(1.0, float(np.linalg.norm(v))):
        raise GeometryError("direction is not tangent to the sheet at p")
    if abs(minkowski(v, v) - 1.0) > 1e-8:
        raise GeometryError("direction must have unit Minkowski norm")
    if r < 0:
        raise GeometryError("exp_map expects r >= 0")
    return HyperboloidPoint(p.manifold, _exp(p.coords, v, r, p.manifold.K))


def tangent_direction(p: HyperboloidPoint, q: HyperboloidPoint) -> np.ndarray:
    """Unit tangent at ``p`` of the geodesic towards ``q``."""
    K = p.manifold.K
    w = q.coords + K * minkowski(p.coords, q.coords) * p.coords
    nrm2 = minkowski(w, w)
    if nrm2 <= 0:
        raise GeometryError("points coincide; direction undefined")
    return w / np.sqrt(nrm2)


def parallel_transport(p: HyperboloidPoint, q: HyperboloidPoint, v) -> np.ndarray:
    """Parallel transport of tangent vectors at ``p`` to ``q`` along the geodesic."""
    K = p.manifold.K
    v = np.asarray(v, dtype=float)
    coef = K * minkowski(q.coords, v) / (1.0 - K * minkowski(p.coords, q.coords))
    return v + coef[..., None] * (p.coords + q.coords)


def tangent_frame(p: HyperboloidPoint, first=None) -> np.ndarray:
    """Orthonormal tangent basis at ``p`` (rows), optionally starting with ``first``."""
    n = p.manifold.n
    vecs = [] if first is None else [np.asarray(first, dtype=float)]
    for k in range(n + 1):
        if len(vecs) == n:
            break
        e = np.zeros(n + 1)
        e[k] = 1.0
        w = tangent_projection(p, e)
        for b in vecs:
            w = w - minkowski(w, b) * b
        nrm2 = minkowski(w, w)
        if nrm2 > 1e-10:
            vecs.append(w / np.sqrt(nrm2))
    return np.array(vecs)


def random_point(manifold: ModelManifold, rng: np.random.Generator, radius: float = 1.0) -> HyperboloidPoint:
    """Point at a random distance up to ``radius`` from the origin."""
    o = origin(manifold)
    v = random_unit_tangent(o, rng)
    return exp_map(o, v, float(rng.uniform(0.0, radius)))


def random_unit_tangent(p: HyperboloidPoint, rng: np.random.Generator) -> np.ndarray:
    frame = tangent_frame(p)
    c = rng.standard_normal(frame.shape[0])
    c /= np.linalg.norm(c)
    return c @ frame


def _plane_distance(z, unit_normal, K: float) -> np.ndarray:
    s = np.sqrt(K)
    return np.arcsinh(s * minkowski(z, unit_normal)) / s


def bisector_normal(x: HyperboloidPoint, y: HyperboloidPoint) -> np.ndarray:
    """Unit space-like normal of the perpendicular bisector of ``x`` and ``y``.

    The bisector is ``{z : <z, y - x> = 0}``; the normal points to ``y``'s side.
    """
    d = y.coords - x.coords
    nrm2 = minkowski(d, d)
    if nrm2 <= 0:
        raise GeometryError("bisector of coincident points is undefined")
    return d / np.sqrt(nrm2)


def signed_distance_to_bisector(z, x: HyperboloidPoint, y: HyperboloidPoint):
    """Signed distance from ``z`` to the perpendicular bisector of ``x`` and ``y``.

    Positive on ``y``'s side; equal to ``asinh(sqrt(K) <z, u>) / sqrt(K)``
    with ``u`` the unit normal.  ``z`` may be a point or a batch of sheet
    coordinates.  The result is 1-Lipschitz in ``z``.
    """
    coords = z.coords if isinstance(z, HyperboloidPoint) else np.asarray(z, dtype=float)
    out = _plane_distance(coords, bisector_normal(x, y), x.manifold.K)
    return float(out) if np.ndim(out) == 0 else out


def ollivier_expansion_check(
    manifold: ModelManifold,
    delta: float,
    r: float,
    x: HyperboloidPoint | None = None,
    v=None,
    w=None,
) -> tuple[float, float]:
    """Distance from a displaced point to a totally geodesic hypersurface.

    Let ``E`` be the hypersurface through ``x`` orthogonal to the unit
    tangent ``v``, ``y = exp_x(delta v)`` and ``w'`` the parallel transport
    to ``y`` of a unit tangent ``w`` orthogonal to ``v``.  Returns
    ``(exact, expansion)`` where ``exact = d(exp_y(r w'), E)`` and
    ``expansion = delta (1 + K r^2 / 2)``.

    ``E`` is the bisector of ``y`` and its mirror image ``exp_x(-delta v)``,
    so ``exact`` is evaluated with :func:`signed_distance_to_bisector`.
    For ``K = 0`` the flat computation is used and ``exact == delta``.
    """
    if delta <= 0 or r < 0:
        raise GeometryError("need delta > 0 and r >= 0")
    if manifold.is_flat:
        e1 = np.zeros(manifold.n)
        e1[0] = 1.0
        e2 = np.zeros(manifold.n)
        e2[1] = 1.0
        z = delta * e1 + r * e2
        return float(z @ e1), float(delta)
    if x is None:
        x = origin(manifold)
    if v is None:
        v = tangent_frame(x)[0]
    if w is None:
        w = tangent_frame(x, v)[1]
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(minkowski(v, w)) > 1e-10:
        raise GeometryError("w must be orthogonal to v")
    y = exp_map(x, v, delta)
    x_mirror = exp_map(x, -v, delta)
    w_y = parallel_transport(x, y, w)
    z = _exp(y.coords, w_y, r, manifold.K)
    exact = signed_distance_to_bisector(z, x_mirror, y)
    return float(exact), float(delta * (1.0 + manifold.K * r * r / 2.0))
