"""Hopf-Lax semigroup and Kantorovich dual bounds on discrete spaces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, TransportError


@dataclass
class DualPotential:
    """Values of a potential on a finite set of points.

    ``s`` records the Hopf-Lax time that produced it (0 for a raw potential).
    """

    values: np.ndarray
    points: np.ndarray | None = None
    s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


def hopf_lax(phi: DualPotential, s: float, distances) -> DualPotential:
    """Inf-convolution ``Q_s phi(x_i) = min_j phi(y_j) + d(x_i, y_j)^2 / (2 s)``.

    Parameters
    ----------
    phi : DualPotential
        Values at the source points ``y_j``.
    s : float
        Time, ``s >= 0``; ``s = 0`` returns ``phi`` itself.
    distances : ndarray, shape (n_targets, n_sources)
        Geodesic distances ``d(x_i, y_j)``.
    """
    if s < 0:
        raise TransportError("Hopf-Lax time must be non-negative")
    D = np.asarray(distances, dtype=float)
    if D.ndim != 2 or D.shape[1] != phi.values.shape[0]:
        raise TransportError("distance matrix does not match the potential")
    if s == 0:
        return DualPotential(phi.values.copy(), phi.points, phi.s)
    vals = np.min(phi.values[None, :] + D ** 2 / (2.0 * s), axis=1)
    return DualPotential(vals, None, phi.s + s)


def kantorovich_lower_bound(mu0: DiscreteMeasure, mu1: DiscreteMeasure, phi: DualPotential, distances) -> float:
    """``int Q_1 phi d mu1 - int phi d mu0``, a lower bound on ``W_2^2 / 2``.

    ``phi`` lives on the support of ``mu0`` and ``distances[i, j]`` is the
    distance from the ``i``-th point of ``mu1`` to the ``j``-th of ``mu0``.
    """
    if phi.values.shape[0] != len(mu0):
        raise TransportError("potential must be defined on the support of mu0")
    q = hopf_lax(phi, 1.0, distances)
    return float(np.dot(q.values, mu1.weights) - np.dot(phi.values, mu0.weights))


def potential_from_duals(u: np.ndarray) -> DualPotential:
    """Potential ``-u/2`` from the row duals of an exact solve with cost ``d^2``.

    With it the Kantorovich bound equals half the optimal cost.
    """
    return DualPotential(-0.5 * np.asarray(u, dtype=float))


def lipschitz_constant(values, distances) -> float:
    """Smallest ``L`` with ``|f_i - f_j| <= L d_ij`` over the sampled pairs."""
    f = np.asarray(values, dtype=float)
    D = np.asarray(distances, dtype=float)
    diff = np.abs(f[:, None] - f[None, :])
    mask = D > 0
    return float(np.max(diff[mask] / D[mask])) if np.any(mask) else 0.0


def w1_dual_value(mu0: DiscreteMeasure, mu1: DiscreteMeasure, f0, f1) -> float:
    """``int f d mu1 - int f d mu0`` given ``f`` sampled on both supports."""
    return float(np.dot(f1, mu1.weights) - np.dot(f0, mu0.weights))
