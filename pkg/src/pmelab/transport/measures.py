"""Discrete measures and transport plans."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TransportError(ValueError):
    """Invalid transport problem (unbalanced masses, negative weights, ...)."""


@dataclass
class DiscreteMeasure:
    """Weighted point cloud.

    Parameters
    ----------
    points : ndarray, shape (k, d)
        Support points in whatever coordinates the cost is built from.
    weights : ndarray, shape (k,)
        Non-negative masses.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        self.points = pts
        if self.weights.ndim != 1 or self.weights.shape[0] != pts.shape[0]:
            raise TransportError("weights must be a vector matching the number of points")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise TransportError("weights must be finite and non-negative")

    def __len__(self):
        return self.weights.shape[0]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points.copy(), self.weights / self.mass)


@dataclass
class TransportPlan:
    """Coupling matrix with its cost and, for exact solves, the LP duals.

    The duals satisfy ``u_i + v_j <= C_ij`` with equality on the support
    of the plan.
    """

    matrix: np.ndarray
    cost: float
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    iterations: int = 0

    def marginals(self):
        return self.matrix.sum(axis=1), self.matrix.sum(axis=0)


def check_balanced(mu: DiscreteMeasure, nu: DiscreteMeasure, rtol: float = 1e-10):
    if mu.mass <= 0 or nu.mass <= 0:
        raise TransportError("measures must have positive mass")
    if abs(mu.mass - nu.mass) > rtol * max(mu.mass, nu.mass):
        raise TransportError(f"unbalanced masses: {mu.mass!r} vs {nu.mass!r}")


def measure_to_csv(mu: DiscreteMeasure, path) -> Path:
    path = Path(path)
    d = mu.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"p{k}" for k in range(d)] + ["weight"])
        for pt, wt in zip(mu.points, mu.weights):
            w.writerow([repr(float(x)) for x in pt] + [repr(float(wt))])
    return path


def plan_to_csv(plan: TransportPlan, path, threshold: float = 0.0) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        for i, j in zip(*np.nonzero(plan.matrix > threshold)):
            w.writerow([int(i), int(j), repr(float(plan.matrix[i, j]))])
    return path
