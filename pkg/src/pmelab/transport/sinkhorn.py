"""Entropic optimal transport in the log domain, with exact-marginal rounding."""
from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure, TransportError, TransportPlan, check_balanced


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    top = np.max(x, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return np.squeeze(top, axis) + np.log(np.sum(np.exp(x - top), axis=axis))


def round_to_marginals(pi: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project a positive matrix onto the couplings of ``a`` and ``b``.

    Rows and then columns are scaled down where they exceed their targets,
    and the remaining deficit is added as a rank-one correction (Altschuler,
    Weed and Rigollet).
    """
    r = pi.sum(axis=1)
    x = np.minimum(a / np.where(r > 0, r, 1.0), 1.0)
    F = pi * x[:, None]
    c = F.sum(axis=0)
    y = np.minimum(b / np.where(c > 0, c, 1.0), 1.0)
    F = F * y[None, :]
    err_r = a - F.sum(axis=1)
    err_c = b - F.sum(axis=0)
    s = np.abs(err_r).sum()
    if s > 0:
        F = F + np.outer(err_r, err_c) / s
    return F


def sinkhorn(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cost,
    ent_reg: float,
    tol: float = 1e-8,
    max_iter: int = 2_000_000,
    anneal: bool = True,
) -> TransportPlan:
    """Entropy-regularised transport, rounded to an exact coupling.

    Iterates the log-domain dual updates until both marginal errors
    (l1, relative to the total mass) fall below ``tol``.  With ``anneal``
    the regularisation starts large and is divided by 4 until it reaches
    ``ent_reg``; only the final stage is required to meet ``tol``.

    Returns
    -------
    TransportPlan
        Rounded plan; its cost is an upper bound on the exact optimum.
    """
    check_balanced(mu, nu)
    if not ent_reg > 0:
        raise TransportError("ent_reg must be positive")
    C = np.asarray(cost, dtype=float)
    mass = mu.mass
    a = mu.weights / mass
    b = nu.weights * (1.0 / nu.mass)
    with np.errstate(divide="ignore"):
        la = np.log(a)
        lb = np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))

    schedule = [ent_reg]
    if anneal:
        e = float(np.max(C)) if np.max(C) > 0 else ent_reg
        while e > ent_reg:
            schedule.append(e)
            e /= 4.0
        schedule = sorted(set(schedule), reverse=True)

    it = 0
    for stage, eps in enumerate(schedule):
        final = stage == len(schedule) - 1
        stage_tol = tol if final else max(tol, 1e-3)
        while True:
            f = eps * (la - _lse((g[None, :] - C) / eps, axis=1))
            g = eps * (lb - _lse((f[:, None] - C) / eps, axis=0))
            it += 1
            if it % 10 == 0 or it >= max_iter:
                logp = (f[:, None] + g[None, :] - C) / eps
                row = np.exp(_lse(logp, axis=1))
                err = np.abs(row - a).sum()
                if err < stage_tol:
                    break
                if it >= max_iter:
                    raise TransportError(f"Sinkhorn did not converge: marginal error {err:.3g} after {it} iterations")
    pi = np.exp((f[:, None] + g[None, :] - C) / ent_reg)
    pi = round_to_marginals(pi, a, b) * mass
    return TransportPlan(pi, float(np.sum(pi * C)), f, g, it)
