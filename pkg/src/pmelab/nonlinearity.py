"""Pressure laws ``P(rho)`` for the porous medium equation ``rho_t = Lap P(rho)``.

Three structural conditions are tracked on every nonlinearity:

* monotonicity: ``P(0) = 0`` and ``P`` strictly increasing;
* power-type bounds ``c0 m rho^{m-1} <= P'(rho) <= c1 m rho^{m-1}``;
* the displacement-convexity condition ``rho P'(rho) - (1 - 1/n) P(rho) >= 0``.

The regularised law ``P_eps`` adds a linear part ``eps rho`` and freezes the
slope beyond ``rho = 1/eps``, which makes the equation uniformly parabolic
while keeping the three conditions above.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize


def _as_array(rho):
    return np.asarray(rho, dtype=float)


def _scalar_out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class PorousNonlinearity:
    """A pressure law with an analytic derivative.

    Parameters
    ----------
    value_fn, derivative_fn : callable
        Vectorised ``P`` and ``P'`` on ``rho >= 0``.
    m : float
        Power-type exponent, ``m > 1``.
    c0, c1 : float
        Declared constants in ``c0 m rho^{m-1} <= P' <= c1 m rho^{m-1}``.
    flavor : str
        ``"power"`` for ``c rho^m`` (closed forms are used), ``"custom"``
        otherwise.
    coeff : float
        Coefficient of the pure power law.
    """

    value_fn: Callable = field(repr=False)
    derivative_fn: Callable = field(repr=False)
    m: float
    c0: float = 1.0
    c1: float = 1.0
    flavor: str = "custom"
    coeff: float = 1.0

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError(f"exponent m must exceed 1, got {self.m}")
        if not (0 < self.c0 <= self.c1):
            raise ValueError(f"need 0 < c0 <= c1, got c0={self.c0}, c1={self.c1}")
        if self.flavor not in ("power", "custom"):
            raise ValueError(f"unknown flavor {self.flavor!r}")

    @classmethod
    def power(cls, m: float, coeff: float = 1.0) -> "PorousNonlinearity":
        """The pure power law ``P(rho) = coeff * rho^m``."""
        if coeff <= 0:
            raise ValueError("coefficient must be positive")
        return cls(
            value_fn=lambda rho: coeff * rho ** m,
            derivative_fn=lambda rho: coeff * m * rho ** (m - 1),
            m=m,
            c0=coeff,
            c1=coeff,
            flavor="power",
            coeff=coeff,
        )

    @property
    def is_power(self) -> bool:
        return self.flavor == "power"

    def value(self, rho):
        return _scalar_out(self.value_fn(_as_array(rho)))

    def derivative(self, rho):
        return _scalar_out(self.derivative_fn(_as_array(rho)))

    def inverse(self, v):
        """``P^{-1}(v)`` for ``v >= 0``."""
        v = _as_array(v)
        if np.any(v < 0):
            raise ValueError("P^{-1} is only evaluated on [0, inf)")
        if self.is_power:
            return _scalar_out((v / self.coeff) ** (1.0 / self.m))
        flat = np.atleast_1d(v).ravel()
        out = np.empty_like(flat)
        for k, vk in enumerate(flat):
            if vk == 0:
                out[k] = 0.0
                continue
            lo, hi = inverse_bounds(self, vk)
            lo, hi = 0.5 * lo, 2.0 * hi
            out[k] = optimize.brentq(lambda s: self.value(s) - vk, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return _scalar_out(out.reshape(v.shape))


def inverse_bounds(P: PorousNonlinearity, v):
    """Two-sided bounds ``(v/c1)^{1/m} <= P^{-1}(v) <= (v/c0)^{1/m}``."""
    v = _as_array(v)
    return _scalar_out((v / P.c1) ** (1.0 / P.m)), _scalar_out((v / P.c0) ** (1.0 / P.m))


@dataclass(frozen=True)
class RegularizedNonlinearity:
    """``P_eps`` with ``P_eps' = P' + eps`` on ``[0, 1/eps]`` and constant beyond.

    For ``rho < 0`` the law is continued linearly as ``eps * rho``; solutions
    never take negative values, but Newton iterates may.
    """

    base: PorousNonlinearity
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def rho_cut(self) -> float:
        return 1.0 / self.eps

    @property
    def m(self) -> float:
        return self.base.m

    @property
    def c0(self) -> float:
        return self.base.c0

    @property
    def c1(self) -> float:
        return self.base.c1

    @property
    def tail_slope(self) -> float:
        return float(self.base.derivative(self.rho_cut)) + self.eps

    def value(self, rho):
        rho = _as_array(rho)
        a = self.rho_cut
        pos = np.clip(rho, 0.0, a)
        out = self.base.value_fn(pos) + self.eps * pos
        out = np.where(rho > a, self.base.value_fn(np.asarray(a)) + self.eps * a + self.tail_slope * (rho - a), out)
        out = np.where(rho < 0, self.eps * rho, out)
        return _scalar_out(out)

    def derivative(self, rho):
        rho = _as_array(rho)
        a = self.rho_cut
        pos = np.clip(rho, 0.0, a)
        out = self.base.derivative_fn(pos) + self.eps
        out = np.where(rho > a, self.tail_slope, out)
        out = np.where(rho < 0, self.eps, out)
        return _scalar_out(out)


def regularize(P: PorousNonlinearity, eps: float) -> RegularizedNonlinearity:
    """Build ``P_eps`` from ``P``."""
    return RegularizedNonlinearity(P, float(eps))


def mccann_defect(P, rho, n: int):
    """``rho P'(rho) - (1 - 1/n) P(rho)``; non-negative under the condition."""
    rho = _as_array(rho)
    return _scalar_out(rho * _as_array(P.derivative(rho)) - (1.0 - 1.0 / n) * _as_array(P.value(rho)))


def _quad_each(fn, upper):
    upper = _as_array(upper)
    flat = np.atleast_1d(upper).ravel()
    out = np.empty_like(flat)
    for k, b in enumerate(flat):
        if b <= 0:
            out[k] = 0.0
        else:
            out[k] = integrate.quad(fn, 0.0, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return out.reshape(upper.shape)


def potential_psi(P, rho):
    """Energy density ``Psi(rho) = int_0^rho P``."""
    rho = _as_array(rho)
    if np.any(rho < 0):
        raise ValueError("Psi is evaluated on rho >= 0")
    if isinstance(P, RegularizedNonlinearity):
        a = P.rho_cut
        low = np.minimum(rho, a)
        out = potential_psi(P.base, low) + 0.5 * P.eps * low ** 2
        excess = np.maximum(rho - a, 0.0)
        p_a = float(P.value(a))
        out = out + p_a * excess + 0.5 * P.tail_slope * excess ** 2
        return _scalar_out(out)
    if P.is_power:
        return _scalar_out(P.coeff * rho ** (P.m + 1) / (P.m + 1))
    return _scalar_out(_quad_each(lambda s: float(P.value(s)), rho))


def kirchhoff_upsilon(P, rho):
    """``Upsilon(rho) = int_0^rho sqrt(P')``, so that ``|grad Upsilon(rho)|^2 = P'(rho) |grad rho|^2``."""
    rho = _as_array(rho)
    if np.any(rho < 0):
        raise ValueError("Upsilon is evaluated on rho >= 0")
    if isinstance(P, RegularizedNonlinearity):
        a = P.rho_cut
        low = np.minimum(rho, a)
        out = _quad_each(lambda s: float(np.sqrt(P.derivative(s))), low)
        excess = np.maximum(rho - a, 0.0)
        return _scalar_out(out + np.sqrt(P.tail_slope) * excess)
    if P.is_power:
        m = P.m
        return _scalar_out(2.0 * np.sqrt(P.coeff * m) / (m + 1) * rho ** ((m + 1) / 2))
    return _scalar_out(_quad_each(lambda s: float(np.sqrt(P.derivative(s))), rho))


def default_grid(rho_max: float, size: int = 10_000) -> np.ndarray:
    """Zero plus log-spaced samples up to ``10 * rho_max``."""
    return np.concatenate([[0.0], np.geomspace(1e-8 * rho_max, 10.0 * rho_max, size - 1)])


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class HypothesisReport:
    """Outcome of :func:`validate_hypotheses` with fitted power-type constants."""

    checks: list[HypothesisCheck]
    fitted_c0: float
    fitted_c1: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_hypotheses(P: PorousNonlinearity, n: int, grid=None, rtol: float = 1e-9) -> HypothesisReport:
    """Check monotonicity, power-type bounds and the displacement-convexity condition on a grid.

    Parameters
    ----------
    P : PorousNonlinearity
    n : int
        Dimension entering the displacement-convexity condition.
    grid : array_like, optional
        Sample points; :func:`default_grid` on ``[0, 10]`` by default.

    Returns
    -------
    HypothesisReport
        Per-condition verdicts with the worst margin, and the tightest
        constants ``c0, c1`` compatible with the samples.
    """
    rho = np.unique(_as_array(default_grid(1.0) if grid is None else grid))
    vals = _as_array(P.value(rho))
    ders = _as_array(P.derivative(rho))

    p0 = float(P.value(0.0))
    incr = np.diff(vals)
    mono_margin = float(incr.min()) if incr.size else 0.0
    mono = HypothesisCheck("monotone", bool(p0 == 0 and np.all(incr > 0)), float(mono_margin),
                           f"P(0) = {p0!r}")

    pos = rho > 0
    ratio = ders[pos] / (P.m * rho[pos] ** (P.m - 1))
    c0_fit = float(ratio.min())
    c1_fit = float(ratio.max())
    lower_ok = c0_fit >= P.c0 * (1 - rtol)
    upper_ok = c1_fit <= P.c1 * (1 + rtol)
    power = HypothesisCheck(
        "power_bounds",
        bool(lower_ok and upper_ok),
        float(min(c0_fit - P.c0, P.c1 - c1_fit)),
        f"fitted c0={c0_fit:.6g}, c1={c1_fit:.6g}",
    )

    defect = _as_array(mccann_defect(P, rho, n))
    scale = np.maximum(1.0, np.abs(rho * ders))
    conv = HypothesisCheck("displacement_convexity", bool(np.all(defect >= -1e-12 * scale)),
                           float((defect / scale).min()))
    return HypothesisReport([mono, power, conv], c0_fit, c1_fit)
