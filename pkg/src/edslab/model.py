"""Exponents, thresholds and lifespan-bound bookkeeping.

All functions are pure and operate on plain floats. The critical exponent
``p0`` is the positive root of a quadratic whose leading coefficient may
vanish or change sign; when it is not positive the exponent is formally
infinite and :data:`math.inf` is returned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "ModelParams",
    "Dominance",
    "Regime",
    "BoundForm",
    "ExponentReport",
    "LifespanBound",
    "SupercriticalError",
    "p0",
    "p0_quadratic",
    "p1",
    "mu0",
    "theta",
    "shifted_dimension",
    "classify",
    "lifespan_bound",
    "dissipative_transform",
    "TIE_TOL",
    "CRITICAL_RTOL",
]

TIE_TOL = 1e-12
# relative tolerance used to decide that a user-supplied p sits on a critical exponent
CRITICAL_RTOL = 1e-9


class SupercriticalError(ValueError):
    """Raised when no lifespan estimate applies to the given exponent."""


@dataclass(frozen=True)
class ModelParams:
    """Problem instance ``(n, k, mu, p, R, eps)``.

    Parameters
    ----------
    n : int
        Spatial dimension, ``n >= 1``.
    k : float
        Metric exponent in ``[0, 1)``.
    mu : float
        Damping constant, ``mu >= 0``.
    p : float
        Power of the nonlinearity, ``p > 1``.
    R : float
        Radius of the support of the data.
    eps : float
        Size of the data.
    """

    n: int
    k: float
    mu: float
    p: float
    R: float = 1.0
    eps: float = 1.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        _check_k(self.k)
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu!r}")
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p!r}")
        if not self.R > 0:
            raise ValueError(f"R must be > 0, got {self.R!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps!r}")
        object.__setattr__(self, "n", int(self.n))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "mu": self.mu, "p": self.p, "R": self.R, "eps": self.eps}


class Dominance(str, enum.Enum):
    P0 = "P0"
    P1 = "P1"
    TIE = "Tie"


class Regime(str, enum.Enum):
    SUBCRITICAL_P0 = "SubcriticalP0"
    SUBCRITICAL_P1 = "SubcriticalP1"
    CRITICAL_P0 = "CriticalP0"
    CRITICAL_P1 = "CriticalP1"


class BoundForm(str, enum.Enum):
    POWER_LAW = "PowerLaw"
    EXP_POWER_LAW = "ExpPowerLaw"


@dataclass(frozen=True)
class ExponentReport:
    p0_shifted: float
    p1: float
    mu0: float
    dominant: Dominance
    theta: float | None = None

    @property
    def p0_finite(self) -> bool:
        return math.isfinite(self.p0_shifted)

    @property
    def critical(self) -> float:
        return max(self.p0_shifted, self.p1)

    def as_dict(self) -> dict:
        return {
            "p0_shifted": self.p0_shifted if self.p0_finite else "inf",
            "p1": self.p1,
            "mu0": self.mu0,
            "dominant": self.dominant.value,
            "theta": self.theta,
        }


@dataclass(frozen=True)
class LifespanBound:
    """Upper bound ``T <= C eps**exponent`` or ``T <= exp(C eps**exponent)``."""

    regime: Regime
    exponent: float
    form: BoundForm

    def as_dict(self) -> dict:
        return {"regime": self.regime.value, "exponent": self.exponent, "form": self.form.value}


def _check_k(k: float) -> None:
    if not (0.0 <= k < 1.0):
        raise ValueError(f"k must lie in [0, 1), got {k!r}")


def _quadratic_coeffs(k: float, n_eff: float) -> tuple[float, float, float]:
    a = 0.5 * (n_eff - 1.0) - k / (2.0 * (1.0 - k))
    b = -(0.5 * (n_eff + 1.0) + 3.0 * k / (2.0 * (1.0 - k)))
    return a, b, -1.0


def p0_quadratic(k: float, n_eff: float, p: float) -> float:
    """Value of the quadratic whose positive root is :func:`p0`."""
    a, b, c = _quadratic_coeffs(k, n_eff)
    return (a * p + b) * p + c


def p0(k: float, n_eff: float) -> float:
    """Critical exponent of Strauss type for effective dimension ``n_eff``.

    Returns
    -------
    float
        The positive root, or ``math.inf`` when the leading coefficient is
        not positive.

    Notes
    -----
    ``b < 0`` and ``c = -1``, so ``q = (-b + sqrt(b^2 - 4ac)) / 2`` is free of
    cancellation and the positive root is ``q / a``.
    """
    _check_k(k)
    if n_eff < 1:
        raise ValueError(f"effective dimension must be >= 1, got {n_eff!r}")
    a, b, c = _quadratic_coeffs(k, n_eff)
    if a <= 0.0:
        return math.inf
    q = 0.5 * (-b + math.sqrt(b * b - 4.0 * a * c))
    return q / a


def p1(k: float, n: float) -> float:
    """Fujita-type exponent ``1 + 2/((1-k) n)``."""
    _check_k(k)
    return 1.0 + 2.0 / ((1.0 - k) * n)


def mu0(k: float, n: float) -> float:
    """Damping value at which the two critical exponents coincide."""
    _check_k(k)
    m = (1.0 - k) * n
    return (m * m + (1.0 - k) * (1.0 + 2.0 * k) * n + 2.0) / (m + 2.0)


def shifted_dimension(n: float, k: float, mu: float) -> float:
    """Effective dimension ``n + mu/(1-k)``."""
    return n + mu / (1.0 - k)


def theta(n: float, k: float, mu: float, p: float) -> float:
    """Exponent combination governing the subcritical lifespan bound."""
    lin = (1.0 - k) * (n + 1.0) / 2.0 + (mu + 3.0 * k) / 2.0
    quad = (1.0 - k) * (n - 1.0) / 2.0 + (mu - k) / 2.0
    return 1.0 - k + lin * p - quad * p * p


def classify(params: ModelParams) -> ExponentReport:
    """Critical exponents, splitting damping value and dominant branch."""
    n, k, mu, p = params.n, params.k, params.mu, params.p
    p0s = p0(k, shifted_dimension(n, k, mu))
    m0 = mu0(k, n)
    if abs(mu - m0) <= TIE_TOL * max(1.0, abs(m0)):
        dom = Dominance.TIE
    elif mu > m0:
        dom = Dominance.P1
    else:
        dom = Dominance.P0
    th = theta(n, k, mu, p) if p < p0s else None
    return ExponentReport(p0_shifted=p0s, p1=p1(k, n), mu0=m0, dominant=dom, theta=th)


def _is_close(p: float, target: float) -> bool:
    return math.isfinite(target) and abs(p - target) <= CRITICAL_RTOL * target


def lifespan_bound(params: ModelParams) -> LifespanBound:
    """Select the lifespan estimate that applies to ``params``.

    A critical exponent takes precedence when ``p`` matches it within
    :data:`CRITICAL_RTOL`; if both match, the ``p1`` form is reported since
    its inner exponent is the smaller one. Below ``p1`` the Fujita-type
    branch is returned, otherwise the ``theta`` branch.

    Raises
    ------
    SupercriticalError
        If ``p`` exceeds both critical exponents.
    """
    rep = classify(params)
    p = params.p
    if _is_close(p, rep.p1):
        return LifespanBound(Regime.CRITICAL_P1, -(p - 1.0), BoundForm.EXP_POWER_LAW)
    if _is_close(p, rep.p0_shifted):
        return LifespanBound(Regime.CRITICAL_P0, -p * (p - 1.0), BoundForm.EXP_POWER_LAW)
    if p < rep.p1:
        m = (1.0 - params.k) * params.n
        return LifespanBound(Regime.SUBCRITICAL_P1, -1.0 / (2.0 / (p - 1.0) - m), BoundForm.POWER_LAW)
    if p < rep.p0_shifted:
        th = theta(params.n, params.k, params.mu, p)
        return LifespanBound(Regime.SUBCRITICAL_P0, -p * (p - 1.0) / th, BoundForm.POWER_LAW)
    raise SupercriticalError(
        f"p={p} exceeds max(p0_shifted={rep.p0_shifted}, p1={rep.p1}); no blow-up estimate applies"
    )


DataMap = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def dissipative_transform(params: ModelParams) -> tuple[ModelParams, float, DataMap]:
    """Substitution ``v = t^(mu-1) u``.

    Returns
    -------
    params_new : ModelParams
        Same instance with ``mu`` replaced by ``2 - mu``. Values ``mu > 2``
        map to negative damping, which :class:`ModelParams` rejects, so the
        transformed instance is only built for ``mu <= 2``.
    weight_exponent : float
        ``(1 - mu)(p - 1)``; the nonlinearity becomes ``t**w |v|**p``.
    data_map : callable
        ``(u0, u1) -> (v0, v1) = (u0, u1 + (mu - 1) u0)``, the derivative
        of ``t^(mu-1) u`` at ``t = 1``.
    """
    mu = params.mu
    if mu > 2.0:
        raise ValueError("the transformed damping 2 - mu is negative for mu > 2")
    new = params.with_(mu=2.0 - mu)
    w = (1.0 - mu) * (params.p - 1.0)

    def data_map(u0, u1):
        u0 = np.asarray(u0, dtype=float)
        return u0.copy(), np.asarray(u1, dtype=float) + (mu - 1.0) * u0

    return new, w, data_map
