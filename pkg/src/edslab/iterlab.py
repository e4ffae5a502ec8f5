"""Iteration machinery behind the blow-up arguments.

Three iterations are implemented exactly, with every doubly exponential
quantity carried as a logarithm:

* the subcritical sequences ``D_j t^{-a_j} (t - T1)^{b_j}`` for the mass
  functional ``U0(t) = int u dx``;
* the logarithmic slicing sequences ``K_j (log(t/l_j))^{sigma_j}`` used when
  ``p`` equals the Fujita-type exponent;
* a numerical iteration of the integral frame for the weighted functional
  when ``p`` equals the shifted Strauss-type exponent.

All lower bounds here are positive, so the only sign that needs tracking is
the sign of the exponent coefficients, which is recorded explicitly in the
threshold objects. Constants that the analysis only asserts to exist are
calibrated on grids and stored with each result.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, signal

from .kernels import A_k, WeightParams, bracket, eta_q, phi_k, xi_q
from .model import (
    CRITICAL_RTOL,
    ModelParams,
    Regime,
    SupercriticalError,
    lifespan_bound,
    mu0,
    p0,
    p1,
    shifted_dimension,
    theta,
)
from .specfun import sphere_area

__all__ = [
    "SubcriticalIteration",
    "SubcriticalThreshold",
    "SlicingIteration",
    "CriticalFrameState",
    "CriticalFrameConstants",
    "EnvelopeReport",
    "subcritical_sequences",
    "summation_identities_check",
    "summation_identity_residuals",
    "exponent_identity_residual",
    "critical_identity_residual",
    "subcritical_threshold",
    "divergence_witness",
    "slicing_p1",
    "slicing_divergence_log_log_time",
    "jensen_frame_constant",
    "data_mass",
    "calibrate_critical_constants",
    "seed_first_iterate",
    "critical_p0_frame_iteration",
    "frame_operator",
    "envelope_vs_simulation",
    "iteration_report",
    "report_json",
    "J_MAX",
]

J_MAX = 60


# ---------------------------------------------------------------------------
# summation identities and exponent bookkeeping
# ---------------------------------------------------------------------------


def summation_identity_residuals(p: float, j: int) -> tuple[float, float]:
    """Relative residuals of the two finite-sum closed forms.

    ``sum_{i<j} (j-i) p^i = ((p^{j+1}-p)/(p-1) - j)/(p-1)`` and
    ``sum_{i<j} p^i = (p^j-1)/(p-1)``; the sums are accumulated with
    :func:`math.fsum`.
    """
    if not (p > 1 and j >= 1):
        raise ValueError("need p > 1 and j >= 1")
    s1 = math.fsum((j - i) * p ** i for i in range(j))
    s2 = math.fsum(p ** i for i in range(j))
    c1 = ((p ** (j + 1) - p) / (p - 1.0) - j) / (p - 1.0)
    c2 = (p ** j - 1.0) / (p - 1.0)
    return abs(s1 - c1) / abs(c1), abs(s2 - c2) / abs(c2)


def summation_identities_check(p: float, j: int, rtol: float = 1e-12) -> bool:
    """True when both closed forms match the brute-force sums within ``rtol``."""
    r1, r2 = summation_identity_residuals(p, j)
    return r1 <= rtol and r2 <= rtol


def _alpha_beta(params: ModelParams) -> tuple[float, float]:
    n, k, mu, p = params.n, params.k, params.mu, params.p
    return (1.0 - k) * n * (p - 1.0) + mu, 2.0 + mu


def _seed_exponents(params: ModelParams) -> tuple[float, float]:
    n, k, mu, p = params.n, params.k, params.mu, params.p
    a0 = ((1.0 - k) * (n - 1) / 2.0 + mu / 2.0) * p + mu
    b0 = mu + (1.0 - k) * (n - 1) + k * p / 2.0 + 2.0
    return a0, b0


def exponent_identity_residual(params: ModelParams, branch: str = "theta") -> float:
    """Residual of the exponent bookkeeping for the power of ``t``.

    ``branch="theta"``: ``(beta-alpha)/(p-1) + b0 - a0 = theta/(p-1)``.
    ``branch="fujita"``: zero seeds give ``2/(p-1) - (1-k) n``.
    The residual is relative to ``max(1, |rhs|)``.
    """
    alpha, beta = _alpha_beta(params)
    p = params.p
    if branch == "theta":
        a0, b0 = _seed_exponents(params)
        rhs = theta(params.n, params.k, params.mu, p) / (p - 1.0)
    elif branch == "fujita":
        a0 = b0 = 0.0
        rhs = 2.0 / (p - 1.0) - (1.0 - params.k) * params.n
    else:
        raise ValueError(f"unknown branch {branch!r}")
    lhs = (beta - alpha) / (p - 1.0) + b0 - a0
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def critical_identity_residual(n: float, k: float, mu: float) -> float:
    """Residual of the exponent identity used in the weighted frame at ``p = p0``.

    ``-((n-1)/2 + (mu-k)/(2(1-k))) p + ((n-1)/2 + (mu+k)/(2(1-k))) + 1/p = -1/(1-k)``.
    Returns ``nan`` when the shifted exponent is infinite.
    """
    p = p0(k, shifted_dimension(n, k, mu))
    if not math.isfinite(p):
        return math.nan
    c = 2.0 * (1.0 - k)
    lhs = -((n - 1) / 2.0 + (mu - k) / c) * p + ((n - 1) / 2.0 + (mu + k) / c) + 1.0 / p
    rhs = -1.0 / (1.0 - k)
    return abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def jensen_frame_constant(params: ModelParams, R_pad: float = 0.0) -> float:
    """Constant of the double-integral frame for ``U0``.

    Jensen's inequality on the support ball gives
    ``int |u|^p >= |B_1|^{-(p-1)} (R + A_k(s))^{-n(p-1)} U0^p`` and
    ``inf_{s>=1} s^{1-k}/(R + A_k(s)) = min(1/R, 1-k)``. ``R_pad`` enlarges
    the radius, e.g. by a few grid cells for discrete supports.
    """
    n, k, p = params.n, params.k, params.p
    R = params.R + R_pad
    ball = sphere_area(n) / n
    m = min(1.0 / R, 1.0 - k)
    return ball ** (-(p - 1.0)) * m ** (n * (p - 1.0))


def data_mass(profile, n: int, R: float) -> float:
    """``int profile(|x|) dx`` over the ball of radius ``R``."""
    val, _ = integrate.quad(lambda r: r ** (n - 1) * float(profile(np.array(r))), 0.0, R,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return sphere_area(n) * val


# ---------------------------------------------------------------------------
# subcritical sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubcriticalIteration:
    """Sequences of the lower bounds ``U0 >= D_j t^{-a_j} (t - T1)^{b_j}``.

    ``a_rec``/``b_rec``/``log_D`` come from the recursions, ``a_closed`` and
    ``b_closed`` from the explicit formulas.
    """

    params: ModelParams
    branch: str
    alpha: float
    beta: float
    a0: float
    b0: float
    C: float
    K: float
    T1: float
    a_rec: np.ndarray
    b_rec: np.ndarray
    a_closed: np.ndarray
    b_closed: np.ndarray
    log_D: np.ndarray

    @property
    def j_max(self) -> int:
        return len(self.log_D) - 1

    @property
    def eps_power(self) -> float:
        return self.params.p if self.branch == "theta" else 1.0

    @property
    def log_D0(self) -> float:
        return float(self.log_D[0])

    def closed_form_residual(self) -> float:
        """Largest relative gap between recursion and closed form."""
        ra = np.abs(self.a_rec - self.a_closed) / np.maximum(1.0, np.abs(self.a_closed))
        rb = np.abs(self.b_rec - self.b_closed) / np.maximum(1.0, np.abs(self.b_closed))
        return float(max(ra.max(), rb.max()))

    def log_envelope(self, j: int, t) -> np.ndarray:
        """``log(D_j t^{-a_j} (t - T1)^{b_j})`` for ``t > T1``."""
        t = np.asarray(t, dtype=float)
        return self.log_D[j] - self.a_rec[j] * np.log(t) + self.b_rec[j] * np.log(t - self.T1)

    @property
    def C_tilde(self) -> float:
        return self.C / (self.beta / (self.params.p - 1.0) + self.b0) ** 2

    @property
    def j0(self) -> int:
        """Smallest nonnegative integer above ``log(C~)/(2 log p) - p/(p-1)``."""
        p = self.params.p
        x = math.log(self.C_tilde) / (2.0 * math.log(p)) - p / (p - 1.0)
        return max(0, math.floor(x) + 1)

    @property
    def log_E(self) -> float:
        """``log E`` with ``E = K p^{-2p/(p-1)^2} C~^{1/(p-1)}``."""
        p = self.params.p
        return math.log(self.K) - 2.0 * p * math.log(p) / (p - 1.0) ** 2 + math.log(self.C_tilde) / (p - 1.0)

    def log_D_lower_bound_holds(self) -> np.ndarray:
        """``log D_j >= p^j log(E eps^r)`` for each ``j >= j0`` (``r = p`` or ``1``)."""
        p = self.params.p
        j = np.arange(self.j0, self.j_max + 1)
        bound = p ** j * (self.log_E + self.eps_power * math.log(self.params.eps))
        slack = 1e-12 * np.maximum(1.0, np.abs(bound))
        return self.log_D[j] >= bound - slack

    def as_dict(self, truncate: int = 8) -> dict:
        m = truncate
        return {
            "branch": self.branch,
            "alpha": self.alpha,
            "beta": self.beta,
            "a0": self.a0,
            "b0": self.b0,
            "C": self.C,
            "K": self.K,
            "T1": self.T1,
            "j0": self.j0,
            "a": self.a_rec[:m].tolist(),
            "b": self.b_rec[:m].tolist(),
            "log_D": self.log_D[:m].tolist(),
            "closed_form_residual": self.closed_form_residual(),
        }


def _auto_branch(params: ModelParams) -> str:
    rep_p0 = p0(params.k, shifted_dimension(params.n, params.k, params.mu))
    if params.p < rep_p0:
        return "theta"
    if params.p < p1(params.k, params.n):
        return "fujita"
    raise SupercriticalError("the subcritical iteration needs p < p0_shifted or p < p1")


def subcritical_sequences(params: ModelParams, j_max: int = J_MAX, C: float | None = None,
                          K: float = 1.0, T1: float = 1.0, branch: str | None = None) -> SubcriticalIteration:
    """Run the subcritical recursions and their closed forms side by side.

    Parameters
    ----------
    params : ModelParams
        Instance; ``params.eps`` enters ``D0``.
    j_max : int
        Last index computed.
    C : float, optional
        Frame constant; defaults to :func:`jensen_frame_constant`.
    K : float
        Constant of the first lower bound: ``D0 = K eps**p`` on the theta
        branch, ``D0 = K eps`` on the Fujita branch.
    T1 : float
        Start time of the lower bounds.
    branch : {"theta", "fujita"}, optional
        Seed choice; inferred from ``p`` when omitted.
    """
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    if not (K > 0 and T1 >= 1.0):
        raise ValueError("need K > 0 and T1 >= 1")
    branch = branch or _auto_branch(params)
    p, mu, eps = params.p, params.mu, params.eps
    alpha, beta = _alpha_beta(params)
    if branch == "theta":
        a0, b0 = _seed_exponents(params)
        log_D0 = math.log(K) + p * math.log(eps)
    elif branch == "fujita":
        a0 = b0 = 0.0
        log_D0 = math.log(K) + math.log(eps)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    C = jensen_frame_constant(params) if C is None else C
    if not C > 0:
        raise ValueError("frame constant must be positive")
    a = np.empty(j_max + 1)
    b = np.empty(j_max + 1)
    logD = np.empty(j_max + 1)
    a[0], b[0], logD[0] = a0, b0, log_D0
    logC = math.log(C)
    for j in range(j_max):
        a[j + 1] = alpha + p * a[j]
        b[j + 1] = beta + p * b[j]
        bp = b[j] * p
        logD[j + 1] = logC + p * logD[j] - math.log1p(mu + bp) - math.log(2.0 + mu + bp)
    pj = p ** np.arange(j_max + 1, dtype=float)
    a_closed = (alpha / (p - 1.0) + a0) * pj - alpha / (p - 1.0)
    b_closed = (beta / (p - 1.0) + b0) * pj - beta / (p - 1.0)
    return SubcriticalIteration(params, branch, alpha, beta, a0, b0, C, K, T1, a, b, a_closed, b_closed, logD)


@dataclass(frozen=True)
class SubcriticalThreshold:
    """Time past which the iterated lower bound diverges as ``j -> inf``.

    With ``kappa = (beta-alpha)/(p-1) + b0 - a0`` the bound at step ``j`` is
    ``exp(p^j log(2^{-b0-beta/(p-1)} E eps^r t^kappa)) t^{alpha/(p-1)} (t-T1)^{-beta/(p-1)}``
    for ``t >= 2 T1``; it diverges once the argument of the logarithm exceeds 1.
    """

    seq: SubcriticalIteration
    kappa: float
    log_E: float
    eps_power: float

    @property
    def eps_exponent(self) -> float:
        """``T ~ eps**eps_exponent``: ``-p(p-1)/theta`` or ``-1/(2/(p-1) - (1-k)n)``."""
        return -self.eps_power / self.kappa

    def log_prefactor(self) -> float:
        p = self.seq.params.p
        return (self.seq.b0 + self.seq.beta / (p - 1.0)) * math.log(2.0)

    def log_t_star(self, eps: float | None = None) -> float:
        eps = self.seq.params.eps if eps is None else eps
        return (self.log_prefactor() - self.log_E - self.eps_power * math.log(eps)) / self.kappa

    def t_star(self, eps: float | None = None) -> float:
        return math.exp(self.log_t_star(eps))

    def log_argument(self, t, eps: float | None = None):
        """Logarithm of the bracket that decides divergence."""
        eps = self.seq.params.eps if eps is None else eps
        return -self.log_prefactor() + self.log_E + self.eps_power * math.log(eps) + self.kappa * np.log(t)

    def eps0(self) -> float:
        """Largest ``eps`` with ``t_star(eps) >= 2 T1``."""
        target = math.log(2.0 * self.seq.T1)
        x = (self.log_prefactor() - self.log_E - self.kappa * target) / self.eps_power
        return math.exp(x)

    def log_bound(self, j: int, t):
        """Logarithm of the step-``j`` bound written through the bracket."""
        p = self.seq.params.p
        t = np.asarray(t, dtype=float)
        return (p ** j * self.log_argument(t) + self.seq.alpha / (p - 1.0) * np.log(t)
                - self.seq.beta / (p - 1.0) * np.log(t - self.seq.T1))

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "log_E": self.log_E,
            "eps_exponent": self.eps_exponent,
            "log_t_star": self.log_t_star(),
            "eps0": self.eps0(),
        }


def subcritical_threshold(params: ModelParams, seq: SubcriticalIteration | None = None,
                          **kwargs) -> SubcriticalThreshold:
    """Explicit divergence time ``t*(eps)`` of the subcritical iteration.

    On the theta branch ``t* = 2^{(b0(p-1)+beta)/theta} (E0 eps^p)^{-(p-1)/theta}``.

    Raises
    ------
    ValueError
        If the exponent of ``t`` is not positive (``theta <= 0`` on the
        theta branch).
    """
    seq = seq or subcritical_sequences(params, **kwargs)
    p = params.p
    kappa = (seq.beta - seq.alpha) / (p - 1.0) + seq.b0 - seq.a0
    if not kappa > 0:
        raise ValueError(f"exponent of t is {kappa}; the iteration does not diverge (theta <= 0)")
    return SubcriticalThreshold(seq, kappa, seq.log_E, seq.eps_power)


def divergence_witness(thr: SubcriticalThreshold, factor: float, j_range: Sequence[int] = range(0, 40)) -> dict:
    """Direction of the step-``j`` bound at ``t = factor * t*``.

    Returns the increments of the log-bound in ``j`` and whether they are
    all positive (divergent) or all negative.
    """
    t = factor * thr.t_star()
    vals = np.array([float(thr.log_bound(j, t)) for j in j_range])
    inc = np.diff(vals)
    return {
        "t": t,
        "log_argument": float(thr.log_argument(t)),
        "increasing": bool(np.all(inc > 0)),
        "decreasing": bool(np.all(inc < 0)),
        "last": float(vals[-1]),
    }


# ---------------------------------------------------------------------------
# slicing at the Fujita-type exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlicingIteration:
    """Sequences of ``U0(t) >= K_j (log(t/l_j))^{sigma_j}`` for ``t >= l_j``."""

    params: ModelParams
    C: float
    K: float
    ell: np.ndarray
    sigma_rec: np.ndarray
    sigma_closed: np.ndarray
    log_K: np.ndarray
    L: float
    log_N: float
    j2: int

    @property
    def j_max(self) -> int:
        return len(self.log_K) - 1

    @property
    def N(self) -> float:
        return math.exp(self.log_N)

    def sigma_residual(self) -> float:
        return float(np.max(np.abs(self.sigma_rec - self.sigma_closed) / self.sigma_closed))

    def gap_holds(self) -> np.ndarray:
        """``1 - l_j/l_{j+1} > 2^{-(j+3)}`` for consecutive pairs, in exact rationals.

        ``l_j`` rounds to 2 in double precision once ``j > 51``.
        """
        def ell(i):
            return 2 - Fraction(1, 2 ** (i + 1))

        return np.array([1 - ell(i) / ell(i + 1) > Fraction(1, 2 ** (i + 3)) for i in range(len(self.ell) - 1)])

    def log_K_bound_holds(self) -> np.ndarray:
        """``log K_j >= p^j log(N eps^p)`` for each ``j >= j2``."""
        p, eps = self.params.p, self.params.eps
        j = np.arange(self.j2, self.j_max + 1)
        bound = p ** j * (self.log_N + p * math.log(eps))
        slack = 1e-12 * np.maximum(1.0, np.abs(bound))
        return self.log_K[j] >= bound - slack

    def log_threshold(self, eps: float | None = None) -> float:
        """``log t(eps) = 2 N^{-(p-1)/p} eps^{-(p-1)}``, where ``H(t, eps) = 1``."""
        p = self.params.p
        eps = self.params.eps if eps is None else eps
        return 2.0 * math.exp(-(p - 1.0) / p * self.log_N - (p - 1.0) * math.log(eps))

    def log_threshold_as_printed(self, eps: float | None = None) -> float:
        """Same with the exponent of ``N`` written as ``-(1-p)/p``; kept for comparison."""
        p = self.params.p
        eps = self.params.eps if eps is None else eps
        return 2.0 * math.exp(-(1.0 - p) / p * self.log_N - (p - 1.0) * math.log(eps))

    def log_H(self, log_t, eps: float | None = None):
        """``log H`` with ``H = 2^{-p/(p-1)} N eps^p (log t)^{p/(p-1)}``; takes ``log t``."""
        p = self.params.p
        eps = self.params.eps if eps is None else eps
        return (-p / (p - 1.0) * math.log(2.0) + self.log_N + p * math.log(eps)
                + p / (p - 1.0) * np.log(log_t))

    def log_envelope(self, j: int, t) -> np.ndarray:
        """``log(K_j (log(t/l_j))^{sigma_j})``; ``-inf`` for ``t <= l_j``."""
        t = np.asarray(t, dtype=float)
        x = np.log(np.maximum(t / self.ell[j], 1.0))
        with np.errstate(divide="ignore"):
            return self.log_K[j] + self.sigma_rec[j] * np.log(x)

    def as_dict(self, truncate: int = 8) -> dict:
        m = truncate
        return {
            "C": self.C,
            "K": self.K,
            "L": self.L,
            "log_N": self.log_N,
            "j2": self.j2,
            "ell": self.ell[:m].tolist(),
            "sigma": self.sigma_rec[:m].tolist(),
            "log_K": self.log_K[:m].tolist(),
            "sigma_residual": self.sigma_residual(),
            "log_threshold": self.log_threshold(),
        }


def slicing_p1(params: ModelParams, j_max: int = J_MAX, C: float | None = None, K: float = 1.0) -> SlicingIteration:
    """Slicing iteration for ``p = p1(k, n)``.

    ``K`` is the constant in ``U0 >= K eps``; ``C`` defaults to
    :func:`jensen_frame_constant`.

    Raises
    ------
    ValueError
        If ``(1-k) n (p-1) != 2`` within :data:`CRITICAL_RTOL` or
        ``mu < mu0(k, n)``.
    """
    n, k, mu, p, eps = params.n, params.k, params.mu, params.p, params.eps
    if abs((1.0 - k) * n * (p - 1.0) - 2.0) > CRITICAL_RTOL * 2.0:
        raise ValueError("slicing needs p = p1(k, n), i.e. (1-k) n (p-1) = 2")
    m0 = mu0(k, n)
    if mu < m0 * (1.0 - CRITICAL_RTOL):
        raise ValueError(f"slicing at p1 needs mu >= mu0 = {m0}")
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    C = jensen_frame_constant(params) if C is None else C
    j = np.arange(j_max + 1, dtype=float)
    ell = 2.0 - 2.0 ** (-(j + 1.0))
    sigma = np.empty(j_max + 1)
    logK = np.empty(j_max + 1)
    sigma[0] = 1.0
    lc, lm = math.log(C), math.log1p(mu)
    logK[0] = lc + p * math.log(K) + p * math.log(eps) - (mu + 1.0) * math.log(3.0) - lm
    for i in range(j_max):
        sigma[i + 1] = 1.0 + p * sigma[i]
        logK[i + 1] = (-(i + 3.0) * (mu + 1.0) * math.log(2.0) + lc - lm
                       - math.log1p(p * sigma[i]) + p * logK[i])
    sigma_closed = (p ** (j + 1.0) - 1.0) / (p - 1.0)
    L = 2.0 ** (-2.0 * (mu + 1.0)) * C / (mu + 1.0) * (p - 1.0) / p
    lq = (mu + 1.0) * math.log(2.0) + math.log(p)
    j2 = max(0, math.ceil(math.log(L) / lq - p / (p - 1.0)))
    log_N = (-(mu + 1.0) * math.log(3.0) + lc + p * math.log(K) - lm
             - p / (p - 1.0) ** 2 * lq + math.log(L) / (p - 1.0))
    return SlicingIteration(params, C, K, ell, sigma, sigma_closed, logK, L, log_N, j2)


def slicing_divergence_log_log_time(it: SlicingIteration) -> float:
    """``log log T_env`` for the slicing envelope.

    The step-``J`` bound diverges in ``J`` iff
    ``p^{-J}(log K_J + sigma_J log log(t/l_J)) > 0``; with ``J = j_max`` the
    root is ``log(t/l_J) = exp(-log K_J / sigma_J)``.
    """
    J = it.j_max
    x = -it.log_K[J] / it.sigma_rec[J]
    # log T = log l_J + e^x
    return float(x + math.log1p(math.log(it.ell[J]) * math.exp(-x)))


# ---------------------------------------------------------------------------
# critical frame for the weighted functional
# ---------------------------------------------------------------------------


def _weight_setting(params: ModelParams) -> tuple[float, float, bool]:
    """Damping used in the weights, power of ``s`` in the source, admissibility."""
    k, mu, p = params.k, params.mu, params.p
    if mu <= k:
        return 2.0 - mu, (1.0 - mu) * (p - 1.0), True
    return mu, 0.0, mu >= 2.0 - k


def _require_p0(params: ModelParams) -> float:
    n, k, mu, p = params.n, params.k, params.mu, params.p
    target = p0(k, shifted_dimension(n, k, mu))
    if not (math.isfinite(target) and abs(p - target) <= CRITICAL_RTOL * target):
        raise ValueError(f"the weighted frame needs p = p0_shifted = {target}")
    return 0.5 * (n - 1) - 1.0 / p


@dataclass(frozen=True)
class CriticalFrameConstants:
    """Calibrated constants of the weighted frame and of its logarithmic seed."""

    C: float
    M: float
    B1: float
    K: float
    admissible: bool

    def as_dict(self) -> dict:
        return {"C": self.C, "M": self.M, "B1": self.B1, "K": self.K, "admissible": self.admissible}


def _holder_ratio(params: ModelParams, t: float, s: float, wp: WeightParams, mu_w: float, w_exp: float,
                  nr: int) -> float:
    """Ratio of the exact Hoelder lower bound to the frame kernel at ``(t, s)``."""
    n, k, p = params.n, params.k, params.p
    rmax = params.R + float(A_k(s, k))
    x, w = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * rmax * (1.0 + x)
    xi = xi_q(s, s, r, k, mu_w, n, wp, method="gauss")
    eta = eta_q(t, s, r, k, mu_w, n, wp, method="gauss")
    J = sphere_area(n) * 0.5 * rmax * np.sum(w * r ** (n - 1) * xi ** (p / (p - 1.0)) * eta ** (-1.0 / (p - 1.0)))
    la_s = math.log(float(bracket(A_k(s, k))))
    log_ratio = (0.5 * (mu_w - k) * math.log(t) + w_exp * math.log(s) + 0.5 * (k - mu_w) * p * math.log(s)
                 - (p - 1.0) * math.log(J) + math.log(float(bracket(A_k(t, k)))) + math.log(s)
                 + (p - 1.0) * math.log(la_s))
    return math.exp(log_ratio)


def _eta_lower_ratio(params: ModelParams, t: float, s: float, wp: WeightParams, mu_w: float, nr: int) -> float:
    n, k = params.n, params.k
    r = np.linspace(0.0, params.R + float(A_k(s, k)), nr)
    eta = eta_q(t, s, r, k, mu_w, n, wp, method="gauss")
    ref = (s ** (0.5 * (mu_w + k)) * t ** (0.5 * (k - mu_w)) / float(bracket(A_k(t, k)))
           * float(bracket(A_k(s, k))) ** (-wp.q))
    return float(np.min(eta) / ref)


def seed_first_iterate(params: ModelParams, t, B1: float = 1.0, K: float = 1.0) -> np.ndarray:
    """First iterate of the frame fed with the lower bound for ``int |u|^p``.

    ``B1 K eps^p <A(t)>^{-1} int_1^t (phi(t)-phi(s)) s^{(mu+k)/2 + w} <A(s)>^{-q+e} ds``
    with ``e = (n-1)(1-p/2) + (k-mu)p/(2(1-k))``; ``mu`` and ``w`` are those of
    the weights (the transformed damping when ``mu <= k``).
    """
    q = _require_p0(params)
    n, k, p, eps = params.n, params.k, params.p, params.eps
    mu_w, w_exp, _ = _weight_setting(params)
    e = (n - 1) * (1.0 - 0.5 * p) + (k - mu_w) * p / (2.0 * (1.0 - k))
    expo = 0.5 * (mu_w + k) + w_exp

    def one(tt):
        pt = float(phi_k(tt, k))
        f = lambda s: (pt - float(phi_k(s, k))) * s ** expo * float(bracket(A_k(s, k))) ** (e - q)  # noqa: E731
        val, _ = integrate.quad(f, 1.0, tt, epsabs=0.0, epsrel=1e-10, limit=200)
        return B1 * K * eps ** p * val / float(bracket(A_k(tt, k)))

    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([one(x) for x in t])


def calibrate_critical_constants(params: ModelParams, K: float = 1.0, lambda0: float = 1.0,
                                 s_grid: Sequence[float] = (1.0, 2.0, 5.0, 12.0, 30.0),
                                 t_factors: Sequence[float] = (1.0, 2.0, 8.0),
                                 nr: int = 48, safety: float = 0.5) -> CriticalFrameConstants:
    """Calibrate ``C`` (frame), ``B1`` (weight lower bound) and ``M`` (seed).

    ``C`` is the infimum over the grid of the exact Hoelder lower bound
    divided by the frame kernel; ``B1`` the infimum of the weight ratio;
    ``M`` the infimum over ``t >= 3/2`` of the first iterate divided by
    ``eps^p log(2t/3)``. Each infimum is multiplied by ``safety``.
    """
    q = _require_p0(params)
    mu_w, w_exp, admissible = _weight_setting(params)
    wp = WeightParams(q=q, lambda0=lambda0, R=params.R)
    C = math.inf
    B1 = math.inf
    for s in s_grid:
        for f in t_factors:
            t = s * f
            C = min(C, _holder_ratio(params, t, s, wp, mu_w, w_exp, nr))
            B1 = min(B1, _eta_lower_ratio(params, t, s, wp, mu_w, nr))
    C *= safety
    B1 *= safety
    tt = np.geomspace(1.55, 1e3, 40)
    ratio = seed_first_iterate(params, tt, B1=B1, K=K) / (params.eps ** params.p * np.log(2.0 * tt / 3.0))
    M = safety * float(np.min(ratio))
    return CriticalFrameConstants(C=C, M=M, B1=B1, K=K, admissible=admissible)


class _LogTimeFrame:
    """The frame operator on a uniform grid in ``tau = log t``.

    With ``c = 1 - k`` one has ``phi(t) - phi(s) = phi(t)(1 - e^{-c(tau-sigma)})``
    and ``ds/s = d sigma``, so
    ``Phi[V](tau) = C phi/<A> * int (1 - e^{-c(tau-sigma)}) (log<A(sigma)>)^{1-p} V^p d sigma``.
    The exponential part is a first-order recursion integrated exactly for
    piecewise-linear integrands.
    """

    def __init__(self, params: ModelParams, C: float, tau: np.ndarray):
        self.p = params.p
        self.C = C
        self.tau = tau
        k = params.k
        c = 1.0 - k
        self.c = c
        h = tau[1] - tau[0]
        self.h = h
        z = c * h
        ez = math.exp(-z)
        frac = -math.expm1(-z) / z
        self.decay = ez
        self.wa = (frac - ez) / c
        self.wb = (1.0 - frac) / c
        # log <A(s)> and phi/<A>, both in overflow-free form
        shift = (3.0 * c - 1.0) * np.exp(-c * tau)
        self.log_brk = c * tau - math.log(c) + np.log1p(shift)
        self.log_ratio = -np.log1p(shift)
        self.log_C = math.log(C)

    def apply(self, log_v: np.ndarray, lower: float) -> np.ndarray:
        """``log Phi[V]`` with the integral started at ``sigma = lower``."""
        with np.errstate(over="ignore", under="ignore"):
            g = np.exp(self.p * log_v - (self.p - 1.0) * np.log(self.log_brk))
        g = np.where(self.tau >= lower, g, 0.0)
        h = self.h
        g0 = np.concatenate(([0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))))
        inc = self.wa * g[:-1] + self.wb * g[1:]
        w = np.concatenate(([0.0], signal.lfilter([1.0], [1.0, -self.decay], inc)))
        q = np.maximum(g0 - w, 0.0)
        with np.errstate(divide="ignore"):
            return self.log_C + self.log_ratio + np.log(q)


def frame_operator(params: ModelParams, C: float, tau: np.ndarray, log_v: np.ndarray, lower: float) -> np.ndarray:
    """Apply the frame once on the ``log t`` grid ``tau``; see :class:`_LogTimeFrame`."""
    return _LogTimeFrame(params, C, np.asarray(tau, dtype=float)).apply(np.asarray(log_v, dtype=float), lower)


@dataclass
class CriticalFrameState:
    """Tabulated lower bounds for the weighted functional on a ``log t`` grid."""

    params: ModelParams
    q: float
    constants: CriticalFrameConstants
    tau: np.ndarray
    log_bounds: list = field(default_factory=list)
    dominates: list = field(default_factory=list)
    raw_growth_fraction: list = field(default_factory=list)
    log_cap: float = 0.0
    log_T_env: float = math.inf
    iterations: int = 0

    @property
    def M(self) -> float:
        return self.constants.M

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "constants": self.constants.as_dict(),
            "iterations": self.iterations,
            "log_T_env": self.log_T_env if math.isfinite(self.log_T_env) else "inf",
            "log_cap": self.log_cap,
            "grid": {"tau_min": float(self.tau[0]), "tau_max": float(self.tau[-1]), "points": int(self.tau.size)},
            "all_dominate": bool(all(self.dominates)),
        }


def _first_crossing(tau: np.ndarray, log_v: np.ndarray, level: float) -> float:
    idx = np.flatnonzero(log_v >= level)
    if idx.size == 0:
        return math.inf
    i = int(idx[0])
    if i == 0 or not np.isfinite(log_v[i - 1]):
        return float(tau[i])
    f = (level - log_v[i - 1]) / (log_v[i] - log_v[i - 1])
    return float(tau[i - 1] + f * (tau[i] - tau[i - 1]))


def _iterate_frame(params, consts, tau, j_max, log_cap, tol):
    eps, p = params.eps, params.p
    frame = _LogTimeFrame(params, consts.C, tau)
    t_arg = np.log(2.0 / 3.0) + tau
    with np.errstate(divide="ignore", invalid="ignore"):
        seed = np.where(t_arg > 0, math.log(consts.M) + p * math.log(eps) + np.log(np.maximum(t_arg, 1e-300)), -np.inf)
    seed = np.minimum(seed, log_cap)
    bounds = [seed]
    dominates, growth = [], []
    cur = seed
    for j in range(j_max):
        ell = 2.0 - 2.0 ** (-(j + 1.0))
        new = frame.apply(cur, math.log(ell))
        nxt = np.minimum(np.maximum(cur, new), log_cap)
        later = tau >= math.log(2.0 - 2.0 ** (-(j + 2.0)))
        dominates.append(bool(np.all(nxt[later] >= cur[later])))
        fin = np.isfinite(cur) & later
        growth.append(float(np.mean(new[fin] >= cur[fin])) if fin.any() else 0.0)
        bounds.append(nxt)
        fin_now = np.isfinite(nxt) & np.isfinite(cur) & (nxt < log_cap)
        change = float(np.max(np.abs(nxt[fin_now] - cur[fin_now]))) if fin_now.any() else 0.0
        cur = nxt
        if change < tol and j >= 1:
            break
    return bounds, dominates, growth


def critical_p0_frame_iteration(params: ModelParams, constants: CriticalFrameConstants | None = None,
                                 j_max: int = J_MAX, points: int = 4000, tau_max: float | None = None,
                                 log_cap: float | None = None, tol: float = 1e-10,
                                 max_extend: int = 12) -> CriticalFrameState:
    """Iterate the weighted frame from the logarithmic seed.

    Each step forms ``V_{j+1} = max(V_j, Phi_j[V_j])`` where ``Phi_j``
    integrates from ``l_j = 2 - 2^{-(j+1)}``; both terms are lower bounds, so
    the sequence is monotone by construction. Values are capped at
    ``exp(log_cap)``. The divergence time is the first time at which the
    last iterate reaches the cap. If the grid ends before that time it is
    doubled; if the crossing is resolved by fewer than 200 points the grid is
    shrunk around it.

    Parameters
    ----------
    constants : CriticalFrameConstants, optional
        Calibrated with :func:`calibrate_critical_constants` when omitted.
    """
    q = _require_p0(params)
    consts = constants or calibrate_critical_constants(params)
    p, eps, k = params.p, params.eps, params.k
    cap = log_cap if log_cap is not None else 250.0 / p
    if tau_max is None:
        est = 2.0 * (1.0 - k) ** (p - 1.0) / (consts.C * consts.M ** (p - 1.0) * eps ** (p * (p - 1.0)))
        tau_max = 8.0 * est + 10.0
    tau0 = math.log(1.5)
    state = None
    for _ in range(max_extend):
        tau = np.linspace(tau0, tau_max, points)
        bounds, dom, growth = _iterate_frame(params, consts, tau, j_max, cap, tol)
        log_T = _first_crossing(tau, bounds[-1], cap)
        state = CriticalFrameState(params, q, consts, tau, bounds, dom, growth, cap, log_T, len(bounds) - 1)
        if not math.isfinite(log_T):
            tau_max = 2.0 * tau_max
            continue
        if np.searchsorted(tau, log_T) < 200:
            tau_max = tau0 + 4.0 * (log_T - tau0)
            continue
        break
    return state


# ---------------------------------------------------------------------------
# comparison with simulations
# ---------------------------------------------------------------------------


@dataclass
class EnvelopeReport:
    """Outcome of checking a measured functional against iterated lower bounds."""

    regime: str
    functional: str
    constants: dict
    checked: int
    trivial: list
    violations: list
    overlay: dict | None = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "functional": self.functional,
            "constants": self.constants,
            "checked": self.checked,
            "trivial": self.trivial,
            "violations": self.violations,
            "passed": self.passed,
        }


def _window(trace, sup_cap: float):
    a = trace.arrays()
    keep = a["sup_norm"] <= sup_cap * a["sup_norm"][0]
    return {key: v[keep] for key, v in a.items()}


def envelope_vs_simulation(params: ModelParams, trace, j_max: int = J_MAX, T1: float = 1.0,
                           R_pad: float = 0.0, C_scale: float = 1.0, rtol: float = 1e-6,
                           sup_cap: float = 1e4, safety: float = 0.999,
                           constants: CriticalFrameConstants | None = None) -> EnvelopeReport:
    """Check that a simulated functional dominates every iterated envelope.

    The first lower bound is calibrated on the trace (its infimum times
    ``safety``); the frame constant is the Jensen constant with radius
    ``R + R_pad`` multiplied by ``C_scale``. An envelope that stays below
    the floor ``min U0`` over the whole trace is recorded as trivial.
    Violations are reported as ``(j, t, log excess)`` triples.
    """
    w = _window(trace, sup_cap)
    t = w["times"]
    bound = lifespan_bound(params)
    regime = bound.regime
    eps, p = params.eps, params.p
    violations: list = []
    trivial: list = []
    checked = 0
    tol = math.log1p(rtol)
    best = np.full(t.size, -np.inf)

    def scan(j, log_env, log_meas, mask):
        nonlocal checked, best
        sel = mask & np.isfinite(log_env)
        if not sel.any():
            return
        best = np.maximum(best, np.where(sel, log_env, -np.inf))
        checked += 1
        floor = float(np.min(log_meas))
        if float(np.max(log_env[sel])) <= floor:
            trivial.append(j)
        bad = np.flatnonzero(sel & (log_env > log_meas + tol))
        if bad.size:
            i = int(bad[0])
            violations.append([j, float(t[i]), float(log_env[i] - log_meas[i])])

    if regime in (Regime.SUBCRITICAL_P0, Regime.SUBCRITICAL_P1):
        branch = "theta" if regime is Regime.SUBCRITICAL_P0 else "fujita"
        later = t > T1
        log_u = np.log(w["U0"])
        if branch == "theta":
            a0, b0 = _seed_exponents(params)
            r = log_u[later] + a0 * np.log(t[later]) - b0 * np.log(t[later] - T1) - p * math.log(eps)
        else:
            r = log_u[later] - math.log(eps)
        K = safety * math.exp(float(np.min(r)))
        C = C_scale * jensen_frame_constant(params, R_pad)
        seq = subcritical_sequences(params, j_max=j_max, C=C, K=K, T1=T1, branch=branch)
        tt = np.where(later, t, T1 + 1.0)
        for j in range(j_max + 1):
            scan(j, np.where(later, seq.log_envelope(j, tt), -np.inf), log_u, later)
        consts = {"C": C, "K": K, "T1": T1, "branch": branch}
        functional = "U0"
    elif regime is Regime.CRITICAL_P1:
        log_u = np.log(w["U0"])
        K = safety * math.exp(float(np.min(log_u)) - math.log(eps))
        C = C_scale * jensen_frame_constant(params, R_pad)
        it = slicing_p1(params, j_max=j_max, C=C, K=K)
        for j in range(j_max + 1):
            scan(j, it.log_envelope(j, t), log_u, t > it.ell[j])
        consts = {"C": C, "K": K, "log_N": it.log_N}
        functional = "U0"
    else:
        cu = w["calU"]
        fin = np.isfinite(cu) & (cu > 0)
        if not fin.any():
            raise ValueError("the weighted functional was not recorded; enable calU_every")
        consts_c = constants or calibrate_critical_constants(params)
        log_u = np.log(np.where(fin, cu, 1.0))
        sel = fin & (t >= 1.5)
        M = safety * math.exp(float(np.min(log_u[sel] - p * math.log(eps) - np.log(np.log(2.0 * t[sel] / 3.0)))))
        consts_c = CriticalFrameConstants(C=C_scale * consts_c.C, M=M, B1=consts_c.B1, K=consts_c.K,
                                          admissible=consts_c.admissible)
        tau = np.linspace(math.log(1.5), math.log(float(t[-1])) + 0.05, 4000)
        bounds, _, _ = _iterate_frame(params, consts_c, tau, j_max, 250.0 / p, 1e-12)
        for j, b in enumerate(bounds):
            env = np.interp(np.log(t), tau, b, left=-np.inf)
            scan(j, env, log_u, sel)
        consts = consts_c.as_dict()
        functional = "calU"
    overlay = {"t": t, "log_measured": log_u, "log_bound": best}
    return EnvelopeReport(regime.value, functional, consts, checked, trivial, violations, overlay)


def iteration_report(params: ModelParams, j_max: int = J_MAX, truncate: int = 8, **kwargs) -> dict:
    """JSON-ready summary of the iteration that applies to ``params``.

    Keys: ``params``, ``sequences``, ``thresholds``, ``identity_residuals``
    and ``violations`` (failed per-index checks).
    """
    regime = lifespan_bound(params).regime
    out: dict = {"params": params.as_dict(), "regime": regime.value}
    res = {}
    violations: list = []
    n, k, mu = params.n, params.k, params.mu
    if regime in (Regime.SUBCRITICAL_P0, Regime.SUBCRITICAL_P1):
        branch = "theta" if regime is Regime.SUBCRITICAL_P0 else "fujita"
        seq = subcritical_sequences(params, j_max=j_max, branch=branch, **kwargs)
        thr = subcritical_threshold(params, seq)
        out["sequences"] = seq.as_dict(truncate)
        out["thresholds"] = thr.as_dict()
        res["closed_forms"] = seq.closed_form_residual()
        res["exponent"] = exponent_identity_residual(params, branch)
        bad = np.flatnonzero(~seq.log_D_lower_bound_holds())
        violations += [["log_D_bound", int(seq.j0 + i)] for i in bad]
    elif regime is Regime.CRITICAL_P1:
        it = slicing_p1(params, j_max=j_max, **kwargs)
        out["sequences"] = it.as_dict(truncate)
        out["thresholds"] = {
            "log_threshold": it.log_threshold(),
            "log_H_at_threshold": float(it.log_H(it.log_threshold())),
            "log_log_T_env": slicing_divergence_log_log_time(it),
        }
        res["sigma"] = it.sigma_residual()
        violations += [["ell_gap", int(i)] for i in np.flatnonzero(~it.gap_holds())]
        violations += [["log_K_bound", int(it.j2 + i)] for i in np.flatnonzero(~it.log_K_bound_holds())]
    else:
        st = critical_p0_frame_iteration(params, j_max=j_max, **kwargs)
        out["sequences"] = st.as_dict()
        out["thresholds"] = {"log_T_env": st.log_T_env if math.isfinite(st.log_T_env) else "inf"}
        res["critical_exponent"] = critical_identity_residual(n, k, mu)
        violations += [["dominance", int(i)] for i, d in enumerate(st.dominates) if not d]
    res["summation_p_j10"] = max(summation_identity_residuals(params.p, 10))
    out["identity_residuals"] = res
    out["violations"] = violations
    return out


def report_json(report: dict) -> str:
    """Serialise with sorted keys so that equal inputs give equal bytes."""
    return json.dumps(report, sort_keys=True, indent=2)
