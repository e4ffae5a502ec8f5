r"""Time kernels of the linear problem and the auxiliary weights built from them.

For :math:`t \ge s \ge 1` and :math:`\lambda > 0` the functions
:math:`y_0, y_1` solve

.. math::
    \partial_t^2 y - \lambda^2 t^{-2k} y + \mu t^{-1}\partial_t y = 0,
    \qquad y_j(s,s) = \delta_{0j},\ \partial_t y_j(s,s) = \delta_{1j}.

They are evaluated from Bessel closed forms assembled in log space: with
:math:`a = \lambda\phi_k(s)`, :math:`b = \lambda\phi_k(t)` every bracket is
written as :math:`e^{b-a}` times a combination of scaled Bessel functions of
moderate size. When the order :math:`\nu = (1-\mu)/(2(1-k))` is negative the
connection formula turns the brackets into sums of positive terms, so no
cancellation occurs in :math:`y_0`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .specfun import bessel_Ie, bessel_Ke, bessel_K, yz_phi

__all__ = [
    "phi_k",
    "A_k",
    "bracket",
    "CosmologyTime",
    "DerivedOrders",
    "KernelSource",
    "KernelEval",
    "WeightParams",
    "rho",
    "rho_prime",
    "psi",
    "log_y0",
    "log_y1",
    "y0",
    "y1",
    "evaluate_kernels",
    "integrate_cauchy",
    "oracle_wronskian",
    "ds_identity_residuals",
    "comparison_bounds",
    "xi_q",
    "eta_q",
    "xi_diag",
    "xi_diag_closed_n1",
    "calibrate_weight_constants",
    "xi_diag_upper_check",
    "KernelOverflowError",
]

_LOG_MAX = 709.0
# below this value of lambda*phi_k(t) the lambda -> 0 limit of the kernels is used
_SMALL_LAMBDA_PHI = 1e-7


class KernelOverflowError(OverflowError):
    """A kernel value is not representable in double precision."""


def phi_k(t, k: float):
    """Primitive of the propagation speed, ``t**(1-k) / (1-k)``."""
    return np.power(t, 1.0 - k) / (1.0 - k)


def A_k(t, k: float):
    """Amplitude of the light cone, ``phi_k(t) - phi_k(1)``."""
    return (np.power(t, 1.0 - k) - 1.0) / (1.0 - k)


def bracket(y):
    """Japanese bracket used by the weight estimates, ``3 + |y|``."""
    return 3.0 + np.abs(y)


@dataclass(frozen=True)
class CosmologyTime:
    k: float

    def phi(self, t):
        return phi_k(t, self.k)

    def A(self, t):
        return A_k(t, self.k)


@dataclass(frozen=True)
class DerivedOrders:
    """Bessel orders and constants attached to ``(k, mu)``."""

    gamma: float
    nu: float
    sigma: float
    c_k_mu: float

    @classmethod
    def from_km(cls, k: float, mu: float) -> "DerivedOrders":
        d = 2.0 * (1.0 - k)
        return cls(
            gamma=(mu - 1.0) / d,
            nu=(1.0 - mu) / d,
            sigma=(1.0 + mu) / d,
            c_k_mu=(1.0 - k) ** ((k - mu) / (1.0 - k)),
        )


class KernelSource(str, enum.Enum):
    CLOSED_FORM = "ClosedForm"
    ODE_ORACLE = "OdeOracle"


@dataclass(frozen=True)
class KernelEval:
    t: float
    s: float
    lam: float
    y0: float
    y1: float
    source: KernelSource


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the weights ``xi_q`` and ``eta_q``."""

    q: float
    lambda0: float = 1.0
    R: float = 1.0

    def __post_init__(self) -> None:
        if not self.q > -1.0:
            raise ValueError(f"q must exceed -1, got {self.q}")
        if not (self.lambda0 > 0 and self.R > 0):
            raise ValueError("lambda0 and R must be positive")


# ---------------------------------------------------------------- rho, Psi


def rho(s, k: float, mu: float):
    """Time factor ``s**((1+mu)/2) K_gamma(phi_k(s))`` of the adjoint solution."""
    g = DerivedOrders.from_km(k, mu).gamma
    s = np.asarray(s, dtype=float)
    z = phi_k(s, k)
    out = np.exp(0.5 * (1.0 + mu) * np.log(s) - z) * bessel_Ke(g, z)
    return float(out) if out.ndim == 0 else out


def rho_prime(s, k: float, mu: float):
    """Derivative of :func:`rho` from the order recurrence of ``K``."""
    g = DerivedOrders.from_km(k, mu).gamma
    s = np.asarray(s, dtype=float)
    z = phi_k(s, k)
    out = mu * s ** (0.5 * (mu - 1.0)) * bessel_K(g, z) - s ** (0.5 * (1.0 + mu) - k) * bessel_K(g + 1.0, z)
    return float(out) if np.ndim(out) == 0 else out


def psi(s, r, k: float, mu: float, n: int):
    """Separated adjoint solution ``rho(s) * phi(r)``."""
    return rho(s, k, mu) * yz_phi(r, n)


# ---------------------------------------------------------------- y0, y1


def _small_lambda_limits(t, s, mu):
    """Kernels of ``y'' + mu y'/t = 0``; the lambda -> 0 limit."""
    if abs(mu - 1.0) < 1e-12:
        z1 = s * np.log(t / s)
    else:
        z1 = s ** mu * (t ** (1.0 - mu) - s ** (1.0 - mu)) / (1.0 - mu)
    return np.ones_like(z1), z1


def _prep(t, s, lam):
    t, s, lam = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, s, lam)))
    if np.any(s < 1.0) or np.any(t < s):
        raise ValueError("kernels require t >= s >= 1")
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    return t, s, lam


def log_y0(t, s, lam, k: float, mu: float):
    """Natural logarithm of ``y0(t, s; lam)``."""
    t, s, lam = _prep(t, s, lam)
    nu = DerivedOrders.from_km(k, mu).nu
    small = lam * phi_k(t, k) < _SMALL_LAMBDA_PHI
    lam_ = np.where(small, 1.0, lam)
    a = lam_ * phi_k(s, k)
    b = lam_ * phi_k(t, k)
    d = b - a
    if nu >= 0.0:
        s0 = bessel_Ie(nu - 1.0, a) * bessel_Ke(nu, b) * np.exp(-2.0 * d) + bessel_Ke(nu - 1.0, a) * bessel_Ie(nu, b)
    else:
        m = -nu
        s0 = bessel_Ie(m + 1.0, a) * bessel_Ke(m, b) * np.exp(-2.0 * d) + bessel_Ke(m + 1.0, a) * bessel_Ie(m, b)
    out = np.log(a) + 0.5 * (mu - 1.0) * np.log(s) + 0.5 * (1.0 - mu) * np.log(t) + d + np.log(s0)
    out = np.where(small, 0.0, out)
    return float(out) if out.ndim == 0 else out


def log_y1(t, s, lam, k: float, mu: float):
    """Natural logarithm of ``y1(t, s; lam)``; ``-inf`` on the diagonal."""
    t, s, lam = _prep(t, s, lam)
    m = abs(DerivedOrders.from_km(k, mu).nu)
    small = lam * phi_k(t, k) < _SMALL_LAMBDA_PHI
    lam_ = np.where(small, 1.0, lam)
    a = lam_ * phi_k(s, k)
    b = lam_ * phi_k(t, k)
    d = b - a
    s1 = bessel_Ke(m, a) * bessel_Ie(m, b) - bessel_Ie(m, a) * bessel_Ke(m, b) * np.exp(-2.0 * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (-math.log(1.0 - k) + 0.5 * (1.0 + mu) * np.log(s) + 0.5 * (1.0 - mu) * np.log(t)
               + d + np.log(np.where(t > s, s1, 0.0)))
        _, z1 = _small_lambda_limits(t, s, mu)
        out = np.where(small, np.log(z1), out)
    return float(out) if out.ndim == 0 else out


def _exp_checked(v):
    if np.any(np.asarray(v) > _LOG_MAX):
        raise KernelOverflowError("kernel value exceeds the double-precision range")
    out = np.exp(v)
    return float(out) if np.ndim(out) == 0 else out


def y0(t, s, lam, k: float, mu: float):
    """Kernel with data ``(1, 0)`` at ``t = s``."""
    return _exp_checked(log_y0(t, s, lam, k, mu))


def y1(t, s, lam, k: float, mu: float):
    """Kernel with data ``(0, 1)`` at ``t = s``."""
    return _exp_checked(log_y1(t, s, lam, k, mu))


# ---------------------------------------------------------------- ODE oracle


def _rhs(k, mu, lam):
    lam2 = lam * lam

    def f(tau, y):
        return [y[1], lam2 * tau ** (-2.0 * k) * y[0] - mu / tau * y[1]]

    return f


def _solve(y_init, t_eval, s, lam, k, mu, rtol):
    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=float))
    if np.any(t_eval < s):
        raise ValueError("oracle times must satisfy t >= s")
    t_end = float(t_eval.max())
    if t_end == s:
        return np.tile(np.asarray(y_init, dtype=float)[:, None], (1, t_eval.size))
    order = np.argsort(t_eval)
    sol = integrate.solve_ivp(
        _rhs(k, mu, lam), (s, t_end), y_init, method="DOP853",
        t_eval=t_eval[order], rtol=rtol, atol=1e-20, dense_output=False,
    )
    if sol.status != 0:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    out = np.empty((len(y_init), t_eval.size))
    out[:, order] = sol.y
    return out


def integrate_cauchy(j: int, t, s: float, lam: float, k: float, mu: float, rtol: float = 1e-12):
    """Adaptive numerical solution of the kernel Cauchy problem.

    Parameters
    ----------
    j : {0, 1}
        Which kernel; data ``(1, 0)`` for ``j = 0``, ``(0, 1)`` for ``j = 1``.
    t : float or array_like
        Output times, all ``>= s``.
    rtol : float
        Relative tolerance handed to the Dormand-Prince 8(5,3) integrator.

    Raises
    ------
    RuntimeError
        If the integrator stops early, e.g. on step-size underflow.
    """
    if j not in (0, 1):
        raise ValueError("j must be 0 or 1")
    y_init = [1.0, 0.0] if j == 0 else [0.0, 1.0]
    out = _solve(y_init, t, s, lam, k, mu, rtol)[0]
    return float(out[0]) if np.ndim(t) == 0 else out


def oracle_wronskian(t, lam: float, k: float, mu: float, rtol: float = 1e-12):
    """``z0 z1' - z0' z1`` for the oracle kernels started at ``s = 1``; equals ``t**-mu``."""
    z0 = _solve([1.0, 0.0], t, 1.0, lam, k, mu, rtol)
    z1 = _solve([0.0, 1.0], t, 1.0, lam, k, mu, rtol)
    w = z0[0] * z1[1] - z0[1] * z1[0]
    return float(w[0]) if np.ndim(t) == 0 else w


def evaluate_kernels(t: float, s: float, lam: float, k: float, mu: float,
                     source: KernelSource = KernelSource.CLOSED_FORM) -> KernelEval:
    if KernelSource(source) is KernelSource.CLOSED_FORM:
        v0, v1 = y0(t, s, lam, k, mu), y1(t, s, lam, k, mu)
    else:
        v0 = integrate_cauchy(0, t, s, lam, k, mu)
        v1 = integrate_cauchy(1, t, s, lam, k, mu)
    return KernelEval(t=t, s=s, lam=lam, y0=v0, y1=v1, source=KernelSource(source))


# ---------------------------------------------------------------- identities


def ds_identity_residuals(t: float, s: float, lam: float, k: float, mu: float, h: float = 1e-3):
    """Finite-difference residuals of the two identities in ``s`` satisfied by ``y1``.

    ``r1 = d_s y1 + y0 - mu y1 / s`` and
    ``r2 = (d_s^2 - lam^2 s^-2k - mu s^-1 d_s + mu s^-2) y1``, both with
    centred differences of step ``h`` and normalised by the size of the
    largest term. Requires ``t > s + h`` and ``s - h >= 1``.
    """
    if not (s - h >= 1.0 and t > s + h):
        raise ValueError("need 1 <= s - h and s + h < t")
    f = lambda ss: y1(t, ss, lam, k, mu)  # noqa: E731
    ym, yc, yp = f(s - h), f(s), f(s + h)
    d1 = (yp - ym) / (2.0 * h)
    d2 = (yp - 2.0 * yc + ym) / (h * h)
    v0 = y0(t, s, lam, k, mu)
    scale1 = max(abs(d1), abs(v0), abs(mu * yc / s))
    r1 = (d1 + v0 - mu * yc / s) / scale1
    terms = (d2, lam * lam * s ** (-2.0 * k) * yc, mu / s * d1, mu / s ** 2 * yc)
    r2 = (terms[0] - terms[1] - terms[2] + terms[3]) / max(abs(x) for x in terms)
    return r1, r2


def comparison_bounds(t, s, lam, k: float, mu: float, rtol: float = 1e-9):
    """Lower comparison functions for the kernels and their validity flags.

    Returns
    -------
    w0, w1 : ndarray
        ``s^((mu-k)/2) t^((k-mu)/2) cosh(lam (phi(t)-phi(s)))`` and
        ``s^((mu+k)/2) t^((k-mu)/2) sinh(lam (phi(t)-phi(s))) / lam``.
    ok0, ok1 : ndarray of bool or None
        Whether ``y0 >= w0`` (resp. ``y1 >= w1``) holds up to relative
        tolerance ``rtol``; ``None`` when ``mu`` lies outside the range where
        the bound is asserted (``mu >= 2-k`` for ``w0``; ``mu <= k`` or
        ``mu >= 2-k`` for ``w1``).
    """
    t, s, lam = _prep(t, s, lam)
    d = lam * (phi_k(t, k) - phi_k(s, k))
    w0 = (s / t) ** (0.5 * (mu - k)) * np.cosh(d)
    w1 = s ** (0.5 * (mu + k)) * t ** (0.5 * (k - mu)) * np.sinh(d) / lam
    ok0 = ok1 = None
    if mu >= 2.0 - k:
        ok0 = y0(t, s, lam, k, mu) >= w0 * (1.0 - rtol)
    if mu <= k or mu >= 2.0 - k:
        ok1 = y1(t, s, lam, k, mu) >= w1 * (1.0 - rtol)
    return w0, w1, ok0, ok1


# ---------------------------------------------------------------- weights

_GJ_CACHE: dict = {}


def _panel_nodes(q: float, lambda0: float, npts: int, levels: int):
    """Composite rule for ``int_0^lambda0 f(l) l^q dl`` with geometric panels.

    The first panel ``[0, lambda0 2^-levels]`` uses Gauss-Jacobi with the
    weight ``l^q``; the remaining panels use Gauss-Legendre and carry the
    weight explicitly.
    """
    key = (q, lambda0, npts, levels)
    if key in _GJ_CACHE:
        return _GJ_CACHE[key]
    h0 = lambda0 * 2.0 ** (-levels)
    xj, wj = special.roots_jacobi(npts, 0.0, q)
    nodes = [0.5 * h0 * (1.0 + xj)]
    weights = [wj * (0.5 * h0) ** (q + 1.0)]
    xl, wl = np.polynomial.legendre.leggauss(npts)
    lo = h0
    while lo < lambda0 * (1.0 - 1e-14):
        hi = 2.0 * lo
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lam = mid + half * xl
        nodes.append(lam)
        weights.append(wl * half * lam ** q)
        lo = hi
    out = (np.concatenate(nodes), np.concatenate(weights))
    _GJ_CACHE[key] = out
    return out


def _weight_log_integrand(which: int, t, s, lam, k, mu, R):
    # the adaptive rule may sample the endpoint; the kernels have a finite limit there
    lam = np.maximum(lam, 1e-300)
    la = -lam * (A_k(t, k) + R)
    if which == 0:
        return la + log_y0(t, s, lam, k, mu)
    if t == s:
        return la + k * math.log(t)
    return la + log_y1(t, s, lam, k, mu) - math.log(phi_k(t, k) - phi_k(s, k))


def _weight(which, t, s, r, k, mu, n, wp: WeightParams, method, npts, levels):
    if t < s or s < 1.0:
        raise ValueError("weights require t >= s >= 1")
    r = np.asarray(r, dtype=float)
    if method == "gauss":
        lam, w = _panel_nodes(wp.q, wp.lambda0, npts, levels)
        base = np.exp(_weight_log_integrand(which, t, s, lam, k, mu, wp.R))
        phi = yz_phi(np.multiply.outer(r, lam), n)
        out = phi @ (base * w)
        return float(out) if out.ndim == 0 else out
    if method != "adaptive":
        raise ValueError(f"unknown method {method!r}")

    def one(rr):
        g = lambda lam: math.exp(_weight_log_integrand(which, t, s, lam, k, mu, wp.R)) * yz_phi(lam * rr, n)  # noqa: E731
        val, err = integrate.quad(g, 0.0, wp.lambda0, weight="alg", wvar=(wp.q, 0.0),
                                  epsabs=0.0, epsrel=1e-10, limit=200)
        if not err <= 1e-8 * abs(val):
            raise RuntimeError(f"weight quadrature did not converge: value {val}, error {err}")
        return val

    if r.ndim == 0:
        return one(float(r))
    return np.array([one(float(x)) for x in r.ravel()]).reshape(r.shape)


def xi_q(t: float, s: float, r, k: float, mu: float, n: int, wp: WeightParams,
         method: str = "adaptive", npts: int = 24, levels: int = 14):
    """Weight built from ``y0``.

    ``method="adaptive"`` uses QUADPACK's algebraic-weight rule (QAWS) at
    relative tolerance 1e-10; ``method="gauss"`` uses a fixed composite
    Gauss-Jacobi/Legendre rule and vectorises over ``r``.
    """
    return _weight(0, t, s, r, k, mu, n, wp, method, npts, levels)


def eta_q(t: float, s: float, r, k: float, mu: float, n: int, wp: WeightParams,
          method: str = "adaptive", npts: int = 24, levels: int = 14):
    """Weight built from ``y1 / (phi_k(t) - phi_k(s))``; the diagonal uses the limit ``t**k``."""
    return _weight(1, t, s, r, k, mu, n, wp, method, npts, levels)


def xi_diag(t: float, r, k: float, n: int, wp: WeightParams, npts: int = 24, levels: int = 14):
    """``xi_q(t, t, r)``, which does not depend on ``mu``; vectorised Gauss rule."""
    return _weight(0, t, t, r, k, 0.0, n, wp, "gauss", npts, levels)


def xi_diag_closed_n1(t: float, r, k: float, wp: WeightParams):
    """Closed form of ``xi_q(t, t, r)`` in one dimension via incomplete gamma functions.

    With ``c = A_k(t) + R`` and ``cosh``-type test function,
    ``int_0^L e^{-c l} cosh(l r) l^q dl = (1/2) sum_{+-} G(q+1) P(q+1, (c-+r) L) (c-+r)^{-q-1}``.
    Requires ``|r| <= c``.
    """
    r = np.abs(np.asarray(r, dtype=float))
    c = A_k(t, k) + wp.R
    if np.any(r > c):
        raise ValueError("closed form requires |r| <= A_k(t) + R")
    q1 = wp.q + 1.0
    L = wp.lambda0

    def part(a):
        safe = np.where(a > 0, a, 1.0)
        return np.where(a > 0, special.gamma(q1) * special.gammainc(q1, safe * L) / safe ** q1, L ** q1 / q1)

    out = 0.5 * (part(c - r) + part(c + r))
    return float(out) if out.ndim == 0 else out


def calibrate_weight_constants(ratios) -> tuple[float, float]:
    """Infimum and supremum of a bound ratio over a calibration grid."""
    ratios = np.asarray(ratios, dtype=float)
    if not np.all(np.isfinite(ratios)) or np.any(ratios <= 0):
        raise ValueError("bound ratios must be finite and positive")
    return float(ratios.min()), float(ratios.max())


def xi_diag_upper_check(t, r, k: float, n: int, wp: WeightParams, B2: float) -> np.ndarray:
    """Pointwise check of ``xi_q(t,t,r) <= B2 <A>^{-(n-1)/2} <A - r>^{(n-3)/2 - q}``.

    ``t`` is a scalar; ``r`` an array of radii with ``r <= A_k(t) + R``.
    """
    if not wp.q > 0.5 * (n - 3):
        raise ValueError("the upper bound needs q > (n-3)/2")
    r = np.asarray(r, dtype=float)
    a = A_k(t, k)
    bound = B2 * bracket(a) ** (-0.5 * (n - 1)) * bracket(a - r) ** (0.5 * (n - 3) - wp.q)
    return xi_diag(t, r, k, n, wp) <= bound
