r"""Method-of-lines solver for radial solutions of

.. math::
    u_{tt} - t^{-2k}\Delta u + \mu t^{-1} u_t = t^{w}|u|^p, \qquad t \ge 1,

with ``w = 0`` for the original problem and ``w = (1-mu)(p-1)`` for the
transformed one.

Space is discretised on the vertices ``r_i = i dr`` with a finite-volume form
of the radial Laplacian,

.. math::
    (\Delta_h u)_i = \frac{r_{i+1/2}^{n-1}(u_{i+1}-u_i) - r_{i-1/2}^{n-1}(u_i-u_{i-1})}{dr\,V_i},
    \qquad V_i = \int_{r_{i-1/2}}^{r_{i+1/2}} r^{n-1}\,dr,

so that :math:`\sum_i V_i (\Delta_h u)_i` telescopes to the boundary flux.
The discrete mass :math:`\omega_{n-1}\sum_i V_i u_i` therefore obeys the same
second-order ODE as :math:`\int u\,dx`. At ``r = 0`` the scheme reduces to
:math:`2n(u_1-u_0)/dr^2`, the regularised value :math:`n\,u_{rr}(0)`.

Time stepping is an embedded Dormand-Prince 5(4) pair with PI step control,
capped by a CFL bound ``cfl * dr * t**k`` for the speed ``t**-k``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .kernels import A_k, WeightParams, phi_k, rho, xi_diag
from .model import BoundForm, ModelParams, lifespan_bound
from .specfun import bessel_K, sphere_area, yz_phi

__all__ = [
    "SolverConfig",
    "RadialGrid",
    "RadialField",
    "FunctionalTrace",
    "BlowupReport",
    "DataFunctional",
    "SolverError",
    "bump",
    "flat_top",
    "evolve",
    "u0_identity_residual",
    "functional_lower_bound_checks",
    "data_functional",
    "flat_data_ode",
    "lifespan_sweep",
    "SweepResult",
    "trace_to_csv",
    "default_workers",
    "check_eps_span",
]

Profile = Callable[[np.ndarray], np.ndarray]


class SolverError(RuntimeError):
    """Aborted run: CFL violation, non-finite state or support leak."""


@dataclass(frozen=True)
class bump:
    """Default data profile ``amp * (1 - (r/R)^2)^power`` on ``r < R``."""

    R: float = 1.0
    power: int = 4
    amp: float = 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.amp * np.where(r < self.R, np.clip(1.0 - (r / self.R) ** 2, 0.0, None) ** self.power, 0.0)


@dataclass(frozen=True)
class flat_top:
    """Plateau ``amp`` on ``r <= R - width`` with a C^3 taper to zero at ``R``."""

    R: float
    width: float
    amp: float = 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x = np.clip((r - (self.R - self.width)) / self.width, 0.0, 1.0)
        return self.amp * (1.0 - x ** 4 * (35.0 - 84.0 * x + 70.0 * x ** 2 - 20.0 * x ** 3))


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and stopping settings.

    Attributes
    ----------
    dr : float
        Grid spacing.
    t_max : float
        Final time if no blow-up occurs.
    cfl : float
        Step cap ``dt <= cfl * dr * t**k``.
    rtol, atol : float
        Tolerances of the embedded error estimate; ``atol`` is relative to
        the initial size of the data.
    margin : float
        Extra radius beyond ``R + A_k(t_max)``.
    record_dt : float
        Minimum spacing of recorded times.
    calU_every : int
        Evaluate the weighted functional on every ``calU_every``-th record; 0 disables it.
    lambda0 : float
        Truncation of the weight integrals.
    blowup_factor, dt_collapse : float
        Blow-up trigger: ``sup|u| > blowup_factor * sup|u(1)|`` and ``dt < dt_collapse * t``.
    leak_tol : float
        After each step the state is projected onto ``r <= R + A_k(t) + 2 dr``
        and the clipped mass is returned to the last cell inside; the run
        aborts if the clipped amplitude exceeds ``leak_tol * sup|u|``.
    max_steps : int
        Hard cap on accepted plus rejected steps.
    """

    dr: float = 0.02
    t_max: float = 50.0
    cfl: float = 0.5
    rtol: float = 1e-8
    atol: float = 1e-12
    margin: float = 2.0
    record_dt: float = 0.05
    calU_every: int = 0
    lambda0: float = 1.0
    blowup_factor: float = 1e8
    dt_collapse: float = 1e-12
    leak_tol: float = 1e-2
    project_support: bool = True
    max_steps: int = 5_000_000

    def __post_init__(self) -> None:
        if not (self.dr > 0 and self.t_max > 1 and 0 < self.cfl <= 1.0):
            raise ValueError("need dr > 0, t_max > 1 and 0 < cfl <= 1")
        if not (0 < self.rtol < 1 and self.atol > 0):
            raise ValueError("tolerances must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RadialGrid:
    """Vertex grid with finite-volume weights; ``volume(f) = int f dx``."""

    n: int
    r_max: float
    dr: float
    r: np.ndarray = field(init=False)
    V: np.ndarray = field(init=False)
    cp: np.ndarray = field(init=False)
    cm: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        m = int(math.ceil(self.r_max / self.dr))
        self.r = self.dr * np.arange(m + 1)
        n = self.n
        rp = self.r + 0.5 * self.dr
        rm = np.clip(self.r - 0.5 * self.dr, 0.0, None)
        self.V = (rp ** n - rm ** n) / n
        self.cp = rp ** (n - 1) / (self.dr * self.V)
        self.cm = np.where(self.r > 0, rm ** (n - 1), 0.0) / (self.dr * self.V)
        self.omega = sphere_area(n)
        self.w = self.omega * self.V

    @property
    def m(self) -> int:
        return self.r.size

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Discrete Laplacian of the leading ``u.size`` values; zero ghost value beyond."""
        ma = u.size
        out = np.empty_like(u)
        du = np.diff(u)
        out[:-1] = self.cp[:ma - 1] * du
        out[-1] = -self.cp[ma - 1] * u[-1]
        out[1:] -= self.cm[1:ma] * du
        return out

    def volume(self, f: np.ndarray) -> float:
        """``int f dx`` for values on the leading ``f.size`` vertices."""
        return float(self.w[:f.size] @ f)

    def volume_tail(self, f: np.ndarray, lo: int, hi: int) -> float:
        """``int f dx`` restricted to the vertices ``lo <= i < hi``."""
        return float(self.w[lo:hi] @ f[lo:hi])

    def index_of(self, radius: float) -> int:
        return min(self.m, int(math.floor(radius / self.dr)) + 1)


@dataclass
class RadialField:
    t: float
    u: np.ndarray
    ut: np.ndarray


@dataclass
class FunctionalTrace:
    """Recorded functionals; all arrays share the length of ``times``.

    ``G`` and ``H`` are the integrals ``int_1^t s^mu F ds`` and
    ``int_1^t tau^-mu G dtau`` of ``F = int t^w |u|^p dx``, carried along
    with the state so that the mass identity can be checked at the order
    of the time integrator.
    """

    times: list = field(default_factory=list)
    U0: list = field(default_factory=list)
    dU0: list = field(default_factory=list)
    U1: list = field(default_factory=list)
    calU: list = field(default_factory=list)
    sup_norm: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    F: list = field(default_factory=list)
    G: list = field(default_factory=list)
    H: list = field(default_factory=list)
    support: list = field(default_factory=list)
    min_u: list = field(default_factory=list)
    u_center: list = field(default_factory=list)
    final: RadialField | None = field(default=None, repr=False)
    r: np.ndarray | None = field(default=None, repr=False)

    _SERIES = ("times", "U0", "dU0", "U1", "calU", "sup_norm", "dt", "F", "G", "H", "support", "min_u", "u_center")

    def arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k), dtype=float) for k in self._SERIES}


@dataclass
class BlowupReport:
    params: dict
    blew_up: bool
    lifespan_lo: float | None
    lifespan_hi: float | None
    trigger: str
    grid: dict
    steps: int = 0
    rejected: int = 0
    max_leak: float = 0.0
    positivity_violations: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class DataFunctional:
    value: float


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _initial_state(grid: RadialGrid, params: ModelParams, u0: Profile, u1: Profile,
                   data_map=None) -> tuple[np.ndarray, np.ndarray]:
    a = params.eps * np.asarray(u0(grid.r), dtype=float)
    b = params.eps * np.asarray(u1(grid.r), dtype=float)
    if data_map is not None:
        a, b = data_map(a, b)
    return a, b


def evolve(params: ModelParams, data: tuple[Profile, Profile] | None = None,
           config: SolverConfig = SolverConfig(), weight_exponent: float = 0.0,
           nonlinear: bool = True, data_map=None) -> tuple[FunctionalTrace, BlowupReport]:
    """Integrate the radial problem from ``t = 1``.

    Parameters
    ----------
    params : ModelParams
        Problem instance; ``eps`` multiplies both data profiles.
    data : (u0, u1), optional
        Radial profiles supported in ``[0, R]``; defaults to :class:`bump` for both.
    config : SolverConfig
    weight_exponent : float
        Exponent ``w`` of the factor ``t**w`` in front of ``|u|**p``.
    nonlinear : bool
        If False the right-hand side is dropped (linear run).
    data_map : callable, optional
        Applied to the scaled data before the run, e.g. the map of the
        dissipative transform.

    Returns
    -------
    trace : FunctionalTrace
    report : BlowupReport

    Raises
    ------
    SolverError
        On a support leak or a step-size collapse without growth.

    Notes
    -----
    Only the vertices inside ``R + A_k(t) + 2 dr`` plus a few cells of
    headroom are integrated; the remaining values are zero by the
    support projection.
    """
    n, k, mu, p, R = params.n, params.k, params.mu, params.p, params.R
    cfg = config
    if data is None:
        data = (bump(R), bump(R))
    grid = RadialGrid(n, R + float(A_k(cfg.t_max, k)) + cfg.margin, cfg.dr)
    U, V = _initial_state(grid, params, *data, data_map=data_map)
    if np.any(U[grid.r > R] != 0) or np.any(V[grid.r > R] != 0):
        raise ValueError("initial data must be supported in the ball of radius R")
    sup0 = max(np.max(np.abs(U)), np.max(np.abs(V)))
    if sup0 == 0:
        raise ValueError("initial data are identically zero")
    atol = cfg.atol * sup0
    wp = WeightParams(q=0.5 * (n - 1) - 1.0 / p, lambda0=cfg.lambda0, R=R) if cfg.calU_every else None
    # phi(r) is only needed on the support; capping the argument avoids overflow far out
    phi_r = np.asarray(yz_phi(np.minimum(grid.r, 700.0), n))
    G = H = 0.0
    m = grid.m
    headroom = 12

    def edge_index(t):
        return grid.index_of(R + float(A_k(t, k)) + 2.0 * cfg.dr)

    def source(t, uu):
        if not nonlinear:
            return np.zeros_like(uu)
        f = np.abs(uu) ** p
        if weight_exponent != 0.0:
            f *= t ** weight_exponent
        return f

    def rhs(t, ya, ma):
        uu = ya[:ma]
        vv = ya[ma:2 * ma]
        src = source(t, uu)
        out = np.empty_like(ya)
        out[:ma] = vv
        out[ma:2 * ma] = t ** (-2.0 * k) * grid.laplacian(uu) - (mu / t) * vv + src
        out[2 * ma] = t ** mu * grid.volume(src)
        out[2 * ma + 1] = t ** (-mu) * ya[2 * ma]
        return out

    trace = FunctionalTrace()

    def record(t, dt):
        ma = min(m, edge_index(t) + headroom)
        uu = U[:ma]
        trace.times.append(t)
        trace.U0.append(grid.volume(uu))
        trace.dU0.append(grid.volume(V[:ma]))
        trace.U1.append(rho(t, k, mu) * grid.volume(uu * phi_r[:ma]))
        su = float(np.max(np.abs(uu)))
        trace.sup_norm.append(su)
        trace.dt.append(dt)
        trace.F.append(grid.volume(source(t, uu)))
        trace.G.append(G)
        trace.H.append(H)
        nz = np.nonzero(np.abs(uu) > 1e-12 * su)[0] if su > 0 else []
        trace.support.append(float(grid.r[nz[-1]]) if len(nz) else 0.0)
        trace.min_u.append(float(uu.min()))
        trace.u_center.append(float(uu[0]))
        if wp is not None and (len(trace.times) - 1) % cfg.calU_every == 0:
            xi = xi_diag(t, grid.r[:ma], k, n, wp)
            trace.calU.append(t ** (0.5 * (mu - k)) * grid.volume(uu * xi))
        else:
            trace.calU.append(math.nan)

    t = 1.0
    record(t, 0.0)
    dt = min(cfg.cfl * cfg.dr, 1e-3)
    last_rec = t
    steps = rejected = 0
    max_leak = 0.0
    pos_viol = 0
    err_prev = 1.0
    blew = False
    trigger = "t_max"
    lo = hi = None
    stable_t = t
    threshold = cfg.blowup_factor * sup0
    sup_now = sup0
    k1 = None
    ma_prev = -1
    while t < cfg.t_max:
        if steps + rejected >= cfg.max_steps:
            trigger = "max_steps"
            break
        cap = cfg.cfl * cfg.dr * t ** k
        dt = min(dt, cap, cfg.t_max - t)
        if dt < cfg.dt_collapse * t:
            if sup_now > threshold:
                blew, trigger = True, "blowup"
                lo, hi = stable_t, t
                break
            raise SolverError(f"time step collapsed at t={t} without sup-norm growth")
        ma = min(m, edge_index(t + dt) + headroom) if cfg.project_support else m
        ya = np.concatenate([U[:ma], V[:ma], [G, H]])
        if k1 is None or ma != ma_prev:
            k1 = rhs(t, ya, ma)
        ks = [k1]
        for i in range(1, 7):
            yi = ya + dt * sum(a * kk for a, kk in zip(_A[i], ks) if a != 0.0)
            ks.append(rhs(t + _C[i] * dt, yi, ma))
        y_new = yi  # first-same-as-last: the last stage input is the 5th-order solution
        err_vec = dt * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            sc = atol + cfg.rtol * np.maximum(np.abs(ya[:2 * ma]), np.abs(y_new[:2 * ma]))
            err = float(np.sqrt(np.mean((err_vec[:2 * ma] / sc) ** 2)))
        ma_prev = ma
        if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
            rejected += 1
            dt *= 0.25
            continue
        if err > 1.0:
            rejected += 1
            dt *= max(0.2, 0.9 * err ** -0.2)
            continue
        steps += 1
        t = t + dt
        U[:ma] = y_new[:ma]
        V[:ma] = y_new[ma:2 * ma]
        G, H = float(y_new[2 * ma]), float(y_new[2 * ma + 1])
        k1 = ks[6]
        sup_now = float(np.max(np.abs(U[:ma])))
        if cfg.project_support:
            e = edge_index(t)
            if e < ma:
                leak = float(np.max(np.abs(U[e:ma]))) / sup_now
                max_leak = max(max_leak, leak)
                if leak > cfg.leak_tol:
                    raise SolverError(f"support leak {leak:.3e} beyond r={grid.r[e]:.4f} at t={t:.6f}")
                if np.any(U[e:ma]) or np.any(V[e:ma]):
                    # return the clipped mass to the last cell inside the cone so U0 and U0' are kept
                    U[e - 1] += grid.volume_tail(U, e, ma) / grid.w[e - 1]
                    V[e - 1] += grid.volume_tail(V, e, ma) / grid.w[e - 1]
                    U[e:ma] = 0.0
                    V[e:ma] = 0.0
                    k1 = None
        if sup_now <= threshold:
            stable_t = t
        if U[:ma].min() < -1e-10 * sup_now:
            pos_viol += 1
        if t - last_rec >= cfg.record_dt or t >= cfg.t_max:
            record(t, dt)
            last_rec = t
        fac = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5) if err > 0 else 5.0
        err_prev = max(err, 1e-4)
        dt *= min(5.0, max(0.2, fac))
    if trace.times[-1] != t:
        record(t, dt)
    trace.final = RadialField(t=t, u=U.copy(), ut=V.copy())
    trace.r = grid.r
    report = BlowupReport(
        params=params.as_dict(),
        blew_up=blew,
        lifespan_lo=lo,
        lifespan_hi=hi,
        trigger=trigger,
        grid={"n": n, "dr": cfg.dr, "r_max": float(grid.r[-1]), "points": m},
        steps=steps,
        rejected=rejected,
        max_leak=max_leak,
        positivity_violations=pos_viol,
    )
    return trace, report


def _pre_blowup_mask(a: dict, sup_cap: float) -> np.ndarray:
    return a["sup_norm"] <= sup_cap * a["sup_norm"][0]


def u0_identity_residual(trace: FunctionalTrace, mu: float, sup_cap: float = 1e4) -> float:
    """Largest relative defect of the mass identity along the trace.

    Compares ``U0(t)`` with
    ``U0(1) + U0'(1) int_1^t tau^-mu dtau + int_1^t tau^-mu int_1^tau s^mu F ds dtau``
    on records whose sup-norm is at most ``sup_cap`` times the initial one.
    """
    a = trace.arrays()
    sel = _pre_blowup_mask(a, sup_cap)
    t = a["times"][sel]
    if abs(mu - 1.0) < 1e-14:
        I = np.log(t)
    else:
        I = (t ** (1.0 - mu) - 1.0) / (1.0 - mu)
    lin = a["U0"][0] + a["dU0"][0] * I
    rhs_ = lin + a["H"][sel]
    scale = np.maximum.reduce([np.abs(a["U0"][sel]), np.abs(lin), np.abs(a["H"][sel])])
    return float(np.max(np.abs(a["U0"][sel] - rhs_) / scale))


def functional_lower_bound_checks(trace: FunctionalTrace, params: ModelParams, T1: float = 1.0) -> dict:
    """Ratios of the recorded functionals to their lower-bound profiles.

    Each ratio is calibrated as its minimum along the trace; a check passes
    when that constant is positive and finite. ``a0`` and ``b0`` are the
    exponents of the first iteration step.
    """
    a = trace.arrays()
    n, k, mu, p, eps = params.n, params.k, params.mu, params.p, params.eps
    t = a["times"]
    a0 = ((1.0 - k) * (n - 1) / 2.0 + mu / 2.0) * p + mu
    b0 = mu + (1.0 - k) * (n - 1) + k * p / 2.0 + 2.0
    out: dict = {"a0": a0, "b0": b0, "T1": T1}
    r0 = a["U0"] / eps
    r1 = a["U1"] / (eps * t ** k)
    later = t > T1
    r2 = a["U0"][later] * t[later] ** a0 * (t[later] - T1) ** (-b0) * eps ** (-p)
    checks = {"U0_over_eps": r0, "U1_over_eps_tk": r1, "U0_iterated": r2}
    cu = a["calU"][np.isfinite(a["calU"])]
    if cu.size:
        checks["calU_over_eps"] = cu / eps
    for name, r in checks.items():
        out[name] = {
            "constant": float(r.min()) if r.size else math.nan,
            "violations": int(np.sum(~(r > 0))),
        }
    out["U1_positive"] = bool(np.all(a["U1"] > 0))
    out["passed"] = all(v["violations"] == 0 and v["constant"] > 0 for v in out.values() if isinstance(v, dict))
    return out


def data_functional(u0: Profile, u1: Profile, k: float, mu: float, n: int, R: float) -> DataFunctional:
    """Weighted integral of the data against the time-1 adjoint factors.

    ``omega_{n-1} int_0^R (K_g(phi_k(1)) u1 + K_{g+1}(phi_k(1)) u0) phi(r) r^{n-1} dr``
    with ``g = (mu-1)/(2(1-k))``.
    """
    g = (mu - 1.0) / (2.0 * (1.0 - k))
    z = float(phi_k(1.0, k))
    c1, c0 = bessel_K(g, z), bessel_K(g + 1.0, z)

    def f(r):
        return (c1 * float(u1(r)) + c0 * float(u0(r))) * float(yz_phi(r, n)) * r ** (n - 1)

    val, _ = integrate.quad(f, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=200)
    return DataFunctional(value=sphere_area(n) * val)


def flat_data_ode(params: ModelParams, c0: float, c1: float, t_eval, weight_exponent: float = 0.0,
                  rtol: float = 1e-12):
    """Spatially constant solution: ``U'' + mu U'/t = t^w |U|^p``, ``U(1) = eps c0``, ``U'(1) = eps c1``."""
    mu, p = params.mu, params.p

    def f(t, y):
        return [y[1], t ** weight_exponent * abs(y[0]) ** p - mu / t * y[1]]

    t_eval = np.asarray(t_eval, dtype=float)
    sol = integrate.solve_ivp(f, (1.0, float(t_eval.max())), [params.eps * c0, params.eps * c1],
                              method="DOP853", t_eval=t_eval, rtol=rtol, atol=1e-30)
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return sol.y[0]


def trace_to_csv(trace: FunctionalTrace) -> str:
    """CSV body with header ``t,U0,U1,calU,sup_norm,dt``; floats in round-trip form."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "U0", "U1", "calU", "sup_norm", "dt"])
    a = trace.arrays()
    for row in zip(a["times"], a["U0"], a["U1"], a["calU"], a["sup_norm"], a["dt"]):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


@dataclass
class SweepResult:
    eps: list
    lifespan_lo: list
    lifespan_hi: list
    blew_up: list
    form: str
    predicted_exponent: float
    slope: float
    intercept: float
    residual_rms: float
    used: int

    def as_dict(self) -> dict:
        return asdict(self)


def _sweep_one(args):
    params, data, config, weight_exponent = args
    _, rep = evolve(params, data, config, weight_exponent=weight_exponent)
    return rep.blew_up, rep.lifespan_lo, rep.lifespan_hi


def check_eps_span(eps_list: Sequence[float], count: int = 5, decades: float = 1.0) -> None:
    """Require at least ``count`` values spanning at least ``decades`` decades."""
    if len(eps_list) < count:
        raise ValueError(f"a lifespan sweep needs at least {count} eps values, got {len(eps_list)}")
    if math.log10(max(eps_list) / min(eps_list)) < decades - 1e-12:
        raise ValueError(f"eps values must span at least {decades:g} decade(s)")


def default_workers() -> int:
    env = os.environ.get("EDSLAB_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def lifespan_sweep(template: ModelParams, eps_list: Sequence[float], config: SolverConfig,
                   data: tuple[Profile, Profile] | None = None, workers: int | None = None,
                   weight_exponent: float = 0.0) -> SweepResult:
    """Measure lifespans over ``eps_list`` and fit the scaling exponent.

    The fit is a least-squares line through ``(log eps, log T)`` for
    power-law regimes and ``(log eps, log log T)`` for the exponential
    ones, using the upper end of each blow-up bracket. Runs that reach
    ``t_max`` are reported but excluded from the fit.
    """
    eps_list = [float(e) for e in eps_list]
    check_eps_span(eps_list)
    bound = lifespan_bound(template)
    jobs = [(template.with_(eps=e), data, config, weight_exponent) for e in eps_list]
    workers = workers or default_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(_sweep_one, jobs))
    else:
        res = [_sweep_one(j) for j in jobs]
    blew = [r[0] for r in res]
    lo = [r[1] for r in res]
    hi = [r[2] for r in res]
    x = np.log([e for e, b in zip(eps_list, blew) if b])
    T = np.array([h for h, b in zip(hi, blew) if b], dtype=float)
    if bound.form is BoundForm.POWER_LAW:
        yv = np.log(T)
    else:
        yv = np.log(np.log(T))
    if x.size >= 2:
        coef, *_ = np.linalg.lstsq(np.vstack([x, np.ones_like(x)]).T, yv, rcond=None)
        slope, icpt = float(coef[0]), float(coef[1])
        resid = float(np.sqrt(np.mean((yv - (slope * x + icpt)) ** 2)))
    else:
        slope = icpt = resid = math.nan
    return SweepResult(eps=eps_list, lifespan_lo=lo, lifespan_hi=hi, blew_up=blew, form=bound.form.value,
                       predicted_exponent=bound.exponent, slope=slope, intercept=icpt,
                       residual_rms=resid, used=int(x.size))
