import math

import numpy as np
import pytest

from edslab import kernels, model, solver
from edslab.model import ModelParams
from edslab.solver import SolverConfig, bump, evolve

REF = ModelParams(1, 0.0, 0.0, 2.0, eps=0.1)


@pytest.fixture(scope="module")
def reference_runs():
    out = {}
    for dr in (0.02, 0.01):
        out[dr] = evolve(REF, config=SolverConfig(dr=dr, t_max=60.0, record_dt=0.1))
    return out


def test_reference_blowup_bracket(reference_runs):
    tr, rep = reference_runs[0.02]
    assert rep.blew_up and rep.trigger == "blowup"
    assert 1.0 < rep.lifespan_lo < rep.lifespan_hi < 60.0
    assert (rep.lifespan_hi - rep.lifespan_lo) / rep.lifespan_hi < 1e-2
    assert rep.positivity_violations == 0
    assert np.all(tr.arrays()["min_u"] >= -1e-10 * tr.arrays()["sup_norm"])


def test_reference_grid_convergence(reference_runs):
    mids = [0.5 * (r.lifespan_lo + r.lifespan_hi) for _, r in reference_runs.values()]
    assert abs(mids[0] - mids[1]) / mids[1] < 0.05


def test_reference_functionals(reference_runs):
    tr, _ = reference_runs[0.02]
    a = tr.arrays()
    assert solver.u0_identity_residual(tr, REF.mu) < 1e-3
    limit = REF.R + kernels.A_k(a["times"], REF.k) + 3 * 0.02
    assert np.all(a["support"] <= limit + 1e-12)
    assert np.all(np.isfinite(a["U1"])) and np.all(a["U1"] > 0)
    chk = solver.functional_lower_bound_checks(tr, REF)
    for name in ("U0_over_eps", "U1_over_eps_tk", "U0_iterated"):
        assert chk[name]["violations"] == 0 and chk[name]["constant"] > 0


def test_linear_run_identity():
    P = ModelParams(2, 1 / 3, 1.5, 2.0, eps=0.5)
    tr, rep = evolve(P, config=SolverConfig(t_max=8.0, record_dt=0.1), nonlinear=False)
    a = tr.arrays()
    assert not rep.blew_up
    assert np.all(a["H"] == 0.0)
    assert solver.u0_identity_residual(tr, P.mu) < 1e-4
    assert a["sup_norm"].max() <= 10 * a["sup_norm"][0]


def test_flat_data_ode_reduction():
    P = ModelParams(1, 0.0, 0.0, 2.0, R=20.0, eps=0.1)
    prof = solver.flat_top(20.0, 2.0)
    tr, _ = evolve(P, data=(prof, prof), config=SolverConfig(dr=0.05, t_max=12.0, record_dt=0.1))
    a = tr.arrays()
    sel = (kernels.A_k(a["times"], P.k) < 17.0) & (a["sup_norm"] < 1e3)
    ode = solver.flat_data_ode(P, 1.0, 1.0, a["times"][sel])
    assert np.max(np.abs(a["u_center"][sel] / ode - 1)) < 1e-3


def test_weighted_functional_positive():
    P = ModelParams(3, 1 / 3, 1.0, 1.5, eps=0.3)
    tr, _ = evolve(P, config=SolverConfig(t_max=4.0, record_dt=0.25, calU_every=1))
    cu = tr.arrays()["calU"]
    assert np.all(np.isfinite(cu)) and np.all(cu > 0)
    chk = solver.functional_lower_bound_checks(tr, P)
    assert chk["calU_over_eps"]["violations"] == 0


def test_transformed_problem_matches():
    # v = t^(mu-1) u turns damping 0 into damping 2 with the weight t^(p-1)
    P = ModelParams(1, 0.0, 0.0, 2.0, eps=0.3)
    cfg = SolverConfig(t_max=5.0, record_dt=0.5)
    tr_u, _ = evolve(P, config=cfg)
    new, w, dm = model.dissipative_transform(P)
    tr_v, _ = evolve(new, config=cfg, weight_exponent=w, data_map=dm)
    a, b = tr_u.arrays(), tr_v.arrays()
    ref = np.interp(b["times"], a["times"], a["U0"] / a["times"])
    assert np.allclose(b["U0"], ref, rtol=1e-3)


def test_scaled_data_invariance():
    cfg = SolverConfig(t_max=4.0, record_dt=0.5)
    P = ModelParams(1, 0.0, 0.0, 2.0, eps=0.2)
    a, _ = evolve(P, config=cfg)
    b, _ = evolve(P.with_(eps=0.1), data=(bump(amp=2.0), bump(amp=2.0)), config=cfg)
    assert np.allclose(a.arrays()["U0"], b.arrays()["U0"], rtol=1e-12)


def test_smaller_power_blows_up_earlier_for_small_data():
    cfg = SolverConfig(t_max=60.0, record_dt=0.5)
    T = [evolve(REF.with_(p=p), config=cfg)[1].lifespan_hi for p in (2.0, 1.5)]
    assert T[1] < T[0]


def test_data_functional():
    zero = solver.data_functional(lambda r: 0 * r, lambda r: 0 * r, 0.5, 1.0, 3, 1.0)
    assert zero.value == 0.0
    one = solver.data_functional(bump(), bump(), 0.5, 1.0, 3, 1.0)
    two = solver.data_functional(bump(amp=2.0), bump(amp=2.0), 0.5, 1.0, 3, 1.0)
    assert one.value > 0
    assert two.value == pytest.approx(2 * one.value, rel=1e-12)


def test_solver_errors():
    with pytest.raises(ValueError):
        evolve(REF, data=(bump(R=2.0), bump(R=2.0)), config=SolverConfig(t_max=2.0))
    with pytest.raises(solver.SolverError):
        evolve(REF, config=SolverConfig(t_max=3.0, leak_tol=1e-300))
    with pytest.raises(ValueError):
        SolverConfig(cfl=1.5)


def test_trace_csv_and_report():
    tr, rep = evolve(REF, config=SolverConfig(t_max=2.0, record_dt=0.5))
    text = solver.trace_to_csv(tr)
    assert text.splitlines()[0] == "t,U0,U1,calU,sup_norm,dt"
    assert len(text.splitlines()) == tr.arrays()["times"].size + 1
    assert '"lifespan_lo"' in rep.to_json() and '"grid"' in rep.to_json()


def test_sweep_preconditions_and_fit():
    with pytest.raises(ValueError):
        solver.check_eps_span([0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(ValueError):
        solver.check_eps_span([0.1, 1.0])
    res = solver.lifespan_sweep(REF, list(np.geomspace(0.4, 4.0, 5)), SolverConfig(t_max=30.0, record_dt=0.5),
                                workers=1)
    assert all(res.blew_up) and res.used == 5
    assert np.all(np.diff(res.lifespan_hi) < 0)
    assert res.slope < 0 and math.isfinite(res.residual_rms)
