import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edslab import iterlab, model
from edslab.model import ModelParams
from edslab.solver import SolverConfig, evolve

SUB = ModelParams(3, 1 / 3, 1.0, 1.5, eps=0.1)
P1CASE = ModelParams(3, 2 / 3, 2.0, model.p1(2 / 3, 3), eps=0.1)
P0CASE = ModelParams(3, 0.5, 1.5, model.p0(0.5, model.shifted_dimension(3, 0.5, 1.5)), eps=0.5)


def test_closed_forms_match_recursion():
    seq = iterlab.subcritical_sequences(SUB, j_max=30)
    assert seq.branch == "theta"
    assert seq.closed_form_residual() <= 1e-12


def test_seed_is_reproduced():
    seq = iterlab.subcritical_sequences(SUB, j_max=5)
    assert (seq.a_rec[0], seq.b_rec[0]) == (seq.a0, seq.b0)
    assert seq.log_D0 == pytest.approx(SUB.p * math.log(SUB.eps))


def test_fujita_branch_closed_form():
    seq = iterlab.subcritical_sequences(SUB, j_max=20, branch="fujita")
    p = SUB.p
    j = np.arange(21)
    assert np.allclose(seq.a_rec, seq.alpha * (p ** j - 1) / (p - 1), rtol=1e-12)
    assert np.allclose(seq.b_rec, seq.beta * (p ** j - 1) / (p - 1), rtol=1e-12)
    assert seq.alpha == pytest.approx((1 - SUB.k) * SUB.n * (p - 1) + SUB.mu)
    assert seq.beta == 2 + SUB.mu


def test_log_space_survives_large_j():
    seq = iterlab.subcritical_sequences(SUB, j_max=60)
    assert np.all(np.isfinite(seq.log_D))
    assert np.all(seq.log_D_lower_bound_holds())


def test_summation_examples():
    assert math.fsum((5 - i) * 2 ** i for i in range(5)) == 57
    assert ((2 ** 6 - 2) / 1 - 5) / 1 == 57
    assert iterlab.summation_identities_check(2.0, 5)
    assert iterlab.summation_identities_check(1.5, 12)
    with pytest.raises(ValueError):
        iterlab.summation_identities_check(1.0, 3)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.01, 5.0), st.integers(1, 40))
def test_summation_identities_property(p, j):
    assert iterlab.summation_identities_check(p, j)


def test_exponent_identity_grid():
    worst = 0.0
    for n in (1, 2, 3, 5):
        for k in (0.0, 1 / 3, 0.7):
            for mu in (0.0, 1.0, 2.5):
                nn = model.shifted_dimension(n, k, mu)
                pc = model.p0(k, nn)
                for p in (1.1, 1.3, min(1.5, 0.5 * (1 + pc)) if math.isfinite(pc) else 1.5):
                    if p < pc:
                        worst = max(worst, iterlab.exponent_identity_residual(ModelParams(n, k, mu, p)))
    assert worst <= 1e-12


def test_threshold_scaling_and_witness():
    thr = iterlab.subcritical_threshold(SUB)
    th = model.theta(SUB.n, SUB.k, SUB.mu, SUB.p)
    assert thr.kappa == pytest.approx(th / (SUB.p - 1), rel=1e-12)
    assert thr.eps_exponent == pytest.approx(-SUB.p * (SUB.p - 1) / th, rel=1e-12)
    # eps^{-p(p-1)/theta} doubled doubles t*
    e2 = SUB.eps * 2.0 ** (1.0 / thr.eps_exponent)
    assert thr.t_star(e2) == pytest.approx(2 * thr.t_star(), rel=1e-12)
    up = iterlab.divergence_witness(thr, 2.0)
    down = iterlab.divergence_witness(thr, 0.25)
    assert up["increasing"] and up["log_argument"] > 0
    assert down["decreasing"] and down["log_argument"] < 0


def test_threshold_rejects_nonpositive_theta():
    P = ModelParams(3, 1 / 3, 1.0, 1.5)
    seq = iterlab.subcritical_sequences(P, j_max=4)
    bad = iterlab.SubcriticalIteration(**{**seq.__dict__, "a0": 1e3})
    with pytest.raises(ValueError):
        iterlab.subcritical_threshold(P, bad)
    with pytest.raises(model.SupercriticalError):
        iterlab.subcritical_sequences(ModelParams(3, 0.0, 0.0, 5.0))


def test_slicing_sequences():
    it = iterlab.slicing_p1(ModelParams(1, 0.0, 2.0, 3.0, eps=0.2), j_max=40)
    exact = [(3 ** (j + 1) - 1) // 2 for j in range(41)]
    assert all(abs(float(s) - e) <= 4 * np.finfo(float).eps * e for s, e in zip(it.sigma_rec, exact))
    assert it.ell[0] == 1.5 and np.all(np.diff(it.ell) >= 0) and np.all(it.ell < 2)
    assert np.all(it.gap_holds())


def test_slicing_threshold_and_bounds():
    it = iterlab.slicing_p1(P1CASE, j_max=60)
    lt = it.log_threshold()
    assert abs(float(it.log_H(lt))) <= 1e-12
    assert float(it.log_H(lt * (1 + 1e-9))) > 0
    assert np.all(it.log_K_bound_holds())
    assert it.L == pytest.approx(2 ** (-2 * (P1CASE.mu + 1)) * it.C / (P1CASE.mu + 1) * (P1CASE.p - 1) / P1CASE.p)
    later = iterlab.slicing_divergence_log_log_time(iterlab.slicing_p1(P1CASE.with_(eps=0.05)))
    assert later > iterlab.slicing_divergence_log_log_time(it)


def test_slicing_rejects_bad_input():
    with pytest.raises(ValueError):
        iterlab.slicing_p1(ModelParams(3, 2 / 3, 2.0, 2.5))
    with pytest.raises(ValueError):
        iterlab.slicing_p1(ModelParams(3, 2 / 3, 0.1, model.p1(2 / 3, 3)))


def test_critical_identity():
    for n, k, mu in ((3, 0.5, 1.5), (2, 1 / 3, 2.0), (4, 0.2, 0.1)):
        assert iterlab.critical_identity_residual(n, k, mu) <= 1e-12


@pytest.fixture(scope="module")
def p0_constants():
    return iterlab.calibrate_critical_constants(P0CASE)


def test_seed_ratio_bounded(p0_constants):
    c = p0_constants
    assert c.C > 0 and c.M > 0 and c.B1 > 0 and c.admissible
    tt = np.linspace(2.0, 100.0, 25)
    ratio = iterlab.seed_first_iterate(P0CASE, tt, c.B1, c.K) / (P0CASE.eps ** P0CASE.p * np.log(2 * tt / 3))
    assert ratio.min() > 0 and ratio.max() < np.inf


def test_frame_iterates_dominate(p0_constants):
    st0 = iterlab.critical_p0_frame_iteration(P0CASE, p0_constants)
    assert all(st0.dominates) and math.isfinite(st0.log_T_env)
    assert st0.q > (P0CASE.n - 3) / 2
    st1 = iterlab.critical_p0_frame_iteration(P0CASE.with_(eps=0.6), p0_constants)
    assert st1.log_T_env < st0.log_T_env


def test_frame_operator_is_monotone(p0_constants):
    tau = np.linspace(math.log(1.5), 5.0, 400)
    lo = np.log(1 + tau)
    a = iterlab.frame_operator(P0CASE, p0_constants.C, tau, lo, math.log(1.5))
    b = iterlab.frame_operator(P0CASE, p0_constants.C, tau, lo + 0.1, math.log(1.5))
    fin = np.isfinite(a)
    assert np.all(b[fin] >= a[fin])


@pytest.fixture(scope="module")
def sub_trace():
    P = ModelParams(1, 0.0, 0.0, 2.0, eps=0.3)
    tr, _ = evolve(P, config=SolverConfig(t_max=12.0, record_dt=0.1))
    return P, tr


def test_envelope_matches_simulation(sub_trace):
    P, tr = sub_trace
    rep = iterlab.envelope_vs_simulation(P, tr, j_max=20)
    assert rep.passed and rep.checked > 0 and rep.functional == "U0"
    assert set(rep.overlay) == {"t", "log_measured", "log_bound"}


def test_envelope_detects_inflated_constant(sub_trace):
    P, tr = sub_trace
    rep = iterlab.envelope_vs_simulation(P, tr, j_max=20, C_scale=1e6)
    assert not rep.passed
    j, t, excess = rep.violations[0]
    assert j >= 1 and excess > 0


def test_iteration_report_schema():
    for P in (SUB, P1CASE):
        rep = iterlab.iteration_report(P, j_max=30)
        assert {"params", "sequences", "thresholds", "identity_residuals", "violations"} <= set(rep)
        assert rep["violations"] == []
        text = iterlab.report_json(rep)
        assert json.loads(text) == json.loads(iterlab.report_json(json.loads(text)))
        assert text == iterlab.report_json(iterlab.iteration_report(P, j_max=30))
