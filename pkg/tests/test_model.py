import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from edslab import model
from edslab.model import BoundForm, Dominance, ModelParams, Regime, SupercriticalError

K_GRID = (0.0, 0.2, 0.5, 2 / 3, 0.9)
N_GRID = (1, 2, 3, 4, 5, 6)


def test_params_validation():
    for bad in ({"n": 0}, {"k": 1.0}, {"k": -0.1}, {"mu": -1.0}, {"p": 1.0}, {"R": 0.0}, {"eps": 0.0}, {"n": 1.5}):
        kw = {"n": 3, "k": 0.0, "mu": 0.0, "p": 2.0}
        kw.update(bad)
        with pytest.raises(ValueError):
            ModelParams(**kw)


def test_p0_examples():
    assert model.p0(0.0, 3.0) == pytest.approx(1 + math.sqrt(2), rel=1e-14)
    assert model.p0(0.5, 1.0) == math.inf
    assert model.p0(2 / 3, 9.0) == pytest.approx((4 + math.sqrt(19)) / 3, rel=1e-14)
    with pytest.raises(ValueError):
        model.p0(1.0, 3.0)


def test_p1_examples():
    assert model.p1(0.0, 2) == 2.0
    assert model.p1(2 / 3, 3) == pytest.approx(3.0, rel=1e-15)
    assert model.p1(0.5, 4) == model.p1(0.0, 2.0) == 2.0


def test_mu0_examples():
    assert model.mu0(0.0, 3) == pytest.approx(2.8, rel=1e-15)
    assert model.mu0(2 / 3, 3) == pytest.approx(16 / 9, rel=1e-14)
    m0 = model.mu0(0.0, 3)
    assert model.p0(0.0, model.shifted_dimension(3, 0.0, m0)) == pytest.approx(model.p1(0.0, 3), rel=1e-12)


def test_theta_examples():
    pc = model.p0(0.0, model.shifted_dimension(3, 0.0, 2.0))
    assert abs(model.theta(3, 0.0, 2.0, pc)) < 1e-9
    assert model.theta(1, 0.0, 0.0, 2.0) == pytest.approx(3.0)
    pc = model.p0(1 / 3, model.shifted_dimension(3, 1 / 3, 1.0))
    assert model.theta(3, 1 / 3, 1.0, 0.99 * pc) > 0


def test_classify_examples():
    r = model.classify(ModelParams(3, 2 / 3, 2.0, 2.0))
    assert r.dominant is Dominance.P1 and r.p1 == pytest.approx(3.0)
    r = model.classify(ModelParams(3, 0.0, 0.0, 2.0))
    assert r.dominant is Dominance.P0 and r.p0_shifted == pytest.approx(1 + math.sqrt(2))
    r = model.classify(ModelParams(3, 0.0, model.mu0(0.0, 3), 2.0))
    assert r.dominant is Dominance.TIE
    assert model.classify(ModelParams(3, 0.0, 0.0, 3.0)).theta is None


def test_lifespan_bound_examples():
    b = model.lifespan_bound(ModelParams(1, 0.0, 0.0, 2.0))
    assert b.form is BoundForm.POWER_LAW and b.exponent == pytest.approx(-1.0)
    b = model.lifespan_bound(ModelParams(3, 2 / 3, 2.0, 3.0))
    assert b.form is BoundForm.EXP_POWER_LAW and b.regime is Regime.CRITICAL_P1 and b.exponent == pytest.approx(-2.0)
    p = 1 + math.sqrt(2)
    b = model.lifespan_bound(ModelParams(3, 0.0, 0.0, p))
    assert b.regime is Regime.CRITICAL_P0 and b.exponent == pytest.approx(-p * (p - 1))
    b = model.lifespan_bound(ModelParams(3, 0.0, 0.0, 2.0))
    assert b.regime is Regime.SUBCRITICAL_P0
    assert b.exponent == pytest.approx(-2.0 / model.theta(3, 0.0, 0.0, 2.0))
    with pytest.raises(SupercriticalError):
        model.lifespan_bound(ModelParams(3, 0.0, 0.0, 3.0))


def test_dissipative_transform_examples():
    P = ModelParams(3, 0.0, 0.0, 2.5)
    new, w, dm = model.dissipative_transform(P)
    assert new.mu == 2.0 and w == pytest.approx(1.5)
    v0, v1 = dm([1.0, 2.0], [0.5, 0.5])
    assert list(v0) == [1.0, 2.0] and list(v1) == [-0.5, -1.5]
    new, w, _ = model.dissipative_transform(P.with_(mu=1.0))
    assert new.mu == 1.0 and w == 0.0
    new, w, _ = model.dissipative_transform(P.with_(mu=2.0))
    assert new.mu == 0.0 and w == pytest.approx(-1.5)
    with pytest.raises(ValueError):
        model.dissipative_transform(P.with_(mu=2.5))


def test_grid_invariants():
    for k in K_GRID:
        for n in N_GRID:
            m0 = model.mu0(k, n)
            pt = model.p0(k, model.shifted_dimension(n, k, m0))
            assert abs(pt - model.p1(k, n)) <= 1e-10 * model.p1(k, n)
            for mu in (0.0, 0.5, 1.0, 2.0, 3.5):
                ne = model.shifted_dimension(n, k, mu)
                pc = model.p0(k, ne)
                if math.isfinite(pc):
                    assert abs(model.p0_quadratic(k, ne, pc)) < 1e-10 * max(1.0, pc * pc)


@given(st.floats(0.0, 2.0))
def test_transform_is_involution(mu):
    P = ModelParams(2, 0.3, mu, 2.0)
    once, _, _ = model.dissipative_transform(P)
    twice, _, _ = model.dissipative_transform(once)
    assert twice.mu == pytest.approx(mu, abs=1e-15)


@given(st.sampled_from(K_GRID), st.integers(1, 8))
def test_p1_decreasing(k, n):
    assert model.p1(k, n + 1) < model.p1(k, n)
    assert model.p1(k, n) > model.p1(0.0, n) or k == 0.0


@given(st.floats(0.0, 0.95), st.floats(1.0, 12.0), st.floats(1.01, 20.0))
def test_theta_sign_matches_root(k, n_eff, p):
    # theta is a negative multiple of the quadratic, so its sign flips at p0
    n = 1.0
    mu = (n_eff - n) * (1.0 - k)
    pc = model.p0(k, n_eff)
    th = model.theta(n, k, mu, p)
    scale = 1.0 + p * p * (1.0 + n_eff)
    if p < pc * (1 - 1e-9):
        assert th > -1e-12 * scale
    elif p > pc * (1 + 1e-9):
        assert th < 1e-12 * scale


@given(st.integers(1, 6), st.sampled_from(K_GRID), st.floats(0.0, 4.0), st.floats(1.01, 6.0))
def test_lifespan_bound_regimes(n, k, mu, p):
    P = ModelParams(n, k, mu, p)
    rep = model.classify(P)
    if p > rep.critical * (1 + 1e-9):
        with pytest.raises(SupercriticalError):
            model.lifespan_bound(P)
        return
    b = model.lifespan_bound(P)
    if b.form is BoundForm.POWER_LAW:
        assert b.exponent < 0 and math.isfinite(b.exponent)
    else:
        assert b.exponent in (pytest.approx(-(p - 1)), pytest.approx(-p * (p - 1)))
