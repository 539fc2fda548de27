import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavestab import analysis as A
from wavestab import kernels as K
from wavestab.core import (
    ConstantDisturbance,
    Grid,
    HarmonicSum,
    Params,
    ScalarField,
    TraceGain,
    TransportField,
    Variant,
    ZeroDisturbance,
)
from wavestab.errors import Incompatible, VariantMismatch
from wavestab.systems import (
    InitialData,
    VariantConfig,
    aux_Z_step,
    backstepping_forward,
    backstepping_inverse,
    check_compatibility,
    closed_loop_step,
    initial_state,
    zero_initial_data,
)

PU = Params(Variant.UNSTABLE_SPRING, 1.0, 0.5, 1.0, 1.0, 1.0)
PA = Params(Variant.ANTISTABLE_DAMPER, 0.5, 0.75, 1.0, 0.75, 1.0)


def cosine_data(g, p, amp=1.0):
    z = ScalarField.zeros(g)
    w0 = ScalarField(g, amp * np.cos(np.pi * g.nodes))
    anti = p.variant is Variant.ANTISTABLE_DAMPER
    return InitialData(w0, z, z, z, z, z, z, z, z, z, z if anti else None)


def smooth_field(g, rng):
    x = g.nodes
    k = np.arange(1, 5)
    a = rng.standard_normal(4)
    b = rng.standard_normal(4)
    v = (a[:, None] * np.sin(k[:, None] * x) + b[:, None] * np.cos(k[:, None] * x)).sum(0)
    return ScalarField(g, v / np.max(np.abs(v)))


# ---- compatibility ------------------------------------------------------------


def test_incompatible_data_rejected_with_residuals():
    g = Grid(20)
    init = cosine_data(g, PU)
    with pytest.raises(Incompatible) as e:
        check_compatibility(init, PU)
    assert any("z0(1)" in k for k in e.value.residuals)


@pytest.mark.parametrize("p", [PU, PA])
def test_auto_correct_zeroes_every_residual(p):
    g = Grid(20)
    rng = np.random.default_rng(1)
    fields = [smooth_field(g, rng) for _ in range(10)]
    init = InitialData(*fields, Z0=smooth_field(g, rng) if p.variant is Variant.ANTISTABLE_DAMPER else None)
    fixed = check_compatibility(init, p, auto_correct=True)
    check_compatibility(fixed, p, tol=1e-13)
    # the plant is never touched
    np.testing.assert_array_equal(fixed.w0.values, init.w0.values)
    np.testing.assert_array_equal(fixed.w1.values, init.w1.values)


def test_antistable_requires_Z():
    g = Grid(10)
    with pytest.raises(Incompatible):
        check_compatibility(zero_initial_data(g, Variant.UNSTABLE_SPRING), PA)
    with pytest.raises(VariantMismatch):
        aux_Z_step(TransportField.zeros(g), 0.0, VariantConfig(PU, K.StepSizes.default(g)))


# ---- backstepping ---------------------------------------------------------------


def test_backstepping_guards_variant():
    g = Grid(10)
    with pytest.raises(VariantMismatch):
        backstepping_forward(ScalarField.zeros(g), PA)


def test_forward_transform_of_exponential():
    # what = exp(-c2 x) maps to exp(-c2 x) + (c2+q) exp(qx) (1 - exp(-(q+c2)x))/(q+c2) = exp(qx)
    g = Grid(400)
    x = g.nodes
    p = Params(Variant.UNSTABLE_SPRING, 0.7, 0.5, 1.0, 1.3, 1.0)
    out = backstepping_forward(ScalarField(g, np.exp(-1.3 * x)), p)
    np.testing.assert_allclose(out.values, np.exp(0.7 * x), rtol=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.integers(0, 2**31))
def test_round_trip_second_order(q, c2, seed):
    errs = []
    for n in (100, 200):
        g = Grid(n)
        p = Params(Variant.UNSTABLE_SPRING, q, 0.5, 1.0, c2, 1.0)
        f = smooth_field(g, np.random.default_rng(seed))
        back = backstepping_inverse(backstepping_forward(f, p), p)
        errs.append(float(np.max(np.abs(back.values - f.values))))
    assert errs[0] <= 20 / 100**2
    assert errs[1] <= 20 / 200**2
    assert 3.5 <= errs[0] / errs[1] <= 4.5


# ---- closed loop ------------------------------------------------------------------


@pytest.mark.parametrize("p", [PU, PA])
@pytest.mark.parametrize("courant", [1.0, 0.5])
def test_coupling_identities_hold_every_step(p, courant):
    g = Grid(40)
    cfg = VariantConfig(p, K.StepSizes(courant * g.h, g), disturbance=ConstantDisturbance(0.5))
    s = initial_state(check_compatibility(cosine_data(g, p), p, auto_correct=True), cfg)
    for _ in range(200):
        s, tr = closed_loop_step(s, cfg)
        assert s.dirichlet_residual() < 1e-12
        assert abs(s.W.values[0] + p.c0 * (s.v.u.values[0] - s.w.u.values[0])) < 1e-12
        assert abs(s.Y.values[0] + p.c0 * (s.what.u.values[0] - s.w.u.values[0])) < 1e-12
        if s.Z is not None:
            assert abs(s.Z.values[0] + p.c2 * s.what.u.values[0]) < 1e-12
    assert s.step == 200
    assert s.t == pytest.approx(200 * cfg.sizes.dt)


@pytest.mark.parametrize(
    "p, dist, unc",
    [
        (PU, ConstantDisturbance(1.0), TraceGain(0.1)),
        (PA, HarmonicSum([(1.0, 0.0, 2.0)]), TraceGain(0.0)),
    ],
)
def test_estimation_error_equals_ztilde_system(p, dist, unc):
    # F - estimate = ztilde_x(1), where ztilde obeys a closed, homogeneous system
    g = Grid(50)
    cfg = VariantConfig(p, K.StepSizes.default(g), unc, dist)
    s = initial_state(check_compatibility(cosine_data(g, p), p, auto_correct=True), cfg)
    s, _ = closed_loop_step(s, cfg)
    direct = A.ztilde_direct(A.ztilde_from_state(s), p, cfg.sizes, 300)
    err = []
    for _ in range(300):
        s, tr = closed_loop_step(s, cfg)
        err.append(tr.F - tr.estimate)
    err = np.array(err)
    assert np.max(np.abs(err)) > 0.1
    np.testing.assert_allclose(err, direct.values, atol=1e-11)


def test_estimate_matches_constant_disturbance_eventually():
    g = Grid(50)
    cfg = VariantConfig(PU, K.StepSizes.default(g), disturbance=ConstantDisturbance(1.0))
    s = initial_state(check_compatibility(cosine_data(g, PU), PU, auto_correct=True), cfg)
    for _ in range(20 * 50):
        s, tr = closed_loop_step(s, cfg)
    assert tr.estimate == pytest.approx(1.0, abs=1e-4)


def test_zero_state_is_fixed():
    g = Grid(16)
    for p in (PU, PA):
        cfg = VariantConfig(p, K.StepSizes.default(g), disturbance=ZeroDisturbance())
        s = initial_state(zero_initial_data(g, p.variant), cfg)
        for _ in range(100):
            s, tr = closed_loop_step(s, cfg)
            assert tr.u == 0.0 and tr.estimate == 0.0
        assert not np.any(s.w.u.values) and not np.any(s.what.u.values)
