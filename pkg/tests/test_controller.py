import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavestab.controller import (
    ControlInputs,
    control_antistable,
    control_law,
    control_unstable,
    kernel_weights,
    self_feedback,
    total_disturbance,
)
from wavestab.core import ConstantDisturbance, Grid, Params, ScalarField, TraceGain, Variant, WavePair
from wavestab.errors import MissingZ, VariantMismatch

PU = Params(Variant.UNSTABLE_SPRING, 1.0, 0.5, 1.0, 1.0, 1.0)
PA = Params(Variant.ANTISTABLE_DAMPER, 0.5, 0.75, 1.0, 0.75, 1.0)


def inputs(g, what, what_t, **kw):
    return ControlInputs(ScalarField(g, what), ScalarField(g, what_t), **kw)


def test_kernel_weights_integrate_the_exponential():
    w = kernel_weights(400, 1.3)
    assert w.sum() == pytest.approx((math.exp(1.3) - 1) / 1.3, rel=1e-5)


def test_unstable_law_on_constant_observer():
    # what = 1, what_t = 0: u = zx1 + Yx1 - k - k q int exp(q(1-xi)) = zx1 + Yx1 - k e^q
    g = Grid(400)
    inp = inputs(g, np.ones(401), np.zeros(401), zx1=0.3, Yx1=-0.1)
    k = PU.c2 + PU.q
    assert control_unstable(inp, PU) == pytest.approx(0.2 - k * math.e, rel=1e-5)


def test_antistable_law():
    g = Grid(10)
    inp = inputs(g, np.full(11, 2.0), np.zeros(11), zx1=0.5, Yx1=0.25, Z1=1.0, Zx1=-1.0)
    assert control_antistable(inp, PA) == pytest.approx(-2.0 - 1.0 + 0.5 + 0.25 + 1.0)
    with pytest.raises(MissingZ):
        control_antistable(inputs(g, np.zeros(11), np.zeros(11)), PA)


def test_variant_guards():
    g = Grid(10)
    inp = inputs(g, np.zeros(11), np.zeros(11), Z1=0.0, Zx1=0.0)
    with pytest.raises(VariantMismatch):
        control_unstable(inp, PA)
    with pytest.raises(VariantMismatch):
        control_antistable(inp, PU)
    assert control_law(inp, PU) == 0.0
    assert control_law(inp, PA) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 80), st.integers(0, 2**31), st.floats(-2, 2), st.floats(-2, 2))
def test_self_feedback_is_the_slope_in_the_last_node(n, seed, dw, dv):
    g = Grid(n)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(n + 1), rng.standard_normal(n + 1)
    for p in (PU, PA):
        base = inputs(g, a, b, Z1=0.1, Zx1=0.2)
        a2, b2 = a.copy(), b.copy()
        a2[-1] += dw
        b2[-1] += dv
        moved = inputs(g, a2, b2, Z1=0.1, Zx1=0.2)
        kd, kv = self_feedback(p, n)
        assert control_law(moved, p) - control_law(base, p) == pytest.approx(-kd * dw - kv * dv, abs=1e-9)


def test_total_disturbance_sums_both_parts():
    g = Grid(10)
    w = WavePair.from_arrays(g, np.full(11, 3.0), np.zeros(11))
    assert total_disturbance(w, TraceGain(0.5), ConstantDisturbance(1.0), 2.0) == pytest.approx(2.5)
