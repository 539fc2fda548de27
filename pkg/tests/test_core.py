import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavestab.core import (
    BoundedNoise,
    ConstantDisturbance,
    EnergySaturation,
    Grid,
    HarmonicSum,
    L2Decaying,
    MeanSine,
    Params,
    ScalarField,
    TraceGain,
    TransportField,
    Variant,
    WavePair,
    ZeroDisturbance,
    amplitude_bound,
    energy_norm_sq,
    eval_uncertainty,
    h1_norm_sq,
    sample_disturbance,
    validate_params,
)
from wavestab.errors import ParamViolation

U = Variant.UNSTABLE_SPRING
A = Variant.ANTISTABLE_DAMPER


def test_grid_rejects_bad_sizes():
    for n in (0, 1, 2.5, -3):
        with pytest.raises(ValueError):
            Grid(n)
    assert Grid(10).h == 0.1
    assert Grid(4).nodes.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_fields_are_read_only_and_sized():
    g = Grid(8)
    f = ScalarField(g, np.arange(9.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(8))
    with pytest.raises(ValueError):
        WavePair(ScalarField.zeros(g), ScalarField.zeros(Grid(9)))
    with pytest.raises(ValueError):
        WavePair(f, f, cell=np.zeros(9))


def test_source_array_not_aliased():
    g = Grid(4)
    src = np.ones(5)
    f = ScalarField(g, src)
    src[0] = 7.0
    assert f[0] == 1.0


def test_scaled_pair_keeps_cells_and_edges():
    g = Grid(4)
    p = WavePair(ScalarField(g, np.ones(5)), ScalarField.zeros(g), np.arange(4.0), (1.0, -2.0))
    q = p.scaled(-2.0)
    assert q.cell.tolist() == [0.0, -2.0, -4.0, -6.0]
    assert q.edge == (-2.0, 4.0)


@pytest.mark.parametrize(
    "params, needle",
    [
        ((U, 0.0, 0.5, 1, 1, 1), "q > 0"),
        ((U, 1.0, 1.0, 1, 1, 1), "0 < c0 < 1"),
        ((U, 1.0, 0.5, 0, 1, 1), "c1 > 0"),
        ((U, 1.0, 0.5, 1, 1, -1), "c3 > 0"),
        ((A, 1.0, 0.75, 1, 0.75, 1), "q != 1"),
        ((A, 0.5, 1.0, 1, 0.75, 1), "c1/(1-c0)"),
        ((A, 0.5, 0.25, 1, 0.75, 1), "(c0-q)/(1-c0)"),
        ((A, 0.5, 0.75, 1, 1.0, 1), "(c2-q)/(1-c2)"),
        ((U, math.nan, 0.5, 1, 1, 1), "finite"),
    ],
)
def test_param_violations_name_the_inequality(params, needle):
    with pytest.raises(ParamViolation) as e:
        validate_params(Params(*params))
    assert needle in e.value.inequality


def test_reference_params_are_admissible():
    validate_params(Params(U, 1.0, 0.5, 1, 1, 1))
    validate_params(Params(A, 0.5, 0.75, 1, 0.75, 1))
    # 1 < c0, c2 < q with c1 < 0: every ratio is negative over negative
    validate_params(Params(A, 2.0, 1.5, -1.0, 1.5, 1.0))


def test_z_row_coefficients():
    p = Params(U, 1.0, 0.5, 1.0, 1.0, 1.0)
    assert (p.z_spring, p.z_damping) == (2.0, 1.0)
    a = Params(A, 0.5, 0.75, 1.0, 0.75, 1.0)
    assert a.z_spring == pytest.approx(4.0)
    assert a.z_damping == pytest.approx(1.0)


def test_disturbances():
    assert sample_disturbance(ZeroDisturbance(), 3.0) == 0.0
    assert sample_disturbance(ConstantDisturbance(2.5), 1.0) == 2.5
    h = HarmonicSum([(1, 0, 2), (0, 3, 1)])
    assert sample_disturbance(h, 0.7) == pytest.approx(math.sin(1.4) + 3 * math.cos(0.7))
    assert amplitude_bound(h) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        HarmonicSum([(1, 2)])
    with pytest.raises(ValueError):
        sample_disturbance(ZeroDisturbance(), -1.0)
    with pytest.raises(ValueError):
        L2Decaying(1.0, 0.0)


def test_noise_is_seeded_held_and_bounded():
    a = BoundedNoise(0.3, seed=5, dt=0.1)
    vals = [sample_disturbance(a, 0.1 * k) for k in range(200)]
    assert max(abs(v) for v in vals) <= 0.3
    assert vals == [sample_disturbance(BoundedNoise(0.3, 5, 0.1), 0.1 * k) for k in range(200)]
    assert sample_disturbance(a, 0.12) == sample_disturbance(a, 0.19)
    assert vals != [sample_disturbance(BoundedNoise(0.3, 6, 0.1), 0.1 * k) for k in range(200)]


def test_uncertainties():
    g = Grid(10)
    w = WavePair.from_arrays(g, np.linspace(0, 2, 11), np.zeros(11))
    assert eval_uncertainty(TraceGain(0.1), w) == pytest.approx(0.2)
    assert eval_uncertainty(MeanSine(2.0), w) == pytest.approx(2 * math.sin(1.0))
    e = energy_norm_sq(w)
    assert eval_uncertainty(EnergySaturation(3.0, 0.5), w) == pytest.approx(3 * math.tanh(0.5 * e))


def test_energy_norm_on_known_fields():
    g = Grid(400)
    x = g.nodes
    # phi = x: int x^2 + 1 = 4/3; psi = 1: +1
    w = WavePair.from_arrays(g, x, np.ones_like(x))
    assert energy_norm_sq(w) == pytest.approx(7 / 3, rel=1e-5)
    f = TransportField.from_array(g, np.sin(np.pi * x))
    assert h1_norm_sq(f) == pytest.approx(0.5 + 0.5 * np.pi**2, rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.integers(3, 60), st.integers(0, 2**31))
def test_energy_norm_is_quadratic(lam, n, seed):
    g = Grid(n)
    rng = np.random.default_rng(seed)
    w = WavePair.from_arrays(g, rng.standard_normal(n + 1), rng.standard_normal(n + 1))
    assert energy_norm_sq(w.scaled(lam)) == pytest.approx(lam * lam * energy_norm_sq(w), rel=1e-12, abs=1e-300)
    assert energy_norm_sq(w) >= 0
