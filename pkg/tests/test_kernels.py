import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavestab import kernels as K
from wavestab.core import Grid, ScalarField, TransportField, WavePair
from wavestab.errors import CflViolation, NonFinite
from wavestab.kernels import _pykernels as P

try:
    from wavestab.kernels import _ckernels as C
except ImportError:  # pragma: no cover
    C = None

needs_c = pytest.mark.skipif(C is None, reason="compiled kernels not built")
coef = st.floats(-3, 3, allow_nan=False)


def rand(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n + 1), rng.standard_normal(n + 1), rng.standard_normal(n)


# ---- backends ----------------------------------------------------------------


def test_backend_selected():
    forced = os.environ.get("WAVESTAB_PURE_PYTHON", "") not in ("", "0")
    assert K.BACKEND == ("cython" if C is not None and not forced else "python")


def test_env_forces_python_backend():
    env = dict(os.environ, WAVESTAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import wavestab.kernels as K; print(K.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_c
@settings(max_examples=60, deadline=None)
@given(st.integers(4, 80), st.integers(0, 2**31), coef, coef, coef, coef, coef, coef, st.booleans(), coef)
def test_backends_agree(n, seed, al, bl, gl, ar, br, gr, dirichlet, g):
    # keep the implicit end rows away from their singular points
    bl = abs(bl)
    br = -abs(br)
    u, ut, s = rand(n, seed)
    h = 1.0 / n
    args = (al, bl, gl, ar, br, gr, dirichlet, g)
    for a, b in zip(P.char_step(u, s, h, *args), C.char_step(u, s, h, *args)):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(P.leapfrog_step(u, ut, 0.5 * h, h, *args), C.leapfrog_step(u, ut, 0.5 * h, h, *args)):
        np.testing.assert_array_equal(a, b)
    assert P.char_right_velocity(u, s, h, ar, br, gr) == C.char_right_velocity(u, s, h, ar, br, gr)
    assert P.leapfrog_right_velocity(u, ut, 0.7 * h, h, ar, br, gr) == C.leapfrog_right_velocity(
        u, ut, 0.7 * h, h, ar, br, gr
    )
    np.testing.assert_array_equal(P.transport_shift(u, gl), C.transport_shift(u, gl))
    np.testing.assert_array_equal(P.transport_upwind(u, gl, 0.4), C.transport_upwind(u, gl, 0.4))
    np.testing.assert_allclose(P.exp_kernel_cumulative(u, h, al), C.exp_kernel_cumulative(u, h, al), rtol=1e-13, atol=1e-13)


def test_kernels_do_not_mutate_inputs():
    u, ut, s = rand(10, 3)
    copies = [u.copy(), ut.copy(), s.copy()]
    K.wave_step_arrays(u, ut, (1, 0.5, 0.1, -1, -1, 0.2, False, 0), 0.1, 0.1, s)
    K.wave_step_arrays(u, ut, (1, 0.5, 0.1, -1, -1, 0.2, True, 0), 0.05, 0.1)
    for a, b in zip((u, ut, s), copies):
        np.testing.assert_array_equal(a, b)


# ---- boundary rows -------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(st.integers(4, 60), st.integers(0, 2**31), coef, st.floats(0, 3), coef, coef, st.floats(0, 3), coef)
def test_char_step_satisfies_both_rows(n, seed, al, bl, gl, ar, a_damp, gr):
    u, _, s = rand(n, seed)
    h = 1.0 / n
    br = -a_damp
    un, vn, sn, ux0, ux1 = P.char_step(u, s, h, al, bl, gl, ar, br, gr, False, 0.0)
    u0bar = u[0] + 0.5 * h * vn[0]
    u1bar = u[-1] + 0.5 * h * vn[-1]
    assert ux0 == pytest.approx(al * u0bar + bl * vn[0] + gl, rel=1e-10, abs=1e-9)
    assert ux1 == pytest.approx(ar * u1bar + br * vn[-1] + gr, rel=1e-10, abs=1e-9)
    np.testing.assert_allclose(un, u + h * vn, rtol=0, atol=1e-14 * (1 + np.max(np.abs(u))))


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 60), st.integers(0, 2**31), coef)
def test_dirichlet_row_hits_the_value(n, seed, g):
    u, ut, s = rand(n, seed)
    h = 1.0 / n
    for step in (P.char_step(u, s, h, 0, 0, 0, 0, 0, 0, True, g), P.leapfrog_step(u, ut, 0.5 * h, h, 0, 0, 0, 0, 0, 0, True, g)):
        assert step[0][-1] == g


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 60), st.integers(0, 2**31), coef, st.floats(0, 3), coef, st.sampled_from([1.0, 0.5, 0.8]))
def test_right_row_velocity_predicts_the_step(n, seed, ar, a_damp, gr, courant):
    g = Grid(n)
    u, ut, s = rand(n, seed)
    sz = K.StepSizes(courant * g.h, g)
    bc = K.WaveBC(K.RobinDisplacement(0.3, 1.0, 0.2), K.DampedFlux(a_damp, -ar, gr))
    pair = WavePair(ScalarField(g, u), ScalarField(g, ut), s if sz.exact_transport else None)
    pred = K.right_row_velocity(pair, bc, sz)
    new = K.wave_step(pair, bc, sz)
    assert pred == pytest.approx(new.ut.values[-1], rel=1e-12, abs=1e-12)


def test_edge_flux_falls_back_to_stencil():
    g = Grid(10)
    x = g.nodes
    pair = WavePair(ScalarField(g, x**2), ScalarField.zeros(g))
    assert K.edge_flux(pair, K.Side.RIGHT) == pytest.approx(2.0)
    assert K.edge_flux(pair, K.Side.LEFT) == pytest.approx(0.0, abs=1e-12)
    new = K.wave_step(pair, K.WaveBC(K.RobinDisplacement(0.0, 1.0, 0.7), K.NeumannFlux(-0.4)), K.StepSizes.default(g))
    assert new.edge == (pytest.approx(0.7), pytest.approx(-0.4))
    assert K.edge_flux(new, K.Side.LEFT) == new.edge[0]


# ---- dynamics at dt = h ---------------------------------------------------------


def _char_energy(pair):
    g = pair.grid
    d = np.diff(pair.u.values) / g.h
    return float(np.sum(pair.cell**2 + d**2))


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 50), st.integers(0, 2**31))
def test_neumann_conserves_energy_and_returns_after_2n(n, seed):
    g = Grid(n)
    u, _, s = rand(n, seed)
    sz = K.StepSizes.default(g)
    start = WavePair(ScalarField(g, u), ScalarField.zeros(g), s)
    pair = start
    e0 = _char_energy(start)
    for _ in range(2 * n):
        pair = K.wave_step(pair, K.NEUMANN0, sz)
        assert _char_energy(pair) == pytest.approx(e0, rel=1e-12)
    # invariants travel the full round trip: cell velocities and slopes come back
    np.testing.assert_allclose(pair.cell, start.cell, atol=1e-10)
    np.testing.assert_allclose(np.diff(pair.u.values), np.diff(u), atol=1e-10)


def test_absorbing_end_removes_everything_including_checkerboard():
    n = 40
    g = Grid(n)
    sz = K.StepSizes.default(g)
    u = np.cos(np.pi * np.arange(n + 1))  # grid-scale pattern
    pair = WavePair(ScalarField(g, u), ScalarField.zeros(g), np.zeros(n))
    bc = K.WaveBC(K.RobinDisplacement(0.0), K.DampedSpring(1.0))
    for _ in range(2 * n):
        pair = K.wave_step(pair, bc, sz)
    assert np.max(np.abs(pair.cell)) < 1e-12
    assert np.ptp(pair.u.values) < 1e-12


def test_travelling_pulse_is_exact_in_the_interior():
    n = 100
    g = Grid(n)
    x = g.nodes
    sz = K.StepSizes.default(g)
    f = lambda y: np.exp(-400 * (y - 0.3) ** 2)
    df = lambda y: -800 * (y - 0.3) * f(y)
    # right-going: u = f(x - t), u_t = -f'(x - t); cell velocity from the exact slope
    cell = -(f(x[1:]) - f(x[:-1])) / g.h
    pair = WavePair(ScalarField(g, f(x)), ScalarField(g, -df(x)), cell)
    for _ in range(30):
        pair = K.wave_step(pair, K.NEUMANN0, sz)
    np.testing.assert_allclose(pair.u.values, f(x - 0.3), atol=1e-12)


# ---- dt < h ------------------------------------------------------------------


def test_leapfrog_stays_bounded_under_neumann():
    g = Grid(50)
    sz = K.StepSizes(0.5 * g.h, g)
    x = g.nodes
    u0 = ScalarField(g, np.exp(-50 * (x - 0.4) ** 2))
    pair = WavePair(u0, K.stagger_velocity(u0, ScalarField.zeros(g), K.NEUMANN0, sz))
    top = 0.0
    for _ in range(4000):
        pair = K.wave_step(pair, K.NEUMANN0, sz)
        top = max(top, float(np.max(np.abs(pair.u.values))))
    assert top < 1.5
    assert pair.cell is None and pair.edge is None


def test_cfl_and_grid_checks():
    g = Grid(10)
    with pytest.raises(CflViolation):
        K.StepSizes(0.2, g).check()
    with pytest.raises(ValueError):
        K.wave_step(WavePair.zeros(Grid(11)), K.NEUMANN0, K.StepSizes.default(g))


def test_nan_is_reported():
    g = Grid(10)
    u = np.zeros(11)
    u[3] = np.nan
    with pytest.raises(NonFinite):
        K.wave_step(WavePair.from_arrays(g, u, np.zeros(11)), K.NEUMANN0, K.StepSizes.default(g))


# ---- transport, derivatives, kernels --------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 60), st.integers(0, 2**31), coef)
def test_transport_shift_is_exact(n, seed, inflow):
    g = Grid(n)
    v, _, _ = rand(n, seed)
    f = TransportField.from_array(g, v)
    out = K.transport_step(f, inflow, K.StepSizes.default(g))
    assert out.values[0] == inflow
    np.testing.assert_array_equal(out.values[1:], v[:-1])


def test_outflow_derivative_matches_exit_rate():
    g = Grid(20)
    v = np.sin(3 * g.nodes)
    f = TransportField.from_array(g, v)
    for sz in (K.StepSizes.default(g), K.StepSizes(0.6 * g.h, g)):
        new = K.transport_step(f, 0.0, sz)
        rate = (new.values[-1] - v[-1]) / sz.dt
        assert K.outflow_derivative(f, sz) == pytest.approx(-rate, rel=1e-12)


def test_upwind_keeps_constants():
    g = Grid(20)
    f = TransportField.from_array(g, np.full(21, 2.0))
    out = K.transport_step(f, 2.0, K.StepSizes(0.3 * g.h, g))
    np.testing.assert_allclose(out.values, 2.0)


def test_boundary_derivative_exact_on_quadratics():
    g = Grid(7)
    x = g.nodes
    f = ScalarField(g, 3 * x**2 - x + 2)
    assert K.boundary_derivative(f, K.Side.LEFT) == pytest.approx(-1.0)
    assert K.boundary_derivative(f, K.Side.RIGHT) == pytest.approx(5.0)


@pytest.mark.parametrize("sign", list(K.KernelSign))
def test_cumulative_kernel_matches_direct_sum(sign):
    g = Grid(30)
    f = ScalarField(g, np.cos(2 * g.nodes))
    cum = K.exp_kernel_cumulative(f, 1.3, sign)
    direct = [K.exp_kernel_integral(f, 1.3, m, sign) for m in range(31)]
    np.testing.assert_allclose(cum, direct, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        K.exp_kernel_integral(f, 1.0, 31)


def test_kernel_integral_converges():
    # int_0^1 exp(x - xi) dxi = e - 1
    g = Grid(200)
    f = ScalarField(g, np.ones(201))
    assert K.exp_kernel_integral(f, 1.0, 200) == pytest.approx(np.e - 1, rel=1e-5)
