"""Subsystem steppers and the coupled closed loop.

One global step of :func:`closed_loop_step` runs in a fixed order:

1. read w(0), w(1) and the transport exit derivatives at the current
   level, and z_x(1) as the edge flux of the last completed z step;
2. evaluate the control, with its own what(1), what_t(1) feedback taken
   implicitly through the observer's right row, and F = f(w, w_t) + d(t);
3. advance the plant;
4. advance the observer and the estimator, feeding them the plant's
   half-step w(0);
5. impose W(0), Y(0), Z(0) and z(1) from the new level.

Coupling identities therefore hold exactly at every completed step, and
the error systems (v - w, what - w, ...) obey the same discrete rows as
their continuous counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import kernels as K
from .controller import ControlInputs, control_law, kernel_weights, self_feedback, total_disturbance
from .core import (
    ClosedLoopState,
    DisturbanceSpec,
    Params,
    ScalarField,
    TransportField,
    UncertaintySpec,
    Variant,
    WavePair,
    ZeroDisturbance,
    ZeroUncertainty,
    validate_params,
)
from .errors import Incompatible, NonFinite, VariantMismatch
from .kernels import Side, StepSizes

__all__ = [
    "VariantConfig",
    "InitialData",
    "EstimatorState",
    "ObserverState",
    "StepTrace",
    "check_compatibility",
    "plant_bc",
    "estimator_v_bc",
    "estimator_z_bc",
    "observer_bc",
    "plant_step",
    "estimator_step",
    "observer_step",
    "aux_Z_step",
    "backstepping_forward",
    "backstepping_inverse",
    "initial_state",
    "closed_loop_step",
    "control_inputs",
    "zero_initial_data",
]


@dataclass(frozen=True, eq=False)
class VariantConfig:
    params: Params
    sizes: StepSizes
    uncertainty: UncertaintySpec = field(default_factory=ZeroUncertainty)
    disturbance: DisturbanceSpec = field(default_factory=ZeroDisturbance)
    control_enabled: bool = True

    def __post_init__(self):
        validate_params(self.params)
        self.sizes.check()
        object.__setattr__(self, "_weights", kernel_weights(self.sizes.grid.n, self.params.q))

    @property
    def variant(self) -> Variant:
        return self.params.variant

    @property
    def grid(self):
        return self.sizes.grid


@dataclass(frozen=True, eq=False)
class InitialData:
    w0: ScalarField
    w1: ScalarField
    v0: ScalarField
    v1: ScalarField
    z0: ScalarField
    z1: ScalarField
    what0: ScalarField
    what1: ScalarField
    W0: ScalarField
    Y0: ScalarField
    Z0: Optional[ScalarField] = None

    @property
    def grid(self):
        return self.w0.grid

    def fields(self) -> list[ScalarField]:
        out = [self.w0, self.w1, self.v0, self.v1, self.z0, self.z1, self.what0, self.what1, self.W0, self.Y0]
        return out + ([self.Z0] if self.Z0 is not None else [])


def zero_initial_data(grid, variant: Variant = Variant.UNSTABLE_SPRING) -> InitialData:
    z = ScalarField.zeros(grid)
    return InitialData(z, z, z, z, z, z, z, z, z, z, z if variant is Variant.ANTISTABLE_DAMPER else None)


# ---- compatibility -------------------------------------------------------------


def _residuals(init: InitialData, p: Params) -> dict[str, float]:
    c0 = p.c0
    res = {
        "z0(1)-v0(1)-W0(1)+w0(1)=0": init.z0[-1] - init.v0[-1] - init.W0[-1] + init.w0[-1],
        "W0(0)+c0[v0(0)-w0(0)]=0": init.W0[0] + c0 * (init.v0[0] - init.w0[0]),
        "Y0(0)+c0[what0(0)-w0(0)]=0": init.Y0[0] + c0 * (init.what0[0] - init.w0[0]),
    }
    if p.variant is Variant.ANTISTABLE_DAMPER:
        if init.Z0 is None:
            res["Z0 present"] = float("inf")
        else:
            res["Z0(0)+c2*what0(0)=0"] = init.Z0[0] + p.c2 * init.what0[0]
    return {k: float(v) for k, v in res.items()}


def check_compatibility(
    init: InitialData, p: Params, tol: Optional[float] = None, auto_correct: bool = False
) -> InitialData:
    """Verify the initial-data compatibility identities of the closed loop.

    ``tol`` defaults to 1e-12 times the largest initial sample (at least 1).
    With ``auto_correct`` the transport channels W0, Y0, Z0 are shifted by the
    constant that satisfies their inflow identity and z0 gets a linear ramp
    fixing z0(1); the corrected data are returned. Otherwise incompatible
    data raise :class:`Incompatible`.
    """
    grid = init.grid
    if any(f.grid != grid for f in init.fields()):
        raise ValueError("initial data live on different grids")
    if tol is None:
        scale = max([1.0] + [float(np.max(np.abs(f.values))) for f in init.fields()])
        tol = 1e-12 * scale
    if auto_correct:
        init = _auto_correct(init, p)
    res = _residuals(init, p)
    bad = {k: v for k, v in res.items() if not abs(v) <= tol}
    if bad:
        raise Incompatible(bad)
    return init


def _auto_correct(init: InitialData, p: Params) -> InitialData:
    grid = init.grid
    W0 = init.W0.values - (init.W0[0] + p.c0 * (init.v0[0] - init.w0[0]))
    Y0 = init.Y0.values - (init.Y0[0] + p.c0 * (init.what0[0] - init.w0[0]))
    # exact boundary values, not just shifted ones
    W0[0] = -p.c0 * (init.v0[0] - init.w0[0])
    Y0[0] = -p.c0 * (init.what0[0] - init.w0[0])
    Z0 = init.Z0
    if p.variant is Variant.ANTISTABLE_DAMPER:
        zv = np.zeros(grid.n + 1) if Z0 is None else Z0.values.copy()
        zv = zv - (zv[0] + p.c2 * init.what0[0])
        zv[0] = -p.c2 * init.what0[0]
        Z0 = ScalarField(grid, zv)
    # a ramp rather than a single-node jump, which would seed grid-scale modes
    x = grid.nodes
    z0 = init.z0.values + x * (init.v0[-1] + W0[-1] - init.w0[-1] - init.z0[-1])
    z0[-1] = init.v0[-1] + W0[-1] - init.w0[-1]
    return replace(init, W0=ScalarField(grid, W0), Y0=ScalarField(grid, Y0), Z0=Z0, z0=ScalarField(grid, z0))


# ---- boundary conditions of each subsystem ----------------------------------------


def plant_bc(p: Params, flux: float) -> K.WaveBC:
    if p.variant is Variant.UNSTABLE_SPRING:
        left = K.RobinDisplacement(-p.q)
    else:
        left = K.MixedVelocityDisplacement(0.0, -p.q)
    return K.WaveBC(left, K.NeumannFlux(flux))


def _copy_left(p: Params, w0: float):
    # v and what share the plant's left row plus injection c1*(. - w(0))
    if p.variant is Variant.UNSTABLE_SPRING:
        return K.RobinDisplacement(p.c1, -(p.q + p.c1), w0)
    return K.RobinVelocity(p.c1, -p.q, -p.c1, w0)


def estimator_v_bc(p: Params, w0: float, u: float, Wx1: float) -> K.WaveBC:
    return K.WaveBC(_copy_left(p, w0), K.NeumannFlux(u - Wx1))


def estimator_z_bc(p: Params, z1: float) -> K.WaveBC:
    return K.WaveBC(K.MixedVelocityDisplacement(p.z_spring, p.z_damping), K.Dirichlet(z1))


def observer_bc(
    p: Params, w0: float, u: float, zx1: float, Yx1: float, feedback: tuple[float, float] = (0.0, 0.0)
) -> K.WaveBC:
    """Observer rows; ``feedback`` = (k_d, k_v) moves -k_d*what(1) - k_v*what_t(1) into the row."""
    k_d, k_v = feedback
    left = _copy_left(p, w0)
    if k_d or k_v:
        return K.WaveBC(left, K.DampedFlux(k_v, k_d, u - zx1 - Yx1))
    return K.WaveBC(left, K.NeumannFlux(u - zx1 - Yx1))


# ---- subsystem steps -------------------------------------------------------------------


def plant_step(w: WavePair, u: float, cfg: VariantConfig, t: float = 0.0, F: Optional[float] = None) -> WavePair:
    """Advance the plant with right flux u + F, F = f(w, w_t) + d(t)."""
    if F is None:
        F = total_disturbance(w, cfg.uncertainty, cfg.disturbance, t)
    try:
        return K.wave_step(w, plant_bc(cfg.params, u + F), cfg.sizes)
    except NonFinite as exc:
        raise NonFinite("plant", t) from exc


@dataclass(frozen=True, eq=False)
class EstimatorState:
    v: WavePair
    W: TransportField
    z: WavePair

    @property
    def zx1(self) -> float:
        """z_x(1) of the last step (three-point stencil on initial data)."""
        return K.edge_flux(self.z, Side.RIGHT)

    @property
    def estimate(self) -> float:
        """-z_x(1), the estimate of the total disturbance."""
        return -self.zx1


def estimator_step(
    est: EstimatorState,
    u: float,
    y_now: tuple[float, float],
    y_next: tuple[float, float],
    cfg: VariantConfig,
) -> EstimatorState:
    """Advance (v, W, z) one step.

    ``y_now`` is (w(0), w(1)) as seen by the current step; its w(0) should be
    the plant's half-step trace (:func:`kernels.boundary_trace`) so that
    v - w obeys the discrete injection row exactly. ``y_next`` is the pair at
    the new level; the inflow W(0) and the Dirichlet value z(1) use it.
    """
    p = cfg.params
    Wx1 = K.outflow_derivative(est.W, cfg.sizes)
    v = K.wave_step(est.v, estimator_v_bc(p, y_now[0], u, Wx1), cfg.sizes)
    W = K.transport_step(est.W, -p.c0 * (v.u.values[0] - y_next[0]), cfg.sizes)
    z1 = v.u.values[-1] + W.values[-1] - y_next[1]
    z = K.wave_step(est.z, estimator_z_bc(p, z1), cfg.sizes)
    return EstimatorState(v, W, z)


@dataclass(frozen=True, eq=False)
class ObserverState:
    what: WavePair
    Y: TransportField

def observer_step(
    obs: ObserverState,
    u: float,
    w0_now: float,
    w0_next: float,
    zx1: float,
    cfg: VariantConfig,
    feedback: tuple[float, float] = (0.0, 0.0),
) -> ObserverState:
    """Advance (what, Y): plant copy driven by u - z_x(1) - Y_x(1), injection at x=0.

    With ``feedback`` = (k_d, k_v) the right row becomes
    what_x(1) = u - k_d*what(1) - k_v*what_t(1) - z_x(1) - Y_x(1), both terms
    implicit; ``u`` must then exclude them.
    """
    p = cfg.params
    Yx1 = K.outflow_derivative(obs.Y, cfg.sizes)
    bc = observer_bc(p, w0_now, u, zx1, Yx1, feedback)
    what = K.wave_step(obs.what, bc, cfg.sizes)
    Y = K.transport_step(obs.Y, -p.c0 * (what.u.values[0] - w0_next), cfg.sizes)
    return ObserverState(what, Y)


def aux_Z_step(Z: TransportField, what0: float, cfg: VariantConfig) -> TransportField:
    """Auxiliary channel of the anti-stable design, inflow Z(0) = -c2*what(0)."""
    if cfg.variant is not Variant.ANTISTABLE_DAMPER:
        raise VariantMismatch("the auxiliary Z channel exists only for the anti-stable variant")
    return K.transport_step(Z, -cfg.params.c2 * what0, cfg.sizes)


# ---- backstepping pair ------------------------------------------------------------------


def _require_unstable(p: Params) -> None:
    if p.variant is not Variant.UNSTABLE_SPRING:
        raise VariantMismatch("the Volterra transformation belongs to the unstable-spring design")


def backstepping_forward(what: ScalarField, p: Params) -> ScalarField:
    """wtilde(x) = what(x) + (c2+q) int_0^x exp(q(x-xi)) what(xi) dxi."""
    _require_unstable(p)
    integ = K.exp_kernel_cumulative(what, p.q, K.KernelSign.FORWARD)
    return ScalarField(what.grid, what.values + (p.c2 + p.q) * integ)


def backstepping_inverse(wtilde: ScalarField, p: Params) -> ScalarField:
    """what(x) = wtilde(x) - (c2+q) int_0^x exp(-c2(x-xi)) wtilde(xi) dxi."""
    _require_unstable(p)
    integ = K.exp_kernel_cumulative(wtilde, p.c2, K.KernelSign.INVERSE)
    return ScalarField(wtilde.grid, wtilde.values - (p.c2 + p.q) * integ)


# ---- closed loop -------------------------------------------------------------------------------


class StepTrace(NamedTuple):
    """Signals of one global step labelled with its start time ``t``.

    ``u`` and ``F`` act over the step; ``estimate`` is -z_x(1) as produced
    by the step, so F - estimate is the estimation error of that step.
    """

    t: float
    u: float
    F: float
    estimate: float
    w0: float
    w1: float


def _stagger(field: ScalarField, vel: ScalarField, bc: K.WaveBC, sizes: StepSizes) -> WavePair:
    return WavePair(field, K.stagger_velocity(field, vel, bc, sizes))


def initial_state(init: InitialData, cfg: VariantConfig, stagger: bool = True) -> ClosedLoopState:
    """Build the t=0 state from compatible initial data.

    With ``stagger`` each velocity is moved to t=-dt/2 (see
    :func:`kernels.stagger_velocity`) using homogeneous versions of the
    subsystem boundary rows.
    """
    p = cfg.params
    sz = cfg.sizes
    if stagger:
        w = _stagger(init.w0, init.w1, plant_bc(p, 0.0), sz)
        v = _stagger(init.v0, init.v1, estimator_v_bc(p, init.w0[0], 0.0, 0.0), sz)
        z = _stagger(init.z0, init.z1, estimator_z_bc(p, init.z0[-1]), sz)
        what = _stagger(init.what0, init.what1, observer_bc(p, init.w0[0], 0.0, 0.0, 0.0), sz)
    else:
        w = WavePair(init.w0, init.w1)
        v = WavePair(init.v0, init.v1)
        z = WavePair(init.z0, init.z1)
        what = WavePair(init.what0, init.what1)
    Z = None
    if p.variant is Variant.ANTISTABLE_DAMPER:
        Z = TransportField(init.Z0 if init.Z0 is not None else ScalarField.zeros(init.grid))
    return ClosedLoopState(0.0, w, v, z, what, TransportField(init.W0), TransportField(init.Y0), Z, 0)


def control_inputs(state: ClosedLoopState, sizes: StepSizes) -> ControlInputs:
    Z1 = Zx1 = None
    if state.Z is not None:
        Z1 = float(state.Z.values[-1])
        Zx1 = K.outflow_derivative(state.Z, sizes)
    return ControlInputs(
        what=state.what.u,
        what_t=state.what.ut,
        zx1=K.edge_flux(state.z, Side.RIGHT),
        Yx1=K.outflow_derivative(state.Y, sizes),
        Z1=Z1,
        Zx1=Zx1,
    )


def closed_loop_step(state: ClosedLoopState, cfg: VariantConfig) -> tuple[ClosedLoopState, StepTrace]:
    """One global step of the coupled loop; see the module docstring for the order.

    The law's what(1) and what_t(1) terms are evaluated at the half step,
    as the wave rows evaluate them: the observer's right-row
    velocity is predicted first, and the plant and estimator receive that
    exact u.
    """
    p = cfg.params
    sz = cfg.sizes
    t = state.t
    w0 = float(state.w.u.values[0])
    w1 = float(state.w.u.values[-1])
    inp = control_inputs(state, sz)
    F = total_disturbance(state.w, cfg.uncertainty, cfg.disturbance, t)
    try:
        if cfg.control_enabled:
            fb = self_feedback(p, sz.grid.n)
            u_rest = control_law(inp, p, cfg._weights) + fb[0] * inp.what1 + fb[1] * inp.what_t1
        else:
            fb = (0.0, 0.0)
            u_rest = 0.0
        # the right row does not see the left boundary data, so its new
        # velocity is known before the plant has been advanced
        right = observer_bc(p, 0.0, u_rest, inp.zx1, inp.Yx1, fb)
        vn = K.right_row_velocity(state.what, right, sz)
        vo = inp.what_t1
        w1bar, wt1bar = K.half_step_trace(inp.what1, vn, vo, sz)
        u = u_rest - fb[0] * w1bar - fb[1] * wt1bar

        w = plant_step(state.w, u, cfg, t, F)
        w0_bar = K.boundary_trace(state.w, w, sz, Side.LEFT)[0]
        y_next = (float(w.u.values[0]), float(w.u.values[-1]))
        obs = observer_step(ObserverState(state.what, state.Y), u_rest, w0_bar, y_next[0], inp.zx1, cfg, fb)
        est = estimator_step(EstimatorState(state.v, state.W, state.z), u, (w0_bar, w1), y_next, cfg)
        Z = aux_Z_step(state.Z, obs.what.u.values[0], cfg) if state.Z is not None else None
    except NonFinite as exc:
        raise NonFinite(exc.what, t) from exc
    new = ClosedLoopState(
        (state.step + 1) * sz.dt, w, est.v, est.z, obs.what, est.W, obs.Y, Z, state.step + 1
    )
    return new, StepTrace(t, u, F, est.estimate, w0, w1)
