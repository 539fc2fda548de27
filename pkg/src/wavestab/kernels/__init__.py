"""Time-stepping stencils on the uniform mesh.

The array kernels come from the compiled ``_ckernels`` extension when it is
importable, otherwise from the numpy module ``_pykernels``. Setting the
environment variable ``WAVESTAB_PURE_PYTHON=1`` forces the fallback.
``BACKEND`` names the backend actually in use.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..core import Grid, ScalarField, TransportField, WavePair
from ..errors import CflViolation, NonFinite
from . import _pykernels

if os.environ.get("WAVESTAB_PURE_PYTHON", "") not in ("", "0"):
    _backend = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _backend  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _pykernels
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "StepSizes",
    "RobinDisplacement",
    "RobinVelocity",
    "MixedVelocityDisplacement",
    "NeumannFlux",
    "Dirichlet",
    "DampedSpring",
    "DampedFlux",
    "WaveBC",
    "Side",
    "KernelSign",
    "wave_step",
    "stagger_velocity",
    "transport_step",
    "outflow_derivative",
    "boundary_trace",
    "half_step_trace",
    "right_row_velocity",
    "initial_cells",
    "edge_flux",
    "boundary_derivative",
    "exp_kernel_integral",
    "exp_kernel_cumulative",
    "raw_backend",
]


def raw_backend():
    """Module providing the array-level kernels currently selected."""
    return _backend


@dataclass(frozen=True)
class StepSizes:
    dt: float
    grid: Grid

    @classmethod
    def default(cls, grid: Grid) -> "StepSizes":
        return cls(grid.h, grid)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def courant(self) -> float:
        return self.dt / self.grid.h

    def check(self) -> "StepSizes":
        if not (self.dt > 0 and self.dt <= self.grid.h * (1.0 + 1e-12)):
            raise CflViolation(self.dt, self.grid.h)
        return self

    @property
    def exact_transport(self) -> bool:
        return math.isclose(self.dt, self.grid.h, rel_tol=1e-12)


# ---- boundary conditions ---------------------------------------------------


# Boundary terms are evaluated at the half step t + dt/2. An external trace
# ``ext`` enters as given; callers coupling two steppers pass the half-step
# value of that trace (boundary_trace), so differences of coupled fields obey
# the same discrete rows.


@dataclass(frozen=True)
class RobinDisplacement:
    """u_x(0) = a*u(0) + b*ext."""

    a: float
    b: float = 0.0
    ext: float = 0.0


@dataclass(frozen=True)
class RobinVelocity:
    """u_x(0) = a*u(0) + b*u_t(0) + c*ext."""

    a: float
    b: float
    c: float = 0.0
    ext: float = 0.0


@dataclass(frozen=True)
class MixedVelocityDisplacement:
    """u_x(0) = a*u(0) + b*u_t(0)."""

    a: float
    b: float


@dataclass(frozen=True)
class NeumannFlux:
    """u_x(1) = g."""

    g: float


@dataclass(frozen=True)
class Dirichlet:
    """u(1) = g at the new time level."""

    g: float


@dataclass(frozen=True)
class DampedFlux:
    """u_x(1) = -a*u_t(1) - b*u(1) + g; the a, b terms are implicit in the row."""

    a: float
    b: float = 0.0
    g: float = 0.0


@dataclass(frozen=True)
class DampedSpring:
    """u_x(1) = -a*u_t(1) - b*u(1)."""

    a: float
    b: float = 0.0


LeftBC = Union[RobinDisplacement, RobinVelocity, MixedVelocityDisplacement]
RightBC = Union[NeumannFlux, Dirichlet, DampedSpring, DampedFlux]


@dataclass(frozen=True)
class WaveBC:
    left: LeftBC
    right: RightBC

    def coefficients(self) -> tuple[float, float, float, float, float, float, bool, float]:
        """(al, bl, gl, ar, br, gr, dirichlet, g_right) for the array kernel."""
        lb = self.left
        if isinstance(lb, RobinDisplacement):
            al, bl, gl = lb.a, 0.0, lb.b * lb.ext
        elif isinstance(lb, RobinVelocity):
            al, bl, gl = lb.a, lb.b, lb.c * lb.ext
        elif isinstance(lb, MixedVelocityDisplacement):
            al, bl, gl = lb.a, lb.b, 0.0
        else:
            raise TypeError(f"unsupported left boundary condition {lb!r}")
        rb = self.right
        if isinstance(rb, NeumannFlux):
            return al, bl, gl, 0.0, 0.0, rb.g, False, 0.0
        if isinstance(rb, Dirichlet):
            return al, bl, gl, 0.0, 0.0, 0.0, True, rb.g
        if isinstance(rb, DampedSpring):
            return al, bl, gl, -rb.b, -rb.a, 0.0, False, 0.0
        if isinstance(rb, DampedFlux):
            return al, bl, gl, -rb.b, -rb.a, rb.g, False, 0.0
        raise TypeError(f"unsupported right boundary condition {rb!r}")


NEUMANN0 = WaveBC(RobinDisplacement(0.0), NeumannFlux(0.0))


# ---- wave stepping ---------------------------------------------------------


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFinite(what)


def initial_cells(ut: np.ndarray) -> np.ndarray:
    """Cell-midpoint velocities from nodal ones (mean of the two end nodes)."""
    return 0.5 * (ut[1:] + ut[:-1])


def wave_step_arrays(u: np.ndarray, ut: np.ndarray, coeffs, dt: float, h: float, cell=None):
    """Array-level wave step; ``coeffs`` as returned by ``WaveBC.coefficients``.

    Returns (u, ut, cell, edge) at the new level; cell and edge are None for dt < h.
    """
    if math.isclose(dt, h, rel_tol=1e-12):
        if cell is None:
            cell = initial_cells(ut)
        un, vn, sn, ux0, ux1 = _backend.char_step(u, np.ascontiguousarray(cell), h, *coeffs)
        return un, vn, sn, (float(ux0), float(ux1))
    un, vn = _backend.leapfrog_step(u, ut, dt, h, *coeffs)
    return un, vn, None, None


def wave_step(s: WavePair, bc: WaveBC, sizes: StepSizes) -> WavePair:
    """Advance a wave subsystem by one step.

    At dt == h the two characteristic fields are shifted one cell and the
    boundary rows are solved along characteristics, so no boundary row
    can leave a grid-scale mode undamped. For dt < h: staggered leapfrog,
    v <- v + dt*(u[i+1] - 2u[i] + u[i-1])/h^2 then u <- u + dt*v, with a
    ghost node eliminated at each end. Both are second order.
    """
    sizes.check()
    if s.grid != sizes.grid:
        raise ValueError("state and step sizes use different grids")
    un, vn, cell, edge = wave_step_arrays(s.u.values, s.ut.values, bc.coefficients(), sizes.dt, sizes.h, s.cell)
    _check_finite(un, "wave displacement")
    _check_finite(vn, "wave velocity")
    return WavePair(ScalarField(s.grid, un), ScalarField(s.grid, vn), cell, edge)


def stagger_velocity(u0: ScalarField, u1: ScalarField, bc: WaveBC, sizes: StepSizes) -> ScalarField:
    """Initial ``ut`` for the stepper.

    For dt < h the velocity is shifted from t=0 back to t=-dt/2,
    ``u1 - dt/2 * u_xx(u0)``, with boundary velocity terms taken from ``u1``;
    that makes the first staggered step second-order accurate. At dt == h
    the stepper reads cell velocities instead and ``u1`` is returned as is.
    """
    if sizes.exact_transport:
        return u1
    h = sizes.h
    al, bl, gl, ar, br, gr, dirichlet, _ = bc.coefficients()
    u = u0.values
    acc = np.empty_like(u)
    acc[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    acc[0] = 2.0 * (u[1] - u[0]) / (h * h) - (2.0 / h) * (al * u[0] + bl * u1.values[0] + gl)
    if dirichlet:
        acc[-1] = 0.0
    else:
        acc[-1] = 2.0 * (u[-2] - u[-1]) / (h * h) + (2.0 / h) * (
            ar * u[-1] + br * u1.values[-1] + gr
        )
    return ScalarField(u0.grid, u1.values - 0.5 * sizes.dt * acc)


def boundary_trace(old: WavePair, new: WavePair, sizes: StepSizes, end: "Side") -> tuple[float, float]:
    """(u, u_t) at an endpoint at t + dt/2, as the wave rows evaluate them.

    u is u[k] + dt/2 * v[k+1/2]; u_t is v[k+1/2] at dt == h and the mean
    of the two half-step velocities otherwise.
    """
    i = 0 if Side(end) is Side.LEFT else -1
    return half_step_trace(float(old.u.values[i]), float(new.ut.values[i]), float(old.ut.values[i]), sizes)


def right_row_velocity(s: WavePair, bc: WaveBC, sizes: StepSizes) -> float:
    """Half-step velocity at x=1 that ``wave_step(s, bc, sizes)`` will produce.

    The right row only reads the rightmost nodes, so it can be evaluated
    before the left boundary data of the step are known.
    """
    al, bl, gl, ar, br, gr, dirichlet, g_right = bc.coefficients()
    u = s.u.values
    if dirichlet:
        return float((g_right - u[-1]) / sizes.dt)
    if sizes.exact_transport:
        cell = s.cell if s.cell is not None else initial_cells(s.ut.values)
        return float(_backend.char_right_velocity(u, np.ascontiguousarray(cell), sizes.h, ar, br, gr))
    return float(_backend.leapfrog_right_velocity(u, s.ut.values, sizes.dt, sizes.h, ar, br, gr))


def half_step_trace(u_now: float, v_new: float, v_old: float, sizes: StepSizes) -> tuple[float, float]:
    """``boundary_trace`` from scalars: endpoint value, new and old half-step velocities."""
    ubar = u_now + 0.5 * sizes.dt * v_new
    return ubar, (v_new if sizes.exact_transport else 0.5 * (v_old + v_new))


def edge_flux(s: WavePair, end: "Side") -> float:
    """u_x at an end over the step that produced ``s``.

    This is the value the boundary row used, so coupled error fields see it
    exactly. Without step history (initial data, dt < h) the three-point
    one-sided derivative of ``s.u`` is returned.
    """
    if s.edge is None:
        return boundary_derivative(s.u, end)
    return float(s.edge[0 if Side(end) is Side.LEFT else 1])


# ---- transport ---------------------------------------------------------------


def transport_step(f: TransportField, inflow: float, sizes: StepSizes) -> TransportField:
    """Advance f_t = -f_x one step with boundary value ``inflow`` at x=0.

    With dt == h this is the exact characteristic shift; for dt < h the
    first-order upwind scheme is used.
    """
    sizes.check()
    vals = f.values
    if sizes.exact_transport:
        out = _backend.transport_shift(vals, float(inflow))
    else:
        out = _backend.transport_upwind(vals, float(inflow), sizes.courant)
    _check_finite(out, "transport field")
    return TransportField(ScalarField(f.grid, out))


def outflow_derivative(f: TransportField, sizes: StepSizes) -> float:
    """f_x(1) over the coming step, as the backward difference (f[n] - f[n-1]) / h.

    This equals -(f(1, t+dt) - f(1, t))/dt for the shift and the upwind
    scheme alike, i.e. -f_t(1) at the half step. Fed into a wave row it makes
    wave + transport satisfy the characteristic boundary row exactly.
    """
    v = f.values
    return float((v[-1] - v[-2]) / sizes.h)


# ---- derivatives and quadrature ----------------------------------------------


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class KernelSign(str, enum.Enum):
    FORWARD = "forward"  # exp(+rate (x - xi))
    INVERSE = "inverse"  # exp(-rate (x - xi))


def boundary_derivative_values(v: np.ndarray, h: float, end) -> float:
    if Side(end) is Side.RIGHT:
        return (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)


def boundary_derivative(f: Union[ScalarField, TransportField], end: Side) -> float:
    """Three-point one-sided derivative at an endpoint (exact on quadratics)."""
    sf = f.f if isinstance(f, TransportField) else f
    return float(boundary_derivative_values(sf.values, sf.grid.h, end))


def _signed_rate(rate: float, sign) -> float:
    return rate if KernelSign(sign) is KernelSign.FORWARD else -rate


def exp_kernel_integral(f: ScalarField, rate: float, x_upper: int, sign=KernelSign.FORWARD) -> float:
    """Trapezoid value of int_0^{x_upper*h} exp(+-rate (x - xi)) f(xi) dxi."""
    n = f.grid.n
    if not 0 <= x_upper <= n:
        raise ValueError(f"x_upper must be a node index in [0, {n}]")
    if x_upper == 0:
        return 0.0
    h = f.grid.h
    s = _signed_rate(rate, sign)
    xi = np.arange(x_upper + 1) * h
    kern = np.exp(s * (x_upper * h - xi))
    return float(np.trapezoid(kern * f.values[: x_upper + 1], dx=h))


def exp_kernel_cumulative(f: ScalarField, rate: float, sign=KernelSign.FORWARD) -> np.ndarray:
    """``exp_kernel_integral`` at every node, by an O(n) recursion."""
    return _backend.exp_kernel_cumulative(
        np.ascontiguousarray(f.values), f.grid.h, _signed_rate(rate, sign)
    )
