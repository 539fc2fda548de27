"""Decay fits, L2 tails, the Lyapunov diagnostic and exact-solution oracles.

All functions are pure. Time series are plain (t, values) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels as K
from .core import ClosedLoopState, Grid, Params, ScalarField, WavePair
from .errors import DegenerateSeries

__all__ = [
    "TimeSeries",
    "DecayFit",
    "WindowCheck",
    "LOG_FLOOR",
    "fit_decay",
    "l2_tail",
    "lyapunov_rho",
    "vtilde",
    "vtilde_boundary_rate",
    "rho_inequality_windows",
    "rho_diagnostic_run",
    "exact_transport_oracle",
    "estimation_error_series",
    "ztilde_from_state",
    "ztilde_direct",
    "standing_wave_error",
]

LOG_FLOOR = 1e-30
MIN_FIT_SAMPLES = 10


@dataclass(frozen=True, eq=False)
class TimeSeries:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("time series needs 1-D t and values of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("sample times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.t.size

    def window(self, start: float, end: float = math.inf) -> "TimeSeries":
        m = (self.t >= start) & (self.t <= end)
        return TimeSeries(self.t[m], self.values[m])


@dataclass(frozen=True)
class DecayFit:
    """values ~ M exp(-mu t) on ``window``; ``floored`` marks samples raised to LOG_FLOOR."""

    M: float
    mu: float
    r2: float
    window: tuple[float, float]
    floored: bool = False

    def as_dict(self) -> dict:
        return {"M": self.M, "mu": self.mu, "r2": self.r2, "window": list(self.window), "floored": self.floored}


def fit_decay(series: TimeSeries, transient_skip: Optional[float] = None, end: Optional[float] = None) -> DecayFit:
    """Least squares of ln(values) against t after dropping the transient.

    ``transient_skip`` defaults to a quarter of the covered time span. The
    fit window is [t0 + skip, end]. A constant series has r2 = 1 by
    convention (the line fits exactly).
    """
    t_all, v_all = series.t, series.values
    if t_all.size == 0:
        raise DegenerateSeries("empty series")
    t0 = float(t_all[0])
    if transient_skip is None:
        transient_skip = 0.25 * (float(t_all[-1]) - t0)
    start = t0 + transient_skip
    stop = float(t_all[-1]) if end is None else float(end)
    m = (t_all >= start - 1e-12) & (t_all <= stop + 1e-12)
    t, v = t_all[m], v_all[m]
    if t.size < MIN_FIT_SAMPLES:
        raise DegenerateSeries(f"{t.size} samples in the fit window, need {MIN_FIT_SAMPLES}")
    if not np.all(np.isfinite(v)):
        raise DegenerateSeries("non-finite samples in the fit window")
    floored = bool(np.any(v < LOG_FLOOR))
    y = np.log(np.maximum(v, LOG_FLOOR))
    tc = t - t.mean()
    stt = float(np.dot(tc, tc))
    slope = float(np.dot(tc, y - y.mean()) / stt)
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (intercept + slope * t)
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    ss_res = float(np.dot(resid, resid))
    if ss_tot <= 1e-28 * max(1.0, float(np.dot(y, y))):
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return DecayFit(math.exp(intercept), -slope, r2, (float(t[0]), float(t[-1])), floored)


def l2_tail(series: TimeSeries, T: float, T_end: Optional[float] = None) -> float:
    """Trapezoid value of int_T^{T_end} s(t)^2 dt (T_end defaults to the last sample)."""
    t, s = series.t, series.values
    if T_end is None:
        T_end = float(t[-1])
    if not T < T_end:
        raise ValueError(f"need T < T_end, got T={T}, T_end={T_end}")
    m = (t >= T - 1e-12) & (t <= T_end + 1e-12)
    if m.sum() < 2:
        return 0.0
    return float(np.trapezoid(s[m] ** 2, t[m]))


# ---- Lyapunov diagnostic -------------------------------------------------------


def lyapunov_rho(v: WavePair) -> float:
    """rho = 2 int_0^1 (x - 1) v_t v_x dx with the quadrature and derivative of ``energy_norm_sq``.

    Because both use the same nodal weights and |x - 1| <= 1, the discrete
    bound |rho| <= energy_norm_sq(v) holds exactly (Cauchy-Schwarz).
    """
    g = v.grid
    x = g.nodes
    ux = np.gradient(v.u.values, g.h, edge_order=2)
    return float(np.trapezoid(2.0 * (x - 1.0) * v.ut.values * ux, dx=g.h))


def vtilde(state: ClosedLoopState) -> WavePair:
    """vtilde = v - w + W at the current level, velocity sampled at the level too.

    At dt == h the cell-midpoint velocities are averaged onto the nodes; W
    contributes W_t = -W_x. Without cell data the stored half-step
    velocities are used.
    """
    g = state.grid
    h = g.h
    W = state.W.values
    u = state.v.u.values - state.w.u.values + W
    if state.v.cell is not None and state.w.cell is not None:
        c = state.v.cell - state.w.cell - np.diff(W) / h
        psi = np.empty_like(u)
        psi[1:-1] = 0.5 * (c[1:] + c[:-1])
        psi[0], psi[-1] = c[0], c[-1]
    else:
        psi = state.v.ut.values - state.w.ut.values - np.gradient(W, h, edge_order=2)
    return WavePair.from_arrays(g, u, psi)


def vtilde_boundary_rate(old: ClosedLoopState, new: ClosedLoopState) -> float:
    """vtilde_t(0) over the step old -> new, as the boundary rows saw it."""
    dt = new.t - old.t
    return float(new.v.ut.values[0] - new.w.ut.values[0] + (new.W.values[0] - old.W.values[0]) / dt)


class WindowCheck(NamedTuple):
    violations: int
    windows: int
    worst: float  # largest violation relative to the window's right-hand side

    @property
    def fraction(self) -> float:
        return self.violations / self.windows if self.windows else 0.0


def rho_inequality_windows(
    rho: TimeSeries, energy: TimeSeries, rate0: TimeSeries, window: float = 1.0
) -> WindowCheck:
    """Check rho(b) - rho(a) >= int_a^b [vt_t(0)^2 - E] on consecutive windows [a, b].

    ``rho`` and ``energy`` (int vt_x^2 + vt_t^2) are sampled at the levels,
    ``rate0`` holds vt_t(0) over each step and is labelled with the step's
    start time. The pointwise inequality is not checked: differentiating rho
    on the grid is noise-dominated.
    """
    t = rho.t
    if t.size < 2:
        return WindowCheck(0, 0, 0.0)
    dt = float(t[1] - t[0])
    m = int(round(window / dt))
    if m < 1:
        raise ValueError("window shorter than one step")
    viol = windows = 0
    worst = 0.0
    r, e, b = rho.values, energy.values, rate0.values
    for a in range(0, t.size - m, m):
        lhs = r[a + m] - r[a]
        rhs = dt * float(np.sum(b[a : a + m] ** 2)) - float(np.trapezoid(e[a : a + m + 1], dx=dt))
        windows += 1
        if lhs < rhs:
            viol += 1
            worst = max(worst, (rhs - lhs) / max(abs(rhs), 1e-300))
    return WindowCheck(viol, windows, worst)


def rho_diagnostic_run(state: ClosedLoopState, cfg, steps: int) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Step the closed loop and record (rho, E, vt_t(0)) for :func:`rho_inequality_windows`.

    E is int vt_x^2 + vt_t^2 of vtilde at each level; ``cfg`` is a
    ``systems.VariantConfig``.
    """
    from .systems import closed_loop_step

    h = state.grid.h
    t, rho, en, rate = [], [], [], []
    for _ in range(steps):
        vt = vtilde(state)
        ux = np.gradient(vt.u.values, h, edge_order=2)
        t.append(state.t)
        rho.append(lyapunov_rho(vt))
        en.append(float(np.trapezoid(ux * ux + vt.ut.values ** 2, dx=h)))
        new, _ = closed_loop_step(state, cfg)
        rate.append(vtilde_boundary_rate(state, new))
        state = new
    tt = np.array(t)
    return TimeSeries(tt, rho), TimeSeries(tt, en), TimeSeries(tt, rate)


# ---- oracles ---------------------------------------------------------------------


def exact_transport_oracle(boundary_history: TimeSeries, f0: ScalarField, coeff: float, t: float) -> ScalarField:
    """Closed-form solution of f_t = -f_x, f(0, s) = coeff*history(s), f(x, 0) = f0(x).

    f(x, t) = coeff*history(t - x) where t > x, f0(x - t) elsewhere. Samples
    that fall on the history grid or the mesh are read exactly, others
    interpolated linearly.
    """
    g = f0.grid
    x = g.nodes
    h = g.h
    ht, hv = boundary_history.t, boundary_history.values
    if ht.size == 0 or ht[0] > 1e-12 or ht[-1] < t - 1e-9 * max(1.0, t):
        raise ValueError("boundary history must cover [0, t]")
    dth = float(ht[1] - ht[0]) if ht.size > 1 else h
    out = np.empty(g.n + 1)
    tol = 1e-9
    for i, xi in enumerate(x):
        if t > xi + tol * h:
            s = t - xi
            j = int(round(s / dth))
            if abs(j * dth - s) <= tol * dth and 0 <= j < ht.size:
                out[i] = coeff * hv[j]
            else:
                out[i] = coeff * float(np.interp(s, ht, hv))
        else:
            y = xi - t
            k = int(round(y / h))
            if abs(k * h - y) <= tol * h:
                out[i] = f0.values[k]
            else:
                out[i] = float(np.interp(y, x, f0.values))
    return ScalarField(g, out)


def estimation_error_series(report) -> TimeSeries:
    """F + z_x(1) = F - estimate from a report's traces (``t``, ``F``, ``estimate``)."""
    tr = report.traces
    return TimeSeries(tr["t"], np.asarray(tr["F"]) - np.asarray(tr["estimate"]))


def ztilde_from_state(state: ClosedLoopState) -> WavePair:
    """ztilde = z - vtilde, with cell velocities when the state has them."""
    vt = vtilde(state)
    g = state.grid
    u = state.z.u.values - vt.u.values
    ut = state.z.ut.values - (state.v.ut.values - state.w.ut.values)
    cell = None
    if state.z.cell is not None and state.v.cell is not None and state.w.cell is not None:
        cell = state.z.cell - (state.v.cell - state.w.cell - np.diff(state.W.values) / g.h)
    return WavePair(ScalarField(g, u), ScalarField(g, ut), cell)


def ztilde_direct(zt0: WavePair, p: Params, sizes: K.StepSizes, steps: int) -> TimeSeries:
    """Step the z-tilde error system on its own and return ztilde_x(1) per step.

    Rows: the z left row and ztilde(1) = 0. Each sample is labelled with the
    start time of its step, like the loop traces. Cell velocities of
    ``zt0``, if present, are kept.
    """
    bc = K.WaveBC(K.MixedVelocityDisplacement(p.z_spring, p.z_damping), K.Dirichlet(0.0))
    s = WavePair(zt0.u, K.stagger_velocity(zt0.u, zt0.ut, bc, sizes), zt0.cell, zt0.edge)
    out = np.empty(steps)
    for k in range(steps):
        s = K.wave_step(s, bc, sizes)
        out[k] = K.edge_flux(s, K.Side.RIGHT)
    return TimeSeries(np.arange(steps) * sizes.dt, out)


def standing_wave_error(n: int, courant: float = 0.5, T: float = 1.0) -> float:
    """Max-norm error at T of the Neumann standing wave cos(pi x)(cos(pi t) + sin(pi t)).

    The sine part keeps the phase error visible at T = 1, where cos(pi t)
    alone sits at an extremum and hides it to fourth order.
    """
    g = Grid(n)
    s = K.StepSizes(courant * g.h, g)
    x = g.nodes
    u0 = ScalarField(g, np.cos(np.pi * x))
    u1 = ScalarField(g, np.pi * np.cos(np.pi * x))
    pair = WavePair(u0, K.stagger_velocity(u0, u1, K.NEUMANN0, s))
    for _ in range(int(round(T / s.dt))):
        pair = K.wave_step(pair, K.NEUMANN0, s)
    exact = np.cos(np.pi * x) * (math.cos(np.pi * T) + math.sin(np.pi * T))
    return float(np.max(np.abs(pair.u.values - exact)))
