"""Domain types, parameter validation, norms and signal generators.

Fields are sampled at the ``n + 1`` nodes of a uniform mesh on [0, 1].
All value types are frozen; their arrays are marked read-only so a state
can be shared between threads or snapshotted without copying.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ParamViolation

__all__ = [
    "Grid",
    "ScalarField",
    "WavePair",
    "TransportField",
    "Variant",
    "Params",
    "validate_params",
    "ZeroDisturbance",
    "ConstantDisturbance",
    "HarmonicSum",
    "BoundedNoise",
    "L2Decaying",
    "DisturbanceSpec",
    "amplitude_bound",
    "sample_disturbance",
    "ZeroUncertainty",
    "TraceGain",
    "EnergySaturation",
    "MeanSine",
    "UncertaintySpec",
    "eval_uncertainty",
    "energy_norm_sq",
    "h1_norm_sq",
    "ClosedLoopState",
]


# --------------------------------------------------------------------------
# grids and fields
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs an integer cell count n >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)


def _frozen_array(values, size: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"expected {size} nodal samples, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.n + 1))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.n + 1))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        x = grid.nodes
        return cls(grid, np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape))

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return self.values.size

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def scaled(self, lam: float) -> "ScalarField":
        return ScalarField(self.grid, lam * self.values)


@dataclass(frozen=True, eq=False)
class WavePair:
    """Displacement and velocity of one second-order wave subsystem.

    ``ut`` holds the velocity of the last half step. At dt == h the stepper
    also keeps ``cell``, the velocity at the cell midpoints at the current
    level (n values); together with ``u`` it fixes both characteristic
    fields exactly. ``edge`` is (u_x(0), u_x(1)) at the last half step.
    Both are None on initial data and for dt < h.
    """

    u: ScalarField
    ut: ScalarField
    cell: Optional[np.ndarray] = None
    edge: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ValueError("displacement and velocity live on different grids")
        if self.cell is not None:
            object.__setattr__(self, "cell", _frozen_array(self.cell, self.u.grid.n))

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "WavePair":
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_arrays(cls, grid: Grid, u, ut) -> "WavePair":
        return cls(ScalarField(grid, u), ScalarField(grid, ut))

    def scaled(self, lam: float) -> "WavePair":
        cell = None if self.cell is None else lam * self.cell
        edge = None if self.edge is None else (lam * self.edge[0], lam * self.edge[1])
        return WavePair(self.u.scaled(lam), self.ut.scaled(lam), cell, edge)


@dataclass(frozen=True, eq=False)
class TransportField:
    """State of a first-order transport channel f_t = -f_x (W, Y or Z)."""

    f: ScalarField

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def values(self) -> np.ndarray:
        return self.f.values

    @classmethod
    def zeros(cls, grid: Grid) -> "TransportField":
        return cls(ScalarField.zeros(grid))

    @classmethod
    def from_array(cls, grid: Grid, values) -> "TransportField":
        return cls(ScalarField(grid, values))


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


class Variant(str, enum.Enum):
    UNSTABLE_SPRING = "unstable-spring"
    ANTISTABLE_DAMPER = "antistable-damper"


@dataclass(frozen=True)
class Params:
    variant: Variant
    q: float
    c0: float
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))

    # Robin/damping coefficients of the z-subsystem's left end
    @property
    def z_spring(self) -> float:
        return self.c1 / (1.0 - self.c0)

    @property
    def z_damping(self) -> float:
        if self.variant is Variant.UNSTABLE_SPRING:
            return self.c0 / (1.0 - self.c0)
        return (self.c0 - self.q) / (1.0 - self.c0)


def _violations(p: Params) -> list[tuple[str, float]]:
    out = []
    if not all(math.isfinite(v) for v in (p.q, p.c0, p.c1, p.c2, p.c3)):
        return [("all parameters finite", float("nan"))]
    if not p.q > 0:
        out.append(("q > 0", p.q))
    if p.variant is Variant.UNSTABLE_SPRING:
        if not 0 < p.c0 < 1:
            out.append(("0 < c0 < 1", p.c0))
        for name in ("c1", "c2", "c3"):
            val = getattr(p, name)
            if not val > 0:
                out.append((f"{name} > 0", val))
        return out
    if p.q == 1:
        out.append(("q != 1", p.q))
    # ratio conditions; a singular denominator counts as a violation
    if p.c0 == 1:
        out.append(("c1/(1-c0) > 0", float("inf")))
        out.append(("(c0-q)/(1-c0) > 0", float("inf")))
    else:
        r1 = p.c1 / (1 - p.c0)
        if not r1 > 0:
            out.append(("c1/(1-c0) > 0", r1))
        r2 = (p.c0 - p.q) / (1 - p.c0)
        if not r2 > 0:
            out.append(("(c0-q)/(1-c0) > 0", r2))
    if p.c2 == 1:
        out.append(("(c2-q)/(1-c2) > 0", float("inf")))
    else:
        r3 = (p.c2 - p.q) / (1 - p.c2)
        if not r3 > 0:
            out.append(("(c2-q)/(1-c2) > 0", r3))
    if not p.c3 > 0:
        out.append(("c3 > 0", p.c3))
    return out


def validate_params(p: Params) -> Params:
    """Return ``p`` unchanged if it lies in the stabilizing region of its variant.

    Raises :class:`ParamViolation` naming the first violated inequality.
    """
    bad = _violations(p)
    if bad:
        raise ParamViolation(*bad[0])
    return p


# --------------------------------------------------------------------------
# external disturbances d(t)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroDisturbance:
    pass


@dataclass(frozen=True)
class ConstantDisturbance:
    amplitude: float


@dataclass(frozen=True)
class HarmonicSum:
    """d(t) = sum_j theta_j sin(alpha_j t) + vartheta_j cos(alpha_j t)."""

    terms: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(map(float, t)) for t in self.terms))
        if any(len(t) != 3 for t in self.terms):
            raise ValueError("harmonic terms are (theta, vartheta, alpha) triples")


@dataclass(frozen=True)
class BoundedNoise:
    """Seeded piecewise-constant noise, uniform on [-amplitude, amplitude].

    The signal is constant on each interval [k*dt, (k+1)*dt); the value on
    interval k depends only on ``(seed, k)``.
    """

    amplitude: float
    seed: int = 0
    dt: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("noise hold interval dt must be positive")


@dataclass(frozen=True)
class L2Decaying:
    """d(t) = amplitude * exp(-rate t) * sin(5 t); square integrable for rate > 0."""

    amplitude: float
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("L2Decaying needs rate > 0")


DisturbanceSpec = Union[ZeroDisturbance, ConstantDisturbance, HarmonicSum, BoundedNoise, L2Decaying]


def amplitude_bound(spec: DisturbanceSpec) -> float:
    """Sup-norm bound of the disturbance family."""
    if isinstance(spec, ZeroDisturbance):
        return 0.0
    if isinstance(spec, ConstantDisturbance):
        return abs(spec.amplitude)
    if isinstance(spec, HarmonicSum):
        return float(sum(math.hypot(a, b) for a, b, _ in spec.terms))
    if isinstance(spec, (BoundedNoise, L2Decaying)):
        return abs(spec.amplitude)
    raise TypeError(f"unknown disturbance spec {spec!r}")


def sample_disturbance(spec: DisturbanceSpec, t: float) -> float:
    if t < 0:
        raise ValueError("disturbances are defined for t >= 0")
    if isinstance(spec, ZeroDisturbance):
        return 0.0
    if isinstance(spec, ConstantDisturbance):
        return float(spec.amplitude)
    if isinstance(spec, HarmonicSum):
        return float(sum(a * math.sin(w * t) + b * math.cos(w * t) for a, b, w in spec.terms))
    if isinstance(spec, BoundedNoise):
        # small slack so that t = k*dt computed by accumulation lands in interval k
        k = int(math.floor(t / spec.dt + 1e-9))
        rng = np.random.default_rng([spec.seed, k])
        return float(rng.uniform(-abs(spec.amplitude), abs(spec.amplitude)))
    if isinstance(spec, L2Decaying):
        return float(spec.amplitude * math.exp(-spec.rate * t) * math.sin(5.0 * t))
    raise TypeError(f"unknown disturbance spec {spec!r}")


# --------------------------------------------------------------------------
# internal uncertainty f(w, w_t)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroUncertainty:
    pass


@dataclass(frozen=True)
class TraceGain:
    """f = kappa * w(1)."""

    kappa: float


@dataclass(frozen=True)
class EnergySaturation:
    """f = kappa * tanh(s * ||(w, w_t)||^2)."""

    kappa: float
    s: float = 1.0


@dataclass(frozen=True)
class MeanSine:
    """f = kappa * sin(integral of w over [0, 1])."""

    kappa: float


UncertaintySpec = Union[ZeroUncertainty, TraceGain, EnergySaturation, MeanSine]


def eval_uncertainty(spec: UncertaintySpec, s: WavePair) -> float:
    if isinstance(spec, ZeroUncertainty):
        return 0.0
    if isinstance(spec, TraceGain):
        return float(spec.kappa * s.u.values[-1])
    if isinstance(spec, EnergySaturation):
        return float(spec.kappa * math.tanh(spec.s * energy_norm_sq(s)))
    if isinstance(spec, MeanSine):
        return float(spec.kappa * math.sin(np.trapezoid(s.u.values, dx=s.grid.h)))
    raise TypeError(f"unknown uncertainty spec {spec!r}")


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------


def _dx(values: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(values, h, edge_order=2)


def energy_norm_sq(s: WavePair) -> float:
    """Squared H^1 x L^2 norm: integral of phi^2 + phi_x^2 + psi^2 (trapezoid)."""
    h = s.grid.h
    phi = s.u.values
    psi = s.ut.values
    integrand = phi * phi + _dx(phi, h) ** 2 + psi * psi
    return float(np.trapezoid(integrand, dx=h))


def h1_norm_sq(f: Union[TransportField, ScalarField]) -> float:
    sf = f.f if isinstance(f, TransportField) else f
    h = sf.grid.h
    v = sf.values
    return float(np.trapezoid(v * v + _dx(v, h) ** 2, dx=h))


# --------------------------------------------------------------------------
# coupled state
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClosedLoopState:
    """All fields of the closed loop at one completed time level.

    ``w`` plant, ``v``/``W``/``z`` disturbance estimator, ``what``/``Y``
    observer, ``Z`` auxiliary compensator (anti-stable variant only).
    """

    t: float
    w: WavePair
    v: WavePair
    z: WavePair
    what: WavePair
    W: TransportField
    Y: TransportField
    Z: Optional[TransportField] = None
    step: int = field(default=0)

    def __post_init__(self):
        g = self.w.grid
        parts = [self.v, self.z, self.what, self.W, self.Y] + ([self.Z] if self.Z is not None else [])
        if any(p.grid != g for p in parts):
            raise ValueError("closed-loop fields live on different grids")

    @property
    def grid(self) -> Grid:
        return self.w.grid

    def dirichlet_residual(self) -> float:
        """|z(1) - v(1) - W(1) + w(1)|; zero after every completed step."""
        return abs(
            self.z.u.values[-1] - self.v.u.values[-1] - self.W.values[-1] + self.w.u.values[-1]
        )
