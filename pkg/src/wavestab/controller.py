"""Observer-based feedback laws and the total disturbance signal.

Everything here is a pure function of boundary traces and observer fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DisturbanceSpec,
    Params,
    ScalarField,
    UncertaintySpec,
    Variant,
    WavePair,
    eval_uncertainty,
    sample_disturbance,
)
from .errors import MissingZ, VariantMismatch

__all__ = [
    "ControlInputs",
    "control_unstable",
    "control_antistable",
    "control_law",
    "total_disturbance",
    "kernel_weights",
    "self_feedback",
]


@dataclass(frozen=True, eq=False)
class ControlInputs:
    """Signals the feedback laws read.

    ``what``/``what_t`` are the observer displacement and velocity fields,
    ``zx1`` = z_x(1), ``Yx1`` = Y_x(1); ``Z1``/``Zx1`` are the auxiliary
    channel traces needed by the anti-stable law only.
    """

    what: ScalarField
    what_t: ScalarField
    zx1: float = 0.0
    Yx1: float = 0.0
    Z1: Optional[float] = None
    Zx1: Optional[float] = None

    @property
    def what1(self) -> float:
        return float(self.what.values[-1])

    @property
    def what_t1(self) -> float:
        return float(self.what_t.values[-1])


def kernel_weights(n: int, q: float) -> np.ndarray:
    """Trapezoid weights of int_0^1 exp(q (1 - xi)) g(xi) dxi on the n-cell mesh."""
    h = 1.0 / n
    xi = np.linspace(0.0, 1.0, n + 1)
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w * np.exp(q * (1.0 - xi))


def control_unstable(inp: ControlInputs, p: Params, weights: Optional[np.ndarray] = None) -> float:
    """Backstepping law for the negative-spring plant.

    u = z_x(1) + Y_x(1) - c3*what_t(1) - (c2+q)*what(1)
        - (c2+q) * int_0^1 exp(q(1-xi)) [c3*what_t + q*what] dxi

    ``weights`` may carry precomputed ``kernel_weights(n, q)``.
    """
    if p.variant is not Variant.UNSTABLE_SPRING:
        raise VariantMismatch("control_unstable needs the unstable-spring variant")
    if weights is None:
        weights = kernel_weights(inp.what.grid.n, p.q)
    k = p.c2 + p.q
    integrand = p.c3 * inp.what_t.values + p.q * inp.what.values
    integral = float(np.dot(weights, integrand))
    return (
        inp.zx1
        + inp.Yx1
        - p.c3 * inp.what_t1
        - k * inp.what1
        - k * integral
    )


def control_antistable(inp: ControlInputs, p: Params) -> float:
    """u = -c3*what(1) - c3*Z(1) + z_x(1) + Y_x(1) - Z_x(1)."""
    if p.variant is not Variant.ANTISTABLE_DAMPER:
        raise VariantMismatch("control_antistable needs the anti-stable variant")
    if inp.Z1 is None or inp.Zx1 is None:
        raise MissingZ("anti-stable law needs Z(1) and Z_x(1)")
    return -p.c3 * inp.what1 - p.c3 * inp.Z1 + inp.zx1 + inp.Yx1 - inp.Zx1


def self_feedback(p: Params, n: int) -> tuple[float, float]:
    """Total coefficients (k_d, k_v) with which a law feeds back what(1) and what_t(1).

    The law is affine in these two node values, u = rest - k_d*what(1) - k_v*what_t(1).
    The trapezoid end weight h/2 of the integral term is included. A time
    stepper that treats these two terms implicitly needs the split.
    """
    if p.variant is Variant.UNSTABLE_SPRING:
        k = p.c2 + p.q
        half = 0.5 / n
        return k * (1.0 + p.q * half), p.c3 * (1.0 + k * half)
    return p.c3, 0.0


def control_law(inp: ControlInputs, p: Params, weights: Optional[np.ndarray] = None) -> float:
    if p.variant is Variant.UNSTABLE_SPRING:
        return control_unstable(inp, p, weights)
    return control_antistable(inp, p)


def total_disturbance(w: WavePair, spec_f: UncertaintySpec, spec_d: DisturbanceSpec, t: float) -> float:
    """F(t) = f(w, w_t) + d(t), the lumped signal entering at x = 1."""
    return eval_uncertainty(spec_f, w) + sample_disturbance(spec_d, t)
