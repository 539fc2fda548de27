"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class WaveStabError(Exception):
    """Base class for all package errors."""


class ParamViolation(WaveStabError, ValueError):
    """A design parameter tuple lies outside its admissible region.

    ``inequality`` holds the text of the first violated condition.
    """

    def __init__(self, inequality: str, value: float | None = None):
        self.inequality = inequality
        self.value = value
        msg = f"parameter condition violated: {inequality}"
        if value is not None:
            msg += f" (got {value:.6g})"
        super().__init__(msg)


class CflViolation(WaveStabError, ValueError):
    def __init__(self, dt: float, h: float):
        self.dt = dt
        self.h = h
        super().__init__(f"CFL condition dt <= h violated: dt={dt:.6g}, h={h:.6g}")


class NonFinite(WaveStabError, FloatingPointError):
    """A step produced NaN/Inf samples. ``t`` is the time of the failed step, if known."""

    def __init__(self, what: str, t: float | None = None):
        self.what = what
        self.t = t
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(f"non-finite values in {what}{where}")


class Incompatible(WaveStabError, ValueError):
    """Initial data violate one or more compatibility identities.

    ``residuals`` maps the identity name to its residual value.
    """

    def __init__(self, residuals: dict[str, float]):
        self.residuals = dict(residuals)
        parts = ", ".join(f"{k}: residual {v:.6g}" for k, v in self.residuals.items())
        super().__init__(f"incompatible initial data ({parts})")


class VariantMismatch(WaveStabError, ValueError):
    pass


class MissingZ(WaveStabError, ValueError):
    pass


class DegenerateSeries(WaveStabError, ValueError):
    pass
