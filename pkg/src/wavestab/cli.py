"""Scenario files, batch runs, sweeps and reports.

Usage::

    wavestab run scenario.json --out results/
    wavestab sweep scenario.json --axis c3 --values 0.5,1,2 --out sweep/
    wavestab oracle-check

Exit codes: 0 ok, 2 rejected scenario (parameters, compatibility or
format), 3 blow-up.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import analysis as A
from . import kernels as K
from .core import (
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
    ZeroDisturbance,
    ZeroUncertainty,
    energy_norm_sq,
    h1_norm_sq,
    validate_params,
)
from .errors import DegenerateSeries, Incompatible, NonFinite, ParamViolation, WaveStabError
from .systems import (
    InitialData,
    VariantConfig,
    check_compatibility,
    closed_loop_step,
    initial_state,
)

__all__ = [
    "Scenario",
    "SimReport",
    "ScenarioError",
    "BlowUp",
    "TRACE_COLUMNS",
    "PRESETS",
    "load_scenario",
    "scenario_from_dict",
    "build_initial_data",
    "run_scenario",
    "run_sweep",
    "write_report",
    "main",
]

TRACE_COLUMNS = (
    "t",
    "u",
    "F",
    "estimate",
    "E_plant",
    "E_observer",
    "E_estimator",
    "E_transport",
    "coupling_residual",
)
PRESETS = ("bump", "cosine", "linear-ramp")
FIT_BLOCKS = ("E_plant", "E_observer", "E_estimator", "E_transport", "E_closed_loop")


class ScenarioError(WaveStabError, ValueError):
    """Malformed scenario document."""


class BlowUp(NonFinite):
    """NonFinite raised by :func:`run_scenario`; ``report`` keeps the traces up to the failure."""

    def __init__(self, cause: NonFinite, report: "SimReport"):
        super().__init__(cause.what, cause.t)
        self.report = report


# ---- scenario ----------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    variant: str = "unstable-spring"
    params: dict = field(default_factory=lambda: {"q": 1.0, "c0": 0.5, "c1": 1.0, "c2": 1.0, "c3": 1.0})
    n: int = 200
    dt: Optional[float] = None
    T: float = 30.0
    initial: dict = field(default_factory=lambda: {"preset": "cosine", "velocity": "zero"})
    disturbance: dict = field(default_factory=lambda: {"kind": "zero"})
    uncertainty: dict = field(default_factory=lambda: {"kind": "zero"})
    outputs: tuple = ("traces", "summary")
    seed: int = 0
    auto_correct_compatibility: bool = False
    control: bool = True

    @property
    def grid(self) -> Grid:
        return Grid(self.n)

    @property
    def step(self) -> float:
        return self.grid.h if self.dt is None else float(self.dt)

    def param_tuple(self) -> Params:  # noqa: D401
        p = self.params
        return Params(Variant(self.variant), p["q"], p["c0"], p["c1"], p["c2"], p["c3"])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["outputs"] = list(self.outputs)
        return d


_SCENARIO_KEYS = {f.name for f in dataclasses.fields(Scenario)}
_PARAM_KEYS = {"q", "c0", "c1", "c2", "c3"}
_DISTURBANCE_KEYS = {
    "zero": set(),
    "constant": {"amplitude"},
    "harmonic": {"terms"},
    "noise": {"amplitude", "seed", "hold"},
    "l2": {"amplitude", "rate"},
}
_UNCERTAINTY_KEYS = {
    "zero": set(),
    "trace-gain": {"kappa"},
    "energy-saturation": {"kappa", "s"},
    "mean-sine": {"kappa"},
}
_INITIAL_KEYS = {"preset", "velocity", "amplitude", "fields"}
_FIELD_KEYS = {"w0", "w1", "v0", "v1", "z0", "z1", "what0", "what1", "W0", "Y0", "Z0"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be a JSON object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(extra)}")


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a scenario document (unknown keys are rejected) and build a Scenario."""
    _reject_unknown(doc, _SCENARIO_KEYS, "scenario")
    sc = Scenario(**doc)
    _reject_unknown(sc.params, _PARAM_KEYS, "params")
    missing = _PARAM_KEYS - set(sc.params)
    if missing:
        raise ScenarioError(f"params missing {', '.join(sorted(missing))}")
    try:
        Variant(sc.variant)
    except ValueError as exc:
        raise ScenarioError(f"unknown variant {sc.variant!r}") from exc
    if not isinstance(sc.n, int) or isinstance(sc.n, bool) or sc.n < 4:
        raise ScenarioError("n must be an integer >= 4")
    if not (isinstance(sc.T, (int, float)) and sc.T > 0):
        raise ScenarioError("T must be positive")
    _reject_unknown(sc.initial, _INITIAL_KEYS, "initial")
    if "fields" in sc.initial:
        _reject_unknown(sc.initial["fields"], _FIELD_KEYS, "initial.fields")
    elif sc.initial.get("preset", "cosine") not in PRESETS:
        raise ScenarioError(f"unknown preset {sc.initial.get('preset')!r}; choose from {', '.join(PRESETS)}")
    if sc.initial.get("velocity", "zero") not in ("zero", "matched"):
        raise ScenarioError("initial.velocity must be 'zero' or 'matched'")
    kind = sc.disturbance.get("kind", "zero")
    if kind not in _DISTURBANCE_KEYS:
        raise ScenarioError(f"unknown disturbance kind {kind!r}")
    _reject_unknown(sc.disturbance, _DISTURBANCE_KEYS[kind] | {"kind"}, "disturbance")
    kind = sc.uncertainty.get("kind", "zero")
    if kind not in _UNCERTAINTY_KEYS:
        raise ScenarioError(f"unknown uncertainty kind {kind!r}")
    _reject_unknown(sc.uncertainty, _UNCERTAINTY_KEYS[kind] | {"kind"}, "uncertainty")
    outs = tuple(sc.outputs)
    if not set(outs) <= {"traces", "summary"}:
        raise ScenarioError("outputs may only contain 'traces' and 'summary'")
    return replace(sc, outputs=outs)


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def disturbance_spec(sc: Scenario):
    d = sc.disturbance
    kind = d.get("kind", "zero")
    if kind == "zero":
        return ZeroDisturbance()
    if kind == "constant":
        return ConstantDisturbance(float(d["amplitude"]))
    if kind == "harmonic":
        return HarmonicSum(tuple(tuple(t) for t in d["terms"]))
    if kind == "noise":
        hold = d.get("hold", sc.step)
        return BoundedNoise(float(d["amplitude"]), int(d.get("seed", sc.seed)), float(hold))
    return L2Decaying(float(d["amplitude"]), float(d["rate"]))


def uncertainty_spec(sc: Scenario):
    u = sc.uncertainty
    kind = u.get("kind", "zero")
    if kind == "zero":
        return ZeroUncertainty()
    if kind == "trace-gain":
        return TraceGain(float(u["kappa"]))
    if kind == "energy-saturation":
        return EnergySaturation(float(u["kappa"]), float(u.get("s", 1.0)))
    return MeanSine(float(u["kappa"]))


# ---- initial data ------------------------------------------------------------------------


def _profile(name: str, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi, phi') of a preset."""
    if name == "cosine":
        return np.cos(np.pi * x), -np.pi * np.sin(np.pi * x)
    if name == "linear-ramp":
        return x.copy(), np.ones_like(x)
    # smooth bump supported on (0.25, 0.75)
    r = (x - 0.5) / 0.25
    phi = np.zeros_like(x)
    dphi = np.zeros_like(x)
    m = np.abs(r) < 1
    rr = r[m]
    g = np.exp(1.0 - 1.0 / (1.0 - rr * rr))
    phi[m] = g
    dphi[m] = g * (-2.0 * rr / (1.0 - rr * rr) ** 2) / 0.25
    return phi, dphi


def build_initial_data(sc: Scenario) -> InitialData:
    """Initial data of a scenario.

    A preset sets the plant displacement to the named profile (times
    ``amplitude``) and the velocity to zero or, for ``matched``, to the
    right-going value -phi'. Estimator and observer start at rest; the
    transport channels and z0 then take the values that make the data
    compatible. Explicit ``fields`` are used as given unless
    ``auto_correct_compatibility`` is set.
    """
    g = sc.grid
    p = sc.param_tuple()
    ini = sc.initial
    zero = ScalarField.zeros(g)
    anti = p.variant is Variant.ANTISTABLE_DAMPER
    if "fields" in ini:
        f = ini["fields"]

        def get(name):
            if name not in f:
                return zero
            try:
                return ScalarField(g, f[name])
            except ValueError as exc:
                raise ScenarioError(f"initial.fields.{name}: {exc}") from exc

        init = InitialData(
            *(get(k) for k in ("w0", "w1", "v0", "v1", "z0", "z1", "what0", "what1", "W0", "Y0")),
            Z0=(get("Z0") if anti else None),
        )
        return check_compatibility(init, p, auto_correct=sc.auto_correct_compatibility)
    amp = float(ini.get("amplitude", 1.0))
    phi, dphi = _profile(ini.get("preset", "cosine"), g.nodes)
    w0 = ScalarField(g, amp * phi)
    w1 = ScalarField(g, -amp * dphi) if ini.get("velocity", "zero") == "matched" else zero
    init = InitialData(w0, w1, zero, zero, zero, zero, zero, zero, zero, zero, zero if anti else None)
    return check_compatibility(init, p, auto_correct=True)


# ---- running ------------------------------------------------------------------------------


@dataclass(eq=False)
class SimReport:
    scenario: Scenario
    traces: dict
    summary: dict

    def __len__(self):
        return len(self.traces["t"])


def _coupling_residual(s, p: Params) -> float:
    r = [
        s.z.u.values[-1] - s.v.u.values[-1] - s.W.values[-1] + s.w.u.values[-1],
        s.W.values[0] + p.c0 * (s.v.u.values[0] - s.w.u.values[0]),
        s.Y.values[0] + p.c0 * (s.what.u.values[0] - s.w.u.values[0]),
    ]
    if s.Z is not None:
        r.append(s.Z.values[0] + p.c2 * s.what.u.values[0])
    return float(max(abs(x) for x in r))


def _energies(s) -> tuple[float, float, float, float]:
    e_est = energy_norm_sq(s.v) + energy_norm_sq(s.z) + h1_norm_sq(s.W)
    e_tr = h1_norm_sq(s.Y) + (h1_norm_sq(s.Z) if s.Z is not None else 0.0)
    return energy_norm_sq(s.w), energy_norm_sq(s.what), e_est, e_tr


def summarize(traces: dict, T: float, status: str, runtime: Optional[float] = None) -> dict:
    """Summary statistics, computed from the (decimated) trace columns only."""
    t = np.asarray(traces["t"], dtype=float)
    fits: dict[str, Any] = {}
    cols = {k: np.asarray(traces[k], dtype=float) for k in TRACE_COLUMNS}
    cols["E_closed_loop"] = cols["E_plant"] + cols["E_observer"] + cols["E_transport"]
    for name in FIT_BLOCKS:
        try:
            fits[name] = A.fit_decay(A.TimeSeries(t, cols[name])).as_dict()
        except (DegenerateSeries, ValueError, ZeroDivisionError) as exc:
            fits[name] = {"degenerate": str(exc)}
        else:
            if not np.any(cols[name] > 0):
                fits[name] = {"degenerate": "identically zero"}
    err = A.TimeSeries(t, cols["F"] - cols["estimate"]) if t.size else None
    tails = {}
    for label, t0 in (("from_0", 0.0), ("from_T/2", 0.5 * T)):
        try:
            tails[label] = A.l2_tail(err, t0) if err is not None and t.size > 1 and t0 < t[-1] else 0.0
        except ValueError:
            tails[label] = 0.0
    out = {
        "status": status,
        "steps_recorded": int(t.size),
        "decay_fits": fits,
        "l2_estimation_error": tails,
        "max_coupling_residual": float(np.max(np.abs(cols["coupling_residual"]))) if t.size else 0.0,
        "max_energy": {k: (float(np.max(cols[k])) if t.size else 0.0) for k in FIT_BLOCKS},
    }
    if runtime is not None:
        out["runtime_s"] = runtime
    return out


def run_scenario(sc: Scenario, decimate: int = 1, record_runtime: bool = False) -> SimReport:
    """Validate, simulate and summarize one scenario.

    Raises ParamViolation or Incompatible before any stepping, and
    :class:`BlowUp` (a NonFinite) with the partial report on blow-up.
    ``record_runtime`` adds wall time to the summary; it is off by default
    so repeated runs give identical summaries.
    """
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    p = validate_params(sc.param_tuple())
    grid = sc.grid
    sizes = K.StepSizes(sc.step, grid).check()
    cfg = VariantConfig(p, sizes, uncertainty_spec(sc), disturbance_spec(sc), control_enabled=sc.control)
    init = build_initial_data(sc)
    state = initial_state(init, cfg)
    steps = int(round(sc.T / sizes.dt))
    cols: dict[str, list] = {k: [] for k in TRACE_COLUMNS}
    start = time.perf_counter()
    status = "ok"
    failure: Optional[NonFinite] = None
    # overflow is detected and reported below, not warned about
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            try:
                new, tr = closed_loop_step(state, cfg)
            except NonFinite as exc:
                status, failure = "blow-up", exc
                break
            if k % decimate == 0:
                e = _energies(state)
                row = (tr.t, tr.u, tr.F, tr.estimate, *e, _coupling_residual(state, p))
                if not all(math.isfinite(x) for x in row):
                    status, failure = "blow-up", NonFinite("energy", tr.t)
                    break
                for key, val in zip(TRACE_COLUMNS, row):
                    cols[key].append(float(val))
            state = new
    runtime = time.perf_counter() - start if record_runtime else None
    report = SimReport(sc, cols, summarize(cols, sc.T, status, runtime))
    if failure is not None:
        raise BlowUp(failure, report)
    return report


def _sweep_item(sc: Scenario, decimate: int):
    try:
        return run_scenario(sc, decimate)
    except BlowUp as exc:
        return exc.report
    except (WaveStabError, ValueError) as exc:
        return exc


def _with_axis(base: Scenario, axis: str, value) -> Scenario:
    if axis in _PARAM_KEYS:
        return replace(base, params={**base.params, axis: float(value)}, name=f"{base.name}[{axis}={value}]")
    if axis in ("n", "seed"):
        return replace(base, **{axis: int(value)}, name=f"{base.name}[{axis}={value}]")
    if axis in ("T", "dt"):
        return replace(base, **{axis: float(value)}, name=f"{base.name}[{axis}={value}]")
    raise ScenarioError(f"cannot sweep over {axis!r}")


def run_sweep(base: Scenario, axis: str, values: Sequence, workers: int = 1, decimate: int = 1) -> list:
    """One run per value. Failures come back in place as exceptions (blow-ups as partial reports).

    With ``workers > 1`` runs go to a process pool; the result order always
    follows ``values``.
    """
    items = [_with_axis(base, axis, v) for v in values]
    if workers <= 1 or len(items) <= 1:
        return [_sweep_item(s, decimate) for s in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_item, items, [decimate] * len(items)))


# ---- output -----------------------------------------------------------------------------


def traces_csv(report: SimReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(TRACE_COLUMNS)
    cols = [report.traces[k] for k in TRACE_COLUMNS]
    for row in zip(*cols):
        wr.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def read_traces(path) -> dict:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data: dict[str, list] = {k: [] for k in header}
        for row in rd:
            for k, x in zip(header, row):
                data[k].append(float(x))
    return data


def write_report(report: SimReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if "traces" in report.scenario.outputs:
        (out / "traces.csv").write_text(traces_csv(report))
    if "summary" in report.scenario.outputs:
        doc = {"scenario": report.scenario.to_dict(), **report.summary}
        (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---- oracle suite -----------------------------------------------------------------------


def oracle_checks() -> list[tuple[str, bool, str]]:
    """Quick built-in checks of the exact oracles; (name, passed, detail) per check."""
    out = []
    # transport against the closed-form solution
    g = Grid(50)
    sz = K.StepSizes.default(g)
    f0 = ScalarField(g, np.sin(3 * g.nodes))
    f = TransportField(f0)
    hist = [0.3]
    for k in range(1, 121):
        b = math.cos(0.1 * k)
        hist.append(b)
        f = K.transport_step(f, 2.0 * b, sz)
    orc = A.exact_transport_oracle(A.TimeSeries(np.arange(121) * sz.dt, hist), f0, 2.0, 120 * sz.dt)
    out.append(("transport shift equals closed form", bool(np.array_equal(orc.values, f.values)), ""))
    # pure exponential fit
    t = np.linspace(0, 5, 501)
    fit = A.fit_decay(A.TimeSeries(t, np.exp(-2 * t)), 0.0)
    out.append(("fit_decay exact on e^-2t", abs(fit.mu - 2) < 1e-9 and abs(fit.r2 - 1) < 1e-9, f"mu={fit.mu:.12g}"))
    # standing wave cos(pi x)(cos(pi t) + sin(pi t)), homogeneous Neumann, dt = h/2
    errs = [A.standing_wave_error(n) for n in (50, 100)]
    ratio = errs[0] / errs[1]
    out.append(("standing wave second order", 3.5 <= ratio <= 4.5, f"ratio={ratio:.3f}"))
    # zero state is a fixed point
    sc = Scenario(n=20, T=1.0, initial={"preset": "cosine", "amplitude": 0.0})
    rep = run_scenario(sc)
    zero = all(x == 0.0 for k in TRACE_COLUMNS[1:] for x in rep.traces[k])
    out.append(("zero scenario stays zero", zero, ""))
    return out


# ---- command line -----------------------------------------------------------------------


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(int(tok))
        except ValueError:
            vals.append(float(tok))
    return vals


def _apply_flags(sc: Scenario, args) -> Scenario:
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if args.auto_correct_compat:
        sc = replace(sc, auto_correct_compatibility=True)
    return sc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavestab", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--decimate", type=int, default=1, help="keep every k-th step in traces")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--auto-correct-compat", action="store_true", help="repair incompatible explicit data")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run one scenario")
    r.add_argument("scenario", type=Path)
    s = sub.add_parser("sweep", parents=[common], help="vary one scenario field")
    s.add_argument("scenario", type=Path)
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma-separated list")
    s.add_argument("--workers", type=int, default=1)
    sub.add_parser("oracle-check", help="run the built-in oracle checks")
    return ap


def _run(args) -> int:
    sc = _apply_flags(load_scenario(args.scenario), args)
    out = args.out or Path(sc.name)
    try:
        rep = run_scenario(sc, args.decimate)
        code = 0
    except BlowUp as exc:
        rep, code = exc.report, 3
        print(f"blow-up: {exc}", file=sys.stderr)
    write_report(rep, out)
    fit = rep.summary["decay_fits"]["E_closed_loop"]
    mu = fit.get("mu")
    print(f"{sc.name}: status={rep.summary['status']} mu={mu if mu is None else f'{mu:.4g}'} -> {out}")
    return code


def _sweep(args) -> int:
    base = _apply_flags(load_scenario(args.scenario), args)
    out = args.out or Path(base.name + "-sweep")
    results = run_sweep(base, args.axis, _parse_values(args.values), args.workers, args.decimate)
    index = []
    code = 0
    for i, (val, res) in enumerate(zip(_parse_values(args.values), results)):
        entry: dict[str, Any] = {"axis": args.axis, "value": val}
        if isinstance(res, SimReport):
            write_report(res, out / f"{i:03d}")
            entry.update(status=res.summary["status"], dir=f"{i:03d}")
            if res.summary["status"] != "ok":
                code = max(code, 3)
        else:
            entry.update(status="rejected", error=str(res))
            code = max(code, 2)
        index.append(entry)
        print(f"{args.axis}={val}: {entry['status']}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(index, indent=2) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _run(args)
        if args.cmd == "sweep":
            return _sweep(args)
        ok = True
        for name, passed, detail in oracle_checks():
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        return 0 if ok else 1
    except (ParamViolation, Incompatible, ScenarioError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2
    except NonFinite as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 3
    except (OSError, TypeError, KeyError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
