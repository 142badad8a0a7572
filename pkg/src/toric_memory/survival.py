"""Survival times of the memory from magnetization-bound curves.

The memory is declared unreliable once the bound drops below 1/sqrt(N)
(prefactor 1, overridable). Crossings are located by linear interpolation
on the evaluation grid; grid density is the accuracy control.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .bound import BoundCurve, BoundEvaluator
from .model import CouplingModel, EnsembleSpec, build_uniform, sample_instance

DEFAULT_POINTS = 200


def time_grid(t_max: float, points: int = DEFAULT_POINTS, kind: str = "linear", t_min: float = 1e-2) -> np.ndarray:
    """Ascending grid starting at 0; ``geometric`` spaces points logarithmically from t_min."""
    if points < 2 or not t_max > 0:
        raise ValueError("need points >= 2 and t_max > 0")
    if kind == "linear":
        return np.linspace(0.0, t_max, points)
    if kind == "geometric":
        return np.concatenate([[0.0], np.geomspace(t_min, t_max, points - 1)])
    raise ValueError(f"unknown grid kind {kind!r}")


def bound_curve(
    model: CouplingModel,
    times: Sequence[float],
    trace: bool = False,
    sites=None,
) -> BoundCurve:
    evaluator = BoundEvaluator(model, sites)
    times = np.asarray(times, dtype=float)
    det, tr, se = [], [], []
    for t in times:
        point = evaluator.evaluate(t, with_trace=trace)
        det.append(point.mean)
        se.append(point.stderr)
        if trace:
            tr.append(point.trace_mean)
    return BoundCurve(times, det, tr if trace else None, se, model.describe())


@dataclass(frozen=True)
class SurvivalResult:
    threshold: float
    crossing_time: Optional[float]
    grid_step: float
    grid_max: float
    model: dict = field(default_factory=dict)

    @property
    def reached(self) -> bool:
        return self.crossing_time is not None


def failure_threshold(n_rows: int, prefactor: float = 1.0) -> float:
    return prefactor / math.sqrt(n_rows)


def survival_time(
    curve: BoundCurve,
    n_rows: Optional[int] = None,
    threshold: Optional[float] = None,
) -> SurvivalResult:
    """First time the det bound drops below the threshold (default 1/sqrt(N))."""
    if len(curve) == 0:
        raise ValueError("empty curve")
    if threshold is None:
        if n_rows is None:
            n_rows = curve.model.get("n_sites")
        if n_rows is None:
            raise ValueError("need n_rows or an explicit threshold")
        threshold = failure_threshold(n_rows)
    t, y = curve.times, curve.det_bound
    step = float(np.max(np.diff(t))) if t.size > 1 else 0.0
    below = np.nonzero(y < threshold)[0]
    crossing = None
    if below.size:
        i = int(below[0])
        if i == 0:
            crossing = float(t[0])
        else:
            t0, t1, y0, y1 = t[i - 1], t[i], y[i - 1], y[i]
            crossing = float(t0 + (y0 - threshold) * (t1 - t0) / (y0 - y1))
    return SurvivalResult(float(threshold), crossing, step, float(t[-1]), curve.model)


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleCurve:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    spec: EnsembleSpec
    instances: Optional[np.ndarray] = None

    def to_csv(self) -> str:
        lines = ["time,mean,stderr"]
        lines += [f"{t:.17g},{m:.17g},{s:.17g}" for t, m, s in zip(self.times, self.mean, self.stderr)]
        return "\n".join(lines) + "\n"


def _instance_curve(args) -> np.ndarray:
    spec, index, times, sites = args
    model = sample_instance(spec, index)
    return bound_curve(model, times, sites=sites).det_bound


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ensemble_curve(
    spec: EnsembleSpec,
    times: Sequence[float],
    keep_instances: bool = False,
    workers: Optional[int] = None,
    sites=None,
) -> EnsembleCurve:
    """Mean and standard error of the bound over ensemble members, per grid time."""
    times = np.asarray(times, dtype=float)
    workers = default_workers() if workers is None else workers
    jobs = [(spec, k, times, sites) for k in range(spec.n_instances)]
    curves = np.array(_map(_instance_curve, jobs, workers))
    mean = curves.mean(axis=0)
    if spec.n_instances > 1:
        stderr = curves.std(axis=0, ddof=1) / math.sqrt(spec.n_instances)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleCurve(times, mean, stderr, spec, curves if keep_instances else None)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# scaling fits


@dataclass(frozen=True)
class ScalingFit:
    """``log``: t* = a + b ln N.  ``power``: t* = a N^gamma (params ``a``, ``gamma``)."""

    form: str
    params: dict
    stderr: dict
    r_squared: float
    residuals: np.ndarray

    def predict(self, n):
        n = np.asarray(n, dtype=float)
        if self.form == "log":
            return self.params["a"] + self.params["b"] * np.log(n)
        return self.params["a"] * n ** self.params["gamma"]


def fit_scaling(points: Mapping[float, Optional[float]], form: str = "log") -> ScalingFit:
    finite = {n: t for n, t in points.items() if t is not None and np.isfinite(t)}
    if len(finite) < 3:
        raise ValueError(f"need at least 3 finite survival times, got {len(finite)}")
    n = np.array(sorted(finite), dtype=float)
    t = np.array([finite[k] for k in sorted(finite)], dtype=float)
    x = np.log(n)
    if form == "log":
        fit = stats.linregress(x, t)
        params = {"a": fit.intercept, "b": fit.slope}
        errs = {"a": fit.intercept_stderr, "b": fit.stderr}
        resid = t - (fit.intercept + fit.slope * x)
        ss_tot = np.sum((t - t.mean()) ** 2)
    elif form == "power":
        if np.any(t <= 0):
            raise ValueError("power fits need positive survival times")
        y = np.log(t)
        fit = stats.linregress(x, y)
        a = math.exp(fit.intercept)
        params = {"a": a, "gamma": fit.slope}
        errs = {"a": a * fit.intercept_stderr, "gamma": fit.stderr}
        resid = y - (fit.intercept + fit.slope * x)
        ss_tot = np.sum((y - y.mean()) ** 2)
    else:
        raise ValueError(f"unknown form {form!r}")
    r2 = 1.0 if ss_tot == 0 else float(1 - np.sum(resid**2) / ss_tot)
    r2 = min(1.0, max(0.0, r2))
    return ScalingFit(form, {k: float(v) for k, v in params.items()}, {k: float(v) for k, v in errs.items()}, r2, resid)


def scaling_table(
    sizes: Sequence[int],
    field: float,
    grid_for,
    coupling: float = 1.0,
    prefactor: float = 1.0,
) -> dict[int, SurvivalResult]:
    """Survival results for uniform rings of the given sizes; ``grid_for(N)`` supplies each time grid."""
    out = {}
    for n in sizes:
        model = build_uniform(int(n), coupling, field)
        curve = bound_curve(model, grid_for(int(n)))
        out[int(n)] = survival_time(curve, threshold=failure_threshold(int(n), prefactor))
    return out
