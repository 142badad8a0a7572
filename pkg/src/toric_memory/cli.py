"""Command-line entry point: ``toric-memory <command> [options]``.

Every command accepts ``--config file.json`` whose keys mirror the long flag
names (dashes become underscores); flags given on the command line win.
Outputs go to ``--output`` (default: $TORIC_MEMORY_OUTDIR or the working
directory). Each output file gets a ``<name>.run.json`` sidecar holding the
resolved configuration, from which the file can be regenerated.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure,
4 a validation check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .bound import SingularCovarianceError, gaussian_overlap
from .decoder import row_logical_prob
from .fermion import NumericalError, build_h, front_radius, lightcone_profile, spectral
from .model import CouplingModel, EnsembleSpec, InvalidModelError, build_uniform
from .oracle import (
    ResourceError,
    covariance_of_state,
    exact_magnetization,
    majoranas,
    random_gaussian_state,
)
from .survival import (
    bound_curve,
    ensemble_curve,
    failure_threshold,
    fit_scaling,
    scaling_table,
    survival_time,
    time_grid,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4
OUTDIR_ENV = "TORIC_MEMORY_OUTDIR"
COMMANDS = ("bound-curve", "survival", "scaling", "ensemble", "oracle-check", "decode-sim", "lightcone")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n_sites: int = 100
    coupling: Any = 1.0
    field: Any = 0.2
    model: Optional[dict] = None
    instances: int = 1
    seed: int = 0
    t_max: float = 2000.0
    points: int = 200
    grid: str = "linear"
    trace: bool = False
    sites: Optional[int] = None
    threshold: Optional[float] = None
    prefactor: float = 1.0
    workers: Optional[int] = None
    output: Optional[str] = None
    sizes: list = dc_field(default_factory=lambda: [100, 200, 400, 800, 1600])
    fields: list = dc_field(default_factory=lambda: [0.1, 0.3])
    qs: list = dc_field(default_factory=lambda: [0.1, 0.3, 0.5])
    method: str = "exact"
    shots: int = 10**6
    times: list = dc_field(default_factory=lambda: [5.0, 10.0, 20.0, 50.0])
    eps: float = 1e-3
    tolerance: float = 1e-8

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if data.get("command") not in COMMANDS:
            raise UsageError(f"command must be one of {COMMANDS}")
        return cls(**data)

    def coupling_model(self) -> CouplingModel:
        if self.model is not None:
            return CouplingModel.from_dict(self.model)
        if isinstance(self.coupling, list) or isinstance(self.field, list):
            raise UsageError("interval couplings/fields describe an ensemble; use the ensemble command")
        return build_uniform(self.n_sites, float(self.coupling), float(self.field))

    def ensemble_spec(self) -> EnsembleSpec:
        dist = lambda v: tuple(v) if isinstance(v, list) else float(v)  # noqa: E731
        return EnsembleSpec(self.n_sites, dist(self.coupling), dist(self.field), self.instances, self.seed)

    def time_points(self) -> np.ndarray:
        return time_grid(self.t_max, self.points, self.grid)

    def site_selection(self, model: CouplingModel):
        if self.sites is None or self.sites >= model.n_sites:
            return None
        return 1 + (np.arange(self.sites) * model.n_sites) // self.sites


# ---------------------------------------------------------------------------
# argument parsing


def _range_or_value(text: str):
    parts = text.split(":")
    if len(parts) == 1:
        return float(parts[0])
    if len(parts) == 2:
        return [float(parts[0]), float(parts[1])]
    raise argparse.ArgumentTypeError(f"expected a number or lo:hi, got {text!r}")


def _csv_list(kind):
    def parse(text: str):
        return [kind(x) for x in text.split(",") if x]

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toric-memory", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--output", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes (1 = serial reference run)")
    common.add_argument("--seed", type=int)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--n-sites", type=int)
    model.add_argument("--coupling", type=_range_or_value, help="Delta, or lo:hi for ensembles")
    model.add_argument("--field", type=_range_or_value, help="delta, or lo:hi for ensembles")
    model.add_argument("--model-file", help="JSON model {n_sites, couplings, fields}")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--t-max", type=float)
    grid.add_argument("--points", type=int)
    grid.add_argument("--grid", choices=("linear", "geometric"))
    grid.add_argument("--sites", type=int, help="number of sites to subsample for non-uniform models")

    p = sub.add_parser("bound-curve", parents=[common, model, grid], help="magnetization bound on a time grid")
    p.add_argument("--trace", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("survival", parents=[common, model, grid], help="first crossing of the failure threshold")
    p.add_argument("--threshold", type=float)
    p.add_argument("--prefactor", type=float)

    p = sub.add_parser("scaling", parents=[common, grid], help="survival times over sizes and a log-N fit")
    p.add_argument("--sizes", type=_csv_list(int))
    p.add_argument("--coupling", type=float)
    p.add_argument("--field", type=float)
    p.add_argument("--prefactor", type=float)

    p = sub.add_parser("ensemble", parents=[common, model, grid], help="mean bound over random instances")
    p.add_argument("--instances", type=int)

    p = sub.add_parser("oracle-check", parents=[common], help="validate the bound against exact dynamics")
    p.add_argument("--sizes", type=_csv_list(int))
    p.add_argument("--fields", type=_csv_list(float))
    p.add_argument("--t-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--tolerance", type=float)

    p = sub.add_parser("decode-sim", parents=[common], help="row logical-error probability sweep")
    p.add_argument("--sizes", type=_csv_list(int))
    p.add_argument("--qs", type=_csv_list(float))
    p.add_argument("--method", choices=("exact", "monte_carlo"))
    p.add_argument("--shots", type=int)

    p = sub.add_parser("lightcone", parents=[common, model], help="propagator spreading profiles")
    p.add_argument("--times", type=_csv_list(float))
    p.add_argument("--eps", type=float)
    return parser


_DEFAULTS = {
    "oracle-check": {"sizes": [6, 8, 10], "t_max": 20.0, "points": 50},
    "decode-sim": {"sizes": [5, 6, 11]},
    "scaling": {"field": 0.25, "t_max": 4000.0},
    "lightcone": {"n_sites": 200},
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    data: dict = {"command": args.command, **_DEFAULTS.get(args.command, {})}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        loaded.pop("command", None)
        data.update(loaded)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "model_file")}
    data.update(flags)
    if getattr(args, "model_file", None):
        try:
            data["model"] = json.loads(Path(args.model_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read model file {args.model_file}: {exc}") from exc
    if data.get("output") is None:
        data["output"] = os.environ.get(OUTDIR_ENV, ".")
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output


class Writer:
    def __init__(self, config: RunConfig):
        self.config = config
        self.root = Path(config.output)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        path.write_text(text)
        sidecar = {"version": __version__, "output": name, "config": self.config.to_dict()}
        (self.root / f"{name}.run.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (f"{v:.17g}" if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_bound_curve(cfg: RunConfig, out: Writer) -> int:
    model = cfg.coupling_model()
    curve = bound_curve(model, cfg.time_points(), trace=cfg.trace, sites=cfg.site_selection(model))
    out.write("bound_curve.csv", curve.to_csv())
    out.write("bound_curve.json", curve.to_json() + "\n")
    return EXIT_OK


def cmd_survival(cfg: RunConfig, out: Writer) -> int:
    model = cfg.coupling_model()
    curve = bound_curve(model, cfg.time_points(), sites=cfg.site_selection(model))
    threshold = cfg.threshold if cfg.threshold is not None else failure_threshold(model.n_sites, cfg.prefactor)
    res = survival_time(curve, threshold=threshold)
    out.write("bound_curve.csv", curve.to_csv())
    out.write(
        "survival.json",
        _dump(
            {
                "model": res.model,
                "threshold": res.threshold,
                "crossing_time": res.crossing_time,
                "reached": res.reached,
                "grid_step": res.grid_step,
                "grid_max": res.grid_max,
                "min_bound": float(curve.det_bound.min()),
            }
        ),
    )
    return EXIT_OK


def cmd_scaling(cfg: RunConfig, out: Writer) -> int:
    if isinstance(cfg.field, list) or isinstance(cfg.coupling, list):
        raise UsageError("scaling uses uniform models; give scalar --coupling and --field")
    table = scaling_table(
        cfg.sizes,
        float(cfg.field),
        lambda n: time_grid(cfg.t_max, cfg.points, cfg.grid),
        coupling=float(cfg.coupling),
        prefactor=cfg.prefactor,
    )
    rows = [(n, float(cfg.field), r.crossing_time, r.threshold) for n, r in table.items()]
    out.write("scaling.csv", _table(["N", "delta", "survival_time", "threshold"], rows))
    summary: dict = {"points": {str(n): r.crossing_time for n, r in table.items()}}
    try:
        fit = fit_scaling({n: r.crossing_time for n, r in table.items()}, "log")
        summary["fit"] = {"form": fit.form, "params": fit.params, "stderr": fit.stderr, "r_squared": fit.r_squared}
    except ValueError as exc:
        summary["fit"] = None
        summary["fit_error"] = str(exc)
    out.write("scaling_fit.json", _dump(summary))
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig, out: Writer) -> int:
    spec = cfg.ensemble_spec()
    sites = None
    if cfg.sites is not None and cfg.sites < spec.n_sites:
        sites = 1 + (np.arange(cfg.sites) * spec.n_sites) // cfg.sites
    curve = ensemble_curve(spec, cfg.time_points(), workers=cfg.workers, sites=sites)
    out.write("ensemble.csv", curve.to_csv())
    out.write("ensemble.json", _dump({**spec.to_dict(), "times": curve.times.tolist(), "mean": curve.mean.tolist()}))
    return EXIT_OK


def _overlap_check(rng: np.random.Generator, n_sites: int, trials: int) -> float:
    ops = majoranas(n_sites)
    worst = 0.0
    for _ in range(trials):
        a = random_gaussian_state(n_sites, rng, ops)
        b = random_gaussian_state(n_sites, rng, ops)
        exact = abs(np.vdot(a, b)) ** 2
        got = gaussian_overlap(covariance_of_state(a, ops), covariance_of_state(b, ops))
        worst = max(worst, abs(got - exact))
    return worst


def cmd_oracle_check(cfg: RunConfig, out: Writer) -> int:
    times = np.linspace(0.0, cfg.t_max, cfg.points)
    rows = []
    worst_margin = -np.inf
    for n in cfg.sizes:
        for delta in cfg.fields:
            model = build_uniform(int(n), 1.0, float(delta))
            exact = exact_magnetization(model, times)
            bound = bound_curve(model, times).det_bound
            margin = float(np.max(exact - bound))
            worst_margin = max(worst_margin, margin)
            rows.append((int(n), float(delta), margin, int(np.sum(exact > bound + cfg.tolerance))))
    rng = np.random.default_rng(cfg.seed)
    overlap_err = max(_overlap_check(rng, n, 10) for n in (1, 2, 3))
    out.write("oracle_check.csv", _table(["N", "delta", "max_margin", "violations"], rows))
    violations = sum(r[3] for r in rows)
    ok = violations == 0 and overlap_err <= 1e-9
    report = {
        "max_violation_margin": worst_margin,
        "violations": violations,
        "overlap_max_error": overlap_err,
        "passed": ok,
    }
    out.write("oracle_check.json", _dump(report))
    print(f"max bound-violation margin {worst_margin:.3e} ({violations} violations); overlap error {overlap_err:.2e}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_decode_sim(cfg: RunConfig, out: Writer) -> int:
    rows = []
    for n in cfg.sizes:
        for q in cfg.qs:
            est = row_logical_prob(float(q), int(n), cfg.method, cfg.shots, cfg.seed)
            rows.append((float(q), int(n), est.value, est.stderr))
    out.write("decode_sim.csv", _table(["q", "N", "p", "stderr"], rows))
    return EXIT_OK


def cmd_lightcone(cfg: RunConfig, out: Writer) -> int:
    model = cfg.coupling_model()
    spec = spectral(build_h(model))
    profiles, radii = [], []
    for t in cfg.times:
        prof = lightcone_profile(model, float(t), spec)
        profiles += [(float(t), d, float(a)) for d, a in enumerate(prof)]
        radii.append((float(t), front_radius(prof, cfg.eps)))
    out.write("lightcone.csv", _table(["time", "distance", "amplitude"], profiles))
    out.write("front_radius.csv", _table(["time", "radius"], radii))
    return EXIT_OK


HANDLERS = {
    "bound-curve": cmd_bound_curve,
    "survival": cmd_survival,
    "scaling": cmd_scaling,
    "ensemble": cmd_ensemble,
    "oracle-check": cmd_oracle_check,
    "decode-sim": cmd_decode_sim,
    "lightcone": cmd_lightcone,
}


def run(config: RunConfig) -> int:
    return HANDLERS[config.command](config, Writer(config))


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return run(config)
    except (NumericalError, SingularCovarianceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, InvalidModelError, ResourceError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
