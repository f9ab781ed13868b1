"""Command-line front end.

    bpskink exact  --q 1 --x0 0 --out kink.csv      # profile CSV + kink.json
    bpskink verify --input kink.csv                 # exit 1 when residuals fail
    bpskink relax  --init perturbed --out relaxed.csv
    bpskink scan   --q 0.1,1,10 --m 0.5,1,2 --out scan.csv

Every flag can also be given in a flat ``key = value`` config file
(``--config run.cfg``); explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .closed_form import alpha_exact, default_grid, default_half_width, kappa_exact, sample
from .core import FieldConfig, Grid, KinkParams, ModelParams, ValidationError, make_grid, simpson
from .dynamics import StepSizeError, bps_residuals, integrate_bps, pq_flow, residual_report
from .energy import energy_density, total_energy
from .relax import DescentError, RelaxConfig, initial_config, relax, verify_bps_convergence

COMMANDS = ("exact", "energy", "verify", "relax", "bps-ivp", "pq-flow", "scan")
PROFILE_COLUMNS = ("x", "kappa", "alpha", "kappa_prime", "alpha_prime", "energy_density", "P", "Q")
SCAN_COLUMNS = ("m", "A", "r", "q", "x0", "sign", "total", "rel_error", "P_max", "Q_max")
SEED_ENV = "BPSKINK_SEED"
DEFAULT_SEED = 20240101

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ParseError(ValidationError):
    pass


def fmt(value: float) -> str:
    return "%.17g" % value


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one invocation.

    The numeric model/kink fields are tuples so that ``scan`` can carry
    value lists; every other command requires exactly one value each.
    """

    command: str
    m: tuple = (1.0,)
    A: tuple = (1.0,)
    r: tuple = (1.0,)
    q: tuple = (1.0,)
    x0: tuple = (0.0,)
    sign: tuple = (1,)
    xmin: Optional[float] = None
    xmax: Optional[float] = None
    n: int = 4001
    tol: Optional[float] = None
    el_tol: float = 1e-3
    out: Optional[str] = None
    input: Optional[str] = None
    P0: float = 1e-3
    Q0: float = 1e-3
    init: str = "perturbed"
    amplitude: float = 0.05
    max_steps: int = 20000
    tol_grad: float = 1e-7
    snapshot_every: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        for name in ("m", "A", "r", "q", "x0", "sign"):
            if len(getattr(self, name)) == 0:
                raise ValidationError(f"empty value list for {name}")
        if self.command != "scan":
            for name in ("m", "A", "r", "q", "x0", "sign"):
                if len(getattr(self, name)) != 1:
                    raise ValidationError(f"--{name} takes a single value for '{self.command}'")

    # config-file round trip
    def to_config(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ",".join(fmt(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                text = fmt(value)
            else:
                text = str(value)
            lines.append(f"{f.name.replace('_', '-')} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict) -> "RunSpec":
        kwargs = {}
        types = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in types:
                raise ValidationError(f"unknown setting {key!r}")
            kwargs[name] = _coerce(name, raw)
        if "command" not in kwargs:
            raise ValidationError("no command given")
        return cls(**kwargs)

    @classmethod
    def from_config(cls, text: str, **overrides) -> "RunSpec":
        return cls.from_mapping({**parse_config(text), **overrides})

    @property
    def model(self) -> ModelParams:
        return ModelParams(self.m[0], self.A[0], self.r[0])

    @property
    def kink(self) -> KinkParams:
        return KinkParams(self.x0[0], self.q[0], int(self.sign[0]))

    def grid_for(self, model: ModelParams, kink: KinkParams) -> Grid:
        L = default_half_width(model, kink)
        lo = kink.x0 - L if self.xmin is None else self.xmin
        hi = kink.x0 + L if self.xmax is None else self.xmax
        return make_grid(lo, hi, self.n)

    def tolerance(self) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-3 if self.command == "relax" else 1e-6


_TUPLE_FLOAT = {"m", "A", "r", "q", "x0"}
_INT = {"n", "max_steps", "snapshot_every", "workers"}
_FLOAT = {"xmin", "xmax", "tol", "el_tol", "P0", "Q0", "amplitude", "tol_grad"}


def _coerce(name: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if name in _TUPLE_FLOAT:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if name == "sign":
            return tuple(int(float(v)) for v in raw.split(",") if v.strip())
        if name in _INT:
            return int(raw)
        if name in _FLOAT:
            return float(raw)
    except ValueError as exc:
        raise ValidationError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_config(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


# --- I/O ---------------------------------------------------------------------

def profile_rows(config: FieldConfig, model: ModelParams):
    kp, ap = config.derivatives()
    dens = energy_density(config.kappa, kp, config.alpha, ap, model)
    P, Q = bps_residuals(config, model)
    cols = (config.x, config.kappa, config.alpha, kp, ap, dens, P, Q)
    return np.column_stack(cols)


def profile_csv(config: FieldConfig, model: ModelParams) -> str:
    buf = io.StringIO()
    buf.write(",".join(PROFILE_COLUMNS) + "\n")
    for row in profile_rows(config, model):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def read_profile(path: str) -> FieldConfig:
    """Load a profile CSV; derivative columns are used when present."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(f"{path}: line 1: empty file") from None
    for required in ("x", "kappa", "alpha"):
        if required not in header:
            raise ParseError(f"{path}: line 1: missing column {required!r}")
    rows = []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
    if len(rows) < 3:
        raise ParseError(f"{path}: need at least 3 data rows, got {len(rows)}")
    data = np.array(rows)
    col = {name: data[:, i] for i, name in enumerate(header)}
    x = col["x"]
    grid = make_grid(x[0], x[-1], len(x))
    if np.max(np.abs(x - grid.x)) > 1e-9 * max(1.0, np.max(np.abs(x))):
        raise ParseError(f"{path}: x column is not a uniform grid")
    if "kappa_prime" in col and "alpha_prime" in col:
        return FieldConfig(grid, col["kappa"], col["alpha"], col["kappa_prime"], col["alpha_prime"])
    return FieldConfig(grid, col["kappa"], col["alpha"])


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def json_text(obj: dict) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _write(path: Optional[str], text: str, stdout) -> None:
    if path is None:
        stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _companion(path: Optional[str], suffix: str = ".json") -> Optional[str]:
    return None if path is None else str(Path(path).with_suffix(suffix))


# --- commands ------------------------------------------------------------------

def exact_summary(model: ModelParams, kink: KinkParams, grid: Grid) -> dict:
    config = sample(grid, model, kink)
    report = total_energy(config, model)
    res = residual_report(config, model)
    dens = energy_density(config.kappa, config.kappa_prime, config.alpha, config.alpha_prime, model)
    out = report.to_dict()
    out.update({
        "energy_density_integral": simpson(dens, grid),
        "rel_error": abs(report.total - model.bound) / model.bound,
        "P_max": res.max_abs["P"],
        "Q_max": res.max_abs["Q"],
        "el_residual_max": res.el_max,
    })
    return out


def cmd_exact(spec: RunSpec, stdout=sys.stdout) -> int:
    model, kink = spec.model, spec.kink
    grid = spec.grid_for(model, kink)
    config = sample(grid, model, kink)
    _write(spec.out, profile_csv(config, model), stdout)
    if spec.out is not None:
        summary = {"m": model.m, "A": model.A, "r": model.r, "q": kink.q, "x0": kink.x0,
                   "sign": kink.sign, "x_min": grid.x_min, "x_max": grid.x_max, "n": grid.n}
        summary.update(exact_summary(model, kink, grid))
        _write(_companion(spec.out), json_text(summary), stdout)
    return EXIT_OK


def _load_or_sample(spec: RunSpec) -> FieldConfig:
    if spec.input:
        return read_profile(spec.input)
    return sample(spec.grid_for(spec.model, spec.kink), spec.model, spec.kink)


def cmd_energy(spec: RunSpec, stdout=sys.stdout) -> int:
    report = total_energy(_load_or_sample(spec), spec.model)
    _write(spec.out, json_text(report.to_dict()), stdout)
    return EXIT_OK


def verify_report(config: FieldConfig, model: ModelParams, tol: float, el_tol: float) -> dict:
    res = residual_report(config, model)
    energy = total_energy(config, model)
    rel = abs(energy.total - model.bound) / model.bound
    out = {
        "el_residual_max": res.el_max,
        "P_max": res.max_abs["P"],
        "Q_max": res.max_abs["Q"],
        "relative_energy_error": rel,
        "tol": tol,
        "el_tol": el_tol,
    }
    out.update(energy.to_dict())
    out["passed"] = bool(res.max_abs["P"] < tol and res.max_abs["Q"] < tol
                         and res.el_max < el_tol and rel < tol)
    return out


def cmd_verify(spec: RunSpec, stdout=sys.stdout) -> int:
    config = _load_or_sample(spec)
    report = verify_report(config, spec.model, spec.tolerance(), spec.el_tol)
    _write(spec.out, json_text(report), stdout)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def seed_from_env() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def cmd_relax(spec: RunSpec, stdout=sys.stdout) -> int:
    model, kink = spec.model, spec.kink
    grid = spec.grid_for(model, kink)
    rng = np.random.default_rng(seed_from_env())
    init = initial_config(spec.init, grid, model, rng, kink, spec.amplitude)
    cfg = RelaxConfig.for_kink(grid, model, kink.x0, max_steps=spec.max_steps,
                               tol_grad=spec.tol_grad, snapshot_every=spec.snapshot_every)
    snap_path = _companion(spec.out, ".snapshots.csv") if spec.snapshot_every else None
    snap_fh = None
    try:
        if snap_path is not None:
            snap_fh = open(snap_path, "w", encoding="utf-8", newline="")
            snap_fh.write("step,x,kappa,alpha\n")

        def snapshot(step, config):
            if snap_fh is None:
                return
            for xi, ki, ai in zip(config.x, config.kappa, config.alpha):
                snap_fh.write(f"{step},{fmt(xi)},{fmt(ki)},{fmt(ai)}\n")

        result = relax(init, model, cfg, snapshot=snapshot)
    finally:
        if snap_fh is not None:
            snap_fh.close()
    _write(spec.out, profile_csv(result.final, model), stdout)
    summary = result.to_dict()
    summary["seed"] = seed_from_env()
    summary["init"] = spec.init
    passed = False
    if result.converged:
        fit = verify_bps_convergence(result, model, spec.tolerance())
        summary.update({f"fit_{k}": v for k, v in fit.to_dict().items()})
        passed = fit.passed
    summary["passed"] = passed
    if spec.out is not None:
        _write(_companion(spec.out), json_text(summary), stdout)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_bps_ivp(spec: RunSpec, stdout=sys.stdout) -> int:
    model, kink = spec.model, spec.kink
    grid = spec.grid_for(model, kink)
    config = integrate_bps(model, kink, grid)
    _write(spec.out, profile_csv(config, model), stdout)
    err_k = float(np.max(np.abs(config.kappa - kappa_exact(grid.x, model, kink))))
    err_a = float(np.max(np.abs(config.alpha - alpha_exact(grid.x, model, kink))))
    passed = max(err_k, err_a) < spec.tolerance()
    if spec.out is not None:
        summary = {"kappa_max_error": err_k, "alpha_max_error": err_a, "tol": spec.tolerance(),
                   "passed": passed}
        _write(_companion(spec.out), json_text(summary), stdout)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_pq_flow(spec: RunSpec, stdout=sys.stdout) -> int:
    model, kink = spec.model, spec.kink
    background = sample(spec.grid_for(model, kink), model, kink)
    report = pq_flow(background, spec.P0, spec.Q0, model)
    buf = io.StringIO()
    buf.write("x,P,Q,norm_sq,eig_min,eig_max\n")
    for row in zip(report.x, report.P_traj, report.Q_traj, report.norm_sq,
                   report.M_eigen_min, report.M_eigen_max):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    _write(spec.out, buf.getvalue(), stdout)
    if spec.out is not None:
        _write(_companion(spec.out), json_text(report.to_dict()), stdout)
    return EXIT_OK if report.decay_verified else EXIT_FAIL


def _scan_point(args):
    spec, (m, A, r, q, x0, sign) = args
    model = ModelParams(m, A, r)
    kink = KinkParams(x0, q, int(sign))
    s = exact_summary(model, kink, spec.grid_for(model, kink))
    return (m, A, r, q, x0, int(sign), s["total"], s["rel_error"], s["P_max"], s["Q_max"])


def scan_points(spec: RunSpec) -> list:
    axes = [sorted(set(v)) for v in (spec.m, spec.A, spec.r, spec.q, spec.x0, spec.sign)]
    points = list(itertools.product(*axes))
    if not points:
        raise ValidationError("empty scan grid")
    return points


def cmd_scan(spec: RunSpec, stdout=sys.stdout) -> int:
    points = scan_points(spec)
    jobs = [(spec, p) for p in points]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    buf = io.StringIO()
    buf.write(",".join(SCAN_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(str(v) if isinstance(v, int) else fmt(v) for v in row) + "\n")
    _write(spec.out, buf.getvalue(), stdout)
    return EXIT_OK


HANDLERS = {
    "exact": cmd_exact,
    "energy": cmd_energy,
    "verify": cmd_verify,
    "relax": cmd_relax,
    "bps-ivp": cmd_bps_ivp,
    "pq-flow": cmd_pq_flow,
    "scan": cmd_scan,
}


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpskink", description="BPS kink construction and checks")
    parser.add_argument("command", choices=COMMANDS)
    add = parser.add_argument
    # every default is None so that config-file values can fill the gaps
    add("--config", help="flat key = value file; flags override it")
    add("--m", help="mass scale (comma list for scan)")
    add("--A", help="kinetic coefficient (comma list for scan)")
    add("--r", help="tension scale (comma list for scan)")
    add("--q", help="kappa amplitude modulus (comma list for scan)")
    add("--x0", help="kink centre (comma list for scan)")
    add("--sign", help="kappa branch, 1 or -1")
    add("--xmin", help="left end of the grid")
    add("--xmax", help="right end of the grid")
    add("--n", help="odd number of grid points")
    add("--tol", help="P/Q and relative-energy tolerance")
    add("--el-tol", help="Euler-Lagrange residual tolerance")
    add("--out", help="output path (CSV); JSON companions use the same stem")
    add("--input", help="profile CSV to verify or evaluate")
    add("--P0", help="initial P for pq-flow")
    add("--Q0", help="initial Q for pq-flow")
    add("--init", choices=("perturbed", "tanh", "bump"), help="relax initial data")
    add("--amplitude", help="perturbation size for --init perturbed")
    add("--max-steps", help="relaxation step limit")
    add("--tol-grad", help="relaxation gradient tolerance")
    add("--snapshot-every", help="write relaxation snapshots every k steps")
    add("--workers", help="worker processes for scan")
    return parser


def spec_from_args(argv=None) -> RunSpec:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc.strerror}") from exc
        values.update(parse_config(text))
    for key, value in vars(args).items():
        if key == "config" or value is None:
            continue
        values[key] = value
    return RunSpec.from_mapping(values)


def main(argv=None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    try:
        spec = spec_from_args(argv)
        return HANDLERS[spec.command](spec, stdout)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (StepSizeError, DescentError) as exc:
        print(f"bpskink: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValidationError, OSError) as exc:
        print(f"bpskink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
