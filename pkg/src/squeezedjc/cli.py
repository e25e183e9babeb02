"""Command-line front end.

    squeezedjc bn       --b 2 --out run/
    squeezedjc revival  --config run.json --svg --compare-jcm
    squeezedjc evolve   --a 10 --b 2 --r 0.1 --t-max 30
    squeezedjc validate --suite fast
    squeezedjc sweep    --axis r=0,0.1,0.9 --axis b=2,5 --jobs 2

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 truncation breach, 5 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, _mutations
from ._accel import backend_name
from .dynamics import evolve, evolve_ultrastrong, ground_prob, ground_prob_jcm
from .errors import ConfigError, ConvergenceError, DomainError, TruncationError, TruncationWarning
from .fock_oracle import TruncationSpec
from .states import ModelParams, build_series
from .validation import SUITES, all_passed, run_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_TRUNCATION = 4
EXIT_VALIDATION = 5

COMMANDS = ("bn", "revival", "evolve", "validate", "sweep")
SWEEP_COMMANDS = ("bn", "revival", "evolve")
HAMILTONIANS = ("expanded", "ultrastrong", "ultrastrong-quadrature")
PARAM_KEYS = ("a", "theta", "r", "phi", "b", "chi", "lambda", "delta")
TOP_KEYS = {
    "command", "params", "t_max", "t_steps", "tail_target", "truncation", "output_dir",
    "emit_svg", "sweep_axes", "sweep_command", "compare_jcm", "suite", "hamiltonian", "jobs",
}
TRUNC_KEYS = {"retained", "buffer"}
MAX_SWEEP_POINTS = 100_000


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict[str, float] = field(default_factory=dict)
    t_max: float = 30.0
    t_steps: int = 3001
    tail_target: float = 1e-8
    retained: int = 512
    buffer: int | None = None
    output_dir: str = "out"
    emit_svg: bool = False
    sweep_axes: tuple[tuple[str, tuple[float, ...]], ...] = ()
    sweep_command: str = "revival"
    compare_jcm: bool = False
    suite: str = "default"
    hamiltonian: str = "expanded"
    jobs: int = 1

    def model(self) -> ModelParams:
        d = {("lam" if k == "lambda" else k): v for k, v in self.params.items()}
        return ModelParams(**d)

    def truncation(self) -> TruncationSpec:
        return TruncationSpec(self.retained, self.buffer)

    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps)

    def snapshot(self) -> dict[str, Any]:
        d = asdict(self)
        d["params"] = {k: self.params.get(k, v) for k, v in _param_defaults().items()}
        d["sweep_axes"] = [{"field": f, "values": list(v)} for f, v in self.sweep_axes]
        return d


def _param_defaults() -> dict[str, float]:
    p = ModelParams()
    return {"a": p.a, "theta": p.theta, "r": p.r, "phi": p.phi, "b": p.b, "chi": p.chi, "lambda": p.lam, "delta": p.delta}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _number(name: str, v, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{name}: expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return float(v)


def _parse_axes(raw) -> tuple[tuple[str, tuple[float, ...]], ...]:
    if isinstance(raw, dict):
        items = list(raw.items())
    elif isinstance(raw, list):
        items = []
        for i, ax in enumerate(raw):
            if not isinstance(ax, dict) or set(ax) != {"field", "values"}:
                raise ConfigError(f"sweep_axes[{i}]: expected an object with keys 'field' and 'values'")
            items.append((ax["field"], ax["values"]))
    else:
        raise ConfigError("sweep_axes: expected a list of {field, values} objects")
    out = []
    for name, values in items:
        if name not in PARAM_KEYS:
            raise ConfigError(f"sweep_axes: unknown parameter field {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep_axes[{name}]: values must be a non-empty list")
        out.append((name, tuple(_number(f"sweep_axes[{name}]", v) for v in values)))
    return tuple(out)


def config_from_dict(data: dict[str, Any]) -> dict[str, Any]:
    """Validate a JSON-shaped mapping and return RunConfig keyword arguments."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    kw: dict[str, Any] = {}
    if "command" in data:
        kw["command"] = data["command"]
    if "params" in data:
        if not isinstance(data["params"], dict):
            raise ConfigError("params: expected an object")
        bad = sorted(set(data["params"]) - set(PARAM_KEYS))
        if bad:
            raise ConfigError(f"unknown params key(s): {', '.join(bad)}")
        kw["params"] = {k: _number(f"params.{k}", v) for k, v in data["params"].items()}
    for key in ("t_max", "tail_target"):
        if key in data:
            kw[key] = _number(key, data[key])
    for key in ("t_steps", "jobs"):
        if key in data:
            kw[key] = _number(key, data[key], integer=True)
    if "truncation" in data:
        t = data["truncation"]
        if not isinstance(t, dict):
            raise ConfigError("truncation: expected an object")
        bad = sorted(set(t) - TRUNC_KEYS)
        if bad:
            raise ConfigError(f"unknown truncation key(s): {', '.join(bad)}")
        for key in TRUNC_KEYS & set(t):
            kw[key] = None if (key == "buffer" and t[key] is None) else _number(f"truncation.{key}", t[key], integer=True)
    for key in ("output_dir", "sweep_command", "suite", "hamiltonian"):
        if key in data:
            if not isinstance(data[key], str):
                raise ConfigError(f"{key}: expected a string")
            kw[key] = data[key]
    for key in ("emit_svg", "compare_jcm"):
        if key in data:
            if not isinstance(data[key], bool):
                raise ConfigError(f"{key}: expected true or false")
            kw[key] = data[key]
    if "sweep_axes" in data:
        kw["sweep_axes"] = _parse_axes(data["sweep_axes"])
    return kw


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {cfg.command!r}")
    if cfg.t_steps < 2:
        raise ConfigError(f"t_steps: must be >= 2, got {cfg.t_steps}")
    if not cfg.t_max > 0:
        raise ConfigError(f"t_max: must be > 0, got {cfg.t_max}")
    if not 0 < cfg.tail_target <= 1e-3:
        raise ConfigError(f"tail_target: must lie in (0, 1e-3], got {cfg.tail_target}")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs: must be >= 1, got {cfg.jobs}")
    if cfg.sweep_command not in SWEEP_COMMANDS:
        raise ConfigError(f"sweep_command: expected one of {SWEEP_COMMANDS}, got {cfg.sweep_command!r}")
    if cfg.suite not in SUITES:
        raise ConfigError(f"suite: expected one of {SUITES}, got {cfg.suite!r}")
    if cfg.hamiltonian not in HAMILTONIANS:
        raise ConfigError(f"hamiltonian: expected one of {HAMILTONIANS}, got {cfg.hamiltonian!r}")
    try:
        cfg.model()
    except DomainError as exc:
        raise ConfigError(f"params: {exc}") from exc
    try:
        cfg.truncation()
    except DomainError as exc:
        raise ConfigError(f"truncation: {exc}") from exc
    if cfg.command == "sweep":
        if not cfg.sweep_axes:
            raise ConfigError("sweep_axes: a sweep needs at least one axis")
        count = math.prod(len(v) for _, v in cfg.sweep_axes)
        if count > MAX_SWEEP_POINTS:
            raise ConfigError(f"sweep_axes: {count} grid points exceed the limit of {MAX_SWEEP_POINTS}")
    return cfg


def parse_config(args: argparse.Namespace) -> RunConfig:
    """Merge an optional JSON file with command-line flags (flags win)."""
    kw: dict[str, Any] = {}
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        kw = config_from_dict(data)
    kw["command"] = args.command

    params = dict(kw.get("params", {}))
    for key in PARAM_KEYS:
        v = getattr(args, f"p_{key}", None)
        if v is not None:
            params[key] = v
    kw["params"] = params
    flag_map = {
        "t_max": "t_max", "t_steps": "t_steps", "tail_target": "tail_target", "retained": "retained",
        "buffer": "buffer", "out": "output_dir", "jobs": "jobs", "suite": "suite", "hamiltonian": "hamiltonian",
        "sweep_command": "sweep_command",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            kw[key] = v
    if args.svg:
        kw["emit_svg"] = True
    if args.compare_jcm:
        kw["compare_jcm"] = True
    if args.axis:
        kw["sweep_axes"] = _parse_axes([_split_axis(a) for a in args.axis])
    return validate_config(RunConfig(**kw))


def _split_axis(text: str) -> dict:
    if "=" not in text:
        raise ConfigError(f"--axis expects FIELD=V1,V2,..., got {text!r}")
    name, values = text.split("=", 1)
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--axis {name}: values must be numbers") from exc
    return {"field": name.strip(), "values": vals}


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in row))
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_svg(path: Path, t: np.ndarray, p: np.ndarray, title: str) -> None:
    """Polyline plot of P against lambda t on a fixed 640 x 400 viewport."""
    w, h, m = 640, 400, 40
    t_hi = float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0
    xs = m + (t - t[0]) / (t_hi - t[0]) * (w - 2 * m)
    ys = h - m - np.clip(p, 0, 1) * (h - 2 * m)
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
        f'<rect width="{w}" height="{h}" fill="white"/>\n'
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>\n'
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>\n'
        f'<text x="{w // 2}" y="{h - 8}" text-anchor="middle" font-size="12">lambda t (0 to {_fmt(t_hi)})</text>\n'
        f'<text x="8" y="{m - 10}" font-size="12">P ground (0 to 1)</text>\n'
        f'<text x="{w // 2}" y="20" text-anchor="middle" font-size="13">{title}</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>\n'
        "</svg>\n"
    )
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(svg)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_manifest(out: Path, cfg: RunConfig, diagnostics: dict, status: str, started: float) -> Path:
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p != out / "manifest.json":
            rel = p.relative_to(out).as_posix()
            files[rel] = {"sha256": sha256(p), "bytes": p.stat().st_size}
    manifest = {
        "tool": "squeezedjc",
        "version": __version__,
        "backend": backend_name(),
        "command": cfg.command,
        "status": status,
        "config": cfg.snapshot(),
        "files": files,
        "diagnostics": diagnostics,
        "duration_seconds": round(time.perf_counter() - started, 6),
    }
    path = out / "manifest.json"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        json.dump(_json_safe(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# commands (each returns diagnostics and writes its files into ``out``)
# ---------------------------------------------------------------------------


def run_bn(cfg: RunConfig, out: Path) -> dict:
    s = build_series(cfg.model(), cfg.tail_target)
    c = s.coefficients
    write_csv(out / "bn.csv", ["n", "re_bn", "im_bn", "abs2_bn"], [np.arange(s.n_max + 1), c.real, c.imag, s.weights])
    return {"n_max": s.n_max, "sum_abs2": s.mass, "tail_mass": s.tail_mass, "source": s.source, "series": s.diagnostics}


def run_revival(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model()
    t = cfg.t_grid()
    s = build_series(p, cfg.tail_target)
    curve = ground_prob(s, p.lam, t, p.delta)
    write_csv(out / "p_scoh.csv", ["lambda_t", "p_ground"], [t, curve.values])
    diag: dict[str, Any] = {
        "p_scoh": {"n_max": s.n_max, "tail_mass": s.tail_mass, "p0": float(curve.values[0]), "mean": float(curve.values.mean())}
    }
    if cfg.emit_svg:
        write_svg(out / "p_scoh.svg", t, curve.values, "squeezed coherent field")
    if cfg.compare_jcm:
        jcm = ground_prob_jcm(p.b, p.lam, t, p.delta)
        write_csv(out / "p_coh.csv", ["lambda_t", "p_ground"], [t, jcm.values])
        diag["p_coh"] = {"n_terms": jcm.meta["n_terms"], "p0": float(jcm.values[0]), "mean": float(jcm.values.mean())}
        diag["max_abs_difference"] = float(np.max(np.abs(curve.values - jcm.values)))
        if cfg.emit_svg:
            write_svg(out / "p_coh.svg", t, jcm.values, "coherent field")
    return diag


def run_evolve(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model()
    t = cfg.t_grid()
    if cfg.hamiltonian == "ultrastrong-quadrature":
        curve = evolve_ultrastrong(p, t)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            curve = evolve(p, cfg.truncation(), t, form=cfg.hamiltonian)
    write_csv(out / "p_evolve.csv", ["lambda_t", "p_ground"], [t, curve.values])
    if cfg.emit_svg:
        write_svg(out / "p_evolve.svg", t, curve.values, f"direct evolution ({cfg.hamiltonian})")
    return dict(curve.meta)


def run_validate(cfg: RunConfig, out: Path) -> dict:
    report = run_checks(cfg.suite)
    with open(out / "validate.json", "w", newline="", encoding="utf-8") as fh:
        json.dump(_json_safe(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"all_passed": all_passed(report), "failed": [k for k, v in report.items() if not v["pass"]]}


RUNNERS = {"bn": run_bn, "revival": run_revival, "evolve": run_evolve, "validate": run_validate}


def _point_dirname(point: dict[str, float]) -> str:
    return "_".join(f"{k}={float(v)!r}" for k, v in point.items())


def _error_payload(exc: Exception) -> dict:
    return {"error": f"{type(exc).__name__}: {exc}", **getattr(exc, "diagnostics", {})}


def _exit_for(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, DomainError)):
        return EXIT_CONFIG
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, TruncationError):
        return EXIT_TRUNCATION
    raise exc


def _run_point(cfg: RunConfig, point: dict[str, float], out: Path, mutations: tuple[str, ...]) -> dict:
    params = dict(cfg.params)
    params.update(point)
    sub = replace(cfg, command=cfg.sweep_command, params=params, sweep_axes=())
    out.mkdir(parents=True, exist_ok=True)
    with _mutations.inject(*mutations):
        try:
            diag = RUNNERS[sub.command](validate_config(sub), out)
            return {"status": "ok", "exit_code": EXIT_OK, "diagnostics": diag}
        except (ConfigError, DomainError, ConvergenceError, TruncationError) as exc:
            return {"status": "failed", "exit_code": _exit_for(exc), "diagnostics": _error_payload(exc)}


def run_sweep(cfg: RunConfig, out: Path, mutations: tuple[str, ...] = ()) -> tuple[dict, int]:
    names = [f for f, _ in cfg.sweep_axes]
    points = [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in cfg.sweep_axes))]
    dirs = [out / _point_dirname(pt) for pt in points]
    if cfg.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_point, cfg, pt, d, mutations) for pt, d in zip(points, dirs)]
            results = [f.result() for f in futures]
    else:
        results = [_run_point(cfg, pt, d, mutations) for pt, d in zip(points, dirs)]
    runs = []
    code = EXIT_OK
    for pt, d, res in zip(points, dirs, results):
        runs.append({"point": pt, "directory": d.name, **res})
        if code == EXIT_OK and res["exit_code"] != EXIT_OK:
            code = res["exit_code"]
    return {"sweep_command": cfg.sweep_command, "points": len(points), "failed": sum(r["status"] != "ok" for r in runs), "runs": runs}, code


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel sweep points")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    for key in PARAM_KEYS:
        common.add_argument(f"--{key}", dest=f"p_{key}", type=float, metavar="X")
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--t-steps", dest="t_steps", type=int)
    common.add_argument("--tail-target", dest="tail_target", type=float)
    common.add_argument("--retained", type=int)
    common.add_argument("--buffer", type=int)
    common.add_argument("--compare-jcm", dest="compare_jcm", action="store_true", help="revival: add the coherent-field curve")
    common.add_argument("--suite", choices=SUITES, help="validate: check suite")
    common.add_argument("--hamiltonian", choices=HAMILTONIANS, help="evolve: Hamiltonian form")
    common.add_argument("--sweep-command", dest="sweep_command", choices=SWEEP_COMMANDS, help="sweep: command run per point")
    common.add_argument("--axis", action="append", metavar="FIELD=V1,V2", help="sweep: parameter axis (repeatable)")
    common.add_argument("--inject-mutation", dest="mutations", action="append", default=[], help=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="squeezedjc", description="Jaynes-Cummings dynamics with squeezed coherent photons.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bn": "expansion coefficients table",
        "revival": "ground-state probability from the coefficient series",
        "evolve": "ground-state probability by direct integration",
        "validate": "run the invariant check suite",
        "sweep": "run a command over a parameter grid",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    started = time.perf_counter()
    try:
        for m in args.mutations:
            if m not in _mutations.KNOWN:
                raise ConfigError(f"unknown mutation {m!r}")
        cfg = parse_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mutations = tuple(args.mutations)
    if cfg.command == "sweep":
        diagnostics, code = run_sweep(cfg, out, mutations)
        write_manifest(out, cfg, diagnostics, "ok" if code == EXIT_OK else "failed", started)
        if code != EXIT_OK:
            print(f"sweep: {diagnostics['failed']} of {diagnostics['points']} points failed", file=sys.stderr)
        return code

    with _mutations.inject(*mutations):
        try:
            diagnostics = RUNNERS[cfg.command](cfg, out)
        except (ConfigError, DomainError, ConvergenceError, TruncationError) as exc:
            code = _exit_for(exc)
            write_manifest(out, cfg, _error_payload(exc), "failed", started)
            print(f"{cfg.command}: {exc}", file=sys.stderr)
            return code
    if mutations:
        diagnostics["injected_mutations"] = list(mutations)
    status = "ok"
    code = EXIT_OK
    if cfg.command == "validate" and not diagnostics["all_passed"]:
        status, code = "failed", EXIT_VALIDATION
        print(f"validate: failed checks: {', '.join(diagnostics['failed'])}", file=sys.stderr)
    write_manifest(out, cfg, diagnostics, status, started)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
