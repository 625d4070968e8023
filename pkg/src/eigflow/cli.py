"""Command-line front end.

    python -m eigflow <command> [flags]

Commands: simulate, drift-check, dist-check, grad-check, mcf-check,
scaled-metric.  Each writes ``<command>.csv`` and ``<command>.json`` into
the output directory (``--out``, else ``$EIGFLOW_OUT``, else ``.``).
Settings can come from a key=value file (``--config``) or from the
``config`` block of an earlier JSON report; flags override the file.

Exit codes: 0 pass, 1 verification failed, 2 usage or I/O error.
"""
import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import verify
from .processes import ProcessSpec, simulate_paths, terminal_ensemble
from .sdecore import CollisionError, StepControl

SCHEMA_VERSION = 1
OUT_ENV = "EIGFLOW_OUT"
COMMANDS = ("simulate", "drift-check", "dist-check", "grad-check", "mcf-check", "scaled-metric")

COMMAND_HELP = {
    "simulate": "simulate paths and write the spectrum on a time grid",
    "drift-check": "estimate the one-step eigenvalue drift and adjudicate drift forms",
    "dist-check": "KS-compare terminal spectra of the matrix and spectral levels",
    "grad-check": "analytic vs finite-difference log-volume gradient",
    "mcf-check": "vertical-only flow vs the integrated drift field",
    "scaled-metric": "drift and quadratic variation under the fibre metric scaled by r",
}

FIELD_HELP = {
    "process": "dyson, wishart, dynkin or flag",
    "beta": "1, 2 or 4 (dyson)",
    "level": "matrix or spectral",
    "variant": "drift form for spectral runs: intro, section2, rw or scaled:c",
    "n": "matrix size",
    "t_end": "terminal time",
    "grid": "number of output intervals",
    "h0": "initial step",
    "h_min": "step floor",
    "gap_threshold": "relative gap that triggers step halving",
    "max_move": "cap on a step's expected move as a fraction of the gap",
    "collision": "reflect or exclude",
    "paths": "number of paths",
    "samples": "number of one-step samples",
    "h": "step for one-step estimates",
    "r": "fibre metric scale",
    "alpha": "KS significance level",
    "coords": "lambda, sigma or gamma",
    "seed": "master seed",
    "base": "comma-separated values",
}

REQUIRED = {
    "simulate": ("n", "t_end"),
    "drift-check": ("base", "h", "samples"),
    "dist-check": ("n", "t_end", "paths"),
    "grad-check": ("base",),
    "mcf-check": ("base", "t_end"),
    "scaled-metric": ("base",),
}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    process: str = "dyson"
    beta: int = 2
    level: str = "matrix"
    variant: str = None
    n: int = None
    t_end: float = None
    grid: int = 10
    h0: float = 1e-3
    h_min: float = 1e-10
    gap_threshold: float = 0.05
    max_move: float = 0.3
    collision: str = "reflect"
    paths: int = None
    samples: int = None
    h: float = None
    r: float = 2.0
    alpha: float = 0.01
    coords: str = None
    seed: int = 0
    base: tuple = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        missing = [k for k in REQUIRED[self.command] if getattr(self, k) is None]
        if missing:
            raise UsageError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
        for name in ("n", "grid", "paths", "samples"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"{name} must be positive")
        for name in ("t_end", "h0", "h_min", "gap_threshold", "max_move", "h", "r"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"{name} must be positive")
        if not 0 < self.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")
        if self.seed < 0:
            raise UsageError("seed must be nonnegative")
        if self.base is not None:
            base = tuple(float(v) for v in self.base)
            if any(b <= a for a, b in zip(base[1:], base[:-1])):
                raise UsageError("base spectrum must be strictly descending")
            object.__setattr__(self, "base", base)
        try:
            self.kind
            self.drift_variant
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def kind(self):
        return geo.ProcessKind(self.process, self.beta)

    @property
    def drift_variant(self):
        if self.variant is None:
            return None
        name, _, const = self.variant.partition(":")
        return geo.DriftVariant(name, const or 1) if name == "scaled" else geo.DriftVariant(name)

    @property
    def control(self):
        return StepControl(h0=self.h0, h_min=min(self.h_min, self.h0), gap_threshold=self.gap_threshold,
                           max_move=self.max_move, collision=self.collision)

    def echo(self):
        d = dataclasses.asdict(self)
        if d["base"] is not None:
            d["base"] = list(d["base"])
        return d


# --- parsing --------------------------------------------------------------------

def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


FIELD_TYPES = {
    "process": str, "beta": int, "level": str, "variant": str, "n": int, "t_end": float,
    "grid": int, "h0": float, "h_min": float, "gap_threshold": float, "max_move": float,
    "collision": str, "paths": int, "samples": int, "h": float, "r": float, "alpha": float,
    "coords": str, "seed": int, "base": _floats,
}


def _coerce(key, value):
    if key not in FIELD_TYPES:
        raise UsageError(f"unknown setting {key!r}")
    if value is None:
        return None
    if key == "base" and isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        return FIELD_TYPES[key](value)
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {key}: {value!r}") from None


def read_config_file(path):
    """Settings from a key=value file or from a JSON report's config block."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON config: {exc}") from None
        data = data.get("config", data)
        return {k.replace("-", "_"): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="eigflow", description="Spectral diffusions on isospectral orbits.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMAND_HELP[name], description=COMMAND_HELP[name])
        p.add_argument("--config", help="key=value file or JSON report")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads (default: all cores)")
        for key, typ in FIELD_TYPES.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                           type=str if typ is _floats else typ,
                           help=FIELD_HELP.get(key))
        p.add_argument("--start", dest="base", default=argparse.SUPPRESS, help="alias of --base")
    return parser


def resolve_config(args):
    settings = {}
    if args.config:
        settings.update(read_config_file(args.config))
        settings.pop("command", None)
    settings.update({k: v for k, v in vars(args).items() if k in FIELD_TYPES})
    clean = {k: _coerce(k, v) for k, v in settings.items()}
    return ExperimentConfig(args.command, **clean)


# --- serialization -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(cfg, status, results, passed):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config": cfg.echo(),
        "seeds": {"master_seed": cfg.seed},
        "status": status,
        "passed": passed,
        "results": results,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


# --- commands ----------------------------------------------------------------------

def cmd_simulate(cfg, threads):
    spec = ProcessSpec(cfg.kind, cfg.level, cfg.n, cfg.t_end, cfg.grid, cfg.drift_variant, cfg.base)
    paths = cfg.paths or 1
    states, collided, refl = simulate_paths(spec, cfg.control, paths, cfg.seed, threads)
    header = ["path", "time"] + [f"lambda{i + 1}" for i in range(cfg.n)]
    rows = [[p, t] + list(states[p, g]) for p in range(paths) for g, t in enumerate(spec.times)]
    results = {"paths": paths, "excluded": int(collided.sum()), "reflections": int(refl.sum()),
               "terminal_mean": states[~collided, -1].mean(axis=0) if (~collided).any() else None}
    return header, rows, results, {}


def cmd_drift_check(cfg, threads):
    kind = cfg.kind
    if kind.name == "flag":
        mean, se = verify.estimate_flag_drift(cfg.base, cfg.h, cfg.samples, cfg.seed)
        lam = np.array(cfg.base)
        expect = -(lam.size * np.diag(lam) - lam.sum() * np.eye(lam.size)) + 0.0
        z = (mean - expect) / np.where(se > 0, se, np.inf)
        header = ["i", "j", "estimate", "se", "expected", "z"]
        n = lam.size
        rows = [[i, j, mean[i, j], se[i, j], expect[i, j], z[i, j]] for i in range(n) for j in range(n)]
        ok = bool(np.all(np.abs(z) <= verify.ACCEPT_Z))
        return header, rows, {"mean": mean, "se": se, "expected": expect, "z": z}, {"entrywise_3se": ok}
    base = geo.Spectrum(cfg.base)
    coords = cfg.coords or "lambda"
    est = verify.estimate_drift(kind, cfg.level, base, cfg.h, cfg.samples, cfg.seed, coords=coords,
                                threads=threads)
    report = verify.adjudicate_drift(est, verify.drift_candidates(kind, base, coords), "drift-check")
    trusted = str(geo.trusted_variant(kind))
    ok = trusted in report.accepted.split("=")
    header = ["candidate", "component", "candidate_value", "estimate", "se", "z"]
    rows = [[c["label"], i + 1, c["values"][i], est.mean[i], est.se[i], c["z"][i]]
            for c in report.candidates for i in range(base.n)]
    res = report.to_dict()
    res["expected"] = trusted
    return header, rows, res, {"accepted_expected": ok}


def cmd_dist_check(cfg, threads):
    kind = cfg.kind
    ctrl = cfg.control
    mat = terminal_ensemble(ProcessSpec(kind, "matrix", cfg.n, cfg.t_end, 1, None, cfg.base), ctrl, cfg.paths,
                            cfg.seed, threads)
    spe = terminal_ensemble(ProcessSpec(kind, "spectral", cfg.n, cfg.t_end, 1, cfg.drift_variant, cfg.base),
                            ctrl, cfg.paths, cfg.seed + 1, threads)
    header = ["component", "D", "p", "critical"]
    rows, passed = [], {}
    crit = verify.ks_critical(cfg.alpha, len(mat.spectra), len(spe.spectra))
    for i in range(cfg.n):
        d, p = verify.ks_two_sample(mat.spectra[:, i], spe.spectra[:, i])
        rows.append([i + 1, d, p, crit])
        passed[f"lambda{i + 1}"] = d < crit
    results = {"matrix_seed": cfg.seed, "spectral_seed": cfg.seed + 1,
               "excluded": {"matrix": mat.excluded, "spectral": spe.excluded},
               "reflections": {"matrix": mat.reflections, "spectral": spe.reflections},
               "ks": [{"component": r[0], "D": r[1], "p": r[2]} for r in rows], "critical": crit}
    return header, rows, results, passed


def _spectrum_for(kind, values):
    s = geo.Spectrum(values)
    if kind.name in ("wishart", "dynkin"):
        return geo.Spectrum(s.sigma, "singular_values")
    return s


def cmd_grad_check(cfg, threads):
    kind = cfg.kind
    report = verify.gradient_check(kind, _spectrum_for(kind, cfg.base))
    r = report.results
    header = ["component", "analytic", "finite_difference"]
    rows = [[i + 1, a, f] for i, (a, f) in enumerate(zip(r["grad"], r["fd"]))]
    return header, rows, report.to_dict(), report.passed


def cmd_mcf_check(cfg, threads):
    kind = cfg.kind
    report = verify.mcf_check(kind, _spectrum_for(kind, cfg.base), cfg.t_end, h=cfg.h or 1e-4,
                              n_paths=cfg.paths or 1000, seed=cfg.seed, n_grid=cfg.grid)
    r = report.results
    n = len(cfg.base)
    header = ["time"] + [f"mean{i + 1}" for i in range(n)] + [f"ode{i + 1}" for i in range(n)]
    rows = [[t] + list(m) + list(o) for t, m, o in zip(r["times"], r["mean"], r["ode"])]
    return header, rows, report.to_dict(), report.passed


def cmd_scaled_metric(cfg, threads):
    report = verify.scaled_metric_check(geo.Spectrum(cfg.base), r=cfg.r, h=cfg.h or 1e-5,
                                        n_samples=cfg.samples or 200000, seed=cfg.seed, beta=cfg.beta,
                                        threads=threads)
    r = report.results
    header = ["component", "drift_r1", "drift_r", "z_drift", "qv_r1", "qv_r", "z_qv"]
    rows = [[i + 1, r["r1"]["mean"][i], r["r"]["mean"][i], r["z_drift"][i], r["r1"]["qv"][i], r["r"]["qv"][i],
             r["z_qv"][i]] for i in range(len(cfg.base))]
    return header, rows, report.to_dict(), report.passed


HANDLERS = {
    "simulate": cmd_simulate, "drift-check": cmd_drift_check, "dist-check": cmd_dist_check,
    "grad-check": cmd_grad_check, "mcf-check": cmd_mcf_check, "scaled-metric": cmd_scaled_metric,
}


def run_experiment(cfg, out_dir, threads=1):
    """Run one configured experiment, write its CSV and JSON, return the exit code."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"eigflow: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    try:
        header, rows, results, passed = HANDLERS[cfg.command](cfg, max(1, threads))
    except (geo.DegenerateSpectrumError, CollisionError) as exc:
        header, rows, results, passed = ["error"], [[str(exc)]], {"error": str(exc)}, {"completed": False}
    except ValueError as exc:
        print(f"eigflow: {exc}", file=sys.stderr)
        return 2
    passed = {k: bool(v) for k, v in passed.items()}
    status = "pass" if all(passed.values()) else "fail"
    stem = os.path.join(out_dir, cfg.command)
    try:
        with open(stem + ".csv", "w", newline="") as fh:
            fh.write(csv_text(header, rows))
        with open(stem + ".json", "w") as fh:
            fh.write(report_json(cfg, status, results, passed))
    except OSError as exc:
        print(f"eigflow: cannot write output: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.command}: {status} ({stem}.json)")
    return 0 if status == "pass" else 1


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"eigflow: error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or os.environ.get(OUT_ENV) or "."
    return run_experiment(cfg, out_dir, args.threads)


if __name__ == "__main__":
    sys.exit(main())
