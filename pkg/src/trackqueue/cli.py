"""Experiment runner: config files, parameter sweeps, CSV results.

Config files are flat ``key = value`` text, one experiment per file; the
``presets/`` directory ships one config per headline experiment (fig3..fig11).
Results are written as versioned CSV (one row per grid point, policy and
replication) plus an aggregated summary with means and standard errors.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytic
from .analytic import AnalyticParams
from .distributions import DistributionSpec, Erlang, Exponential, LogNormal, Pareto, RngStream, PATH_STREAM
from .metrics import mean_normalized_wait, peak_ages, reconstruction_error
from .policies import Policy, PolicyKind, parse_policy
from .simulation import SimConfig, loss_probability, simulate
from .wiener import generate_path, lmmse_reconstruct, mc_reconstruction_error, refine_path

SCHEMA = "trackqueue-results-v1"
OUTPUT_DIR_ENV = "TRACKQUEUE_OUTPUT_DIR"

QUEUE_KINDS = ("mm", "mg-lognormal", "gm-erlang2", "gm-pareto")
SWEEP_KEYS = ("lambda", "mu", "buffer", "epsilon", "xm")

RESULT_FIELDS = [
    "policy",
    "lambda",
    "mu",
    "buffer",
    "epsilon",
    "seed",
    "avg_peak_age",
    "avg_re",
    "lambda_eff_empirical",
    "loss_prob",
    "deliveries",
    "analytic_peak_age",
    "analytic_re",
]


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    queue: str
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    buffer: tuple[int, ...]
    epsilon: tuple[float, ...]
    xm: tuple[float, ...]
    sweep: str
    policies: tuple[Policy, ...]
    replications: int
    deliveries: int
    warmup_fraction: float
    seed: int
    output: Optional[str] = None
    sigma_log: float = 1.0
    pareto_alpha: float = 3.5

    def __post_init__(self) -> None:
        if self.queue not in QUEUE_KINDS:
            raise ValueError(f"unknown queue kind {self.queue!r}")
        if self.sweep not in SWEEP_KEYS:
            raise ValueError(f"unknown sweep variable {self.sweep!r}")
        grid = self._grid()
        if len(grid) == 0:
            raise ValueError(f"sweep grid {self.sweep!r} is empty")
        for key in SWEEP_KEYS:
            vals = self._values(key)
            if key != self.sweep and len(vals) > 1:
                raise ValueError(f"{key} must be a single value unless it is the sweep variable")
        if self.queue == "gm-pareto" and not self.xm:
            raise ValueError("gm-pareto needs xm values")
        if not self.policies:
            raise ValueError("no policies configured")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.deliveries < 1:
            raise ValueError("deliveries must be >= 1")

    def _values(self, key: str) -> tuple:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "buffer": self.buffer,
            "epsilon": self.epsilon,
            "xm": self.xm,
        }[key]

    def _grid(self) -> tuple:
        return self._values(self.sweep)


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text: str, name_hint: str = "experiment") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    known = {
        "name", "queue", "lambda", "mu", "buffer", "epsilon", "xm", "sweep",
        "policies", "replications", "deliveries", "warmup", "seed", "output",
        "sigma-log", "pareto-alpha",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def floats(key: str, default: str = "") -> tuple[float, ...]:
        text = raw.get(key, default)
        if not text:
            return ()
        return tuple(float(tok) for tok in text.split(","))

    policies = tuple(parse_policy(tok) for tok in raw.get("policies", "").split(",") if tok.strip())
    return ExperimentConfig(
        name=raw.get("name", name_hint),
        queue=raw.get("queue", "mm"),
        lam=floats("lambda"),
        mu=floats("mu", "1.0"),
        buffer=tuple(int(v) for v in floats("buffer", "1")),
        epsilon=floats("epsilon", "0"),
        xm=floats("xm"),
        sweep=raw.get("sweep", "lambda"),
        policies=policies,
        replications=int(raw.get("replications", "5")),
        deliveries=int(raw.get("deliveries", "200000")),
        warmup_fraction=float(raw.get("warmup", "0.05")),
        seed=int(raw.get("seed", "1")),
        output=raw.get("output"),
        sigma_log=float(raw.get("sigma-log", "1.0")),
        pareto_alpha=float(raw.get("pareto-alpha", "3.5")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), name_hint=path.stem)


def load_preset(name: str) -> ExperimentConfig:
    ref = resources.files("trackqueue").joinpath(f"presets/{name}.cfg")
    if not ref.is_file():
        available = sorted(
            p.name[:-4] for p in resources.files("trackqueue").joinpath("presets").iterdir()
        )
        raise ValueError(f"no preset {name!r}; available: {available}")
    return parse_config_text(ref.read_text(), name_hint=name)


@dataclass(frozen=True)
class GridPoint:
    lam: float
    mu: float
    buffer: int
    epsilon: float
    xm: Optional[float] = None


def _grid_points(config: ExperimentConfig) -> list[GridPoint]:
    base = GridPoint(
        lam=config.lam[0] if config.lam else float("nan"),
        mu=config.mu[0],
        buffer=config.buffer[0],
        epsilon=config.epsilon[0],
        xm=config.xm[0] if config.xm else None,
    )
    points = []
    for value in config._grid():
        if config.sweep == "lambda":
            points.append(replace(base, lam=float(value)))
        elif config.sweep == "mu":
            points.append(replace(base, mu=float(value)))
        elif config.sweep == "buffer":
            points.append(replace(base, buffer=int(value)))
        elif config.sweep == "epsilon":
            points.append(replace(base, epsilon=float(value)))
        else:
            xm = float(value)
            alpha = config.pareto_alpha
            points.append(replace(base, xm=xm, lam=(alpha - 1.0) / (alpha * xm)))
    return points


def _specs(config: ExperimentConfig, pt: GridPoint) -> tuple[DistributionSpec, DistributionSpec]:
    if config.queue == "mm":
        return Exponential(pt.lam), Exponential(pt.mu)
    if config.queue == "mg-lognormal":
        return Exponential(pt.lam), LogNormal(1.0 / pt.mu, config.sigma_log)
    if config.queue == "gm-erlang2":
        return Erlang(2, 2.0 * pt.lam), Exponential(pt.mu)
    if config.queue == "gm-pareto":
        return Pareto(pt.xm, config.pareto_alpha), Exponential(pt.mu)
    raise AssertionError(config.queue)


def _analytic_overlay(config: ExperimentConfig, pt: GridPoint, policy: Policy):
    # Closed forms exist only for the Markov queue under Keep-Old/Keep-Fresh.
    if config.queue != "mm":
        return None, None
    p = AnalyticParams(pt.lam, pt.mu, pt.buffer)
    try:
        if policy.kind is PolicyKind.KEEP_OLD:
            if pt.buffer == 1:
                return analytic.peak_age_keep_old_mm12(p), analytic.re_keep_old_mm12(p)
            return analytic.peak_age_keep_old_mm1b(p), analytic.re_keep_old_mm1b(p)
        if policy.kind is PolicyKind.KEEP_FRESH:
            if pt.buffer == 1:
                return analytic.peak_age_keep_fresh_mm12(p), analytic.re_keep_fresh_mm12(p)
            return analytic.peak_age_keep_fresh_mm1b(p), analytic.re_keep_fresh_mm1b(p)
    except ValueError:
        return None, None  # critically loaded B-buffer forms are undefined
    return None, None


def _run_one(args) -> dict:
    config, pt, policy, rep = args
    arrival, service = _specs(config, pt)
    pol = replace(policy, epsilon=pt.epsilon) if policy.kind is PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE else policy
    sim = SimConfig(
        arrival=arrival,
        service=service,
        buffer_size=pt.buffer,
        policy=pol,
        target_deliveries=config.deliveries,
        warmup_fraction=config.warmup_fraction,
        seed=config.seed + rep,
    )
    trace = simulate(sim)
    age = peak_ages(trace)
    re = reconstruction_error(trace)
    a_age, a_re = _analytic_overlay(config, pt, pol)
    return {
        "policy": pol.label,
        "lambda": pt.lam,
        "mu": pt.mu,
        "buffer": pt.buffer,
        "epsilon": pol.epsilon,
        "seed": sim.seed,
        "avg_peak_age": age.avg_peak_age,
        "avg_re": re.avg_re,
        "lambda_eff_empirical": re.lambda_eff_empirical,
        "loss_prob": loss_probability(trace),
        "deliveries": len(trace),
        "analytic_peak_age": a_age,
        "analytic_re": a_re,
    }


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """One result row per (grid point, policy, replication), sorted by key."""
    tasks = [
        (config, pt, policy, rep)
        for pt in _grid_points(config)
        for policy in config.policies
        for rep in range(config.replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        rows = [_run_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["policy"], r["lambda"], r["mu"], r["buffer"], r["epsilon"], r["seed"]))
    return rows


def run_threshold_sweep(
    lam: float,
    mu: float,
    eps_grid: Sequence[float],
    deliveries: int = 200_000,
    replications: int = 5,
    seed: int = 1,
) -> tuple[list[dict], float]:
    """Age and reconstruction-error curves over the threshold grid.

    Replications share seeds across thresholds (common random numbers), so
    the eps = 0 rows coincide bit-exactly with the plain gap rule and the
    argmin is insensitive to stream noise.  Returns (rows, argmin-RE eps).
    """
    config = ExperimentConfig(
        name=f"th-sweep-lam{lam:g}",
        queue="mm",
        lam=(lam,),
        mu=(mu,),
        buffer=(1,),
        epsilon=tuple(eps_grid),
        xm=(),
        sweep="epsilon",
        policies=(Policy(PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE),),
        replications=replications,
        deliveries=deliveries,
        warmup_fraction=0.05,
        seed=seed,
    )
    rows = run_experiment(config)
    by_eps: dict[float, list[float]] = {}
    for row in rows:
        by_eps.setdefault(row["epsilon"], []).append(row["avg_re"])
    best = min(by_eps, key=lambda e: np.mean(by_eps[e]))
    return rows, float(best)


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard error of the metrics per (policy, grid point)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["policy"], row["lambda"], row["mu"], row["buffer"], row["epsilon"])
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        n = len(rs)
        summary = {
            "policy": key[0],
            "lambda": key[1],
            "mu": key[2],
            "buffer": key[3],
            "epsilon": key[4],
            "replications": n,
        }
        for metric in ("avg_peak_age", "avg_re", "lambda_eff_empirical", "loss_prob"):
            vals = np.array([r[metric] for r in rs], dtype=np.float64)
            summary[f"{metric}_mean"] = float(vals.mean())
            summary[f"{metric}_stderr"] = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        summary["analytic_peak_age"] = rs[0]["analytic_peak_age"]
        summary["analytic_re"] = rs[0]["analytic_re"]
        out.append(summary)
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, rows: list[dict], fields: Optional[list[str]] = None) -> None:
    if not rows:
        raise ValueError("no rows to write")
    fields = fields or list(rows[0].keys())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SCHEMA}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fields})


def emit_analytic_curves(
    lam_grid: Sequence[float], mu: float, buffers: Sequence[int]
) -> list[dict]:
    """Closed-form peak age and reconstruction error over a parameter grid."""
    rows = []
    for B in buffers:
        for lam in lam_grid:
            p = AnalyticParams(lam, mu, B)
            for policy, age_fn, re_fn in (
                ("keep-old", analytic.peak_age_keep_old_mm1b, analytic.re_keep_old_mm1b),
                ("keep-fresh", analytic.peak_age_keep_fresh_mm1b, analytic.re_keep_fresh_mm1b),
            ):
                if B == 1:
                    if policy == "keep-old":
                        age = analytic.peak_age_keep_old_mm12(p)
                        re = analytic.re_keep_old_mm12(p)
                    else:
                        age = analytic.peak_age_keep_fresh_mm12(p)
                        re = analytic.re_keep_fresh_mm12(p)
                else:
                    try:
                        age, re = age_fn(p), re_fn(p)
                    except ValueError:
                        age, re = None, None
                rows.append(
                    {
                        "policy": policy,
                        "lambda": lam,
                        "mu": mu,
                        "buffer": B,
                        "analytic_peak_age": age,
                        "analytic_re": re,
                        "lambda_eff": float(analytic.lambda_eff(p)),
                    }
                )
    return rows


def _output_path(name: Optional[str], default: str) -> Path:
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    return base / (name or default)


def _cmd_simulate(args) -> int:
    config = load_preset(args.preset) if args.preset else load_config(args.config)
    rows = run_experiment(config, jobs=args.jobs)
    path = _output_path(config.output, f"{config.name}.csv")
    write_csv(path, rows, RESULT_FIELDS)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_preset(args.preset) if args.preset else load_config(args.config)
    rows = run_experiment(config, jobs=args.jobs)
    path = _output_path(config.output, f"{config.name}.csv")
    write_csv(path, rows, RESULT_FIELDS)
    summary_path = path.with_name(path.stem + "_summary.csv")
    summary = summarize(rows)
    write_csv(summary_path, summary)
    if config.sweep == "epsilon":
        by_eps: dict[float, list[float]] = {}
        for row in rows:
            if row["policy"].startswith("th-iaa"):
                by_eps.setdefault(row["epsilon"], []).append(row["avg_re"])
        if by_eps:
            best = min(by_eps, key=lambda e: float(np.mean(by_eps[e])))
            print(f"argmin-RE epsilon = {best:g}")
    print(f"wrote {len(rows)} rows to {path} and summary to {summary_path}")
    return 0


def _cmd_analytic(args) -> int:
    lam_grid = [float(v) for v in args.lam.split(",")]
    buffers = [int(v) for v in args.buffer.split(",")]
    rows = emit_analytic_curves(lam_grid, args.mu, buffers)
    if args.output:
        path = _output_path(args.output, "analytic.csv")
        write_csv(path, rows)
        print(f"wrote {len(rows)} rows to {path}")
    else:
        for row in rows:
            print(row)
    return 0


def _cmd_invariant(args) -> int:
    measure = analytic.invariant_measure(bins=args.bins, tol=args.tol)
    print(f"bins={measure.bins} iterations={measure.iterations} mean={measure.mean:.6f}")
    if args.density_out:
        rows = [
            {"wait": c, "density": w * measure.bins / measure.upper}
            for c, w in zip(measure.cell_centers(), measure.weights)
        ]
        path = _output_path(args.density_out, "invariant.csv")
        write_csv(path, rows)
        print(f"wrote density to {path}")
    return 0


def _cmd_wiener_demo(args) -> int:
    rng = RngStream(args.seed, PATH_STREAM).generator()
    sample_times = np.sort(rng.uniform(0.0, args.horizon, args.samples))
    path = generate_path(sample_times, rng)
    fine = refine_path(path, args.horizon / 2000.0, rng)
    mc = mc_reconstruction_error(fine, sample_times)
    gaps = np.diff(np.concatenate(([0.0], sample_times)))
    formula = float(np.sum(gaps**2) / 6.0 / sample_times[-1])
    out = _output_path(args.output, "wiener_demo.csv")
    samples = [s for s in zip(sample_times, path.values)]
    from .wiener import SamplePoint

    pts = [SamplePoint(t, v) for t, v in samples]
    recon = lmmse_reconstruct(pts, fine.times[fine.times <= sample_times[-1]])
    rows = [
        {"t": t, "w": w, "w_hat": wh}
        for t, w, wh in zip(fine.times, fine.values, recon)
    ]
    write_csv(out, rows)
    print(f"one-path reconstruction error {mc.error:.6f} (interval formula {formula:.6f})")
    print(f"wrote path to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackqueue",
        description="Finite-buffer tracking-queue experiments: peak age vs reconstruction error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, help_text, fn):
        p = sub.add_parser(name, help=help_text)
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("config", nargs="?", help="path to a key=value config file")
        group.add_argument("--preset", help="bundled experiment name, e.g. fig3")
        p.add_argument("--jobs", type=int, default=1, help="parallel replications")
        p.set_defaults(fn=fn)

    add_config_cmd("simulate", "run one experiment config and write raw rows", _cmd_simulate)
    add_config_cmd("sweep", "run an experiment sweep and write rows plus summary", _cmd_sweep)

    p = sub.add_parser("analytic", help="emit closed-form curves as CSV")
    p.add_argument("--lam", required=True, help="comma-separated arrival rates")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--buffer", default="1", help="comma-separated buffer sizes")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_analytic)

    p = sub.add_parser("invariant", help="heavy-traffic wait distribution fixed point")
    p.add_argument("--bins", type=int, default=2**13)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--density-out", default=None)
    p.set_defaults(fn=_cmd_invariant)

    p = sub.add_parser("wiener-demo", help="dump one reconstructed path as CSV")
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_wiener_demo)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
