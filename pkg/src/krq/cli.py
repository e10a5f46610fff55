"""Single entry point exposing gen-points, train, eval, quad-study, bs-oracle.

Configs are JSON, tabular outputs are CSV, and every run directory gets a
manifest recording the config snapshot, a content hash of the inputs and the
produced files.  Seed sweeps fan out over worker processes (capped by
KRQ_THREADS); each worker is internally deterministic.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import evaluate, lds, nn, presets, problems, quadstudy
from . import train as train_mod

EXIT_FAILURE = 1
EXIT_DIVERGED = 3
EXIT_PRECISION = 4


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _content_hash(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, default=str).encode()
    ).hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path, config_obj):
        self.out_dir = out_dir
        self.config = config_obj
        self.started = datetime.datetime.now(datetime.timezone.utc)
        self.outputs: list[str] = []
        self.extra: dict = {}

    def add(self, *names):
        self.outputs.extend(names)

    def write(self):
        finished = datetime.datetime.now(datetime.timezone.utc)
        payload = {
            "config": self.config,
            "content_hash": _content_hash(self.config),
            "started_at": self.started.isoformat(),
            "finished_at": finished.isoformat(),
            "wall_time_s": (finished - self.started).total_seconds(),
            "outputs": self.outputs,
            **self.extra,
        }
        (self.out_dir / "manifest.json").write_text(json.dumps(payload, indent=2))
        missing = [n for n in self.outputs if not (self.out_dir / n).exists()]
        if missing:
            raise RuntimeError(f"declared outputs missing: {missing}")


def _resolve_problem(name: str, d: int | None, config_path: str | None):
    if config_path:
        return problems.problem_from_json(json.loads(Path(config_path).read_text()))
    return problems.builtin_problem(name, d)


@click.group()
def main():
    """Kolmogorov-PDE deep learning with MC and RQMC sampling."""


@main.command("gen-points")
@click.option("--method", type=click.Choice(lds.METHODS), required=True)
@click.option("--dims", type=int, required=True, help="point dimension s")
@click.option("--log2n", type=int, required=True, help="emit n = 2^log2n points")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--start-index", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_points(method, dims, log2n, seed, start_index, out):
    """Emit a point set as CSV with header i,u1,...,us."""
    spec = lds.SamplerSpec(method=method, s=dims, seed=seed)
    pts = lds.generate(spec, 1 << log2n, start_index=start_index)
    header = ["i"] + [f"u{j}" for j in range(1, dims + 1)]
    rows = (
        [start_index + i] + [float(v) for v in pts.values[i]]
        for i in range(pts.n)
    )
    _write_csv(Path(out), header, rows)
    click.echo(f"wrote {pts.n} points to {out}")


def _run_one_training(args):
    """Worker for seed sweeps; must stay importable for ProcessPoolExecutor."""
    config, seed, out_dir = args
    cfg = train_mod.with_seeds(config, seed) if seed is not None else config
    params, log = train_mod.train(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "log.csv", ["iteration", "loss", "lr"], log.log_rows())
    _write_csv(out_dir / "eval.csv", ["iteration", "rel_l2"], log.eval_rows())
    _write_csv(
        out_dir / "summary.csv",
        ["method", "batch_size", "seed", "final_rel_l2"],
        [[log.summary["method"], log.summary["batch_size"],
          log.summary["seed"], log.summary["final_rel_l2"]]],
    )
    nn.save_checkpoint(out_dir / "ckpt.bin", params)
    return log.summary


def _worker_cap() -> int:
    cap = os.environ.get("KRQ_THREADS")
    if cap:
        return max(1, int(cap))
    return os.cpu_count() or 1


@main.command("train")
@click.option("--config", "config_path", type=str, default=None,
              help="JSON config file (or a preset name / NAME.json)")
@click.option("--preset", "preset_name", type=str, default=None,
              help="built-in preset, e.g. heat_d5_desk")
@click.option("--out-dir", type=click.Path(file_okay=False), default="results")
@click.option("--sweep", type=str, default=None, help="e.g. seeds=0..3")
@click.option("--method", type=str, default=None, help="override sampler method")
@click.option("--batch-log2", type=int, default=None, help="override batch size")
@click.option("--iterations", type=int, default=None, help="override iterations")
def train_cmd(config_path, preset_name, out_dir, sweep, method, batch_log2, iterations):
    """Train one network, or a seed sweep of paired runs."""
    if (config_path is None) == (preset_name is None):
        raise click.UsageError("give exactly one of --config or --preset")
    if preset_name:
        config = presets.preset(preset_name)
        config_obj = presets.config_to_json(config)
    else:
        path = Path(config_path)
        if path.exists():
            config_obj = json.loads(path.read_text())
        elif path.stem in presets.preset_names():
            config_obj = presets.config_to_json(presets.preset(path.stem))
        else:
            raise click.UsageError(f"no such config file or preset: {config_path}")
        config = presets.config_from_json(config_obj)
    overrides = {}
    if method:
        overrides["method"] = method
    if batch_log2 is not None:
        overrides["batch_log2"] = batch_log2
    if iterations is not None:
        overrides["iterations"] = iterations
    if overrides:
        config = replace(config, **overrides)
        config_obj = {**config_obj, **overrides}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out, config_obj)
    if sweep:
        if not sweep.startswith("seeds="):
            raise click.UsageError("--sweep expects seeds=A..B")
        lo, _, hi = sweep[len("seeds="):].partition("..")
        seeds = list(range(int(lo), int(hi) + 1))
        jobs = [(config, s, out / f"seed_{s}") for s in seeds]
        workers = min(_worker_cap(), len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                summaries = list(pool.map(_run_one_training, jobs))
        else:
            summaries = [_run_one_training(j) for j in jobs]
        rows = [
            [s["method"], s["batch_size"], s["seed"], s["final_rel_l2"]]
            for s in summaries
        ]
        finals = np.array([s["final_rel_l2"] for s in summaries])
        rows.append([config.method, config.batch_size, "mean", float(finals.mean())])
        rows.append([config.method, config.batch_size, "std", float(finals.std(ddof=1))])
        _write_csv(out / "summary.csv",
                   ["method", "batch_size", "seed", "final_rel_l2"], rows)
        manifest.add("summary.csv",
                     *[f"seed_{s}/summary.csv" for s in seeds])
        click.echo(f"sweep mean final rel_l2 = {finals.mean():.4e}")
    else:
        summary = _run_one_training((config, None, out))
        manifest.add("log.csv", "eval.csv", "summary.csv", "ckpt.bin")
        click.echo(f"final rel_l2 = {summary['final_rel_l2']:.4e}")
    manifest.write()


@main.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--problem", "problem_name", type=str, default="heat")
@click.option("--problem-config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--d", type=int, default=None, help="dimension for built-in problems")
@click.option("--m-log2", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--oracle-log2", type=int, default=evaluate.DEFAULT_ORACLE_LOG2,
              show_default=True, help="oracle sample count for BS problems")
@click.option("--grid", is_flag=True, help="emit a 2-D projection grid instead")
@click.option("--fixed", type=float, default=None,
              help="value for the fixed coordinates in --grid mode "
                   "(default: domain midpoint)")
@click.option("--resolution", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def eval_cmd(checkpoint, problem_name, problem_config, d, m_log2, seed,
             oracle_log2, grid, fixed, resolution, out):
    """Relative-L2 report, or a 50x50 projection grid with --grid."""
    params = nn.load_checkpoint(checkpoint)
    problem = _resolve_problem(problem_name, d, problem_config)
    if params.spec.widths[0] != problem.d:
        raise click.UsageError(
            f"checkpoint expects d={params.spec.widths[0]}, problem has d={problem.d}"
        )
    if grid:
        value = 0.5 * (problem.a + problem.b) if fixed is None else fixed
        assignments = {j: value for j in range(2, problem.d)}
        report = evaluate.projection_grid(
            params, problem, assignments, resolution=resolution,
            oracle_n=1 << oracle_log2, seed=seed,
        )
        _write_csv(Path(out), ["x1", "x2", "prediction", "exact", "rel_err"],
                   report.grid.tolist())
        click.echo(f"grid rel_l2 = {report.rel_l2:.4e}")
    else:
        report = evaluate.relative_l2(
            params, problem, m=1 << m_log2, seed=seed, oracle_n=1 << oracle_log2
        )
        _write_csv(
            Path(out),
            ["m", "seed", "rel_l2", "oracle_std_error"],
            [[report.m, report.seed, report.rel_l2,
              "" if report.oracle_std_error is None else report.oracle_std_error]],
        )
        click.echo(f"rel_l2 = {report.rel_l2:.4e}")


@main.command("quad-study")
@click.option("--problem", "problem_name", type=str, default="heat")
@click.option("--d", type=int, default=2, show_default=True)
@click.option("--n-log2", type=str, default="6..13", show_default=True,
              help="range A..B of log2 sample sizes")
@click.option("--replicates", type=int, default=32, show_default=True)
@click.option("--ref-log2", type=int, default=19, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--net-seed", type=int, default=0, show_default=True)
@click.option("--methods", type=str, default="iid,owen", show_default=True)
@click.option("--retrain", is_flag=True,
              help="retrain a network per sample (generalization-error "
                   "surrogate; expensive, no acceptance gate)")
@click.option("--train-iters", type=int, default=800, show_default=True,
              help="ERM iterations per retrained network")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def quad_study_cmd(problem_name, d, n_log2, replicates, ref_log2, seed,
                   net_seed, methods, retrain, train_iters, out):
    """Integration-error rate table for a frozen Xavier network."""
    problem = problems.builtin_problem(problem_name, d)
    lo, _, hi = n_log2.partition("..")
    n_list = [1 << m for m in range(int(lo), int(hi or lo) + 1)]
    method_list = tuple(m.strip() for m in methods.split(","))
    if retrain:
        table = quadstudy.retrain_study(
            problem, methods=method_list, n_list=n_list,
            replicates=replicates, seed=seed, train_iters=train_iters,
        )
    else:
        params = nn.xavier_init(nn.table1_spec(problem.d, seed=net_seed))
        table = quadstudy.rate_study(
            params, problem, methods=method_list,
            n_list=n_list, replicates=replicates, seed=seed, n_ref=1 << ref_log2,
        )
    out_path = Path(out)
    _write_csv(out_path, ["method", "n", "replicate", "abs_error"], table.rows)
    slope_rows = [
        [meth, fit[0], fit[1], fit[2]] for meth, fit in sorted(table.fits.items())
    ]
    slopes_path = out_path.with_name("slopes.csv" if out_path.name == "rates.csv"
                                     else out_path.stem + "_slopes.csv")
    _write_csv(slopes_path, ["method", "slope", "intercept", "r2"], slope_rows)
    for meth, fit in sorted(table.fits.items()):
        click.echo(f"{meth}: slope={fit[0]:.3f} r2={fit[2]:.4f}")


@main.command("bs-oracle")
@click.option("--d", type=int, default=5, show_default=True)
@click.option("--x", "x_str", type=str, required=True,
              help="spatial point, comma-separated (or one value for all coords)")
@click.option("--log2n", type=int, default=20, show_default=True)
@click.option("--method", type=click.Choice(lds.METHODS), default="iid",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def bs_oracle_cmd(d, x_str, log2n, method, seed, out):
    """Feynman-Kac estimate of the Black-Scholes solution at one point."""
    parts = [float(p) for p in x_str.split(",")]
    x = np.full(d, parts[0]) if len(parts) == 1 else np.asarray(parts)
    if x.shape[0] != d:
        raise click.UsageError(f"--x needs 1 or {d} values")
    problem = problems.bs_problem(d)
    est, se = problems.bs_oracle(
        x, problem, 1 << log2n, lds.SamplerSpec(method, d, seed)
    )
    click.echo(f"estimate={est!r} std_error={se!r}")
    if out:
        _write_csv(Path(out), ["estimate", "std_error"], [[est, se]])


@main.command("presets")
@click.option("--write-dir", type=click.Path(file_okay=False), default=None,
              help="materialize every preset as NAME.json in this directory")
def presets_cmd(write_dir):
    """List (or write out) the built-in training presets."""
    for name in presets.preset_names():
        click.echo(name)
    if write_dir:
        target = Path(write_dir)
        target.mkdir(parents=True, exist_ok=True)
        for name in presets.preset_names():
            obj = presets.config_to_json(presets.preset(name))
            (target / f"{name}.json").write_text(json.dumps(obj, indent=2))


def run(argv=None) -> int:
    """Library entry with the documented exit codes."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except nn.TrainingDivergedError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DIVERGED
    except quadstudy.OraclePrecisionError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PRECISION
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_FAILURE


def entry():  # console_scripts hook
    sys.exit(run())


if __name__ == "__main__":
    entry()
