"""Experiment runner and command-line interface.

Subcommands: ``run`` executes a config's replicated experiment and writes
CSV reports, ``fit`` builds and serializes a variational mixture, ``report``
re-aggregates a run directory, ``selftest`` exercises the fast invariant
suite. Replicate i always uses seed ``master_seed + i``, so results are
identical whether replicates run serially or across workers.

Output files per run: ``report.csv`` (one row per replicate per metric),
``aggregate.csv`` (mean/std per metric), ``series_<metric>_<rep>.csv``
(lag- or prefix-indexed metric series), ``config_echo.toml`` (verbatim
input), and ``timings.csv`` (wall clock; excluded from determinism
guarantees).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as data_mod
from . import diagnostics as diag
from .config import ConfigError, ExperimentConfig, dump_toml, load_config, parse_config_text
from .samplers import (
    Chain,
    hmc_chain,
    lhmc_chain,
    lhmc_et_chain,
    parallel_hmc,
    vhmc_chain,
)
from .targets import BlrModel, Target, exact_sample, make_blr_target
from .varfit import VariationalMixture, build_variational

ENV_OUTPUT_DIR = "VLHMC_OUTPUT_DIR"


@dataclass
class RunReport:
    """Per-replicate metric rows plus their aggregates."""

    experiment_id: str
    config_text: str
    rows: list[tuple[int, str, float]]
    aggregates: dict[str, tuple[float, float]]
    wall_clock: list[tuple[int, float]]
    errors: list[tuple[int, str]]
    output_dir: Path


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _aggregate(rows: list[tuple[int, str, float]]) -> dict[str, tuple[float, float]]:
    by_metric: dict[str, list[float]] = {}
    for _, metric, value in rows:
        by_metric.setdefault(metric, []).append(value)
    out = {}
    for metric, values in by_metric.items():
        arr = np.asarray(values, dtype=np.float64)
        out[metric] = (float(arr.mean()), float(arr.std()))
    return out


def _load_blr_dataset(tspec: dict) -> data_mod.Dataset:
    ds = data_mod.load_csv(
        tspec["dataset"],
        tspec["label_column"],
        str(tspec["positive_label"]),
    )
    ds = data_mod.normalize(ds)
    if tspec.get("add_intercept", True):
        ds = data_mod.add_intercept(ds)
    return ds


def _replicate_rng(cfg: ExperimentConfig, replicate: int, stream: int) -> np.random.Generator:
    # Separate deterministic streams per replicate for split/metric draws.
    return np.random.default_rng((cfg.master_seed, replicate, stream))


def _run_chain(cfg: ExperimentConfig, target: Target, theta_init, seed: int,
               qmix: Optional[VariationalMixture]) -> Chain:
    sc = cfg.sampler_config
    if cfg.sampler == "hmc":
        return hmc_chain(target, theta_init, sc, seed)
    if cfg.sampler == "lhmc":
        return lhmc_chain(target, theta_init, sc, seed)
    if cfg.sampler == "lhmc-et":
        return lhmc_et_chain(target, theta_init, sc, seed)
    if cfg.sampler == "vhmc":
        return vhmc_chain(target, theta_init, qmix, sc, seed)
    if cfg.sampler == "parallel-hmc":
        return parallel_hmc(target, cfg.mode_inits, sc, seed)
    raise ValueError(f"unknown sampler {cfg.sampler!r}")


def run_replicate(
    cfg: ExperimentConfig, replicate: int
) -> tuple[list[tuple[int, str, float]], dict[str, diag.MetricSeries], float, Optional[str]]:
    """Run one replicate; returns (rows, series, wall_seconds, error)."""
    t0 = time.perf_counter()
    rows: list[tuple[int, str, float]] = []
    series: dict[str, diag.MetricSeries] = {}
    seed = cfg.master_seed + replicate
    try:
        test_ds = None
        if cfg.target_spec["kind"] == "blr":
            ds = _load_blr_dataset(cfg.target_spec)
            train, test_ds = data_mod.split(
                ds, cfg.target_spec["test_fraction"], _replicate_rng(cfg, replicate, 0)
            )
            target = make_blr_target(
                BlrModel(train.features, train.labels, cfg.target_spec["prior_variance"])
            )
            theta_init = (
                cfg.theta_init if cfg.theta_init is not None else np.zeros(target.dim)
            )
        else:
            target = cfg.build_target()
            theta_init = cfg.theta_init

        qmix = None
        if cfg.sampler == "vhmc":
            if cfg.mixture_file is not None:
                qmix = load_mixture(cfg.mixture_file)
            else:
                qmix = build_variational(
                    target, cfg.varfit, _replicate_rng(cfg, replicate, 1)
                )

        chain = _run_chain(cfg, target, theta_init, seed, qmix)
        post = chain.samples[cfg.sampler_config.burn_in :]
        rows.append((replicate, "acceptance_rate", chain.acceptance_rate))
        rows.append((replicate, "retained_samples", float(post.shape[0])))

        for metric in cfg.metrics:
            if metric == "ess":
                rows.append((replicate, "ess", diag.ess(post)))
            elif metric == "autocorrelation":
                max_lag = min(cfg.autocorrelation_max_lag, post.shape[0] - 2)
                s = diag.autocorrelation(post, max_lag)
                series[f"autocorrelation_{replicate}"] = s
                lag = min(10, max_lag)
                rows.append((replicate, "autocorrelation_lag10", float(s.values[lag])))
            elif metric == "mmd":
                exact = exact_sample(
                    target, post.shape[0], _replicate_rng(cfg, replicate, 2)
                )
                rows.append((replicate, "mmd", diag.mmd2(post, exact)))
            elif metric == "rem":
                s = diag.rem_series(post, target.exact_mean)
                series[f"rem_{replicate}"] = s
                rows.append((replicate, "rem_final", float(s.values[-1])))
            elif metric == "occupancy":
                centers = cfg.mode_centers
                occ = diag.mode_occupancy(post, centers)
                for j, frac in enumerate(occ):
                    rows.append((replicate, f"occupancy_{j}", float(frac)))
            elif metric in ("accuracy", "auc"):
                acc, auc = data_mod.evaluate_classifier(post, test_ds)
                rows.append((replicate, metric, acc if metric == "accuracy" else auc))
        return rows, series, time.perf_counter() - t0, None
    except Exception as exc:  # replicate failures are recorded, not fatal
        rows = [(replicate, "replicate_failed", 1.0)]
        return rows, {}, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"


def _run_replicate_from_text(config_text: str, replicate: int, master_seed: int):
    # Worker-side entry: configs cross process boundaries as text; the seed
    # travels separately so CLI overrides survive.
    cfg = parse_config_text(config_text)
    cfg.master_seed = master_seed
    return run_replicate(cfg, replicate)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> RunReport:
    """Execute every replicate, compute metrics, and write the report files."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = {}
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_replicate_from_text, cfg.text, i, cfg.master_seed): i
                for i in range(cfg.n_replicates)
            }
            for fut, i in futures.items():
                results[i] = fut.result()
    else:
        for i in range(cfg.n_replicates):
            results[i] = run_replicate(cfg, i)

    rows: list[tuple[int, str, float]] = []
    wall: list[tuple[int, float]] = []
    errors: list[tuple[int, str]] = []
    for i in range(cfg.n_replicates):
        rep_rows, rep_series, seconds, err = results[i]
        rows.extend(rep_rows)
        wall.append((i, seconds))
        if err is not None:
            errors.append((i, err))
        for name, s in rep_series.items():
            with open(out_dir / f"series_{name}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["index", "value"])
                for idx, val in zip(s.index, s.values):
                    writer.writerow([idx, _fmt(val)])

    aggregates = _aggregate(rows)
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment_id", "replicate", "metric", "value"])
        for replicate, metric, value in rows:
            writer.writerow([cfg.experiment_id, replicate, metric, _fmt(value)])
    _write_aggregate(out_dir / "aggregate.csv", cfg.experiment_id, aggregates)
    (out_dir / "config_echo.toml").write_text(cfg.text)
    with open(out_dir / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "seconds"])
        for i, seconds in wall:
            writer.writerow([i, f"{seconds:.6f}"])
    if errors:
        with open(out_dir / "errors.log", "w") as fh:
            for i, msg in errors:
                fh.write(f"replicate {i}: {msg}\n")
    return RunReport(
        experiment_id=cfg.experiment_id,
        config_text=cfg.text,
        rows=rows,
        aggregates=aggregates,
        wall_clock=wall,
        errors=errors,
        output_dir=out_dir,
    )


def _write_aggregate(path: Path, experiment_id: str, aggregates: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment_id", "metric", "mean", "std"])
        for metric in sorted(aggregates):
            mean, std = aggregates[metric]
            writer.writerow([experiment_id, metric, _fmt(mean), _fmt(std)])


def reaggregate(run_dir) -> Path:
    """Recompute aggregate.csv from an existing report.csv."""
    run_dir = Path(run_dir)
    report = run_dir / "report.csv"
    if not report.exists():
        raise FileNotFoundError(f"no report.csv in {run_dir}")
    rows = []
    experiment_id = ""
    with open(report, newline="") as fh:
        for record in csv.DictReader(fh):
            experiment_id = record["experiment_id"]
            rows.append(
                (int(record["replicate"]), record["metric"], float(record["value"]))
            )
    _write_aggregate(run_dir / "aggregate.csv", experiment_id, _aggregate(rows))
    return run_dir / "aggregate.csv"


def save_mixture(qmix: VariationalMixture, path) -> None:
    Path(path).write_text(dump_toml(qmix.to_dict()))


def load_mixture(path) -> VariationalMixture:
    try:
        import tomllib
    except ModuleNotFoundError:  # pragma: no cover
        import tomli as tomllib
    with open(path, "rb") as fh:
        return VariationalMixture.from_dict(tomllib.load(fh))


def fit_mixture(cfg: ExperimentConfig, out_path=None) -> Path:
    """Build the variational mixture for a config's target and serialize it."""
    if cfg.target_spec["kind"] == "blr":
        raise ValueError("fit expects a synthetic target; BLR fits are built per split")
    target = cfg.build_target()
    qmix = build_variational(target, cfg.varfit, np.random.default_rng(cfg.master_seed))
    path = Path(out_path) if out_path else Path(cfg.output_dir) / "mixture.toml"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_mixture(qmix, path)
    return path


# ---------------------------------------------------------------------------
# Self test: the fast invariant suite
# ---------------------------------------------------------------------------


def selftest() -> int:
    """Run quick structural checks; print one PASS/FAIL line per check."""
    from .dynamics import DynamicsParams, PhasePoint, dlhmc, leapfrog, thermal_kick
    from .targets import GaussianMixtureSpec, make_gaussian_mixture

    checks: list[tuple[str, bool]] = []
    target = make_gaussian_mixture(
        GaussianMixtureSpec([1.0], [[0.0, 0.0]], [np.eye(2)])
    )
    rng = np.random.default_rng(0)
    params = DynamicsParams(step_size=0.05, leapfrog_steps=30)

    state = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    fwd = leapfrog(target, state, params)
    back = leapfrog(target, PhasePoint(fwd.theta, -fwd.p), params)
    checks.append(
        (
            "leapfrog reversibility",
            bool(
                np.allclose(back.theta, state.theta, atol=1e-10)
                and np.allclose(-back.p, state.p, atol=1e-10)
            ),
        )
    )

    theta = rng.standard_normal(2)
    g = target.gradient(theta)
    h = 1e-5
    fd = np.array(
        [
            (
                target.potential(theta + h * e) - target.potential(theta - h * e)
            )
            / (2 * h)
            for e in np.eye(2)
        ]
    )
    checks.append(("gradient finite differences", bool(np.allclose(g, fd, rtol=1e-5, atol=1e-7))))

    p = rng.standard_normal(2)
    p2, de = thermal_kick(p, params, rng)
    checks.append(("frictionless kick is a no-op", bool(np.array_equal(p, p2) and de == 0.0)))

    s0 = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    out1, ledger1 = dlhmc(target, s0, params, np.random.default_rng(5))
    out2, ledger2 = dlhmc(target, s0, params, np.random.default_rng(99))
    checks.append(
        (
            "frictionless trajectory ignores the kick stream",
            bool(np.array_equal(out1.theta, out2.theta) and ledger1.delta_e == 0.0),
        )
    )

    x = rng.standard_normal((50, 2))
    checks.append(("mmd2(X, X) == 0", diag.mmd2(x, x) == 0.0))
    rho = diag.autocorrelation(x, 5)
    checks.append(("autocorrelation lag 0 is 1", rho.values[0] == 1.0))
    rem = diag.rem_series(np.zeros((1, 2)), [-0.4, -0.4])
    checks.append(("REM of zero sample vs (-.4,-.4) is 1", float(rem.values[0]) == 1.0))

    ok = True
    for name, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok = ok and passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _resolve_config(args) -> Path:
    path = args.config_path or args.config
    if path is None:
        raise FileNotFoundError("config not found: no config path given")
    return Path(path)


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlhmc",
        description="Multi-modal MCMC benchmark runner (HMC / LHMC / LHMC-ET / VHMC)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    fit_p = sub.add_parser("fit", help="build and serialize a variational mixture")
    for p in (run_p, fit_p):
        p.add_argument("config_path", nargs="?", help="path to the TOML config")
        p.add_argument("--config", help="path to the TOML config (flag form)")
        p.add_argument("--out", help="override the output directory/file")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--workers", type=int, default=1, help="concurrent replicates")

    rep_p = sub.add_parser("report", help="re-aggregate an existing run directory")
    rep_p.add_argument("run_dir")

    sub.add_parser("selftest", help="run the fast invariant suite")

    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            return selftest()
        if args.command == "report":
            path = reaggregate(args.run_dir)
            print(f"wrote {path}")
            return 0

        cfg_path = _resolve_config(args)
        cfg = load_config(cfg_path)
        out_override = args.out or os.environ.get(ENV_OUTPUT_DIR)
        if out_override:
            cfg.output_dir = str(out_override)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.command == "fit":
            path = fit_mixture(cfg, out_path=args.out)
            print(f"wrote {path}")
            return 0
        report = run_experiment(cfg, workers=args.workers)
        for metric in sorted(report.aggregates):
            mean, std = report.aggregates[metric]
            print(f"{cfg.experiment_id}  {metric}: {mean:.6g} +/- {std:.6g}")
        if report.errors:
            for i, msg in report.errors:
                print(f"replicate {i} failed: {msg}", file=sys.stderr)
            return 1
        print(f"report written to {report.output_dir}")
        return 0
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
