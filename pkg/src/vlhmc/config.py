"""Declarative experiment configs: TOML parsing, validation, serialization.

One experiment per file. The format is flat key/value tables with nested
arrays for mixture parameters — diff-friendly and language-neutral. The
writer emits a deterministic, round-trippable rendering (floats via
``repr``), which the reporting layer relies on for byte-stable outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .dynamics import DynamicsParams
from .samplers import EtParams, SamplerConfig
from .targets import (
    BlrModel,
    GaussianMixtureSpec,
    Target,
    make_blr_target,
    make_gaussian_mixture,
    make_rotated_gaussian,
)
from .varfit import AdamConfig, VarFitConfig

SAMPLERS = ("hmc", "lhmc", "lhmc-et", "vhmc", "parallel-hmc")
TARGET_KINDS = ("mixture", "rotated-gaussian", "blr")
METRICS = ("autocorrelation", "ess", "mmd", "rem", "occupancy", "accuracy", "auc")


class ConfigError(ValueError):
    """Invalid experiment config; the message lists every violation."""

    def __init__(self, violations: list[str]):
        super().__init__(
            "invalid experiment config:\n" + "\n".join(f"  - {v}" for v in violations)
        )
        self.violations = violations


@dataclass
class ExperimentConfig:
    """A validated experiment description plus its verbatim source text."""

    experiment_id: str
    sampler: str
    target_spec: dict
    sampler_config: SamplerConfig
    n_replicates: int
    master_seed: int
    metrics: list[str]
    output_dir: str
    theta_init: Optional[np.ndarray]
    mode_inits: Optional[np.ndarray]
    mode_centers: Optional[np.ndarray]
    varfit: VarFitConfig
    mixture_file: Optional[str]
    autocorrelation_max_lag: int
    text: str = field(repr=False, default="")
    raw: dict = field(repr=False, default_factory=dict)

    def build_target(self) -> Target:
        """Construct the non-BLR target described by the config."""
        spec = self.target_spec
        if spec["kind"] == "mixture":
            return make_gaussian_mixture(
                GaussianMixtureSpec(
                    weights=np.asarray(spec["weights"], dtype=np.float64),
                    means=np.asarray(spec["means"], dtype=np.float64),
                    covariances=np.asarray(spec["covariances"], dtype=np.float64),
                )
            )
        if spec["kind"] == "rotated-gaussian":
            return make_rotated_gaussian(spec["variances"], spec["angle"])
        raise ValueError("BLR targets are built per replicate from the dataset split")


def _get(d: dict, key: str, default=None):
    return d.get(key, default)


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment config, listing every violation."""
    raw = tomllib.loads(text)
    violations: list[str] = []

    experiment_id = _get(raw, "experiment_id", "")
    if not experiment_id or not isinstance(experiment_id, str):
        violations.append("experiment_id must be a nonempty string")

    sampler = _get(raw, "sampler", "")
    if sampler not in SAMPLERS:
        violations.append(f"sampler must be one of {SAMPLERS}, got {sampler!r}")

    n_replicates = _get(raw, "n_replicates", 1)
    if not isinstance(n_replicates, int) or n_replicates < 1:
        violations.append("n_replicates must be a positive integer")
    master_seed = _get(raw, "master_seed", 0)
    if not isinstance(master_seed, int):
        violations.append("master_seed must be an integer")
    output_dir = _get(raw, "output_dir", "")
    if not output_dir:
        violations.append("output_dir is required (or pass --out)")

    metrics = list(_get(raw, "metrics", []))
    for m in metrics:
        if m not in METRICS:
            violations.append(f"unknown metric {m!r}; valid metrics: {METRICS}")

    # --- target ---------------------------------------------------------
    tspec = dict(_get(raw, "target", {}))
    kind = tspec.get("kind", "")
    target_dim: Optional[int] = None
    exact_mean_l1: Optional[float] = None
    has_exact_sampler = False
    if kind not in TARGET_KINDS:
        violations.append(f"target.kind must be one of {TARGET_KINDS}, got {kind!r}")
    elif kind == "mixture":
        missing = [k for k in ("weights", "means", "covariances") if k not in tspec]
        if missing:
            violations.append(f"mixture target missing keys: {missing}")
        else:
            try:
                spec = GaussianMixtureSpec(
                    np.asarray(tspec["weights"], dtype=np.float64),
                    np.asarray(tspec["means"], dtype=np.float64),
                    np.asarray(tspec["covariances"], dtype=np.float64),
                )
                target_dim = spec.dim
                exact_mean_l1 = float(np.abs(spec.weights @ spec.means).sum())
                has_exact_sampler = True
            except (ValueError, np.linalg.LinAlgError) as exc:
                violations.append(f"bad mixture target: {exc}")
    elif kind == "rotated-gaussian":
        variances = tspec.get("variances")
        angle = tspec.get("angle")
        if variances is None or angle is None:
            violations.append("rotated-gaussian target requires 'variances' and 'angle'")
        elif len(variances) != 2 or any(v <= 0 for v in variances):
            violations.append(f"rotated-gaussian variances must be two positive reals, got {variances}")
        else:
            target_dim = 2
            exact_mean_l1 = 0.0
            has_exact_sampler = True
    elif kind == "blr":
        for key in ("dataset", "label_column", "positive_label"):
            if key not in tspec:
                violations.append(f"blr target requires target.{key}")
        ds_path = tspec.get("dataset")
        if ds_path and not Path(ds_path).exists():
            violations.append(f"blr dataset file not found: {ds_path}")
        tspec.setdefault("prior_variance", 100.0)
        tspec.setdefault("test_fraction", 0.2)
        tspec.setdefault("add_intercept", True)
        if not 0 < tspec["test_fraction"] < 1:
            violations.append("blr test_fraction must lie strictly between 0 and 1")

    # --- metric/target compatibility ------------------------------------
    if "mmd" in metrics and not has_exact_sampler:
        violations.append("metric 'mmd' requires a target with an exact sampler")
    if "rem" in metrics:
        if exact_mean_l1 is None:
            violations.append("metric 'rem' requires a target with a known exact mean")
        elif exact_mean_l1 <= 0:
            violations.append("metric 'rem' requires a nonzero exact mean (L1 norm is 0)")
    if "occupancy" in metrics and kind != "mixture" and "mode_centers" not in raw:
        violations.append(
            "metric 'occupancy' requires explicit mode_centers for non-mixture targets"
        )
    for m in ("accuracy", "auc"):
        if m in metrics and kind != "blr":
            violations.append(f"metric {m!r} is only defined for blr targets")

    # --- dynamics and sampler config -------------------------------------
    dyn_raw = dict(_get(raw, "dynamics", {}))
    dynamics = None
    try:
        dynamics = DynamicsParams(
            step_size=float(dyn_raw.get("step_size", 0.0)),
            leapfrog_steps=int(dyn_raw.get("leapfrog_steps", 0)),
            mass=np.asarray(dyn_raw.get("mass", 1.0), dtype=np.float64),
            friction=float(dyn_raw.get("friction", 0.0)),
            inverse_temperature=float(dyn_raw.get("inverse_temperature", 1.0)),
        )
    except (ValueError, TypeError) as exc:
        violations.append(f"bad [dynamics]: {exc}")

    sc_raw = dict(_get(raw, "sampler_config", {}))
    sampler_config = None
    if dynamics is not None:
        try:
            et_raw = sc_raw.get("et")
            et = None
            if et_raw is not None:
                et = EtParams(
                    sigma=float(et_raw.get("sigma", 1.0)),
                    max_iters=int(et_raw.get("max_iters", 10)),
                    err=float(et_raw.get("err", 0.01)),
                )
            elif sampler == "lhmc-et":
                et = EtParams()
            jitter = sc_raw.get("leapfrog_jitter")
            sampler_config = SamplerConfig(
                dynamics=dynamics,
                n_samples=int(sc_raw.get("n_samples", 0)),
                burn_in=int(sc_raw.get("burn_in", 0)),
                beta_mix=float(sc_raw.get("beta_mix", 0.1)),
                et=et,
                rejection_estimate_draws=int(sc_raw.get("rejection_estimate_draws", 1)),
                leapfrog_jitter=tuple(int(v) for v in jitter) if jitter else None,
            )
        except (ValueError, TypeError) as exc:
            violations.append(f"bad [sampler_config]: {exc}")

    # --- initial points ---------------------------------------------------
    theta_init = raw.get("theta_init")
    if theta_init is not None:
        theta_init = np.asarray(theta_init, dtype=np.float64)
        if target_dim is not None and theta_init.shape != (target_dim,):
            violations.append(
                f"theta_init has shape {theta_init.shape}, target dimension is {target_dim}"
            )
    elif sampler in ("hmc", "lhmc", "lhmc-et", "vhmc") and kind != "blr":
        violations.append("theta_init is required for this sampler/target")

    mode_inits = raw.get("mode_inits")
    if sampler == "parallel-hmc":
        if not mode_inits:
            violations.append("parallel-hmc requires mode_inits (one start per chain)")
        else:
            mode_inits = np.atleast_2d(np.asarray(mode_inits, dtype=np.float64))
            if target_dim is not None and mode_inits.shape[1] != target_dim:
                violations.append("mode_inits dimension does not match the target")
    elif mode_inits is not None:
        mode_inits = np.atleast_2d(np.asarray(mode_inits, dtype=np.float64))

    mode_centers = raw.get("mode_centers")
    if mode_centers is not None:
        mode_centers = np.atleast_2d(np.asarray(mode_centers, dtype=np.float64))
    elif "occupancy" in metrics and kind == "mixture" and "means" in tspec:
        mode_centers = np.atleast_2d(np.asarray(tspec["means"], dtype=np.float64))

    # --- variational fit --------------------------------------------------
    vf_raw = dict(_get(raw, "varfit", {}))
    adam_raw = dict(vf_raw.get("adam", {}))
    vf_dyn_raw = vf_raw.get("dynamics")
    try:
        if vf_dyn_raw is not None:
            vf_dynamics = DynamicsParams(
                step_size=float(vf_dyn_raw.get("step_size", 0.1)),
                leapfrog_steps=int(vf_dyn_raw.get("leapfrog_steps", 30)),
                mass=np.asarray(vf_dyn_raw.get("mass", 1.0), dtype=np.float64),
                friction=float(vf_dyn_raw.get("friction", 0.5)),
                inverse_temperature=float(vf_dyn_raw.get("inverse_temperature", 1.0)),
            )
        elif dynamics is not None:
            vf_dynamics = dynamics
        else:
            vf_dynamics = DynamicsParams(step_size=0.1, leapfrog_steps=30, friction=0.5)
        box = vf_raw.get("start_box", [-10.0, 10.0])
        varfit = VarFitConfig(
            n_starts=int(vf_raw.get("n_starts", 50)),
            start_box=(box[0], box[1]),
            per_mode_samples=int(vf_raw.get("per_mode_samples", 2000)),
            per_mode_burn_in=int(vf_raw.get("per_mode_burn_in", 200)),
            merge_tol=float(vf_raw.get("merge_tol", 0.5)),
            envelope_safety=float(vf_raw.get("envelope_safety", 1.2)),
            adam=AdamConfig(
                learning_rate=float(adam_raw.get("learning_rate", 0.05)),
                beta1=float(adam_raw.get("beta1", 0.9)),
                beta2=float(adam_raw.get("beta2", 0.999)),
                epsilon_hat=float(adam_raw.get("epsilon_hat", 1e-8)),
                max_steps=int(adam_raw.get("max_steps", 5000)),
                grad_tol=float(adam_raw.get("grad_tol", 1e-6)),
            ),
            dynamics=vf_dynamics,
        )
    except (ValueError, TypeError, IndexError) as exc:
        violations.append(f"bad [varfit]: {exc}")
        varfit = VarFitConfig()
    mixture_file = vf_raw.get("mixture_file")
    if mixture_file is not None and not Path(mixture_file).exists():
        violations.append(f"varfit.mixture_file not found: {mixture_file}")

    if violations:
        raise ConfigError(violations)

    return ExperimentConfig(
        experiment_id=experiment_id,
        sampler=sampler,
        target_spec=tspec,
        sampler_config=sampler_config,
        n_replicates=n_replicates,
        master_seed=master_seed,
        metrics=metrics,
        output_dir=str(output_dir),
        theta_init=theta_init,
        mode_inits=mode_inits,
        mode_centers=mode_centers,
        varfit=varfit,
        mixture_file=mixture_file,
        autocorrelation_max_lag=int(raw.get("autocorrelation_max_lag", 50)),
        text=text,
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    return parse_config_text(path.read_text())


# ---------------------------------------------------------------------------
# Deterministic TOML writer (round-trips through tomllib)
# ---------------------------------------------------------------------------


def _fmt_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isinf(f) or math.isnan(f):
            return "inf" if f > 0 else ("-inf" if f < 0 else "nan")
        text = repr(f)
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, np.ndarray):
        return _fmt_value(v.tolist())
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(item) for item in v) + "]"
    raise TypeError(f"cannot serialize {type(v)!r} to TOML")


def dump_toml(data: dict, _prefix: str = "") -> str:
    """Render a nested dict of scalars/arrays/tables as deterministic TOML."""
    lines = []
    tables = []
    for key, value in data.items():
        if isinstance(value, dict):
            tables.append((key, value))
        else:
            lines.append(f"{key} = {_fmt_value(value)}")
    out = "\n".join(lines)
    for key, value in tables:
        name = f"{_prefix}{key}"
        out += f"\n\n[{name}]\n" + dump_toml(value, _prefix=f"{name}.")
    return out.strip() + "\n"
