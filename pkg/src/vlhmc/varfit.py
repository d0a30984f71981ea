"""Variational mixture construction: the guide-point source.

Pipeline: multi-start Adam descent on the potential finds the modes; an
LHMC chain per mode collects local samples; each mode gets a Gaussian
maximum-likelihood fit; the fits combine into a mixture with
Laplace-approximation weights and an empirical rejection-sampling envelope
constant. Guide points are then exact target draws obtained by rejection
sampling against that envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DynamicsParams
from .rngs import as_generator
from .targets import GaussianMixtureSpec, Target, mixture_kernel_args, mixture_sample
from . import accel

RIDGE = 1e-6


class OptimizationError(RuntimeError):
    """Descent hit a non-finite potential or gradient; carries the iterate."""

    def __init__(self, message: str, theta: np.ndarray):
        super().__init__(message)
        self.theta = theta


class EnvelopeError(RuntimeError):
    """Rejection sampling exhausted its trial budget."""


@dataclass
class AdamConfig:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8
    max_steps: int = 5000
    grad_tol: float = 1e-6


@dataclass
class VariationalMixture:
    """Fitted Gaussian mixture q plus its rejection-sampling envelope.

    ``envelope_c`` bounds the ratio of the unnormalized target density to q
    (it absorbs the target's unknown normalizer, so its magnitude is
    arbitrary; only ratios against it matter).
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    envelope_c: float

    def __post_init__(self):
        spec = GaussianMixtureSpec(self.weights, self.means, self.covariances)
        self.weights, self.means, self.covariances = spec.weights, spec.means, spec.covariances
        if not self.envelope_c > 0:
            raise ValueError("envelope_c must be positive")
        self._spec = spec
        self._args = mixture_kernel_args(spec)
        self._chols = np.stack([np.linalg.cholesky(c) for c in spec.covariances])

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_density(self, theta: np.ndarray) -> float:
        """ln q(theta) of the normalized mixture."""
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        means, precs, logcs = self._args
        return -float(
            accel.family_kernels("gaussian_mixture").potential(theta, means, precs, logcs)
        )

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        i = int(rng.choice(self.n_components, p=self.weights))
        z = rng.standard_normal(self.dim)
        return self.means[i] + self._chols[i] @ z

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return mixture_sample(self._spec, rng, n)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "envelope_c": float(self.envelope_c),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VariationalMixture":
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            means=np.asarray(d["means"], dtype=np.float64),
            covariances=np.asarray(d["covariances"], dtype=np.float64),
            envelope_c=float(d["envelope_c"]),
        )


@dataclass
class VarFitConfig:
    """Settings for :func:`build_variational`."""

    n_starts: int = 50
    start_box: tuple = (-10.0, 10.0)
    per_mode_samples: int = 2000
    per_mode_burn_in: int = 200
    merge_tol: float = 0.5
    envelope_safety: float = 1.2
    adam: AdamConfig = field(default_factory=AdamConfig)
    dynamics: DynamicsParams = field(
        default_factory=lambda: DynamicsParams(step_size=0.1, leapfrog_steps=30, friction=0.5)
    )


def adam_minimize(target: Target, theta0, cfg: AdamConfig) -> tuple[np.ndarray, float]:
    """Adam descent on the potential with bias correction.

    Stops when ``max|grad U|`` drops below ``cfg.grad_tol`` or after
    ``cfg.max_steps`` updates, whichever comes first; a start with zero
    gradient is returned unchanged. Returns the final iterate and its
    potential.
    """
    theta = np.atleast_1d(np.asarray(theta0, dtype=np.float64)).copy()
    g = target.gradient(theta)
    if not np.all(np.isfinite(g)):
        raise OptimizationError(f"non-finite gradient at start {theta}", theta)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    while np.max(np.abs(g)) >= cfg.grad_tol and t < cfg.max_steps:
        t += 1
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon_hat)
        if not np.all(np.isfinite(theta)):
            raise OptimizationError(f"iterate diverged at step {t}", theta)
        g = target.gradient(theta)
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"non-finite gradient at step {t}", theta)
    u = target.potential(theta)
    if not math.isfinite(u):
        raise OptimizationError("non-finite potential at final iterate", theta)
    return theta, float(u)


def find_modes(
    target: Target,
    n_starts: int,
    start_box: tuple,
    cfg: AdamConfig,
    rng,
    merge_tol: float = 0.5,
) -> list[tuple[np.ndarray, float]]:
    """Multi-start descent with deduplication.

    Draws ``n_starts`` uniform points in the box, minimizes each, and merges
    results closer than ``merge_tol`` in whitened units (coordinates scaled
    by the per-dimension standard deviation of the start cloud). Each cluster
    keeps its lowest-potential representative; the list comes back sorted by
    potential. Start order cannot matter: candidates are sorted before the
    greedy merge.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    gen, _ = as_generator(rng)
    low, high = start_box
    low = np.broadcast_to(np.asarray(low, dtype=np.float64), (target.dim,))
    high = np.broadcast_to(np.asarray(high, dtype=np.float64), (target.dim,))
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high)) and np.all(high > low)):
        raise ValueError("start_box must be finite with high > low")
    starts = gen.uniform(low, high, size=(n_starts, target.dim))
    scale = starts.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    results = []
    for s in starts:
        try:
            results.append(adam_minimize(target, s, cfg))
        except OptimizationError:
            continue
    if not results:
        raise RuntimeError(f"all {n_starts} mode searches diverged on {target.name}")
    results.sort(key=lambda r: (r[1], tuple(r[0])))
    modes: list[tuple[np.ndarray, float]] = []
    for theta, u in results:
        for rep_theta, _ in modes:
            if float(np.linalg.norm((theta - rep_theta) / scale)) < merge_tol:
                break
        else:
            modes.append((theta, u))
    return modes


def fit_mode_gaussian(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian maximum-likelihood fit of a sample cloud.

    Returns the sample mean and the (1/M)-normalized sample covariance plus
    a small ridge so the result is always positive definite.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m, d = samples.shape
    if m < d + 1:
        raise ValueError(f"need at least dim+1={d + 1} samples, got {m}")
    mu = samples.mean(axis=0)
    centered = samples - mu
    cov = (centered.T @ centered) / m + RIDGE * np.eye(d)
    return mu, cov


def build_variational(target: Target, cfg: VarFitConfig, rng) -> VariationalMixture:
    """Fit the guide-point mixture for a target.

    Mode centers come from :func:`find_modes`; each center seeds an LHMC
    chain whose post-burn-in samples feed :func:`fit_mode_gaussian`.
    Component weights follow the Laplace rule
    ``w_i ∝ exp(-U(mu_i)) det(cov_i)^(1/2)`` (uniform weights would repeat
    the parallel-HMC deficiency). The envelope constant is the empirical
    maximum of unnormalized-target/q over every fit sample, times a safety
    factor.
    """
    from .samplers import SamplerConfig, lhmc_chain  # deferred: samplers uses this module

    gen, _ = as_generator(rng)
    modes = find_modes(
        target, cfg.n_starts, cfg.start_box, cfg.adam, gen, merge_tol=cfg.merge_tol
    )
    chain_cfg = SamplerConfig(
        dynamics=cfg.dynamics,
        n_samples=cfg.per_mode_samples + cfg.per_mode_burn_in,
    )
    means, covs, fit_samples, mode_potentials = [], [], [], []
    for center, u_center in modes:
        seed = int(gen.integers(2**31 - 1))
        chain = lhmc_chain(target, center, chain_cfg, seed)
        local = chain.samples[cfg.per_mode_burn_in :]
        mu, cov = fit_mode_gaussian(local)
        means.append(mu)
        covs.append(cov)
        fit_samples.append(local)
        mode_potentials.append(u_center)
    # Laplace weights evaluate the density factor at the located mode center
    # (the expansion point); with overlapping basins the fitted mean can
    # drift off the mode, which would skew the weights.
    log_w = np.array(
        [
            -u_center + 0.5 * float(np.linalg.slogdet(cov)[1])
            for u_center, cov in zip(mode_potentials, covs)
        ]
    )
    log_w -= log_w.max()
    weights = np.exp(log_w)
    weights /= weights.sum()
    qmix = VariationalMixture(
        weights=weights,
        means=np.stack(means),
        covariances=np.stack(covs),
        envelope_c=1.0,
    )
    stacked = np.vstack(fit_samples)
    log_ratio = np.array(
        [-target.potential(s) - qmix.log_density(s) for s in stacked]
    )
    qmix.envelope_c = float(cfg.envelope_safety * math.exp(float(log_ratio.max())))
    if not qmix.envelope_c > 0:
        raise EnvelopeError(
            "envelope constant underflowed; the target's potential scale is too large"
        )
    return qmix


def rejection_sample(
    qmix: VariationalMixture,
    target: Target,
    rng,
    max_trials: int = 100_000,
) -> np.ndarray:
    """One exact target draw by rejection sampling against the mixture envelope.

    Repeats {draw theta ~ q, accept with probability p_tilde / (c q)} until a
    draw is accepted. Raises :class:`EnvelopeError` after ``max_trials``
    attempts (the envelope constant is too small for the acceptance rate to
    be usable).
    """
    gen, _ = as_generator(rng)
    log_c = math.log(qmix.envelope_c)
    for _ in range(max_trials):
        theta = qmix.sample_one(gen)
        u = gen.uniform()
        log_ratio = -target.potential(theta) - qmix.log_density(theta) - log_c
        if u <= math.exp(min(log_ratio, 50.0)):
            return theta
    raise EnvelopeError("envelope constant too small: trial budget exhausted")
