"""Target distributions: potential energies, gradients, and exact samplers.

A target is an unnormalized log-density expressed as a potential
``U(theta) = -ln p(theta)`` plus its hand-derived gradient. Shipped targets:
Gaussian mixtures, zero-mean (rotated) Gaussians, and the Bayesian logistic
regression posterior. Densities are handled in log space throughout;
mixtures use log-sum-exp so that far-separated modes do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import accel

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Family kernels (numba-compatible; registered with the acceleration layer)
# ---------------------------------------------------------------------------


def _mixture_potential(theta, means, precs, logcs):
    # logcs[i] = ln w_i - (d ln 2pi + ln det cov_i) / 2
    k, d = means.shape
    best = -np.inf
    vals = np.empty(k)
    for i in range(k):
        quad = 0.0
        for a in range(d):
            s = 0.0
            for b in range(d):
                s += precs[i, a, b] * (theta[b] - means[i, b])
            quad += (theta[a] - means[i, a]) * s
        v = logcs[i] - 0.5 * quad
        vals[i] = v
        if v > best:
            best = v
    acc = 0.0
    for i in range(k):
        acc += np.exp(vals[i] - best)
    return -(best + np.log(acc))


def _mixture_gradient(theta, means, precs, logcs):
    k, d = means.shape
    best = -np.inf
    vals = np.empty(k)
    pulls = np.empty((k, d))
    for i in range(k):
        quad = 0.0
        for a in range(d):
            s = 0.0
            for b in range(d):
                s += precs[i, a, b] * (theta[b] - means[i, b])
            pulls[i, a] = s
            quad += (theta[a] - means[i, a]) * s
        v = logcs[i] - 0.5 * quad
        vals[i] = v
        if v > best:
            best = v
    norm = 0.0
    for i in range(k):
        vals[i] = np.exp(vals[i] - best)
        norm += vals[i]
    out = np.zeros(d)
    for i in range(k):
        r = vals[i] / norm
        for a in range(d):
            out[a] += r * pulls[i, a]
    return out


def _quadratic_potential(theta, prec, const):
    d = theta.shape[0]
    quad = 0.0
    for a in range(d):
        s = 0.0
        for b in range(d):
            s += prec[a, b] * theta[b]
        quad += theta[a] * s
    return 0.5 * quad + const


def _quadratic_gradient(theta, prec, const):
    d = theta.shape[0]
    out = np.empty(d)
    for a in range(d):
        s = 0.0
        for b in range(d):
            s += prec[a, b] * theta[b]
        out[a] = s
    return out


def _blr_potential(w, features, labels, inv_prior_var):
    n, d = features.shape
    acc = 0.0
    for i in range(n):
        a = 0.0
        for j in range(d):
            a += features[i, j] * w[j]
        # softplus(a) - t*a, numerically stable for large |a|
        if a > 0.0:
            sp = a + np.log1p(np.exp(-a))
        else:
            sp = np.log1p(np.exp(a))
        acc += sp - labels[i] * a
    for j in range(d):
        acc += 0.5 * inv_prior_var * w[j] * w[j]
    return acc


def _blr_gradient(w, features, labels, inv_prior_var):
    n, d = features.shape
    out = np.empty(d)
    for j in range(d):
        out[j] = inv_prior_var * w[j]
    for i in range(n):
        a = 0.0
        for j in range(d):
            a += features[i, j] * w[j]
        if a >= 0.0:
            y = 1.0 / (1.0 + np.exp(-a))
        else:
            e = np.exp(a)
            y = e / (1.0 + e)
        resid = y - labels[i]
        for j in range(d):
            out[j] += resid * features[i, j]
    return out


accel.register_family("gaussian_mixture", _mixture_potential, _mixture_gradient)
accel.register_family("quadratic", _quadratic_potential, _quadratic_gradient)
accel.register_family("blr", _blr_potential, _blr_gradient)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Target:
    """A differentiable unnormalized log-density.

    Attributes:
        dim: Dimension of the state space.
        potential: ``theta -> U(theta)`` in nats.
        gradient: ``theta -> grad U(theta)``.
        exact_mean: Analytic mean when available, else None.
        exact_sampler: ``(rng, n) -> (n, dim)`` draws when the density admits
            direct sampling, else None.
        name: Human-readable label used in error messages and reports.

    Targets are immutable after construction by convention and safe to share
    across concurrently running chains; all randomness is injected through
    per-chain generators.
    """

    dim: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    exact_mean: Optional[np.ndarray] = None
    exact_sampler: Optional[Callable] = None
    name: str = "target"
    kernel_family: Optional[str] = None
    kernel_args: tuple = ()
    _kernels: Optional[accel.Kernels] = field(default=None, repr=False)

    def trajectory_kernels(self) -> accel.Kernels:
        """Kernel bundle for the integrators (compiled for shipped families)."""
        if self._kernels is None:
            if self.kernel_family is not None:
                self._kernels = accel.family_kernels(self.kernel_family)
            else:
                self._kernels = accel.generic_kernels(self.potential, self.gradient)
        return self._kernels


@dataclass
class GaussianMixtureSpec:
    """Weights, means and covariances of a Gaussian mixture density."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        covs = np.asarray(self.covariances, dtype=np.float64)
        if covs.ndim == 2:
            covs = covs[None, :, :]
        self.covariances = covs
        k, d = self.means.shape
        if self.weights.shape != (k,) or self.covariances.shape != (k, d, d):
            raise ValueError(
                f"inconsistent mixture shapes: {k} weights, means {self.means.shape}, "
                f"covariances {self.covariances.shape}"
            )
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {self.weights.sum()!r}, not 1")
        for i, cov in enumerate(self.covariances):
            if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
                raise ValueError(f"covariance of component {i} is not symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError(
                    f"covariance of component {i} is not positive definite"
                ) from None

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass
class BlrModel:
    """Design matrix, binary labels and Gaussian prior variance for BLR."""

    features: np.ndarray
    labels: np.ndarray
    prior_variance: float

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if self.features.size == 0 or self.labels.size == 0:
            raise ValueError("BLR model requires a nonempty dataset")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        bad = ~np.isin(self.labels, (0.0, 1.0))
        if np.any(bad):
            raise ValueError(f"labels outside {{0,1}} at rows {np.nonzero(bad)[0][:5]}")
        if not self.prior_variance > 0:
            raise ValueError("prior_variance must be positive")


# ---------------------------------------------------------------------------
# Mixture math shared with the variational fit
# ---------------------------------------------------------------------------


def mixture_kernel_args(spec: GaussianMixtureSpec) -> tuple:
    """Precompute (means, precisions, log-constants) for the mixture kernels."""
    k, d = spec.means.shape
    precs = np.empty((k, d, d))
    logcs = np.empty(k)
    tiny = np.finfo(np.float64).tiny
    for i in range(k):
        chol = np.linalg.cholesky(spec.covariances[i])
        precs[i] = np.linalg.inv(spec.covariances[i])
        precs[i] = 0.5 * (precs[i] + precs[i].T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        logw = np.log(spec.weights[i]) if spec.weights[i] > 0 else np.log(tiny)
        logcs[i] = logw - 0.5 * (d * LOG_2PI + logdet)
    return spec.means.copy(), precs, logcs


def mixture_log_density(spec: GaussianMixtureSpec, theta: np.ndarray) -> float:
    """ln of the normalized mixture density at ``theta``."""
    cached = getattr(spec, "_cached_args", None)
    if cached is None:
        cached = mixture_kernel_args(spec)
        spec._cached_args = cached
    means, precs, logcs = cached
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    return -float(
        accel.family_kernels("gaussian_mixture").potential(theta, means, precs, logcs)
    )


def mixture_sample(spec: GaussianMixtureSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` exact samples: categorical component choice, then Gaussian."""
    k, d = spec.means.shape
    chols = np.stack([np.linalg.cholesky(c) for c in spec.covariances])
    comps = rng.choice(k, size=n, p=spec.weights)
    z = rng.standard_normal((n, d))
    out = spec.means[comps] + np.einsum("nab,nb->na", chols[comps], z)
    return out


# ---------------------------------------------------------------------------
# Target factories
# ---------------------------------------------------------------------------


def make_gaussian_mixture(spec: GaussianMixtureSpec) -> Target:
    """Target for ``U(theta) = -ln sum_i w_i N(theta; mu_i, cov_i)``.

    The potential keeps the mixture normalization constants (log-sum-exp
    stabilized) so component masses stay comparable across far modes; the
    gradient is the responsibility-weighted sum of precision pulls.
    """
    args = mixture_kernel_args(spec)
    fam = accel.family_kernels("gaussian_mixture")
    means, precs, logcs = args

    def potential(theta: np.ndarray) -> float:
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        return float(fam.potential(theta, means, precs, logcs))

    def gradient(theta: np.ndarray) -> np.ndarray:
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        return fam.gradient(theta, means, precs, logcs)

    return Target(
        dim=spec.dim,
        potential=potential,
        gradient=gradient,
        exact_mean=spec.weights @ spec.means,
        exact_sampler=lambda rng, n: mixture_sample(spec, rng, n),
        name=f"gaussian_mixture(k={spec.n_components}, d={spec.dim})",
        kernel_family="gaussian_mixture",
        kernel_args=args,
    )


def make_rotated_gaussian(variances: Sequence[float], angle: float) -> Target:
    """Zero-mean 2D Gaussian with covariance ``R diag(variances) R^T``.

    ``angle`` is the rotation in radians. With variances ``[1e2, 1e-2]`` and a
    quarter-turn rotation this is the strongly correlated benchmark target.
    """
    variances = np.asarray(variances, dtype=np.float64)
    if variances.shape != (2,):
        raise ValueError("expected exactly two variances")
    if np.any(variances <= 0):
        raise ValueError(f"variances must be positive, got {variances}")
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    cov = rot @ np.diag(variances) @ rot.T
    cov = 0.5 * (cov + cov.T)
    prec = rot @ np.diag(1.0 / variances) @ rot.T
    prec = 0.5 * (prec + prec.T)
    const = 0.5 * (2 * LOG_2PI + float(np.sum(np.log(variances))))
    chol = np.linalg.cholesky(cov)
    args = (prec, const)
    fam = accel.family_kernels("quadratic")

    def potential(theta: np.ndarray) -> float:
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        return float(fam.potential(theta, prec, const))

    def gradient(theta: np.ndarray) -> np.ndarray:
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        return fam.gradient(theta, prec, const)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, 2)) @ chol.T

    return Target(
        dim=2,
        potential=potential,
        gradient=gradient,
        exact_mean=np.zeros(2),
        exact_sampler=sampler,
        name=f"rotated_gaussian(variances={variances.tolist()}, angle={angle:.6g})",
        kernel_family="quadratic",
        kernel_args=args,
    )


def make_blr_target(model: BlrModel) -> Target:
    """Bayesian logistic regression posterior potential.

    ``U(w) = sum_n [softplus(w.phi_n) - t_n w.phi_n] + |w|^2 / (2 v)`` — the
    Bernoulli likelihood with a zero-mean Gaussian prior of variance ``v``
    per coordinate (additive constants dropped).
    """
    features = np.ascontiguousarray(model.features)
    labels = np.ascontiguousarray(model.labels)
    inv_pv = 1.0 / float(model.prior_variance)
    args = (features, labels, inv_pv)
    fam = accel.family_kernels("blr")

    def potential(w: np.ndarray) -> float:
        w = np.ascontiguousarray(w, dtype=np.float64)
        return float(fam.potential(w, features, labels, inv_pv))

    def gradient(w: np.ndarray) -> np.ndarray:
        w = np.ascontiguousarray(w, dtype=np.float64)
        return fam.gradient(w, features, labels, inv_pv)

    return Target(
        dim=features.shape[1],
        potential=potential,
        gradient=gradient,
        name=f"blr(n={features.shape[0]}, d={features.shape[1]})",
        kernel_family="blr",
        kernel_args=args,
    )


def custom_target(
    dim: int,
    potential: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    exact_mean: Optional[np.ndarray] = None,
    exact_sampler: Optional[Callable] = None,
    name: str = "custom",
) -> Target:
    """Wrap arbitrary callables as a Target (generic, uncompiled kernels)."""
    return Target(
        dim=dim,
        potential=potential,
        gradient=gradient,
        exact_mean=exact_mean,
        exact_sampler=exact_sampler,
        name=name,
    )


def exact_sample(target: Target, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws from the target's exact sampler.

    Raises:
        ValueError: if the target has no exact sampler (e.g. BLR posterior).
    """
    if target.exact_sampler is None:
        raise ValueError(f"no exact sampler for {target.name}")
    if n == 0:
        return np.empty((0, target.dim))
    out = np.asarray(target.exact_sampler(rng, n), dtype=np.float64)
    return out.reshape(n, target.dim)
