"""Sample-quality metrics: autocorrelation, ESS, MMD, REM, mode occupancy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricSeries:
    """A named series over a lag or sample-count axis."""

    name: str
    index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.index = np.asarray(self.index)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.index.shape != self.values.shape:
            raise ValueError("index and values must have matching shapes")
        if self.index.size > 1 and not np.all(np.diff(self.index) > 0):
            raise ValueError("index must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite values in series {self.name!r}")


def _as_matrix(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"expected a (n, d) sample matrix, got shape {x.shape}")
    return x


def _autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Per-dimension autocovariance sums for lags 0..max_lag (FFT, zero-padded)."""
    n, d = x.shape
    centered = x - x.mean(axis=0)
    size = 1
    while size < 2 * n:
        size *= 2
    f = np.fft.rfft(centered, n=size, axis=0)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=0)[: max_lag + 1].real
    return acov  # unnormalized: acov[s, j] = sum_t xc[t, j] * xc[t+s, j]


def autocorrelation(samples, max_lag: int) -> MetricSeries:
    """Normalized autocovariance at lags 0..max_lag, averaged over dimensions.

    Uses the standard single-mean estimator
    ``rho(s) = sum_t (x_t - xbar)(x_{t+s} - xbar) / sum_t (x_t - xbar)^2``
    per dimension; ``rho(0)`` is exactly 1.

    Raises:
        ValueError: fewer than ``max_lag + 2`` samples or a zero-variance
            dimension (the normalization is undefined).
    """
    x = _as_matrix(samples)
    n = x.shape[0]
    if n < max_lag + 2:
        raise ValueError(f"need at least max_lag+2={max_lag + 2} samples, got {n}")
    acov = _autocov(x, max_lag)
    if np.any(acov[0] <= 0):
        raise ValueError("zero-variance chain: autocorrelation undefined")
    rho = (acov / acov[0]).mean(axis=1)
    return MetricSeries("autocorrelation", np.arange(max_lag + 1), rho)


def ess(samples) -> float:
    """Effective sample size ``N / (1 + 2 sum_s rho(s))``, averaged over dims.

    The lag sum per dimension truncates at the first lag with
    ``rho(s) < 0.05`` and is hard-capped at N/2 lags.
    """
    x = _as_matrix(samples)
    n = x.shape[0]
    if n < 3:
        raise ValueError("need at least 3 samples for an ESS estimate")
    max_lag = n // 2
    acov = _autocov(x, max_lag)
    if np.any(acov[0] <= 0):
        raise ValueError("zero-variance chain: ESS undefined")
    rho = acov / acov[0]
    per_dim = np.empty(x.shape[1])
    for j in range(x.shape[1]):
        total = 0.0
        for s in range(1, max_lag + 1):
            if rho[s, j] < 0.05:
                break
            total += rho[s, j]
        per_dim[j] = n / (1.0 + 2.0 * total)
    return float(per_dim.mean())


def mmd2(
    x,
    y,
    max_points: int = 2000,
    subsample_seed: int = 0,
) -> float:
    """Squared maximum mean discrepancy with the quadratic kernel.

    Biased V-statistic (self-pairs included) of
    ``k(a, b) = (1 + <a, b>)^2``. Sets larger than ``max_points`` are
    subsampled without replacement with a fixed seed to bound the O(N^2)
    cost; pass ``max_points=None`` to disable.
    """
    x = _as_matrix(x)
    y = _as_matrix(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("mmd2 requires nonempty sample sets")
    if max_points is not None:
        rng = np.random.default_rng(subsample_seed)
        if x.shape[0] > max_points:
            x = x[rng.choice(x.shape[0], max_points, replace=False)]
        if y.shape[0] > max_points:
            y = y[rng.choice(y.shape[0], max_points, replace=False)]
    kxx = (1.0 + x @ x.T) ** 2
    kyy = (1.0 + y @ y.T) ** 2
    kxy = (1.0 + x @ y.T) ** 2
    return float(kxx.mean() - 2.0 * kxy.mean() + kyy.mean())


def rem_series(samples, true_mean) -> MetricSeries:
    """Relative error of the running mean against the true mean.

    ``REM_t = sum_i |mean(x_{1..t})_i - mu_i| / sum_i |mu_i|`` for every
    prefix length t. The true mean must have nonzero L1 norm.
    """
    x = _as_matrix(samples)
    mu = np.atleast_1d(np.asarray(true_mean, dtype=np.float64))
    if mu.shape != (x.shape[1],):
        raise ValueError(f"true_mean shape {mu.shape} != ({x.shape[1]},)")
    denom = float(np.abs(mu).sum())
    if denom <= 0:
        raise ValueError("true mean has zero L1 norm: REM undefined")
    t = np.arange(1, x.shape[0] + 1)
    running = np.cumsum(x, axis=0) / t[:, None]
    rem = np.abs(running - mu).sum(axis=1) / denom
    return MetricSeries("rem", t, rem)


def mode_occupancy(samples, mode_centers) -> np.ndarray:
    """Fraction of samples nearest (Euclidean) to each center; sums to 1."""
    x = _as_matrix(samples)
    centers = np.atleast_2d(np.asarray(mode_centers, dtype=np.float64))
    if centers.shape[0] < 1:
        raise ValueError("need at least one mode center")
    if centers.shape[1] != x.shape[1]:
        raise ValueError(
            f"center dimension {centers.shape[1]} != sample dimension {x.shape[1]}"
        )
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    counts = np.bincount(nearest, minlength=centers.shape[0])
    return counts / x.shape[0]
