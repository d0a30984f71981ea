"""Shared fixtures: reference targets and independent numerical oracles."""

import numpy as np
import pytest

from vlhmc import (
    DynamicsParams,
    GaussianMixtureSpec,
    SamplerConfig,
    VarFitConfig,
    build_variational,
    custom_target,
    make_gaussian_mixture,
    make_rotated_gaussian,
)


def finite_difference_gradient(potential, theta, rel_step=1e-5):
    """Central-difference gradient oracle, step scaled per coordinate."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * max(1.0, abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (potential(up) - potential(dn)) / (2 * h)
    return grad


def assert_gradient_matches(target, points, rtol=1e-5):
    for theta in points:
        g = target.gradient(theta)
        fd = finite_difference_gradient(target.potential, theta)
        scale = np.maximum(np.abs(fd), 1.0)
        np.testing.assert_allclose(g, fd, rtol=rtol, atol=rtol * scale.max())


@pytest.fixture(scope="session")
def std_normal_1d():
    return make_gaussian_mixture(GaussianMixtureSpec([1.0], [[0.0]], [np.eye(1)]))


@pytest.fixture(scope="session")
def std_normal_2d():
    return make_gaussian_mixture(GaussianMixtureSpec([1.0], [[0.0, 0.0]], [np.eye(2)]))


def far_mode_spec():
    return GaussianMixtureSpec(
        [0.5, 0.5], [[6.5, -6.5], [-6.5, 6.5]], [np.eye(2), np.eye(2)]
    )


def close_mode_spec():
    return GaussianMixtureSpec(
        [0.5, 0.5], [[2.5, -2.5], [-2.5, 2.5]], [np.eye(2), np.eye(2)]
    )


@pytest.fixture(scope="session")
def far_mode_target():
    return make_gaussian_mixture(far_mode_spec())


@pytest.fixture(scope="session")
def close_mode_target():
    return make_gaussian_mixture(close_mode_spec())


@pytest.fixture(scope="session")
def rotated_gaussian_target():
    return make_rotated_gaussian([100.0, 0.01], np.pi / 4)


@pytest.fixture(scope="session")
def lopsided_target():
    """0.7/0.3 mixture with means at -1 and +1 per coordinate (d=2)."""
    return make_gaussian_mixture(
        GaussianMixtureSpec([0.7, 0.3], [[-1.0, -1.0], [1.0, 1.0]], [np.eye(2), np.eye(2)])
    )


def zero_gradient_target(dim=2):
    return custom_target(
        dim,
        potential=lambda theta: 0.0,
        gradient=lambda theta: np.zeros(dim),
        name="flat",
    )


@pytest.fixture(scope="session")
def far_mode_qmix(far_mode_target):
    """Variational mixture fitted once for the far-mode target."""
    cfg = VarFitConfig(
        n_starts=40,
        start_box=(-10.0, 10.0),
        dynamics=DynamicsParams(step_size=0.05, leapfrog_steps=40, friction=0.5),
    )
    return build_variational(far_mode_target, cfg, 20240)


@pytest.fixture(scope="session")
def close_mode_qmix(close_mode_target):
    """Variational mixture fitted once for the close-mode target."""
    cfg = VarFitConfig(
        n_starts=40,
        start_box=(-10.0, 10.0),
        dynamics=DynamicsParams(step_size=0.05, leapfrog_steps=40, friction=0.5),
    )
    return build_variational(close_mode_target, cfg, 20241)


def paper_2d_sampler_config(n_samples, burn_in=0, **kwargs):
    """The 2D mixture benchmark protocol: eps=0.05, gamma=0.5, L~U(80,120)."""
    return SamplerConfig(
        dynamics=DynamicsParams(step_size=0.05, leapfrog_steps=100, friction=0.5),
        n_samples=n_samples,
        burn_in=burn_in,
        leapfrog_jitter=(80, 120),
        **kwargs,
    )
