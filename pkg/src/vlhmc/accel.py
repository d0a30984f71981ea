"""Optional numba acceleration with a pure-numpy fallback.

The hot kernels (per-family potential/gradient evaluations and the fused
trajectory integrators) are compiled with numba's ``@njit`` when available.
Setting ``VLHMC_NUMBA=0`` in the environment *before import* selects the
pure-numpy fallback; the same source functions run in both modes, so the
two backends are numerically interchangeable. ``benchmarks/compare_backends.py``
measures the speed difference.

Targets built by :mod:`vlhmc.targets` register a "family" here (one
potential/gradient pair per target family, taking the instance parameters
as plain array arguments). Each family gets one compiled clone of the
trajectory kernels; arbitrary user targets fall back to the uncompiled
generic path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

DIVERGENCE_LIMIT = 1e10

_ENV_FLAG = "VLHMC_NUMBA"


def _detect_numba() -> bool:
    raw = os.environ.get(_ENV_FLAG, "").strip().lower()
    if raw in {"0", "false", "off", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        if raw in {"1", "true", "on", "yes"}:
            raise ImportError(
                f"{_ENV_FLAG}={raw!r} requests numba acceleration but numba "
                "is not importable"
            )
        return False
    return True


#: Frozen at import time; set VLHMC_NUMBA before importing the package.
NUMBA_ENABLED = _detect_numba()


def compile_kernel(func: Callable, cache: bool = False) -> Callable:
    """Return ``func`` njit-compiled when numba is enabled, unchanged otherwise."""
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=cache)(func)
    return func


# ---------------------------------------------------------------------------
# Trajectory kernel templates
#
# Written once in numba-compatible style and instantiated per target family
# (compiled) or per custom target (plain Python). ``grad`` is called as
# ``grad(theta, *args)`` so family kernels receive their parameter arrays and
# generic targets receive an empty ``args``.
#
# Divergence is signalled by status codes instead of exceptions so the same
# source compiles under nopython mode: the integer stage is 0 for success,
# 1/2/3 for the opening Langevin stretch, leapfrog loop, closing Langevin
# stretch; the second integer is the leapfrog step index when stage == 2.
# ---------------------------------------------------------------------------


def _make_leapfrog(grad):
    def leapfrog_steps(theta, p, args, step, n_steps, inv_mass):
        theta = theta.copy()
        p = p.copy()
        half = 0.5 * step
        g = grad(theta, *args)
        for i in range(n_steps):
            p = p - half * g
            theta = theta + step * (inv_mass * p)
            g = grad(theta, *args)
            p = p - half * g
            for j in range(theta.shape[0]):
                if not (abs(theta[j]) <= DIVERGENCE_LIMIT) or not (
                    abs(p[j]) <= DIVERGENCE_LIMIT
                ):
                    return theta, p, i
        return theta, p, -1

    return leapfrog_steps


def _make_dlhmc(grad):
    def dlhmc_steps(theta, p, args, step, n_steps, inv_mass, sqrt_mass, a1, a2, z1, z2):
        theta = theta.copy()
        p = p.copy()
        half = 0.5 * step
        delta_e = 0.0

        # Opening: Langevin first half, thermal kick, Langevin second half.
        g = grad(theta, *args)
        p = p - half * g
        theta = theta + half * (inv_mass * p)
        k_before = 0.0
        for j in range(p.shape[0]):
            k_before += 0.5 * p[j] * p[j] * inv_mass[j]
        p = a1 * p + a2 * (sqrt_mass * z1)
        k_after = 0.0
        for j in range(p.shape[0]):
            k_after += 0.5 * p[j] * p[j] * inv_mass[j]
        delta_e += k_after - k_before
        theta = theta + half * (inv_mass * p)
        g = grad(theta, *args)
        p = p - half * g
        for j in range(theta.shape[0]):
            if not (abs(theta[j]) <= DIVERGENCE_LIMIT) or not (
                abs(p[j]) <= DIVERGENCE_LIMIT
            ):
                return theta, p, delta_e, 1, 0

        # Hamiltonian stretch: n_steps leapfrog steps; the gradient at the
        # current position carries over between stages.
        for i in range(n_steps):
            p = p - half * g
            theta = theta + step * (inv_mass * p)
            g = grad(theta, *args)
            p = p - half * g
            for j in range(theta.shape[0]):
                if not (abs(theta[j]) <= DIVERGENCE_LIMIT) or not (
                    abs(p[j]) <= DIVERGENCE_LIMIT
                ):
                    return theta, p, delta_e, 2, i

        # Closing: Langevin first half, thermal kick, Langevin second half.
        p = p - half * g
        theta = theta + half * (inv_mass * p)
        k_before = 0.0
        for j in range(p.shape[0]):
            k_before += 0.5 * p[j] * p[j] * inv_mass[j]
        p = a1 * p + a2 * (sqrt_mass * z2)
        k_after = 0.0
        for j in range(p.shape[0]):
            k_after += 0.5 * p[j] * p[j] * inv_mass[j]
        delta_e += k_after - k_before
        theta = theta + half * (inv_mass * p)
        g = grad(theta, *args)
        p = p - half * g
        for j in range(theta.shape[0]):
            if not (abs(theta[j]) <= DIVERGENCE_LIMIT) or not (
                abs(p[j]) <= DIVERGENCE_LIMIT
            ):
                return theta, p, delta_e, 3, 0

        return theta, p, delta_e, 0, 0

    return dlhmc_steps


@dataclass(eq=False)
class Kernels:
    """Callable bundle for one target family (or one generic target)."""

    potential: Callable
    gradient: Callable
    leapfrog: Callable
    dlhmc: Callable
    compiled: bool


_FAMILIES: dict[str, Kernels] = {}


def register_family(name: str, potential_impl: Callable, gradient_impl: Callable) -> None:
    """Register a target family's potential/gradient pair.

    Both functions take ``(theta, *parameter_arrays)`` and must be written in
    the numba-compatible numpy subset. Compilation (when enabled) happens
    lazily on first call.
    """
    if name in _FAMILIES:
        return
    pot = compile_kernel(potential_impl, cache=True)
    grad = compile_kernel(gradient_impl, cache=True)
    _FAMILIES[name] = Kernels(
        potential=pot,
        gradient=grad,
        leapfrog=compile_kernel(_make_leapfrog(grad)),
        dlhmc=compile_kernel(_make_dlhmc(grad)),
        compiled=NUMBA_ENABLED,
    )


def family_kernels(name: str) -> Kernels:
    return _FAMILIES[name]


def generic_kernels(potential: Callable, gradient: Callable) -> Kernels:
    """Uncompiled kernels around arbitrary Python callables (``args=()``)."""
    return Kernels(
        potential=potential,
        gradient=gradient,
        leapfrog=_make_leapfrog(gradient),
        dlhmc=_make_dlhmc(gradient),
        compiled=False,
    )
