"""Numerical integrators for Hamiltonian and underdamped Langevin dynamics.

Provides the leapfrog map, the split Langevin half-updates with their
stochastic thermal kick, the composite trajectory used by the Langevin
Hamiltonian samplers (with internal-energy accounting), and the Newton
iteration that teleports a point along an equipotential level set.

All operations are pure given (state, params, rng); independent trajectories
may run concurrently with separate generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .accel import DIVERGENCE_LIMIT
from .targets import Target


class DivergenceError(RuntimeError):
    """A trajectory left the numerically trusted region (entry > 1e10 or NaN)."""

    def __init__(self, stage: str, step: int):
        super().__init__(f"trajectory diverged during {stage} (step {step})")
        self.stage = stage
        self.step = step


@dataclass
class PhasePoint:
    """Position/momentum pair evolved by the dynamics."""

    theta: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=np.float64))
        if self.theta.shape != self.p.shape:
            raise ValueError(
                f"theta shape {self.theta.shape} != momentum shape {self.p.shape}"
            )
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase point entries must be finite")


@dataclass
class DynamicsParams:
    """Step size, trajectory length, diagonal mass, friction, temperature.

    ``a1 = exp(-friction * step_size)`` and ``a2 = sqrt((1 - a1^2) / beta)``
    parameterize the thermal kick; ``friction = 0`` degenerates to pure
    Hamiltonian dynamics (a1 = 1, a2 = 0).
    """

    step_size: float
    leapfrog_steps: int
    mass: float | np.ndarray = 1.0
    friction: float = 0.0
    inverse_temperature: float = 1.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if self.friction < 0:
            raise ValueError("friction must be nonnegative")
        if not self.inverse_temperature > 0:
            raise ValueError("inverse_temperature must be positive")
        mass = np.atleast_1d(np.asarray(self.mass, dtype=np.float64))
        if np.any(mass <= 0):
            raise ValueError("mass entries must be positive")
        self.mass = mass

    @property
    def a1(self) -> float:
        return math.exp(-self.friction * self.step_size)

    @property
    def a2(self) -> float:
        return math.sqrt((1.0 - self.a1**2) / self.inverse_temperature)

    def mass_vector(self, dim: int) -> np.ndarray:
        if self.mass.size == dim:
            return self.mass
        if self.mass.size == 1:
            return np.full(dim, self.mass[0])
        raise ValueError(f"mass has {self.mass.size} entries, target dim {dim}")


@dataclass
class EnergyLedger:
    """Accumulated kinetic-energy change injected by thermal kicks."""

    delta_e: float = 0.0


def kinetic_energy(p: np.ndarray, inv_mass: np.ndarray) -> float:
    return float(0.5 * np.sum(p * p * inv_mass))


def _entries_ok(x: np.ndarray) -> bool:
    return bool(np.all(np.abs(x) <= DIVERGENCE_LIMIT))


_DLHMC_STAGES = {1: "opening Langevin half-updates", 2: "leapfrog", 3: "closing Langevin half-updates"}


def leapfrog(target: Target, state: PhasePoint, params: DynamicsParams) -> PhasePoint:
    """Apply ``leapfrog_steps`` steps of the leapfrog map.

    Deterministic, volume-preserving and time-reversible. Raises
    :class:`DivergenceError` with the offending step index if any entry of
    the state leaves [-1e10, 1e10] (NaNs included).
    """
    dim = state.theta.shape[0]
    inv_mass = 1.0 / params.mass_vector(dim)
    kern = target.trajectory_kernels()
    theta, p, step = kern.leapfrog(
        state.theta, state.p, target.kernel_args, params.step_size,
        params.leapfrog_steps, inv_mass,
    )
    if step >= 0:
        raise DivergenceError("leapfrog", int(step))
    return PhasePoint(theta, p)


def langevin_half(
    target: Target, state: PhasePoint, params: DynamicsParams, form: str = "first"
) -> PhasePoint:
    """One half-update of the split Langevin integrator.

    ``form="first"``: kick then drift — ``p' = p - (eps/2) grad U(theta)``,
    ``theta' = theta + (eps/2) M^-1 p'``. ``form="second"`` mirrors it,
    drift then kick: ``theta' = theta + (eps/2) M^-1 p``,
    ``p' = p - (eps/2) grad U(theta')``.
    """
    dim = state.theta.shape[0]
    inv_mass = 1.0 / params.mass_vector(dim)
    half = 0.5 * params.step_size
    theta, p = state.theta, state.p
    if form == "first":
        p = p - half * target.gradient(theta)
        theta = theta + half * (inv_mass * p)
    elif form == "second":
        theta = theta + half * (inv_mass * p)
        p = p - half * target.gradient(theta)
    else:
        raise ValueError(f"unknown half-update form {form!r}")
    if not (_entries_ok(theta) and _entries_ok(p)):
        raise DivergenceError(f"langevin {form} half", 0)
    return PhasePoint(theta, p)


def thermal_kick(
    p: np.ndarray, params: DynamicsParams, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Stochastic momentum refresh ``p' = a1 p + a2 sqrt(M) z``.

    Returns the new momentum and the kinetic-energy change it injected.
    With zero friction this is an exact no-op (a1 = 1, a2 = 0).
    """
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    mass = params.mass_vector(p.shape[0])
    inv_mass = 1.0 / mass
    z = rng.standard_normal(p.shape[0])
    k_before = kinetic_energy(p, inv_mass)
    p_new = params.a1 * p + params.a2 * (np.sqrt(mass) * z)
    return p_new, kinetic_energy(p_new, inv_mass) - k_before


def dlhmc(
    target: Target,
    state: PhasePoint,
    params: DynamicsParams,
    rng: np.random.Generator,
) -> tuple[PhasePoint, EnergyLedger]:
    """Composite Langevin-Hamiltonian trajectory with energy bookkeeping.

    Executes, in order: Langevin first half, thermal kick, Langevin second
    half, ``leapfrog_steps`` leapfrog steps, then the Langevin/kick/Langevin
    stretch again. The ledger carries the summed kinetic-energy change of the
    two kicks, which the modified Metropolis test credits back. The two kick
    variates are drawn from ``rng`` even at zero friction (where they have no
    effect), so the trajectory is a deterministic function of (state, seed).
    """
    dim = state.theta.shape[0]
    mass = params.mass_vector(dim)
    inv_mass = 1.0 / mass
    z1 = rng.standard_normal(dim)
    z2 = rng.standard_normal(dim)
    kern = target.trajectory_kernels()
    theta, p, delta_e, stage, step = kern.dlhmc(
        state.theta, state.p, target.kernel_args, params.step_size,
        params.leapfrog_steps, inv_mass, np.sqrt(mass), params.a1, params.a2,
        z1, z2,
    )
    if stage != 0:
        raise DivergenceError(_DLHMC_STAGES[int(stage)], int(step))
    return PhasePoint(theta, p), EnergyLedger(float(delta_e))


def equipotential_transform(
    target: Target,
    theta0: np.ndarray,
    sigma_et: float,
    max_iters: int,
    err: float,
    rng: np.random.Generator,
) -> Optional[np.ndarray]:
    """Newton search for a distant point on the level set ``U(x) = U(theta0)``.

    Draws ``x ~ N(theta0, sigma_et^2 I)`` and iterates the directional Newton
    update ``x <- x - f(x) g / |g|^2`` with ``f(x) = U(x) - U(theta0)`` and
    ``g = grad U(x)``, at most ``max_iters`` times. Returns the iterate when
    ``|U(x) - U(theta0)| < err``; returns None (no transform) when the
    iteration stalls on a vanishing gradient, leaves the finite range, or
    fails to reach the tolerance.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    u0 = target.potential(theta0)
    x = theta0 + sigma_et * rng.standard_normal(theta0.shape[0])
    f = target.potential(x) - u0
    for _ in range(max_iters):
        if abs(f) < err:
            break
        g = target.gradient(x)
        gg = float(g @ g)
        if not np.isfinite(gg) or gg < 1e-300:
            return None
        x = x - (f / gg) * g
        if not np.all(np.isfinite(x)):
            return None
        f = target.potential(x) - u0
        if not np.isfinite(f):
            return None
    if abs(f) < err:
        return x
    return None
