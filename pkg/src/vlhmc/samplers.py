"""Chain drivers: HMC, LHMC, LHMC-ET, VHMC, and the parallel-HMC baseline.

Every driver produces a :class:`Chain` with per-step acceptance flags and a
provenance tag saying where each sample came from (``dynamics`` moves,
``variational`` guide-point jumps, or a ``repeat`` of the previous state on
rejection). Chains are strictly sequential internally; independent chains
run concurrently with generators split as documented (base seed + index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import DynamicsParams, equipotential_transform, kinetic_energy
from .rngs import as_generator
from .targets import Target
from .varfit import VariationalMixture, rejection_sample

PROV_DYNAMICS = "dynamics"
PROV_VARIATIONAL = "variational"
PROV_REPEAT = "repeat"


@dataclass
class EtParams:
    """Equipotential-transform settings for LHMC-ET."""

    sigma: float = 1.0
    max_iters: int = 10
    err: float = 0.01


@dataclass
class SamplerConfig:
    """Knobs shared by all chain drivers.

    ``beta_mix`` is the probability of proposing from the variational mixture
    in VHMC. ``leapfrog_jitter = (lo, hi)`` draws the number of leapfrog steps
    uniformly from the inclusive integer range per iteration; otherwise
    ``dynamics.leapfrog_steps`` is used throughout. ``burn_in`` is carried for
    the benchmark layer, which discards it after the fact — chains always
    return ``n_samples`` states.
    """

    dynamics: DynamicsParams
    n_samples: int
    burn_in: int = 0
    beta_mix: float = 0.1
    et: Optional[EtParams] = None
    rejection_estimate_draws: int = 1
    leapfrog_jitter: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not 0 <= self.beta_mix <= 1:
            raise ValueError("beta_mix must lie in [0, 1]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 <= self.burn_in < self.n_samples + 1:
            raise ValueError("burn_in must be in [0, n_samples]")
        if self.rejection_estimate_draws < 1:
            raise ValueError("rejection_estimate_draws must be >= 1")
        if self.leapfrog_jitter is not None:
            lo, hi = self.leapfrog_jitter
            if lo < 1 or hi < lo:
                raise ValueError(f"bad leapfrog_jitter range {self.leapfrog_jitter}")


@dataclass
class Chain:
    """Ordered samples plus per-step acceptance/provenance metadata."""

    samples: np.ndarray
    accepted: np.ndarray
    provenance: np.ndarray
    acceptance_rate: float
    seed: int
    diverged: np.ndarray = field(default=None, repr=False)
    et_applied: Optional[np.ndarray] = field(default=None, repr=False)
    beta_branch_count: int = 0

    def __len__(self) -> int:
        return self.samples.shape[0]


def _check_init(target: Target, theta_init) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta_init, dtype=np.float64))
    if theta.shape != (target.dim,):
        raise ValueError(f"theta_init shape {theta.shape} != ({target.dim},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta_init must be finite")
    return theta


def _draw_steps(config: SamplerConfig, rng: np.random.Generator) -> int:
    if config.leapfrog_jitter is None:
        return config.dynamics.leapfrog_steps
    lo, hi = config.leapfrog_jitter
    return int(rng.integers(lo, hi + 1))


def _finite_potential(u: float) -> bool:
    return math.isfinite(u) and abs(u) <= 1e10


class _ChainRecorder:
    def __init__(self, n: int, dim: int, seed: int, with_et: bool = False):
        self.samples = np.empty((n, dim))
        self.accepted = np.zeros(n, dtype=bool)
        self.provenance = np.empty(n, dtype=object)
        self.diverged = np.zeros(n, dtype=bool)
        self.et_applied = np.zeros(n, dtype=bool) if with_et else None
        self.seed = seed

    def record(self, i: int, theta: np.ndarray, accepted: bool, prov: str):
        self.samples[i] = theta
        self.accepted[i] = accepted
        self.provenance[i] = prov

    def finish(self, beta_branch_count: int = 0) -> Chain:
        return Chain(
            samples=self.samples,
            accepted=self.accepted,
            provenance=np.asarray(self.provenance),
            acceptance_rate=float(self.accepted.mean()),
            seed=self.seed,
            diverged=self.diverged,
            et_applied=self.et_applied,
            beta_branch_count=beta_branch_count,
        )


def hmc_chain(target: Target, theta_init, config: SamplerConfig, rng) -> Chain:
    """Hamiltonian Monte Carlo with fresh momenta and a leapfrog proposal.

    Per iteration: draw p ~ N(0, M), integrate the leapfrog map, accept with
    probability min(1, exp(H_old - H_new)). Rejections (including divergent
    trajectories) repeat the previous state bit-exactly.
    """
    gen, seed = as_generator(rng)
    theta = _check_init(target, theta_init)
    dim = target.dim
    params = config.dynamics
    mass = params.mass_vector(dim)
    inv_mass, sqrt_mass = 1.0 / mass, np.sqrt(mass)
    kern = target.trajectory_kernels()
    rec = _ChainRecorder(config.n_samples, dim, seed)
    u_cur = target.potential(theta)
    for n in range(config.n_samples):
        n_steps = _draw_steps(config, gen)
        p = sqrt_mass * gen.standard_normal(dim)
        k_cur = kinetic_energy(p, inv_mass)
        theta_new, p_new, bad_step = kern.leapfrog(
            theta, p, target.kernel_args, params.step_size, n_steps, inv_mass
        )
        if bad_step >= 0:
            rec.diverged[n] = True
            rec.record(n, theta, False, PROV_REPEAT)
            continue
        u_new = target.potential(theta_new)
        if not _finite_potential(u_new):
            rec.diverged[n] = True
            rec.record(n, theta, False, PROV_REPEAT)
            continue
        k_new = kinetic_energy(p_new, inv_mass)
        log_alpha = (u_cur + k_cur) - (u_new + k_new)
        if gen.uniform() < math.exp(min(0.0, log_alpha)):
            theta, u_cur = theta_new, u_new
            rec.record(n, theta, True, PROV_DYNAMICS)
        else:
            rec.record(n, theta, False, PROV_REPEAT)
    return rec.finish()


def _dlhmc_raw(target, kern, theta, p, step_size, n_steps, inv_mass, sqrt_mass, a1, a2, gen):
    """Kernel-level composite trajectory; same draw order as dynamics.dlhmc."""
    dim = theta.shape[0]
    z1 = gen.standard_normal(dim)
    z2 = gen.standard_normal(dim)
    return kern.dlhmc(
        theta, p, target.kernel_args, step_size, n_steps, inv_mass, sqrt_mass,
        a1, a2, z1, z2,
    )


def lhmc_chain(target: Target, theta_init, config: SamplerConfig, rng) -> Chain:
    """Langevin Hamiltonian Monte Carlo.

    The proposal is the composite Langevin/kick/leapfrog trajectory; the
    Metropolis test credits back the kinetic energy the kicks injected:
    accept with min(1, exp((U + K) - (U' + K' - dE))).
    """
    gen, seed = as_generator(rng)
    theta = _check_init(target, theta_init)
    dim = target.dim
    params = config.dynamics
    mass = params.mass_vector(dim)
    inv_mass, sqrt_mass = 1.0 / mass, np.sqrt(mass)
    a1, a2 = params.a1, params.a2
    kern = target.trajectory_kernels()
    rec = _ChainRecorder(config.n_samples, dim, seed)
    u_cur = target.potential(theta)
    for n in range(config.n_samples):
        n_steps = _draw_steps(config, gen)
        p = sqrt_mass * gen.standard_normal(dim)
        k_cur = kinetic_energy(p, inv_mass)
        theta_new, p_new, delta_e, stage, _ = _dlhmc_raw(
            target, kern, theta, p, params.step_size, n_steps, inv_mass,
            sqrt_mass, a1, a2, gen,
        )
        u_new = target.potential(theta_new) if stage == 0 else math.inf
        if stage != 0 or not _finite_potential(u_new):
            rec.diverged[n] = True
            rec.record(n, theta, False, PROV_REPEAT)
            continue
        k_new = kinetic_energy(p_new, inv_mass)
        log_alpha = (u_cur + k_cur) - (u_new + k_new - delta_e)
        if gen.uniform() < math.exp(min(0.0, log_alpha)):
            theta, u_cur = theta_new, u_new
            rec.record(n, theta, True, PROV_DYNAMICS)
        else:
            rec.record(n, theta, False, PROV_REPEAT)
    return rec.finish()


def lhmc_et_chain(target: Target, theta_init, config: SamplerConfig, rng) -> Chain:
    """LHMC with equipotential transformations (for symmetric targets).

    Each iteration flips a fair coin between teleporting *before* the
    trajectory (from the current state) and *after* it (from the proposal);
    the teleport substitutes the Newton iterate only when it lands on the
    level set within ``et.err``. The Metropolis test is the LHMC one, taken
    against the pre-teleport chain state. The caller asserts the target is
    symmetric about a known center — the transform's detailed-balance
    argument needs it.
    """
    if config.et is None:
        raise ValueError("lhmc_et_chain requires config.et")
    gen, seed = as_generator(rng)
    theta = _check_init(target, theta_init)
    dim = target.dim
    params = config.dynamics
    et = config.et
    mass = params.mass_vector(dim)
    inv_mass, sqrt_mass = 1.0 / mass, np.sqrt(mass)
    a1, a2 = params.a1, params.a2
    kern = target.trajectory_kernels()
    rec = _ChainRecorder(config.n_samples, dim, seed, with_et=True)
    u_cur = target.potential(theta)
    for n in range(config.n_samples):
        et_before = gen.uniform() < 0.5
        n_steps = _draw_steps(config, gen)
        start = theta
        if et_before:
            moved = equipotential_transform(target, theta, et.sigma, et.max_iters, et.err, gen)
            if moved is not None:
                start = moved
                rec.et_applied[n] = True
        p = sqrt_mass * gen.standard_normal(dim)
        k_cur = kinetic_energy(p, inv_mass)
        theta_new, p_new, delta_e, stage, _ = _dlhmc_raw(
            target, kern, start, p, params.step_size, n_steps, inv_mass,
            sqrt_mass, a1, a2, gen,
        )
        if stage != 0:
            rec.diverged[n] = True
            rec.record(n, theta, False, PROV_REPEAT)
            continue
        if not et_before:
            moved = equipotential_transform(
                target, theta_new, et.sigma, et.max_iters, et.err, gen
            )
            if moved is not None:
                theta_new = moved
                rec.et_applied[n] = True
        u_new = target.potential(theta_new)
        if not _finite_potential(u_new):
            rec.diverged[n] = True
            rec.record(n, theta, False, PROV_REPEAT)
            continue
        k_new = kinetic_energy(p_new, inv_mass)
        log_alpha = (u_cur + k_cur) - (u_new + k_new - delta_e)
        if gen.uniform() < math.exp(min(0.0, log_alpha)):
            theta, u_cur = theta_new, u_new
            rec.record(n, theta, True, PROV_DYNAMICS)
        else:
            rec.record(n, theta, False, PROV_REPEAT)
    return rec.finish()


def estimate_rejection_prob(target: Target, theta, config: SamplerConfig, rng) -> float:
    """Average probability that a fresh-momentum trajectory from ``theta`` is rejected.

    Launches ``config.rejection_estimate_draws`` composite trajectories with
    independent momenta and averages ``1 - min(1, exp((U+K) - (U'+K'-dE)))``;
    divergent trajectories count as certain rejection. The estimate is
    stochastic (default one probe, the cheapest choice).
    """
    gen, _ = as_generator(rng)
    theta = _check_init(target, theta)
    dim = target.dim
    params = config.dynamics
    mass = params.mass_vector(dim)
    inv_mass, sqrt_mass = 1.0 / mass, np.sqrt(mass)
    kern = target.trajectory_kernels()
    u_cur = target.potential(theta)
    total = 0.0
    for _ in range(config.rejection_estimate_draws):
        n_steps = _draw_steps(config, gen)
        p = sqrt_mass * gen.standard_normal(dim)
        k_cur = kinetic_energy(p, inv_mass)
        theta_new, p_new, delta_e, stage, _ = _dlhmc_raw(
            target, kern, theta, p, params.step_size, n_steps, inv_mass,
            sqrt_mass, params.a1, params.a2, gen,
        )
        u_new = target.potential(theta_new) if stage == 0 else math.inf
        if stage != 0 or not _finite_potential(u_new):
            total += 1.0
            continue
        k_new = kinetic_energy(p_new, inv_mass)
        log_alpha = (u_cur + k_cur) - (u_new + k_new - delta_e)
        total += 1.0 - math.exp(min(0.0, log_alpha))
    return total / config.rejection_estimate_draws


def vhmc_chain(
    target: Target,
    theta_init,
    qmix: VariationalMixture,
    config: SamplerConfig,
    rng,
) -> Chain:
    """Variational Langevin Hamiltonian Monte Carlo.

    With probability ``beta_mix`` the next state is an exact draw from the
    target obtained by rejection sampling against the fitted mixture
    envelope. Otherwise one LHMC step runs; if its Metropolis test rejects,
    a guide point theta* is drawn the same way and kept with probability
    min(1, (1 - r(theta*)) / (1 - alpha)), where r is the estimated
    rejection probability of a fresh trajectory from theta* and alpha is the
    acceptance probability the dynamics proposal just failed. Only when that
    second test also fails does the chain repeat its previous state.
    """
    gen, seed = as_generator(rng)
    theta = _check_init(target, theta_init)
    dim = target.dim
    params = config.dynamics
    mass = params.mass_vector(dim)
    inv_mass, sqrt_mass = 1.0 / mass, np.sqrt(mass)
    a1, a2 = params.a1, params.a2
    kern = target.trajectory_kernels()
    rec = _ChainRecorder(config.n_samples, dim, seed)
    u_cur = target.potential(theta)
    beta_branch = 0
    for n in range(config.n_samples):
        if gen.uniform() < config.beta_mix:
            beta_branch += 1
            theta = rejection_sample(qmix, target, gen)
            u_cur = target.potential(theta)
            rec.record(n, theta, True, PROV_VARIATIONAL)
            continue
        n_steps = _draw_steps(config, gen)
        p = sqrt_mass * gen.standard_normal(dim)
        k_cur = kinetic_energy(p, inv_mass)
        theta_new, p_new, delta_e, stage, _ = _dlhmc_raw(
            target, kern, theta, p, params.step_size, n_steps, inv_mass,
            sqrt_mass, a1, a2, gen,
        )
        u_new = target.potential(theta_new) if stage == 0 else math.inf
        if stage != 0 or not _finite_potential(u_new):
            rec.diverged[n] = True
            alpha = 0.0
        else:
            k_new = kinetic_energy(p_new, inv_mass)
            log_alpha = (u_cur + k_cur) - (u_new + k_new - delta_e)
            alpha = math.exp(min(0.0, log_alpha))
            if gen.uniform() < alpha:
                theta, u_cur = theta_new, u_new
                rec.record(n, theta, True, PROV_DYNAMICS)
                continue
        # Dynamics proposal rejected: try a guide point from the mixture.
        theta_star = rejection_sample(qmix, target, gen)
        r_star = estimate_rejection_prob(target, theta_star, config, gen)
        if gen.uniform() < min(1.0, (1.0 - r_star) / (1.0 - alpha)):
            theta = theta_star
            u_cur = target.potential(theta)
            rec.record(n, theta, True, PROV_VARIATIONAL)
        else:
            rec.record(n, theta, False, PROV_REPEAT)
    return rec.finish(beta_branch_count=beta_branch)


def parallel_hmc(target: Target, mode_inits: Sequence, config: SamplerConfig, rng) -> Chain:
    """Independent HMC chains, one per initial point, concatenated.

    The baseline whose deficiency motivates guide points: every chain
    contributes the same number of samples regardless of the true mass of
    the mode it sits in. Chain ``j`` runs with seed ``base + j`` where
    ``base`` is the integer seed when one is given (drawn from the generator
    otherwise).
    """
    if len(mode_inits) == 0:
        raise ValueError("parallel_hmc needs at least one initial point")
    if isinstance(rng, (int, np.integer)):
        base = int(rng)
    else:
        gen, _ = as_generator(rng)
        base = int(gen.integers(2**31 - 1))
    chains = [
        hmc_chain(target, init, config, base + j) for j, init in enumerate(mode_inits)
    ]
    return Chain(
        samples=np.concatenate([c.samples for c in chains]),
        accepted=np.concatenate([c.accepted for c in chains]),
        provenance=np.concatenate([c.provenance for c in chains]),
        acceptance_rate=float(np.mean(np.concatenate([c.accepted for c in chains]))),
        seed=base,
        diverged=np.concatenate([c.diverged for c in chains]),
    )
