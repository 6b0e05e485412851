"""Monte Carlo experiment driver with reproducible parallel RNG streams.

A plan is a scenario config plus an algorithm list, a trial count, a master
seed, and an optional sweep axis. Every trial draws its own RNG stream from
(master_seed, sweep index, trial index), so results are bit-identical no
matter how trials are scheduled across workers. Within a trial all
algorithms see the same channel realization (paired design); the estimated
channels go to the optimizers while metrics are computed on the true
impaired channels.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import PathSampler, SensingTarget, generate_user_channel
from .config import ALGORITHM_NAMES, ScenarioConfig, WeightSection
from .impairments import (
    ImpairmentChain,
    coupling_matrix,
    effective_channel,
    inject_csi_error,
    iq_coefficients,
    phase_noise_from_dbc,
    phase_noise_step,
    solve_iq_for_irr,
)
from .objective import composite_objective, energy_efficiency, jain_fairness
from .optimizers import run_e_wmmse, run_fp, run_hao_sca
from .rates import rate_breakdown
from .sensing import evaluate_sensing

SWEEP_AXES = ("none", "alpha", "antennas", "impairment", "csi_eps")


# =====================================================================
# Plan and result types
# =====================================================================

@dataclass(frozen=True)
class ExperimentPlan:
    """One batch of paired Monte Carlo trials, optionally swept over an axis.

    sweep_axis "none" runs the scenario as configured; the other axes
    reinterpret sweep_values as, in order: the rate-vs-sensing weight split
    (alpha, 1 - alpha), the square-array side length, the phase-noise level
    in dBc, and the CSI error fraction.
    """

    config: ScenarioConfig
    algorithms: tuple
    num_trials: int
    master_seed: int
    sweep_axis: str = "none"
    sweep_values: tuple = ()

    def __post_init__(self):
        if self.num_trials < 2:
            raise ValueError("num_trials must be at least 2")
        if not self.algorithms:
            raise ValueError("algorithm list must not be empty")
        for name in self.algorithms:
            if name not in ALGORITHM_NAMES:
                raise ValueError(f"unknown algorithm {name!r}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none" and len(self.sweep_values) == 0:
            raise ValueError("sweep grid must not be empty")

    @property
    def grid(self) -> tuple:
        """Sweep points; a single None entry when there is no sweep."""
        if self.sweep_axis == "none":
            return (None,)
        return tuple(self.sweep_values)


def make_plan(config: ScenarioConfig, sweep_axis: str = "none",
              sweep_values=(), algorithms=None, num_trials=None,
              master_seed=None) -> ExperimentPlan:
    """Plan from a config with optional overrides."""
    return ExperimentPlan(
        config=config,
        algorithms=tuple(algorithms) if algorithms is not None
        else tuple(config.experiment.algorithms),
        num_trials=int(num_trials) if num_trials is not None
        else config.experiment.trials,
        master_seed=int(master_seed) if master_seed is not None
        else config.experiment.master_seed,
        sweep_axis=sweep_axis,
        sweep_values=tuple(sweep_values),
    )


@dataclass
class TrialResult:
    """One (sweep point, algorithm, trial) outcome; all metrics on the true
    impaired channels. sinr_db carries one value per sensing target."""

    sweep_index: int
    sweep_value: float | None
    algorithm: str
    trial_index: int
    channel_hash: str
    failed: bool
    converged: bool
    monotone: bool
    iterations_used: int
    objective: float
    sum_rate: float
    sinr_db: tuple
    detection_prob: float
    crlb: float
    energy_efficiency: float
    fairness: float

    def sort_key(self):
        return (self.sweep_index, self.algorithm, self.trial_index)


# =====================================================================
# Sweep application
# =====================================================================

def apply_sweep(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """A copy of the config with one sweep point applied."""
    if axis == "none":
        return config
    if axis == "alpha":
        v = float(value)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"alpha sweep value {v} outside [0, 1]")
        return replace(config,
                       weights=WeightSection(alpha1=v, alpha2=1.0 - v,
                                             alpha3=0.0, alpha4=0.0))
    if axis == "antennas":
        side = int(value)
        if side < 1:
            raise ValueError(f"antenna sweep value {value} must be >= 1")
        return replace(config,
                       geometry=replace(config.geometry, mx=side, my=side))
    if axis == "impairment":
        return replace(config,
                       impairments=replace(config.impairments,
                                           phase_noise_dbc=float(value)))
    if axis == "csi_eps":
        v = float(value)
        if not 0.0 <= v < 1.0:
            raise ValueError(f"csi_eps sweep value {v} outside [0, 1)")
        return replace(config,
                       impairments=replace(config.impairments, csi_eps=v))
    raise ValueError(f"unknown sweep axis {axis!r}")


# =====================================================================
# Trial data generation
# =====================================================================

@dataclass
class TrialData:
    """Channels and targets for one trial: true (impaired) and estimated."""

    channels_true: np.ndarray
    channels_est: np.ndarray
    targets: list
    channel_hash: str


def _impairment_chain(cfg: ScenarioConfig, num_antennas: int,
                      rng: np.random.Generator) -> ImpairmentChain | None:
    imp = cfg.impairments
    coupling = None
    if imp.coupling_kappa != 0.0:
        coupling = coupling_matrix(cfg.array_geometry(), [imp.coupling_kappa])
    phase = None
    if imp.phase_noise_dbc > -500.0:
        phase = phase_noise_step(
            phase_noise_from_dbc(num_antennas, imp.phase_noise_dbc), rng)
    mu = None
    if math.isfinite(imp.irr_db):
        psi, g = solve_iq_for_irr(imp.irr_db)
        mu = iq_coefficients(psi, g)
    if coupling is None and phase is None and mu is None:
        return None
    return ImpairmentChain(coupling=coupling, phase_state=phase, iq_mu=mu)


def generate_trial_data(cfg: ScenarioConfig,
                        rng: np.random.Generator) -> TrialData:
    """Draw channels, targets, impairments, and CSI error for one trial.

    Draw order is fixed (shared fading component, per-user channels, targets,
    impairments, CSI noise), so a given RNG stream always produces the same
    realization.
    """
    geom = cfg.array_geometry()
    sampler = PathSampler(num_paths=cfg.channel.num_paths)
    k = cfg.population.num_users
    rho_c = cfg.channel.rho_c

    if rho_c > 0.0:
        shared = generate_user_channel(geom, rng, sampler).h
        rows = [
            np.sqrt(rho_c) * shared
            + np.sqrt(1.0 - rho_c) * generate_user_channel(geom, rng, sampler).h
            for _ in range(k)
        ]
    else:
        rows = [generate_user_channel(geom, rng, sampler).h for _ in range(k)]
    h = np.vstack(rows)

    t = cfg.targets
    r_lo, r_hi = sampler.range_bounds(geom)
    targets = [
        SensingTarget(theta=rng.uniform(-t.theta_abs, t.theta_abs),
                      phi=rng.uniform(-t.phi_abs, t.phi_abs),
                      r=rng.uniform(r_lo, r_hi),
                      rcs=rng.uniform(t.rcs_lo, t.rcs_hi))
        for _ in range(cfg.population.num_targets)
    ]

    chain = _impairment_chain(cfg, geom.m_total, rng)
    if chain is not None:
        h_true = np.vstack([effective_channel(h[i], chain) for i in range(k)])
    else:
        h_true = h

    eps = cfg.impairments.csi_eps
    if eps > 0.0:
        h_est = np.vstack([inject_csi_error(h_true[i], eps, rng)
                           for i in range(k)])
    else:
        h_est = h_true.copy()

    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(h_true).tobytes())
    digest.update(np.ascontiguousarray(h_est).tobytes())
    digest.update(np.array([[tt.theta, tt.phi, tt.r, tt.rcs]
                            for tt in targets], dtype=float).tobytes())
    return TrialData(channels_true=h_true, channels_est=h_est,
                     targets=targets, channel_hash=digest.hexdigest()[:16])


# =====================================================================
# Per-trial solve and metric extraction
# =====================================================================

def solve_instance(algorithm: str, channels, targets, cfg: ScenarioConfig):
    """Run one algorithm on one instance; returns (solution, trace).

    The hao_sca entry is the full two-start procedure: a run from the
    standard initialization and a run warm-started from the converged
    conventional-NOMA point, keeping whichever ends with the better
    objective. The RS problem contains the NOMA point, so the warm leg
    guarantees the RS solution never falls below the NOMA baseline.
    """
    geom = cfg.array_geometry()
    weights = cfg.objective_weights()
    limits = cfg.qos_limits()
    opt = cfg.optimizer_config()
    s2n, s2s = cfg.sigma_n2_watts, cfg.sigma_s2_watts
    groups = cfg.population.num_groups

    if algorithm == "hao_sca":
        sol_n, _ = run_hao_sca(channels, targets, geom, weights, limits,
                               s2n, s2s, opt, num_groups=groups,
                               conventional_noma=True)
        sol_w, tr_w = run_hao_sca(channels, targets, geom, weights, limits,
                                  s2n, s2s, opt, num_groups=groups,
                                  warm_start=sol_n)
        sol_c, tr_c = run_hao_sca(channels, targets, geom, weights, limits,
                                  s2n, s2s, opt, num_groups=groups)
        if tr_c.objectives[-1] >= tr_w.objectives[-1]:
            return sol_c, tr_c
        return sol_w, tr_w
    if algorithm == "conv_noma":
        return run_hao_sca(channels, targets, geom, weights, limits, s2n, s2s,
                           opt, num_groups=groups, conventional_noma=True)
    if algorithm == "e_wmmse":
        return run_e_wmmse(channels, targets, geom, weights, limits, s2n, s2s,
                           opt, num_groups=groups)
    if algorithm == "fp":
        return run_fp(channels, targets, geom, weights, limits, s2n, s2s,
                      opt, num_groups=groups)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _evaluate_trial(sol, trace, data: TrialData, cfg: ScenarioConfig,
                    sweep_index: int, sweep_value, algorithm: str,
                    trial_index: int) -> TrialResult:
    geom = cfg.array_geometry()
    s2n, s2s = cfg.sigma_n2_watts, cfg.sigma_s2_watts
    bd = rate_breakdown(sol, data.channels_true, s2n)
    value, _ = composite_objective(sol, data.channels_true, data.targets,
                                   geom, cfg.objective_weights(), s2n, s2s)
    if data.targets:
        ev = evaluate_sensing(sol, data.targets, geom, s2s,
                              cfg.limits.p_fa, cfg.p_max_watts)
        sinr_db = tuple(float(x) for x in ev.sinr_db)
        det = float(np.mean(ev.detection_prob))
        crlb = float(np.mean(ev.crlb))
    else:
        sinr_db, det, crlb = (), 0.0, math.inf
    return TrialResult(
        sweep_index=sweep_index,
        sweep_value=sweep_value,
        algorithm=algorithm,
        trial_index=trial_index,
        channel_hash=data.channel_hash,
        failed=False,
        converged=bool(trace.converged),
        monotone=bool(trace.monotone),
        iterations_used=int(trace.iterations_used),
        objective=float(value),
        sum_rate=float(bd.sum_rate),
        sinr_db=sinr_db,
        detection_prob=det,
        crlb=crlb,
        energy_efficiency=energy_efficiency(bd.sum_rate, sol.total_power()),
        fairness=jain_fairness(bd.total_rate),
    )


def _failure_result(sweep_index, sweep_value, algorithm, trial_index,
                    channel_hash, num_targets) -> TrialResult:
    return TrialResult(
        sweep_index=sweep_index, sweep_value=sweep_value, algorithm=algorithm,
        trial_index=trial_index, channel_hash=channel_hash, failed=True,
        converged=False, monotone=False, iterations_used=0, objective=0.0,
        sum_rate=0.0, sinr_db=tuple(0.0 for _ in range(num_targets)),
        detection_prob=0.0, crlb=0.0, energy_efficiency=0.0, fairness=0.0)


def _run_task(plan: ExperimentPlan, sweep_index: int, sweep_value,
              trial_index: int) -> list[TrialResult]:
    """All algorithms on one trial's shared channel draw (paired design)."""
    cfg = apply_sweep(plan.config, plan.sweep_axis, sweep_value)
    seed = np.random.SeedSequence((plan.master_seed, sweep_index, trial_index))
    rng = np.random.default_rng(seed)
    data = generate_trial_data(cfg, rng)
    out = []
    for algorithm in plan.algorithms:
        try:
            sol, trace = solve_instance(algorithm, data.channels_est,
                                        data.targets, cfg)
            out.append(_evaluate_trial(sol, trace, data, cfg, sweep_index,
                                       sweep_value, algorithm, trial_index))
        except (ValueError, RuntimeError, np.linalg.LinAlgError):
            out.append(_failure_result(sweep_index, sweep_value, algorithm,
                                       trial_index, data.channel_hash,
                                       len(data.targets)))
    return out


def run_experiment(plan: ExperimentPlan, threads: int = 1) -> list[TrialResult]:
    """Execute the plan; rows come back canonically sorted.

    Each (sweep point, trial) pair is an independent work unit with its own
    RNG stream, so the result list is identical for any thread count.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    tasks = [
        (sweep_index, sweep_value, trial)
        for sweep_index, sweep_value in enumerate(plan.grid)
        for trial in range(plan.num_trials)
    ]
    if threads == 1:
        batches = [_run_task(plan, *task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda t: _run_task(plan, *t), tasks))
    results = [row for batch in batches for row in batch]
    results.sort(key=TrialResult.sort_key)
    return results
