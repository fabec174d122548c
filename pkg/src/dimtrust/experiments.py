"""Computations behind the command-line tools and the experiment scripts.

Every function here is deterministic given its arguments and returns rows in
canonical (sorted) order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import trust_region as tr
from .nn import load_checkpoint
from .policy_math import (
    DiagonalGaussian,
    RejectedInput,
    compensated_epsilon,
    fisher_diag_gaussian,
    marginal_log_ratio,
    unclipped_prob_approx,
    unclipped_prob_exact,
)
from .ppo import Metrics, TrainConfig, evaluate, evaluate_sampled_dims, train
from .swimmer import EnvConfig, evaluation_dims


def default_nu0_grid(n: int = 60, low: float = 0.005, high: float = 0.5) -> np.ndarray:
    return np.geomspace(low, high, n)


def default_dim_grid(high: int = 32) -> list[int]:
    return list(range(1, high + 1))


# --- probability surface ------------------------------------------------------


@dataclass
class SurfaceResult:
    columns: list[str]
    rows: list[tuple]
    max_error: float
    max_error_at: dict
    max_deviation: float | None = None
    spread_over_dims: float = 0.0


def prob_surface(epsilon: float, dims: Sequence[int], nu0s: Sequence[float], compensated: bool = False) -> SurfaceResult:
    """p_exact and its approximation on a (dim, nu0) grid with ||nu|| = nu0 sqrt(dim).

    ``spread_over_dims`` is the largest (max - min) of p_exact across dims at a
    fixed nu0. In compensated mode each row also carries its distance from the
    dim = 1 value at the same nu0.
    """
    if epsilon <= 0:
        raise RejectedInput("epsilon must be positive")
    dims = sorted(int(d) for d in dims)
    nu0s = np.sort(np.asarray(nu0s, dtype=np.float64))
    if not dims or nu0s.size == 0 or dims[0] < 1:
        raise RejectedInput("grids must be non-empty with dims >= 1")
    d = np.asarray(dims, dtype=np.float64)[:, None]
    nu_norm = nu0s[None, :] * np.sqrt(d)
    eps = np.array([[compensated_epsilon(epsilon, int(k)) if compensated else epsilon] for k in dims])
    eps = np.broadcast_to(eps, nu_norm.shape)
    p_exact = unclipped_prob_exact(eps, nu_norm)
    p_approx = unclipped_prob_approx(eps, nu_norm)
    err = np.abs(p_approx - p_exact)
    i, j = np.unravel_index(int(np.argmax(err)), err.shape)
    columns = ["dim", "nu0", "nu_norm", "epsilon_eff", "p_exact", "p_approx", "abs_error"]
    ref = unclipped_prob_exact(epsilon, nu0s)  # dim = 1
    deviation = np.abs(p_exact - ref[None, :])
    if compensated:
        columns.append("deviation_from_dim1")
    rows = []
    for a, dim in enumerate(dims):
        for b, nu0 in enumerate(nu0s):
            row = (dim, nu0, nu_norm[a, b], eps[a, b], p_exact[a, b], p_approx[a, b], err[a, b])
            rows.append(row + ((deviation[a, b],) if compensated else ()))
    return SurfaceResult(
        columns,
        rows,
        float(err[i, j]),
        {"dim": dims[i], "nu0": float(nu0s[j]), "nu_norm": float(nu_norm[i, j]), "epsilon_eff": float(eps[i, j])},
        float(deviation.max()) if compensated else None,
        float(np.max(p_exact.max(axis=0) - p_exact.min(axis=0))),
    )


# --- Monte-Carlo validation ------------------------------------------------------


def direct_log_ratio(nu: np.ndarray, eta: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Summed log density ratio from the two Gaussians themselves.

    Old policy N(0, 1) per coordinate, new policy N(nu eta, eta^2), so that the
    drift normalized by the new std is nu.
    """
    old = DiagonalGaussian(np.zeros(nu.size), np.zeros(nu.size))
    new = DiagonalGaussian(nu * eta, np.log(eta))
    a = old.mean + old.std * z
    lp_new = -0.5 * np.sum(((a - new.mean) / new.std) ** 2, axis=1) - np.sum(new.log_std)
    lp_old = -0.5 * np.sum(z * z, axis=1) - np.sum(old.log_std)
    return lp_new - lp_old


def z_score(observed: float, p: float, n: int) -> float:
    var = p * (1.0 - p) / n
    if var == 0.0:
        return 0.0 if observed == p else math.copysign(math.inf, observed - p)
    return (observed - p) / math.sqrt(var)


def mc_validate(
    epsilon: float,
    dims: Sequence[int],
    nu0s: Sequence[float],
    etas: Sequence[float] = (1.0,),
    samples: int = 100_000,
    seed: int = 0,
    chunk: int = 20_000,
) -> tuple[list[str], list[tuple]]:
    """Empirical unclipped fraction against the closed form, per (dim, nu0, eta) cell.

    Each cell draws its own stream from (seed, dim, nu0 index, eta index) so rows
    do not depend on grid order. The fraction is computed both from the
    per-coordinate quadratic form and from the density ratio directly, on the
    same draws.
    """
    if samples < 1000:
        raise RejectedInput("samples must be >= 1000")
    dims = sorted(int(d) for d in dims)
    nu0s = sorted(float(v) for v in nu0s)
    etas = sorted(float(e) for e in etas)
    columns = ["dim", "nu0", "eta", "samples", "empirical", "empirical_direct", "p_exact", "z_score"]
    rows = []
    for d in dims:
        for a, nu0 in enumerate(nu0s):
            for b, eta in enumerate(etas):
                rng = np.random.default_rng([seed, d, a, b])
                nu = np.full(d, nu0)
                et = np.full(d, eta)
                inside = inside_direct = 0
                done = 0
                while done < samples:
                    m = min(chunk, samples - done)
                    z = rng.standard_normal((m, d))
                    q = marginal_log_ratio(nu, et, z).sum(axis=1)
                    r = direct_log_ratio(nu, et, z)
                    inside += int(np.count_nonzero(np.abs(q) <= epsilon))
                    inside_direct += int(np.count_nonzero(np.abs(r) <= epsilon))
                    done += m
                frac = inside / samples
                p = unclipped_prob_exact(epsilon, nu0 * math.sqrt(d))
                rows.append((d, nu0, eta, samples, frac, inside_direct / samples, p, z_score(frac, p, samples)))
    return columns, rows


# --- update-norm scaling ------------------------------------------------------------


def scaling_table(
    mode: str,
    dims: Sequence[int],
    delta: float = 0.01,
    beta: float = 1.0,
    mean: float = 0.0,
    log_std: float = -0.5,
    gradient: Sequence[float] = (1.0, 0.5),
    samples: int = 20_000,
    seed: int = 0,
) -> tr.ScalingTable:
    """TRPO and beta update norms versus dim for a shared (mu, log_std) head.

    ``synthetic`` scales the one-dimensional Fisher by d; ``monte-carlo``
    estimates each F_d from sampled scores.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if mode == "synthetic":
        base = fisher_diag_gaussian(DiagonalGaussian([mean], [log_std]))
        return tr.scaling_experiment(dims, base, g, delta, beta)
    if mode == "monte-carlo":
        def fisher(d):
            return tr.monte_carlo_shared_head_fisher(d, mean, log_std, samples, np.random.default_rng([seed, d]))

        return tr.scaling_experiment(dims, fisher, g, delta, beta)
    raise RejectedInput(f"unknown scaling mode {mode!r}")


# --- training study -------------------------------------------------------------------


def late_spread(metrics: Sequence[Metrics], total_timesteps: int, skip_fraction: float = 0.3) -> float:
    """Mean cross-dim clip-fraction std over updates past ``skip_fraction`` of training."""
    cut = skip_fraction * total_timesteps
    vals = [m.clip_spread for m in metrics if m.timestep > cut]
    if not vals:
        raise ValueError("no updates after the burn-in window")
    return float(np.mean(vals))


@dataclass
class RunSummary:
    """Returns are over the same eval episodes before and after training.

    ``*_mean`` / ``*_stderr`` use sampled actions (the policy as it acts in
    training); ``det_*`` use the policy mean.
    """

    seed: int
    compensated: bool
    untrained_mean: float
    untrained_stderr: float
    trained_mean: float
    trained_stderr: float
    det_untrained_mean: float
    det_untrained_stderr: float
    det_trained_mean: float
    det_trained_stderr: float
    late_spread: float
    final_mean_ep_reward: float
    seconds: float
    run_dir: str | None = None

    @property
    def improvement(self) -> float:
        return self.trained_mean - self.untrained_mean

    @property
    def z(self) -> float:
        """Improvement in units of the combined standard error."""
        se = math.hypot(self.trained_stderr, self.untrained_stderr)
        return self.improvement / se if se > 0 else math.inf

    @property
    def det_z(self) -> float:
        se = math.hypot(self.det_trained_stderr, self.det_untrained_stderr)
        d = self.det_trained_mean - self.det_untrained_mean
        return d / se if se > 0 else math.inf


@dataclass
class StudyResult:
    runs: list[RunSummary] = field(default_factory=list)

    def pairs(self) -> list[tuple[RunSummary, RunSummary]]:
        """(compensated, uncompensated) per seed, in seed order."""
        by = {(r.seed, r.compensated): r for r in self.runs}
        seeds = sorted({r.seed for r in self.runs})
        return [(by[(s, True)], by[(s, False)]) for s in seeds if (s, True) in by and (s, False) in by]


def run_training(
    config: TrainConfig,
    env_config: EnvConfig | None = None,
    run_dir: str | Path | None = None,
    eval_episodes: int = 20,
    eval_seed: int = 12345,
    progress=None,
) -> tuple[RunSummary, object]:
    import time

    t0 = time.perf_counter()
    result = train(config, env_config, run_dir=run_dir, progress=progress)
    stats = {}
    for name, pol in (("before", result.initial_policy), ("after", result.policy)):
        for sampled in (True, False):
            stats[name, sampled] = evaluate_sampled_dims(
                pol, eval_episodes, eval_seed, env_config, config.dim_low, config.dim_high, sample_actions=sampled
            )
    summary = RunSummary(
        seed=config.seed,
        compensated=config.compensated,
        untrained_mean=stats["before", True].mean,
        untrained_stderr=stats["before", True].stderr,
        trained_mean=stats["after", True].mean,
        trained_stderr=stats["after", True].stderr,
        det_untrained_mean=stats["before", False].mean,
        det_untrained_stderr=stats["before", False].stderr,
        det_trained_mean=stats["after", False].mean,
        det_trained_stderr=stats["after", False].stderr,
        late_spread=late_spread(result.metrics, config.total_timesteps),
        final_mean_ep_reward=result.metrics[-1].mean_ep_reward,
        seconds=time.perf_counter() - t0,
        run_dir=str(run_dir) if run_dir is not None else None,
    )
    return summary, result


def paired_study(
    seeds: Sequence[int],
    total_timesteps: int = 150_000,
    out_dir: str | Path | None = None,
    base: TrainConfig | None = None,
    env_config: EnvConfig | None = None,
    eval_episodes: int = 20,
    log=None,
) -> StudyResult:
    """Compensated and uncompensated runs sharing every seed."""
    base = base or TrainConfig()
    study = StudyResult()
    for seed in seeds:
        for comp in (False, True):
            cfg = replace(base, seed=int(seed), compensated=comp, total_timesteps=total_timesteps)
            run_dir = None
            if out_dir is not None:
                run_dir = Path(out_dir) / f"{'comp' if comp else 'plain'}_seed{seed}"
            summary, _ = run_training(cfg, env_config, run_dir, eval_episodes)
            study.runs.append(summary)
            if log is not None:
                log(summary)
    return study


# --- snapshot evaluation ------------------------------------------------------------------


def evaluate_snapshots(
    checkpoints: Sequence[str | Path],
    dims: Sequence[int] | None = None,
    episodes: int = 5,
    seed: int = 0,
    env_config: EnvConfig | None = None,
) -> tuple[list[str], list[tuple]]:
    """Per-(snapshot, dim) mean and std of deterministic episode returns."""
    dims = sorted(dims) if dims is not None else evaluation_dims()
    rows = []
    for path in checkpoints:
        ck = load_checkpoint(path)
        timestep = int(ck.extra.get("snapshot", ck.extra.get("timestep", 0)))
        stats = evaluate(ck.policy, dims, episodes, seed, env_config)
        for d in dims:
            rows.append((timestep, d, stats[d].mean, stats[d].std, episodes))
    rows.sort(key=lambda r: (r[0], r[1]))
    return ["timestep", "dim", "mean_reward", "std_reward", "episodes"], rows
