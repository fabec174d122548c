"""PPO over mixed-dimension swimmer batches with optional sqrt(dim) clip compensation."""
from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import GraphBatch, batch_chain_arrays
from .nn import Adam, FeatureExtractorConfig, GraphPolicy, clip_grad_norm, load_checkpoint, save_checkpoint
from .policy_math import LOG_2PI, compensated_epsilon
from .swimmer import EnvConfig, SwimmerState, evaluation_dims, reset, sample_dim, step, wrap_angle

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epsilon: float = 0.111
    compensated: bool = False
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    n_envs: int = 8
    rollout_steps: int = 125
    epochs_per_update: int = 10
    minibatch_graphs: int = 250
    total_timesteps: int = 150_000
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    seed: int = 0
    dim_low: int = 2
    dim_high: int = 10
    snapshot_every: int = 6000
    log_std_init: float = 0.0
    per_dim_advantage_norm: bool = False
    episode_window: int = 10

    def validate(self) -> "TrainConfig":
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("need 0 < gamma <= 1 and 0 <= gae_lambda <= 1")
        if min(self.n_envs, self.rollout_steps, self.epochs_per_update, self.minibatch_graphs) < 1:
            raise ValueError("n_envs, rollout_steps, epochs_per_update, minibatch_graphs must be >= 1")
        if not 1 <= self.dim_low <= self.dim_high:
            raise ValueError("need 1 <= dim_low <= dim_high")
        if self.snapshot_every < 1 or self.total_timesteps < 1:
            raise ValueError("snapshot_every and total_timesteps must be >= 1")
        return self

    def effective_epsilon(self, dims: np.ndarray) -> np.ndarray:
        dims = np.asarray(dims)
        if self.compensated:
            return np.array([compensated_epsilon(self.epsilon, int(d)) for d in dims])
        return np.full(dims.shape, self.epsilon)


# --- rollout storage ---------------------------------------------------------


@dataclass
class RolloutBuffer:
    """Transitions laid out worker-major: worker w owns rows [w*T, (w+1)*T)."""

    node_features: list[np.ndarray]
    global_features: np.ndarray
    actions: list[np.ndarray]
    log_prob_old: np.ndarray
    value_old: np.ndarray
    next_value: np.ndarray
    rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    dims: np.ndarray
    n_workers: int
    episode_returns: list[float] = field(default_factory=list)
    episode_dims: list[int] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return self.rewards.shape[0]

    def worker_slices(self) -> list[slice]:
        T = len(self) // self.n_workers
        return [slice(w * T, (w + 1) * T) for w in range(self.n_workers)]


@dataclass
class Worker:
    rng: np.random.Generator
    env: EnvConfig | None = None
    state: SwimmerState | None = None
    episode_return: float = 0.0


def make_workers(config: TrainConfig) -> list[Worker]:
    seqs = np.random.SeedSequence([config.seed, 0xC0FFEE]).spawn(config.n_envs)
    return [Worker(np.random.default_rng(s)) for s in seqs]


def _start_episode(worker: Worker, base_env: EnvConfig, config: TrainConfig):
    d = sample_dim(worker.rng, config.dim_low, config.dim_high)
    worker.env = base_env.with_dim(d)
    worker.state, _ = reset(worker.env, int(worker.rng.integers(2**31)))
    worker.episode_return = 0.0


def _policy_inputs(states: Sequence[SwimmerState], link_length: float) -> GraphBatch:
    nodes = [np.stack([s.joint_angles, s.joint_velocities], axis=1) for s in states]
    glob = np.stack([[wrap_angle(s.yaw), s.yaw_rate, s.root_velocity[0], s.root_velocity[1]] for s in states])
    return batch_chain_arrays(nodes, glob, link_length)


def _predict(policy: GraphPolicy, batch: GraphBatch):
    means, values, log_std = policy.forward(batch)
    return means.data, values.data, float(log_std.data[0])


def collect_rollouts(
    policy: GraphPolicy,
    base_env: EnvConfig,
    config: TrainConfig,
    workers: list[Worker],
) -> RolloutBuffer:
    """Run every worker ``rollout_steps`` steps with sampled actions.

    Each worker redraws its dimension at every episode start. Episodes carry
    over between calls; a worker without an active episode starts one.
    """
    W, T = len(workers), config.rollout_steps
    n = W * T
    link = base_env.link_length
    node_features: list[np.ndarray | None] = [None] * n
    actions: list[np.ndarray | None] = [None] * n
    glob = np.zeros((n, 4))
    logp = np.zeros(n)
    vals = np.zeros(n)
    next_val = np.zeros(n)
    rewards = np.zeros(n)
    term = np.zeros(n, dtype=bool)
    trunc = np.zeros(n, dtype=bool)
    dims = np.zeros(n, dtype=np.intp)
    ep_returns, ep_dims = [], []
    pending: list[tuple[int, SwimmerState]] = []  # rows whose successor value is still needed

    for w in workers:
        if w.state is None:
            _start_episode(w, base_env, config)

    for t in range(T):
        states = [w.state for w in workers]
        batch = _policy_inputs(states, link)
        means, values, log_std = _predict(policy, batch)
        std = math.exp(log_std)
        per_graph = np.split(means, np.cumsum(batch.dims)[:-1])
        for i, (w, mu) in enumerate(zip(workers, per_graph)):
            row = i * T + t
            d = mu.size
            z = w.rng.standard_normal(d)
            a = mu + std * z
            node_features[row] = batch.node_features[batch.graph_offsets[i]: batch.graph_offsets[i] + d]
            glob[row] = batch.global_features[i]
            actions[row] = a
            logp[row] = float(np.sum(-log_std - 0.5 * LOG_2PI - 0.5 * z * z))
            vals[row] = values[i]
            dims[row] = d
            try:
                w.state, res = step(w.state, a, w.env)
            except Exception as exc:
                raise RuntimeError(f"environment failure in worker {i}: {exc}") from exc
            rewards[row] = res.reward
            w.episode_return += res.reward
            term[row], trunc[row] = res.terminated, res.truncated
            if res.terminated or res.truncated:
                ep_returns.append(w.episode_return)
                ep_dims.append(d)
                if res.truncated:
                    pending.append((row, w.state))
                _start_episode(w, base_env, config)
            elif t == T - 1:
                pending.append((row, w.state))
            if t > 0 and not (term[row - 1] or trunc[row - 1]):
                next_val[row - 1] = values[i]

    if pending:
        batch = _policy_inputs([s for _, s in pending], link)
        _, v, _ = _predict(policy, batch)
        for (row, _), value in zip(pending, v):
            next_val[row] = value

    return RolloutBuffer(
        node_features, glob, actions, logp, vals, next_val, rewards, term, trunc, dims, W,
        ep_returns, ep_dims,
    )


def compute_gae(
    rewards,
    values,
    next_values,
    terminated,
    truncated,
    gamma: float,
    lam: float,
    normalize: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one contiguous segment.

    ``next_values[t]`` is V(s_{t+1}) for the actual successor state (the
    bootstrap for truncated or segment-final steps); it is ignored where
    ``terminated``. Returns (advantages, returns) with returns = A + V taken
    before any normalization.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    nv = np.asarray(next_values, dtype=np.float64)
    te = np.asarray(terminated, dtype=bool)
    tr = np.asarray(truncated, dtype=bool)
    if not (r.shape == v.shape == nv.shape == te.shape == tr.shape):
        raise ValueError("rewards, values, next_values and flags must have equal length")
    adv = np.zeros_like(r)
    running = 0.0
    for t in range(r.size - 1, -1, -1):
        delta = r[t] + gamma * (0.0 if te[t] else nv[t]) - v[t]
        if te[t] or tr[t]:
            running = 0.0
        running = delta + gamma * lam * running
        adv[t] = running
    ret = adv + v
    if normalize:
        adv = normalize_advantages(adv)
    return adv, ret


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def finalize_buffer(buf: RolloutBuffer, config: TrainConfig) -> RolloutBuffer:
    adv = np.zeros(len(buf))
    ret = np.zeros(len(buf))
    for sl in buf.worker_slices():
        a, r = compute_gae(
            buf.rewards[sl], buf.value_old[sl], buf.next_value[sl],
            buf.terminated[sl], buf.truncated[sl], config.gamma, config.gae_lambda,
        )
        adv[sl], ret[sl] = a, r
    if config.per_dim_advantage_norm:
        for d in np.unique(buf.dims):
            m = buf.dims == d
            adv[m] = normalize_advantages(adv[m])
    else:
        adv = normalize_advantages(adv)
    buf.advantages, buf.returns = adv, ret
    return buf


# --- losses --------------------------------------------------------------------


@dataclass
class MiniBatch:
    graphs: GraphBatch
    actions: np.ndarray  # (N,) concatenated per node
    log_prob_old: np.ndarray  # (G,)
    advantages: np.ndarray  # (G,)
    returns: np.ndarray  # (G,)

    @property
    def dims(self) -> np.ndarray:
        return self.graphs.dims


def make_minibatch(buf: RolloutBuffer, idx: np.ndarray, link_length: float) -> MiniBatch:
    graphs = batch_chain_arrays([buf.node_features[i] for i in idx], buf.global_features[idx], link_length)
    return MiniBatch(
        graphs,
        np.concatenate([buf.actions[i] for i in idx]),
        buf.log_prob_old[idx],
        buf.advantages[idx],
        buf.returns[idx],
    )


@dataclass
class ClipDiagnostics:
    clipped: dict[int, int]
    counts: dict[int, int]
    approx_kl: float
    ratio: np.ndarray

    def merge(self, other: "ClipDiagnostics") -> "ClipDiagnostics":
        c = dict(self.clipped)
        n = dict(self.counts)
        for d, v in other.clipped.items():
            c[d] = c.get(d, 0) + v
        for d, v in other.counts.items():
            n[d] = n.get(d, 0) + v
        return ClipDiagnostics(c, n, 0.0, np.zeros(0))

    def fractions(self) -> dict[int, float]:
        return {d: self.clipped[d] / self.counts[d] for d in sorted(self.counts)}


def graph_log_prob(means: Tensor, log_std: Tensor, mb: MiniBatch) -> Tensor:
    """Summed per-joint Gaussian log density for each graph, shape (G,)."""
    inv_std = ad.exp(ad.neg(log_std))
    z = ad.mul(ad.add(means, -mb.actions), inv_std)
    per_node = ad.add(ad.mul(ad.square(z), -0.5), ad.add(ad.neg(log_std), -0.5 * LOG_2PI))
    return ad.scatter_add(per_node, mb.graphs.node_graph, mb.graphs.num_graphs)


def clipped_loss(
    means: Tensor,
    log_std: Tensor,
    mb: MiniBatch,
    config: TrainConfig,
) -> tuple[Tensor, ClipDiagnostics]:
    """-mean(min(r A, clip(r, 1 - eps_k, 1 + eps_k) A)) with per-sample eps_k.

    A clip event is counted when r leaves the band on the side where the min
    selects the clipped branch, i.e. when the sample's gradient is cut.
    """
    eps = config.effective_epsilon(mb.dims)
    A = mb.advantages
    logp = graph_log_prob(means, log_std, mb)
    log_ratio = ad.add(logp, -mb.log_prob_old)
    ratio = ad.exp(log_ratio)
    surr1 = ad.mul(ratio, A)
    surr2 = ad.mul(ad.clip(ratio, 1.0 - eps, 1.0 + eps), A)
    loss = ad.neg(ad.mean(ad.minimum(surr1, surr2)))

    r = ratio.data
    cut = ((A > 0) & (r > 1.0 + eps)) | ((A < 0) & (r < 1.0 - eps))
    clipped, counts = {}, {}
    for d in np.unique(mb.dims):
        m = mb.dims == d
        counts[int(d)] = int(m.sum())
        clipped[int(d)] = int(cut[m].sum())
    lr = log_ratio.data
    approx_kl = float(np.mean(np.exp(lr) - 1.0 - lr))
    return loss, ClipDiagnostics(clipped, counts, approx_kl, r)


def value_loss(values: Tensor, mb: MiniBatch) -> Tensor:
    return ad.mean(ad.square(ad.add(values, -mb.returns)))


def entropy(log_std: Tensor, mb: MiniBatch) -> Tensor:
    """Mean per-graph entropy d (1/2 (1 + log 2 pi) + log_std)."""
    mean_dim = float(np.mean(mb.dims))
    return ad.reshape(ad.add(ad.mul(log_std, mean_dim), 0.5 * (1.0 + LOG_2PI) * mean_dim), ())


def ppo_objective(policy: GraphPolicy, mb: MiniBatch, config: TrainConfig):
    means, values, log_std = policy.forward(mb.graphs)
    pl, diag = clipped_loss(means, log_std, mb, config)
    vl = value_loss(values, mb)
    ent = entropy(log_std, mb)
    total = ad.add(ad.add(pl, ad.mul(vl, config.value_coef)), ad.mul(ent, -config.entropy_coef))
    return ad.reshape(total, ()), pl, vl, ent, diag


# --- training ------------------------------------------------------------------


@dataclass
class Metrics:
    timestep: int
    mean_ep_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: dict[int, float]
    log_std: float = 0.0

    @property
    def clip_spread(self) -> float:
        return clip_spread(self.clip_fraction)


def clip_spread(fractions: dict[int, float]) -> float:
    """Population std of the per-dimension clip fractions."""
    if not fractions:
        return 0.0
    return float(np.std(np.fromiter(fractions.values(), dtype=np.float64)))


def clip_fraction_per_dim(series: Sequence[Metrics]) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Per-dimension clip-fraction traces (NaN where a dim was absent) and the
    cross-dimension spread per update."""
    if not series:
        raise ValueError("need at least one update")
    dims = sorted({d for m in series for d in m.clip_fraction})
    traces = {d: np.array([m.clip_fraction.get(d, np.nan) for m in series]) for d in dims}
    spread = np.array([m.clip_spread for m in series])
    return traces, spread


def update_policy(
    policy: GraphPolicy,
    optimizer: Adam,
    buf: RolloutBuffer,
    config: TrainConfig,
    rng: np.random.Generator,
    link_length: float,
    dump_dir: Path | None = None,
) -> tuple[float, float, float, float, ClipDiagnostics]:
    n = len(buf)
    pls, vls, ents, kls = [], [], [], []
    diag_total = ClipDiagnostics({}, {}, 0.0, np.zeros(0))
    for _ in range(config.epochs_per_update):
        perm = rng.permutation(n)
        for start in range(0, n, config.minibatch_graphs):
            idx = perm[start: start + config.minibatch_graphs]
            mb = make_minibatch(buf, idx, link_length)
            policy.params.zero_grad()
            total, pl, vl, ent, diag = ppo_objective(policy, mb, config)
            if not np.isfinite(total.data):
                path = None
                if dump_dir is not None:
                    path = Path(dump_dir) / "abort_minibatch.npz"
                    np.savez(path, indices=idx, actions=mb.actions, log_prob_old=mb.log_prob_old,
                             advantages=mb.advantages, returns=mb.returns, dims=mb.dims)
                raise TrainingAborted(f"non-finite loss {float(total.data)}; minibatch dumped to {path}")
            total.backward()
            clip_grad_norm(policy.params, config.max_grad_norm)
            optimizer.step(policy.params)
            pls.append(float(pl.data))
            vls.append(float(vl.data))
            ents.append(float(ent.data))
            kls.append(diag.approx_kl)
            diag_total = diag_total.merge(diag)
    return float(np.mean(pls)), float(np.mean(vls)), float(np.mean(ents)), float(np.mean(kls)), diag_total


@dataclass
class TrainResult:
    policy: GraphPolicy
    metrics: list[Metrics]
    checkpoints: list[Path]
    initial_policy: GraphPolicy


def snapshot_name(timestep: int) -> str:
    return f"snapshot_{timestep:09d}.npz"


def train(
    config: TrainConfig,
    env_config: EnvConfig | None = None,
    extractor_config: FeatureExtractorConfig | None = None,
    run_dir: str | Path | None = None,
    progress: Callable[[Metrics], None] | None = None,
) -> TrainResult:
    """Alternate rollouts and clipped-surrogate epochs until ``total_timesteps``.

    A snapshot is written each time the step counter crosses a multiple of
    ``snapshot_every`` (only when ``run_dir`` is given).
    """
    config.validate()
    env_config = (env_config or EnvConfig()).validate()
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    policy = GraphPolicy(extractor_config, seed=config.seed, log_std_init=config.log_std_init)
    initial = GraphPolicy(extractor_config, seed=config.seed, log_std_init=config.log_std_init)
    opt = Adam(policy.params, lr=config.learning_rate)
    rng = np.random.default_rng([config.seed, 0xBEEF])
    workers = make_workers(config)
    recent = deque(maxlen=config.episode_window)
    metrics: list[Metrics] = []
    checkpoints: list[Path] = []
    timestep = 0
    next_snapshot = config.snapshot_every
    while timestep < config.total_timesteps:
        buf = finalize_buffer(collect_rollouts(policy, env_config, config, workers), config)
        timestep += len(buf)
        recent.extend(buf.episode_returns)
        pl, vl, ent, kl, diag = update_policy(policy, opt, buf, config, rng, env_config.link_length, run_dir)
        m = Metrics(
            timestep=timestep,
            mean_ep_reward=float(np.mean(recent)) if recent else float("nan"),
            policy_loss=pl,
            value_loss=vl,
            entropy=ent,
            approx_kl=kl,
            clip_fraction=diag.fractions(),
            log_std=float(policy.params["heads.log_std"].data[0]),
        )
        metrics.append(m)
        if progress is not None:
            progress(m)
        log.debug("t=%d reward=%.4f spread=%.4f", timestep, m.mean_ep_reward, m.clip_spread)
        while timestep >= next_snapshot:
            if run_dir is not None:
                path = run_dir / "checkpoints" / snapshot_name(next_snapshot)
                save_checkpoint(path, policy, opt, rng, extra={"timestep": timestep, "snapshot": next_snapshot})
                checkpoints.append(path)
            next_snapshot += config.snapshot_every
    return TrainResult(policy, metrics, checkpoints, initial)


# --- evaluation ------------------------------------------------------------------


@dataclass
class EvalStats:
    mean: float
    std: float
    returns: np.ndarray

    @property
    def stderr(self) -> float:
        n = self.returns.size
        return float(self.returns.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def run_episodes(
    policy: GraphPolicy,
    env_configs: Sequence[EnvConfig],
    seeds: Sequence[int],
    perturb: bool = True,
    sample_actions: bool = False,
) -> np.ndarray:
    """Episodes stepped in lockstep; returns episode returns.

    Actions are the policy mean unless ``sample_actions``, in which case each
    episode draws its exploration noise from its own stream seeded by its
    reset seed, as during training.
    """
    states = [reset(c, s, perturb)[0] for c, s in zip(env_configs, seeds)]
    noise = [np.random.default_rng([int(s), 0xA11]) for s in seeds]
    totals = np.zeros(len(states))
    active = list(range(len(states)))
    link = env_configs[0].link_length
    while active:
        batch = _policy_inputs([states[i] for i in active], link)
        means, _, log_std = _predict(policy, batch)
        std = math.exp(log_std)
        per_graph = np.split(means, np.cumsum(batch.dims)[:-1])
        still = []
        for i, mu in zip(active, per_graph):
            a = mu + std * noise[i].standard_normal(mu.size) if sample_actions else mu
            states[i], res = step(states[i], a, env_configs[i])
            totals[i] += res.reward
            if not (res.terminated or res.truncated):
                still.append(i)
        active = still
    return totals


def evaluate(
    policy_or_checkpoint,
    dims: Sequence[int] | None = None,
    episodes: int = 5,
    seed: int = 0,
    env_config: EnvConfig | None = None,
    perturb: bool = True,
) -> dict[int, EvalStats]:
    """Per-dimension return statistics; dims default to 2..10 plus 20."""
    policy = policy_or_checkpoint
    if not isinstance(policy, GraphPolicy):
        policy = load_checkpoint(policy_or_checkpoint).policy
    dims = list(dims) if dims is not None else evaluation_dims()
    base = env_config or EnvConfig()
    cfgs, seeds, owner = [], [], []
    for d in dims:
        ss = np.random.SeedSequence([seed, d]).generate_state(episodes)
        for e in range(episodes):
            cfgs.append(base.with_dim(d))
            seeds.append(int(ss[e]))
            owner.append(d)
    returns = run_episodes(policy, cfgs, seeds, perturb)
    owner = np.array(owner)
    out = {}
    for d in dims:
        r = returns[owner == d]
        out[d] = EvalStats(float(r.mean()), float(r.std()), r)
    return out


def evaluate_sampled_dims(
    policy: GraphPolicy,
    episodes: int,
    seed: int,
    env_config: EnvConfig | None = None,
    dim_low: int = 2,
    dim_high: int = 10,
    sample_actions: bool = False,
) -> EvalStats:
    """Episodes whose dimension is drawn U[dim_low, dim_high] from ``seed``."""
    base = env_config or EnvConfig()
    rng = np.random.default_rng([seed, 0xE7A1])
    dims = [sample_dim(rng, dim_low, dim_high) for _ in range(episodes)]
    seeds = [int(s) for s in rng.integers(0, 2**31, size=episodes)]
    r = run_episodes(policy, [base.with_dim(d) for d in dims], seeds, sample_actions=sample_actions)
    return EvalStats(float(r.mean()), float(r.std()), r)


# --- csv -------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.12g}"


def metrics_header(dim_low: int = 2, dim_high: int = 10) -> list[str]:
    return (
        ["timestep", "mean_ep_reward", "policy_loss", "value_loss", "entropy", "approx_kl"]
        + [f"clip_frac_dim_{d}" for d in range(dim_low, dim_high + 1)]
        + ["clip_spread"]
    )


def write_metrics_csv(path, series: Sequence[Metrics], dim_low: int = 2, dim_high: int = 10) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(metrics_header(dim_low, dim_high))
        for m in series:
            w.writerow(
                [fmt(m.timestep), fmt(m.mean_ep_reward), fmt(m.policy_loss), fmt(m.value_loss),
                 fmt(m.entropy), fmt(m.approx_kl)]
                + [fmt(m.clip_fraction.get(d, float("nan"))) for d in range(dim_low, dim_high + 1)]
                + [fmt(m.clip_spread)]
            )


def read_metrics_csv(path) -> list[Metrics]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            fr = {
                int(k.rsplit("_", 1)[1]): float(v)
                for k, v in row.items() if k.startswith("clip_frac_dim_") and v != ""
            }

            def num(key):
                return float(row[key]) if row[key] != "" else float("nan")

            out.append(Metrics(int(row["timestep"]), num("mean_ep_reward"), num("policy_loss"),
                               num("value_loss"), num("entropy"), num("approx_kl"), fr))
    return out


def train_config_dict(config: TrainConfig) -> dict:
    return asdict(config)
