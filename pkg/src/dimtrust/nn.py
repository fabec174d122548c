"""Edge-conditioned graph policy, Adam and checkpoints."""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graph import EDGE_FEATURES, GLOBAL_FEATURES, NODE_FEATURES, GraphBatch
from .policy_math import RejectedInput

CHECKPOINT_VERSION = 1


class CheckpointError(RejectedInput):
    pass


@dataclass
class FeatureExtractorConfig:
    conv1_channels: int = 24
    conv2_channels: int = 16
    global_hidden: int = 128
    global_out: int = 16
    # width 2 puts the extractor at 4484 parameters, the closest single-hidden-layer
    # edge network gets to the 4376 reported for the reference architecture
    edge_net_hidden: int = 2
    activation: str = "relu"
    # fixed input scaling so every raw feature is O(1) on typical swimming data
    joint_velocity_scale: float = 0.2
    yaw_rate_scale: float = 0.5
    root_velocity_scale: float = 5.0

    def __post_init__(self):
        for name in ("conv1_channels", "conv2_channels", "global_hidden", "global_out", "edge_net_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")

    @property
    def fused_dim(self) -> int:
        return self.conv2_channels + self.global_out


def _uniform(rng, fan_in, shape, gain=1.0):
    bound = gain / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Params(dict):
    """Ordered name -> Tensor mapping of trainable leaves."""

    def add(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self[name] = t
        return t

    def zero_grad(self):
        for t in self.values():
            t.grad = None

    def count(self, prefix: str = "") -> int:
        return int(sum(t.data.size for k, t in self.items() if k.startswith(prefix)))


def linear(x: Tensor, params: Params, name: str) -> Tensor:
    return ad.matmul(x, params[name + ".W"]) + params[name + ".b"]


def _add_linear(params: Params, rng, name, n_in, n_out, gain=1.0):
    params.add(name + ".W", _uniform(rng, n_in, (n_in, n_out), gain))
    params.add(name + ".b", np.zeros(n_out))


def _add_edge_conv(params: Params, rng, name, n_in, n_out, hidden):
    _add_linear(params, rng, name + ".edge1", EDGE_FEATURES, hidden)
    # scaled so a message x @ Theta(e) has roughly unit variance at init
    params.add(name + ".edge2.W", _uniform(rng, hidden * n_in, (hidden, n_in * n_out)))
    params.add(name + ".edge2.b", _uniform(rng, n_in, (n_in * n_out,)) * 0.5)
    params.add(name + ".root", _uniform(rng, n_in, (n_in, n_out)))
    params.add(name + ".bias", np.zeros(n_out))


def edge_conditioned_conv(
    params: Params,
    name: str,
    x: Tensor,
    batch: GraphBatch,
    n_in: int,
    n_out: int,
) -> Tensor:
    """x_i' = x_i W_root + b + mean_{j -> i} x_j Theta(e_ji).

    Theta(e) is an (n_in x n_out) matrix emitted per edge by a one-hidden-layer
    ReLU network over the edge features.
    """
    if x.shape[1] != n_in:
        raise ShapeError(f"{name}: expected {n_in} input channels, got {x.shape[1]}")
    ei = batch.edge_index
    if ei.size and (ei.min() < 0 or ei.max() >= batch.num_nodes):
        raise ShapeError("dangling edge index")
    out = ad.matmul(x, params[name + ".root"]) + params[name + ".bias"]
    if ei.shape[1] == 0:
        return out
    e = Tensor(batch.edge_features)
    theta = linear(ad.relu(linear(e, params, name + ".edge1")), params, name + ".edge2")
    msgs = ad.edge_matvec(ad.gather_rows(x, ei[0]), theta, n_in, n_out)
    return out + ad.scatter_mean(msgs, ei[1], batch.num_nodes)


class GraphPolicy:
    """Shared graph feature extractor with per-joint Gaussian mean and graph value heads.

    The log standard deviation is a single learned scalar shared by every joint
    of every morphology.
    """

    def __init__(self, config: FeatureExtractorConfig | None = None, seed: int = 0, log_std_init: float = 0.0):
        self.config = config or FeatureExtractorConfig()
        c = self.config
        rng = np.random.default_rng(seed)
        p = Params()
        _add_edge_conv(p, rng, "extractor.conv1", NODE_FEATURES, c.conv1_channels, c.edge_net_hidden)
        _add_edge_conv(p, rng, "extractor.conv2", c.conv1_channels, c.conv2_channels, c.edge_net_hidden)
        _add_linear(p, rng, "extractor.global1", GLOBAL_FEATURES, c.global_hidden)
        _add_linear(p, rng, "extractor.global2", c.global_hidden, c.global_out)
        _add_linear(p, rng, "heads.action", c.fused_dim, 1, gain=0.01)
        _add_linear(p, rng, "heads.value", c.fused_dim, 1)
        p.add("heads.log_std", np.array([log_std_init]))
        self.params = p

    def census(self) -> dict[str, int]:
        return {
            "extractor": self.params.count("extractor."),
            "heads": self.params.count("heads."),
            "total": self.params.count(),
        }

    def extract(self, batch: GraphBatch) -> tuple[Tensor, Tensor]:
        """Returns (node embeddings (N, conv2), fused features (N, conv2 + global_out))."""
        c = self.config
        if batch.global_features.ndim != 2 or batch.global_features.shape[1] != GLOBAL_FEATURES:
            raise ShapeError(f"global features need {GLOBAL_FEATURES} columns, got {batch.global_features.shape}")
        p = self.params
        x = Tensor(batch.node_features * self.node_scale)
        h = ad.relu(edge_conditioned_conv(p, "extractor.conv1", x, batch, NODE_FEATURES, c.conv1_channels))
        h = ad.relu(edge_conditioned_conv(p, "extractor.conv2", h, batch, c.conv1_channels, c.conv2_channels))
        g = ad.relu(linear(Tensor(batch.global_features * self.global_scale), p, "extractor.global1"))
        g = linear(g, p, "extractor.global2")
        fused = ad.concat([h, ad.gather_rows(g, batch.node_graph)], axis=1)
        return h, fused

    @property
    def node_scale(self) -> np.ndarray:
        return np.array([1.0, self.config.joint_velocity_scale])

    @property
    def global_scale(self) -> np.ndarray:
        c = self.config
        return np.array([1.0, c.yaw_rate_scale, c.root_velocity_scale, c.root_velocity_scale])

    def heads(self, fused: Tensor, batch: GraphBatch) -> tuple[Tensor, Tensor, Tensor]:
        """(action means (N,), values (G,), log_std (1,))."""
        p = self.params
        means = ad.reshape(linear(fused, p, "heads.action"), (-1,))
        pooled = ad.scatter_mean(fused, batch.node_graph, batch.num_graphs)
        values = ad.reshape(linear(pooled, p, "heads.value"), (-1,))
        return means, values, p["heads.log_std"]

    def forward(self, batch: GraphBatch):
        _, fused = self.extract(batch)
        return self.heads(fused, batch)

    def split_means(self, means: np.ndarray, batch: GraphBatch) -> list[np.ndarray]:
        return np.split(means, np.cumsum(batch.dims)[:-1])

    def get_flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self.params.values()])

    def copy_from(self, other: "GraphPolicy"):
        for k, t in other.params.items():
            self.params[k].data = t.data.copy()


class Adam:
    def __init__(self, params: Params, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, params: Params, grads: dict[str, np.ndarray] | None = None):
        """One bias-corrected Adam update; missing gradients count as zero."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, p in params.items():
            g = (grads[k] if grads is not None else p.grad)
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            v = self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grad_norm(params: Params, max_norm: float) -> float:
    grads = [p.grad for p in params.values() if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def save_checkpoint(
    path,
    policy: GraphPolicy,
    optimizer: Adam | None = None,
    rng: np.random.Generator | None = None,
    extra: dict | None = None,
) -> None:
    """Uncompressed npz: parameter and Adam arrays plus a JSON ``meta`` record."""
    arrays = {f"param/{k}": t.data for k, t in policy.params.items()}
    meta = {
        "version": CHECKPOINT_VERSION,
        "extractor_config": asdict(policy.config),
        "param_names": list(policy.params.keys()),
        "param_shapes": {k: list(t.data.shape) for k, t in policy.params.items()},
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "extra": extra or {},
    }
    if optimizer is not None:
        meta["adam"] = {
            "t": optimizer.t,
            "lr": optimizer.lr,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
        }
        for k in policy.params:
            arrays[f"adam_m/{k}"] = optimizer.m[k]
            arrays[f"adam_v/{k}"] = optimizer.v[k]
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


@dataclass
class Checkpoint:
    policy: GraphPolicy
    optimizer: Adam | None
    rng: np.random.Generator | None
    extra: dict


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as z:
        if "meta" not in z.files:
            raise CheckpointError(f"{path}: not a checkpoint (missing meta)")
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: checkpoint version {meta.get('version')} != {CHECKPOINT_VERSION}"
            )
        policy = GraphPolicy(FeatureExtractorConfig(**meta["extractor_config"]))
        if list(policy.params.keys()) != meta["param_names"]:
            raise CheckpointError(f"{path}: parameter layout mismatch")
        for k in meta["param_names"]:
            arr = z[f"param/{k}"]
            if list(arr.shape) != meta["param_shapes"][k]:
                raise CheckpointError(f"{path}: shape mismatch for {k}")
            policy.params[k].data = arr.astype(np.float64)
        opt = None
        if "adam" in meta:
            a = meta["adam"]
            opt = Adam(policy.params, a["lr"], a["beta1"], a["beta2"], a["eps"])
            opt.t = a["t"]
            for k in meta["param_names"]:
                opt.m[k] = z[f"adam_m/{k}"].copy()
                opt.v[k] = z[f"adam_v/{k}"].copy()
        rng = None
        if meta.get("rng_state") is not None:
            rng = np.random.default_rng()
            rng.bit_generator.state = meta["rng_state"]
    return Checkpoint(policy, opt, rng, meta.get("extra", {}))
