"""Graph observations for chain morphologies and their batching."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .autodiff import ShapeError

NODE_FEATURES = 2
EDGE_FEATURES = 2
GLOBAL_FEATURES = 4


@dataclass
class GraphObservation:
    """One morphology snapshot.

    node_features: (d, 2) joint angle and angular velocity per actuated joint.
    edge_index: (2, E) local (src, dst) pairs.
    edge_features: (E, 2) index offset dst - src and link length.
    global_features: (4,) yaw, yaw rate, root x velocity, root y velocity.
    """

    node_features: np.ndarray
    edge_index: np.ndarray
    edge_features: np.ndarray
    global_features: np.ndarray

    @property
    def dim(self) -> int:
        return self.node_features.shape[0]


@lru_cache(maxsize=64)
def chain_edges(n_nodes: int, link_length: float) -> tuple[np.ndarray, np.ndarray]:
    """Bidirectional edges between consecutive joints of a chain."""
    src = np.arange(n_nodes - 1)
    dst = src + 1
    ei = np.stack([np.concatenate([src, dst]), np.concatenate([dst, src])])
    feats = np.empty((ei.shape[1], EDGE_FEATURES))
    feats[:, 0] = ei[1] - ei[0]
    feats[:, 1] = link_length
    ei.setflags(write=False)
    feats.setflags(write=False)
    return ei, feats


@dataclass
class GraphBatch:
    node_features: np.ndarray  # (N, 2)
    edge_index: np.ndarray  # (2, E), offset into the batch
    edge_features: np.ndarray  # (E, 2)
    graph_offsets: np.ndarray  # (G,) first node of each graph
    node_graph: np.ndarray  # (N,) graph id of each node
    global_features: np.ndarray  # (G, 4)
    dims: np.ndarray  # (G,)

    @property
    def num_graphs(self) -> int:
        return self.dims.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    def validate(self):
        n = self.num_nodes
        if self.edge_index.size and (self.edge_index.min() < 0 or self.edge_index.max() >= n):
            raise ShapeError("dangling edge index")
        if self.edge_index.size and np.any(
            self.node_graph[self.edge_index[0]] != self.node_graph[self.edge_index[1]]
        ):
            raise ShapeError("edge crosses graph boundary")
        if self.global_features.shape != (self.num_graphs, GLOBAL_FEATURES):
            raise ShapeError(
                f"global features must be ({self.num_graphs}, {GLOBAL_FEATURES}), "
                f"got {self.global_features.shape}"
            )
        if int(self.dims.sum()) != n:
            raise ShapeError("dims do not add up to the node count")


def batch_graphs(observations: Sequence[GraphObservation]) -> GraphBatch:
    dims = np.array([o.dim for o in observations], dtype=np.intp)
    offsets = np.concatenate([[0], np.cumsum(dims)[:-1]]).astype(np.intp)
    nodes = np.concatenate([o.node_features for o in observations], axis=0)
    edges = np.concatenate(
        [o.edge_index + off for o, off in zip(observations, offsets)], axis=1
    )
    efeat = np.concatenate([o.edge_features for o in observations], axis=0)
    glob = np.stack([np.asarray(o.global_features, dtype=np.float64) for o in observations])
    node_graph = np.repeat(np.arange(len(observations)), dims)
    return GraphBatch(nodes, edges, efeat, offsets, node_graph, glob, dims)


def batch_chain_arrays(
    node_features: Sequence[np.ndarray],
    global_features: np.ndarray,
    link_length: float,
) -> GraphBatch:
    """Fast path for chain graphs stored as bare arrays (used by the trainer)."""
    dims = np.array([nf.shape[0] for nf in node_features], dtype=np.intp)
    offsets = np.concatenate([[0], np.cumsum(dims)[:-1]]).astype(np.intp)
    nodes = np.concatenate(node_features, axis=0)
    eis, efs = [], []
    for d, off in zip(dims, offsets):
        ei, ef = chain_edges(int(d), link_length)
        eis.append(ei + off)
        efs.append(ef)
    node_graph = np.repeat(np.arange(dims.size), dims)
    return GraphBatch(
        nodes,
        np.concatenate(eis, axis=1),
        np.concatenate(efs, axis=0),
        offsets,
        node_graph,
        np.asarray(global_features, dtype=np.float64),
        dims,
    )
