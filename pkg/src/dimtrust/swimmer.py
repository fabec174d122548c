"""Planar N-link swimmer with anisotropic viscous drag.

Generalized coordinates are q = (x, y, yaw, phi_1 .. phi_d) where (x, y) is
the free end of the first (root) link, yaw its absolute heading and phi_j the
relative angle of joint j. Link k's heading is yaw + phi_1 + ... + phi_k.

Each link feels linear drag at its midpoint, split into tangential and normal
components, plus the rotational drag of a rigid rod spinning about its centre
(the normal coefficient integrated over the length). Joint torques act on the
relative joint coordinates, i.e. as equal and opposite pairs on adjacent links.

Substeps use semi-implicit Euler with the drag and centripetal terms taken
implicitly in velocity:

    (M + dt (D + C)) qd' = M qd + dt tau,    q' = q + dt qd'

where h(q, qd) = C(q, qd) qd collects the centripetal terms. Treating both
drag and C implicitly keeps light tail links of long chains from whipping
the integrator unstable. Joint stops are inelastic and act through internal
joint impulses only, see _joint_stop.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .graph import GraphObservation, chain_edges

JOINT_LIMIT = math.radians(100.0)


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    n_links: int = 3
    dt: float = 0.01
    frame_skip: int = 4
    link_length: float = 0.1
    link_mass: float = 0.01
    normal_drag: float = 1.5
    tangential_drag: float = 0.3
    # N*m per unit action; sized so joints sweep their range in a few tenths of a second
    torque_limit: float = 1e-3
    max_episode_steps: int = 1000
    forward_reward_weight: float = 1.0
    ctrl_cost_weight: float = 1e-4
    reset_noise: float = 0.1

    def validate(self, min_links: int = 3) -> "EnvConfig":
        if self.n_links < min_links:
            raise EnvError(f"n_links must be >= {min_links}, got {self.n_links}")
        if self.dt <= 0 or self.frame_skip < 1:
            raise EnvError("need dt > 0 and frame_skip >= 1")
        if self.tangential_drag <= 0 or self.normal_drag <= self.tangential_drag:
            raise EnvError("need 0 < tangential_drag < normal_drag")
        if self.link_length <= 0 or self.link_mass <= 0 or self.torque_limit <= 0:
            raise EnvError("link length, mass and torque limit must be positive")
        if self.max_episode_steps < 1 or self.reset_noise < 0:
            raise EnvError("max_episode_steps >= 1 and reset_noise >= 0 required")
        return self

    @property
    def action_dim(self) -> int:
        return self.n_links - 1

    @property
    def control_dt(self) -> float:
        return self.dt * self.frame_skip

    def with_dim(self, dim: int) -> "EnvConfig":
        return replace(self, n_links=dim + 1)


@dataclass
class SwimmerState:
    root_position: np.ndarray
    yaw: float
    joint_angles: np.ndarray
    root_velocity: np.ndarray
    yaw_rate: float
    joint_velocities: np.ndarray
    step_count: int = 0

    @classmethod
    def from_q(cls, q: np.ndarray, qd: np.ndarray, step_count: int = 0) -> "SwimmerState":
        return cls(q[0:2].copy(), float(q[2]), q[3:].copy(), qd[0:2].copy(), float(qd[2]), qd[3:].copy(), step_count)

    def q(self) -> np.ndarray:
        return np.concatenate([self.root_position, [self.yaw], self.joint_angles])

    def qd(self) -> np.ndarray:
        return np.concatenate([self.root_velocity, [self.yaw_rate], self.joint_velocities])

    def mirrored(self) -> "SwimmerState":
        """Reflection about the x axis."""
        return SwimmerState(
            self.root_position * np.array([1.0, -1.0]),
            -self.yaw,
            -self.joint_angles,
            self.root_velocity * np.array([1.0, -1.0]),
            -self.yaw_rate,
            -self.joint_velocities,
            self.step_count,
        )


@dataclass
class StepInfo:
    x_velocity: float
    ctrl_cost: float


@dataclass
class StepResult:
    observation: GraphObservation
    reward: float
    terminated: bool
    truncated: bool
    info: StepInfo = field(default_factory=lambda: StepInfo(0.0, 0.0))


# --- numba kernels ---------------------------------------------------------


@numba.njit(cache=True)
def _chain_terms(q, qd, L, m, c_t, c_n):
    """Mass matrix M, drag matrix D and centripetal matrix C (h = C qd) at (q, qd)."""
    n = q.shape[0]
    n_links = n - 2
    inertia = m * L * L / 12.0
    c_rot = c_n * L * L * L / 12.0
    M = np.zeros((n, n))
    D = np.zeros((n, n))
    C = np.zeros((n, n))
    theta = np.empty(n_links)
    omega = np.empty(n_links)
    theta[0] = q[2]
    omega[0] = qd[2]
    for k in range(1, n_links):
        theta[k] = theta[k - 1] + q[2 + k]
        omega[k] = omega[k - 1] + qd[2 + k]
    J = np.zeros((2, n))
    B = np.zeros((2, n))
    for k in range(n_links):
        J[:, :] = 0.0
        B[:, :] = 0.0
        J[0, 0] = 1.0
        J[1, 1] = 1.0
        # angular coordinate a (column 2 + a) moves every link j >= a;
        # B qd is the midpoint's centripetal acceleration
        for j in range(k + 1):
            lev = L if j < k else 0.5 * L
            s = math.sin(theta[j])
            c = math.cos(theta[j])
            w = lev * omega[j]
            for a in range(j + 1):
                J[0, 2 + a] -= lev * s
                J[1, 2 + a] += lev * c
                B[0, 2 + a] -= w * c
                B[1, 2 + a] -= w * s
        ct = math.cos(theta[k])
        st = math.sin(theta[k])
        # local damping L (c_t t t^T + c_n n n^T) with t = (c, s), n = (-s, c)
        d00 = L * (c_t * ct * ct + c_n * st * st)
        d01 = L * (c_t - c_n) * ct * st
        d11 = L * (c_t * st * st + c_n * ct * ct)
        for r in range(n):
            jr0 = J[0, r]
            jr1 = J[1, r]
            if jr0 == 0.0 and jr1 == 0.0:
                continue
            dr0 = d00 * jr0 + d01 * jr1
            dr1 = d01 * jr0 + d11 * jr1
            for s_ in range(n):
                js0 = J[0, s_]
                js1 = J[1, s_]
                M[r, s_] += m * (jr0 * js0 + jr1 * js1)
                D[r, s_] += dr0 * js0 + dr1 * js1
                C[r, s_] += m * (jr0 * B[0, s_] + jr1 * B[1, s_])
        for r in range(2, 3 + k):
            for s_ in range(2, 3 + k):
                M[r, s_] += inertia
                D[r, s_] += c_rot
    return M, D, C


@numba.njit(cache=True)
def _lu_solve(A, b):
    """Gaussian elimination with partial pivoting."""
    n = A.shape[0]
    U = A.copy()
    x = b.copy()
    for col in range(n):
        piv = col
        best = abs(U[col, col])
        for r in range(col + 1, n):
            if abs(U[r, col]) > best:
                best = abs(U[r, col])
                piv = r
        if best == 0.0:
            raise ValueError("singular system")
        if piv != col:
            for c in range(n):
                tmp = U[col, c]
                U[col, c] = U[piv, c]
                U[piv, c] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        for r in range(col + 1, n):
            f = U[r, col] / U[col, col]
            if f != 0.0:
                for c in range(col, n):
                    U[r, c] -= f * U[col, c]
                x[r] -= f * x[col]
    for r in range(n - 1, -1, -1):
        s = x[r]
        for c in range(r + 1, n):
            s -= U[r, c] * x[c]
        x[r] = s / U[r, r]
    return x


@numba.njit(cache=True)
def _cholesky_solve(A, b):
    n = A.shape[0]
    Lc = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= Lc[i, k] * Lc[j, k]
            if i == j:
                if s <= 0.0:
                    raise ValueError("matrix is not positive definite")
                Lc[i, i] = math.sqrt(s)
            else:
                Lc[i, j] = s / Lc[j, j]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= Lc[i, k] * y[k]
        y[i] = s / Lc[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= Lc[k, i] * x[k]
        x[i] = s / Lc[i, i]
    return x


@numba.njit(cache=True)
def _accelerations(q, qd, gen_force, L, m, c_t, c_n):
    M, D, C = _chain_terms(q, qd, L, m, c_t, c_n)
    return _cholesky_solve(M, gen_force - D @ qd - C @ qd)


@numba.njit(cache=True)
def _integrate(q, qd, gen_force, L, m, c_t, c_n, dt, n_sub, limit):
    """Advance (q, qd) in place by n_sub substeps."""
    n = q.shape[0]
    for _ in range(n_sub):
        M, D, C = _chain_terms(q, qd, L, m, c_t, c_n)
        rhs = M @ qd + dt * gen_force
        qd[:] = _lu_solve(M + dt * (D + C), rhs)
        for i in range(n):
            q[i] += dt * qd[i]
        over = np.zeros(n)
        hit = False
        for i in range(3, n):
            if q[i] > limit:
                over[i] = limit - q[i]
                hit = True
            elif q[i] < -limit:
                over[i] = -limit - q[i]
                hit = True
        if hit:
            _joint_stop(q, qd, over, L, m)


@numba.njit(cache=True)
def _joint_stop(q, qd, over, L, m):
    """Inelastic joint stop. Joints past their limit are moved back by the
    overshoot and brought to rest, both through internal joint impulses
    (corrections of the form M^-1 S^T lam), so the stop moves neither the
    centre of mass nor the body's net rotation to first order and leaves
    linear and angular momentum unchanged."""
    n = q.shape[0]
    idx = np.nonzero(over)[0]
    k = idx.size
    target = q[idx] + over[idx]
    # position first, then the velocity impulse with the mass matrix of the
    # corrected configuration, so momentum is conserved exactly there
    for stage in range(2):
        M, _, _ = _chain_terms(q, qd, L, m, 1.0, 2.0)
        X = np.zeros((n, k))
        for c in range(k):
            e = np.zeros(n)
            e[idx[c]] = 1.0
            X[:, c] = _lu_solve(M, e)
        A = np.zeros((k, k))
        rhs = np.zeros(k)
        for r in range(k):
            rhs[r] = over[idx[r]] if stage == 0 else -qd[idx[r]]
            for c in range(k):
                A[r, c] = X[idx[r], c]
        lam = _lu_solve(A, rhs)
        x = q if stage == 0 else qd
        for i in range(n):
            for c in range(k):
                x[i] += X[i, c] * lam[c]
    for r in range(k):
        q[idx[r]] = target[r]
        qd[idx[r]] = 0.0


@numba.njit(cache=True)
def _kinetic_energy(q, qd, L, m):
    M, _, _ = _chain_terms(q, qd, L, m, 1.0, 2.0)
    return 0.5 * qd @ (M @ qd)


# --- public operations -----------------------------------------------------


def _generalized_force(config: EnvConfig, torques: np.ndarray) -> np.ndarray:
    f = np.zeros(config.n_links + 2)
    f[3:] = torques
    return f


def dynamics_rhs(state: SwimmerState, torques, config: EnvConfig) -> SwimmerState:
    """Time derivative of the state as a SwimmerState (positions -> velocities,
    velocities -> accelerations) under explicit drag."""
    q, qd = state.q(), state.qd()
    torques = np.asarray(torques, dtype=np.float64)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd)) and np.all(np.isfinite(torques))):
        raise EnvError("non-finite dynamics input")
    if q.size != config.n_links + 2 or torques.size != config.n_links - 1:
        raise EnvError("state / torque size does not match n_links")
    qdd = _accelerations(
        q, qd, _generalized_force(config, torques),
        config.link_length, config.link_mass, config.tangential_drag, config.normal_drag,
    )
    return SwimmerState.from_q(qd, qdd, state.step_count)


def kinetic_energy(state: SwimmerState, config: EnvConfig) -> float:
    return float(_kinetic_energy(state.q(), state.qd(), config.link_length, config.link_mass))


def wrap_angle(a: float) -> float:
    """Map to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def observe(state: SwimmerState, config: EnvConfig) -> GraphObservation:
    d = state.joint_angles.size
    ei, ef = chain_edges(d, config.link_length)
    nodes = np.stack([state.joint_angles, state.joint_velocities], axis=1)
    glob = np.array([wrap_angle(state.yaw), state.yaw_rate, state.root_velocity[0], state.root_velocity[1]])
    return GraphObservation(nodes, ei, ef, glob)


def reset(config: EnvConfig, seed=None, perturb: bool = True) -> tuple[SwimmerState, GraphObservation]:
    config.validate()
    d = config.action_dim
    rng = np.random.default_rng(seed)
    noise = config.reset_noise if perturb else 0.0
    angles = rng.uniform(-noise, noise, size=d) if noise > 0 else np.zeros(d)
    state = SwimmerState(np.zeros(2), 0.0, angles, np.zeros(2), 0.0, np.zeros(d), 0)
    return state, observe(state, config)


def clamp_action(action) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64)
    if np.any(np.isnan(a)):
        raise EnvError("NaN in action")
    return np.clip(a, -1.0, 1.0)


def step(state: SwimmerState, action, config: EnvConfig) -> tuple[SwimmerState, StepResult]:
    a = clamp_action(action)
    if a.shape != (config.action_dim,):
        raise EnvError(f"action shape {a.shape} != ({config.action_dim},)")
    q, qd = state.q(), state.qd()
    x_before = q[0]
    _integrate(
        q, qd, _generalized_force(config, a * config.torque_limit),
        config.link_length, config.link_mass, config.tangential_drag, config.normal_drag,
        config.dt, config.frame_skip, JOINT_LIMIT,
    )
    x_velocity = (q[0] - x_before) / config.control_dt
    ctrl_cost = config.ctrl_cost_weight * float(a @ a)
    reward = config.forward_reward_weight * x_velocity - ctrl_cost
    new = SwimmerState.from_q(q, qd, state.step_count + 1)
    truncated = new.step_count >= config.max_episode_steps
    return new, StepResult(observe(new, config), float(reward), False, truncated, StepInfo(float(x_velocity), ctrl_cost))


def sample_dim(rng: np.random.Generator, low: int = 2, high: int = 10) -> int:
    """Uniform integer on [low, high] inclusive."""
    if low > high:
        raise EnvError(f"low {low} > high {high}")
    return int(rng.integers(low, high + 1))


def evaluation_dims(low: int = 2, high: int = 10, extra: Sequence[int] = (20,)) -> list[int]:
    return list(range(low, high + 1)) + [d for d in extra if d > high]


class SwimmerEnv:
    """Stateful wrapper around :func:`reset` / :func:`step`."""

    def __init__(self, config: EnvConfig):
        self.config = config.validate()
        self.state: SwimmerState | None = None

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    def reset(self, seed=None, perturb: bool = True) -> GraphObservation:
        self.state, obs = reset(self.config, seed, perturb)
        return obs

    def step(self, action) -> StepResult:
        if self.state is None:
            raise EnvError("step() before reset()")
        self.state, result = step(self.state, action, self.config)
        return result


def dump_trajectory_csv(path, states: Sequence[SwimmerState], actions, rewards) -> None:
    """One row per step: step, q, qd, action, reward."""
    d = states[0].joint_angles.size
    header = (
        ["step", "x", "y", "yaw"] + [f"phi_{i}" for i in range(d)]
        + ["vx", "vy", "yaw_rate"] + [f"phidot_{i}" for i in range(d)]
        + [f"action_{i}" for i in range(d)] + ["reward"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s, a, r in zip(states, actions, rewards):
            row = [s.step_count, *s.q(), *s.qd(), *np.asarray(a), r]
            w.writerow([row[0]] + [f"{v:.12g}" for v in row[1:]])


def config_dict(config: EnvConfig) -> dict:
    return asdict(config)
