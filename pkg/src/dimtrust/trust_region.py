"""TRPO and beta-surrogate update solvers plus the dimension scaling study."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .policy_math import DiagonalGaussian, RejectedInput, score_diag_gaussian

CG_THRESHOLD = 500


class ZeroGradient(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


@dataclass
class FisherModel:
    """SPD Fisher matrix, optionally carrying its eigendecomposition Q diag(lam) Q^T."""

    matrix: np.ndarray | None = None
    Q: np.ndarray | None = None
    Lambda: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix is None and (self.Q is None or self.Lambda is None):
            raise RejectedInput("need a matrix or a full eigendecomposition")
        if self.Lambda is not None:
            self.Lambda = np.asarray(self.Lambda, dtype=np.float64)
            self.Q = np.asarray(self.Q, dtype=np.float64)
            if np.any(self.Lambda <= 0):
                raise RejectedInput("Fisher eigenvalues must be positive")
            recon = (self.Q * self.Lambda) @ self.Q.T
            if self.matrix is None:
                self.matrix = 0.5 * (recon + recon.T)
            elif np.linalg.norm(recon - self.matrix) >= 1e-8:
                raise RejectedInput("eigendecomposition does not reproduce matrix")
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        F = self.matrix
        if F.shape[0] != F.shape[1]:
            raise RejectedInput(f"Fisher must be square, got {F.shape}")
        if not np.allclose(F, F.T, rtol=0.0, atol=1e-10):
            raise RejectedInput("Fisher must be symmetric")
        try:
            self._chol = linalg.cho_factor(F, lower=True)
        except linalg.LinAlgError as exc:
            raise RejectedInput("Fisher must be positive definite") from exc

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, g: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._chol, g)

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self.Lambda is None:
            lam, Q = np.linalg.eigh(self.matrix)
            self.Q, self.Lambda = Q, lam
        return self.Q, self.Lambda

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass
class UpdateResult:
    delta_theta: np.ndarray
    norm: float
    lagrange_scale: float


def _grad(g, n: int | None = None) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64).ravel()
    if n is not None and g.size != n:
        raise RejectedInput(f"gradient length {g.size} != Fisher size {n}")
    if not np.any(g):
        raise ZeroGradient("gradient is identically zero")
    return g


def _trpo_from_direction(g: np.ndarray, x: np.ndarray, delta: float) -> UpdateResult:
    gx = float(g @ x)
    scale = np.sqrt(2.0 * delta / gx)
    step = scale * x
    return UpdateResult(step, float(np.linalg.norm(step)), float(scale))


def trpo_update(g, fisher: FisherModel, delta: float) -> UpdateResult:
    """sqrt(2 delta / g^T F^-1 g) F^-1 g via a Cholesky solve."""
    if delta <= 0:
        raise RejectedInput("delta must be positive")
    g = _grad(g, fisher.n)
    return _trpo_from_direction(g, fisher.solve(g), delta)


def conjugate_gradient(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    max_iters: int,
    tol: float,
) -> tuple[np.ndarray, int]:
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    b_norm = float(np.sqrt(b @ b))
    if np.sqrt(rr) <= tol * b_norm:
        return x, 0
    for it in range(1, max_iters + 1):
        Ap = matvec(p)
        alpha = rr / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= tol * b_norm:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceFailure("CG did not converge", float(np.sqrt(rr) / b_norm), max_iters)


def trpo_update_cg(
    g,
    fisher_vector_product: Callable[[np.ndarray], np.ndarray],
    delta: float,
    max_iters: int = 100,
    tol: float = 1e-10,
) -> UpdateResult:
    if delta <= 0:
        raise RejectedInput("delta must be positive")
    if max_iters < 1 or tol <= 0:
        raise RejectedInput("need max_iters >= 1 and tol > 0")
    g = _grad(g)
    x, _ = conjugate_gradient(fisher_vector_product, g, max_iters, tol)
    return _trpo_from_direction(g, x, delta)


def natural_gradient_update(g, fisher: FisherModel, delta: float) -> UpdateResult:
    """TRPO step with Cholesky for small systems and CG above CG_THRESHOLD params."""
    if fisher.n > CG_THRESHOLD:
        return trpo_update_cg(g, fisher.matvec, delta, max_iters=10 * fisher.n, tol=1e-12)
    return trpo_update(g, fisher, delta)


def beta_update(g, fisher: FisherModel, beta: float) -> UpdateResult:
    """(1 / beta) F^-1 g; no trust-region rescaling."""
    if beta <= 0:
        raise RejectedInput("beta must be positive")
    g = _grad(g, fisher.n)
    step = fisher.solve(g) / beta
    return UpdateResult(step, float(np.linalg.norm(step)), 1.0 / beta)


def update_norm_eigen(alpha, lam, delta: float) -> float:
    """||dtheta|| = sqrt(2 delta (a^T L^-2 a) / (a^T L^-1 a)) in the Fisher eigenbasis."""
    alpha = _grad(alpha)
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam <= 0):
        raise RejectedInput("eigenvalues must be positive")
    a2 = alpha * alpha
    return float(np.sqrt(2.0 * delta * np.sum(a2 / lam**2) / np.sum(a2 / lam)))


def synthesize_factorized_fisher(dim: int, per_marginal_block) -> FisherModel:
    """Shared-parameter aggregation: every action dimension adds the same block,
    so F_d = d * F_1 and all eigenvalues grow linearly in d."""
    if dim < 1:
        raise RejectedInput("dim must be >= 1")
    block = np.atleast_2d(np.asarray(per_marginal_block, dtype=np.float64))
    return FisherModel(dim * block)


def monte_carlo_shared_head_fisher(
    dim: int,
    mean: float,
    log_std: float,
    samples: int,
    rng: np.random.Generator,
) -> FisherModel:
    """Empirical E[s s^T] for a d-dim Gaussian whose every marginal shares one
    (mu, log_std) pair; the score sums the per-marginal scores."""
    dist = DiagonalGaussian(np.full(dim, mean), np.full(dim, log_std))
    a = dist.mean + dist.std * rng.standard_normal((samples, dim))
    per = score_diag_gaussian(dist, a)
    s = np.stack([per[:, 0::2].sum(axis=1), per[:, 1::2].sum(axis=1)], axis=1)
    F = s.T @ s / samples
    return FisherModel(0.5 * (F + F.T))


def loglog_slope(dims: Sequence[int], values: Sequence[float]) -> float | None:
    """OLS slope of log(value) on log(dim); None when fewer than two distinct dims."""
    x = np.log(np.asarray(dims, dtype=np.float64))
    if np.unique(x).size < 2:
        return None
    y = np.log(np.asarray(values, dtype=np.float64))
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


@dataclass
class ScalingTable:
    dims: list[int]
    trpo_norm: list[float]
    beta_norm: list[float]
    trpo_slope: float | None
    beta_slope: float | None

    def rows(self):
        return list(zip(self.dims, self.trpo_norm, self.beta_norm))


def scaling_experiment(
    dims: Sequence[int],
    base_fisher: FisherModel | Callable[[int], FisherModel],
    g,
    delta: float,
    beta: float,
) -> ScalingTable:
    """Update norms versus action dimension.

    ``base_fisher`` is either F_1 (scaled to d * F_1) or a callable d -> F_d,
    e.g. a Monte-Carlo estimator.
    """
    if not dims or min(dims) < 1:
        raise RejectedInput("dims must be non-empty and >= 1")
    if callable(base_fisher):
        make = base_fisher
    else:
        make = lambda d: synthesize_factorized_fisher(d, base_fisher.matrix)  # noqa: E731
    ordered = sorted(dims)
    trpo, beta_n = [], []
    for d in ordered:
        F = make(d)
        trpo.append(natural_gradient_update(g, F, delta).norm)
        beta_n.append(beta_update(g, F, beta).norm)
    return ScalingTable(
        dims=list(ordered),
        trpo_norm=trpo,
        beta_norm=beta_n,
        trpo_slope=loglog_slope(ordered, trpo),
        beta_slope=loglog_slope(ordered, beta_n),
    )
