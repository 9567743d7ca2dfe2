"""Aggregative optimization problems and the centralized reference oracle.

A problem couples N agents through the average of per-agent aggregation maps,
chi(x) = (1/N) sum_i g_i(x_i). Each agent owns a cost f_i(x_i, chi) and the
global objective is sum_i f_i(x_i, chi(x)). Built-in families are quadratic,
so regularity constants (mu, l1, l2, l3) come from assembled Hessians and the
optimizer from a direct linear solve, cross-checkable by gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NoConvergenceError, ShapeError


@dataclass(frozen=True)
class AggregativeProblem:
    """Per-agent evaluators plus the regularity constants the tuner consumes.

    Evaluator signatures take the agent index first: f(i, x_i, chi) -> float,
    grad_x_f(i, x_i, chi) -> (dim_x,), grad_chi_f(i, x_i, chi) -> (dim_agg,),
    g(i, x_i) -> (dim_agg,), jac_g(i, x_i) -> (dim_x, dim_agg). jac_g is the
    transpose of the analytic Jacobian of g_i, so the exact gradient of the
    coupled objective at agent i is grad_x_f + jac_g @ (average of grad_chi_f).

    Batched closures (operating on (N, dim) stacks) are optional fast paths;
    when absent the per-agent evaluators are looped. Constants must satisfy
    mu > 0 strong convexity of the global objective (mu = 0 tolerated only
    for instances never fed to the tuner), l1-Lipschitz gradients, l2-Lipschitz
    chi-gradients, and ||jac_g_i|| <= l3 / n_agents.
    """

    n_agents: int
    dim_x: int
    dim_agg: int
    f: Callable
    grad_x_f: Callable
    grad_chi_f: Callable
    g: Callable
    jac_g: Callable
    mu: float
    l1: float
    l2: float
    l3: float
    kind: str = "custom"
    batch_g: Optional[Callable] = None
    batch_grad_x: Optional[Callable] = None
    batch_grad_chi: Optional[Callable] = None
    batch_jac_vec: Optional[Callable] = None
    # (Hessian, rhs) of the global stationarity system for quadratic families
    stationarity: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_agents < 1 or self.dim_x < 1 or self.dim_agg < 1:
            raise ConfigError("dimensions must be positive")
        for name in ("mu", "l1", "l2", "l3"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"constant {name} must be finite and nonnegative")
        if self.l1 <= 0 or self.l3 <= 0:
            raise ConfigError("l1 and l3 must be positive")

    # --- batched evaluation (engine-facing) ---

    def g_all(self, X: np.ndarray) -> np.ndarray:
        if self.batch_g is not None:
            return self.batch_g(X)
        return np.stack([self.g(i, X[i]) for i in range(self.n_agents)])

    def grad_x_all(self, X: np.ndarray, C: np.ndarray) -> np.ndarray:
        if self.batch_grad_x is not None:
            return self.batch_grad_x(X, C)
        return np.stack([self.grad_x_f(i, X[i], C[i]) for i in range(self.n_agents)])

    def grad_chi_all(self, X: np.ndarray, C: np.ndarray) -> np.ndarray:
        if self.batch_grad_chi is not None:
            return self.batch_grad_chi(X, C)
        return np.stack([self.grad_chi_f(i, X[i], C[i]) for i in range(self.n_agents)])

    def jac_vec_all(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Per-agent products jac_g_i(x_i) @ y_i, stacked to (N, dim_x)."""
        if self.batch_jac_vec is not None:
            return self.batch_jac_vec(X, Y)
        return np.stack([self.jac_g(i, X[i]) @ Y[i] for i in range(self.n_agents)])


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    chi_star: np.ndarray
    y_star: np.ndarray
    f_star: float
    grad_norm: float


def _as_stack(p: AggregativeProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n_agents * p.dim_x,):
        raise ShapeError(
            f"expected flat vector of length {p.n_agents * p.dim_x}, got {x.shape}"
        )
    return x.reshape(p.n_agents, p.dim_x)


def aggregate(p: AggregativeProblem, X: np.ndarray) -> np.ndarray:
    """chi(x) = (1/N) sum_i g_i(x_i) from stacked rows X of shape (N, dim_x)."""
    return p.g_all(X).mean(axis=0)


def eval_global(p: AggregativeProblem, x) -> float:
    """Global objective sum_i f_i(x_i, chi(x)) at a flat iterate."""
    X = _as_stack(p, x)
    chi = aggregate(p, X)
    return float(sum(p.f(i, X[i], chi) for i in range(p.n_agents)))


def eval_aggregated_gradient(p: AggregativeProblem, x) -> np.ndarray:
    """Exact gradient of the coupled objective, stacked flat.

    Component i is grad_x_f_i(x_i, chi) + jac_g_i(x_i) @ ybar where ybar is
    the average of the chi-gradients, since chi enters every f_j through the
    shared average.
    """
    X = _as_stack(p, x)
    chi = aggregate(p, X)
    C = np.broadcast_to(chi, (p.n_agents, p.dim_agg))
    ybar = p.grad_chi_all(X, C).mean(axis=0)
    G = p.grad_x_all(X, C) + p.jac_vec_all(X, np.broadcast_to(ybar, C.shape))
    return G.ravel()


# --- built-in families ---


def make_placement(targets, gammas) -> AggregativeProblem:
    """Protective-placement costs: f_i = gamma_i ||x_i - r_i||^2 + ||x_i - chi||^2
    with aggregate chi(x) = (1/sqrt(N)) sum_i x_i, i.e. g_i(x_i) = sqrt(N) x_i.

    Intended for planar targets in the nonnegative quadrant. The family is
    quadratic, so the stationarity system is assembled exactly.
    """
    R = np.asarray(targets, dtype=np.float64)
    if R.ndim != 2 or R.shape[1] != 2:
        raise ShapeError(f"targets must be N x 2, got {R.shape}")
    gam = np.asarray(gammas, dtype=np.float64)
    N = R.shape[0]
    if gam.shape != (N,):
        raise ShapeError(f"need {N} gamma values, got shape {gam.shape}")
    if (gam <= 0).any():
        raise ConfigError("all gamma weights must be positive")
    if (R < 0).any():
        raise ConfigError("targets must lie in the nonnegative quadrant")
    n = r = 2
    rootN = float(np.sqrt(N))

    # global Hessian: 2 diag(gamma_i) (x) I2 + 2 M^T M, M = I - (1/sqrt(N)) 11^T (x) I2
    M = np.eye(N * n) - np.kron(np.full((N, N), 1.0 / rootN), np.eye(n))
    Hess = 2.0 * np.kron(np.diag(gam), np.eye(n)) + 2.0 * M.T @ M
    rhs = 2.0 * (gam[:, None] * R).ravel()
    ev = np.linalg.eigvalsh(Hess)
    mu = float(ev[0])
    l2 = 2.0 * np.sqrt(2.0)
    l3 = float(N) ** 1.5
    # chi-sensitivity of grad_x_f is 2, folded into the smoothness constant
    l1 = float(max(ev[-1], 2.0 + l2 * l3 / N))

    def f(i, xi, chi):
        return float(gam[i] * np.sum((xi - R[i]) ** 2) + np.sum((xi - chi) ** 2))

    def grad_x_f(i, xi, chi):
        return 2.0 * gam[i] * (xi - R[i]) + 2.0 * (xi - chi)

    def grad_chi_f(i, xi, chi):
        return 2.0 * (chi - xi)

    def g(i, xi):
        return rootN * xi

    def jac_g(i, xi):
        return rootN * np.eye(2)

    return AggregativeProblem(
        n_agents=N,
        dim_x=n,
        dim_agg=r,
        f=f,
        grad_x_f=grad_x_f,
        grad_chi_f=grad_chi_f,
        g=g,
        jac_g=jac_g,
        mu=mu,
        l1=l1,
        l2=l2,
        l3=l3,
        kind="placement",
        batch_g=lambda X: rootN * X,
        batch_grad_x=lambda X, C: 2.0 * gam[:, None] * (X - R) + 2.0 * (X - C),
        batch_grad_chi=lambda X, C: 2.0 * (C - X),
        batch_jac_vec=lambda X, Y: rootN * Y,
        stationarity=(Hess, rhs),
        params={"targets": R, "gammas": gam},
    )


def make_bandwidth_sharing(n: int, reg: float = 0.0) -> AggregativeProblem:
    """Cooperative bandwidth split among n agents, minimization form:
    f_i(x_i, chi) = -x_i (1 - n chi) + reg x_i^2 with g_i(x_i) = x_i.

    The unregularized objective -S + S^2 (S the total allocation) has a rank
    one Hessian; reg > 0 restores strong convexity for convergence studies.
    """
    if n < 1:
        raise ConfigError("need at least one agent")
    if reg < 0:
        raise ConfigError("reg must be nonnegative")
    N = n
    Nf = float(N)
    regf = float(reg)

    Hess = 2.0 * regf * np.eye(N) + 2.0 * np.ones((N, N))
    rhs = np.ones(N)
    mu = 2.0 * regf
    l2 = Nf
    l3 = Nf
    l1 = 2.0 * regf + 2.0 * Nf

    def f(i, xi, chi):
        return float(-xi[0] * (1.0 - Nf * chi[0]) + regf * xi[0] ** 2)

    def grad_x_f(i, xi, chi):
        return np.array([Nf * chi[0] - 1.0 + 2.0 * regf * xi[0]])

    def grad_chi_f(i, xi, chi):
        return np.array([Nf * xi[0]])

    def g(i, xi):
        return xi.copy()

    def jac_g(i, xi):
        return np.eye(1)

    return AggregativeProblem(
        n_agents=N,
        dim_x=1,
        dim_agg=1,
        f=f,
        grad_x_f=grad_x_f,
        grad_chi_f=grad_chi_f,
        g=g,
        jac_g=jac_g,
        mu=mu,
        l1=l1,
        l2=l2,
        l3=l3,
        kind="bandwidth",
        batch_g=lambda X: X.copy(),
        batch_grad_x=lambda X, C: Nf * C - 1.0 + 2.0 * regf * X,
        batch_grad_chi=lambda X, C: Nf * X,
        batch_jac_vec=lambda X, Y: Y.copy(),
        stationarity=(Hess, rhs),
        params={"reg": regf},
    )


def make_quadratic_synthetic(
    n_agents: int, dim_x: int, dim_agg: int, seed: int
) -> AggregativeProblem:
    """Randomized family satisfying every regularity assumption by construction.

    f_i(x_i, chi) = 1/2 x_i' P_i x_i + b_i' x_i + c_i/2 ||chi - d_i||^2 with
    g_i(x_i) = G_i x_i / N. P_i has eigenvalues in [0.5, 1.5] on a random
    orthogonal frame; ||G_i|| in [0.5, 1]; c_i in [2, 4]; b_i, d_i uniform on
    [-1, 1]. Draws are seed-deterministic and the order is fixed, so a seed
    names one concrete instance forever.
    """
    if n_agents < 1 or dim_x < 1 or dim_agg < 1:
        raise ConfigError("dimensions must be positive")
    N, n, r = n_agents, dim_x, dim_agg
    rng = np.random.default_rng(seed)
    Ps, bs, Gs, cs, ds = [], [], [], [], []
    for _ in range(N):
        Qm, _unused = np.linalg.qr(rng.normal(size=(n, n)))
        ev = rng.uniform(0.5, 1.5, n)
        Ps.append(Qm @ np.diag(ev) @ Qm.T)
        bs.append(rng.uniform(-1, 1, n))
        raw = rng.normal(size=(r, n))
        s = rng.uniform(0.5, 1.0)
        Gs.append(raw / np.linalg.norm(raw, 2) * s)
        cs.append(rng.uniform(2.0, 4.0))
        ds.append(rng.uniform(-1, 1, r))
    Ps = np.array(Ps)
    bs = np.array(bs)
    Gs = np.array(Gs)
    cs = np.array(cs)
    ds = np.array(ds)

    Pblk = np.zeros((N * n, N * n))
    for i in range(N):
        Pblk[i * n : (i + 1) * n, i * n : (i + 1) * n] = Ps[i]
    W = np.hstack(list(Gs)) / N**2  # r x Nn map from stacked x to chi
    Hess = Pblk + cs.sum() * (W.T @ W)
    rhs = -np.concatenate(bs) + W.T @ (cs[:, None] * ds).sum(axis=0)
    ev = np.linalg.eigvalsh(Hess)
    l2 = float(cs.max())
    l3 = float(max(np.linalg.norm(Gs[i], 2) for i in range(N)))
    mu = float(ev[0])
    l1 = float(max(ev[-1], l2 * l3 / N))

    def f(i, xi, chi):
        return float(
            0.5 * xi @ Ps[i] @ xi + bs[i] @ xi + 0.5 * cs[i] * np.sum((chi - ds[i]) ** 2)
        )

    def grad_x_f(i, xi, chi):
        return Ps[i] @ xi + bs[i]

    def grad_chi_f(i, xi, chi):
        return cs[i] * (chi - ds[i])

    def g(i, xi):
        return Gs[i] @ xi / N

    def jac_g(i, xi):
        return Gs[i].T / N

    return AggregativeProblem(
        n_agents=N,
        dim_x=n,
        dim_agg=r,
        f=f,
        grad_x_f=grad_x_f,
        grad_chi_f=grad_chi_f,
        g=g,
        jac_g=jac_g,
        mu=mu,
        l1=l1,
        l2=l2,
        l3=l3,
        kind="quadratic",
        batch_g=lambda X: np.einsum("irn,in->ir", Gs, X) / N,
        batch_grad_x=lambda X, C: np.einsum("inm,im->in", Ps, X) + bs,
        batch_grad_chi=lambda X, C: cs[:, None] * (C - ds),
        batch_jac_vec=lambda X, Y: np.einsum("irn,ir->in", Gs, Y) / N,
        stationarity=(Hess, rhs),
        params={"P": Ps, "b": bs, "G": Gs, "c": cs, "d": ds, "seed": seed},
    )


# --- reference oracle ---


def _assemble(p: AggregativeProblem, x_star: np.ndarray) -> ReferenceSolution:
    X = x_star.reshape(p.n_agents, p.dim_x)
    chi = aggregate(p, X)
    C = np.broadcast_to(chi, (p.n_agents, p.dim_agg))
    y_star = p.grad_chi_all(X, C).mean(axis=0)
    grad = eval_aggregated_gradient(p, x_star)
    return ReferenceSolution(
        x_star=x_star,
        chi_star=chi,
        y_star=y_star,
        f_star=eval_global(p, x_star),
        grad_norm=float(np.linalg.norm(grad)),
    )


def solve_reference(
    p: AggregativeProblem,
    tol: float = 1e-10,
    max_iter: int = 2_000_000,
    method: str = "auto",
) -> ReferenceSolution:
    """Centralized optimizer: direct stationarity solve when the problem carries
    a quadratic system, gradient descent with step 1/l1 otherwise.

    method: "auto" prefers the direct path; "direct" requires it; "gd" forces
    the iterative path (useful to cross-check the linear solve).
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if method not in ("auto", "direct", "gd"):
        raise ConfigError(f"unknown method {method!r}")

    if method in ("auto", "direct") and p.stationarity is not None:
        Hess, rhs = p.stationarity
        if p.mu > 0:
            x_star = np.linalg.solve(Hess, rhs)
        else:
            # singular limit: minimum-norm stationary point
            x_star, *_ = np.linalg.lstsq(Hess, rhs, rcond=None)
        return _assemble(p, x_star)
    if method == "direct":
        raise ConfigError("problem has no direct stationarity system")

    x = np.zeros(p.n_agents * p.dim_x)
    step = 1.0 / p.l1
    for _ in range(max_iter):
        grad = eval_aggregated_gradient(p, x)
        gn = float(np.linalg.norm(grad))
        if gn <= tol:
            return _assemble(p, x)
        x = x - step * grad
    grad = eval_aggregated_gradient(p, x)
    gn = float(np.linalg.norm(grad))
    if gn <= tol:
        return _assemble(p, x)
    raise NoConvergenceError(last_iterate=x, grad_norm=gn)


def operating_box(sol: ReferenceSolution, x0) -> tuple:
    """Coordinate box for validating the local constants: hypercube centered at
    the optimizer with radius 2 (||x0 - x*||_inf + 1)."""
    x0 = np.asarray(x0, dtype=np.float64)
    rad = 2.0 * (np.abs(x0 - sol.x_star).max() + 1.0)
    return sol.x_star - rad, sol.x_star + rad
