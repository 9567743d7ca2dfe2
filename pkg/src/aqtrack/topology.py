"""Communication graphs: doubly stochastic weight matrices and their contraction factor.

The consensus analysis only needs two facts about the weight matrix A: it is
doubly stochastic, and the digraph of its positive off-diagonal entries is
strongly connected. Together these give kappa = ||A - (1/N) 11^T||_2 < 1, the
contraction factor that drives every convergence rate downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    NotConnectedError,
    NotDoublyStochasticError,
    ShapeError,
)

_BUILTIN_TOL = 1e-12
_LOADED_TOL = 1e-9


@dataclass(frozen=True)
class MixingMatrix:
    n_agents: int
    weights: np.ndarray
    kappa: float

    def __post_init__(self):
        self.weights.setflags(write=False)


def compute_kappa(A: np.ndarray) -> float:
    """Largest singular value of A - (1/N) 11^T."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    deflated = A - np.full((n, n), 1.0 / n)
    return float(np.linalg.svd(deflated, compute_uv=False)[0])


def _strongly_connected(A: np.ndarray) -> bool:
    # reachability from node 0 forward and on the transpose; self-loops ignored
    n = A.shape[0]
    if n == 1:
        return True
    adj = A > 0.0

    def reach(mat) -> int:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.nonzero(mat[u])[0]:
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(int(v))
            frontier = nxt
        return int(seen.sum())

    return reach(adj) == n and reach(adj.T) == n


def _validate(A: np.ndarray, tol: float) -> MixingMatrix:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"weight matrix must be square, got {A.shape}")
    n = A.shape[0]
    if (A < 0).any():
        raise NotDoublyStochasticError("negative weights")
    rows = A.sum(axis=1)
    cols = A.sum(axis=0)
    if np.abs(rows - 1.0).max() > tol or np.abs(cols - 1.0).max() > tol:
        raise NotDoublyStochasticError(
            f"row sums {rows.tolist()} / column sums {cols.tolist()} "
            f"deviate from 1 beyond {tol}"
        )
    if not _strongly_connected(A):
        raise NotConnectedError("positive-entry digraph is not strongly connected")
    kappa = compute_kappa(A)
    if kappa >= 1.0 - 1e-12:
        raise DegenerateSpectrumError(f"contraction factor {kappa} is not below 1")
    return MixingMatrix(n_agents=n, weights=A, kappa=kappa)


def build_complete(n: int) -> MixingMatrix:
    """Uniform all-to-all weights 1/n; kappa is exactly 0."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    A = np.full((n, n), 1.0 / n, dtype=np.float64)
    return _validate(A, _BUILTIN_TOL)


def build_ring(n: int, self_weight: float) -> MixingMatrix:
    """Symmetric circulant ring: self_weight on the diagonal, the rest split
    between the two ring neighbors.

    Eigenvalues are s + (1-s)cos(2*pi*j/n), so kappa is available in closed
    form; it is still computed from the matrix to keep one code path.
    """
    if n < 3:
        raise ConfigError("ring needs n >= 3")
    if not (0.0 < self_weight < 1.0):
        raise ConfigError("self_weight must lie in (0, 1)")
    side = (1.0 - self_weight) / 2.0
    A = np.zeros((n, n), dtype=np.float64)
    idx = np.arange(n)
    A[idx, idx] = self_weight
    A[idx, (idx + 1) % n] = side
    A[idx, (idx - 1) % n] = side
    return _validate(A, _BUILTIN_TOL)


def load_matrix(entries) -> MixingMatrix:
    """Validate an externally supplied weight matrix (looser 1e-9 stochasticity
    tolerance to absorb text round-trip noise)."""
    A = np.array(entries, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"weight matrix must be square, got shape {A.shape}")
    return _validate(A, _LOADED_TOL)


def load_matrix_file(path) -> MixingMatrix:
    """Parse the plain-text format: first line N, then N rows of N weights."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from None
    if not tokens:
        raise ConfigError(f"{path}: empty matrix file")
    try:
        n = int(tokens[0])
    except ValueError:
        raise ConfigError(f"{path}: first token must be the matrix size") from None
    if n < 1:
        raise ConfigError(f"{path}: matrix size must be positive, got {n}")
    vals = tokens[1:]
    if len(vals) != n * n:
        raise ConfigError(f"{path}: expected {n * n} weights, found {len(vals)}")
    try:
        A = np.array([float(v) for v in vals], dtype=np.float64).reshape(n, n)
    except ValueError:
        raise ConfigError(f"{path}: non-numeric weight entry") from None
    return load_matrix(A)
