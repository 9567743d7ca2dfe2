"""Synchronous-round simulator for aggregative gradient tracking with
quantized or exact neighbor communication.

Every round runs five phases in a fixed causal order, with all reads taken
from the round-k snapshot:

  1. descent step on x_i using the tracked aggregate chi_i and tracker y_i;
  2. chi update: mix neighbor reconstructions, add the g_i increment, and
     correct by the agent's own quantization error chi_i - chihat_i;
  3. y update: same shape, driven by the chi-gradient increment;
  4. each agent encodes its new chi_i and y_i against its own mirrors;
  5. every receiver decodes the broadcast codes, advancing reconstructions.

Exact mode replaces phases 4-5 with direct assignment (the unquantized
baseline). Reconstruction state lives in replica tensors R[i, j] = receiver
i's view of sender j, whose diagonal doubles as the sender's own mirror, so
network-wide mirror equality is an observable invariant rather than an
assumption.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .codec import ScalingSchedule, UniformQuantizer, bits_per_scalar
from .errors import ConfigError, DivergenceError, SaturationError, ShapeError
from .problems import AggregativeProblem
from .topology import MixingMatrix

MODES = ("quantized", "exact")


@dataclass(frozen=True)
class RunConfig:
    alpha: float
    schedule: ScalingSchedule
    levels_L: int
    max_rounds: int
    x0: np.ndarray
    mode: str = "quantized"
    strict_saturation: bool = False
    stop_tol: float = 0.0
    # diagnostics knobs: nonstandard tracker init (fixed-point probes) and a
    # deliberate single-code corruption at one receiver (negative controls)
    trackers0: Optional[tuple] = None
    sabotage_round: Optional[int] = None

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ConfigError("alpha must be positive")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.stop_tol < 0:
            raise ConfigError("stop_tol must be nonnegative")
        # validates the level count (including the exact-float64 ceiling)
        UniformQuantizer(self.levels_L)


@dataclass
class Trajectory:
    """Complete record of one run; snapshot index 0 is the initial state."""

    mode: str
    rounds: int
    xs: np.ndarray  # (rounds+1, N, n)
    chis: np.ndarray  # (rounds+1, N, r)
    ys: np.ndarray  # (rounds+1, N, r)
    mirrors_chi: np.ndarray  # encoder-side reconstructions, (rounds+1, N, r)
    mirrors_y: np.ndarray
    e_chi: np.ndarray  # state minus mirror, (rounds+1, N, r)
    e_y: np.ndarray
    codes_chi: Optional[np.ndarray]  # (rounds+1, N, r) int64; None in exact mode
    codes_y: Optional[np.ndarray]
    mirror_ok: np.ndarray  # (rounds+1,) bool, replica == mirror network-wide
    bits_cum: np.ndarray  # (rounds+1,) int64
    bits_zero_free_cum: np.ndarray
    sat_cum: np.ndarray
    alpha: float
    levels_L: int
    schedule: ScalingSchedule
    wall_time: float = 0.0

    @property
    def n_agents(self) -> int:
        return self.xs.shape[1]

    def x_flat(self, k: int) -> np.ndarray:
        return self.xs[k].ravel()


@dataclass
class EngineState:
    problem: AggregativeProblem
    mixing: MixingMatrix
    cfg: RunConfig
    k: int = 0
    X: np.ndarray = None
    C: np.ndarray = None
    Y: np.ndarray = None
    Rc: np.ndarray = None  # (N, N, r) chi replicas
    Ry: np.ndarray = None
    sat: int = 0
    bits: int = 0
    bits_zero_free: int = 0
    _snaps: list = field(default_factory=list)


def _encode_streams(state: EngineState, k: int):
    """Phases 4-5 for round k: quantize both tracker streams against the
    encoder mirrors and apply the codes at every receiver."""
    cfg = state.cfg
    N = state.problem.n_agents
    r = state.problem.dim_agg
    L = cfg.levels_L
    l = cfg.schedule.at(k)
    diag = (np.arange(N), np.arange(N))
    out = []
    for V, R in ((state.C, state.Rc), (state.Y, state.Ry)):
        scaled = ((V - R[diag]) / l).ravel()
        codes = np.empty(N * r, dtype=np.int64)
        nsat = _kernels.quantize_block(scaled, L, codes)
        if nsat and cfg.strict_saturation:
            raise SaturationError(k, nsat)
        state.sat += nsat
        codes = codes.reshape(N, r)
        _kernels.apply_codes(R, codes, l)
        per = bits_per_scalar(L)
        state.bits += N * r * per
        state.bits_zero_free += int(np.count_nonzero(codes)) * per
        out.append(codes)
    if cfg.sabotage_round is not None and k == cfg.sabotage_round:
        if N < 2:
            raise ConfigError("code corruption needs at least two agents")
        # receiver 0 mis-decodes one coordinate of sender N-1's chi code by +1
        state.Rc[0, N - 1, 0] += l
    return out[0], out[1]


def _snapshot(state: EngineState, chi_codes, y_codes):
    N = state.problem.n_agents
    diag = (np.arange(N), np.arange(N))
    mc = state.Rc[diag].copy()
    my = state.Ry[diag].copy()
    # replica equality across receivers, checked bit-exactly
    ok = bool((state.Rc == mc[None]).all() and (state.Ry == my[None]).all())
    state._snaps.append(
        (
            state.X.copy(),
            state.C.copy(),
            state.Y.copy(),
            mc,
            my,
            chi_codes,
            y_codes,
            ok,
            state.bits,
            state.bits_zero_free,
            state.sat,
        )
    )


def init_run(p: AggregativeProblem, A: MixingMatrix, cfg: RunConfig) -> EngineState:
    """Set the round-0 state and run the initial code exchange."""
    if A.n_agents != p.n_agents:
        raise ShapeError(
            f"graph has {A.n_agents} agents but problem has {p.n_agents}"
        )
    N, n, r = p.n_agents, p.dim_x, p.dim_agg
    x0 = np.asarray(cfg.x0, dtype=np.float64)
    if x0.shape != (N * n,):
        raise ShapeError(f"x0 must have shape ({N * n},), got {x0.shape}")
    if not np.isfinite(x0).all():
        raise ConfigError("x0 must be finite")

    state = EngineState(problem=p, mixing=A, cfg=cfg)
    state.X = x0.reshape(N, n).copy()
    if cfg.trackers0 is not None:
        C0, Y0 = cfg.trackers0
        state.C = np.array(C0, dtype=np.float64).reshape(N, r).copy()
        state.Y = np.array(Y0, dtype=np.float64).reshape(N, r).copy()
    else:
        state.C = p.g_all(state.X).astype(np.float64)
        state.Y = p.grad_chi_all(state.X, state.C).astype(np.float64)
    state.Rc = np.zeros((N, N, r), dtype=np.float64)
    state.Ry = np.zeros((N, N, r), dtype=np.float64)

    if cfg.mode == "exact":
        state.Rc[:] = state.C[None]
        state.Ry[:] = state.Y[None]
        _snapshot(state, None, None)
    else:
        chi_codes, y_codes = _encode_streams(state, 0)
        _snapshot(state, chi_codes, y_codes)
    return state


def step(state: EngineState) -> EngineState:
    """Advance one synchronous round; round index moves k -> k+1."""
    p, cfg = state.problem, state.cfg
    A = state.mixing.weights
    N, r = p.n_agents, p.dim_agg
    k = state.k
    diag = (np.arange(N), np.arange(N))
    X, C, Y = state.X, state.C, state.Y

    # phase 1: descent using tracked quantities only
    XN = X - cfg.alpha * (p.grad_x_all(X, C) + p.jac_vec_all(X, Y))

    # phase 2: chi tracker over reconstructions, with own-error correction
    mixC = np.empty((N, r), dtype=np.float64)
    _kernels.mix_replicas(A, state.Rc, mixC)
    CN = mixC + p.g_all(XN) - p.g_all(X) + C - state.Rc[diag]

    # phase 3: gradient tracker, same structure
    mixY = np.empty((N, r), dtype=np.float64)
    _kernels.mix_replicas(A, state.Ry, mixY)
    YN = mixY + p.grad_chi_all(XN, CN) - p.grad_chi_all(X, C) + Y - state.Ry[diag]

    if not (np.isfinite(XN).all() and np.isfinite(CN).all() and np.isfinite(YN).all()):
        raise DivergenceError(k + 1, trajectory=finalize(state))

    state.X, state.C, state.Y = XN, CN, YN
    state.k = k + 1

    # phases 4-5
    if cfg.mode == "exact":
        state.Rc[:] = CN[None]
        state.Ry[:] = YN[None]
        _snapshot(state, None, None)
    else:
        chi_codes, y_codes = _encode_streams(state, k + 1)
        _snapshot(state, chi_codes, y_codes)
    return state


def finalize(state: EngineState, wall_time: float = 0.0) -> Trajectory:
    snaps = state._snaps
    K = len(snaps) - 1
    quant = state.cfg.mode == "quantized"
    return Trajectory(
        mode=state.cfg.mode,
        rounds=K,
        xs=np.stack([s[0] for s in snaps]),
        chis=np.stack([s[1] for s in snaps]),
        ys=np.stack([s[2] for s in snaps]),
        mirrors_chi=np.stack([s[3] for s in snaps]),
        mirrors_y=np.stack([s[4] for s in snaps]),
        e_chi=np.stack([s[1] - s[3] for s in snaps]),
        e_y=np.stack([s[2] - s[4] for s in snaps]),
        codes_chi=np.stack([s[5] for s in snaps]) if quant else None,
        codes_y=np.stack([s[6] for s in snaps]) if quant else None,
        mirror_ok=np.array([s[7] for s in snaps], dtype=bool),
        bits_cum=np.array([s[8] for s in snaps], dtype=np.int64),
        bits_zero_free_cum=np.array([s[9] for s in snaps], dtype=np.int64),
        sat_cum=np.array([s[10] for s in snaps], dtype=np.int64),
        alpha=state.cfg.alpha,
        levels_L=state.cfg.levels_L,
        schedule=state.cfg.schedule,
        wall_time=wall_time,
    )


def run(p: AggregativeProblem, A: MixingMatrix, cfg: RunConfig) -> Trajectory:
    """Execute up to max_rounds rounds (early stop only if stop_tol > 0)."""
    t0 = time.perf_counter()
    state = init_run(p, A, cfg)
    early = cfg.stop_tol > 0.0
    for _ in range(cfg.max_rounds):
        x_prev = state.X.copy() if early else None
        step(state)
        if early and float(np.abs(state.X - x_prev).max()) < cfg.stop_tol:
            break
    return finalize(state, wall_time=time.perf_counter() - t0)


def write_trajectory_csv(path, traj: Trajectory, x_star=None) -> None:
    """Plain-text export, one row per round. Floats carry 17 significant
    digits so the file round-trips bit-exactly."""
    K1, N, n = traj.xs.shape
    r = traj.chis.shape[2]
    if x_star is not None:
        Xs = np.asarray(x_star, dtype=np.float64).reshape(N, n)
        res = np.linalg.norm(
            (traj.xs - Xs[None]).reshape(K1, N * n), axis=1
        )
    else:
        res = None
    cols = ["round"]
    for i in range(N):
        cols += [f"x{i + 1}_{d + 1}" for d in range(n)]
        cols += [f"chi{i + 1}_{d + 1}" for d in range(r)]
        cols += [f"y{i + 1}_{d + 1}" for d in range(r)]
    cols += ["residual_x", "bits_cum", "saturations_cum"]

    def fmt(v: float) -> str:
        return format(float(v), ".17g")

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(K1):
            row = [str(k)]
            for i in range(N):
                row += [fmt(v) for v in traj.xs[k, i]]
                row += [fmt(v) for v in traj.chis[k, i]]
                row += [fmt(v) for v in traj.ys[k, i]]
            row.append(fmt(res[k]) if res is not None else "")
            row.append(str(int(traj.bits_cum[k])))
            row.append(str(int(traj.sat_cum[k])))
            fh.write(",".join(row) + "\n")
