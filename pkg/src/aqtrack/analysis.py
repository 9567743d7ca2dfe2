"""Closed-form parameter tuning and empirical convergence certificates.

The tuning side turns problem constants (mu, l1, l2, l3) and the graph's
contraction factor kappa into a concrete parameter set: a stepsize bound, the
3x3 comparison matrix H(alpha) whose spectral radius rho < 1 certifies linear
convergence, a scaling rate gamma in (rho, 1), and the minimum quantization
level count L_min for which the finite-level quantizer provably never
saturates. The diagnostics side replays recorded trajectories against the
per-round contraction inequality, the matrix power-decay bound, and the
encoder/decoder mirror contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .codec import ChannelCodec, ScalingSchedule, UniformQuantizer, bits_per_scalar
from .engine import Trajectory
from .errors import ConfigError, InfeasibleEpsilonError, UntunableError
from .problems import AggregativeProblem, ReferenceSolution, eval_global, solve_reference
from .topology import MixingMatrix


@dataclass(frozen=True)
class TuningReport:
    alpha_max: float
    alpha: float
    H: np.ndarray
    rho_H: float
    epsilon: float
    gamma: float
    c3: float
    zeta: float
    C0: float
    C1: float
    c0: float
    c1: float
    c2: float
    L_min: int
    bandwidth_bits: int
    # inputs echoed for reproducibility
    mu: float
    l1: float
    l2: float
    l3: float
    kappa: float
    l0: float
    margin: float
    n_agents: int
    dim_x: int
    dim_agg: int


def alpha_upper_bound(mu, l1, l2, l3, kappa) -> float:
    """Largest stepsize the convergence certificate covers."""
    if not (mu > 0 and l1 > 0 and l3 > 0):
        raise ConfigError("mu, l1, l3 must be positive")
    if l2 < 0:
        raise ConfigError("l2 must be nonnegative")
    if not (0 <= kappa < 1):
        raise ConfigError(f"kappa must lie in [0, 1), got {kappa}")
    return (
        mu
        * (1 - kappa) ** 2
        / (l3 * (mu + l1 + l2 * l3) * ((1 - kappa) * (l1 + l2 + l2 * l3) + 2 * l2 * l3))
    )


def build_H(alpha, mu, l1, l2, l3, kappa) -> np.ndarray:
    """Comparison matrix coupling the three error signals (optimality gap,
    aggregate-tracker consensus error, gradient-tracker consensus error)."""
    if alpha < 0:
        raise ConfigError("alpha must be nonnegative")
    if not (0 <= kappa < 1):
        raise ConfigError(f"kappa must lie in [0, 1), got {kappa}")
    al = float(alpha)
    return np.array(
        [
            [1 - mu * al, al * l1, al * l3],
            [al * l1 * l3 * (1 + l3), kappa + al * l1 * l3, al * l3**2],
            [
                al * l1 * l2 * (1 + l3) ** 2,
                al * l1 * l2 * (1 + l3) + 2 * l2,
                kappa + al * l2 * l3 * (1 + l3),
            ],
        ]
    )


def spectral_radius(H) -> float:
    """Largest eigenvalue modulus of a 3x3 matrix via its characteristic
    cubic, solved in closed form (trigonometric for three real roots,
    Cardano for one real plus a conjugate pair)."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (3, 3):
        raise ConfigError(f"expected a 3x3 matrix, got {H.shape}")
    if not np.isfinite(H).all():
        raise ConfigError("matrix entries must be finite")
    t = H[0, 0] + H[1, 1] + H[2, 2]
    m = (
        H[0, 0] * H[1, 1]
        - H[0, 1] * H[1, 0]
        + H[0, 0] * H[2, 2]
        - H[0, 2] * H[2, 0]
        + H[1, 1] * H[2, 2]
        - H[1, 2] * H[2, 1]
    )
    d = float(np.linalg.det(H))
    # lambda^3 + p lambda^2 + q lambda + r
    p, q, r = -t, m, -d
    p3 = p / 3.0
    a = q - p * p / 3.0
    b = 2.0 * p**3 / 27.0 - p * q / 3.0 + r
    D = (b / 2.0) ** 2 + (a / 3.0) ** 3
    if D > 0.0:
        sq = math.sqrt(D)
        u1 = np.cbrt(-b / 2.0 + sq) + np.cbrt(-b / 2.0 - sq)
        c = max(u1 * u1 + a, 0.0)  # squared modulus of the conjugate pair
        pair = math.sqrt((u1 / 2.0 + p3) ** 2 + max(c - u1 * u1 / 4.0, 0.0))
        return max(abs(u1 - p3), pair)
    s2 = -a / 3.0
    if s2 <= 0.0:
        # a = b = 0 within rounding: triple root at the depressed origin
        return abs(p3)
    s = math.sqrt(s2)
    arg = min(1.0, max(-1.0, 3.0 * b / (2.0 * a * s)))
    theta = math.acos(arg)
    rho = 0.0
    for kk in range(3):
        u = 2.0 * s * math.cos((theta - 2.0 * math.pi * kk) / 3.0)
        rho = max(rho, abs(u - p3))
    return rho


def power_iteration_radius(H, max_iter: int = 100_000, tol: float = 1e-13) -> float:
    """Growth-rate estimate of the spectral radius; reliable for matrices with
    a dominant real eigenvalue (the comparison matrices here are nonnegative,
    so this serves as an independent cross-check of spectral_radius)."""
    H = np.asarray(H, dtype=np.float64)
    v = np.ones(H.shape[0]) / math.sqrt(H.shape[0])
    est = 0.0
    for _ in range(max_iter):
        w = H @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        prev, est = est, nw
        v = w / nw
        if abs(est - prev) <= tol * max(1.0, est):
            return est
    return est


def choose_gamma(rho_H: float, margin: float = 0.5) -> float:
    """Scaling rate between the certified contraction radius and 1."""
    if not (0 < margin < 1):
        raise ConfigError("margin must lie in (0, 1)")
    if rho_H >= 1.0:
        raise UntunableError(rho_H)
    if rho_H < 0:
        raise ConfigError("rho_H must be nonnegative")
    return rho_H + margin * (1.0 - rho_H)


def level_bound(l0, gamma, zeta, C0, C1, c1, c2) -> int:
    """Smallest level count L with 2L+1 >= 2 max{(zeta C0 + 3 C1)/(l0 gamma),
    sqrt(4 c1^2 + 4 c2^2)/l0} + 1."""
    if not (l0 > 0 and 0 < gamma < 1):
        raise ConfigError("need l0 > 0 and gamma in (0, 1)")
    if min(zeta, C0, C1) <= 0 or min(c1, c2) < 0:
        raise ConfigError("constants must be positive (c1, c2 nonnegative)")
    need = max(
        (zeta * C0 + 3.0 * C1) / (l0 * gamma),
        math.sqrt(4.0 * c1**2 + 4.0 * c2**2) / l0,
    )
    return max(1, int(math.ceil(need)))


def bandwidth_bits(L: int) -> int:
    return bits_per_scalar(L)


def make_tuning_report(
    problem: AggregativeProblem,
    mixing: MixingMatrix,
    x0,
    l0: float,
    alpha: Optional[float] = None,
    gamma: Optional[float] = None,
    margin: float = 0.5,
    epsilon: Optional[float] = None,
    solution: Optional[ReferenceSolution] = None,
    constants: Optional[tuple] = None,
) -> TuningReport:
    """Full tuning pipeline. None means auto: alpha = 0.9 of its upper bound,
    gamma from choose_gamma, epsilon at the midpoint of its feasible interval.

    constants optionally overrides (mu, l1, l2, l3); initial-state bounds c0,
    c1, c2 are measured from x0 and the oracle solution rather than asked of
    the caller.
    """
    if constants is not None:
        mu, l1, l2, l3 = (float(v) for v in constants)
    else:
        mu, l1, l2, l3 = problem.mu, problem.l1, problem.l2, problem.l3
    kappa = mixing.kappa
    if not (l0 > 0):
        raise ConfigError("l0 must be positive")

    alpha_max = alpha_upper_bound(mu, l1, l2, l3, kappa)
    al = 0.9 * alpha_max if alpha is None else float(alpha)
    if not (al > 0):
        raise ConfigError("alpha must be positive")
    if al >= alpha_max:
        raise UntunableError(
            float("nan"),
            message=f"stepsize {al} is not below the certified bound {alpha_max}",
        )
    H = build_H(al, mu, l1, l2, l3, kappa)
    rho = spectral_radius(H)
    if rho >= 1.0:
        raise UntunableError(rho)
    gam = choose_gamma(rho, margin) if gamma is None else float(gamma)
    if not (rho < gam < 1.0):
        raise UntunableError(
            rho, message=f"gamma {gam} must lie in ({rho}, 1) for this stepsize"
        )
    nH = float(np.linalg.norm(H, 2))
    eps = min(gam - rho, 2.0 * nH) / 2.0 if epsilon is None else float(epsilon)
    if not (0 < eps < min(gam - rho, 2.0 * nH)):
        raise InfeasibleEpsilonError(
            f"epsilon {eps} outside (0, {min(gam - rho, 2.0 * nH)})"
        )
    c3 = 3.0 * math.sqrt(3.0) * max(4.0 * nH**2 / eps**2, eps**2 / (4.0 * nH**2))
    zeta = max(
        al * l1 * l2 * (1 + l3) + al * l1 * l3 * (1 + l3),
        l2 + al * l1 * l2 + al * l1 * l3 + 2,
        al * l3 * l2 + al * l3**2 + 2,
    )

    sol = solution if solution is not None else solve_reference(problem)
    N, n, r = problem.n_agents, problem.dim_x, problem.dim_agg
    x0 = np.asarray(x0, dtype=np.float64)
    X0 = x0.reshape(N, n)
    chi0 = problem.g_all(X0)
    y0 = problem.grad_chi_all(X0, chi0)
    c0 = float(np.abs(x0 - sol.x_star).max())
    c1 = float(np.abs(chi0).max())
    c2 = float(np.abs(y0).max())

    C1 = 2.0 * (l2 + 1.0) * math.sqrt(N * r) * l0
    if gam - rho - eps <= 0:
        raise InfeasibleEpsilonError(
            f"gamma - rho - epsilon = {gam - rho - eps} must be positive"
        )
    C0 = c3 * math.sqrt(N * n * c0**2 + 4.0 * N * r * (c1**2 + c2**2)) + c3 * C1 / (
        gam - rho - eps
    )
    L_min = level_bound(l0, gam, zeta, C0, C1, c1, c2)
    return TuningReport(
        alpha_max=alpha_max,
        alpha=al,
        H=H,
        rho_H=rho,
        epsilon=eps,
        gamma=gam,
        c3=c3,
        zeta=zeta,
        C0=C0,
        C1=C1,
        c0=c0,
        c1=c1,
        c2=c2,
        L_min=L_min,
        bandwidth_bits=bits_per_scalar(L_min),
        mu=mu,
        l1=l1,
        l2=l2,
        l3=l3,
        kappa=kappa,
        l0=float(l0),
        margin=margin,
        n_agents=N,
        dim_x=n,
        dim_agg=r,
    )


def format_tuning_report(rep: TuningReport) -> str:
    """Flat name = value block, floats at 17 significant digits."""

    def fmt(v):
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return format(float(v), ".17g")

    lines = []
    for name in (
        "n_agents",
        "dim_x",
        "dim_agg",
        "mu",
        "l1",
        "l2",
        "l3",
        "kappa",
        "l0",
        "margin",
        "alpha_max",
        "alpha",
        "rho_H",
        "gamma",
        "epsilon",
        "c3",
        "zeta",
        "c0",
        "c1",
        "c2",
        "C0",
        "C1",
        "L_min",
        "bandwidth_bits",
    ):
        lines.append(f"{name} = {fmt(getattr(rep, name))}")
    for i in range(3):
        for j in range(3):
            lines.append(f"H_{i + 1}{j + 1} = {fmt(rep.H[i, j])}")
    return "\n".join(lines) + "\n"


def write_tuning_report(rep: TuningReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_tuning_report(rep))


# --- trajectory diagnostics ---


def theta_series(traj: Trajectory, x_star) -> np.ndarray:
    """Per-round error triple: distance to the optimizer, aggregate-tracker
    consensus error, gradient-tracker consensus error (stacked Euclidean)."""
    K1, N, n = traj.xs.shape
    Xs = np.asarray(x_star, dtype=np.float64).reshape(N, n)
    t1 = np.linalg.norm((traj.xs - Xs[None]).reshape(K1, -1), axis=1)
    t2 = np.linalg.norm(
        (traj.chis - traj.chis.mean(axis=1, keepdims=True)).reshape(K1, -1), axis=1
    )
    t3 = np.linalg.norm(
        (traj.ys - traj.ys.mean(axis=1, keepdims=True)).reshape(K1, -1), axis=1
    )
    return np.stack([t1, t2, t3], axis=1)


def compute_theta(traj: Trajectory, k: int, x_star) -> np.ndarray:
    return theta_series(traj, x_star)[k]


def error_envelope_series(traj: Trajectory, l2: float) -> np.ndarray:
    """Per-round driving vector (0, 2||e_chi||, 2 l2 ||e_chi|| + 2||e_y||)
    from the recorded quantization errors."""
    K1 = traj.xs.shape[0]
    ec = np.linalg.norm(traj.e_chi.reshape(K1, -1), axis=1)
    ey = np.linalg.norm(traj.e_y.reshape(K1, -1), axis=1)
    return np.stack([np.zeros(K1), 2.0 * ec, 2.0 * l2 * ec + 2.0 * ey], axis=1)


@dataclass(frozen=True)
class Lemma3Result:
    ok: np.ndarray  # (rounds,) per-transition satisfaction
    slack: np.ndarray  # (rounds, 3) componentwise rhs - lhs
    min_slack: float
    all_ok: bool


def check_lemma3(
    traj: Trajectory, H, l2: float, x_star, tol: float = 1e-12
) -> Lemma3Result:
    """Evaluate the per-round contraction inequality
    Theta(k+1) <= H Theta(k) + E(k) componentwise along a trajectory.

    Violations are data, not errors. The inequality is a theorem only when the
    problem's constants are globally valid (true for the built-in quadratic
    families); elsewhere this is a local diagnostic.
    """
    H = np.asarray(H, dtype=np.float64)
    th = theta_series(traj, x_star)
    E = error_envelope_series(traj, l2)
    lhs = th[1:]
    rhs = th[:-1] @ H.T + E[:-1]
    slack = rhs - lhs
    ok = (slack >= -tol).all(axis=1)
    return Lemma3Result(
        ok=ok,
        slack=slack,
        min_slack=float(slack.min()) if slack.size else 0.0,
        all_ok=bool(ok.all()),
    )


def check_lemma4(H, epsilon: float, k_max: int = 200) -> bool:
    """Power-decay certificate ||H^k|| <= c3 (rho + eps)^k for k = 0..k_max,
    with c3 = 3 sqrt(3) max{4||H||^2/eps^2, eps^2/(4||H||^2)}."""
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    H = np.asarray(H, dtype=np.float64)
    rho = spectral_radius(H)
    nH = float(np.linalg.norm(H, 2))
    if nH == 0.0:
        return True
    c3 = 3.0 * math.sqrt(3.0) * max(4.0 * nH**2 / epsilon**2, epsilon**2 / (4.0 * nH**2))
    base = rho + epsilon
    P = np.eye(H.shape[0])
    for k in range(k_max + 1):
        if float(np.linalg.norm(P, 2)) > c3 * base**k:
            return False
        P = P @ H
    return True


def performance_index(
    problem: AggregativeProblem, traj: Trajectory, f_star: float, gamma_J: float = 0.1
) -> np.ndarray:
    """Exponentially weighted optimality gap e^(gamma_J k) |f(x(k)) - f*|.

    Boundedness over k certifies a linear rate of at least gamma_J. The weight
    overflows to inf past k ~ 7000 at the default gamma_J; a zero gap is kept
    at exactly 0 regardless.
    """
    if gamma_J <= 0:
        raise ConfigError("gamma_J must be positive")
    K1 = traj.xs.shape[0]
    gaps = np.array(
        [abs(eval_global(problem, traj.x_flat(k)) - f_star) for k in range(K1)]
    )
    with np.errstate(over="ignore"):
        weights = np.exp(gamma_J * np.arange(K1))
        J = np.where(gaps == 0.0, 0.0, weights * gaps)
    return J


def fit_linear_rate(residuals, tail_fraction: float = 0.5) -> Optional[float]:
    """Least-squares per-round contraction ratio over the trailing window.

    Residuals at the numerical floor (<= 1e-14) are excluded; returns None
    when fewer than two usable points remain.
    """
    if not (0 < tail_fraction <= 1):
        raise ConfigError("tail_fraction must lie in (0, 1]")
    res = np.asarray(residuals, dtype=np.float64)
    ks = np.arange(len(res))
    start = int(math.floor(len(res) * (1.0 - tail_fraction)))
    res, ks = res[start:], ks[start:]
    keep = np.isfinite(res) & (res > 1e-14)
    if keep.sum() < 2:
        return None
    slope = np.polyfit(ks[keep], np.log(res[keep]), 1)[0]
    return float(np.exp(slope))


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    detail: str


def replay_reconstructions(traj: Trajectory) -> ReplayResult:
    """Feed the logged code streams through fresh decoders and demand
    bit-identical agreement with the recorded encoder mirrors, round by round.
    Also requires the engine's own network-wide replica equality flags."""
    if traj.mode != "quantized":
        return ReplayResult(True, "exact mode carries no code streams")
    if not bool(traj.mirror_ok.all()):
        k = int(np.argmin(traj.mirror_ok))
        return ReplayResult(False, f"replica mismatch across receivers at round {k}")
    K1, N, r = traj.chis.shape
    q = UniformQuantizer(traj.levels_L)
    for codes, mirrors, label in (
        (traj.codes_chi, traj.mirrors_chi, "aggregate"),
        (traj.codes_y, traj.mirrors_y, "gradient"),
    ):
        decoders = [ChannelCodec(q, traj.schedule, r) for _ in range(N)]
        for k in range(K1):
            for i in range(N):
                rec = decoders[i].decode(codes[k, i])
                if rec.tobytes() != mirrors[k, i].tobytes():
                    return ReplayResult(
                        False,
                        f"{label} stream, agent {i + 1}, round {k}: "
                        "replayed reconstruction differs from mirror",
                    )
    return ReplayResult(True, "all reconstructions replayed bit-identically")


def write_diagnostics_csv(
    path,
    problem: AggregativeProblem,
    traj: Trajectory,
    x_star,
    f_star: float,
    H=None,
    gamma_J: float = 0.1,
) -> None:
    """Per-round diagnostics table. The lemma3_ok column describes transition
    k -> k+1, so its final row is empty; it is also empty throughout when no
    valid comparison matrix exists for the run's stepsize."""
    th = theta_series(traj, x_star)
    E = error_envelope_series(traj, problem.l2)
    J = performance_index(problem, traj, f_star, gamma_J)
    K1 = th.shape[0]
    ok = None
    if H is not None:
        ok = check_lemma3(traj, H, problem.l2, x_star).ok

    def fmt(v: float) -> str:
        return format(float(v), ".17g")

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("round,theta_1,theta_2,theta_3,e_2,e_3,J,lemma3_ok\n")
        for k in range(K1):
            okcell = ""
            if ok is not None and k < K1 - 1:
                okcell = "1" if ok[k] else "0"
            fh.write(
                ",".join(
                    [
                        str(k),
                        fmt(th[k, 0]),
                        fmt(th[k, 1]),
                        fmt(th[k, 2]),
                        fmt(E[k, 1]),
                        fmt(E[k, 2]),
                        fmt(J[k]),
                        okcell,
                    ]
                )
                + "\n"
            )
