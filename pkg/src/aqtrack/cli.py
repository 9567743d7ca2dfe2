"""Configuration-driven experiment runner.

Subcommands: tune (emit the derived parameter report), run (simulate and
export CSVs), sweep (repeat a run across quantization level counts), verify
(empirical invariant suite). Configs are flat INI files with [problem],
[graph], [run], [output] sections; see configs/ for annotated examples.

Exit codes: 0 success, 1 verification or convergence failure, 2 configuration
or domain error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import analysis, engine
from .codec import ScalingSchedule, bits_per_scalar
from .errors import (
    AqtrackError,
    ConfigError,
    DivergenceError,
    InfeasibleEpsilonError,
    SaturationError,
    UntunableError,
)
from .problems import (
    AggregativeProblem,
    make_bandwidth_sharing,
    make_placement,
    make_quadratic_synthetic,
    solve_reference,
)
from .topology import MixingMatrix, build_complete, build_ring, load_matrix_file

_MODES = ("quantized", "exact", "both")


@dataclass
class ExperimentConfig:
    problem_kind: str
    problem_params: dict
    graph_kind: str
    graph_params: dict
    alpha: Optional[float]  # None = auto
    gamma: Optional[float]
    l0: float
    levels: Optional[int]
    rounds: int
    mode: str
    x0_spec: tuple  # ("zeros",) | ("explicit", list) | ("seed", seed, lo, hi)
    strict_saturation: bool
    stop_tol: float
    out_dir: str
    write_trajectory: bool
    constants: Optional[tuple]
    base_dir: str = "."


def _parse_auto_float(raw: str, name: str) -> Optional[float]:
    s = raw.strip().lower()
    if s == "auto":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number or 'auto', got {raw!r}") from None


def _parse_auto_int(raw: str, name: str) -> Optional[int]:
    s = raw.strip().lower()
    if s == "auto":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer or 'auto', got {raw!r}") from None


def _parse_floats(raw: str, name: str) -> list:
    try:
        return [float(tok) for tok in raw.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {raw!r}") from None


def load_config(path) -> ExperimentConfig:
    import configparser

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    base_dir = os.path.dirname(os.path.abspath(path))

    if not cp.has_section("problem"):
        raise ConfigError("config needs a [problem] section")
    kind = cp.get("problem", "kind", fallback="").strip().lower()
    pp: dict = {}
    if kind == "placement":
        raw = cp.get("problem", "targets", fallback=None)
        if raw is None:
            raise ConfigError("placement needs targets = x1,y1; x2,y2; ...")
        pairs = [tok for tok in raw.split(";") if tok.strip()]
        targets = []
        for tok in pairs:
            xy = _parse_floats(tok, "targets")
            if len(xy) != 2:
                raise ConfigError(f"each target needs two coordinates, got {tok!r}")
            targets.append(xy)
        graw = cp.get("problem", "gammas", fallback="1")
        gvals = _parse_floats(graw, "gammas")
        if len(gvals) == 1:
            gvals = gvals * len(targets)
        pp = {"targets": targets, "gammas": gvals}
    elif kind == "bandwidth":
        pp = {
            "agents": cp.getint("problem", "agents"),
            "reg": cp.getfloat("problem", "reg", fallback=0.01),
        }
    elif kind == "quadratic":
        pp = {
            "agents": cp.getint("problem", "agents"),
            "dim_x": cp.getint("problem", "dim_x", fallback=2),
            "dim_agg": cp.getint("problem", "dim_agg", fallback=2),
            "seed": cp.getint("problem", "seed", fallback=0),
        }
    else:
        raise ConfigError(
            f"problem kind must be placement, bandwidth, or quadratic, got {kind!r}"
        )

    gkind = cp.get("graph", "kind", fallback="complete").strip().lower()
    gp: dict = {}
    if gkind == "ring":
        gp = {"self_weight": cp.getfloat("graph", "self_weight", fallback=0.5)}
    elif gkind == "file":
        gp = {"path": cp.get("graph", "path")}
    elif gkind != "complete":
        raise ConfigError(f"graph kind must be complete, ring, or file, got {gkind!r}")

    alpha = _parse_auto_float(cp.get("run", "alpha", fallback="auto"), "alpha")
    gamma = _parse_auto_float(cp.get("run", "gamma", fallback="auto"), "gamma")
    l0 = cp.getfloat("run", "l0", fallback=1.0)
    levels = _parse_auto_int(cp.get("run", "levels", fallback="auto"), "levels")
    rounds = cp.getint("run", "rounds", fallback=100)
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    mode = cp.get("run", "mode", fallback="quantized").strip().lower()
    if mode not in _MODES:
        raise ConfigError(f"mode must be one of {_MODES}, got {mode!r}")
    if cp.has_option("run", "x0"):
        x0_spec = ("explicit", _parse_floats(cp.get("run", "x0"), "x0"))
    elif cp.has_option("run", "x0_seed"):
        box = _parse_floats(cp.get("run", "x0_box", fallback="0,1"), "x0_box")
        if len(box) != 2 or not box[0] < box[1]:
            raise ConfigError("x0_box must be lo,hi with lo < hi")
        x0_spec = ("seed", cp.getint("run", "x0_seed"), box[0], box[1])
    else:
        x0_spec = ("zeros",)
    strict = cp.getboolean("run", "strict_saturation", fallback=False)
    stop_tol = cp.getfloat("run", "stop_tol", fallback=0.0)

    out_dir = cp.get("output", "dir", fallback="out")
    write_traj = cp.getboolean("output", "write_trajectory", fallback=True)

    constants = None
    if cp.has_section("constants"):
        constants = tuple(
            cp.getfloat("constants", k) for k in ("mu", "l1", "l2", "l3")
        )

    return ExperimentConfig(
        problem_kind=kind,
        problem_params=pp,
        graph_kind=gkind,
        graph_params=gp,
        alpha=alpha,
        gamma=gamma,
        l0=l0,
        levels=levels,
        rounds=rounds,
        mode=mode,
        x0_spec=x0_spec,
        strict_saturation=strict,
        stop_tol=stop_tol,
        out_dir=out_dir,
        write_trajectory=write_traj,
        constants=constants,
        base_dir=base_dir,
    )


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical INI text for round-tripping a parsed config."""

    def f(v):
        return format(float(v), ".17g")

    lines = ["[problem]", f"kind = {cfg.problem_kind}"]
    if cfg.problem_kind == "placement":
        tg = "; ".join(f"{f(t[0])},{f(t[1])}" for t in cfg.problem_params["targets"])
        lines.append(f"targets = {tg}")
        lines.append("gammas = " + ",".join(f(g) for g in cfg.problem_params["gammas"]))
    elif cfg.problem_kind == "bandwidth":
        lines.append(f"agents = {cfg.problem_params['agents']}")
        lines.append(f"reg = {f(cfg.problem_params['reg'])}")
    else:
        for k in ("agents", "dim_x", "dim_agg", "seed"):
            lines.append(f"{k} = {cfg.problem_params[k]}")
    lines += ["", "[graph]", f"kind = {cfg.graph_kind}"]
    if cfg.graph_kind == "ring":
        lines.append(f"self_weight = {f(cfg.graph_params['self_weight'])}")
    elif cfg.graph_kind == "file":
        lines.append(f"path = {cfg.graph_params['path']}")
    lines += [
        "",
        "[run]",
        f"alpha = {'auto' if cfg.alpha is None else f(cfg.alpha)}",
        f"gamma = {'auto' if cfg.gamma is None else f(cfg.gamma)}",
        f"l0 = {f(cfg.l0)}",
        f"levels = {'auto' if cfg.levels is None else cfg.levels}",
        f"rounds = {cfg.rounds}",
        f"mode = {cfg.mode}",
    ]
    if cfg.x0_spec[0] == "explicit":
        lines.append("x0 = " + ",".join(f(v) for v in cfg.x0_spec[1]))
    elif cfg.x0_spec[0] == "seed":
        lines.append(f"x0_seed = {cfg.x0_spec[1]}")
        lines.append(f"x0_box = {f(cfg.x0_spec[2])},{f(cfg.x0_spec[3])}")
    lines.append(f"strict_saturation = {str(cfg.strict_saturation).lower()}")
    lines.append(f"stop_tol = {f(cfg.stop_tol)}")
    lines += [
        "",
        "[output]",
        f"dir = {cfg.out_dir}",
        f"write_trajectory = {str(cfg.write_trajectory).lower()}",
    ]
    if cfg.constants is not None:
        lines += ["", "[constants]"]
        for name, v in zip(("mu", "l1", "l2", "l3"), cfg.constants):
            lines.append(f"{name} = {f(v)}")
    return "\n".join(lines) + "\n"


def build_problem(cfg: ExperimentConfig) -> AggregativeProblem:
    pp = cfg.problem_params
    if cfg.problem_kind == "placement":
        return make_placement(pp["targets"], pp["gammas"])
    if cfg.problem_kind == "bandwidth":
        return make_bandwidth_sharing(pp["agents"], pp["reg"])
    return make_quadratic_synthetic(pp["agents"], pp["dim_x"], pp["dim_agg"], pp["seed"])


def build_graph(cfg: ExperimentConfig, n_agents: int) -> MixingMatrix:
    if cfg.graph_kind == "complete":
        return build_complete(n_agents)
    if cfg.graph_kind == "ring":
        return build_ring(n_agents, cfg.graph_params["self_weight"])
    path = cfg.graph_params["path"]
    if not os.path.isabs(path):
        path = os.path.join(cfg.base_dir, path)
    M = load_matrix_file(path)
    if M.n_agents != n_agents:
        raise ConfigError(
            f"matrix file has {M.n_agents} agents but problem has {n_agents}"
        )
    return M


def resolve_x0(cfg: ExperimentConfig, p: AggregativeProblem) -> np.ndarray:
    dim = p.n_agents * p.dim_x
    spec = cfg.x0_spec
    if spec[0] == "explicit":
        x0 = np.asarray(spec[1], dtype=np.float64)
        if x0.shape != (dim,):
            raise ConfigError(f"x0 needs {dim} components, got {x0.shape[0]}")
        return x0
    if spec[0] == "seed":
        rng = np.random.default_rng(spec[1])
        return rng.uniform(spec[2], spec[3], dim)
    return np.zeros(dim)


def _resolve_params(cfg, problem, mixing, x0, sol):
    """Fill auto fields from the tuning pipeline. Returns (alpha, gamma, L,
    report-or-None). Explicit parameter sets that admit no certificate still
    run; auto fields require one."""
    rep = None
    rep_err = None
    try:
        rep = analysis.make_tuning_report(
            problem,
            mixing,
            x0,
            cfg.l0,
            alpha=cfg.alpha,
            gamma=cfg.gamma,
            solution=sol,
            constants=cfg.constants,
        )
    except (UntunableError, InfeasibleEpsilonError) as exc:
        rep_err = exc
    if cfg.alpha is None and rep is None:
        raise rep_err
    alpha = cfg.alpha if cfg.alpha is not None else rep.alpha
    if cfg.gamma is None and rep is None and cfg.mode != "exact":
        raise rep_err
    gamma = cfg.gamma if cfg.gamma is not None else (rep.gamma if rep else 0.5)
    if cfg.levels is None and rep is None and cfg.mode != "exact":
        raise rep_err
    L = cfg.levels if cfg.levels is not None else (rep.L_min if rep else 1)
    return alpha, gamma, L, rep


def _summarize_traj(problem, traj, sol, fh):
    res_final = float(
        np.linalg.norm(traj.xs[-1].ravel() - sol.x_star)
    )
    res_inf = float(np.abs(traj.xs[-1].ravel() - sol.x_star).max())
    series = np.linalg.norm(
        traj.xs.reshape(traj.xs.shape[0], -1) - sol.x_star[None], axis=1
    )
    rate = analysis.fit_linear_rate(series)
    fh.write(f"mode = {traj.mode}\n")
    fh.write(f"rounds_run = {traj.rounds}\n")
    fh.write(f"residual_final = {format(res_final, '.17g')}\n")
    fh.write(f"residual_inf_final = {format(res_inf, '.17g')}\n")
    fh.write(
        "fitted_rate = "
        + ("undefined" if rate is None else format(rate, ".17g"))
        + "\n"
    )
    fh.write(f"bits_total = {int(traj.bits_cum[-1])}\n")
    fh.write(f"bits_total_zero_free = {int(traj.bits_zero_free_cum[-1])}\n")
    fh.write(f"saturations_total = {int(traj.sat_cum[-1])}\n")
    fh.write(f"mirror_equality = {'ok' if bool(traj.mirror_ok.all()) else 'VIOLATED'}\n")
    fh.write(f"wall_time_s = {traj.wall_time:.6f}\n")


def _echo_header(cfg, problem, mixing, x0, alpha, gamma, L, sol, fh):
    fh.write(f"problem = {cfg.problem_kind}\n")
    fh.write(f"agents = {problem.n_agents}\n")
    fh.write(f"graph = {cfg.graph_kind}\n")
    fh.write(f"kappa = {format(mixing.kappa, '.17g')}\n")
    fh.write(f"alpha = {format(alpha, '.17g')}\n")
    fh.write(f"gamma = {format(gamma, '.17g')}\n")
    fh.write(f"l0 = {format(cfg.l0, '.17g')}\n")
    fh.write(f"levels = {L}\n")
    fh.write(f"x0_spec = {cfg.x0_spec[0]}")
    if cfg.x0_spec[0] == "seed":
        fh.write(
            f" (seed {cfg.x0_spec[1]}, box [{cfg.x0_spec[2]}, {cfg.x0_spec[3]}])"
        )
    fh.write("\n")
    fh.write("x_star = " + ",".join(format(v, ".17g") for v in sol.x_star) + "\n")
    fh.write(
        "chi_star = " + ",".join(format(v, ".17g") for v in sol.chi_star) + "\n"
    )
    fh.write(f"f_star = {format(sol.f_star, '.17g')}\n")


def cmd_tune(cfg: ExperimentConfig) -> int:
    problem = build_problem(cfg)
    mixing = build_graph(cfg, problem.n_agents)
    x0 = resolve_x0(cfg, problem)
    sol = solve_reference(problem)
    rep = analysis.make_tuning_report(
        problem,
        mixing,
        x0,
        cfg.l0,
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        solution=sol,
        constants=cfg.constants,
    )
    text = analysis.format_tuning_report(rep)
    os.makedirs(cfg.out_dir, exist_ok=True)
    analysis.write_tuning_report(rep, os.path.join(cfg.out_dir, "tuning_report.txt"))
    sys.stdout.write(text)
    return 0


def _run_one(problem, mixing, cfg, alpha, gamma, L, x0, mode):
    rc = engine.RunConfig(
        alpha=alpha,
        schedule=ScalingSchedule(cfg.l0, gamma),
        levels_L=L,
        max_rounds=cfg.rounds,
        x0=x0,
        mode=mode,
        strict_saturation=cfg.strict_saturation,
        stop_tol=cfg.stop_tol,
    )
    return engine.run(problem, mixing, rc)


def cmd_run(cfg: ExperimentConfig) -> int:
    problem = build_problem(cfg)
    mixing = build_graph(cfg, problem.n_agents)
    x0 = resolve_x0(cfg, problem)
    sol = solve_reference(problem)
    alpha, gamma, L, rep = _resolve_params(cfg, problem, mixing, x0, sol)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if rep is not None:
        analysis.write_tuning_report(
            rep, os.path.join(cfg.out_dir, "tuning_report.txt")
        )

    modes = ["quantized", "exact"] if cfg.mode == "both" else [cfg.mode]
    trajs = {}
    failure = None
    for mode in modes:
        suffix = f"_{mode}" if cfg.mode == "both" else ""
        try:
            traj = _run_one(problem, mixing, cfg, alpha, gamma, L, x0, mode)
        except DivergenceError as exc:
            traj = exc.trajectory
            failure = (mode, exc)
        except SaturationError as exc:
            failure = (mode, exc)
            traj = None
        if traj is not None:
            trajs[mode] = traj
            if cfg.write_trajectory:
                engine.write_trajectory_csv(
                    os.path.join(cfg.out_dir, f"trajectory{suffix}.csv"),
                    traj,
                    x_star=sol.x_star,
                )
            analysis.write_diagnostics_csv(
                os.path.join(cfg.out_dir, f"diagnostics{suffix}.csv"),
                problem,
                traj,
                sol.x_star,
                sol.f_star,
                H=rep.H if rep is not None else None,
            )
        if failure is not None:
            break

    with open(
        os.path.join(cfg.out_dir, "summary.txt"), "w", encoding="ascii", newline="\n"
    ) as fh:
        _echo_header(cfg, problem, mixing, x0, alpha, gamma, L, sol, fh)
        if rep is None:
            fh.write("certificate = none (no tuning certificate at these parameters)\n")
        else:
            fh.write(f"certificate = rho_H {format(rep.rho_H, '.17g')}, ")
            fh.write(f"L_min {rep.L_min}\n")
        for mode, traj in trajs.items():
            fh.write("\n")
            _summarize_traj(problem, traj, sol, fh)
        if len(trajs) == 2:
            kq = trajs["quantized"].xs
            ke = trajs["exact"].xs
            kmin = min(kq.shape[0], ke.shape[0])
            dev = float(
                np.abs(kq[:kmin] - ke[:kmin]).max()
            )
            fh.write(f"\nmax_mode_divergence = {format(dev, '.17g')}\n")
        if failure is not None:
            mode, exc = failure
            fh.write(f"\nFAILED ({mode}): {exc}\n")

    if failure is not None:
        print(f"run failed: {failure[1]}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(cfg: ExperimentConfig, levels: list) -> int:
    if not levels:
        raise ConfigError("sweep needs a nonempty --levels list")
    if any(L < 1 for L in levels):
        raise ConfigError("all level counts must be >= 1")
    problem = build_problem(cfg)
    mixing = build_graph(cfg, problem.n_agents)
    x0 = resolve_x0(cfg, problem)
    sol = solve_reference(problem)
    alpha, gamma, _, rep = _resolve_params(cfg, problem, mixing, x0, sol)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for L in levels:
        try:
            traj = _run_one(problem, mixing, cfg, alpha, gamma, L, x0, "quantized")
            res = float(np.linalg.norm(traj.xs[-1].ravel() - sol.x_star))
            rows.append(
                (
                    L,
                    bits_per_scalar(L),
                    format(res, ".17g"),
                    int(traj.bits_cum[-1]),
                    int(traj.sat_cum[-1]),
                    "ok",
                )
            )
        except (DivergenceError, SaturationError) as exc:
            rows.append((L, bits_per_scalar(L), "", "", "", f"failed: {exc}"))
    path = os.path.join(cfg.out_dir, "sweep.csv")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("levels_L,bits_per_scalar,final_residual,total_bits,saturations,status\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    sys.stdout.write(f"wrote {path} ({len(rows)} rows)\n")
    return 0


def cmd_verify(cfg: ExperimentConfig, sabotage: bool = False) -> int:
    problem = build_problem(cfg)
    mixing = build_graph(cfg, problem.n_agents)
    x0 = resolve_x0(cfg, problem)
    sol = solve_reference(problem)
    alpha, gamma, L, rep = _resolve_params(cfg, problem, mixing, x0, sol)
    mode = "exact" if cfg.mode == "exact" else "quantized"

    rc = engine.RunConfig(
        alpha=alpha,
        schedule=ScalingSchedule(cfg.l0, gamma),
        levels_L=L,
        max_rounds=cfg.rounds,
        x0=x0,
        mode=mode,
        strict_saturation=False,
        sabotage_round=(cfg.rounds // 2 if sabotage else None),
    )
    traj = engine.run(problem, mixing, rc)

    results = []  # (name, "pass"|"FAIL"|"skip", detail)

    K1 = traj.xs.shape[0]
    dev_c = max(
        float(
            np.abs(
                traj.chis[k].mean(axis=0) - problem.g_all(traj.xs[k]).mean(axis=0)
            ).max()
        )
        for k in range(K1)
    )
    results.append(
        ("conservation_chi", "pass" if dev_c <= 1e-12 else "FAIL", f"max dev {dev_c:.3e}")
    )
    dev_y = max(
        float(
            np.abs(
                traj.ys[k].mean(axis=0)
                - problem.grad_chi_all(traj.xs[k], traj.chis[k]).mean(axis=0)
            ).max()
        )
        for k in range(K1)
    )
    results.append(
        ("conservation_y", "pass" if dev_y <= 1e-12 else "FAIL", f"max dev {dev_y:.3e}")
    )

    # one exact step from the oracle fixed point must not move x
    N, r = problem.n_agents, problem.dim_agg
    fp_cfg = engine.RunConfig(
        alpha=alpha,
        schedule=ScalingSchedule(cfg.l0, gamma),
        levels_L=L,
        max_rounds=1,
        x0=sol.x_star,
        mode="exact",
        trackers0=(
            np.broadcast_to(sol.chi_star, (N, r)).copy(),
            np.broadcast_to(sol.y_star, (N, r)).copy(),
        ),
    )
    fp = engine.run(problem, mixing, fp_cfg)
    fp_move = float(np.abs(fp.xs[1] - fp.xs[0]).max())
    results.append(
        ("fixed_point", "pass" if fp_move <= 1e-9 else "FAIL", f"moved {fp_move:.3e}")
    )

    if rep is not None:
        lem3 = analysis.check_lemma3(traj, rep.H, problem.l2, sol.x_star)
        results.append(
            (
                "lemma3_contraction",
                "pass" if lem3.all_ok else "FAIL",
                f"min slack {lem3.min_slack:.3e}",
            )
        )
        ok4 = analysis.check_lemma4(rep.H, rep.epsilon, 200)
        results.append(("lemma4_power_decay", "pass" if ok4 else "FAIL", "k <= 200"))
    else:
        results.append(("lemma3_contraction", "skip", "no certificate"))
        results.append(("lemma4_power_decay", "skip", "no certificate"))

    if mode == "quantized":
        rp = analysis.replay_reconstructions(traj)
        results.append(("mirror_equality", "pass" if rp.ok else "FAIL", rp.detail))
    else:
        results.append(("mirror_equality", "skip", "exact mode has no code streams"))

    width = max(len(name) for name, _, _ in results)
    failed = False
    for name, status, detail in results:
        failed = failed or status == "FAIL"
        sys.stdout.write(f"{name.ljust(width)}  {status:4s}  {detail}\n")
    sys.stdout.write("verification FAILED\n" if failed else "all checks passed\n")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aqtrack",
        description=(
            "Distributed aggregative optimization under finite-bit "
            "communication: tuning, simulation, sweeps, and verification. "
            "Outputs land in the configured directory: trajectory.csv, "
            "diagnostics.csv, tuning_report.txt, summary.txt, sweep.csv."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="INI experiment config")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
        sp.add_argument(
            "--mode",
            choices=_MODES,
            help="communication mode (overrides [run] mode)",
        )
        sp.add_argument(
            "--strict-saturation",
            action="store_true",
            help="abort on the first saturated coordinate",
        )
        sp.add_argument(
            "--seed",
            type=int,
            help="draw x0 from the config box with this seed (overrides [run])",
        )

    common(sub.add_parser("tune", help="derive and write the parameter report"))
    common(sub.add_parser("run", help="simulate and export trajectory CSVs"))
    sp = sub.add_parser("sweep", help="repeat the run across level counts")
    common(sp)
    sp.add_argument(
        "--levels",
        required=True,
        help="comma-separated quantization level counts, e.g. 1,2,10,100",
    )
    sp = sub.add_parser("verify", help="run the empirical invariant suite")
    common(sp)
    sp.add_argument(
        "--sabotage",
        action="store_true",
        help="corrupt one received code mid-run (negative control; must fail)",
    )

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = replace(cfg, out_dir=args.out)
        if args.mode:
            cfg = replace(cfg, mode=args.mode)
        if args.strict_saturation:
            cfg = replace(cfg, strict_saturation=True)
        if args.seed is not None:
            if cfg.x0_spec[0] == "seed":
                cfg = replace(
                    cfg, x0_spec=("seed", args.seed, cfg.x0_spec[2], cfg.x0_spec[3])
                )
            else:
                cfg = replace(cfg, x0_spec=("seed", args.seed, 0.0, 1.0))

        if args.command == "tune":
            return cmd_tune(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            levels = [int(tok) for tok in args.levels.split(",") if tok.strip()]
            return cmd_sweep(cfg, levels)
        return cmd_verify(cfg, sabotage=args.sabotage)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AqtrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
