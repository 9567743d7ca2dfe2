"""Problem families, the centralized oracle, and the regularity constants."""

import numpy as np
import pytest

from aqtrack import (
    AggregativeProblem,
    ConfigError,
    NoConvergenceError,
    ShapeError,
    aggregate,
    eval_aggregated_gradient,
    eval_global,
    make_bandwidth_sharing,
    make_placement,
    make_quadratic_synthetic,
    operating_box,
    solve_reference,
)
from conftest import FIVE_GAMMAS, FIVE_TARGETS

# Oracle for the five-target placement instance, frozen from the 10x10
# stationarity solve and cross-checked by the gradient-descent path.
FIVE_X_STAR = np.array(
    [
        2.93632204, 4.92372687,
        5.90661907, 8.88412291,
        8.87691609, 7.89402390,
        5.90661907, 1.95342984,
        8.87691609, 1.95342984,
    ]
)
FIVE_CHI_STAR = np.array([14.53595896, 11.45257373])
FIVE_F_STAR = 598.5464258661602


def _families():
    return [
        make_placement(FIVE_TARGETS, FIVE_GAMMAS),
        make_bandwidth_sharing(3, reg=0.01),
        make_quadratic_synthetic(3, 2, 2, seed=0),
    ]


def _fd_gradient(p, x, h=1e-6):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (eval_global(p, x + e) - eval_global(p, x - e)) / (2.0 * h)
    return out


def _decoupled_quadratic(seed=4):
    """Synthetic family with the aggregate coupling removed (every c_i = 0),
    giving the separable optimum x_i = -P_i^{-1} b_i. Built without the
    stationarity system so the oracle exercises the descent path."""
    base = make_quadratic_synthetic(3, 2, 2, seed=seed)
    Ps, bs, Gs = base.params["P"], base.params["b"], base.params["G"]
    N, n, r = 3, 2, 2
    evs = np.concatenate([np.linalg.eigvalsh(P) for P in Ps])
    return AggregativeProblem(
        n_agents=N,
        dim_x=n,
        dim_agg=r,
        f=lambda i, xi, chi: float(0.5 * xi @ Ps[i] @ xi + bs[i] @ xi),
        grad_x_f=lambda i, xi, chi: Ps[i] @ xi + bs[i],
        grad_chi_f=lambda i, xi, chi: np.zeros(r),
        g=lambda i, xi: Gs[i] @ xi / N,
        jac_g=lambda i, xi: Gs[i].T / N,
        mu=float(evs.min()),
        l1=float(evs.max()),
        l2=0.0,
        l3=base.l3,
    ), Ps, bs


# ------------------------------------------------------------ construction


def test_placement_validation():
    with pytest.raises(ShapeError):
        make_placement([[1.0, 2.0, 3.0]], [1.0])
    with pytest.raises(ShapeError):
        make_placement([[1.0, 2.0]], [1.0, 1.0])
    with pytest.raises(ConfigError):
        make_placement([[1.0, 2.0]], [0.0])
    with pytest.raises(ConfigError):
        make_placement([[1.0, 2.0]], [-3.0])
    with pytest.raises(ConfigError):
        make_placement([[-1.0, 2.0]], [1.0])


def test_bandwidth_validation():
    with pytest.raises(ConfigError):
        make_bandwidth_sharing(0)
    with pytest.raises(ConfigError):
        make_bandwidth_sharing(3, reg=-0.1)


def test_quadratic_validation_and_determinism():
    with pytest.raises(ConfigError):
        make_quadratic_synthetic(0, 2, 2, seed=1)
    with pytest.raises(ConfigError):
        make_quadratic_synthetic(3, 0, 2, seed=1)
    a = make_quadratic_synthetic(3, 2, 2, seed=9)
    b = make_quadratic_synthetic(3, 2, 2, seed=9)
    c = make_quadratic_synthetic(3, 2, 2, seed=10)
    for key in ("P", "b", "G", "c", "d"):
        assert np.array_equal(a.params[key], b.params[key])
        assert not np.array_equal(a.params[key], c.params[key])


def test_custom_problem_constant_validation():
    kw = dict(
        n_agents=1,
        dim_x=1,
        dim_agg=1,
        f=lambda i, xi, chi: 0.0,
        grad_x_f=lambda i, xi, chi: np.zeros(1),
        grad_chi_f=lambda i, xi, chi: np.zeros(1),
        g=lambda i, xi: np.zeros(1),
        jac_g=lambda i, xi: np.zeros((1, 1)),
    )
    AggregativeProblem(mu=0.0, l1=1.0, l2=0.0, l3=1.0, **kw)
    with pytest.raises(ConfigError):
        AggregativeProblem(mu=1.0, l1=0.0, l2=0.0, l3=1.0, **kw)
    with pytest.raises(ConfigError):
        AggregativeProblem(mu=1.0, l1=1.0, l2=0.0, l3=0.0, **kw)
    with pytest.raises(ConfigError):
        AggregativeProblem(mu=-1.0, l1=1.0, l2=0.0, l3=1.0, **kw)
    with pytest.raises(ConfigError):
        AggregativeProblem(mu=np.nan, l1=1.0, l2=0.0, l3=1.0, **kw)


# --------------------------------------------------------------- evaluation


def test_eval_global_single_agent_at_target_is_zero():
    p = make_placement([[0.0, 0.0]], [1.0])
    assert eval_global(p, np.zeros(2)) == 0.0


def test_eval_global_rejects_wrong_length():
    p = make_placement(FIVE_TARGETS, FIVE_GAMMAS)
    with pytest.raises(ShapeError):
        eval_global(p, np.zeros(9))
    with pytest.raises(ShapeError):
        eval_aggregated_gradient(p, np.zeros(11))


def test_aggregate_is_mean_of_maps():
    p = make_quadratic_synthetic(4, 3, 2, seed=2)
    X = np.random.default_rng(0).normal(size=(4, 3))
    chi = aggregate(p, X)
    manual = np.mean([p.g(i, X[i]) for i in range(4)], axis=0)
    assert np.allclose(chi, manual, rtol=1e-12, atol=1e-15)


def test_zero_aggregate_map_reduces_to_separable_costs():
    rng = np.random.default_rng(6)
    bs = rng.uniform(-1, 1, size=(3, 2))
    p = AggregativeProblem(
        n_agents=3,
        dim_x=2,
        dim_agg=1,
        f=lambda i, xi, chi: float(0.5 * np.sum((xi - bs[i]) ** 2)),
        grad_x_f=lambda i, xi, chi: xi - bs[i],
        grad_chi_f=lambda i, xi, chi: np.zeros(1),
        g=lambda i, xi: np.zeros(1),
        jac_g=lambda i, xi: np.zeros((2, 1)),
        mu=1.0,
        l1=1.0,
        l2=0.0,
        l3=1.0,
    )
    assert eval_global(p, bs.ravel()) == 0.0
    x = rng.normal(size=6)
    grad = eval_aggregated_gradient(p, x)
    assert np.allclose(grad, x - bs.ravel(), rtol=0, atol=1e-15)


@pytest.mark.parametrize("idx", range(3))
def test_gradient_matches_finite_differences(idx):
    p = _families()[idx]
    rng = np.random.default_rng(100 + idx)
    dim = p.n_agents * p.dim_x
    for _ in range(50):
        x = rng.uniform(-3.0, 8.0, size=dim)
        g = eval_aggregated_gradient(p, x)
        fd = _fd_gradient(p, x)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_batched_paths_match_per_agent_loops():
    for p in _families():
        rng = np.random.default_rng(7)
        X = rng.uniform(-2.0, 6.0, size=(p.n_agents, p.dim_x))
        C = rng.uniform(-2.0, 6.0, size=(p.n_agents, p.dim_agg))
        Y = rng.uniform(-1.0, 1.0, size=(p.n_agents, p.dim_agg))
        assert np.allclose(
            p.g_all(X), np.stack([p.g(i, X[i]) for i in range(p.n_agents)]), atol=1e-14
        )
        assert np.allclose(
            p.grad_x_all(X, C),
            np.stack([p.grad_x_f(i, X[i], C[i]) for i in range(p.n_agents)]),
            atol=1e-14,
        )
        assert np.allclose(
            p.grad_chi_all(X, C),
            np.stack([p.grad_chi_f(i, X[i], C[i]) for i in range(p.n_agents)]),
            atol=1e-14,
        )
        assert np.allclose(
            p.jac_vec_all(X, Y),
            np.stack([p.jac_g(i, X[i]) @ Y[i] for i in range(p.n_agents)]),
            atol=1e-14,
        )


# ------------------------------------------------------------------- oracle


def test_single_agent_placement_oracle_hits_target():
    p = make_placement([[3.0, 5.0]], [7.0])
    sol = solve_reference(p)
    assert np.allclose(sol.x_star, [3.0, 5.0], atol=1e-12)
    assert np.allclose(sol.chi_star, [3.0, 5.0], atol=1e-12)
    assert abs(sol.f_star) <= 1e-20
    assert sol.grad_norm <= 1e-9


def test_two_agent_placement_direct_vs_descent():
    p = make_placement([[0.0, 0.0], [2.0, 0.0]], [1.0, 1.0])
    direct = solve_reference(p, method="direct")
    gd = solve_reference(p, tol=1e-12, method="gd")
    assert np.abs(direct.x_star - gd.x_star).max() <= 1e-8
    assert direct.grad_norm <= 1e-10
    assert gd.f_star >= direct.f_star - 1e-12


def test_five_target_oracle_frozen_values(five_problem, five_solution):
    sol = five_solution
    assert np.abs(sol.x_star - FIVE_X_STAR).max() <= 1e-6
    assert np.abs(sol.chi_star - FIVE_CHI_STAR).max() <= 1e-6
    assert abs(sol.f_star - FIVE_F_STAR) <= 1e-9 * FIVE_F_STAR
    assert sol.grad_norm <= 1e-8
    gd = solve_reference(five_problem, tol=1e-10, method="gd")
    assert np.abs(sol.x_star - gd.x_star).max() <= 1e-8


def test_five_target_aggregate_tracks_solution(five_solution):
    sol = five_solution
    mean_x = sol.x_star.reshape(5, 2).mean(axis=0)
    # chi* = sqrt(5) mean(x*) holds by construction of the aggregation maps
    assert np.allclose(sol.chi_star, np.sqrt(5.0) * mean_x, rtol=1e-12)
    # pinning chi* to (11.1803, 13.0437) would force mean(x*) = (5.0, 5.8334);
    # the oracle solution has a different mean, so that pair cannot occur here
    assert np.abs(mean_x - np.array([5.0, 5.8334])).max() > 0.5
    assert np.abs(sol.chi_star - np.array([11.1803, 13.0437])).max() > 0.5
    # y* assembles from the chi-gradients at the solution
    assert np.allclose(sol.y_star, 2.0 * (sol.chi_star - mean_x), rtol=1e-12)


def test_bandwidth_objective_values():
    for N in (1, 2, 3, 5):
        p = make_bandwidth_sharing(N, reg=0.0)
        x = np.full(N, 1.0 / (2.0 * N))
        assert abs(eval_global(p, x) - (-0.25)) <= 1e-15
    p2 = make_bandwidth_sharing(2, reg=0.0)
    assert abs(eval_global(p2, np.array([0.25, 0.25])) - (-0.25)) <= 1e-15


def test_bandwidth_regularized_oracle():
    p = make_bandwidth_sharing(3, reg=0.01)
    sol = solve_reference(p)
    # stationarity: -1 + 2 S + 2 reg x_i = 0 with equal coordinates
    t = 1.0 / 6.02
    assert np.allclose(sol.x_star, t, rtol=1e-12)
    assert abs(sol.chi_star[0] - t) <= 1e-12
    assert np.abs(eval_aggregated_gradient(p, sol.x_star)).max() <= 1e-12
    assert sol.grad_norm <= 1e-10


def test_bandwidth_singular_limit_minimum_norm():
    p = make_bandwidth_sharing(4, reg=0.0)
    sol = solve_reference(p)
    # the stationary set is S = 1/2; least-norm representative splits it evenly
    assert np.allclose(sol.x_star, 1.0 / 8.0, atol=1e-12)
    assert abs(eval_global(p, sol.x_star) - (-0.25)) <= 1e-14


def test_decoupled_quadratic_descent_path():
    p, Ps, bs = _decoupled_quadratic()
    sol = solve_reference(p, tol=1e-11)
    for i in range(3):
        xi = sol.x_star[2 * i : 2 * i + 2]
        assert np.abs(xi - np.linalg.solve(Ps[i], -bs[i])).max() <= 1e-8
    assert sol.grad_norm <= 1e-11


def test_solver_argument_validation():
    p, _, _ = _decoupled_quadratic()
    with pytest.raises(ConfigError):
        solve_reference(p, tol=0.0)
    with pytest.raises(ConfigError):
        solve_reference(p, method="direct")
    with pytest.raises(ConfigError):
        solve_reference(p, method="newton")


def test_descent_exhaustion_carries_last_iterate():
    p, _, _ = _decoupled_quadratic()
    with pytest.raises(NoConvergenceError) as exc:
        solve_reference(p, tol=1e-300, max_iter=5)
    assert exc.value.last_iterate.shape == (6,)
    assert exc.value.grad_norm > 0.0


def test_oracle_optimality_margin():
    rng = np.random.default_rng(21)
    for p in _families():
        sol = solve_reference(p)
        dim = p.n_agents * p.dim_x
        for _ in range(10):
            v = rng.normal(size=dim)
            v /= np.linalg.norm(v)
            assert eval_global(p, sol.x_star + 1e-3 * v) > sol.f_star
            assert eval_global(p, sol.x_star - 1e-3 * v) > sol.f_star


# ---------------------------------------------------------------- constants


def test_operating_box_geometry():
    p = make_placement([[1.0, 1.0]], [2.0])
    sol = solve_reference(p)
    x0 = sol.x_star + np.array([3.0, -1.0])
    lo, hi = operating_box(sol, x0)
    rad = 2.0 * (3.0 + 1.0)
    assert np.allclose(lo, sol.x_star - rad)
    assert np.allclose(hi, sol.x_star + rad)


@pytest.mark.parametrize("idx", range(3))
def test_constants_honest_on_operating_box(idx):
    p = _families()[idx]
    sol = solve_reference(p)
    dim = p.n_agents * p.dim_x
    rng = np.random.default_rng(40 + idx)
    lo, hi = operating_box(sol, sol.x_star + rng.uniform(-2.0, 2.0, size=dim))
    xs = rng.uniform(lo, hi, size=(1000, dim))
    ys = rng.uniform(lo, hi, size=(1000, dim))
    for x, y in zip(xs, ys):
        gx = eval_aggregated_gradient(p, x)
        gy = eval_aggregated_gradient(p, y)
        d = np.linalg.norm(x - y)
        assert np.linalg.norm(gx - gy) <= p.l1 * d * (1.0 + 1e-9)
        assert (gx - gy) @ (x - y) >= p.mu * d * d * (1.0 - 1e-9) - 1e-12


@pytest.mark.parametrize("idx", range(3))
def test_chi_gradient_lipschitz_bound(idx):
    p = _families()[idx]
    rng = np.random.default_rng(60 + idx)
    for _ in range(400):
        i = int(rng.integers(p.n_agents))
        xa = rng.uniform(-5.0, 10.0, size=p.dim_x)
        xb = rng.uniform(-5.0, 10.0, size=p.dim_x)
        ca = rng.uniform(-5.0, 10.0, size=p.dim_agg)
        cb = rng.uniform(-5.0, 10.0, size=p.dim_agg)
        diff = np.linalg.norm(p.grad_chi_f(i, xa, ca) - p.grad_chi_f(i, xb, cb))
        dist = np.linalg.norm(np.concatenate([xa - xb, ca - cb]))
        assert diff <= p.l2 * dist * (1.0 + 1e-9) + 1e-12


@pytest.mark.parametrize("idx", range(3))
def test_aggregation_jacobian_bound(idx):
    p = _families()[idx]
    rng = np.random.default_rng(80 + idx)
    for _ in range(30):
        i = int(rng.integers(p.n_agents))
        xi = rng.uniform(-5.0, 10.0, size=p.dim_x)
        J = p.jac_g(i, xi)
        assert J.shape == (p.dim_x, p.dim_agg)
        assert np.linalg.norm(J, 2) <= p.l3 / p.n_agents + 1e-12
