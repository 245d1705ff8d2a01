import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masim.beamforming import solve_p2
from masim.channel import PathSet, channel_state
from masim.positions import (
    GainContext,
    delta_bound,
    delta_paper,
    distance_linearization,
    f_expanded,
    gain_context,
    grad_f,
    hessian_f,
    interference_residual,
    link_context,
    min_spacing,
    optimize_positions,
    positions_feasible,
    sinr_margin,
    solve_p33n,
    surrogate_bounds,
)
from masim.scenario import ScenarioConfig, build_scenario, fpa_layout

from oracles import central_gradient, central_hessian, direct_gain, random_context_data

LAM = 1.0


def make_context(seed, L=None, N=None):
    rng = np.random.default_rng(seed)
    L = L or int(rng.integers(1, 7))
    N = N or int(rng.integers(1, 5))
    T_j, w_j, theta, phi, tau = random_context_data(rng, L, N, LAM)
    n = int(rng.integers(N))
    paths = PathSet(theta, phi, tau)
    ctx = link_context(n, T_j, w_j, paths, LAM)
    return ctx, (n, T_j, w_j, theta, phi, tau), rng


# --- residual -----------------------------------------------------------


def test_residual_empty_for_single_antenna():
    ctx, (n, T_j, w_j, *_), _ = make_context(0, N=1)
    assert ctx.residual == 0


def test_residual_zero_when_other_weights_vanish():
    ctx, (n, T_j, w_j, theta, phi, tau), _ = make_context(1, N=3)
    w = np.zeros(3, dtype=complex)
    w[n] = 1.0
    assert interference_residual(n, T_j, w, PathSet(theta, phi, tau), LAM) == 0


@pytest.mark.parametrize("seed", range(5))
def test_residual_is_full_sum_minus_own_term(seed):
    ctx, (n, T_j, w_j, theta, phi, tau), _ = make_context(seed, N=3)
    # conj(h)^T w over all antennas, minus antenna n's own contribution
    k = 2 * np.pi / LAM
    p = np.stack([np.sin(theta) * np.cos(phi), np.cos(theta)], axis=1)
    conj_h = np.exp(1j * k * T_j @ p.T) @ tau.conj()
    full = np.sum(conj_h * w_j)
    assert ctx.residual == pytest.approx(full - conj_h[n] * w_j[n], rel=1e-12, abs=1e-14)


# --- gain function --------------------------------------------------------


def test_f_zero_weights():
    ctx, _, _ = make_context(2)
    zero = GainContext(0j, 0j, ctx.responses, ctx.wave_vectors, LAM)
    assert f_expanded([0.3, 0.4], zero) == 0
    np.testing.assert_array_equal(grad_f([0.3, 0.4], zero), 0)


def test_single_path_single_antenna_flat():
    ctx, (n, T_j, w_j, theta, phi, tau), _ = make_context(3, L=1, N=1)
    expected = abs(w_j[0]) ** 2 * abs(tau[0]) ** 2
    for t in ([0, 0], [0.7, 1.3], [1.9, 0.1]):
        assert f_expanded(t, ctx) == pytest.approx(expected, rel=1e-14)
        np.testing.assert_allclose(grad_f(t, ctx), 0, atol=1e-14)
    assert delta_bound(ctx) == 0
    assert delta_paper(ctx) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_f_matches_direct_gain(seed):
    ctx, (n, T_j, w_j, theta, phi, tau), rng = make_context(seed)
    t = rng.random(2) * 2 * LAM
    ref = direct_gain(t, n, T_j, w_j, theta, phi, tau, LAM)
    assert f_expanded(t, ctx) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_gradient_matches_finite_differences(seed):
    ctx, _, rng = make_context(seed)
    t = rng.random(2) * 2 * LAM
    fd = central_gradient(lambda x: f_expanded(x, ctx), t, 1e-6 * LAM)
    g = grad_f(t, ctx)
    scale = max(np.linalg.norm(fd), 1e-3 * np.linalg.norm(ctx.r) + 1e-8)
    assert np.linalg.norm(g - fd) <= 1e-4 * scale


@pytest.mark.parametrize("seed", range(10))
def test_hessian_matches_finite_differences(seed):
    ctx, _, rng = make_context(seed)
    t = rng.random(2) * 2 * LAM
    fd = central_hessian(lambda x: f_expanded(x, ctx), t, 1e-4 * LAM)
    H = hessian_f(t, ctx)
    assert np.linalg.norm(H - fd) <= 1e-5 * (1 + np.linalg.norm(H))


def test_batched_context_matches_single_links():
    sc = build_scenario(ScenarioConfig(K=3, N=3, L=4, seed=5))
    rng = np.random.default_rng(0)
    T = rng.random((3, 3, 2)) * 0.4
    W = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    batch = gain_context(1, T, W, sc)
    G = np.abs(np.einsum("kjn,jn->kj", channel_state(T, sc).H.conj(), W)) ** 2
    t_b = np.broadcast_to(T[:, 1][None], (3, 3, 2))
    np.testing.assert_allclose(f_expanded(t_b, batch), G, rtol=1e-10)
    for k in range(3):
        for j in range(3):
            single = link_context(1, T[j], W[j], sc.paths[k][j], sc.wavelength)
            assert batch.residual[k, j] == pytest.approx(single.residual, rel=1e-12)
            assert delta_bound(batch)[k, j] == pytest.approx(delta_bound(single), rel=1e-12)


# --- curvature bound ----------------------------------------------------


def test_delta_single_path_closed_forms():
    ctx, (n, T_j, w_j, theta, phi, tau), _ = make_context(7, L=1, N=3)
    k = 2 * np.pi / LAM
    p2 = np.sin(theta[0]) ** 2 * np.cos(phi[0]) ** 2 + np.cos(theta[0]) ** 2
    r = abs(ctx.residual) * abs(w_j[n]) * abs(tau[0])
    assert delta_bound(ctx) == pytest.approx(2 * k ** 2 * r * p2)
    assert delta_paper(ctx) == pytest.approx(16 * np.pi ** 2 / LAM ** 2 * r)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_delta_dominates_numerical_hessian(seed):
    ctx, _, rng = make_context(seed)
    delta = delta_bound(ctx)
    for t in rng.random((20, 2)) * 4 * LAM:
        H = central_hessian(lambda x: f_expanded(x, ctx), t, 1e-4 * LAM)
        assert np.abs(np.linalg.eigvalsh(H)).max() <= delta * (1 + 1e-6) + 1e-9


def test_literal_closed_form_can_underestimate_curvature():
    # two paths with opposite wave vectors: f oscillates at twice the
    # wavenumber and the literal formula misses a factor of two
    tau = np.array([1.0, 1.0])
    ctx = GainContext(0j, 1.0, tau, [[1.0, 0.0], [-1.0, 0.0]], LAM)
    curv = max(abs(np.linalg.eigvalsh(hessian_f([x, 0.0], ctx))).max() for x in np.linspace(0, 1, 101))
    assert curv == pytest.approx(2 * delta_paper(ctx), rel=1e-6)
    assert curv <= delta_bound(ctx) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_taylor_sandwich(seed):
    ctx, _, rng = make_context(seed)
    delta = delta_bound(ctx)
    t_i = rng.random(2) * 4 * LAM
    lo, hi = surrogate_bounds(t_i, t_i, ctx, delta)
    assert lo == hi == pytest.approx(f_expanded(t_i, ctx), rel=1e-12)
    T = rng.random((200, 2)) * 4 * LAM
    f = f_expanded(T, ctx)
    lo, hi = surrogate_bounds(T, t_i, ctx, delta)
    scale = 1 + np.abs(f).max()
    assert np.all((f - lo) / scale >= -1e-9)
    assert np.all((hi - f) / scale >= -1e-9)


def test_sandwich_degenerates_to_linearization_when_delta_zero():
    ctx, _, _ = make_context(3, L=1, N=1)
    lo, hi = surrogate_bounds([1.0, 2.0], [0.2, 0.1], ctx, 0.0)
    assert lo == hi == pytest.approx(f_expanded([0.2, 0.1], ctx))


# --- distance linearization ---------------------------------------------


def test_distance_linearization_examples():
    assert distance_linearization([1.0, 0.0], [1.0, 0.0], [0.0, 0.0]) == pytest.approx(1.0)
    assert distance_linearization([0.0, 3.0], [2.0, 0.0], [0.0, 0.0]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        distance_linearization([1.0, 1.0], [0.5, 0.5], [0.5, 0.5])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_distance_linearization_is_tangent_minorant(seed):
    rng = np.random.default_rng(seed)
    t, t_i, o = rng.standard_normal((3, 2))
    d_i = np.linalg.norm(t_i - o)
    value = distance_linearization(t, t_i, o)
    assert distance_linearization(t_i, t_i, o) == pytest.approx(d_i)
    assert value <= np.linalg.norm(t - o) + 1e-12
    # first-order Taylor expansion of ||t - o|| about t_i
    taylor = d_i + (t_i - o) @ (t - t_i) / d_i
    assert value == pytest.approx(taylor, rel=1e-12, abs=1e-12)


# --- subproblem -----------------------------------------------------------


def single_link_case(seed, A=2.0):
    cfg = ScenarioConfig(K=1, N=1, L=2, S=2, A=A, seed=seed, gamma_min=1.0, wavelength=LAM)
    sc = build_scenario(cfg)
    rng = np.random.default_rng(seed)
    T = rng.random((1, 1, 2)) * A * LAM
    W = np.array([[0.2 + 0.1j]])
    return sc, T, W


@pytest.mark.parametrize("seed", range(8))
def test_single_link_subproblem_is_projected_ascent_step(seed):
    # with one user and one antenna the slack is the concave quadratic lower
    # bound of f; isotropic curvature makes its box maximizer a projection
    sc, T, W = single_link_case(seed)
    res = solve_p33n(0, T, W, sc)
    assert res.ok
    ctx = link_context(0, T[0], W[0], sc.paths[0][0], LAM)
    t_i = T[0, 0]
    delta = delta_bound(ctx)
    g = grad_f(t_i, ctx)
    expected = np.clip(t_i + g / delta, 0, 2 * LAM)
    np.testing.assert_allclose(res.positions[0], expected, atol=LAM / 1000)


@pytest.mark.parametrize("seed", range(4))
def test_single_link_subproblem_matches_grid_search(seed):
    sc, T, W = single_link_case(seed)
    res = solve_p33n(0, T, W, sc)
    ctx = link_context(0, T[0], W[0], sc.paths[0][0], LAM)
    delta = delta_bound(ctx)
    axis = np.linspace(0, 2 * LAM, 401)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    lower, _ = surrogate_bounds(grid, T[0, 0], ctx, delta)
    best = grid[np.argmax(lower)]
    got, _ = surrogate_bounds(res.positions[0], T[0, 0], ctx, delta)
    assert got >= lower.max() - 1e-3 * abs(lower.max())
    assert np.linalg.norm(res.positions[0] - best) <= LAM / 100


def test_subproblem_degenerate_region_keeps_positions():
    cfg = ScenarioConfig(K=2, N=1, L=3, A=0.0, seed=1)
    sc = build_scenario(cfg)
    T = np.zeros((2, 1, 2))
    W = np.full((2, 1), 1e-2 + 0j)
    res = solve_p33n(0, T, W, sc)
    assert res.ok
    np.testing.assert_array_equal(res.positions, T[:, 0])
    assert res.alpha == res.alpha_start


def feasible_k2_state(seed, N=4, A=4.0):
    sc = build_scenario(ScenarioConfig(K=2, N=N, L=10, A=A, seed=seed))
    cfg = sc.config
    grid = fpa_layout(N, cfg.wavelength, cfg.region_side, cfg.min_spacing)
    T = np.stack([grid, grid])
    sol = solve_p2(channel_state(T, sc), cfg.gamma, cfg.noise)
    return sc, T, sol


@pytest.mark.parametrize("seed", range(6))
def test_subproblem_solution_respects_region_and_spacing(seed):
    sc, T, sol = feasible_k2_state(seed)
    if not sol.ok:
        pytest.skip("initial geometry infeasible")
    cfg = sc.config
    for n in range(cfg.N):
        res = solve_p33n(n, T, sol.W, sc)
        assert res.ok
        assert res.alpha >= res.alpha_start - 1e-9 * (1 + abs(res.alpha_start))
        cand = T.copy()
        cand[:, n] = res.positions
        assert np.all(cand >= 0) and np.all(cand <= cfg.region_side)
        assert min_spacing(cand) >= cfg.min_spacing - 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_optimize_positions_never_loses_margin(seed):
    sc, T, sol = feasible_k2_state(seed)
    if not sol.ok:
        pytest.skip("initial geometry infeasible")
    cfg = sc.config
    H0 = channel_state(T, sc)
    before = sinr_margin(np.abs(np.einsum("kjn,jn->kj", H0.H.conj(), sol.W)) ** 2, cfg.gamma, cfg.noise)
    upd = optimize_positions(T, sol.W, sc)
    H1 = channel_state(upd.positions, sc)
    after = sinr_margin(np.abs(np.einsum("kjn,jn->kj", H1.H.conj(), sol.W)) ** 2, cfg.gamma, cfg.noise)
    assert after >= before - 1e-8
    assert positions_feasible(upd.positions, cfg.region_side, cfg.min_spacing)
    # true SINRs still meet the targets
    s = np.abs(np.einsum("kjn,jn->kj", H1.H.conj(), sol.W)) ** 2
    sinr = np.diag(s) / (s.sum(1) - np.diag(s) + cfg.noise)
    assert np.all(sinr >= cfg.gamma * (1 - 1e-6))
    assert upd.steps > 0


def test_optimize_positions_identity_on_degenerate_region():
    cfg = ScenarioConfig(K=2, N=1, L=3, A=0.0, seed=2)
    sc = build_scenario(cfg)
    T = np.zeros((2, 1, 2))
    upd = optimize_positions(T, np.full((2, 1), 1e-2 + 0j), sc)
    np.testing.assert_array_equal(upd.positions, T)
    assert upd.steps == 0


def test_positions_feasible_checks():
    T = np.array([[[0.0, 0.0], [0.05, 0.0]]])
    assert positions_feasible(T, 0.4, 0.05)
    assert not positions_feasible(T, 0.4, 0.06)
    assert not positions_feasible(T + 0.39, 0.4, 0.05)
    assert min_spacing(T[:, :1]) == np.inf
