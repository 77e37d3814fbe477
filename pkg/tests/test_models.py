"""Unit tests for grids, discretized operators, the three PDE models, and
the nonlocal Green operator.  Oracles: closed-form solutions on [-1, 1],
finite differences, and exact floating-point symmetry identities."""

import math

import numpy as np
import pytest

from phase_bifurcate import (
    GridSpec,
    ModelParams,
    ch_trivial_roots,
    green_operator,
    laplacian_apply,
    laplacian_matrix,
    model_by_kind,
    poisson_neumann_solve,
)


def fd_jacobian(model, state, params, delta_scale=1e-6):
    """Central-difference Jacobian (test-side oracle)."""
    n = state.size
    jac = np.empty((n, n))
    for j in range(n):
        d = delta_scale * (1.0 + abs(state[j]))
        up = state.copy()
        dn = state.copy()
        up[j] += d
        dn[j] -= d
        jac[:, j] = (model.residual(up, params) - model.residual(dn, params)) / (2.0 * d)
    return jac


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(3)  # odd
    with pytest.raises(ValueError):
        GridSpec(2)  # too small
    with pytest.raises(TypeError):
        GridSpec(100.0)  # not an int


def test_grid_nodes_span_and_spacing():
    g = GridSpec(8)
    assert g.n_nodes == 9
    assert g.h == pytest.approx(0.25)
    assert g.nodes[0] == -1.0 and g.nodes[-1] == 1.0
    assert np.allclose(np.diff(g.nodes), g.h)


def test_grid_nodes_are_bitwise_antisymmetric():
    g = GridSpec(200)
    assert np.array_equal(g.nodes, -g.nodes[::-1])


def test_trapezoid_weights_integrate_exactly_linear():
    g = GridSpec(50)
    w = g.trapezoid_weights
    assert float(np.sum(w)) == pytest.approx(2.0, abs=1e-14)
    assert abs(float(w @ g.nodes)) <= 1e-15
    # quadratic: composite trapezoid error is (b-a) h^2 f''/12 = h^2/3
    assert float(w @ g.nodes**2) - 2.0 / 3.0 == pytest.approx(g.h**2 / 3.0, abs=1e-14)


# ---------------------------------------------------------------------------
# Laplacian
# ---------------------------------------------------------------------------


def test_laplacian_apply_matches_matrix():
    g = GridSpec(30)
    rng = np.random.default_rng(8)
    v = rng.standard_normal(g.n_nodes)
    for closure in ("symmetric", "onesided-right"):
        lap = laplacian_matrix(g, closure)
        assert np.max(np.abs(laplacian_apply(v, g, closure) - lap @ v)) <= 1e-12


def test_laplacian_is_second_order_on_smooth_data():
    gaps = []
    for n in (100, 200):
        g = GridSpec(n)
        u = np.cos(np.pi * g.nodes)  # zero-flux at both ends
        exact = -np.pi**2 * u
        gaps.append(np.max(np.abs(laplacian_apply(u, g) - exact)))
    order = math.log2(gaps[0] / gaps[1])
    assert 1.9 <= order <= 2.1


def test_laplacian_annihilates_constants():
    g = GridSpec(24)
    for closure in ("symmetric", "onesided-right"):
        assert np.max(np.abs(laplacian_apply(np.full(g.n_nodes, 3.7), g, closure))) == 0.0


def test_closures_differ_only_in_last_row():
    g = GridSpec(40)
    sym = laplacian_matrix(g, "symmetric")
    one = laplacian_matrix(g, "onesided-right")
    diff_rows = sorted(set(np.argwhere(sym != one)[:, 0].tolist()))
    assert diff_rows == [g.n_nodes - 1]


def test_unknown_closure_rejected():
    g = GridSpec(10)
    with pytest.raises(ValueError):
        laplacian_apply(np.zeros(g.n_nodes), g, "upwind")


def test_discrete_eigenmode_identity():
    """Folded-Neumann modes cos(k(x+1)) satisfy L u = -(4/h^2) sin^2(kh/2) u."""
    g = GridSpec(64)
    for m in (1, 3, 10):
        k = m * math.pi / 2.0
        u = np.cos(k * (g.nodes + 1.0))
        lam = (4.0 / g.h**2) * math.sin(k * g.h / 2.0) ** 2
        gap = np.max(np.abs(laplacian_apply(u, g) + lam * u))
        assert gap <= 1e-9 * lam, f"m={m}: {gap:.3e}"


# ---------------------------------------------------------------------------
# trivial states and cubic roots
# ---------------------------------------------------------------------------


def test_trivial_states_have_tiny_residual():
    g = GridSpec(50)
    cases = [
        ("ac", ModelParams(epsilon=0.25)),
        ("ch", ModelParams(epsilon=0.3, mu0=0.05)),
        ("acok", ModelParams(epsilon=0.3, gamma=800.0)),
    ]
    for kind, params in cases:
        model = model_by_kind(kind, g)
        for state in model.trivial_states(params):
            sup = np.max(np.abs(model.residual(state, params)))
            assert sup <= 1e-12, f"{kind}: {sup:.3e}"


def test_ch_roots_mu0_zero_are_exact():
    roots = ch_trivial_roots(ModelParams(epsilon=0.4, mu0=0.0))
    assert roots.values == (-1.0, 0.0, 1.0)
    assert roots.middle_index == 1


def test_ch_roots_match_numpy_roots():
    params = ModelParams(epsilon=0.3, mu0=0.05)
    c = params.mu0 * params.epsilon**2
    expected = np.sort(np.roots([1.0, 0.0, -1.0, -c]).real)
    got = ch_trivial_roots(params)
    assert len(got.values) == 3
    assert np.max(np.abs(np.array(got.values) - expected)) <= 1e-10
    # middle root of x^3 - x = c sits near -c for small c
    middle = got.values[got.middle_index]
    assert middle == pytest.approx(-c, abs=1e-5)
    for r in got.values:
        assert abs(r**3 - r - c) <= 1e-13


def test_ch_roots_single_root_beyond_fold():
    # |mu0 * eps^2| > 2/(3 sqrt 3): only one real root remains
    params = ModelParams(epsilon=1.0, mu0=0.6)
    got = ch_trivial_roots(params)
    assert len(got.values) == 1
    assert got.middle_index is None
    r = got.values[0]
    assert abs(r**3 - r - 0.6) <= 1e-12


def test_ch_trivial_branch_labels_follow_mu0():
    g = GridSpec(20)
    model = model_by_kind("ch", g)
    labels0 = [b.label for b in model.trivial_branches(ModelParams(epsilon=0.3, mu0=0.0))]
    labels5 = [b.label for b in model.trivial_branches(ModelParams(epsilon=0.3, mu0=0.05))]
    assert labels0 == ["phi=-1", "phi=0", "phi=+1"]
    assert labels5 == ["lowest-root", "middle-root", "highest-root"]


# ---------------------------------------------------------------------------
# Jacobians and parameter derivatives (finite-difference oracle)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kind,params,center,spread",
    [
        ("ac", ModelParams(epsilon=0.2), 0.0, 0.8),
        ("ch", ModelParams(epsilon=0.3, mu0=0.05), 0.0, 0.8),
        ("acok", ModelParams(epsilon=0.3, gamma=700.0), 0.5, 0.45),
    ],
)
def test_jacobian_matches_finite_differences(kind, params, center, spread):
    g = GridSpec(16)
    model = model_by_kind(kind, g)
    rng = np.random.default_rng(2026)
    state = center + spread * (2.0 * rng.random(g.n_nodes) - 1.0)
    jac = model.jacobian(state, params)
    num = fd_jacobian(model, state, params)
    scale = max(1.0, np.max(np.abs(jac)))
    assert np.max(np.abs(jac - num)) / scale <= 1e-6


@pytest.mark.parametrize(
    "kind,params,center,spread",
    [
        ("ac", ModelParams(epsilon=0.2), 0.0, 0.8),
        ("ch", ModelParams(epsilon=0.3, mu0=0.05), 0.0, 0.8),
        ("acok", ModelParams(epsilon=0.3, gamma=700.0), 0.5, 0.45),
    ],
)
def test_param_derivative_matches_finite_differences(kind, params, center, spread):
    g = GridSpec(16)
    model = model_by_kind(kind, g)
    rng = np.random.default_rng(7)
    state = center + spread * (2.0 * rng.random(g.n_nodes) - 1.0)
    p0 = model.active_value(params)
    d = 1e-6 * (1.0 + abs(p0))
    r_up = model.residual(state, model.with_param(params, p0 + d))
    r_dn = model.residual(state, model.with_param(params, p0 - d))
    num = (r_up - r_dn) / (2.0 * d)
    got = model.param_derivative(state, params)
    scale = max(1.0, np.max(np.abs(got)))
    assert np.max(np.abs(got - num)) / scale <= 1e-6


def test_jacobian_is_residual_linearization():
    g = GridSpec(40)
    model = model_by_kind("ac", g)
    params = ModelParams(epsilon=0.15)
    rng = np.random.default_rng(1)
    state = 0.5 * rng.standard_normal(g.n_nodes)
    direction = rng.standard_normal(g.n_nodes)
    jac = model.jacobian(state, params)
    gaps = []
    for t in (1e-3, 5e-4):
        lin = model.residual(state + t * direction, params) - model.residual(state, params)
        gaps.append(np.max(np.abs(lin - t * (jac @ direction))))
    # remainder is O(t^2): halving t quarters the gap
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.2)


def test_ch_with_mu0_zero_equals_ac():
    g = GridSpec(30)
    ac = model_by_kind("ac", g)
    ch = model_by_kind("ch", g)
    params = ModelParams(epsilon=0.21, mu0=0.0)
    rng = np.random.default_rng(4)
    state = 0.7 * rng.standard_normal(g.n_nodes)
    assert np.array_equal(ac.residual(state, params), ch.residual(state, params))
    assert np.array_equal(ac.jacobian(state, params), ch.jacobian(state, params))


# ---------------------------------------------------------------------------
# exact symmetry identities
# ---------------------------------------------------------------------------


def test_ac_residual_is_bitwise_odd():
    g = GridSpec(100)
    model = model_by_kind("ac", g)
    params = ModelParams(epsilon=0.17)
    rng = np.random.default_rng(12)
    state = 0.9 * (2.0 * rng.random(g.n_nodes) - 1.0)
    assert np.array_equal(model.residual(-state, params), -model.residual(state, params))


def test_ac_residual_is_bitwise_reflection_equivariant():
    g = GridSpec(100)
    model = model_by_kind("ac", g)
    params = ModelParams(epsilon=0.17)
    rng = np.random.default_rng(13)
    state = 0.9 * (2.0 * rng.random(g.n_nodes) - 1.0)
    flipped = state[::-1].copy()
    assert np.array_equal(model.residual(flipped, params), model.residual(state, params)[::-1])


def test_acok_residual_half_symmetry():
    """phi -> 1 - phi negates the residual (to rounding) even at large gamma."""
    g = GridSpec(100)
    model = model_by_kind("acok", g)
    params = ModelParams(epsilon=0.3, gamma=1000.0)
    rng = np.random.default_rng(77)
    phi = 0.5 + 0.45 * (2.0 * rng.random(g.n_nodes) - 1.0)
    r = model.residual(phi, params)
    r_mirror = model.residual(1.0 - phi, params)
    assert np.max(np.abs(r_mirror + r)) <= 1e-12 * max(1.0, np.max(np.abs(r)))


def test_acok_residual_reflection_equivariance():
    g = GridSpec(100)
    model = model_by_kind("acok", g)
    params = ModelParams(epsilon=0.3, gamma=1000.0)
    rng = np.random.default_rng(78)
    phi = 0.5 + 0.45 * (2.0 * rng.random(g.n_nodes) - 1.0)
    r = model.residual(phi, params)
    r_flip = model.residual(phi[::-1].copy(), params)
    assert np.max(np.abs(r_flip - r[::-1])) <= 1e-12 * max(1.0, np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# Green operator and Poisson solve
# ---------------------------------------------------------------------------


def test_green_annihilates_constants():
    g = GridSpec(100)
    green = green_operator(g)
    assert np.max(np.abs(green.matrix @ np.full(g.n_nodes, 2.5))) <= 1e-13


def test_green_output_has_zero_trapezoid_mean():
    g = GridSpec(100)
    green = green_operator(g)
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.n_nodes)
    assert abs(float(g.trapezoid_weights @ (green.matrix @ f))) <= 1e-13


def test_green_h_profile_closed_form():
    """Kernel row integrals: x^2/2 - 5/6 shifted by the exact trapezoid bias."""
    g = GridSpec(100)
    green = green_operator(g)
    expected = g.nodes**2 / 2.0 - 5.0 / 6.0 - g.h**2 / 6.0
    assert np.max(np.abs(green.h_profile - expected)) <= 1e-14


def test_green_inverts_neumann_eigenfunctions():
    # cos(pi x) and sin(pi x / 2) are zero-flux, zero-mean eigenfunctions
    for n, tol in ((100, 4e-5), (200, 1e-5)):
        g = GridSpec(n)
        green = green_operator(g)
        x = g.nodes
        f1 = np.cos(np.pi * x)
        assert np.max(np.abs(green.matrix @ f1 - f1 / np.pi**2)) <= tol
        f2 = np.sin(0.5 * np.pi * x)
        assert np.max(np.abs(green.matrix @ f2 - 4.0 * f2 / np.pi**2)) <= tol


def test_green_handles_non_eigenfunction_data():
    # -u'' = sin(pi x), u'(+-1) = 0, zero mean  =>  u = sin(pi x)/pi^2 + x/pi
    g = GridSpec(200)
    green = green_operator(g)
    x = g.nodes
    u = green.matrix @ np.sin(np.pi * x)
    exact = np.sin(np.pi * x) / np.pi**2 + x / np.pi
    assert np.max(np.abs(u - exact)) <= 1e-4


def test_poisson_solve_sign_convention():
    # u'' = sin(pi x)  =>  u = -sin(pi x)/pi^2 - x/pi
    g = GridSpec(200)
    x = g.nodes
    u = poisson_neumann_solve(np.sin(np.pi * x), g)
    exact = -np.sin(np.pi * x) / np.pi**2 - x / np.pi
    assert np.max(np.abs(u - exact)) <= 1e-4


def test_poisson_solve_rejects_nonzero_mean_data():
    g = GridSpec(50)
    with pytest.raises(ValueError):
        poisson_neumann_solve(np.ones(g.n_nodes), g)


def test_green_matches_poisson_solve_to_rounding():
    """The quadrature matrix is the exact discrete inverse of the solve route."""
    g = GridSpec(100)
    green = green_operator(g)
    rng = np.random.default_rng(5)
    x = g.nodes
    w = g.trapezoid_weights
    raw = rng.standard_normal(g.n_nodes)
    inputs = [np.sin(np.pi * x), np.cos(np.pi * x), raw - (w @ raw) / 2.0]
    for f in inputs:
        gap = np.max(np.abs(green.matrix @ f - poisson_neumann_solve(-f, g)))
        assert gap <= 1e-12


# ---------------------------------------------------------------------------
# factory
# ---------------------------------------------------------------------------


def test_model_by_kind_dispatch():
    g = GridSpec(10)
    assert model_by_kind("ac", g).kind == "ac"
    assert model_by_kind("ch", g).kind == "ch"
    assert model_by_kind("acok", g).kind == "acok"
    with pytest.raises(ValueError):
        model_by_kind("kdv", g)


def test_model_by_kind_ch_active_parameter():
    g = GridSpec(10)
    ch = model_by_kind("ch", g, active_parameter="mu0")
    assert ch.active_parameter == "mu0"
    params = ModelParams(epsilon=0.3, mu0=0.1)
    assert ch.active_value(params) == 0.1
    moved = ch.with_param(params, -0.2)
    assert moved.mu0 == -0.2 and moved.epsilon == 0.3
    with pytest.raises(ValueError):
        model_by_kind("ch", g, active_parameter="gamma")


def test_model_rejects_bad_state_shape():
    g = GridSpec(10)
    model = model_by_kind("ac", g)
    with pytest.raises(ValueError):
        model.residual(np.zeros(5), ModelParams(epsilon=0.3))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
