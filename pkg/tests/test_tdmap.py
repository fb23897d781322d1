import numpy as np
import pytest

from topovertex import grid_fem as fem
from topovertex import polarization as pol
from topovertex import tdmap
from topovertex.errors import ConsistencyError, GeometryError, ParameterError
from topovertex.inclusion import build_inclusion, disk_shape


def fake_pol(P1=None, P2=None, m=(0.0, 0.0), params=fem.SolveParams(), sid="w[0,90]"):
    P1 = np.zeros((2, 2)) if P1 is None else np.asarray(P1, dtype=float)
    P2 = np.zeros((4, 2)) if P2 is None else np.asarray(P2, dtype=float)
    key = {"alpha": params.alpha, "lambda_in": params.lambda_in, "lambda_out": params.lambda_out}
    return pol.PolarizationData(sid, P1, P2, pol.kron_identity(m), 1.0, np.asarray(m), key)


def derivs_from(u_values, margin=3):
    g = fem.Grid2D.uniform(u_values.shape[0] - 1, 0.0, float(u_values.shape[0] - 1))
    return fem.extract_derivatives(fem.ScalarField(g, u_values), margin)


def test_td1_formula_by_hand(params):
    g = np.array([0.3, -0.4])
    P1 = np.array([[0.9, 0.1], [0.2, 0.7]])
    expected = 0.5 * 8 * (0.05 - 1) * (g @ (np.eye(2) + P1) @ g)
    assert tdmap.td1_values(g, fake_pol(P1), params) == pytest.approx(expected)


def test_td2_formula_by_hand(params):
    rng = np.random.default_rng(2)
    H = rng.standard_normal((2, 2))
    H = H + H.T
    g = rng.standard_normal(2)
    m = np.array([0.2, -0.1])
    P2 = rng.standard_normal((4, 2))
    # vec(H)^T (X + P2) g with row-major vec
    expected = 8 * (0.05 - 1) * (g @ H @ m + sum(H[i, j] * P2[2 * i + j] @ g for i in range(2) for j in range(2)))
    assert tdmap.td2_values(g, H, fake_pol(P2=P2, m=m), params) == pytest.approx(expected)


def test_zero_gradient_or_hessian_gives_zero(params):
    p = fake_pol(np.eye(2), np.ones((4, 2)), (0.3, 0.3))
    assert tdmap.td1_values(np.zeros(2), p, params) == 0.0
    assert tdmap.td2_values(np.array([1.0, 2.0]), np.zeros((2, 2)), p, params) == 0.0


def test_uniform_image_gives_zero_maps(params):
    d = derivs_from(np.full((21, 21), 7.0))
    p = fake_pol(np.eye(2), np.ones((4, 2)), (0.3, 0.3))
    assert np.nanmax(np.abs(tdmap.eval_td1(d, p, params).values)) == 0.0
    assert np.nanmax(np.abs(tdmap.eval_td2(d, p, params).values)) == 0.0


def test_map_mask_and_argmin(params):
    X, Y = np.meshgrid(np.arange(21.0), np.arange(21.0), indexing="ij")
    d = derivs_from(-((X - 8) ** 2 + (Y - 12) ** 2) ** 1.5 / 100.0)
    td = tdmap.eval_td1(d, fake_pol(), params)
    assert np.isnan(td.values[:3]).all() and np.isfinite(td.values[3:-3, 3:-3]).all()
    assert td.min_value == np.nanmin(td.values)
    assert td.values[td.argmin] == td.min_value
    assert td.argmin_xy == (float(td.argmin[0]), float(td.argmin[1]))


def test_parameter_mismatch(params):
    d = derivs_from(np.zeros((11, 11)))
    other = fake_pol(params=fem.SolveParams(alpha=4.0))
    with pytest.raises(ConsistencyError):
        tdmap.eval_td2(d, other, params)


def test_scaling_is_quadratic(cube1, params):
    spec, f = cube1
    p = fake_pol(np.eye(2) * 0.5, np.arange(8.0).reshape(4, 2) / 10, (0.25, 0.25))
    maps = []
    for s in (1.0, 3.0):
        u = fem.solve_state(fem.ScalarField(f.grid, s * f.values), params)
        d = fem.extract_derivatives(u)
        maps.append((tdmap.eval_td1(d, p, params), tdmap.eval_td2(d, p, params)))
    for a, b in zip(*maps):
        np.testing.assert_allclose(b.values, 9.0 * a.values, rtol=1e-6, atol=1e-9 * np.nanmax(np.abs(b.values)))
        assert a.argmin == b.argmin


@pytest.mark.slow
def test_disk_td1_nonpositive(cube1, params, cache_dir, exterior_grid):
    _, f = cube1
    data = pol.load_or_compute(disk_shape(64), params, cache_dir, exterior_grid)
    d = fem.extract_derivatives(fem.solve_state(f, params))
    td = tdmap.eval_td1(d, data, params)
    assert np.nanmax(td.values) <= 0.0


@pytest.mark.slow
def test_symmetric_shape_td2_is_tiny(cube1, params, cache_dir, exterior_grid):
    _, f = cube1
    data = pol.load_or_compute(build_inclusion([0, 180]), params, cache_dir, exterior_grid)
    d = fem.extract_derivatives(fem.solve_state(f, params))
    td = tdmap.eval_td2(d, data, params)
    m = d.mask
    scale = params.alpha * 0.95 * np.abs(d.H[m]).max() * np.abs(d.g[m]).max()
    assert np.nanmax(np.abs(td.values)) <= pol.TOL_SYM * 4 * scale


@pytest.mark.slow
def test_cube_corner_map_finds_vertex_a(cube1, params, cache_dir, exterior_grid):
    spec, f = cube1
    data = pol.load_or_compute(build_inclusion([0, 90]), params, cache_dir, exterior_grid)
    td = tdmap.eval_td2(fem.extract_derivatives(fem.solve_state(f, params)), data, params)
    a = np.array(spec.labels["A"]) * 100
    assert np.hypot(*(np.array(td.argmin_xy) - a)) <= 3.0


# -- finite-epsilon oracle ----------------------------------------------------

def test_eps_axis_layout():
    x = tdmap.eps_axis(0.5, 0.05)
    assert len(x) == 401 and x[0] == 0.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)
    k = int(np.argmin(np.abs(x - 0.5)))
    assert x[k] == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(np.diff(x[k - 128:k + 129]), 0.05 * 0.0125, rtol=1e-9)
    steps = np.diff(x)
    assert steps.max() / steps.min() < 100


def test_eps_axis_at_largest_eps_is_uniform():
    np.testing.assert_allclose(tdmap.eps_axis(0.5, 0.2), np.linspace(0, 1, 401), atol=1e-12)


def test_eps_axis_rejects_oversized_core():
    with pytest.raises(GeometryError):
        tdmap.eps_axis(0.3, 0.2)


def test_eps_list_must_decrease(params):
    with pytest.raises(ParameterError):
        tdmap.finite_eps_check(build_inclusion([0, 90]), fake_pol(), (0.5, 0.5), (0.05, 0.1), params)


@pytest.mark.slow
def test_equal_coefficients_give_zero_change():
    params = fem.SolveParams(lambda_in=1.0)
    rep = tdmap.finite_eps_check(build_inclusion([0, 90]), fake_pol(params=params), (0.5, 0.5),
                                 (0.2, 0.1), params, n_nodes=401)
    np.testing.assert_allclose(rep.delta, 0.0, atol=1e-15)
    assert rep.dJ == 0.0 and rep.d2J == 0.0


@pytest.mark.slow
def test_disk_first_order_matches_closed_form(params, cache_dir, exterior_grid):
    disk = disk_shape(64)
    data = pol.load_or_compute(disk, params, cache_dir, exterior_grid)
    rep = tdmap.finite_eps_check(disk, data, (0.5, 0.5), (0.1, 0.05), params)
    li, lo = params.lambda_in, params.lambda_out
    closed = 0.5 * params.alpha * (li - lo) * (2 * lo / (li + lo)) * rep.g @ rep.g
    assert rep.r1[-1] == pytest.approx(closed, rel=0.10)
    assert rep.delta[-1] < 0.0
    # Delta is O(eps^2): halving eps divides it by about four
    assert rep.delta[0] / rep.delta[1] == pytest.approx(4.0, rel=0.1)
