import json

import numpy as np
import pytest

from topovertex import grid_fem as fem
from topovertex import polarization as pol
from topovertex.errors import StaleCacheError
from topovertex.inclusion import build_inclusion


def rot(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s], [s, c]])


def test_kron_identity_rows():
    X = pol.kron_identity([0.3, -0.7])
    np.testing.assert_array_equal(X, [[0.3, 0], [-0.7, 0], [0, 0.3], [0, -0.7]])


def test_vec_convention():
    rng = np.random.default_rng(5)
    H = rng.standard_normal((2, 2))
    H = H + H.T
    g, m = rng.standard_normal(2), rng.standard_normal(2)
    assert H.reshape(4) @ pol.kron_identity(m) @ g == pytest.approx(g @ H @ m)


def test_key_covers_every_input(exterior_grid, params):
    base = pol.polarization_key([0, 90], 0.05, params, exterior_grid.params)
    assert set(base) == {"angles", "w", "alpha", "lambda_in", "lambda_out", "R", "h_f", "L_f", "rho", "h_max"}
    other = pol.polarization_key([0, 90], 0.05, fem.SolveParams(lambda_in=0.1), exterior_grid.params)
    assert pol.key_hash(base) != pol.key_hash(other)
    assert pol.key_hash(base) == pol.key_hash(dict(reversed(list(base.items()))))


@pytest.fixture(scope="module")
def corner(cache_dir, exterior_grid, params):
    return pol.load_or_compute(build_inclusion([0, 90]), params, cache_dir, exterior_grid)


@pytest.mark.slow
def test_corner_data_structure(corner):
    assert corner.P1.shape == (2, 2) and corner.P2.shape == (4, 2)
    np.testing.assert_array_equal(corner.X, pol.kron_identity(build_inclusion([0, 90]).centroid))
    # mirror symmetry about the diagonal swaps the two directions
    assert corner.P1[0, 0] == pytest.approx(corner.P1[1, 1], rel=1e-8)
    assert corner.P1[0, 1] == pytest.approx(corner.P1[1, 0], rel=1e-6, abs=1e-10)
    # the low-conductivity inclusion lowers the field inside
    assert np.all(np.linalg.eigvalsh(0.5 * (corner.P1 + corner.P1.T)) > 0)
    assert np.all(np.linalg.eigvalsh(np.eye(2) + corner.P1) > 0)


@pytest.mark.slow
def test_rotation_by_quarter_turn(corner, cache_dir, exterior_grid, params):
    # the grid is invariant under quarter turns, so the data must rotate exactly
    turned = pol.load_or_compute(build_inclusion([90, 180]), params, cache_dir, exterior_grid)
    Q = rot(90)
    np.testing.assert_allclose(turned.P1, Q @ corner.P1 @ Q.T, atol=1e-8)
    T = corner.P2.reshape(2, 2, 2)
    T_rot = np.einsum("ia,jb,kc,abc->ijk", Q, Q, Q, T)
    np.testing.assert_allclose(turned.P2, T_rot.reshape(4, 2), atol=1e-8)


@pytest.mark.slow
def test_classical_matrix(corner):
    np.testing.assert_allclose(corner.classical(), -0.95 * (np.eye(2) + corner.P1))


@pytest.mark.slow
def test_cache_roundtrip_and_staleness(corner, tmp_path, exterior_grid, params):
    path = pol.cache_store(corner, tmp_path)
    assert path.name == f"w[0,90]-{corner.hash[:8]}.pol.json"
    again = pol.cache_load("w[0,90]", corner.key, tmp_path)
    np.testing.assert_array_equal(again.P1, corner.P1)
    np.testing.assert_array_equal(again.P2, corner.P2)
    assert not list(tmp_path.glob(".tmp-*"))

    other_key = dict(corner.key, lambda_in=0.1)
    with pytest.raises(StaleCacheError):
        pol.cache_load("w[0,90]", other_key, tmp_path)
    with pytest.raises(FileNotFoundError):
        pol.cache_load("w[0,180]", corner.key, tmp_path)

    doc = json.loads(path.read_text())
    doc["alpha"] = 9.0
    path.write_text(json.dumps(doc))
    with pytest.raises(StaleCacheError):
        pol.cache_load("w[0,90]", corner.key, tmp_path)


@pytest.mark.slow
def test_cache_hit_is_identical(corner, cache_dir, exterior_grid, params):
    again = pol.load_or_compute(build_inclusion([0, 90]), params, cache_dir, exterior_grid)
    np.testing.assert_array_equal(again.P2, corner.P2)


def test_stale_cache_blocks_load_or_compute(tmp_path, exterior_grid, params):
    shape = build_inclusion([0, 90])
    key = pol.polarization_key(shape.angles, shape.width, fem.SolveParams(alpha=4.0), exterior_grid.params)
    fake = pol.PolarizationData(shape.id, np.zeros((2, 2)), np.zeros((4, 2)), np.zeros((4, 2)),
                                shape.area, shape.centroid, key)
    pol.cache_store(fake, tmp_path)
    with pytest.raises(StaleCacheError):
        pol.load_or_compute(shape, params, tmp_path, exterior_grid)


@pytest.mark.slow
@pytest.mark.parametrize("angles", [[0, 180], [0, 90, 180, 270], [45, 135, 225, 315]])
def test_symmetry_nulls(angles, cache_dir, exterior_grid, params):
    data = pol.load_or_compute(build_inclusion(angles), params, cache_dir, exterior_grid)
    assert not np.any(data.X)
    assert np.abs(data.P2).max() < pol.TOL_SYM


def test_equal_coefficients_give_zero_matrices(exterior_grid):
    params = fem.SolveParams(lambda_in=1.0)
    shape = build_inclusion([0, 45, 270])
    data = pol.precompute(shape, params, exterior_grid)
    assert not np.any(data.P1) and not np.any(data.P2)
    np.testing.assert_array_equal(data.X, pol.kron_identity(shape.centroid))


@pytest.mark.slow
def test_x_axis_symmetry_kills_off_diagonal(cache_dir, exterior_grid, params):
    data = pol.load_or_compute(build_inclusion([90, 180, 270]), params, cache_dir, exterior_grid)
    assert abs(data.P1[0, 1]) < pol.TOL_SYM and abs(data.P1[1, 0]) < pol.TOL_SYM


@pytest.mark.slow
def test_cache_file_layout(corner, tmp_path):
    doc = json.loads(pol.cache_store(corner, tmp_path).read_text())
    for k in ("shape_id", "angles", "w", "alpha", "lambda_in", "lambda_out", "R", "h_f", "L_f", "rho",
              "P1", "P2", "X", "area", "centroid", "hash"):
        assert k in doc
    assert np.array(doc["P2"]).shape == (4, 2)


@pytest.mark.slow
def test_core_refinement_changes_p1_little(corner, params):
    from topovertex.exterior import build_graded_grid
    fine = pol.precompute(build_inclusion([0, 90]), params, build_graded_grid(h_f=0.00625))
    assert np.abs(fine.P1 - corner.P1).max() <= 0.02 * np.abs(corner.P1).max()
