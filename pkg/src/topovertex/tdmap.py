"""First- and second-order topological derivative maps.

With ``dl = lambda_in - lambda_out`` and pointwise gradient ``g``, Hessian ``H``
of the state::

    TD1 = alpha / 2 * dl * g^T (I2 + P1) g
    TD2 = alpha * dl * vec(H)^T (X + P2) g

The finite-epsilon check at the bottom measures the same quantities by
re-solving the perturbed state and differencing the cost directly.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import grid_fem as fem
from .errors import ConsistencyError, GeometryError, ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TDMap:
    """Values on the node grid; NaN outside the derivative mask."""
    values: np.ndarray
    order: int
    shape_id: str
    argmin: tuple
    min_value: float
    grid: fem.Grid2D = None

    @property
    def argmin_xy(self):
        i, j = self.argmin
        return float(self.grid.x[i]), float(self.grid.y[j])


def _finish(values, mask, order, shape_id, grid):
    masked = np.where(mask, values, np.inf)
    flat = int(np.argmin(masked))          # first minimum in C order
    i, j = np.unravel_index(flat, values.shape)
    out = np.where(mask, values, np.nan)
    out.setflags(write=False)
    return TDMap(out, order, shape_id, (int(i), int(j)), float(values[i, j]), grid)


def _check(pol, params):
    if pol.key and not pol.matches(params):
        raise ConsistencyError(
            f"{pol.shape_id}: polarization data computed for alpha={pol.key.get('alpha')}, "
            f"lambda=({pol.key.get('lambda_in')}, {pol.key.get('lambda_out')}), "
            f"not alpha={params.alpha}, lambda=({params.lambda_in}, {params.lambda_out})")


def td1_values(g, pol, params):
    dl = params.lambda_in - params.lambda_out
    T = np.eye(2) + pol.P1
    return 0.5 * params.alpha * dl * np.einsum("...i,ik,...k->...", g, T, g)


def td2_values(g, H, pol, params):
    dl = params.lambda_in - params.lambda_out
    vecH = H.reshape(H.shape[:-2] + (4,))
    return params.alpha * dl * np.einsum("...a,ak,...k->...", vecH, pol.X + pol.P2, g)


def eval_td1(derivs, pol, params):
    _check(pol, params)
    g = np.where(derivs.mask[..., None], derivs.g, 0.0)
    return _finish(td1_values(g, pol, params), derivs.mask, 1, pol.shape_id, derivs.grid)


def eval_td2(derivs, pol, params):
    _check(pol, params)
    g = np.where(derivs.mask[..., None], derivs.g, 0.0)
    H = np.where(derivs.mask[..., None, None], derivs.H, 0.0)
    return _finish(td2_values(g, H, pol, params), derivs.mask, 2, pol.shape_id, derivs.grid)


# -- finite-epsilon expansion oracle ------------------------------------------

def smooth_image(grid):
    """Default smooth test image ``sin(2 pi x) (y^2 + 0.2 y)`` sampled at the nodes."""
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return fem.ScalarField(grid, np.sin(2.0 * np.pi * X) * (Y ** 2 + 0.2 * Y))


def _geometric_spacings(h0, n, length):
    """``n`` spacings ``h0 r, h0 r^2, ..., h0 r^n`` summing to ``length``."""
    k = np.arange(1, n + 1)

    def excess(r):
        return h0 * np.sum(r ** k) - length

    r = brentq(excess, 1e-3, 10.0, xtol=1e-15)
    steps = h0 * r ** k
    return steps * (length / steps.sum())


def eps_axis(c, eps, n_nodes=401, h_f=0.0125, L_f=1.6, lo=0.0, hi=1.0):
    """Axis coordinates whose core copies the corrector grid scaled by ``eps`` around ``c``.

    The core ``c + eps * [-L_f, L_f]`` has spacing ``eps * h_f``; the remaining
    cells on either side grow geometrically out to ``lo`` and ``hi`` so that the
    axis has exactly ``n_nodes`` nodes.
    """
    n_half = int(round(L_f / h_f))
    h0 = eps * h_f
    core = c + h0 * np.arange(-n_half, n_half + 1)
    n_out = n_nodes - 1 - 2 * n_half
    dl, dr = core[0] - lo, hi - core[-1]
    if dl <= 0.0 or dr <= 0.0 or n_out < 2:
        raise GeometryError(f"core box {c} +- {eps * L_f:g} does not fit into [{lo}, {hi}] "
                            f"with {n_nodes} nodes")
    n_left = min(max(int(round(n_out * dl / (dl + dr))), 1), n_out - 1)
    n_right = n_out - n_left
    left = core[0] - np.cumsum(_geometric_spacings(h0, n_left, dl))[::-1]
    right = core[-1] + np.cumsum(_geometric_spacings(h0, n_right, dr))
    left[0], right[-1] = lo, hi
    return np.concatenate([left, core, right])


def eps_grid(z, eps, n_nodes=401, h_f=0.0125, L_f=1.6):
    return fem.Grid2D(eps_axis(z[0], eps, n_nodes, h_f, L_f), eps_axis(z[1], eps, n_nodes, h_f, L_f))


def _node_derivatives(grid, u, z):
    """Gradient and Hessian of nodal ``u`` at the grid node ``z`` (uniform neighbourhood)."""
    i = int(np.argmin(np.abs(grid.x - z[0])))
    j = int(np.argmin(np.abs(grid.y - z[1])))
    if abs(grid.x[i] - z[0]) > 1e-9 or abs(grid.y[j] - z[1]) > 1e-9:
        raise ParameterError(f"z={tuple(z)} is not a node of the reference grid")
    if not (1 <= i < grid.shape[0] - 1 and 1 <= j < grid.shape[1] - 1):
        raise ParameterError("z must be an interior node")
    h = grid.x[i + 1] - grid.x[i]
    k = grid.y[j + 1] - grid.y[j]
    v = u.values
    g = np.array([(v[i + 1, j] - v[i - 1, j]) / (2 * h), (v[i, j + 1] - v[i, j - 1]) / (2 * k)])
    hxx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / h ** 2
    hyy = (v[i, j + 1] - 2 * v[i, j] + v[i, j - 1]) / k ** 2
    hxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (4 * h * k)
    return g, np.array([[hxx, hxy], [hxy, hyy]])


@dataclass(frozen=True, eq=False)
class EpsReport:
    """Result of :func:`finite_eps_check`.

    ``gap1[i] = |r1 - dJ|`` and ``gap2[i] = |r2 - d2J|``; the latter is the
    remainder after both expansion terms divided by ``eps |w_eps|``.
    """
    shape_id: str
    z: tuple
    eps: np.ndarray
    delta: np.ndarray
    area: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    dJ: float
    d2J: float
    g: np.ndarray
    H: np.ndarray

    @property
    def gap1(self):
        return np.abs(self.r1 - self.dJ)

    @property
    def gap2(self):
        return np.abs(self.r2 - self.d2J)

    @property
    def rel_gap1(self):
        return self.gap1 / abs(self.dJ)

    @property
    def monotone1(self):
        return bool(np.all(np.diff(self.gap1) < 0.0))

    @property
    def monotone2(self):
        return bool(np.all(np.diff(self.gap2) < 0.0))

    def ok(self, final_rel_tol=0.15):
        return self.monotone1 and self.monotone2 and bool(self.rel_gap1[-1] < final_rel_tol)

    def lines(self):
        out = [f"{self.shape_id} at z={self.z}: dJ={self.dJ:.6g}, d2J={self.d2J:.6g}"]
        for e, r1, r2, g1, g2 in zip(self.eps, self.r1, self.r2, self.gap1, self.gap2):
            out.append(f"  eps={e:<6g} r1={r1:.6g} r2={r2:.6g} |r1-dJ|={g1:.3g} |r2-d2J|={g2:.3g}")
        return out


def finite_eps_check(shape, pol, z, eps_list=(0.2, 0.1, 0.05), params=fem.SolveParams(),
                     image=smooth_image, n_nodes=401, coefficient="fraction",
                     h_f=0.0125, L_f=1.6):
    """Compare directly differenced costs with the topological expansion.

    For every ``eps`` the cost change ``Delta = J(u_eps) - J(u)`` is evaluated
    on a tensor grid of ``n_nodes``^2 nodes whose core is the corrector core
    scaled by ``eps`` and centred at ``z``. Both states are solved on that same
    grid, so the discretisation error of the background largely cancels.
    ``dJ`` and ``d2J`` use the gradient and Hessian of the state at ``z``,
    obtained from a uniform ``n_nodes``^2 reference solve.

    Parameters
    ----------
    shape : InclusionShape
    pol : PolarizationData
        Polarization data of ``shape`` under ``params``.
    z : pair of float
        Must be a node of the uniform reference grid.
    eps_list : sequence of float
        Strictly decreasing.
    image : callable
        ``image(grid) -> ScalarField``.
    """
    _check(pol, params)
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])) or eps_list[-1] <= 0.0:
        raise ParameterError("eps_list must be positive and strictly decreasing")
    z = (float(z[0]), float(z[1]))
    solver = replace(params, preconditioner=params.corrector_preconditioner,
                     cg_tol=min(params.cg_tol, 1e-12))

    ref = fem.Grid2D.uniform(n_nodes - 1)
    u_ref = fem.solve_state(image(ref), solver)
    g, H = _node_derivatives(ref, u_ref, z)
    dJ = float(td1_values(g, pol, params))
    d2J = float(td2_values(g, H, pol, params))

    deltas, areas = [], []
    for eps in eps_list:
        grid = eps_grid(z, eps, n_nodes, h_f, L_f)
        f = image(grid)
        u0 = fem.solve_state(f, solver)
        coeff = fem.perturbed_coefficient(grid, params, shape, z, eps, coefficient)
        u1 = fem.solve_state(f, solver, coeff)
        delta = fem.cost(u1, f, params, coeff) - fem.cost(u0, f, params)
        deltas.append(delta)
        areas.append(eps ** 2 * shape.area)
        log.info("eps=%g: Delta=%.6e", eps, delta)
    eps_a = np.array(eps_list)
    delta = np.array(deltas)
    area = np.array(areas)
    r1 = delta / area
    r2 = (delta - area * dJ) / (eps_a * area)
    return EpsReport(shape.id, z, eps_a, delta, area, r1, r2, dJ, d2J, g, H)
