"""Truncated exterior corrector problem on a graded tensor grid.

For a basis direction ``e_k`` the corrector ``K_k`` solves::

    int alpha * lambda_w grad K . grad v = -alpha (lambda_in - lambda_out) int_w e_k . grad v

on ``[-R, R]^2`` with ``K = 0`` on the outer boundary.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import grid_fem as fem
from .errors import GeometryError, ParameterError

log = logging.getLogger(__name__)

DEFAULT_R = 30.0
DEFAULT_H_F = 0.0125
DEFAULT_L_F = 1.6
DEFAULT_RHO = 1.2
DEFAULT_H_MAX = 1.0
CORE_MARGIN = 0.3


@dataclass(frozen=True, eq=False)
class GradedGrid(fem.Grid2D):
    R: float = DEFAULT_R
    h_f: float = DEFAULT_H_F
    L_f: float = DEFAULT_L_F
    rho: float = DEFAULT_RHO
    h_max: float = DEFAULT_H_MAX

    @property
    def params(self):
        return {"R": self.R, "h_f": self.h_f, "L_f": self.L_f, "rho": self.rho, "h_max": self.h_max}


def _half_axis(R, h_f, L_f, rho, h_max):
    n_core = L_f / h_f
    if abs(n_core - round(n_core)) > 1e-9 * max(1.0, n_core):
        raise ParameterError(f"L_f={L_f} is not a multiple of h_f={h_f}")
    n_core = int(round(n_core))
    coords = [L_f * k / n_core for k in range(n_core + 1)]
    step = h_f
    pos = L_f
    while True:
        step = min(step * rho, h_max)
        nxt = pos + step
        if nxt >= R - 1e-12 * R:
            coords.append(R)
            break
        coords.append(nxt)
        pos = nxt
    return np.array(coords)


def build_graded_grid(R=DEFAULT_R, h_f=DEFAULT_H_F, L_f=DEFAULT_L_F, rho=DEFAULT_RHO,
                      h_max=DEFAULT_H_MAX):
    """Symmetric grid on ``[-R, R]^2``: spacing ``h_f`` on the core box, geometric growth outside."""
    if not (R > L_f > 1.0 and h_f > 0.0 and rho > 1.0 and h_max >= h_f):
        raise ParameterError(f"inconsistent graded-grid parameters R={R}, L_f={L_f}, "
                             f"h_f={h_f}, rho={rho}, h_max={h_max}")
    half = _half_axis(float(R), float(h_f), float(L_f), float(rho), float(h_max))
    c = np.concatenate([-half[:0:-1], half])
    return GradedGrid(c, c.copy(), float(R), float(h_f), float(L_f), float(rho), float(h_max))


def assign_inclusion_fractions(grid, shape, params=fem.SolveParams()):
    """Volume-fraction coefficient: ``lambda_e = theta_e lambda_in + (1 - theta_e) lambda_out``."""
    poly = shape.polygon
    reach = float(np.abs(poly).max())
    if isinstance(grid, GradedGrid) and reach > grid.L_f - CORE_MARGIN + 1e-12:
        raise GeometryError(f"{shape.id} reaches {reach:.3f}; core box half-width {grid.L_f} "
                            f"needs margin {CORE_MARGIN}")
    theta = fem.element_fractions(grid, poly, sub=4)
    return fem.CoefficientField.from_fractions(theta, params.lambda_in, params.lambda_out)


def _interior(grid):
    nx, ny = grid.shape
    mask = np.zeros((nx, ny), dtype=bool)
    mask[1:-1, 1:-1] = True
    return mask.ravel()


def corrector_load(grid, coeff, params, k):
    e = np.zeros(2)
    e[k - 1] = 1.0
    return -params.alpha * (params.lambda_in - params.lambda_out) * fem.gradient_load(grid, coeff.theta, e)


def _reduced_operator(grid, coeff, params):
    K, _ = fem.assemble(grid, coeff)
    free = _interior(grid)
    A = (params.alpha * K).tocsr()[free][:, free].tocsr()
    return A, free


def solve_corrector(grid, shape, params=fem.SolveParams(), k=1, coeff=None,
                    _operator=None, return_info=False):
    """Corrector for direction ``e_k`` (``k`` in ``{1, 2}``), zero on the outer boundary."""
    if k not in (1, 2):
        raise ParameterError("k must be 1 or 2")
    if coeff is None:
        coeff = assign_inclusion_fractions(grid, shape, params)
    if _operator is None:
        A, free = _reduced_operator(grid, coeff, params)
        precond = params.corrector_preconditioner
    else:
        A, free, precond = _operator
    b = corrector_load(grid, coeff, params, k)[free]
    res = fem.pcg(A, b, tol=params.cg_tol, maxiter=params.cg_max_iter, preconditioner=precond)
    full = np.zeros(grid.n_nodes)
    full[free] = res.x
    field = fem.ScalarField(grid, full.reshape(grid.shape))
    return (field, res) if return_info else field


@dataclass(frozen=True, eq=False)
class CorrectorPair:
    grid: fem.Grid2D
    shape: object
    params: fem.SolveParams
    coeff: fem.CoefficientField
    K1: fem.ScalarField
    K2: fem.ScalarField
    iterations: tuple = (0, 0)

    def fields(self):
        return (self.K1, self.K2)

    def mean_gradients(self):
        """Element-mean gradients, shape ``(2, ex, ey, 2)``: direction k, element, component."""
        return np.stack([fem.element_mean_gradients(self.grid, K.values) for K in self.fields()])


def solve_correctors(shape, params=fem.SolveParams(), grid=None):
    """Solve both basis-direction correctors, sharing one operator and preconditioner."""
    if grid is None:
        grid = build_graded_grid()
    coeff = assign_inclusion_fractions(grid, shape, params)
    A, free = _reduced_operator(grid, coeff, params)
    precond = fem._preconditioner(A, params.corrector_preconditioner)
    out = []
    its = []
    for k in (1, 2):
        K, res = solve_corrector(grid, shape, params, k, coeff, (A, free, precond), return_info=True)
        out.append(K)
        its.append(res.iterations)
    log.debug("%s: correctors solved in %s CG iterations", shape.id, its)
    return CorrectorPair(grid, shape, params, coeff, out[0], out[1], tuple(its))


def energy_identity(pair, k):
    """``(lhs, rhs)`` of ``int alpha lambda |grad K|^2 = -alpha dl int_w e_k . grad K``."""
    K = pair.fields()[k - 1].flat()
    Kmat, _ = fem.assemble(pair.grid, pair.coeff)
    lhs = pair.params.alpha * float(K @ (Kmat @ K))
    rhs = float(corrector_load(pair.grid, pair.coeff, pair.params, k) @ K)
    return lhs, rhs
