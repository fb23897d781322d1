"""Bilinear finite elements on tensor-product grids.

Nodal fields are stored as ``(nx, ny)`` arrays indexed ``[i, j]`` for the
node at ``(x[i], y[j])``; the flat node index is ``i * ny + j``. Element
``(i, j)`` is the rectangle ``[x[i], x[i+1]] x [y[j], y[j+1]]``.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, GeometryError, ParameterError, SolverError
from . import polygon as pg

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid2D:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("x", "y"):
            c = np.array(getattr(self, name), dtype=float)
            if c.ndim != 1 or len(c) < 2:
                raise ParameterError(f"{name}-coordinates need at least 2 entries")
            if not np.all(np.diff(c) > 0):
                raise ParameterError(f"{name}-coordinates must be strictly increasing")
            c.setflags(write=False)
            object.__setattr__(self, name, c)

    @classmethod
    def uniform(cls, n_cells, lo=0.0, hi=1.0):
        """Grid with ``n_cells`` equal cells per direction on ``[lo, hi]^2``."""
        c = lo + (hi - lo) * np.arange(n_cells + 1) / n_cells
        return cls(c, c.copy())

    @property
    def shape(self):
        return (len(self.x), len(self.y))

    @property
    def n_nodes(self):
        return len(self.x) * len(self.y)

    @property
    def hx(self):
        return np.diff(self.x)

    @property
    def hy(self):
        return np.diff(self.y)

    @property
    def is_uniform(self):
        h = self.hx[0]
        return (np.allclose(self.hx, h, rtol=1e-9, atol=0)
                and np.allclose(self.hy, h, rtol=1e-9, atol=0))

    @property
    def h(self):
        if not self.is_uniform:
            raise ParameterError("grid spacing is not uniform")
        return float(self.hx[0])

    def nodes(self):
        """Node coordinates, shape ``(nx, ny, 2)``."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def element_centroids(self):
        cx = 0.5 * (self.x[1:] + self.x[:-1])
        cy = 0.5 * (self.y[1:] + self.y[:-1])
        X, Y = np.meshgrid(cx, cy, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def element_areas(self):
        return np.outer(self.hx, self.hy)

    def same_as(self, other):
        return (self is other or (self.shape == other.shape
                                  and np.array_equal(self.x, other.x)
                                  and np.array_equal(self.y, other.y)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise DimensionError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def flat(self):
        return self.values.ravel()


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Per-element diffusivity, optionally with the inclusion fractions it came from."""
    values: np.ndarray
    theta: Optional[np.ndarray] = None

    @classmethod
    def constant(cls, grid, value):
        return cls(np.full((grid.shape[0] - 1, grid.shape[1] - 1), float(value)))

    @classmethod
    def from_fractions(cls, theta, lambda_in, lambda_out):
        theta = np.asarray(theta, dtype=float)
        if theta.size and (theta.min() < 0.0 or theta.max() > 1.0):
            raise ParameterError("inclusion fractions must lie in [0, 1]")
        return cls(theta * lambda_in + (1.0 - theta) * lambda_out, theta)


@dataclass(frozen=True)
class SolveParams:
    alpha: float = 8.0
    lambda_in: float = 0.05
    lambda_out: float = 1.0
    cg_tol: float = 1e-10
    cg_max_iter: int = 20000
    preconditioner: str = "jacobi"
    corrector_preconditioner: str = "amg"

    def __post_init__(self):
        if not 0.0 < self.lambda_in <= self.lambda_out:
            raise ParameterError("need 0 < lambda_in <= lambda_out")
        if not self.alpha > 0.0:
            raise ParameterError("alpha must be positive")
        if not self.cg_tol > 0.0 or self.cg_max_iter < 1:
            raise ParameterError("cg_tol must be positive and cg_max_iter >= 1")
        for pc in (self.preconditioner, self.corrector_preconditioner):
            if pc not in ("jacobi", "amg", "none"):
                raise ParameterError(f"unknown preconditioner {pc!r}")


@dataclass(frozen=True, eq=False)
class DerivativeFields:
    """Pointwise gradient ``g[i, j]`` and Hessian ``H[i, j]``; NaN outside ``mask``."""
    grid: Grid2D
    g: np.ndarray
    H: np.ndarray
    mask: np.ndarray
    margin: int


# -- assembly ---------------------------------------------------------------

def _element_dofs(grid):
    nx, ny = grid.shape
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    base = i * ny + j
    # local order (a, b) = (0,0), (0,1), (1,0), (1,1): a is the x offset
    return np.stack([base, base + 1, base + ny, base + ny + 1], axis=-1)


_LOCAL = [(0, 0), (0, 1), (1, 0), (1, 1)]


def assemble(grid, coeff=None):
    """Return ``(K, M)``: diffusion matrix weighted by ``coeff`` and the mass matrix.

    Both use exact integration on each rectangle (tensor products of the
    1D linear-element matrices).
    """
    hx = grid.hx[:, None]
    hy = grid.hy[None, :]
    lam = np.ones((len(grid.x) - 1, len(grid.y) - 1)) if coeff is None else coeff.values
    if lam.shape != (len(grid.x) - 1, len(grid.y) - 1):
        raise DimensionError(f"coefficient shape {lam.shape} does not match grid elements")

    def k1(h, a, c):
        return (1.0 if a == c else -1.0) / h

    def m1(h, a, c):
        return h * ((2.0 if a == c else 1.0) / 6.0)

    dofs = _element_dofs(grid)
    rows, cols, kvals, mvals = [], [], [], []
    for p, (a, b) in enumerate(_LOCAL):
        for q, (c, d) in enumerate(_LOCAL):
            kloc = k1(hx, a, c) * m1(hy, b, d) + m1(hx, a, c) * k1(hy, b, d)
            mloc = m1(hx, a, c) * m1(hy, b, d)
            rows.append(dofs[..., p].ravel())
            cols.append(dofs[..., q].ravel())
            kvals.append((lam * kloc).ravel())
            mvals.append(np.broadcast_to(mloc, lam.shape).ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = grid.n_nodes
    K = sp.csr_matrix((np.concatenate(kvals), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((np.concatenate(mvals), (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    M.sum_duplicates()
    return K, M


def gradient_load(grid, weights, direction):
    """Load vector ``b_i = sum_e weights_e * int_e direction . grad(phi_i)``."""
    w = np.asarray(weights, dtype=float)
    hx = grid.hx[:, None]
    hy = grid.hy[None, :]
    dofs = _element_dofs(grid)
    b = np.zeros(grid.n_nodes)
    ex, ey = float(direction[0]), float(direction[1])
    for p, (a, bb) in enumerate(_LOCAL):
        sa = 1.0 if a else -1.0
        sb = 1.0 if bb else -1.0
        # int_e d(phi)/dx = sa * hy / 2, int_e d(phi)/dy = sb * hx / 2
        contrib = w * (ex * sa * hy / 2.0 + ey * sb * hx / 2.0)
        np.add.at(b, dofs[..., p].ravel(), contrib.ravel())
    return b


def element_mean_gradients(grid, nodal):
    """Mean of the bilinear interpolant's gradient over each element, shape ``(ex, ey, 2)``."""
    u = np.asarray(nodal, dtype=float).reshape(grid.shape)
    hx = grid.hx[:, None]
    hy = grid.hy[None, :]
    gx = ((u[1:, :-1] + u[1:, 1:]) - (u[:-1, :-1] + u[:-1, 1:])) / (2.0 * hx)
    gy = ((u[:-1, 1:] + u[1:, 1:]) - (u[:-1, :-1] + u[1:, :-1])) / (2.0 * hy)
    return np.stack([gx, gy], axis=-1)


def element_fractions(grid, poly, sub=4):
    """Fraction of a ``sub x sub`` midpoint subsample of each element inside ``poly``."""
    poly = pg.as_polygon(poly)
    theta = np.zeros((len(grid.x) - 1, len(grid.y) - 1))
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    i0 = max(int(np.searchsorted(grid.x, lo[0], side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(grid.x, hi[0], side="left")), len(grid.x) - 1)
    j0 = max(int(np.searchsorted(grid.y, lo[1], side="right")) - 1, 0)
    j1 = min(int(np.searchsorted(grid.y, hi[1], side="left")), len(grid.y) - 1)
    if i1 <= i0 or j1 <= j0:
        return theta
    xs, ys = grid.x[i0:i1 + 1], grid.y[j0:j1 + 1]
    frac = (np.arange(sub) + 0.5) / sub
    px = (xs[:-1, None] + np.diff(xs)[:, None] * frac[None, :])       # (ex, sub)
    py = (ys[:-1, None] + np.diff(ys)[:, None] * frac[None, :])       # (ey, sub)
    PX = np.broadcast_to(px[:, None, :, None], (len(px), len(py), sub, sub))
    PY = np.broadcast_to(py[None, :, None, :], (len(px), len(py), sub, sub))
    inside = pg.contains(poly, np.stack([PX, PY], axis=-1), include_boundary=False, tol=0.0)
    theta[i0:i1, j0:j1] = inside.mean(axis=(2, 3))
    return theta


def centroid_indicator(grid, poly):
    """1.0 on elements whose centroid lies strictly inside ``poly``."""
    c = grid.element_centroids()
    return pg.contains(poly, c, include_boundary=False).astype(float)


# -- linear algebra ---------------------------------------------------------

@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


def _preconditioner(A, kind):
    if kind == "jacobi":
        dinv = 1.0 / A.diagonal()
        return lambda r: dinv * r
    if kind == "amg":
        import pyamg
        # evolution strength copes with the 20:1 coefficient jump and graded cells
        ml = pyamg.smoothed_aggregation_solver(
            A.tocsr(), symmetry="symmetric",
            strength=("evolution", {"k": 2, "proj_type": "l2", "epsilon": 4.0}))
        Mop = ml.aspreconditioner(cycle="V")
        return lambda r: Mop @ r
    return lambda r: r


def pcg(A, b, tol=1e-10, maxiter=20000, preconditioner="jacobi", x0=None):
    """Preconditioned conjugate gradients for an SPD matrix.

    Stops when ``|r| <= tol * |b|``; raises :class:`SolverError` with the
    final relative residual otherwise.
    """
    b = np.asarray(b, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, [0.0])
    apply_m = preconditioner if callable(preconditioner) else _preconditioner(A, preconditioner)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    res = float(np.linalg.norm(r)) / bnorm
    history = [res]
    if res <= tol:
        return CGResult(x, 0, history)
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        res = float(np.linalg.norm(r)) / bnorm
        history.append(res)
        if res <= tol:
            return CGResult(x, it, history)
        z = apply_m(r)
        rz_new = float(r @ z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(f"CG did not converge in {maxiter} iterations "
                      f"(relative residual {res:.3e})", residual=res, iterations=maxiter)


# -- state equations --------------------------------------------------------

def _system(grid, params, coeff):
    if coeff is None:
        coeff = CoefficientField.constant(grid, params.lambda_out)
    K, M = assemble(grid, coeff)
    return (params.alpha * K + M).tocsr(), K, M, coeff


def solve_state(f, params=SolveParams(), coeff=None, return_info=False):
    """Solve ``-alpha div(lambda grad u) + u = f`` with natural Neumann conditions.

    ``f`` is a nodal field; it enters through its bilinear interpolant. The
    default coefficient is ``lambda_out`` everywhere (no edge set).
    """
    grid = f.grid
    A, _, M, _ = _system(grid, params, coeff)
    res = pcg(A, M @ f.flat(), tol=params.cg_tol, maxiter=params.cg_max_iter,
              preconditioner=params.preconditioner)
    u = ScalarField(grid, res.x.reshape(grid.shape))
    return (u, res) if return_info else u


def inclusion_polygon(shape, z, eps):
    poly = shape.polygon if hasattr(shape, "polygon") else pg.as_polygon(shape)
    return np.asarray(z, dtype=float)[None, :] + eps * poly


def perturbed_coefficient(grid, params, shape, z, eps, coefficient="centroid"):
    """Element diffusivities for the domain perturbed by ``z + eps * shape``."""
    if eps == 0.0:
        return CoefficientField.constant(grid, params.lambda_out)
    poly = inclusion_polygon(shape, z, eps)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    if lo[0] <= grid.x[0] or lo[1] <= grid.y[0] or hi[0] >= grid.x[-1] or hi[1] >= grid.y[-1]:
        raise GeometryError(f"inclusion z={tuple(z)}, eps={eps} leaves the domain")
    width = getattr(shape, "width", None)
    if width is not None:
        cells = eps * width / max(grid.hx.min(), grid.hy.min())
        if cells < 2.0:
            warnings.warn(f"inclusion arm width spans only {cells:.2f} elements", stacklevel=3)
    if coefficient == "centroid":
        theta = centroid_indicator(grid, poly)
    elif coefficient == "fraction":
        theta = element_fractions(grid, poly)
    else:
        raise ParameterError(f"unknown coefficient assignment {coefficient!r}")
    return CoefficientField.from_fractions(theta, params.lambda_in, params.lambda_out)


def solve_perturbed_state(f, params, shape, z, eps, coefficient="centroid"):
    """State for the coefficient ``lambda_in`` on ``z + eps * shape``, ``lambda_out`` elsewhere."""
    coeff = perturbed_coefficient(f.grid, params, shape, z, eps, coefficient)
    return solve_state(f, params, coeff)


def cost(u, f, params, coeff=None):
    """``1/2 int (u - f)^2 + alpha * lambda |grad u|^2`` for bilinear ``u`` and ``f``."""
    if not u.grid.same_as(f.grid):
        raise DimensionError("u and f live on different grids")
    grid = u.grid
    if coeff is None:
        coeff = CoefficientField.constant(grid, params.lambda_out)
    K, M = assemble(grid, coeff)
    d = u.flat() - f.flat()
    uu = u.flat()
    return 0.5 * (float(d @ (M @ d)) + params.alpha * float(uu @ (K @ uu)))


# -- pointwise derivatives --------------------------------------------------

def extract_derivatives(u, margin=3):
    """Central-difference gradient and Hessian at interior nodes of a uniform grid."""
    grid = u.grid
    if margin < 2:
        raise ParameterError("margin must be at least 2")
    nx, ny = grid.shape
    if nx - 2 * margin < 1 or ny - 2 * margin < 1:
        raise ParameterError(f"margin {margin} leaves no interior pixels on a {nx}x{ny} grid")
    h = grid.h
    v = u.values
    g = np.full((nx, ny, 2), np.nan)
    H = np.full((nx, ny, 2, 2), np.nan)
    s = slice(margin, -margin)
    c = v[1:-1, 1:-1]
    gx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    gy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    hxx = (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / h**2
    hyy = (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / h**2
    hxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h**2)
    inner = (slice(margin - 1, nx - 1 - margin), slice(margin - 1, ny - 1 - margin))
    g[s, s, 0] = gx[inner]
    g[s, s, 1] = gy[inner]
    H[s, s, 0, 0] = hxx[inner]
    H[s, s, 1, 1] = hyy[inner]
    H[s, s, 0, 1] = hxy[inner]
    H[s, s, 1, 0] = hxy[inner]
    mask = np.zeros((nx, ny), dtype=bool)
    mask[s, s] = True
    return DerivativeFields(grid, g, H, mask, margin)
