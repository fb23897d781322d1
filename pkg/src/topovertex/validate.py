"""Self-checks behind ``topovertex validate``.

Each suite returns a list of :class:`Check` records. Nothing here is used by
the detection pipeline itself.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import grid_fem as fem
from . import polarization as pol
from .exterior import build_graded_grid
from .inclusion import build_inclusion, disk_shape
from .tdmap import finite_eps_check

log = logging.getLogger(__name__)

DISK_P1 = (1.0 - 0.05) / (1.0 + 0.05)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _gauss(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def l2_error(u, exact, n_gauss=3):
    """``||u_h - exact||_L2`` with tensor Gauss quadrature on every element."""
    grid = u.grid
    t, w = _gauss(n_gauss)
    v = u.values
    hx, hy = grid.hx, grid.hy
    total = 0.0
    for a, wa in zip(t, w):
        for b, wb in zip(t, w):
            uh = ((1 - a) * (1 - b) * v[:-1, :-1] + (1 - a) * b * v[:-1, 1:]
                  + a * (1 - b) * v[1:, :-1] + a * b * v[1:, 1:])
            X = grid.x[:-1, None] + a * hx[:, None]
            Y = grid.y[None, :-1] + b * hy[None, :]
            total += wa * wb * np.sum((uh - exact(X, Y)) ** 2 * hx[:, None] * hy[None, :])
    return float(np.sqrt(total))


def manufactured_orders(cells=(50, 100, 200), params=fem.SolveParams()):
    """L2 errors and observed orders for ``u = cos(pi x) cos(pi y)`` on the unit square."""
    def exact(x, y):
        return np.cos(np.pi * x) * np.cos(np.pi * y)

    c = 1.0 + 2.0 * params.alpha * params.lambda_out * np.pi ** 2
    errors = []
    for n in cells:
        grid = fem.Grid2D.uniform(n)
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        u = fem.solve_state(fem.ScalarField(grid, c * exact(X, Y)), params)
        errors.append(l2_error(u, exact))
    errors = np.array(errors)
    h = 1.0 / np.array(cells, dtype=float)
    orders = np.log(errors[:-1] / errors[1:]) / np.log(h[:-1] / h[1:])
    return errors, orders


def suite_disk(params, cache_dir=None, grid=None):
    t0 = time.perf_counter()
    data = pol.load_or_compute(disk_shape(64), params, cache_dir, grid)
    rel = np.abs(data.P1 - DISK_P1 * np.eye(2)).max() / DISK_P1
    ok = rel < 0.05 and not np.any(data.X) and np.abs(data.P2).max() < pol.TOL_SYM
    detail = (f"P1 diag {np.diag(data.P1).round(5).tolist()} vs {DISK_P1:.6f} (max rel {rel:.3%}), "
              f"|X|max {np.abs(data.X).max():.1e}, |P2|max {np.abs(data.P2).max():.1e}")
    return [Check("disk polarization", bool(ok), detail, time.perf_counter() - t0)]


def suite_symmetry(params, cache_dir=None, grid=None):
    out = []
    for angles in ([0, 180], [90, 270], [0, 90, 180, 270], [45, 135, 225, 315]):
        t0 = time.perf_counter()
        data = pol.load_or_compute(build_inclusion(angles), params, cache_dir, grid)
        p2 = float(np.abs(data.P2).max())
        ok = not np.any(data.X) and p2 < pol.TOL_SYM
        out.append(Check(f"symmetry null {data.shape_id}", ok,
                         f"|X|max {np.abs(data.X).max():.1e}, |P2|max {p2:.1e}",
                         time.perf_counter() - t0))
    return out


def suite_manufactured(params):
    t0 = time.perf_counter()
    errors, orders = manufactured_orders(params=params)
    ok = bool(np.all(orders >= 1.9))
    return [Check("manufactured convergence", ok,
                  f"L2 errors {[f'{e:.3e}' for e in errors]}, orders {orders.round(3).tolist()}",
                  time.perf_counter() - t0)]


def suite_finite_eps(params, cache_dir=None, grid=None, z=(0.5, 0.5)):
    t0 = time.perf_counter()
    shape = build_inclusion([0, 90])
    data = pol.load_or_compute(shape, params, cache_dir, grid)
    rep = finite_eps_check(shape, data, z, params=params)
    detail = (f"|r1-dJ| {rep.gap1.round(8).tolist()}, |r2-d2J| {rep.gap2.round(8).tolist()}, "
              f"final rel gap {rep.rel_gap1[-1]:.3f}")
    return [Check("finite-eps expansion", rep.ok(), detail, time.perf_counter() - t0)]


SUITES = ("disk", "symmetry", "manufactured", "finite-eps")


def run_all(params=fem.SolveParams(), cache_dir=None, suites=SUITES):
    grid = build_graded_grid()
    checks = []
    for name in suites:
        if name == "disk":
            checks += suite_disk(params, cache_dir, grid)
        elif name == "symmetry":
            checks += suite_symmetry(params, cache_dir, grid)
        elif name == "manufactured":
            checks += suite_manufactured(params)
        elif name == "finite-eps":
            checks += suite_finite_eps(params, cache_dir, grid)
        else:
            raise ValueError(f"unknown suite {name!r}")
    return checks
