"""Integration of linear systems ``Y_s = A(s) Y`` along grid lines.

Two steppers:

* ``"exp"`` -- ``Y_{i+1} = expm(h (A_i + A_{i+1}) / 2) Y_i``. Exact for constant
  A and second order in general; stays on the group generated by A.
* ``"rk4"`` -- classical RK4 with the midpoint coefficient taken as the node
  average. Used where group structure is handled by a separate projection.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .fields import Field, GridSpec


def _steps_exp(coef: np.ndarray, seed: np.ndarray, h: float) -> np.ndarray:
    """coef: (n, ..., d, d) along the line; seed: (..., d, m). Returns (n, ..., d, m)."""
    n = coef.shape[0]
    out = np.empty((n,) + np.broadcast_shapes(coef.shape[1:-2], seed.shape[:-2]) + seed.shape[-2:],
                   dtype=np.result_type(coef, seed))
    y = np.broadcast_to(seed, out.shape[1:]).copy()
    out[0] = y
    mids = (coef[1:] + coef[:-1]) * (h / 2)
    steps = expm(mids.reshape((-1,) + mids.shape[-2:])).reshape(mids.shape)
    for i in range(n - 1):
        y = steps[i] @ y
        out[i + 1] = y
    return out


def _steps_rk4(coef: np.ndarray, seed: np.ndarray, h: float,
               project: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    n = coef.shape[0]
    out = np.empty((n,) + np.broadcast_shapes(coef.shape[1:-2], seed.shape[:-2]) + seed.shape[-2:],
                   dtype=np.result_type(coef, seed))
    y = np.broadcast_to(seed, out.shape[1:]).copy()
    out[0] = y
    for i in range(n - 1):
        a0, a1 = coef[i], coef[i + 1]
        am = (a0 + a1) / 2
        k1 = a0 @ y
        k2 = am @ (y + h / 2 * k1)
        k3 = am @ (y + h / 2 * k2)
        k4 = a1 @ (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if project is not None:
            y = project(y)
        out[i + 1] = y
    return out


def transport_axis(coef: Field, axis: str, seed, method: str = "exp", project=None) -> Field:
    """Integrate ``Y_axis = A Y`` along ``axis`` for every transverse line.

    ``seed`` is either one matrix (used on every line) or an array shaped like
    the grid with ``axis`` removed, followed by the matrix dims. Lines start at
    the first node of ``axis``.
    """
    g = coef.grid
    ax = g.index(axis)
    h = g.spacing(axis)
    c = np.moveaxis(coef.values, ax, 0)
    seed = np.asarray(seed)
    if method == "exp":
        out = _steps_exp(c, seed, h)
    elif method == "rk4":
        out = _steps_rk4(c, seed, h, project)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.broadcast_to(out, c.shape[:-2] + out.shape[-2:])
    return Field(g, np.moveaxis(out, 0, ax).copy())


def transport_path(coefs: dict[str, Field], seed, order: Sequence[str], method: str = "exp",
                   project=None) -> Field:
    """Fill the grid by transporting ``seed`` from the origin along ``order``.

    The value at node (i1, i2, ...) is reached by moving along order[0] first
    (other indices 0), then order[1], and so on. Every grid axis must appear.
    """
    grid = next(iter(coefs.values())).grid
    if sorted(order) != sorted(grid.names):
        raise ValueError(f"path order {list(order)} must cover grid axes {grid.names}")
    seed = np.asarray(seed)
    nd = grid.ndim
    # current holds values on the sub-grid spanned by the axes done so far,
    # stored with singleton dims for the rest.
    current = None
    done: list[int] = []
    for name in order:
        ax = grid.index(name)
        c = coefs[name].values
        # restrict coefficients to index 0 on axes not yet reached
        sl = tuple(slice(None) if (i in done or i == ax) else slice(0, 1) for i in range(nd))
        c = c[sl]
        if current is None:
            s = seed
        else:
            s = current  # already indexed 0..0 along ax (singleton)
            s = np.take(s, 0, axis=ax)
        cm = np.moveaxis(c, ax, 0)
        if current is not None:
            s = np.asarray(s)
        if method == "exp":
            out = _steps_exp(cm, s, grid.spacing(name))
        else:
            out = _steps_rk4(cm, s, grid.spacing(name), project)
        out = np.broadcast_to(out, cm.shape[:-2] + out.shape[-2:])
        current = np.moveaxis(out, 0, ax)
        done.append(ax)
    return Field(grid, np.ascontiguousarray(current))


def corner_value(f: Field) -> np.ndarray:
    return f.values[tuple(-1 for _ in range(f.grid.ndim))]


def line_grid(name: str, n: int, spacing: float, origin: float = 0.0) -> GridSpec:
    from .fields import Axis
    return GridSpec((Axis(name, n, spacing, origin),), boundary="one-sided")
