"""Moving-frame integration, frame compatibility and curve reconstruction.

A frame field stores the triad as the rows of a ``(d, d)`` matrix per node
(``d = 3`` in space, ``d = 2`` in the plane case), so the structure
equations read ``E_a = A_a E``.
"""
from __future__ import annotations

import itertools
import warnings
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .algebra import gram, metric
from .fields import Field, ResidualReport, partial
from .transport import transport_axis, transport_path


class FrameWarning(UserWarning):
    pass


class CFLError(ValueError):
    pass


ORTHO_TOL = 1e-12
# RK4 stability limit on the imaginary axis
RK4_IMAG_LIMIT = 2 * np.sqrt(2)


def check_orthonormal(frame, beta: int = 1, tol: float = ORTHO_TOL) -> float:
    frame = np.asarray(frame)
    d = frame.shape[-1]
    dev = float(np.max(np.abs(gram(frame, beta) - metric(d, beta))))
    if dev > tol:
        raise ValueError(f"seed frame is not orthonormal (Gram deviation {dev:.3e})")
    return dev


def reproject(frames: np.ndarray, beta: int = 1) -> np.ndarray:
    """Gram-Schmidt of the rows against ``diag(beta, 1, ...)`` with target norms (beta, 1, ...)."""
    f = np.array(frames, dtype=float, copy=True)
    eta = np.diag(metric(f.shape[-1], beta))
    ip = lambda a, b: np.sum(a * b * eta, axis=-1)
    d = f.shape[-2]
    for i in range(d):
        v = f[..., i, :]
        for j in range(i):
            u = f[..., j, :]
            v = v - (ip(v, u) / ip(u, u))[..., None] * u
        f[..., i, :] = v / np.sqrt(np.abs(ip(v, v)))[..., None]
    return f


def gram_drift(frames: Field | np.ndarray, beta: int = 1) -> float:
    v = frames.values if isinstance(frames, Field) else np.asarray(frames)
    d = v.shape[-1]
    return float(np.max(np.abs(gram(v, beta) - metric(d, beta))))


def integrate_frame_axis(frame0, coeffs: Field, axis: str, beta: int = 1,
                         method: str = "exp") -> Field:
    """Propagate the triad along ``axis`` from the first node.

    ``coeffs`` is the matrix field of frame coefficients (from
    :func:`~solgeo.algebra.so3_from_triple` or
    :func:`~solgeo.algebra.plane_generator`). Each step applies the
    exponential of the midpoint-averaged coefficient. For beta = -1 the
    exponential stepper is replaced by RK4 with metric re-projection and a
    :class:`FrameWarning` is emitted.
    """
    frame0 = np.asarray(frame0, dtype=float)
    check_orthonormal(frame0, beta)
    if beta == -1:
        if method == "exp":
            warnings.warn("beta=-1: rotation-exact stepper unavailable, using RK4 + re-projection",
                          FrameWarning, stacklevel=2)
        return transport_axis(coeffs, axis, frame0, "rk4", project=lambda y: reproject(y, -1))
    if method == "rk4":
        return transport_axis(coeffs, axis, frame0, "rk4", project=lambda y: reproject(y, 1))
    return transport_axis(coeffs, axis, frame0, "exp")


def integrate_frame_field(frame0, coeffs: Mapping[str, Field], order: Sequence[str],
                          beta: int = 1) -> Field:
    """Frame field on a multi-axis grid, reached from the origin along ``order``."""
    frame0 = np.asarray(frame0, dtype=float)
    check_orthonormal(frame0, beta)
    if beta == -1:
        return transport_path(dict(coeffs), frame0, order, "rk4", project=lambda y: reproject(y, -1))
    return transport_path(dict(coeffs), frame0, order, "exp")


def frame_compatibility_residual(frames: Field, coeffs: Mapping[str, Field],
                                 scheme: str = "central2") -> ResidualReport:
    """Cross-derivative compatibility of a frame field.

    For every axis pair (a, b) reports ``d_b(A_a E) - d_a(A_b E)``, the
    discrete form of ``d_b d_a E = d_a d_b E`` under ``E_a = A_a E``; it is
    ``(A_a,b - A_b,a + [A_a, A_b]) E`` up to discretisation error. Per axis it
    also reports the structure residual ``d_a E - A_a E``.
    """
    axes = [a for a in frames.grid.names if a in coeffs]
    if len(axes) < 2:
        raise ValueError("compatibility needs a frame field over at least two axes")
    rep = ResidualReport(meta={"axes": axes})
    flux = {a: coeffs[a] @ frames for a in axes}
    for a in axes:
        rep.add(f"structure_{a}", partial(frames, a, scheme) - flux[a])
    for a, b in itertools.combinations(axes, 2):
        rep.add(f"compat_{a}{b}", partial(flux[a], b, scheme) - partial(flux[b], a, scheme))
    return rep


def integrate_mmlxviii(boundary, coeff: Field, param: float, march: str, transverse: str,
                       beta: int = 1, cfl_limit: float = RK4_IMAG_LIMIT) -> Field:
    """Solve ``E_march = param * E_transverse + C E`` by the method of lines.

    ``boundary`` gives the frames on the first ``march`` node (one matrix per
    transverse node, or one matrix for all). The transverse derivative is the
    periodic central difference, the march uses RK4 with node-averaged C at
    half steps. ``param = 0`` reduces to :func:`integrate_frame_axis`.
    """
    if np.iscomplexobj(param) and np.imag(param) != 0:
        raise ValueError("frame transport is defined for real parameters only")
    param = float(np.real(param))
    g = coeff.grid
    if g.ndim != 2 or set(g.names) != {march, transverse}:
        raise ValueError(f"coefficient grid must be exactly ({march}, {transverse})")
    bnd = np.asarray(boundary, dtype=float)
    check_orthonormal(bnd, beta, tol=1e-10)
    if param == 0.0:
        return integrate_frame_axis(bnd if bnd.ndim == 2 else bnd, coeff, march, beta)

    hm, ht = g.spacing(march), g.spacing(transverse)
    ratio = abs(param) * hm / ht
    if ratio > cfl_limit:
        raise CFLError(f"step ratio |a| h_march / h_transverse = {ratio:.3f} exceeds {cfl_limit:.3f}")
    if not g.axis_periodic(transverse):
        raise ValueError("method-of-lines transport needs a periodic transverse axis")

    im, it = g.index(march), g.index(transverse)
    c = np.moveaxis(coeff.values, (im, it), (0, 1))  # (nm, nt, d, d)
    nm, nt = c.shape[:2]
    d = c.shape[-1]
    y = np.broadcast_to(bnd, (nt, d, d)).astype(float).copy()

    def rhs(yv, cv):
        dy = (np.roll(yv, -1, 0) - np.roll(yv, 1, 0)) / (2 * ht)
        return param * dy + cv @ yv

    out = np.empty((nm, nt, d, d))
    out[0] = y
    for i in range(nm - 1):
        c0, c1 = c[i], c[i + 1]
        cm = (c0 + c1) / 2
        k1 = rhs(y, c0)
        k2 = rhs(y + hm / 2 * k1, cm)
        k3 = rhs(y + hm / 2 * k2, cm)
        k4 = rhs(y + hm * k3, c1)
        y = y + hm / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return Field(g, np.moveaxis(out, (0, 1), (im, it)).copy())


def reconstruct_curve(frames: Field, axis: str | None = None) -> np.ndarray:
    """Positions ``r`` with ``r_s = e1``, ``r(0) = 0``, by cumulative trapezoid."""
    g = frames.grid
    if axis is None:
        if g.ndim != 1:
            raise ValueError("reconstruct_curve needs a 1-D frame line")
        axis = g.names[0]
    e1 = frames.values[..., 0, :]
    return cumulative_trapezoid(e1, dx=g.spacing(axis), axis=g.index(axis), initial=0)


def helix_parameters(k: float, tau: float) -> tuple[float, float]:
    """(radius, pitch) of the constant-curvature-and-torsion curve."""
    s = k * k + tau * tau
    return k / s, 2 * np.pi * tau / s


def curve_to_csv(points: np.ndarray, path) -> None:
    import csv

    pts = np.asarray(points)
    cols = ["x", "y", "z"][: pts.shape[-1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for p in pts.reshape(-1, pts.shape[-1]):
            w.writerow([repr(float(v)) for v in p])
