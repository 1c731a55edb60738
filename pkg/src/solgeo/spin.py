"""Spin route: unit-vector fields, the isotropic Landau-Lifshitz equation and its Lax pair.

Matrix form uses ``S = s . sigma`` (so ``S^2 = I`` for unit s); the LLE reads
``S_t = (1/2i)[S, S_xx]``, equivalently ``s_t = s x s_xx``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .algebra import CurvatureTriple, commutator, spin_matrix
from .fields import Axis, Field, GridSpec, ResidualReport, partial, second_partial
from .reductions import mmlxvi_constraint
from .sdym import GaugePotential, gauge_transform
from .zerocurvature import ConnectionSet, wavefunction_path_check, zc_residual

UNIT_TOL = 1e-10
NORMALIZATIONS = ("pauli", "su2")


@dataclass(frozen=True, eq=False)
class SpinField(Field):
    """Unit 3-vector per node; ``n`` is the constant from ``k^2 + sigma^2 + tau^2 = n^2``."""

    n: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.value_shape != (3,):
            raise ValueError(f"spin field needs 3-vector values, got {self.value_shape}")

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=-1) - 1)))

    def check_unit(self, tol: float = UNIT_TOL) -> None:
        d = self.norm_drift()
        if d > tol:
            raise ValueError(f"spin field is not unit length (max drift {d:.3e})")

    def matrix(self) -> Field:
        v = self.values
        return Field(self.grid, spin_matrix(v[..., 0], v[..., 1], v[..., 2]))


def _vec(S) -> np.ndarray:
    return S.values if isinstance(S, Field) else np.asarray(S)


def spin_from_curvatures(c: CurvatureTriple, n: float, grid: GridSpec | None = None) -> SpinField | np.ndarray:
    """``S = (k, sigma, tau) / n``; rejects data violating the sphere constraint."""
    if not n > 0:
        raise ValueError("n must be positive")
    ok, dev = mmlxvi_constraint(c.k, c.sigma, c.tau, n)
    if not ok:
        raise ValueError(f"k^2 + tau^2 + sigma^2 = n^2 violated (max relative deviation {dev:.3e})")
    k, s, t = (np.asarray(v.values if isinstance(v, Field) else v, dtype=float) for v in (c.k, c.sigma, c.tau))
    vec = np.stack(np.broadcast_arrays(k, s, t), axis=-1) / n
    if grid is None:
        g = next((v.grid for v in (c.k, c.sigma, c.tau) if isinstance(v, Field)), None)
        if g is None:
            return vec
        grid = g
    return SpinField(grid, np.broadcast_to(vec, grid.shape + (3,)).copy(), n)


def lle_rhs(S: Field, x: str = "x") -> Field:
    """``S_t = S x S_xx`` with the three-point second difference along ``x``."""
    sxx = second_partial(S, x)
    return Field(S.grid, np.cross(S.values, sxx.values))


# ---------------------------------------------------------------- integration

def _lap_periodic(s: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(s, -1, 0) - 2 * s + np.roll(s, 1, 0)) / (h * h)


def _cayley(s: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Rotate each s so that ``s' - s = (s + s') x w / 2`` (exact norm preservation)."""
    ws = np.cross(w, s)
    c = 1.0 / (1.0 + 0.25 * np.sum(w * w, axis=-1, keepdims=True))
    return s + c * (-ws + 0.5 * np.cross(w, ws))


def stable_dt(h: float) -> float:
    return h * h / 2


def lle_integrate(S0, T: float, dt: float, h: float | None = None, save_every: int = 1,
                  n: float = 1.0, tol: float = 1e-14, max_iter: int = 60,
                  x: str = "x", t: str = "t") -> SpinField:
    """Implicit-midpoint LLE on a periodic line.

    Each step rotates every spin about the midpoint effective field
    ``H = (S + S')_xx / 2``; the rotation is applied in Cayley form so ``|S|``
    is preserved exactly and the midpoint rule keeps the discrete exchange
    energy. ``H`` is found by fixed-point iteration, which contracts for
    ``dt <= h^2 / 2``. The step count is ``ceil(T / dt)`` with dt shrunk to
    land on T. Returns snapshots every ``save_every`` steps on an (x, t) grid.
    """
    if isinstance(S0, Field):
        if S0.grid.ndim != 1:
            raise ValueError("initial spin line must be one-dimensional")
        ax = S0.grid.axes[0]
        h, x0, s = ax.spacing, ax.origin, np.array(S0.values, dtype=float)
        x = ax.name
    else:
        if h is None:
            raise ValueError("spacing h is required for raw arrays")
        x0, s = 0.0, np.array(S0, dtype=float)
    drift = float(np.max(np.abs(np.linalg.norm(s, axis=-1) - 1)))
    if drift > UNIT_TOL:
        raise ValueError(f"initial spin is not unit length (drift {drift:.3e})")
    if dt > stable_dt(h):
        raise ValueError(f"dt = {dt:.3e} exceeds the stability bound h^2/2 = {stable_dt(h):.3e}")
    if T <= 0:
        raise ValueError("duration must be positive")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    nsave = steps // save_every + 1
    out = np.empty((s.shape[0], nsave, 3))
    out[:, 0] = s
    prev = None
    k = 1
    for step in range(1, steps + 1):
        # second-order predictor, then fixed point on the midpoint field
        guess = 2 * s - prev if prev is not None else _cayley(s, dt * _lap_periodic(s, h))
        for _ in range(max_iter):
            new = _cayley(s, dt * _lap_periodic(0.5 * (s + guess), h))
            delta = np.max(np.abs(new - guess))
            guess = new
            if delta <= tol:
                break
        prev, s = s, guess
        if step % save_every == 0:
            out[:, k] = s
            k += 1
    out = out[:, :k]
    if out.shape[1] < 3:
        raise ValueError("need at least three saved snapshots; lower save_every")
    grid = GridSpec((Axis(x, out.shape[0], h, x0, periodic=True),
                     Axis(t, out.shape[1], dt * save_every, 0.0, periodic=False)), "periodic")
    return SpinField(grid, out, n)


def exchange_energy(S, h: float) -> np.ndarray:
    """``sum |D+ S|^2 h`` along axis 0 (per snapshot if more axes follow)."""
    v = _vec(S)
    d = (np.roll(v, -1, 0) - v) / h
    return np.sum(d * d, axis=(0, -1)) * h


def helix(x, t, theta: float, k: float = 1.0, omega: float | None = None) -> np.ndarray:
    """Precessing helix ``phi = k x - omega t``; omega defaults to ``k^2 cos(theta)``."""
    omega = k * k * math.cos(theta) if omega is None else omega
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    phi = k * x - omega * t
    st = math.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.full(phi.shape, math.cos(theta))], axis=-1)


def discrete_helix_rate(theta: float, k: float, h: float) -> float:
    return (2 - 2 * math.cos(k * h)) / (h * h) * math.cos(theta)


def precession_rate(S: SpinField, k: float = 1.0, x: str = "x", t: str = "t") -> float:
    """Measured ``omega`` with ``phi(x, t) = k x - omega t``, from the unwrapped
    in-plane phase, averaged over nodes."""
    g = S.grid
    v = np.moveaxis(S.values, (g.index(x), g.index(t)), (0, 1))
    phase = np.unwrap(np.angle(v[..., 0] + 1j * v[..., 1]), axis=1)
    T = g.spacing(t) * (v.shape[1] - 1)
    return float(-np.mean(phase[:, -1] - phase[:, 0]) / T)


def trajectory_to_csv(S: SpinField, path, x: str = "x", t: str = "t") -> None:
    g = S.grid
    v = np.moveaxis(S.values, (g.index(x), g.index(t)), (0, 1))
    xs, ts = g.axis(x).nodes, g.axis(t).nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "S1", "S2", "S3"])
        for j, tv in enumerate(ts):
            for i, xv in enumerate(xs):
                w.writerow([repr(float(xv)), repr(float(tv))] + [repr(float(c)) for c in v[i, j]])


# ---------------------------------------------------------------- matrix route

def _mu(n: float, normalization: str) -> complex:
    if normalization == "pauli":
        return n
    if normalization == "su2":
        return n / 2j
    raise ValueError(f"unknown normalization {normalization!r}; choose from {NORMALIZATIONS}")


def lle_u_matrix(S: Field, n: float | None = None, normalization: str = "pauli") -> Field:
    n = getattr(S, "n", 1.0) if n is None else n
    return _matrix(S) * _mu(n, normalization)


def _matrix(S: Field) -> Field:
    v = S.values
    return Field(S.grid, spin_matrix(v[..., 0], v[..., 1], v[..., 2]))


def lle_v_matrix(S: Field, n: float | None = None, normalization: str = "pauli", x: str = "x",
                 scheme: str = "central2") -> Field:
    """``V = -i n S S_x - 2 i n^2 S`` (pauli). With ``mu = n`` or ``n/2i`` the
    general form is ``V = alpha S S_x + 2 mu alpha S``, ``alpha = -i mu``."""
    n = getattr(S, "n", 1.0) if n is None else n
    mu = _mu(n, normalization)
    alpha = -1j * mu
    Sm = _matrix(S)
    Sx = partial(Sm, x, scheme)
    return (Sm @ Sx) * alpha + Sm * (2 * mu * alpha)


def m0_equivalence_residual(S: Field, n: float | None = None, normalization: str = "pauli",
                            x: str = "x", t: str = "t", scheme: str = "central2") -> ResidualReport:
    """The zero-curvature form ``S_t - V_x / mu + [S, V]`` against the LLE form
    ``S_t - (1/2i)[S, S_xx]``; their difference vanishes for any unit S."""
    n = getattr(S, "n", 1.0) if n is None else n
    mu = _mu(n, normalization)
    Sm = _matrix(S)
    V = lle_v_matrix(S, n, normalization, x, scheme)
    St = partial(Sm, t, scheme)
    Sxx = second_partial(Sm, x)
    r_zc = St - partial(V, x, scheme) / mu + Field(S.grid, commutator(Sm.values, V.values))
    r_lle = St - Field(S.grid, commutator(Sm.values, Sxx.values)) / 2j
    rep = ResidualReport(meta={"n": n, "normalization": normalization, "h": S.grid.spacing(x)})
    rep.add("zero-curvature", r_zc)
    rep.add("lle", r_lle)
    rep.add("difference", r_zc - r_lle)
    return rep


def lle_connection(S: Field, n: float | None = None, normalization: str = "pauli", x: str = "x",
                   t: str = "t", flip_v: bool = False) -> ConnectionSet:
    U = lle_u_matrix(S, n, normalization)
    V = lle_v_matrix(S, n, normalization, x)
    return ConnectionSet({x: U, t: -V if flip_v else V})


def lle_lax_check(S: Field, n: float | None = None, normalization: str = "pauli", x: str = "x",
                  t: str = "t", flip_v: bool = False, check_flat: bool = True) -> ResidualReport:
    """Path independence of ``psi_x = U psi``, ``psi_t = V psi`` with ``U = mu S``."""
    conns = lle_connection(S, n, normalization, x, t, flip_v)
    rep = wavefunction_path_check(conns, order=[x, t], check_flat=check_flat)
    rep.add("zero-curvature", zc_residual(conns[x], conns[t], x, t))
    rep.meta.update({"n": getattr(S, "n", 1.0) if n is None else n, "normalization": normalization})
    return rep


def gauge_frame_transform(Cp: Field, Gp: Field, E, x: str = "x", t: str = "t",
                          scheme: str = "central2") -> tuple[Field, Field]:
    """``C = E^-1 C' E - E^-1 E_x``, ``G = E^-1 G' E - E^-1 E_t``."""
    A = gauge_transform(GaugePotential({x: Cp, t: Gp}), E, scheme)
    return A[x], A[t]
