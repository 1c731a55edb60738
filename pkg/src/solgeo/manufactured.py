"""Seeded smooth periodic functions with analytic derivatives.

Everything here is a low-order Fourier sum with integer wave vectors, so the
same underlying function can be resampled on any refinement of a 2*pi-periodic
grid. The random draws depend only on the seed.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .fields import Field, GridSpec

Coords = Mapping[str, object]


def _phase(coords: Coords, names, k, phi):
    out = phi
    for name, kk in zip(names, k):
        if kk:
            out = out + kk * np.asarray(coords[name], dtype=float)
    return out


def generic_wave_vectors(k: np.ndarray, want: int) -> bool:
    """Full rank ``want`` overall and rank 2 on every pair of columns (axes)."""
    k = np.asarray(k, dtype=float)
    if np.linalg.matrix_rank(k) < want:
        return False
    if k.shape[0] < 2:
        return True
    return all(np.linalg.matrix_rank(k[:, [i, j]]) == 2
               for i in range(k.shape[1]) for j in range(i + 1, k.shape[1]))


class FourierMatrix:
    """``base + sum_m C_m cos(k_m . X + phi_m)`` over named coordinates.

    ``kind`` projects the coefficients: "general" (complex), "real",
    "antihermitian" or "antisymmetric" (real). Wave-vector components are drawn
    from ``{-kmax..kmax}`` with every axis present in at least one mode.
    The coefficient norms sum to ``amplitude``, so for base = I and
    amplitude < 1 the function is invertible everywhere.
    """

    def __init__(self, names: Sequence[str], dim: int, seed: int = 0, modes: int = 3,
                 amplitude: float = 0.5, kmax: int = 1, kind: str = "general", base=None):
        rng = np.random.default_rng(seed)
        self.names = tuple(names)
        self.dim = dim
        self.kind = kind
        # redraw until the wave vectors are generic: full rank overall and on
        # every pair of axes, so neither the function nor any plane slice of it
        # secretly depends on fewer coordinate combinations than it has axes
        want = min(modes, len(self.names))
        for _ in range(1000):
            ks = []
            while len(ks) < modes:
                k = rng.integers(-kmax, kmax + 1, size=len(self.names))
                if np.any(k):
                    ks.append(k)
            for i in range(len(self.names)):
                if not any(k[i] for k in ks):
                    ks[i % modes][i] = 1
            if generic_wave_vectors(np.array(ks), want):
                break
        self.k = np.array(ks)
        self.phi = rng.uniform(0, 2 * np.pi, size=modes)
        cs = rng.normal(size=(modes, dim, dim)) + 1j * rng.normal(size=(modes, dim, dim))
        if kind == "real":
            cs = cs.real
        elif kind == "antihermitian":
            cs = (cs - np.conj(np.swapaxes(cs, -1, -2))) / 2
        elif kind == "antisymmetric":
            cs = cs.real
            cs = (cs - np.swapaxes(cs, -1, -2)) / 2
        elif kind != "general":
            raise ValueError(f"unknown kind {kind!r}")
        norms = np.array([np.linalg.norm(c, 2) for c in cs])
        self.c = cs * (amplitude / norms.sum())
        if base is None:
            base = np.zeros((dim, dim))
        self.base = np.asarray(base)

    def __call__(self, coords: Coords) -> np.ndarray:
        out = self.base
        for k, phi, c in zip(self.k, self.phi, self.c):
            out = out + np.cos(_phase(coords, self.names, k, phi))[..., None, None] * c
        return np.asarray(out)

    def derivative(self, coords: Coords, name: str) -> np.ndarray:
        i = self.names.index(name)
        out = 0.0
        for k, phi, c in zip(self.k, self.phi, self.c):
            if k[i]:
                out = out - k[i] * np.sin(_phase(coords, self.names, k, phi))[..., None, None] * c
        return np.asarray(out) * np.ones((self.dim, self.dim))


class FourierScalar:
    """Real scalar ``offset + sum_m a_m cos(k_m . X + phi_m)``."""

    def __init__(self, names: Sequence[str], seed: int = 0, modes: int = 3,
                 amplitude: float = 1.0, kmax: int = 1, offset: float = 0.0):
        self._m = FourierMatrix(names, 1, seed, modes, amplitude, kmax, kind="real",
                                base=np.full((1, 1), offset))
        self.names = self._m.names

    def __call__(self, coords: Coords) -> np.ndarray:
        return self._m(coords)[..., 0, 0]

    def derivative(self, coords: Coords, name: str) -> np.ndarray:
        return self._m.derivative(coords, name)[..., 0, 0]


class GroupFunction:
    """Smooth invertible matrix function ``g(X)`` with analytic derivatives."""

    names: tuple[str, ...]
    dim: int

    def __call__(self, coords: Coords) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, coords: Coords, name: str) -> np.ndarray:
        raise NotImplementedError

    def sample(self, grid: GridSpec) -> Field:
        return Field(grid, np.broadcast_to(self(grid.coords()), grid.shape + (self.dim, self.dim)).copy())

    def sample_derivative(self, grid: GridSpec, name: str) -> Field:
        d = self.derivative(grid.coords(), name)
        return Field(grid, np.broadcast_to(d, grid.shape + (self.dim, self.dim)).copy())


class NearIdentity(GroupFunction):
    """``g = I + FourierMatrix`` with amplitude < 1: invertible, complex, non-abelian."""

    def __init__(self, names, dim=2, seed=0, modes=3, amplitude=0.5, kmax=1, kind="general"):
        if amplitude >= 1:
            raise ValueError("amplitude must be < 1 to keep g invertible")
        self.f = FourierMatrix(names, dim, seed, modes, amplitude, kmax, kind, base=np.eye(dim))
        self.names, self.dim = self.f.names, dim

    def __call__(self, coords):
        return self.f(coords)

    def derivative(self, coords, name):
        return self.f.derivative(coords, name)


class Cayley(GroupFunction):
    """``g = (I + X)(I - X)^-1`` for a skew generator X.

    X anti-Hermitian gives unitary g; X real antisymmetric gives g in SO(d).
    """

    def __init__(self, names, dim=2, seed=0, modes=3, amplitude=0.8, kmax=1, real=False):
        kind = "antisymmetric" if real else "antihermitian"
        self.x = FourierMatrix(names, dim, seed, modes, amplitude, kmax, kind)
        self.names, self.dim = self.x.names, dim

    def __call__(self, coords):
        x = self.x(coords)
        eye = np.eye(self.dim)
        return np.linalg.solve(np.swapaxes(eye - x, -1, -2), np.swapaxes(eye + x, -1, -2)).swapaxes(-1, -2)

    def derivative(self, coords, name):
        # dg = (I + g) dX (I - X)^-1
        x = self.x(coords)
        g = self(coords)
        eye = np.eye(self.dim)
        dx = self.x.derivative(coords, name)
        left = (eye + g) @ dx
        return np.linalg.solve(np.swapaxes(eye - x, -1, -2), np.swapaxes(left, -1, -2)).swapaxes(-1, -2)


class Composed(GroupFunction):
    """``g(H x)``: a group function of xi evaluated through a linear map."""

    def __init__(self, g: GroupFunction, H, x_names: Sequence[str]):
        self.g = g
        self.H = np.asarray(H, dtype=float)
        self.names = tuple(x_names)
        self.dim = g.dim
        if self.H.shape != (len(g.names), len(self.names)):
            raise ValueError(f"H must be {len(g.names)}x{len(self.names)}")

    def xi(self, coords):
        out = {}
        for j, name in enumerate(self.g.names):
            acc = 0.0
            for i, xn in enumerate(self.names):
                if self.H[j, i]:
                    acc = acc + self.H[j, i] * np.asarray(coords[xn], dtype=float)
            out[name] = acc
        return out

    def __call__(self, coords):
        return self.g(self.xi(coords))

    def derivative(self, coords, name):
        i = self.names.index(name)
        xi = self.xi(coords)
        out = 0.0
        for j, xn in enumerate(self.g.names):
            if self.H[j, i]:
                out = out + self.H[j, i] * self.g.derivative(xi, xn)
        return np.asarray(out) * np.ones((self.dim, self.dim))

    def potential_components(self, coords) -> dict[str, np.ndarray]:
        """``A_xi = g_xi g^-1`` evaluated at ``xi = H x``."""
        xi = self.xi(coords)
        ginv = np.linalg.inv(self.g(xi))
        return {n: self.g.derivative(xi, n) @ ginv for n in self.g.names}


def pure_gauge(g: GroupFunction, grid: GridSpec, names: Sequence[str] | None = None) -> dict[str, Field]:
    """Flat connection ``A_a = g_a g^-1`` sampled on ``grid`` (exact, no differencing).

    ``names`` may include fixed (non-gridded) coordinates; their members are
    sampled too, they just cannot be differentiated on this grid.
    """
    coords = grid.coords()
    ginv = np.linalg.inv(g(coords))
    out = {}
    for name in names or g.names:
        a = g.derivative(coords, name) @ ginv
        out[name] = Field(grid, np.broadcast_to(a, grid.shape + (g.dim, g.dim)).copy())
    return out


def random_integer_map(n: int, seed: int = 0, low: int = -1, high: int = 1) -> np.ndarray:
    """Random invertible integer matrix with entries in [low, high]."""
    rng = np.random.default_rng(seed)
    while True:
        H = rng.integers(low, high + 1, size=(n, n)).astype(float)
        if abs(np.linalg.det(H)) > 0.5:
            return H


def constant_noncommuting(dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return m / np.linalg.norm(m, 2)
