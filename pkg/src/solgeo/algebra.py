"""Small-matrix constructions shared by every other module.

All builders broadcast: scalar inputs give a single ``(d, d)`` matrix, array
inputs give a stack ``(..., d, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


@dataclass(frozen=True)
class CurvatureTriple:
    """Normal curvature k, geodesic curvature sigma, geodesic torsion tau."""

    k: object
    sigma: object
    tau: object
    beta: int = 1

    def __post_init__(self):
        if self.beta not in (1, -1):
            raise ValueError(f"beta must be +1 or -1, got {self.beta}")


@dataclass(frozen=True)
class CoefficientTriple:
    c1: object
    c2: object
    c3: object


def _stack(entries):
    rows = [np.stack(np.broadcast_arrays(*r), axis=-1) for r in entries]
    return np.stack(np.broadcast_arrays(*rows), axis=-2)


def so3_from_triple(t, beta: int | None = None) -> np.ndarray:
    """3x3 frame coefficient matrix.

    For a :class:`CurvatureTriple` the layout is
    ``[[0, k, -s], [-b k, 0, t], [b s, -t, 0]]``; a :class:`CoefficientTriple`
    ``(c1, c2, c3)`` fills the same slots as ``(tau, sigma, k) -> (c1, c2, c3)``,
    i.e. ``[[0, c3, -c2], [-b c3, 0, c1], [b c2, -c1, 0]]``.
    """
    if isinstance(t, CurvatureTriple):
        k, s, tau = t.k, t.sigma, t.tau
        b = t.beta if beta is None else beta
    elif isinstance(t, CoefficientTriple):
        tau, s, k = t.c1, t.c2, t.c3
        b = 1 if beta is None else beta
    else:
        k, s, tau = t
        b = 1 if beta is None else beta
    if b not in (1, -1):
        raise ValueError(f"beta must be +1 or -1, got {b}")
    k, s, tau = (np.asarray(v) for v in (k, s, tau))
    z = np.zeros(np.broadcast(k, s, tau).shape, dtype=np.result_type(k, s, tau, float))
    return _stack([
        [z, k, -s],
        [-b * k, z, tau],
        [b * s, -tau, z],
    ])


def triple_from_so3(m: np.ndarray) -> CurvatureTriple:
    """Inverse of :func:`so3_from_triple` for beta=+1 (reads the upper triangle)."""
    m = np.asarray(m)
    return CurvatureTriple(m[..., 0, 1], -m[..., 0, 2], m[..., 1, 2])


def plane_generator(k, beta: int = 1) -> np.ndarray:
    """2x2 plane-frame coefficient ``[[0, k], [-beta k, 0]]``."""
    k = np.asarray(k)
    z = np.zeros_like(k, dtype=np.result_type(k, float))
    return _stack([[z, k], [-beta * k, z]])


def su2_from_triple(a1, a2, a3) -> np.ndarray:
    """``(1/2i) [[a3, a1 - i a2], [a1 + i a2, -a3]]``.

    With ``(a1, a2, a3) = (k, sigma, tau)`` this is the 2x2 connection of a
    frame with curvatures k, sigma, tau.
    """
    a1, a2, a3 = (np.asarray(v) for v in (a1, a2, a3))
    m = _stack([
        [a3, a1 - 1j * a2],
        [a1 + 1j * a2, -a3],
    ]).astype(complex)
    return m / 2j


def spin_matrix(s1, s2, s3) -> np.ndarray:
    """``S = s1 sx + s2 sy + s3 sz``; squares to ``|s|^2 I``."""
    s1, s2, s3 = (np.asarray(v) for v in (s1, s2, s3))
    return _stack([
        [s3 + 0j, s1 - 1j * s2],
        [s1 + 1j * s2, -s3 + 0j],
    ])


def spin_vector(m: np.ndarray) -> np.ndarray:
    """Components ``(s1, s2, s3)`` of a traceless 2x2 matrix in the Pauli basis."""
    m = np.asarray(m)
    return np.stack([
        (m[..., 0, 1] + m[..., 1, 0]) / 2,
        (m[..., 1, 0] - m[..., 0, 1]) / 2j,
        (m[..., 0, 0] - m[..., 1, 1]) / 2,
    ], axis=-1)


def commutator(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(f"dimension mismatch: {a.shape[-2:]} vs {b.shape[-2:]}")
    return a @ b - b @ a


def metric(dim: int, beta: int = 1) -> np.ndarray:
    """Frame metric ``diag(beta, 1, ...)``."""
    g = np.eye(dim)
    g[0, 0] = beta
    return g


def gram(frames: np.ndarray, beta: int = 1) -> np.ndarray:
    """Gram matrix of frame rows under the ambient metric ``diag(beta, 1, ...)``."""
    frames = np.asarray(frames)
    eta = metric(frames.shape[-1], beta)
    return frames @ eta @ np.swapaxes(frames, -1, -2)
