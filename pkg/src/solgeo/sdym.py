"""Gauge potentials, field strength, self-duality residuals and gauge transforms.

Sign convention: covariant derivatives are ``D = d - A`` (so the pure gauge
``A = g_mu g^-1`` is flat) and the field strength is
``F_mn = d_m A_n - d_n A_m - [A_m, A_n]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import commutator
from .fields import Direction, Field, GridSpec, ResidualReport, derivative, field_norms

XI = ("xi1", "xi2", "xi3", "xi4")
SINGULAR_COND = 1e12


@dataclass
class GaugePotential:
    """Components ``A_mu`` sampled on a grid, with their coordinate derivatives.

    ``derivs[mu]`` says how ``d/d mu`` acts on the grid: an axis name, a
    combination ``{axis: coeff}`` (chain rule through a coordinate map), or
    ``{}`` when nothing depends on ``mu``. By default a component whose name is
    a grid axis differentiates along it and any other is constant in ``mu``.
    """

    components: dict[str, Field]
    derivs: dict[str, Direction] = field(default_factory=dict)

    def __post_init__(self):
        if not self.components:
            raise ValueError("gauge potential needs at least one component")
        fs = list(self.components.values())
        g, d = fs[0].grid, fs[0].dim
        for name, f in self.components.items():
            if f.grid != g:
                raise ValueError(f"component {name!r} lives on a different grid")
            if f.dim != d:
                raise ValueError(f"component {name!r} has dim {f.dim}, expected {d}")
        for name in self.components:
            if name not in self.derivs:
                self.derivs[name] = name if name in g.names else {}

    @property
    def grid(self) -> GridSpec:
        return next(iter(self.components.values())).grid

    @property
    def dim(self) -> int:
        return next(iter(self.components.values())).dim

    @property
    def names(self) -> list[str]:
        return list(self.components)

    def __getitem__(self, name) -> Field:
        return self.components[name]

    def d(self, f: Field, mu: str, scheme: str = "central2") -> Field:
        return derivative(f, self.derivs[mu], scheme)

    @classmethod
    def zeros(cls, grid: GridSpec, dim: int = 2, names: Sequence[str] = XI) -> "GaugePotential":
        z = np.zeros(grid.shape + (dim, dim), dtype=complex)
        return cls({n: Field(grid, z.copy()) for n in names})


@dataclass
class FieldStrength:
    """The components ``F_mn`` for m before n in the potential's order."""

    names: tuple[str, ...]
    parts: dict[tuple[str, str], Field]

    def __getitem__(self, key: tuple[str, str]) -> Field:
        m, n = key
        if m == n:
            f = next(iter(self.parts.values()))
            return Field(f.grid, np.zeros_like(f.values))
        if (m, n) in self.parts:
            return self.parts[(m, n)]
        return -self.parts[(n, m)]

    def norms(self) -> dict[str, tuple[float, float]]:
        return {f"F_{m}{n}": field_norms(f) for (m, n), f in self.parts.items()}


def field_strength(A: GaugePotential, scheme: str = "central2") -> FieldStrength:
    names = tuple(A.names)
    if len(names) < 2:
        raise ValueError("field strength needs two or more components")
    parts = {}
    for m, n in itertools.combinations(names, 2):
        parts[(m, n)] = (A.d(A[n], m, scheme) - A.d(A[m], n, scheme)
                         - Field(A.grid, commutator(A[m].values, A[n].values)))
    return FieldStrength(names, parts)


SD_LABELS = ("F_xi1xi2", "F_xi3xi4", "F_xi1xi4-F_xi2xi3")


def sd_parts(A: GaugePotential, names: Sequence[str] = XI, scheme: str = "central2") -> dict[str, Field]:
    missing = [n for n in names if n not in A.components]
    if missing:
        raise ValueError(f"self-duality needs components {list(names)}; missing {missing}")
    x1, x2, x3, x4 = names
    F = field_strength(GaugePotential({n: A[n] for n in names}, {n: A.derivs[n] for n in names}), scheme)
    return {
        SD_LABELS[0]: F[(x1, x2)],
        SD_LABELS[1]: F[(x3, x4)],
        SD_LABELS[2]: F[(x1, x4)] - F[(x2, x3)],
    }


def sd_residual(A: GaugePotential, names: Sequence[str] = XI, scheme: str = "central2") -> ResidualReport:
    """Norms of the three null-coordinate self-duality equations."""
    parts = sd_parts(A, names, scheme)
    rep = ResidualReport(meta={"scale": max(field_norms(A[n])[0] for n in names), "h": A.grid.h})
    for lab, f in parts.items():
        rep.add(lab, f)
    return rep


def sd_residual_2p1(A: GaugePotential, names: Sequence[str] = XI, scheme: str = "central2") -> ResidualReport:
    """Self-duality with nothing depending on the third null coordinate.

    The grid spans the other three; ``A3`` is an ordinary member field there.
    """
    x1, x2, x3, x4 = names
    for n in (x1, x2, x4):
        if n not in A.grid.names:
            raise ValueError(f"reduced system needs grid axis {n!r}")
    derivs = dict(A.derivs)
    derivs[x3] = {}
    return sd_residual(GaugePotential(dict(A.components), derivs), names, scheme)


def _as_group_field(phi, grid: GridSpec, dim: int) -> tuple[Field, bool]:
    if isinstance(phi, Field):
        return phi, False
    m = np.asarray(phi)
    if m.shape != (dim, dim):
        raise ValueError(f"constant gauge element must be {dim}x{dim}")
    return Field(grid, np.broadcast_to(m, grid.shape + (dim, dim)).copy()), True


def check_invertible(phi: Field, what: str = "gauge element", cond_max: float = SINGULAR_COND) -> float:
    c = np.linalg.cond(phi.values)
    worst = float(np.max(np.where(np.isfinite(c), c, np.inf)))
    if worst > cond_max:
        raise ValueError(f"{what} is singular or ill-conditioned (cond {worst:.3e})")
    return worst


def gauge_transform(A: GaugePotential, phi, scheme: str = "central2") -> GaugePotential:
    """``A'_mu = phi^-1 A_mu phi - phi^-1 d_mu phi``.

    ``phi`` is a matrix field or one constant matrix; for a constant the
    derivative term is dropped exactly rather than differenced.
    """
    phi, const = _as_group_field(phi, A.grid, A.dim)
    check_invertible(phi)
    pinv = phi.inv()
    out = {}
    for mu, a in A.components.items():
        new = pinv @ a @ phi
        if not const:
            new = new - pinv @ A.d(phi, mu, scheme)
        out[mu] = new
    return GaugePotential(out, dict(A.derivs))


def potential_to_json(A: GaugePotential) -> str:
    import json

    from .fields import field_to_json
    payload = {
        "components": {k: json.loads(field_to_json(f)) for k, f in A.components.items()},
        "derivs": {k: (v if isinstance(v, str) else {a: [complex(c).real, complex(c).imag] for a, c in v.items()})
                   for k, v in A.derivs.items()},
    }
    return json.dumps(payload)


def potential_from_json(text: str) -> GaugePotential:
    import json

    from .fields import field_from_json
    d = json.loads(text)
    comps = {k: field_from_json(json.dumps(v)) for k, v in d["components"].items()}
    derivs = {k: (v if isinstance(v, str) else {a: complex(c[0], c[1]) for a, c in v.items()})
              for k, v in d["derivs"].items()}
    return GaugePotential(comps, derivs)
