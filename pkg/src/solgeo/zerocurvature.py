"""Zero-curvature residuals, Lax operators and wavefunction transport checks.

Convention: a connection member ``P`` along axis ``a`` enters the linear
system ``psi_a = P psi``; the compatibility of two members is
``P_b - Q_a + [P, Q] = 0``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .algebra import commutator
from .fields import Direction, Field, GridSpec, ResidualReport, derivative, field_norms, partial
from .transport import corner_value, transport_path


class FlatnessWarning(UserWarning):
    pass


class SpectralPoleError(ZeroDivisionError):
    pass


@dataclass
class LaxParameters:
    lam: complex = 0.0
    a: complex = 0.0
    b: complex = 0.0
    e: complex = 0.0
    f: complex = 0.0
    # powers of lambda multiplying e and f in the second operator
    m_powers: tuple[int, int] = (3, 4)


@dataclass
class ConnectionSet:
    """Named connection members, one matrix field per axis."""

    members: dict[str, Field]
    params: LaxParameters | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty connection set")
        fields = list(self.members.values())
        g, d = fields[0].grid, fields[0].dim
        for name, f in self.members.items():
            if f.grid != g:
                raise ValueError(f"member {name!r} lives on a different grid")
            if f.dim != d:
                raise ValueError(f"member {name!r} has dim {f.dim}, expected {d}")

    @property
    def grid(self) -> GridSpec:
        return next(iter(self.members.values())).grid

    @property
    def dim(self) -> int:
        return next(iter(self.members.values())).dim

    @property
    def axes(self) -> list[str]:
        return list(self.members)

    def __getitem__(self, name):
        return self.members[name]

    def scale(self) -> float:
        return max(field_norms(f)[0] for f in self.members.values())


def zc_residual(P: Field, Q: Field, axis_p: Direction, axis_q: Direction,
                scheme: str = "central2") -> Field:
    """``d_q P - d_p Q + [P, Q]`` node-wise.

    Axes may be directions ``{axis: coeff}``; that is how the advective
    systems (``L = d_1 - a d_3 - B0``) reuse this kernel.
    """
    if P.grid != Q.grid:
        raise ValueError("P and Q live on different grids")
    if isinstance(axis_p, str) and isinstance(axis_q, str) and axis_p == axis_q:
        raise ValueError("zero-curvature pair needs two distinct axes")
    return derivative(P, axis_q, scheme) - derivative(Q, axis_p, scheme) + Field(P.grid, commutator(P.values, Q.values))


def pair_label(a: str, b: str) -> str:
    return f"F_{a}{b}"


def mmlxii_residual(conns: ConnectionSet, scheme: str = "central2") -> ResidualReport:
    """One zero-curvature residual per pair of members whose axes are gridded.

    Four gridded members give the six equations of the 3+1 system, three the
    2+1 system and two the single 1+1 equation.
    """
    axes = [a for a in conns.axes if a in conns.grid.names]
    if len(axes) < 2:
        raise ValueError(f"need at least two gridded members, have {axes}")
    rep = ResidualReport(meta={"axes": axes, "scale": conns.scale(), "h": conns.grid.h})
    for a, b in itertools.combinations(axes, 2):
        rep.add(pair_label(a, b), zc_residual(conns[a], conns[b], a, b, scheme))
    return rep


PLANE_EQUATIONS = [
    # label, lhs (field, axis), rhs (field, axis)
    ("k_y=m3_x", ("k", "y"), ("m3", "x")),
    ("k_z=n3_x", ("k", "z"), ("n3", "x")),
    ("m3_z=n3_y", ("m3", "z"), ("n3", "y")),
    ("m3_t=omega3_y", ("m3", "t"), ("omega3", "y")),
    ("n3_t=omega3_z", ("n3", "t"), ("omega3", "z")),
    ("k_t=omega3_x", ("k", "t"), ("omega3", "x")),
]


def plane_residuals(k: Field, m3: Field, omega3: Field, n3: Field | None = None,
                    scheme: str = "central2") -> ResidualReport:
    """Residuals of the scalar plane-case system for every equation whose axes exist."""
    g = k.grid
    names = set(g.names)
    if ("z" in names) != (n3 is not None):
        raise ValueError("n3 must be given exactly when the grid has a z axis")
    for need in ("x", "y"):
        if need not in names:
            raise ValueError(f"plane system needs axis {need!r}")
    fields = {"k": k, "m3": m3, "n3": n3, "omega3": omega3}
    rep = ResidualReport()
    for label, (lf, la), (rf, ra) in PLANE_EQUATIONS:
        if la in names and ra in names and fields[lf] is not None and fields[rf] is not None:
            rep.add(label, partial(fields[lf], la, scheme) - partial(fields[rf], ra, scheme))
    return rep


# ---------------------------------------------------------------- Lax operators

LaxOperator = Callable[[Field], Field]


def covariant(conns: ConnectionSet, axis: str, scheme: str = "central2") -> LaxOperator:
    """``D_axis psi = d_axis psi - A_axis psi``."""
    A = conns[axis]
    return lambda psi: partial(psi, axis, scheme) - A @ psi


def build_lax(conns: ConnectionSet, params: LaxParameters | None = None,
              form: str = "covariant-3+1", scheme: str = "central2",
              xi_axes: Sequence[str] = ("xi1", "xi2", "xi3", "xi4")) -> tuple[LaxOperator, LaxOperator]:
    """Assemble the operator pair ``(L, M)`` of a Lax representation.

    forms:
      covariant-3+1  L = D_x + a l D_y + b l^2 D_z,  M = D_t + e l^p D_y + f l^q D_z
      covariant-2+1  L = D_x + a l D_y,              M = D_t + e l^p D_y
      sdym-null      L = D_1 - l D_3,                M = D_2 - l D_4
    where l is the spectral parameter and (p, q) = ``params.m_powers``.
    """
    p = params or conns.params or LaxParameters()
    lam = p.lam
    have = set(conns.axes) & set(conns.grid.names)

    def need(*axes):
        missing = [a for a in axes if a not in have]
        if missing:
            raise ValueError(f"form {form!r} needs gridded members {missing}")

    def combo(terms):
        ops = [(c, covariant(conns, ax, scheme)) for c, ax in terms if c != 0]

        def apply(psi):
            out = None
            for c, op in ops:
                t = op(psi) if c == 1 else op(psi) * c
                out = t if out is None else out + t
            return out
        return apply

    if form == "covariant-3+1":
        need("x", "y", "z", "t")
        p1, p2 = p.m_powers
        L = combo([(1, "x"), (p.a * lam, "y"), (p.b * lam**2, "z")])
        M = combo([(1, "t"), (p.e * lam**p1, "y"), (p.f * lam**p2, "z")])
    elif form == "covariant-2+1":
        need("x", "y", "t")
        p1 = p.m_powers[0]
        L = combo([(1, "x"), (p.a * lam, "y")])
        M = combo([(1, "t"), (p.e * lam**p1, "y")])
    elif form == "sdym-null":
        x1, x2, x3, x4 = xi_axes
        need(x1, x2, x3, x4)
        L = combo([(1, x1), (-lam, x3)])
        M = combo([(1, x2), (-lam, x4)])
    else:
        raise ValueError(f"unknown Lax form {form!r}")
    return L, M


def mmlxviii_residual(B0: Field, B1: Field, a: complex, b: complex,
                      axes: Sequence[str] = ("xi1", "xi2", "xi3", "xi4"),
                      scheme: str = "central2") -> Field:
    """Compatibility of ``psi_1 = a psi_3 + B0 psi``, ``psi_2 = b psi_4 + B1 psi``:
    ``B0_2 - b B0_4 + a B1_3 - B1_1 + [B0, B1]``."""
    x1, x2, x3, x4 = axes
    return zc_residual(B0, B1, {x1: 1, x3: -a}, {x2: 1, x4: -b}, scheme)


# ---------------------------------------------------------------- transport

NONINVERTIBLE_COND = 1e12


def flatness_check(conns: ConnectionSet, factor: float = 10.0) -> tuple[bool, float, float]:
    """(ok, max residual, bound) with bound ``factor * h^2 * scale``."""
    rep = mmlxii_residual(conns)
    bound = factor * conns.grid.h ** 2 * max(conns.scale(), 1e-300)
    worst = rep.max_linf()
    return worst <= bound, worst, bound


def restrict(conns: ConnectionSet, counts: Mapping[str, int]) -> ConnectionSet:
    """Members cut down to the first ``counts[axis]`` nodes per axis, on an open grid."""
    from .fields import Axis
    g = conns.grid
    axes = tuple(Axis(a.name, int(counts.get(a.name, a.n)), a.spacing, a.origin, False) for a in g.axes)
    sub = GridSpec(axes, "one-sided", g.fixed)
    sl = tuple(slice(0, ax.n) for ax in axes)
    return ConnectionSet({k: Field(sub, f.values[sl].copy()) for k, f in conns.members.items()}, conns.params)


def default_window(grid: GridSpec) -> dict[str, int]:
    """Half a period on periodic axes: spanning the full period would make both
    paths bound the whole torus, where holonomy cancels and the check is blind."""
    return {a.name: a.n // 2 + 1 for a in grid.axes if grid.axis_periodic(a.name)}


def wavefunction_path_check(conns: ConnectionSet, psi0=None, order: Sequence[str] | None = None,
                            check_flat: bool = True, window: Mapping[str, int] | None = None) -> ResidualReport:
    """Transport ``psi`` from the origin to the far corner along ``order`` and
    along the reversed order; report the terminal mismatch.

    ``window`` limits the box per axis (node counts); by default periodic axes
    are cut to half a period.
    """
    g = conns.grid
    order = list(order or [a for a in conns.axes if a in g.names])
    if len(order) < 2:
        raise ValueError("path check needs two or more axes")
    if sorted(order) != sorted(g.names):
        raise ValueError(f"path axes {order} must cover the grid axes {g.names}")
    if check_flat:
        ok, worst, bound = flatness_check(conns)
        if not ok:
            warnings.warn(f"connection not flat to tolerance: residual {worst:.3e} > {bound:.3e}",
                          FlatnessWarning, stacklevel=2)
    box = restrict(conns, default_window(g) if window is None else window)
    sub = {a: box[a] for a in order}
    psi0 = np.eye(conns.dim, dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    fwd = corner_value(transport_path(sub, psi0, order))
    rev = corner_value(transport_path(sub, psi0, order[::-1]))
    for name, val in (("forward", fwd), ("reverse", rev)):
        if not np.all(np.isfinite(val)) or np.linalg.cond(val) > NONINVERTIBLE_COND:
            raise ValueError(f"{name} wavefunction became numerically singular")
    rep = ResidualReport(meta={"order": order, "h": g.h, "box": list(box.grid.shape)})
    nrm = float(np.linalg.norm(fwd - rev))
    rel = nrm / max(float(np.linalg.norm(fwd)), 1e-300)
    # a single terminal matrix: L-inf and L2 coincide
    rep.norms["mismatch"] = (nrm, nrm)
    rep.norms["relative_mismatch"] = (rel, rel)
    return rep


# ---------------------------------------------------------------- spectral expansions

Weight = Union[int, Callable[[complex], complex]]


@dataclass
class SpectralExpansion:
    """Per quantity, a list of ``(weight, coefficient)`` terms.

    An integer weight j means lambda**j; a callable weight is h(lambda).
    """

    terms: dict[str, list[tuple[Weight, object]]] = field(default_factory=dict)

    def add(self, quantity: str, weight: Weight, coeff) -> "SpectralExpansion":
        self.terms.setdefault(quantity, []).append((weight, coeff))
        return self


def chiral_weight(lam: complex) -> complex:
    return 1 / (1 - lam)


def _weight_value(w: Weight, lam: complex) -> complex:
    try:
        v = lam ** w if isinstance(w, int) else w(lam)
    except ZeroDivisionError as exc:
        raise SpectralPoleError(f"weight has a pole at lambda={lam}") from exc
    if not np.all(np.isfinite(v)):
        raise SpectralPoleError(f"weight has a pole at lambda={lam}")
    return v


def eval_expansion(exp: SpectralExpansion, lam: complex) -> dict[str, object]:
    """Evaluate every quantity at ``lam``; missing quantities are zero."""
    out: dict[str, object] = {}
    for q in ("k", "sigma", "tau", "omega1", "omega2", "omega3"):
        total = 0
        for w, c in exp.terms.get(q, []):
            total = total + _weight_value(w, lam) * np.asarray(c)
        out[q] = total
    for q in exp.terms:
        if q not in out:
            out[q] = sum(_weight_value(w, lam) * np.asarray(c) for w, c in exp.terms[q])
    return out


def conns_from_functions(grid: GridSpec, members: Mapping[str, Callable]) -> ConnectionSet:
    coords = grid.coords()
    out = {}
    for k, fn in members.items():
        v = np.asarray(fn(coords))
        out[k] = Field(grid, np.broadcast_to(v, grid.shape + v.shape[-2:]).copy())
    return ConnectionSet(out)
