"""Named reductions and the coordinate maps tying frames, zero curvature and SDYM together."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebra import commutator, su2_from_triple
from .fields import Field, GridSpec, ResidualReport, derivative, field_norms
from .manufactured import Composed, GroupFunction
from .sdym import XI, GaugePotential, field_strength, sd_parts
from .zerocurvature import (ConnectionSet, SpectralExpansion, SpectralPoleError, chiral_weight,
                            eval_expansion, mmlxviii_residual, zc_residual)


class ReductionKind(str, enum.Enum):
    GWE_CMPE = "GWE-CMPE"
    ZS_AKNS = "ZS-AKNS"
    KNWKI = "KNWKI"
    CHIRAL = "ChiralField"
    MMLXVI = "mM-LXVI-constraint"


CONSTRAINT_RTOL = 1e-8


def _val(x):
    return x.values if isinstance(x, Field) else np.asarray(x)


def _like(template, values):
    return Field(template.grid, values) if isinstance(template, Field) else values


def _require(inputs: Mapping, *names):
    missing = [n for n in names if inputs.get(n) is None]
    if missing:
        raise ValueError(f"missing inputs {missing}")
    return [inputs[n] for n in names]


def expansion_for(kind: ReductionKind | str, inputs: Mapping) -> SpectralExpansion:
    """Spectral expansion of (k, sigma, tau, ...) for the scalar-input reductions."""
    kind = ReductionKind(kind)
    exp = SpectralExpansion()
    if kind == ReductionKind.ZS_AKNS:
        p, q = (_val(v) for v in _require(inputs, "p", "q"))
        exp.add("k", 0, 1j * (p + q)).add("sigma", 0, p - q).add("tau", 1, -2.0)
    elif kind == ReductionKind.KNWKI:
        p, q = (_val(v) for v in _require(inputs, "p", "q"))
        exp.add("k", 1, 1j * (p + q)).add("sigma", 1, p - q).add("tau", 1, -2.0)
    elif kind in (ReductionKind.GWE_CMPE, ReductionKind.MMLXVI):
        k, s, t = (_val(v) for v in _require(inputs, "k", "sigma", "tau"))
        exp.add("k", 0, k).add("sigma", 0, s).add("tau", 0, t)
        for w in ("omega1", "omega2", "omega3"):
            if inputs.get(w) is not None:
                exp.add(w, 0, _val(inputs[w]))
    elif kind == ReductionKind.CHIRAL:
        u, v = (_val(x) for x in _require(inputs, "u", "v"))
        exp.add("U", chiral_weight, u).add("V", lambda lam: 1 / (1 + lam), v)
    return exp


def mmlxvi_constraint(k, sigma, tau, n, rtol: float = CONSTRAINT_RTOL) -> tuple[bool, float]:
    """``k^2 + tau^2 + sigma^2 = n^2``: (holds, max relative deviation)."""
    k, sigma, tau = (_val(v) for v in (k, sigma, tau))
    lhs = np.abs(k) ** 2 + np.abs(sigma) ** 2 + np.abs(tau) ** 2
    n2 = np.abs(np.asarray(n)) ** 2
    dev = float(np.max(np.abs(lhs - n2) / np.maximum(n2, 1e-300)))
    return dev <= rtol, dev


def named_connection(kind: ReductionKind | str, inputs: Mapping, lam: complex = 0.0) -> dict:
    """Members ``{"U": ..., "V": ...}`` of a named reduction at spectral parameter ``lam``.

    Only the members the reduction specifies are returned. Inputs may be
    arrays or Fields; outputs follow the type of the first input.
    """
    kind = ReductionKind(kind)
    if kind == ReductionKind.CHIRAL and complex(lam) in (1, -1):
        raise SpectralPoleError(f"chiral-field connection has a pole at lambda={lam}")
    vals = eval_expansion(expansion_for(kind, inputs), lam)
    tmpl = next(v for v in inputs.values() if v is not None)
    if kind == ReductionKind.CHIRAL:
        return {"U": _like(tmpl, vals["U"]), "V": _like(tmpl, vals["V"])}
    if kind == ReductionKind.MMLXVI:
        n = _require(inputs, "n")[0]
        ok, dev = mmlxvi_constraint(vals["k"], vals["sigma"], vals["tau"], n)
        if not ok:
            raise ValueError(f"k^2 + tau^2 + sigma^2 = n^2 violated (max relative deviation {dev:.3e})")
    shape = np.broadcast(*(np.asarray(vals[q]) for q in ("k", "sigma", "tau"))).shape
    U = su2_from_triple(*(np.broadcast_to(vals[q], shape) for q in ("k", "sigma", "tau")))
    out = {"U": _like(tmpl, U)}
    if kind in (ReductionKind.GWE_CMPE, ReductionKind.MMLXVI) and any(
            inputs.get(w) is not None for w in ("omega1", "omega2", "omega3")):
        om = [np.broadcast_to(vals[w], shape) for w in ("omega3", "omega2", "omega1")]
        out["V"] = _like(tmpl, su2_from_triple(*om))
    return out


def as_connection_set(members: Mapping[str, Field], axes=("x", "t")) -> ConnectionSet:
    return ConnectionSet({ax: members[m] for ax, m in zip(axes, ("U", "V")) if m in members})


# ---------------------------------------------------------------- principal chiral field

def chiral_field_residual(u: Field, v: Field, lam: complex, x: str = "x", t: str = "t",
                          scheme: str = "central2") -> ResidualReport:
    """Zero curvature of ``U = u/(1-lam)``, ``V = v/(1+lam)`` plus the two field equations."""
    m = named_connection(ReductionKind.CHIRAL, {"u": u, "v": v}, lam)
    rep = ResidualReport(meta={"lambda": complex(lam), "h": u.grid.h})
    rep.add("zero-curvature", zc_residual(m["U"], m["V"], x, t, scheme))
    half = Field(u.grid, commutator(u.values, v.values) / 2)
    rep.add("u_t+[u,v]/2", derivative(u, t, scheme) + half)
    rep.add("v_x-[u,v]/2", derivative(v, x, scheme) - half)
    return rep


def evolve_chiral(u0, v0, grid: GridSpec, x: str = "x", t: str = "t",
                  tol: float = 1e-14, max_iter: int = 50) -> tuple[Field, Field]:
    """Characteristic (Goursat) solve of ``u_t = -[u,v]/2``, ``v_x = [u,v]/2``.

    ``u0`` gives u on the line t = t0 (one matrix per x node), ``v0`` gives v on
    x = x0. Each node couples its t-predecessor (for u) and x-predecessor (for
    v) through the trapezoid rule; the implicit pair is solved by fixed-point
    iteration, one anti-diagonal at a time.
    """
    if grid.ndim != 2 or set(grid.names) != {x, t}:
        raise ValueError(f"grid must be exactly ({x}, {t})")
    u0, v0 = np.asarray(u0, dtype=complex), np.asarray(v0, dtype=complex)
    nx, nt = grid.axis(x).n, grid.axis(t).n
    hx, ht = grid.spacing(x), grid.spacing(t)
    if u0.shape[0] != nx or v0.shape[0] != nt:
        raise ValueError("boundary data must match the grid lines")
    d = u0.shape[-1]
    u = np.zeros((nx, nt, d, d), dtype=complex)
    v = np.zeros_like(u)
    u[:, 0] = u0
    v[0, :] = v0
    br = lambda a, b: a @ b - b @ a
    for s in range(1, nx + nt - 1):
        i = np.arange(max(0, s - nt + 1), min(nx, s + 1))
        j = s - i
        has_t, has_x = j > 0, i > 0
        # predecessors (clipped indices are unused where the flag is False)
        up = u[i, np.maximum(j - 1, 0)]
        vp_t = v[i, np.maximum(j - 1, 0)]
        vp = v[np.maximum(i - 1, 0), j]
        up_x = u[np.maximum(i - 1, 0), j]
        cu = br(up, vp_t)
        cv = br(up_x, vp)
        uu = np.where(has_t[:, None, None], up, u[i, j])
        vv = np.where(has_x[:, None, None], vp, v[i, j])
        for _ in range(max_iter):
            c = br(uu, vv)
            un = np.where(has_t[:, None, None], up - ht / 4 * (cu + c), uu)
            vn = np.where(has_x[:, None, None], vp + hx / 4 * (cv + c), vv)
            delta = max(np.max(np.abs(un - uu)), np.max(np.abs(vn - vv)))
            uu, vv = un, vn
            if delta <= tol:
                break
        u[i, j], v[i, j] = uu, vv
    ix, it = grid.index(x), grid.index(t)
    order = (ix, it)
    U = np.moveaxis(u, (0, 1), order)
    V = np.moveaxis(v, (0, 1), order)
    return Field(grid, U), Field(grid, V)


# ---------------------------------------------------------------- coordinate maps

@dataclass
class CoordinateMap:
    """Linear map ``xi = H x`` between named coordinate sets.

    ``b[i, j] = d xi_j / d x_i = H[j, i]`` is the Jacobian used for the
    pullback. Derivatives along xi act on x-grids as ``d/d xi_j = sum_i
    D[j, i] d/d x_i`` with D the inverse transpose for square H; non-square
    maps (the 2+1 variants) must supply D explicitly.
    """

    H: np.ndarray
    x_names: tuple[str, ...] = ("x", "y", "z", "t")
    xi_names: tuple[str, ...] = XI
    D: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H)
        self.x_names, self.xi_names = tuple(self.x_names), tuple(self.xi_names)
        if self.H.shape != (len(self.xi_names), len(self.x_names)):
            raise ValueError(f"H must be {len(self.xi_names)}x{len(self.x_names)}")
        if not np.all(np.isfinite(self.H)):
            raise ValueError("H has non-finite entries")
        if self.H.shape[0] == self.H.shape[1]:
            if abs(np.linalg.det(self.H)) < 1e-12:
                raise ValueError("coordinate map H is singular")
            if self.D is None:
                self.D = np.linalg.inv(self.H).T
        else:
            if np.linalg.matrix_rank(self.H) < min(self.H.shape):
                raise ValueError("coordinate map H is rank deficient")
            if self.D is None:
                raise ValueError("non-square maps need explicit xi-derivatives D")
        self.D = np.asarray(self.D)
        # chain rule consistency: d/dx_i = sum_j H[j, i] d/dxi_j
        if not np.allclose(self.H.T @ self.D, np.eye(len(self.x_names)), atol=1e-12):
            raise ValueError("xi-derivatives are inconsistent with H")

    @property
    def jacobian(self) -> np.ndarray:
        return self.H.T

    @property
    def is_linear(self) -> bool:
        return True

    def xi_derivs(self) -> dict[str, dict[str, complex]]:
        return {xn: {x: self.D[j, i] for i, x in enumerate(self.x_names) if self.D[j, i] != 0}
                for j, xn in enumerate(self.xi_names)}

    def compose(self, inner: "CoordinateMap") -> "CoordinateMap":
        """``xi = H_self (H_inner x)``: self maps inner's outputs."""
        if tuple(inner.xi_names) != tuple(self.x_names):
            raise ValueError("maps do not chain")
        return CoordinateMap(self.H @ inner.H, inner.x_names, self.xi_names)

    @classmethod
    def identity(cls, names=("x", "y", "z", "t"), xi_names=XI) -> "CoordinateMap":
        return cls(np.eye(len(names)), names, xi_names)

    @classmethod
    def embedding_2p1(cls, x_names=("x", "y", "t")) -> "CoordinateMap":
        """``xi = (i t, -i t, x + i y, x - i y) / 2`` as a map from (x, y, t)."""
        H = np.array([[0, 0, 1j], [0, 0, -1j], [1, 1j, 0], [1, -1j, 0]]) / 2
        D = np.array([[0, 0, -1j], [0, 0, 1j], [1, -1j, 0], [1, 1j, 0]])
        return cls(H, x_names, XI, D)


def sample_through(g: GroupFunction, cmap: CoordinateMap, grid: GridSpec) -> GaugePotential:
    """Pure gauge ``A_xi = g_xi g^-1`` of a group function of xi, sampled at ``xi = H x``."""
    if np.iscomplexobj(cmap.H) and np.any(np.imag(cmap.H)):
        raise ValueError("sampling through a complex map is not supported")
    comp = Composed(g, np.real(cmap.H), cmap.x_names)
    vals = comp.potential_components(grid.coords())
    comps = {n: Field(grid, np.broadcast_to(vals[n], grid.shape + (g.dim, g.dim)).copy())
             for n in cmap.xi_names}
    return GaugePotential(comps, {k: v for k, v in cmap.xi_derivs().items()})


def _rename_grid(grid: GridSpec, mapping: Mapping[str, str]) -> GridSpec:
    from .fields import Axis
    axes = tuple(Axis(mapping.get(a.name, a.name), a.n, a.spacing, a.origin) for a in grid.axes)
    fixed = tuple(sorted((mapping.get(k, k), v) for k, v in grid.fixed))
    return GridSpec(axes, grid.boundary, fixed)


def pullback_connection(A: GaugePotential, cmap: CoordinateMap) -> ConnectionSet:
    """``U_i = sum_j b_ij A_xi_j`` with ``b`` the Jacobian of the map.

    The potential must already be sampled on the x-grid (see
    :func:`sample_through`), except for the identity map, where a potential
    on the xi-grid is simply relabelled.
    """
    grid = A.grid
    if any(n in grid.names for n in cmap.xi_names):
        if not np.allclose(cmap.H, np.eye(*cmap.H.shape)):
            raise ValueError("potential lives on the xi-grid; resampling is only defined for H = I")
        grid = _rename_grid(grid, dict(zip(cmap.xi_names, cmap.x_names)))
    b = cmap.jacobian
    out = {}
    for i, xn in enumerate(cmap.x_names):
        acc = np.zeros(grid.shape + (A.dim, A.dim), dtype=np.result_type(b, *(A[n].values for n in cmap.xi_names)))
        for j, xin in enumerate(cmap.xi_names):
            if b[i, j] != 0:
                acc = acc + b[i, j] * A[xin].values
        out[xn] = Field(grid, acc)
    return ConnectionSet(out)


def curvature_coefficients(cmap: CoordinateMap) -> dict[tuple[str, str], dict[tuple[str, str], complex]]:
    """``F_ij = sum_{mu<nu} (b_i mu b_j nu - b_i nu b_j mu) F_mu nu`` coefficient table."""
    b = cmap.jacobian
    out = {}
    for (i, xi), (j, xj) in itertools.combinations(enumerate(cmap.x_names), 2):
        row = {}
        for (m, xm), (n, xn) in itertools.combinations(enumerate(cmap.xi_names), 2):
            c = b[i, m] * b[j, n] - b[i, n] * b[j, m]
            if c != 0:
                row[(xm, xn)] = c.item() if hasattr(c, "item") else c
        out[(xi, xj)] = row
    return out


def transform_curvature_components(A: GaugePotential, cmap: CoordinateMap,
                                   scheme: str = "central2") -> ResidualReport:
    """Curvature in x-coordinates computed directly and by tensor transformation.

    Direct: field strength of the pulled-back connection. Transformed: the xi
    field strength (xi-derivatives realised by the chain rule) contracted with
    2x2 minors of the Jacobian. Reports their mismatch per x-pair.
    """
    if not cmap.is_linear:
        raise ValueError("only linear maps are supported")
    conns = pullback_connection(A, cmap)
    xg = conns.grid
    missing = [n for n in cmap.x_names if n not in xg.names]
    if missing:
        raise ValueError(f"xi-derivatives need every x axis on the grid; missing {missing}")
    if A.grid != xg:
        A = GaugePotential({n: Field(xg, A[n].values) for n in A.names},
                           {n: dict(zip(cmap.xi_names, cmap.x_names)).get(d, d) if isinstance(d, str) else d
                            for n, d in A.derivs.items()})
    Fxi = field_strength(GaugePotential({n: A[n] for n in cmap.xi_names},
                                        {n: A.derivs[n] for n in cmap.xi_names}), scheme)
    Fx = field_strength(GaugePotential(dict(conns.members)), scheme)
    coeffs = curvature_coefficients(cmap)
    rep = ResidualReport(meta={"coefficients": {f"{a}{b}": {f"{m}{n}": c for (m, n), c in row.items()}
                                                for (a, b), row in coeffs.items()}})
    gridded = set(xg.names)
    for (xi_, xj), row in coeffs.items():
        if xi_ not in gridded or xj not in gridded:
            continue
        acc = Field(xg, np.zeros_like(Fx[(xi_, xj)].values))
        for pair, c in row.items():
            acc = acc + Fxi[pair] * c
        rep.add(f"F_{xi_}{xj}", Fx[(xi_, xj)] - acc)
    return rep


# ---------------------------------------------------------------- 2+1 embedding

EMBED_DERIVS = {"xi1": {"t": -1j}, "xi2": {"t": 1j}, "xi3": {"x": 1, "y": -1j}, "xi4": {"x": 1, "y": 1j}}


def embed_2p1_into_sdym(A: Field, B: Field, D: Field, names=("x", "y", "t")) -> GaugePotential:
    """``A1 = -iD, A2 = iD, A3 = A - iB, A4 = A + iB`` on the real (x, y, t) grid.

    The xi-derivatives are realised by the chain rule of
    :meth:`CoordinateMap.embedding_2p1`.
    """
    x, y, t = names
    for n in names:
        if n not in A.grid.names:
            raise ValueError(f"embedding needs grid axis {n!r}")
    rn = {"x": x, "y": y, "t": t}
    derivs = {k: {rn[a]: c for a, c in v.items()} for k, v in EMBED_DERIVS.items()}
    comps = {"xi1": D * (-1j), "xi2": D * 1j, "xi3": A - B * 1j, "xi4": A + B * 1j}
    return GaugePotential(comps, derivs)


def embedding_check(A: Field, B: Field, D: Field, names=("x", "y", "t"),
                    scheme: str = "central2") -> ResidualReport:
    """Self-duality residuals of the embedded potential, plus the factor relations
    ``F_34 = -2i F_xy`` and ``F_14 - F_23 = -2i F_xt`` (exact, also discretely)."""
    x, y, t = names
    pot = embed_2p1_into_sdym(A, B, D, names)
    parts = sd_parts(pot, XI, scheme)
    fxy = zc_residual(A, B, x, y, scheme)
    fxt = zc_residual(A, D, x, t, scheme)
    rep = ResidualReport(meta={"scale": max(field_norms(f)[0] for f in (A, B, D)), "h": A.grid.h})
    for lab, f in parts.items():
        rep.add(lab, f)
    rep.add("factor:F_xi3xi4+2iF_xy", parts["F_xi3xi4"] + fxy * 2j)
    rep.add("factor:F_xi1xi4-F_xi2xi3+2iF_xt", parts["F_xi1xi4-F_xi2xi3"] + fxt * 2j)
    return rep


# ---------------------------------------------------------------- mM-LXVIII <-> SDYM

def mmlxviii_sdym_identify(B0: Field, B1: Field, a: complex, b: complex,
                           axes: Sequence[str] = XI, scheme: str = "central2"
                           ) -> tuple[GaugePotential, ResidualReport]:
    """Representative potential ``A1 = B0, A2 = B1, A3 = A4 = 0`` for a = b,
    with the compatibility residual of the advective pair."""
    if a != b:
        raise ValueError(f"identification requires a = b (got a={a}, b={b})")
    zero = Field(B0.grid, np.zeros_like(B0.values, dtype=np.result_type(B0.values, B1.values, complex)))
    x1, x2, x3, x4 = axes
    pot = GaugePotential({x1: B0, x2: B1, x3: zero, x4: Field(B0.grid, zero.values.copy())})
    rep = ResidualReport(meta={"a": complex(a), "b": complex(b)})
    rep.add("mmlxviii", mmlxviii_residual(B0, B1, a, b, axes, scheme))
    return pot, rep


def manufactured_mmlxviii(g: GroupFunction, grid: GridSpec, a: complex, b: complex,
                          axes: Sequence[str] = XI) -> tuple[Field, Field]:
    """``B0 = (g_1 - a g_3) g^-1``, ``B1 = (g_2 - b g_4) g^-1``: psi = g solves both systems."""
    c = grid.coords()
    ginv = np.linalg.inv(g(c))
    x1, x2, x3, x4 = axes
    dg = lambda n: g.derivative(c, n) if n in g.names else 0.0
    full = grid.shape + (g.dim, g.dim)
    B0 = np.broadcast_to((dg(x1) - a * dg(x3)) @ ginv, full).copy()
    B1 = np.broadcast_to((dg(x2) - b * dg(x4)) @ ginv, full).copy()
    return Field(grid, B0), Field(grid, B1)


# ---------------------------------------------------------------- NLS scenario

def nls_soliton(grid: GridSpec, eta: float = 1.0, x: str = "x", t: str = "t", x0: float = 0.0) -> Field:
    """``q = eta sech(eta (x - x0)) exp(i eta^2 t)`` solves ``i q_t + q_xx + 2|q|^2 q = 0``."""
    c = grid.coords()
    xx, tt = np.asarray(c[x]), np.asarray(c[t])
    return Field(grid, np.broadcast_to(eta / np.cosh(eta * (xx - x0)) * np.exp(1j * eta**2 * tt), grid.shape).copy())


def akns_nls_pair(q: Field, lam: complex, x: str = "x", scheme: str = "central2") -> tuple[Field, Field]:
    """Standard AKNS pair for focusing NLS (an external convention, not derived here):
    ``U = [[-i l, q], [-q*, i l]]``,
    ``V = [[-2i l^2 + i|q|^2, 2 l q + i q_x], [-2 l q* + i q*_x, 2i l^2 - i|q|^2]]``."""
    qv = q.values
    qx = derivative(q, x, scheme).values
    qs, qsx = np.conj(qv), np.conj(qx)
    a2 = np.abs(qv) ** 2
    z = np.zeros_like(qv)
    U = np.stack([np.stack([z - 1j * lam, qv], -1), np.stack([-qs, z + 1j * lam], -1)], -2)
    V = np.stack([np.stack([-2j * lam**2 + 1j * a2, 2 * lam * qv + 1j * qx], -1),
                  np.stack([-2 * lam * qs + 1j * qsx, 2j * lam**2 - 1j * a2], -1)], -2)
    return Field(q.grid, U), Field(q.grid, V)


def nls_residual(q: Field, lam: complex, x: str = "x", t: str = "t",
                 scheme: str = "central2") -> ResidualReport:
    from .fields import second_partial
    U, V = akns_nls_pair(q, lam, x, scheme)
    rep = ResidualReport(meta={"lambda": complex(lam)})
    rep.add("zero-curvature", zc_residual(U, V, x, t, scheme))
    nls = derivative(q, t, scheme) * 1j + second_partial(q, x) + q * (np.abs(q.values) ** 2) * 2
    rep.add("nls", nls)
    return rep
