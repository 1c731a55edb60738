"""Scenario definitions behind the command line.

A scenario is a dict with a ``kind`` and kind-specific parameters. Every kind
declares its defaults below; unknown keys, missing values and empty grids are
configuration errors. Refinable kinds build one :class:`ResidualReport` per
grid level; the runner stacks them and applies the tolerances.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .algebra import CurvatureTriple, so3_from_triple
from .fields import Axis, Field, GridSpec, ResidualReport
from .frames import gram_drift, helix_parameters, integrate_frame_axis, reconstruct_curve
from .manufactured import NearIdentity, constant_noncommuting, pure_gauge
from .reductions import (akns_nls_pair, chiral_field_residual, embedding_check, evolve_chiral,
                         named_connection, nls_residual, nls_soliton)
from .sdym import XI, GaugePotential, sd_residual
from .spin import (SpinField, exchange_energy, helix, lle_integrate, lle_lax_check,
                   m0_equivalence_residual, precession_rate, trajectory_to_csv)
from .transport import line_grid
from .zerocurvature import (ConnectionSet, FlatnessWarning, SpectralPoleError, mmlxii_residual,
                            wavefunction_path_check)

SCHEMA = 1
DEFAULT_ORDER_MIN = 1.9
DEFAULT_LINF_REL = 1e-3


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


FAMILIES = {
    "frame-integration": ["moving-frame structure equations", "curve reconstruction"],
    "mmlxii-check": ["mM-LXII multi-axis zero curvature"],
    "sdym-check": ["SDYM self-duality in null coordinates", "gauge transformation"],
    "reduction-check": ["spectral-parameter reductions (ZS-AKNS, chiral field, NLS, LLE M-0)"],
    "embed-2p1": ["2+1 zero curvature embedded in SDYM"],
    "lle-run": ["isotropic Landau-Lifshitz equation"],
    "lax-check": ["Lax pair path independence"],
    "convergence-sweep": [],
}


def parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (int, float, complex)):
        return complex(v)
    raise ConfigError(f"cannot read {v!r} as a complex number")


def next_level(n: int) -> int:
    # odd node counts (open grids including both ends) refine as 2(n - 1) + 1
    return 2 * (n - 1) + 1 if n % 2 else 2 * n


def make_levels(base: int, count: int) -> list[int]:
    out = [int(base)]
    for _ in range(count - 1):
        out.append(next_level(out[-1]))
    return out


# ---------------------------------------------------------------- builders


@dataclass
class Kind:
    defaults: dict
    checked: Callable[[dict, ResidualReport], list[str]] | None = None
    build: Callable[[dict, int], tuple[ResidualReport, float]] | None = None
    single: Callable[[dict, Any], ResidualReport] | None = None
    thresholds: dict = field(default_factory=dict)


def _plane_grid(axes, pair, n):
    fixed = {a: 0.3 + 0.1 * i for i, a in enumerate(axes) if a not in pair}
    return GridSpec.uniform(pair, n, fixed=fixed)


def build_mmlxii(p, n):
    axes = tuple(p["axes"])
    g = NearIdentity(axes, p["dim"], seed=p["seed"], modes=p["modes"], amplitude=p["amplitude"])
    bump = p["perturb"] * constant_noncommuting(p["dim"], p["seed"] + 1)
    pairs = list(itertools.combinations(axes, 2)) if p["slices"] else [axes]
    rep = ResidualReport(meta={"scale": 0.0})
    h = None
    for pair in pairs:
        grid = _plane_grid(axes, pair, n) if p["slices"] else GridSpec.uniform(axes, n)
        m = pure_gauge(g, grid, axes)
        if p["perturb"]:
            last = axes[-1]
            m[last] = m[last] + Field(grid, np.broadcast_to(bump, m[last].values.shape).copy())
        r = mmlxii_residual(ConnectionSet(m))
        rep.norms.update(r.norms)
        rep.meta["scale"] = max(rep.meta["scale"], r.meta["scale"])
        h = grid.h
    return rep, h


def build_sdym(p, n):
    gf = NearIdentity(XI, p["dim"], seed=p["seed"], amplitude=p["amplitude"])
    if p["source"] == "pure-gauge":
        grid = GridSpec.uniform(XI, n)
        A = GaugePotential(pure_gauge(gf, grid, XI))
    elif p["source"] == "degenerate":
        grid = GridSpec.uniform(XI[:2], n, fixed={"xi3": 0.1, "xi4": 0.2})
        m = pure_gauge(gf, grid, XI[:2])
        z = np.zeros(grid.shape + (p["dim"], p["dim"]), dtype=complex)
        A = GaugePotential({XI[0]: m[XI[0]], XI[1]: m[XI[1]], XI[2]: Field(grid, z), XI[3]: Field(grid, z.copy())})
    else:
        raise ConfigError(f"unknown sdym source {p['source']!r}; use pure-gauge or degenerate")
    if p["perturb"]:
        for name, s in ((XI[2], 1), (XI[3], 2)):
            c = p["perturb"] * constant_noncommuting(p["dim"], p["seed"] + s)
            A.components[name] = A[name] + Field(grid, np.broadcast_to(c, A[name].values.shape).copy())
    return sd_residual(A), grid.h


def build_embed(p, n):
    g = NearIdentity(("x", "y", "t"), p["dim"], seed=p["seed"], modes=3, amplitude=p["amplitude"])
    grid = GridSpec.uniform(("x", "y", "t"), n)
    m = pure_gauge(g, grid)
    D = m["t"]
    if p["perturb"]:
        c = p["perturb"] * constant_noncommuting(p["dim"], p["seed"] + 1)
        D = D + Field(grid, np.broadcast_to(c, D.values.shape).copy())
    return embedding_check(m["x"], m["y"], D), grid.h


def _chiral_grid(n):
    return GridSpec.uniform(("x", "t"), n, length=1.0, periodic=False)


def build_reduction(p, n):
    red = p["reduction"]
    if red == "ChiralField":
        from .manufactured import FourierMatrix
        grid = _chiral_grid(n)
        u0 = FourierMatrix(("x",), p["dim"], seed=p["seed"], amplitude=1.0, kind="antihermitian")
        v0 = FourierMatrix(("t",), p["dim"], seed=p["seed"] + 1, amplitude=1.0, kind="antihermitian")
        u, v = evolve_chiral(u0({"x": grid.axis("x").nodes}), v0({"t": grid.axis("t").nodes}), grid)
        rep = ResidualReport(meta={"scale": max(np.abs(u.values).max(), np.abs(v.values).max())})
        for lam in p["lambdas"]:
            lam = parse_complex(lam)
            r = chiral_field_residual(u, v, lam)
            rep.norms[f"zero-curvature[lambda={_fmt(lam)}]"] = r.norms["zero-curvature"]
            rep.norms.update({k: v_ for k, v_ in r.norms.items() if k != "zero-curvature"})
        return rep, grid.h
    if red == "NLS":
        grid = GridSpec.uniform(("x", "t"), (n, max(n // 4, 3)), length=(20.0, 1.0), origin=(-10.0, 0.0),
                                periodic=False)
        q = nls_soliton(grid, p["eta"])
        lam = parse_complex(p["lambdas"][0])
        rep = nls_residual(q, lam)
        rep.meta["scale"] = max(float(np.abs(f.values).max()) for f in akns_nls_pair(q, lam))
        return rep, grid.spacing("x")
    if red == "LLE-M0":
        from .manufactured import FourierMatrix
        grid = GridSpec((Axis("x", n, 2 * math.pi / n, periodic=True), Axis("t", max(n // 4, 3), 0.02, periodic=False)))
        f = FourierMatrix(("x", "t"), 3, seed=p["seed"], amplitude=1.0, kind="real")
        v = f(grid.coords())[..., :, 0] + np.array([0.0, 0.0, 1.5])
        v = np.broadcast_to(v / np.linalg.norm(v, axis=-1, keepdims=True), grid.shape + (3,)).copy()
        rep = m0_equivalence_residual(SpinField(grid, v, p["n"]), normalization=p["normalization"])
        rep.meta["scale"] = 1.0
        return rep, grid.spacing("x")
    raise ConfigError(f"reduction {red!r} is not refinable")


def _fmt(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    if z.real == 0:
        return f"{z.imag!r}i"
    return f"{z.real!r}{z.imag:+}i"


def single_reduction(p, out_dir) -> ResidualReport:
    red = p["reduction"]
    if red != "ZS-AKNS":
        raise ConfigError(f"reduction {red!r} needs grid levels")
    rng = np.random.default_rng(p["seed"])
    worst = 0.0
    for _ in range(p["samples"]):
        pp, qq, lam = rng.normal(size=3) + 1j * rng.normal(size=3)
        U = named_connection("ZS-AKNS", {"p": pp, "q": qq}, lam)["U"]
        ref = np.array([[1j * lam, qq], [pp, -1j * lam]])
        worst = max(worst, float(np.max(np.abs(U - ref)) / np.max(np.abs(ref))))
    rep = ResidualReport(meta={"samples": p["samples"]})
    rep.norms["closed-form"] = (worst, worst)
    return rep


def build_lax(p, n):
    if p["source"] == "flat":
        axes = ("x", "y", "z", "t")
        g = NearIdentity(axes, 2, seed=p["seed"], amplitude=p["amplitude"])
        grid = GridSpec.uniform(("x", "y"), n, fixed={"z": 0.1, "t": 0.3})
        m = pure_gauge(g, grid, ("x", "y"))
        if p["perturb"]:
            c = p["perturb"] * constant_noncommuting(2, p["seed"] + 2)
            m["y"] = m["y"] + Field(grid, np.broadcast_to(c, m["y"].values.shape).copy())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FlatnessWarning)
            rep = wavefunction_path_check(ConnectionSet(m))
        return rep, grid.h
    if p["source"] == "lle-helix":
        grid = GridSpec((Axis("x", n, 2 * math.pi / n, periodic=True),
                         Axis("t", n // 4 + 1, 2.0 / (n // 4), periodic=False)))
        c = grid.coords()
        vals = helix(c["x"], c["t"], p["theta"], p["k"])
        rep = ResidualReport(meta={"theta": p["theta"], "k": p["k"]})
        for nn in p["n"]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", FlatnessWarning)
                r = lle_lax_check(SpinField(grid, vals, float(nn)), flip_v=p["flip_v"])
            for k, v in r.norms.items():
                rep.norms[f"{k}[n={nn}]"] = v
        return rep, grid.spacing("x")
    raise ConfigError(f"unknown lax source {p['source']!r}; use flat or lle-helix")


def single_frames(p, out_dir) -> ResidualReport:
    n, curve = p["steps"] + 1, p["curve"]
    k, tau = p["k"], p["tau"]
    rep = ResidualReport(meta={"curve": curve, "steps": p["steps"]})
    if curve == "variable":
        L = line_grid("s", n, p["ds"])
        c = L.coords()["s"]
        C = Field(L, so3_from_triple(CurvatureTriple(k + 0.5 * np.sin(c), 0.3 * np.cos(2 * c), tau + 0 * c)))
        rep.norms["gram_drift"] = (gram_drift(integrate_frame_axis(np.eye(3), C, "s")),) * 2
        return rep
    w = math.hypot(k, tau)
    if curve not in ("circle", "helix") or w == 0:
        raise ConfigError("curve must be circle, helix or variable, with k or tau non-zero")
    if curve == "circle":
        tau = 0.0
        w = abs(k)
    L = line_grid("s", n, (2 * math.pi / w) / (n - 1))
    c = L.coords()["s"]
    C = Field(L, so3_from_triple(CurvatureTriple(k + 0 * c, 0 * c, tau + 0 * c)))
    F = integrate_frame_axis(np.eye(3), C, "s")
    r = reconstruct_curve(F)
    radius, pitch = helix_parameters(k, tau)
    axis = np.array([tau, 0.0, k]) / w
    along = r @ axis
    centre = radius * np.array([0.0, 1.0, 0.0]) * np.sign(k)
    perp = r - np.outer(along, axis)
    rep.norms["gram_drift"] = (gram_drift(F),) * 2
    rep.norms["radius_error"] = (float(np.max(np.abs(np.linalg.norm(perp - centre, axis=1) - radius))),) * 2
    rep.norms["pitch_error"] = (abs(float(along[-1]) - pitch),) * 2
    if p["csv"] and out_dir is not None:
        from .frames import curve_to_csv
        curve_to_csv(r, out_dir / p["csv"])
    return rep


def single_lle(p, out_dir) -> ResidualReport:
    m, theta, k = p["m"], p["theta"], p["k"]
    h = 2 * math.pi / m
    x = np.arange(m) * h
    S = lle_integrate(helix(x, 0.0, theta, k), p["T"], p["dt_factor"] * h * h, h=h, save_every=p["save_every"])
    exact = k * k * math.cos(theta)
    w = precession_rate(S, k)
    E = exchange_energy(S.values, h)
    rep = ResidualReport(meta={"omega_measured": w, "omega_exact": exact, "h": h,
                               "dt": S.grid.spacing("t") / p["save_every"]})
    rep.norms["rate_rel_error"] = (abs(w - exact) / abs(exact),) * 2
    rep.norms["norm_drift"] = (S.norm_drift(),) * 2
    rep.norms["energy_drift"] = (float(np.max(np.abs(E - E[0])) / E[0]),) * 2
    if p["csv"] and out_dir is not None:
        trajectory_to_csv(S, out_dir / p["csv"])
    return rep


def _checked_reduction(p, rep):
    if p["reduction"] == "LLE-M0":
        return ["difference"]
    return list(rep.norms)


def _checked_lax(p, rep):
    return [k for k in rep.norms if k.startswith("relative_mismatch")]


KINDS: dict[str, Kind] = {
    "mmlxii-check": Kind({"axes": ["x", "y", "z", "t"], "dim": 2, "modes": 4, "amplitude": 0.3,
                          "slices": True, "perturb": 0.0, "levels": [64, 128, 256]}, build=build_mmlxii),
    "sdym-check": Kind({"source": "degenerate", "dim": 2, "amplitude": 0.3, "perturb": 0.0,
                        "levels": None}, build=build_sdym),
    "embed-2p1": Kind({"dim": 2, "amplitude": 0.3, "perturb": 0.0, "levels": [24, 48, 96]}, build=build_embed),
    "reduction-check": Kind({"reduction": "ChiralField", "dim": 2, "lambdas": [0.5, -0.5, "2j"],
                             "eta": 1.0, "n": 1.3, "normalization": "pauli", "samples": 100,
                             "levels": None}, checked=_checked_reduction,
                            build=build_reduction, single=single_reduction,
                            thresholds={"closed-form": 1e-14}),
    "lax-check": Kind({"source": "flat", "amplitude": 0.3, "perturb": 0.0, "theta": math.pi / 3, "k": 1.0,
                       "n": [0.5, 1.0, 2.0], "flip_v": False, "levels": None},
                      checked=_checked_lax, build=build_lax),
    "frame-integration": Kind({"curve": "circle", "k": 1.0, "tau": 0.5, "steps": 4000, "ds": 0.01, "csv": None},
                              single=single_frames,
                              thresholds={"gram_drift": 1e-10, "radius_error": 1e-6, "pitch_error": 1e-6}),
    "lle-run": Kind({"theta": math.pi / 3, "k": 1.0, "m": 256, "dt_factor": 0.25, "T": 5.0, "save_every": 200,
                     "csv": None}, single=single_lle,
                    thresholds={"rate_rel_error": 1e-4, "norm_drift": 1e-10, "energy_drift": 1e-6}),
}
# the reduction kinds that run on a single level
SINGLE_REDUCTIONS = {"ZS-AKNS"}
# grid levels and tolerances that depend on the variant, keyed by (kind, variant)
VARIANT_LEVELS = {
    ("sdym-check", "degenerate"): [32, 64, 128],
    ("sdym-check", "pure-gauge"): [8, 16, 32],
    ("reduction-check", "ChiralField"): [33, 65, 129],
    ("reduction-check", "NLS"): [256, 512, 1024],
    ("reduction-check", "LLE-M0"): [64, 128, 256],
    ("lax-check", "flat"): [32, 64, 128],
    ("lax-check", "lle-helix"): [64, 128, 256],
}
# a 4-D grid is capped near 32^4 nodes, too coarse for the default L-inf bound
VARIANT_TOLERANCE = {("sdym-check", "pure-gauge"): {"linf_rel": 5e-3}}
VARIANT_KEY = {"sdym-check": "source", "reduction-check": "reduction", "lax-check": "source"}
META_KEYS = {"kind", "name", "seed", "tolerance", "target"}


# ---------------------------------------------------------------- resolution


def resolve(sc: Mapping, seed: int | None, index: int = 0) -> dict:
    """Fill defaults, validate keys and grid levels."""
    if not isinstance(sc, Mapping):
        raise ConfigError("each scenario must be a JSON object")
    kind = sc.get("kind")
    if kind == "convergence-sweep":
        if "target" not in sc:
            raise ConfigError("convergence-sweep needs a 'target' scenario")
        tgt = dict(sc["target"])
        if tgt.get("kind") == "convergence-sweep":
            raise ConfigError("convergence-sweep cannot nest")
        for key in ("levels", "tolerance"):
            if key in sc:
                tgt[key] = sc[key]
        tgt.setdefault("name", sc.get("name", f"sweep-{index}"))
        if "seed" in sc:
            tgt.setdefault("seed", sc["seed"])
        out = resolve(tgt, seed, index)
        out["swept"] = True
        return out
    if kind not in KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}; choose from {sorted(FAMILIES)}")
    spec = KINDS[kind]
    unknown = set(sc) - set(spec.defaults) - META_KEYS
    if unknown:
        raise ConfigError(f"scenario {kind!r}: unknown parameters {sorted(unknown)}")
    p = dict(spec.defaults)
    p.update({k: v for k, v in sc.items() if k in spec.defaults})
    p["kind"] = kind
    p["name"] = str(sc.get("name", f"{kind}-{index}"))
    p["seed"] = int(seed if seed is not None else sc.get("seed", 0))
    if p["seed"] < 0 or p["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    tol = dict(sc.get("tolerance") or {})
    bad = set(tol) - {"order_min", "linf_rel", "abs"}
    if bad:
        raise ConfigError(f"unknown tolerance keys {sorted(bad)}")
    variant = (kind, p.get(VARIANT_KEY.get(kind, ""), None))
    p["tolerance"] = {**VARIANT_TOLERANCE.get(variant, {}), **tol}
    if p.get("levels", ...) is None:
        p["levels"] = VARIANT_LEVELS.get(variant)
    if _refinable(p):
        lv = p.get("levels")
        if not isinstance(lv, list) or not lv:
            raise ConfigError(f"scenario {p['name']!r}: empty grid (no levels)")
        if any(not isinstance(n, int) or n < 4 for n in lv):
            raise ConfigError(f"scenario {p['name']!r}: empty grid (levels need at least 4 nodes, got {lv})")
    return p


def _refinable(p) -> bool:
    k = KINDS[p["kind"]]
    if k.build is None:
        return False
    return not (p["kind"] == "reduction-check" and p["reduction"] in SINGLE_REDUCTIONS)


def with_levels(p: dict, count: int) -> dict:
    if count < 3:
        raise ConfigError("a convergence sweep needs at least three levels")
    if not _refinable(p):
        raise ConfigError(f"scenario {p['name']!r} ({p['kind']}) has no grid to refine")
    q = dict(p)
    q["levels"] = make_levels(p["levels"][0], count)
    return q


# ---------------------------------------------------------------- execution


def run_one(p: dict, out_dir=None, tol_override: float | None = None) -> dict:
    kind = KINDS[p["kind"]]
    if _refinable(p):
        reps, hs = [], []
        for n in p["levels"]:
            r, h = kind.build(p, n)
            reps.append(r)
            hs.append(h)
        rep = ResidualReport.from_levels(reps, hs)
    else:
        rep = kind.single(p, out_dir)
    extra = []
    if p["kind"] == "reduction-check" and p["reduction"] == "ChiralField":
        for lam in (1.0, -1.0):
            try:
                named_connection("ChiralField", {"u": np.eye(2), "v": np.eye(2)}, lam)
                ok = False
            except SpectralPoleError:
                ok = True
            extra.append({"equation": f"pole-rejection[lambda={lam:+g}]", "pass": ok})
    checks = evaluate(p, rep, tol_override) + extra
    fam = FAMILIES[p["kind"]] + (["convergence sweep"] if p.get("swept") else [])
    return {
        "name": p["name"],
        "kind": p["kind"],
        "families": fam,
        "params": {k: v for k, v in p.items() if k not in ("kind", "name")},
        "report": rep.to_dict(),
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
        "_report": rep,
    }


def evaluate(p: dict, rep: ResidualReport, tol_override: float | None = None) -> list[dict]:
    kind = KINDS[p["kind"]]
    tol = p["tolerance"]
    labels = kind.checked(p, rep) if kind.checked else list(rep.norms)
    out = []
    if rep.spacings:
        order_min = float(tol.get("order_min", DEFAULT_ORDER_MIN))
        linf_rel = float(tol_override if tol_override is not None else tol.get("linf_rel", DEFAULT_LINF_REL))
        scale = float(rep.meta.get("scale") or 1.0)
        for lab in labels:
            e = rep.linf(lab)
            if rep.is_exact_zero(lab):
                out.append({"equation": lab, "order": None, "linf": e, "pass": True, "detail": "exact zero"})
                continue
            order = rep.order(lab)
            ok_o = order is not None and order >= order_min
            ok_e = e <= linf_rel * scale
            detail = []
            if not ok_o:
                detail.append(f"order {order if order is None else round(order, 3)} < {order_min}")
            if not ok_e:
                detail.append(f"finest L-inf {e:.3e} > {linf_rel:g} x scale {scale:.3e}")
            out.append({"equation": lab, "order": order, "linf": e, "pass": ok_o and ok_e,
                        "detail": "; ".join(detail) or "ok"})
    else:
        limits = dict(kind.thresholds)
        limits.update(tol.get("abs", {}))
        for lab in labels:
            e = rep.linf(lab)
            lim = float(limits.get(lab, DEFAULT_LINF_REL))
            ok = e <= lim
            out.append({"equation": lab, "value": e, "limit": lim, "pass": ok,
                        "detail": "ok" if ok else f"{e:.3e} > {lim:g}"})
    return out
