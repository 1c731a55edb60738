"""Grids, sampled fields, finite-difference calculus and residual reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

SCHEMES = ("central2", "central4", "one-sided2")
_MIN_NODES = {"central2": 3, "central4": 5, "one-sided2": 3}

# a derivative direction: an axis name, or a linear combination {axis: coefficient}
Direction = Union[str, Mapping[str, complex]]


@dataclass(frozen=True)
class Axis:
    name: str
    n: int
    spacing: float
    origin: float = 0.0
    # overrides the grid-wide boundary for this axis when set
    periodic: bool | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"axis {self.name!r} needs at least 3 nodes, got {self.n}")
        if not self.spacing > 0:
            raise ValueError(f"axis {self.name!r} needs positive spacing")

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n)


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid.

    ``fixed`` holds coordinates that are held constant, so a plane slice of a
    higher-dimensional problem can be sampled without carrying the other axes.
    """

    axes: tuple[Axis, ...]
    boundary: str = "periodic"
    fixed: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names in {names}")
        if not names:
            raise ValueError("grid needs at least one axis")
        if self.boundary not in ("periodic", "one-sided"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        clash = set(names) & {k for k, _ in self.fixed}
        if clash:
            raise ValueError(f"axes {sorted(clash)} are both gridded and fixed")

    @classmethod
    def uniform(cls, names: Sequence[str], n, length=2 * math.pi, origin=0.0,
                periodic=True, fixed: Mapping[str, float] | None = None) -> "GridSpec":
        counts = [n] * len(names) if np.isscalar(n) else list(n)
        lengths = [length] * len(names) if np.isscalar(length) else list(length)
        origins = [origin] * len(names) if np.isscalar(origin) else list(origin)
        axes = []
        for name, cnt, ln, org in zip(names, counts, lengths, origins):
            h = ln / cnt if periodic else ln / (cnt - 1)
            axes.append(Axis(name, int(cnt), float(h), float(org)))
        return cls(tuple(axes), "periodic" if periodic else "one-sided",
                   tuple(sorted((fixed or {}).items())))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def axis_periodic(self, name: str) -> bool:
        a = self.axis(name)
        return self.periodic if a.periodic is None else a.periodic

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown axis {name!r}; grid has {self.names}") from None

    def axis(self, name: str) -> Axis:
        return self.axes[self.index(name)]

    def spacing(self, name: str) -> float:
        return self.axis(name).spacing

    @property
    def h(self) -> float:
        """Largest spacing; the refinement parameter."""
        return max(a.spacing for a in self.axes)

    def coords(self) -> dict[str, np.ndarray | float]:
        """Broadcastable coordinate arrays per axis, plus fixed coordinates as floats."""
        out: dict[str, np.ndarray | float] = {}
        for i, a in enumerate(self.axes):
            shp = [1] * self.ndim
            shp[i] = a.n
            out[a.name] = a.nodes.reshape(shp)
        out.update(dict(self.fixed))
        return out

    def to_dict(self) -> dict:
        return {
            "axes": [{"name": a.name, "n": a.n, "spacing": a.spacing, "origin": a.origin,
                      **({} if a.periodic is None else {"periodic": a.periodic})}
                     for a in self.axes],
            "boundary": self.boundary,
            "fixed": {k: v for k, v in self.fixed},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        axes = tuple(Axis(a["name"], int(a["n"]), float(a["spacing"]), float(a.get("origin", 0.0)),
                          a.get("periodic"))
                     for a in d["axes"])
        return cls(axes, d.get("boundary", "periodic"), tuple(sorted(d.get("fixed", {}).items())))


@dataclass(frozen=True, eq=False)
class Field:
    """Values sampled on every node of a grid.

    ``values`` has shape ``grid.shape + value_shape``; value_shape is ``()`` for
    scalar fields, ``(3,)`` for vectors and ``(d, d)`` for matrix fields.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape[: self.grid.ndim] != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not start with grid shape {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[dict], np.ndarray], value_shape=None) -> "Field":
        vals = np.asarray(fn(grid.coords()))
        if value_shape is None:
            value_shape = vals.shape[grid.ndim:] if vals.ndim >= grid.ndim else ()
        return cls(grid, np.broadcast_to(vals, grid.shape + tuple(value_shape)).copy())

    @classmethod
    def constant(cls, grid: GridSpec, value) -> "Field":
        value = np.asarray(value)
        return cls(grid, np.broadcast_to(value, grid.shape + value.shape).copy())

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.grid.ndim:]

    @property
    def is_matrix(self) -> bool:
        vs = self.value_shape
        return len(vs) == 2 and vs[0] == vs[1]

    @property
    def dim(self) -> int:
        if not self.is_matrix:
            raise TypeError("not a matrix field")
        return self.value_shape[0]

    def _wrap(self, vals) -> "Field":
        return Field(self.grid, vals)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            o = other.values
            if self.is_matrix and o.ndim == self.grid.ndim:
                o = o[..., None, None]
            return self._wrap(self.values * o)
        return self._wrap(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / other)

    def __matmul__(self, other):
        return self._wrap(np.matmul(self.values, self._other(other)))

    def __rmatmul__(self, other):
        return self._wrap(np.matmul(other, self.values))

    def inv(self) -> "Field":
        return self._wrap(np.linalg.inv(self.values))

    def H(self) -> "Field":
        return self._wrap(np.conj(np.swapaxes(self.values, -1, -2)))

    def real(self) -> "Field":
        return self._wrap(self.values.real)


def _as_values(f):
    return f.values if isinstance(f, Field) else np.asarray(f)


def _diff1(v: np.ndarray, ax: int, h: float, scheme: str, periodic: bool) -> np.ndarray:
    v = np.moveaxis(v, ax, 0)
    n = v.shape[0]
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if n < _MIN_NODES[scheme]:
        raise ValueError(f"{scheme} stencil needs {_MIN_NODES[scheme]} nodes, axis has {n}")
    if periodic:
        if scheme == "central2":
            d = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * h)
        elif scheme == "central4":
            d = (-np.roll(v, -2, 0) + 8 * np.roll(v, -1, 0)
                 - 8 * np.roll(v, 1, 0) + np.roll(v, 2, 0)) / (12 * h)
        else:
            d = (-3 * v + 4 * np.roll(v, -1, 0) - np.roll(v, -2, 0)) / (2 * h)
        return np.moveaxis(d, 0, ax)

    d = np.empty(v.shape, dtype=np.result_type(v, float))
    fwd = lambda i: (-3 * v[i] + 4 * v[i + 1] - v[i + 2]) / (2 * h)
    bwd = lambda i: (3 * v[i] - 4 * v[i - 1] + v[i - 2]) / (2 * h)
    if scheme == "one-sided2":
        d[: n - 2] = (-3 * v[: n - 2] + 4 * v[1: n - 1] - v[2:]) / (2 * h)
        d[n - 2] = bwd(n - 2)
        d[n - 1] = bwd(n - 1)
    else:
        d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        if scheme == "central4":
            d[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
        d[0] = fwd(0)
        d[-1] = bwd(n - 1)
    return np.moveaxis(d, 0, ax)


def partial(f: Field, axis: str, scheme: str = "central2") -> Field:
    """Finite-difference derivative of ``f`` along ``axis``.

    Periodic grids use the wrapped stencil everywhere; otherwise boundary nodes
    fall back to second-order one-sided differences.
    """
    g = f.grid
    ax = g.index(axis)
    return Field(g, _diff1(f.values, ax, g.spacing(axis), scheme, g.axis_periodic(axis)))


def derivative(f: Field, direction: Direction, scheme: str = "central2") -> Field:
    """Directional derivative: a single axis or a combination ``{axis: coeff}``.

    An empty combination is the zero operator.
    """
    if isinstance(direction, str):
        return partial(f, direction, scheme)
    out = None
    for name, c in direction.items():
        if c == 0:
            continue
        term = partial(f, name, scheme) * c
        out = term if out is None else out + term
    if out is None:
        return Field(f.grid, np.zeros_like(f.values))
    return out


def second_partial(f: Field, axis: str) -> Field:
    """Three-point second derivative (one-sided second order at open boundaries)."""
    g = f.grid
    ax = g.index(axis)
    h = g.spacing(axis)
    v = np.moveaxis(f.values, ax, 0)
    n = v.shape[0]
    if g.axis_periodic(axis):
        d = (np.roll(v, -1, 0) - 2 * v + np.roll(v, 1, 0)) / h**2
    else:
        if n < 4:
            raise ValueError("one-sided second derivative needs 4 nodes")
        d = np.empty(v.shape, dtype=np.result_type(v, float))
        d[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
        d[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
        d[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    return Field(g, np.moveaxis(d, 0, ax))


def antiderivative(f: Field, axis: str) -> Field:
    """Cumulative trapezoidal integral along ``axis``, zero at the first node."""
    g = f.grid
    ax = g.index(axis)
    vals = cumulative_trapezoid(f.values, dx=g.spacing(axis), axis=ax, initial=0)
    return Field(g, vals)


def node_norms(f) -> np.ndarray:
    """Per-node Frobenius norm over the value dimensions."""
    if isinstance(f, Field):
        v = f.values
        extra = tuple(range(f.grid.ndim, v.ndim))
    else:
        v = np.asarray(f)
        extra = ()
    a = np.abs(v)
    if extra:
        return np.sqrt(np.sum(a * a, axis=extra))
    return a


def field_norms(f) -> tuple[float, float]:
    """(L-inf, RMS) of the per-node Frobenius norms."""
    nn = node_norms(f)
    return float(np.max(nn)), float(np.sqrt(np.mean(nn * nn)))


# ---------------------------------------------------------------- reports

ZERO_FLOOR = 1e-12


def observed_orders(spacings: Sequence[float], errors: Sequence[float],
                    floor: float = ZERO_FLOOR) -> list[float | None]:
    """Successive-ratio orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}).

    Pairs where the finer error is below ``floor`` are exact zeros and get None.
    """
    out: list[float | None] = []
    for (h0, e0), (h1, e1) in zip(zip(spacings, errors), zip(spacings[1:], errors[1:])):
        if e1 <= floor or e0 <= floor:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


@dataclass
class ResidualReport:
    """Per-equation residual norms, optionally across a refinement sequence.

    ``norms`` holds the finest level. ``history`` maps label -> L-inf per level
    (coarse to fine) and ``spacings`` the matching grid spacings.
    """

    norms: dict[str, tuple[float, float]] = field(default_factory=dict)
    spacings: list[float] = field(default_factory=list)
    history: dict[str, list[float]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, label: str, f) -> None:
        self.norms[label] = field_norms(f)

    def linf(self, label: str) -> float:
        return self.norms[label][0]

    @property
    def labels(self) -> list[str]:
        return list(self.norms)

    def max_linf(self) -> float:
        return max((v[0] for v in self.norms.values()), default=0.0)

    @classmethod
    def from_levels(cls, reports: Sequence["ResidualReport"], spacings: Sequence[float],
                    meta: dict | None = None) -> "ResidualReport":
        if len(reports) != len(spacings):
            raise ValueError("one spacing per report required")
        order = np.argsort(spacings)[::-1]  # coarse first
        reports = [reports[i] for i in order]
        spacings = [float(spacings[i]) for i in order]
        finest = reports[-1]
        hist = {lab: [r.norms[lab][0] for r in reports] for lab in finest.norms}
        m = dict(finest.meta)
        m.update(meta or {})
        return cls(dict(finest.norms), spacings, hist, m)

    def successive_orders(self, label: str, floor: float = ZERO_FLOOR) -> list[float | None]:
        return observed_orders(self.spacings, self.history[label], floor)

    def order(self, label: str, floor: float = ZERO_FLOOR) -> float | None:
        """Observed order from the two finest levels; needs three or more levels."""
        if len(self.spacings) < 3:
            return None
        return self.successive_orders(label, floor)[-1]

    def orders(self) -> dict[str, float | None]:
        return {lab: self.order(lab) for lab in self.history}

    def is_exact_zero(self, label: str, floor: float = ZERO_FLOOR) -> bool:
        errs = self.history.get(label) or [self.norms[label][0]]
        return all(e <= floor for e in errs)

    def monotone(self, label: str) -> bool:
        h = self.history[label]
        return all(b <= a for a, b in zip(h, h[1:]))

    def to_dict(self) -> dict:
        d = {
            "norms": {k: {"linf": v[0], "l2": v[1]} for k, v in self.norms.items()},
            "meta": _jsonable(self.meta),
        }
        if self.spacings:
            d["spacings"] = list(self.spacings)
            d["history"] = {k: list(v) for k, v in self.history.items()}
            d["orders"] = {k: self.order(k) for k in self.history}
            d["non_monotone"] = sorted(k for k in self.history if not self.monotone(k))
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ResidualReport":
        norms = {k: (float(v["linf"]), float(v["l2"])) for k, v in d["norms"].items()}
        return cls(norms, list(d.get("spacings", [])),
                   {k: list(v) for k, v in d.get("history", {}).items()}, dict(d.get("meta", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table_rows(self) -> list[dict]:
        """Convergence table rows: one per (label, level)."""
        rows = []
        for lab, errs in self.history.items():
            orders = [None] + self.successive_orders(lab)
            for h, e, p in zip(self.spacings, errs, orders):
                rows.append({"equation": lab, "h": h, "linf": e,
                             "order": "NA" if p is None else p})
        return rows

    def write_csv(self, path) -> None:
        rows = self.table_rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["equation", "h", "linf", "order"])
            w.writeheader()
            w.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------- export

def field_to_json(f: Field) -> str:
    """JSON snapshot; floats are written with repr so the round trip is exact."""
    v = f.values
    payload = {
        "grid": f.grid.to_dict(),
        "value_shape": list(f.value_shape),
        "complex": bool(np.iscomplexobj(v)),
    }
    flat = v.reshape(-1)
    if payload["complex"]:
        payload["re"] = flat.real.tolist()
        payload["im"] = flat.imag.tolist()
    else:
        payload["re"] = flat.astype(float).tolist()
    return json.dumps(payload)


def field_from_json(text: str) -> Field:
    d = json.loads(text)
    grid = GridSpec.from_dict(d["grid"])
    shape = grid.shape + tuple(d["value_shape"])
    re = np.array(d["re"], dtype=float)
    vals = re + 1j * np.array(d["im"], dtype=float) if d["complex"] else re
    return Field(grid, vals.reshape(shape))


def field_to_csv(f: Field, path) -> None:
    """One row per node: coordinates then flattened entries (re/im split for complex)."""
    g = f.grid
    mesh = np.meshgrid(*[a.nodes for a in g.axes], indexing="ij")
    coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
    vals = f.values.reshape(coords.shape[0], -1)
    idx = [np.unravel_index(k, f.value_shape) if f.value_shape else () for k in range(vals.shape[1])]
    tag = ["v" + "".join(str(i) for i in ix) for ix in idx]
    cplx = np.iscomplexobj(vals)
    header = list(g.names)
    for t in tag:
        header += [t + "_re", t + "_im"] if cplx else [t]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for c, row in zip(coords, vals):
            out = [repr(float(x)) for x in c]
            for x in row:
                out += [repr(float(x.real)), repr(float(x.imag))] if cplx else [repr(float(x))]
            w.writerow(out)
