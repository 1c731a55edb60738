import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solgeo.fields import (Axis, Field, GridSpec, ResidualReport, antiderivative, derivative,
                           field_from_json, field_norms, field_to_csv, field_to_json, observed_orders,
                           partial, second_partial)


def line(n, periodic=True, length=2 * math.pi):
    return GridSpec.uniform(("x",), n, length=length, periodic=periodic)


def test_axis_validation():
    with pytest.raises(ValueError):
        Axis("x", 2, 0.1)
    with pytest.raises(ValueError):
        Axis("x", 5, 0.0)
    with pytest.raises(ValueError):
        GridSpec((Axis("x", 4, 1.0), Axis("x", 4, 1.0)))
    with pytest.raises(ValueError):
        GridSpec.uniform(("x",), 8, fixed={"x": 0.0})


def test_unknown_axis():
    f = Field.constant(line(8), 1.0)
    with pytest.raises(KeyError):
        partial(f, "y")


def test_stencil_too_wide():
    g = GridSpec((Axis("x", 4, 0.1),))
    with pytest.raises(ValueError):
        partial(Field.constant(g, 1.0), "x", "central4")


@pytest.mark.parametrize("scheme", ["central2", "central4", "one-sided2"])
@pytest.mark.parametrize("periodic", [True, False])
def test_constant_has_zero_derivative(scheme, periodic):
    f = Field.constant(line(16, periodic), np.eye(2) * 3.0)
    np.testing.assert_allclose(partial(f, "x", scheme).values, 0, atol=1e-12)


def test_linear_exact_on_interior():
    g = line(11, periodic=False, length=1.0)
    f = Field.from_function(g, lambda c: c["x"])
    d = partial(f, "x").values
    np.testing.assert_allclose(d, 1.0, atol=1e-13)  # one-sided ends are exact on linears too


@pytest.mark.parametrize("scheme,order", [("central2", 1.9), ("central4", 3.8)])
def test_sin_convergence(scheme, order):
    errs, hs = [], []
    for n in (64, 128, 256):
        g = line(n)
        f = Field.from_function(g, lambda c: np.sin(c["x"]))
        exact = np.cos(g.coords()["x"])
        errs.append(np.max(np.abs(partial(f, "x", scheme).values - exact)))
        hs.append(g.h)
    assert observed_orders(hs, errs)[-1] >= order


def test_central2_error_constant():
    # cos x - sin(h) cos(x) / h peaks at 1 - sin(h)/h
    g = line(64)
    f = Field.from_function(g, lambda c: np.sin(c["x"]))
    err = np.max(np.abs(partial(f, "x").values - np.cos(g.coords()["x"])))
    h = g.h
    assert err == pytest.approx(1 - math.sin(h) / h, rel=1e-6)


def test_one_sided_boundary_order():
    errs, hs = [], []
    for n in (33, 65, 129):
        g = line(n, periodic=False, length=1.0)
        f = Field.from_function(g, lambda c: np.exp(c["x"]))
        errs.append(np.max(np.abs(partial(f, "x").values - np.exp(g.coords()["x"]))))
        hs.append(g.h)
    assert observed_orders(hs, errs)[-1] > 1.9


def test_per_axis_periodicity():
    g = GridSpec((Axis("x", 32, 2 * math.pi / 32, periodic=True), Axis("t", 9, 0.1, periodic=False)))
    f = Field.from_function(g, lambda c: np.sin(c["x"]) * c["t"] ** 2)
    c = g.coords()
    dt = partial(f, "t").values
    np.testing.assert_allclose(dt, np.sin(c["x"]) * 2 * c["t"], atol=1e-12)
    assert g.axis_periodic("x") and not g.axis_periodic("t")
    assert GridSpec.from_dict(g.to_dict()) == g


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_partial_linear(seed, a, b):
    r = np.random.default_rng(seed)
    g = GridSpec.uniform(("x", "y"), (8, 6))
    f = Field(g, r.normal(size=(8, 6, 2, 2)))
    h = Field(g, r.normal(size=(8, 6, 2, 2)))
    lhs = partial(f * a + h * b, "y").values
    rhs = (partial(f, "y") * a + partial(h, "y") * b).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


@pytest.mark.parametrize("scheme", ["central2", "central4"])
def test_mixed_partials_commute(rng, scheme):
    g = GridSpec.uniform(("x", "y"), (12, 10))
    f = Field(g, rng.normal(size=(12, 10)))
    a = partial(partial(f, "x", scheme), "y", scheme).values
    b = partial(partial(f, "y", scheme), "x", scheme).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_directional_derivative():
    g = GridSpec.uniform(("x", "y"), 16)
    f = Field.from_function(g, lambda c: np.sin(c["x"]) + np.cos(c["y"]))
    d = derivative(f, {"x": 2.0, "y": -1j}).values
    ref = (2 * partial(f, "x") - 1j * partial(f, "y")).values
    np.testing.assert_allclose(d, ref, atol=1e-14)
    np.testing.assert_array_equal(derivative(f, {}).values, 0)


def test_second_partial():
    errs, hs = [], []
    for n in (32, 64, 128):
        g = line(n)
        f = Field.from_function(g, lambda c: np.sin(2 * c["x"]))
        errs.append(np.max(np.abs(second_partial(f, "x").values + 4 * np.sin(2 * g.coords()["x"]))))
        hs.append(g.h)
    assert observed_orders(hs, errs)[-1] > 1.9


def test_antiderivative_examples():
    g = line(21, periodic=False, length=2.0)
    x = g.coords()["x"]
    np.testing.assert_array_equal(antiderivative(Field.constant(g, 0.0), "x").values, 0)
    np.testing.assert_allclose(antiderivative(Field.constant(g, 1.0), "x").values, x - x[0], atol=1e-14)
    errs, hs = [], []
    for n in (33, 65, 129):
        g = GridSpec.uniform(("x",), n, length=3.0, origin=0.5, periodic=False)
        x = g.coords()["x"]
        F = antiderivative(Field.from_function(g, lambda c: np.cos(c["x"])), "x").values
        errs.append(np.max(np.abs(F - (np.sin(x) - np.sin(x[0])))))
        hs.append(g.h)
    assert observed_orders(hs, errs)[-1] > 1.9


def test_antiderivative_inverts_partial_interior():
    errs, hs = [], []
    for n in (33, 65, 129):
        g = line(n, periodic=False, length=2.0)
        f = Field.from_function(g, lambda c: np.exp(-c["x"]) * np.cos(3 * c["x"]))
        back = partial(antiderivative(f, "x"), "x").values
        errs.append(np.max(np.abs(back - f.values)[1:-1]))
        hs.append(g.h)
    assert observed_orders(hs, errs)[-1] > 1.8


def test_field_norms_examples():
    g = line(3)
    assert field_norms(Field.constant(g, np.zeros((2, 2)))) == (0.0, 0.0)
    linf, l2 = field_norms(Field.constant(g, 2 * np.eye(2)))
    assert linf == pytest.approx(math.sqrt(8))
    assert l2 == pytest.approx(math.sqrt(8))


def test_field_norms_scale(rng):
    f = Field(line(9), rng.normal(size=(9, 2, 2)))
    a, b = field_norms(f)
    a2, b2 = field_norms(f * -3.0)
    assert a2 == pytest.approx(3 * a) and b2 == pytest.approx(3 * b)


def test_field_ops():
    g = line(4)
    A = Field.constant(g, np.array([[1, 2], [3, 4]], dtype=complex))
    np.testing.assert_allclose((A @ A.inv()).values, np.broadcast_to(np.eye(2), (4, 2, 2)), atol=1e-14)
    s = Field.constant(g, 2.0)
    np.testing.assert_array_equal((A * s).values, (A * 2).values)
    with pytest.raises(ValueError):
        A + Field.constant(line(5), np.eye(2))


def test_json_round_trip_exact(rng):
    g = GridSpec.uniform(("x", "t"), (5, 4), fixed={"y": 0.3})
    f = Field(g, rng.normal(size=(5, 4, 2, 2)) + 1j * rng.normal(size=(5, 4, 2, 2)))
    back = field_from_json(field_to_json(f))
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    r = Field(g, rng.normal(size=(5, 4)))
    assert np.array_equal(field_from_json(field_to_json(r)).values, r.values)


def test_csv_export(tmp_path, rng):
    g = GridSpec.uniform(("x", "y"), 3)
    f = Field(g, rng.normal(size=(3, 3, 2, 2)) * (1 + 1j))
    p = tmp_path / "f.csv"
    field_to_csv(f, p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["x", "y", "v00_re"]
    assert len(lines) == 10
    assert len(lines[1].split(",")) == 2 + 8


def test_report_orders_and_serialisation(tmp_path):
    reps = []
    for e in (4e-2, 1e-2, 2.5e-3):
        r = ResidualReport()
        r.norms["eq"] = (e, e / 2)
        r.norms["zero"] = (0.0, 0.0)
        reps.append(r)
    R = ResidualReport.from_levels(reps, [0.4, 0.2, 0.1])
    assert R.order("eq") == pytest.approx(2.0)
    assert R.order("zero") is None and R.is_exact_zero("zero")
    assert R.monotone("eq")
    d = json.loads(R.to_json())
    assert d["orders"]["eq"] == pytest.approx(2.0)
    assert ResidualReport.from_dict(d).history == R.history
    R.write_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "equation,h,linf,order" and len(rows) == 7


def test_report_needs_three_levels():
    reps = [ResidualReport({"eq": (1.0, 1.0)}), ResidualReport({"eq": (0.25, 0.25)})]
    R = ResidualReport.from_levels(reps, [0.2, 0.1])
    assert R.order("eq") is None


def test_report_non_monotone_flag():
    reps = [ResidualReport({"eq": (e, e)}) for e in (1.0, 2.0, 0.5)]
    R = ResidualReport.from_levels(reps, [0.4, 0.2, 0.1])
    assert not R.monotone("eq")
    assert R.to_dict()["non_monotone"] == ["eq"]
