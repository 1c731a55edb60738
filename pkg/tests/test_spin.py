import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from solgeo.algebra import CurvatureTriple, spin_matrix
from solgeo.fields import Axis, Field, GridSpec
from solgeo.manufactured import Cayley, NearIdentity, pure_gauge
from solgeo.spin import (SpinField, discrete_helix_rate, exchange_energy, gauge_frame_transform, helix,
                         lle_integrate, lle_lax_check, lle_rhs, lle_u_matrix, lle_v_matrix,
                         m0_equivalence_residual, precession_rate, spin_from_curvatures, stable_dt,
                         trajectory_to_csv)
from solgeo.zerocurvature import zc_residual


def xt_grid(m, nt=None, dt=0.02):
    return GridSpec((Axis("x", m, 2 * math.pi / m, periodic=True),
                     Axis("t", nt or m // 4, dt, periodic=False)))


def const_spin(g, v, n=1.0):
    v = np.asarray(v, dtype=float)
    return SpinField(g, np.broadcast_to(v / np.linalg.norm(v), g.shape + (3,)).copy(), n)


def test_spin_from_curvatures_examples():
    np.testing.assert_array_equal(spin_from_curvatures(CurvatureTriple(2.0, 0.0, 0.0), 2.0), [1, 0, 0])
    np.testing.assert_array_equal(spin_from_curvatures(CurvatureTriple(0.0, 0.0, 3.0), 3.0), [0, 0, 1])
    with pytest.raises(ValueError):
        spin_from_curvatures(CurvatureTriple(1.0, 1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        spin_from_curvatures(CurvatureTriple(0.0, 0.0, 0.0), 0.0)


@given(st.integers(0, 2**31), st.floats(0.1, 10))
def test_spin_from_curvatures_round_trip(seed, n):
    v = np.random.default_rng(seed).normal(size=3)
    v /= np.linalg.norm(v)
    S = spin_from_curvatures(CurvatureTriple(*(n * v)), n)
    np.testing.assert_allclose(S, v, atol=1e-14)


def test_spin_from_curvature_fields():
    g = GridSpec.uniform(("x",), 8)
    th = g.coords()["x"]
    c = CurvatureTriple(Field(g, 2 * np.cos(th)), Field(g, 2 * np.sin(th)), Field(g, 0 * th))
    S = spin_from_curvatures(c, 2.0)
    assert isinstance(S, SpinField) and S.n == 2.0
    assert S.norm_drift() < 1e-15


def test_spin_field_shape():
    with pytest.raises(ValueError):
        SpinField(GridSpec.uniform(("x",), 4), np.zeros((4, 2)))


def test_rhs_constant_is_zero():
    S = const_spin(GridSpec.uniform(("x",), 16), [1, 2, 3])
    assert np.all(np.abs(lle_rhs(S).values) < 1e-15)


def test_integrate_constant_stays_constant():
    g = GridSpec((Axis("x", 32, 2 * math.pi / 32, periodic=True),))
    S0 = const_spin(g, [0.3, -0.2, 1.0])
    h = g.h
    S = lle_integrate(S0, T=0.05, dt=h * h / 4, save_every=2)
    np.testing.assert_allclose(S.values, np.broadcast_to(S0.values[:, None], S.values.shape), atol=1e-15)


def test_integrate_errors():
    h = 2 * math.pi / 32
    s0 = helix(np.arange(32) * h, 0.0, 1.0)
    with pytest.raises(ValueError):
        lle_integrate(s0, T=1.0, dt=stable_dt(h) * 1.01, h=h)
    with pytest.raises(ValueError):
        lle_integrate(s0 * 1.1, T=1.0, dt=h * h / 4, h=h)
    with pytest.raises(ValueError):
        lle_integrate(s0, T=1.0, dt=h * h / 4)
    with pytest.raises(ValueError):
        lle_integrate(s0, T=h * h, dt=h * h / 4, h=h, save_every=10)


def test_integrator_invariants_random_initial_data():
    m = 64
    h = 2 * math.pi / m
    x = np.arange(m) * h
    v = np.stack([np.cos(x) + 0.3, np.sin(2 * x), 1.0 + 0.5 * np.cos(3 * x)], -1)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    S = lle_integrate(v, T=0.5, dt=h * h / 4, h=h, save_every=20)
    assert S.norm_drift() < 1e-12
    E = exchange_energy(S.values, h)
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-8


def test_helix_matches_discrete_rate():
    # on the lattice the helix precesses at the discrete rate; check the integrator hits it
    m, theta = 64, math.pi / 3
    h = 2 * math.pi / m
    S = lle_integrate(helix(np.arange(m) * h, 0.0, theta), T=1.0, dt=h * h / 4, h=h, save_every=50)
    w = precession_rate(S, 1.0)
    assert w == pytest.approx(discrete_helix_rate(theta, 1.0, h), rel=1e-4)
    assert discrete_helix_rate(theta, 1.0, h) == pytest.approx(0.5, rel=1e-3)


def test_u_and_v_examples():
    g = GridSpec.uniform(("x",), 8)
    S = const_spin(g, [0, 0, 1], n=1.5)
    Sm = spin_matrix(0, 0, 1)
    np.testing.assert_allclose(lle_u_matrix(S).values, np.broadcast_to(1.5 * Sm, (8, 2, 2)))
    np.testing.assert_allclose(lle_v_matrix(S).values, np.broadcast_to(-2j * 1.5**2 * Sm, (8, 2, 2)), atol=1e-14)
    assert np.all(lle_v_matrix(S, n=0.0).values == 0)
    with pytest.raises(ValueError):
        lle_u_matrix(S, normalization="other")


def _smooth_unit(g, seed=2):
    from solgeo.manufactured import FourierMatrix
    f = FourierMatrix(("x", "t"), 3, seed=seed, amplitude=1.0, kind="real")
    v = f(g.coords())[..., :, 0] + np.array([0.0, 0.0, 1.5])
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return np.broadcast_to(v, g.shape + (3,)).copy()


def test_v_in_su2_to_stencil_error():
    # with the su2 normalization alpha is real, and S S_x is anti-Hermitian
    # exactly when S_x anticommutes with S, i.e. up to the stencil error in S . S_x
    errs = []
    for m in (32, 64, 128):
        g = xt_grid(m)
        S = SpinField(g, _smooth_unit(g), 1.3)
        V = lle_v_matrix(S, normalization="su2").values
        U = lle_u_matrix(S, normalization="su2").values
        np.testing.assert_allclose(U, -np.conj(np.swapaxes(U, -1, -2)), atol=1e-15)
        errs.append(np.max(np.abs(V + np.conj(np.swapaxes(V, -1, -2)))))
    assert math.log2(errs[1] / errs[2]) > 1.9


def test_m0_constant_exact():
    g = xt_grid(16)
    rep = m0_equivalence_residual(const_spin(g, [1, 1, 1], 2.0))
    assert rep.max_linf() < 1e-13


@pytest.mark.parametrize("norm", ["pauli", "su2"])
def test_m0_helix(sweep, norm):
    def build(m):
        g = xt_grid(m, m // 4 + 1, 2.0 / (m // 4))
        c = g.coords()
        return m0_equivalence_residual(SpinField(g, helix(c["x"], c["t"], 1.0), 0.8), normalization=norm), g.spacing("x")

    R = sweep(build, (64, 128, 256))
    for lab in ("zero-curvature", "lle", "difference"):
        assert R.order(lab) == pytest.approx(2.0, abs=0.2)


def test_lax_constant_exact():
    g = xt_grid(16)
    rep = lle_lax_check(const_spin(g, [0.2, 0.1, 1.0]))
    assert rep.linf("mismatch") < 1e-13


def test_gauge_frame_identity_and_constant(rng):
    g = GridSpec.uniform(("x", "t"), 8)
    C = Field(g, rng.normal(size=g.shape + (2, 2)) + 0j)
    G = Field(g, rng.normal(size=g.shape + (2, 2)) + 0j)
    C2, G2 = gauge_frame_transform(C, G, np.eye(2))
    np.testing.assert_allclose(C2.values, C.values, atol=1e-15)
    E = np.array([[1.0, 2.0], [0.0, 1.0]])
    Ei = np.linalg.inv(E)
    C2, G2 = gauge_frame_transform(C, G, E)
    np.testing.assert_allclose(G2.values, Ei @ G.values @ E, atol=1e-13)
    with pytest.raises(ValueError):
        gauge_frame_transform(C, G, np.zeros((2, 2)))


def test_gauge_frame_preserves_order(sweep):
    gg = NearIdentity(("x", "t"), seed=8, amplitude=0.3)
    E = Cayley(("x", "t"), seed=9)

    def build(n):
        from solgeo.fields import ResidualReport
        g = GridSpec.uniform(("x", "t"), n)
        m = pure_gauge(gg, g)
        C, G = gauge_frame_transform(m["x"], m["t"], E.sample(g))
        r = ResidualReport()
        r.add("before", zc_residual(m["x"], m["t"], "x", "t"))
        r.add("after", zc_residual(C, G, "x", "t"))
        return r, g.h

    R = sweep(build, (32, 64, 128))
    assert abs(R.order("after") - R.order("before")) <= 0.2


def test_trajectory_csv(tmp_path):
    g = xt_grid(8, 3)
    S = const_spin(g, [0, 0, 1])
    trajectory_to_csv(S, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x,t,S1,S2,S3" and len(lines) == 1 + 24
