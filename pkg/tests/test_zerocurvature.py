import itertools
import warnings

import numpy as np
import pytest

from solgeo.fields import Field, GridSpec
from solgeo.manufactured import FourierScalar, NearIdentity, constant_noncommuting, pure_gauge
from solgeo.zerocurvature import (ConnectionSet, FlatnessWarning, LaxParameters, SpectralExpansion,
                                  SpectralPoleError, build_lax, chiral_weight, eval_expansion,
                                  flatness_check, mmlxii_residual, mmlxviii_residual, plane_residuals,
                                  wavefunction_path_check, zc_residual)

AXES = ("x", "y", "z", "t")


def zeros(g, dim=2):
    return Field(g, np.zeros(g.shape + (dim, dim), dtype=complex))


def const(g, m):
    return Field(g, np.broadcast_to(np.asarray(m, dtype=complex), g.shape + np.shape(m)).copy())


def test_zc_zero_and_errors():
    g = GridSpec.uniform(("x", "t"), 8)
    assert np.all(zc_residual(zeros(g), zeros(g), "x", "t").values == 0)
    with pytest.raises(ValueError):
        zc_residual(zeros(g), zeros(g), "x", "x")
    with pytest.raises(ValueError):
        zc_residual(zeros(g), zeros(GridSpec.uniform(("x", "t"), 9)), "x", "t")


def test_zc_constant_members_give_commutator():
    g = GridSpec.uniform(("x", "t"), 6)
    P, Q = constant_noncommuting(2, 1), constant_noncommuting(2, 2)
    r = zc_residual(const(g, P), const(g, Q), "x", "t").values
    np.testing.assert_allclose(r, np.broadcast_to(P @ Q - Q @ P, r.shape), atol=1e-14)


def test_zc_sign_convention():
    # psi = g solves psi_a = A_a psi for A_a = g_a g^-1, so this residual must vanish
    g = GridSpec.uniform(("x", "t"), 128)
    m = pure_gauge(NearIdentity(("x", "t"), seed=2, amplitude=0.3), g)
    flat = zc_residual(m["x"], m["t"], "x", "t")
    flipped = zc_residual(m["t"], m["x"], "x", "t")
    assert flat.values.max() < 1e-2 * abs(flipped.values).max()


def test_mmlxii_all_zero_and_labels():
    g = GridSpec.uniform(AXES, 4)
    rep = mmlxii_residual(ConnectionSet({a: zeros(g) for a in AXES}))
    assert sorted(rep.norms) == sorted(f"F_{a}{b}" for a, b in itertools.combinations(AXES, 2))
    assert rep.max_linf() == 0


def test_mmlxii_two_plus_one_and_errors():
    g = GridSpec.uniform(("x", "y", "t"), 4)
    rep = mmlxii_residual(ConnectionSet({a: zeros(g) for a in ("x", "y", "t")}))
    assert len(rep.norms) == 3
    g1 = GridSpec.uniform(("x",), 4)
    with pytest.raises(ValueError):
        mmlxii_residual(ConnectionSet({"x": zeros(g1)}))
    with pytest.raises(ValueError):
        ConnectionSet({})


def test_mmlxii_manufactured_order(sweep):
    g = NearIdentity(("x", "y", "t"), seed=5, amplitude=0.3)

    def build(n):
        grid = GridSpec.uniform(("x", "y", "t"), n)
        return mmlxii_residual(ConnectionSet(pure_gauge(g, grid))), grid.h

    R = sweep(build, (12, 24, 48))
    for lab in R.history:
        assert R.order(lab) == pytest.approx(2.0, abs=0.2)


def test_mmlxii_broken_does_not_converge(sweep):
    g = NearIdentity(("x", "t"), seed=5, amplitude=0.3)
    bump = constant_noncommuting(2, 4)

    def build(n):
        grid = GridSpec.uniform(("x", "t"), n)
        m = pure_gauge(g, grid)
        m["t"] = m["t"] + const(grid, 0.2 * bump)
        return mmlxii_residual(ConnectionSet(m)), grid.h

    R = sweep(build, (32, 64, 128))
    assert abs(R.order("F_xt")) < 0.5


def test_plane_residuals():
    g = GridSpec.uniform(("x", "y", "t"), 8)
    z = Field(g, np.zeros(g.shape))
    rep = plane_residuals(z, z, z)
    assert set(rep.norms) == {"k_y=m3_x", "m3_t=omega3_y", "k_t=omega3_x"}
    assert rep.max_linf() == 0
    with pytest.raises(ValueError):
        plane_residuals(z, z, z, n3=z)


def test_plane_residuals_potential_solution(sweep):
    # k = phi_x, m3 = phi_y, n3 = phi_z, omega3 = phi_t satisfy every equation
    phi = FourierScalar(AXES, seed=3, modes=8, kmax=2)

    def build(n):
        g = GridSpec.uniform(AXES, n)
        c = g.coords()
        f = {a: Field(g, np.broadcast_to(phi.derivative(c, a), g.shape).copy()) for a in AXES}
        return plane_residuals(f["x"], f["y"], f["t"], n3=f["z"]), g.h

    R = sweep(build, (8, 16, 32))
    assert len(R.history) == 6
    for lab in R.history:
        assert R.order(lab) == pytest.approx(2.0, abs=0.25), lab


def test_lax_zero_connection_is_plain_derivative():
    g = GridSpec.uniform(AXES, 5)
    conns = ConnectionSet({a: zeros(g) for a in AXES})
    L, M = build_lax(conns, LaxParameters())
    psi = const(g, np.eye(2))
    assert np.all(L(psi).values == 0) and np.all(M(psi).values == 0)


def test_lax_forms_and_missing_axis():
    g = GridSpec.uniform(("x", "y", "t"), 6)
    conns = ConnectionSet({a: zeros(g) for a in ("x", "y", "t")})
    build_lax(conns, LaxParameters(lam=0.5, a=1, e=2), form="covariant-2+1")
    with pytest.raises(ValueError):
        build_lax(conns, form="covariant-3+1")
    with pytest.raises(ValueError):
        build_lax(conns, form="nonsense")


def test_lax_annihilates_group_wavefunction():
    # psi = g is annihilated by every covariant derivative of the pure gauge
    gfun = NearIdentity(("x", "y", "t"), seed=1, amplitude=0.3)
    errs = []
    for n in (16, 32):
        g = GridSpec.uniform(("x", "y", "t"), n)
        conns = ConnectionSet(pure_gauge(gfun, g))
        L, M = build_lax(conns, LaxParameters(lam=0.7, a=1.0, e=-2.0), form="covariant-2+1")
        psi = gfun.sample(g)
        errs.append(max(np.abs(L(psi).values).max(), np.abs(M(psi).values).max()))
    assert errs[1] < errs[0] / 3.5


def test_sdym_null_lax_form():
    g = GridSpec.uniform(("xi1", "xi2", "xi3", "xi4"), 4)
    conns = ConnectionSet({a: zeros(g) for a in g.names})
    L, M = build_lax(conns, LaxParameters(lam=2.0), form="sdym-null")
    assert np.all(L(const(g, np.eye(2))).values == 0)


def test_mmlxviii_residual_trivial():
    g = GridSpec.uniform(("xi1", "xi2", "xi3", "xi4"), 4)
    assert np.all(mmlxviii_residual(zeros(g), zeros(g), 0.5, 0.5).values == 0)
    A = const(g, np.diag([1.0, 2.0]))
    B = const(g, np.diag([3.0, -1.0]))
    assert np.all(mmlxviii_residual(A, B, 1.0, 2.0).values == 0)


def test_path_check_zero_connection_exact():
    g = GridSpec.uniform(("x", "t"), 16)
    rep = wavefunction_path_check(ConnectionSet({"x": zeros(g), "t": zeros(g)}))
    assert rep.linf("mismatch") == 0.0


def test_path_check_flat_vs_broken(sweep):
    gfun = NearIdentity(AXES, seed=1, amplitude=0.3)
    bump = constant_noncommuting(2, 3)

    def build(n, bad):
        g = GridSpec.uniform(("x", "y"), n, fixed={"z": 0.1, "t": 0.3})
        m = pure_gauge(gfun, g, ("x", "y"))
        if bad:
            m["y"] = m["y"] + const(g, 0.3 * bump)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FlatnessWarning)
            return wavefunction_path_check(ConnectionSet(m)), g.h

    good = sweep(lambda n: build(n, False), (32, 64, 128))
    bad = sweep(lambda n: build(n, True), (32, 64, 128))
    assert good.order("mismatch") == pytest.approx(2.0, abs=0.2)
    assert abs(bad.order("mismatch")) < 0.5
    assert bad.linf("mismatch") > 1e-2


def test_path_check_warns_when_not_flat():
    g = GridSpec.uniform(("x", "t"), 16)
    conns = ConnectionSet({"x": const(g, 3 * constant_noncommuting(2, 1)),
                            "t": const(g, 3 * constant_noncommuting(2, 2))})
    assert not flatness_check(conns)[0]
    with pytest.warns(FlatnessWarning):
        wavefunction_path_check(conns)


def test_path_check_order_must_cover_grid():
    g = GridSpec.uniform(("x", "t"), 8)
    conns = ConnectionSet({"x": zeros(g), "t": zeros(g)})
    with pytest.raises(ValueError):
        wavefunction_path_check(conns, order=["x"])


def test_spectral_expansion():
    e = SpectralExpansion().add("k", 0, 3.0)
    assert eval_expansion(e, 5.0)["k"] == eval_expansion(e, -2.0)["k"] == 3.0
    e = SpectralExpansion().add("tau", 1, -2.0)
    assert eval_expansion(e, 2.0)["tau"] == -4.0
    assert eval_expansion(e, 2.0)["sigma"] == 0
    e = SpectralExpansion().add("U", chiral_weight, 1.0)
    assert eval_expansion(e, 0.5)["U"] == pytest.approx(2.0)
    with pytest.raises(SpectralPoleError):
        eval_expansion(e, 1.0)
