import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpwdual.dpw import GridSpec
from dpwdual.willmore import (MeromorphicPair, NonReal, b_hat, closed_form_embeddings,
                              closed_form_frames, conformality_residual, export_mesh,
                              minimal_surface, mixed_laplacian, off_diagonal, surface_mesh)

sympy = pytest.importorskip("sympy")

PAIR = MeromorphicPair.polynomials([0, 1], [0, 0, 1])
J = np.diag([-1.0] + [1.0] * 7)
points = st.complex_numbers(min_magnitude=0.2, max_magnitude=2.0, allow_nan=False,
                            allow_infinity=False)


def symbolic_surface():
    """x_lam for f2 = z, f4 = z^2 with z and its conjugate as independent symbols."""
    z, w, lam = sympy.symbols("z w lam")
    f2, f4 = z, z ** 2
    g2, g4 = w, w ** 2  # conjugate data as functions of w = conj z
    d = lambda f, s: sympy.diff(f, s)  # noqa: E731
    x = sympy.Matrix([
        -sympy.I * d(f2, z) / d(f4, z) + sympy.I * d(g2, w) / d(g4, w),
        -d(f2, z) / d(f4, z) - d(g2, w) / d(g4, w),
        -sympy.I * (f2 / lam - lam * g2) + sympy.I * d(f2, z) * f4 / (lam * d(f4, z))
        - sympy.I * lam * d(g2, w) * g4 / d(g4, w),
        (f2 / lam + lam * g2) - d(f2, z) * f4 / (lam * d(f4, z)) - lam * d(g2, w) * g4 / d(g4, w),
    ])
    return x, z, w, lam


def test_spot_value_symbolic():
    x, z, w, lam = symbolic_surface()
    val = sympy.simplify(x.subs({z: 1, w: 1, lam: 1}))
    assert list(val) == [0, -1, 0, 1]
    # harmonic and conformal as formal identities
    assert sympy.simplify(sympy.diff(x, z, w)) == sympy.zeros(4, 1)
    xz = sympy.diff(x, z)
    assert sympy.simplify((xz.T * xz)[0]) == 0
    assert np.allclose(minimal_surface(PAIR, 1.0, 1.0), [0, -1, 0, 1], atol=1e-10)


@settings(max_examples=30)
@given(points, st.floats(0, 2 * np.pi))
def test_numeric_surface_matches_symbolic(z, t):
    x, zs, ws, ls = symbolic_surface()
    f = sympy.lambdify((zs, ws, ls), x, "numpy")
    lam = np.exp(1j * t)
    want = np.asarray(f(z, np.conj(z), lam), complex).ravel()
    got = minimal_surface(PAIR, z, lam)
    assert np.abs(want.imag).max() < 1e-9 * max(1, np.abs(want).max())
    assert np.allclose(got, want.real, atol=1e-9)


@settings(max_examples=30)
@given(points, st.floats(0, 2 * np.pi))
def test_harmonic_and_conformal(z, t):
    lam = np.exp(1j * t)
    scale = max(1.0, np.abs(minimal_surface(PAIR, z, lam)).max())
    assert np.abs(mixed_laplacian(PAIR, z, lam, 0.01)).max() < 1e-6 * scale
    assert conformality_residual(PAIR, z, lam, 0.05 * abs(z)) < 1e-8


def test_surface_argument_guards():
    with pytest.raises(ZeroDivisionError):
        minimal_surface(PAIR, 0.0)
    with pytest.raises(ValueError):
        minimal_surface(PAIR, 1.0, 2.0)


def test_reality_guard(monkeypatch):
    import dpwdual.willmore as wm
    real = wm.surface_formula
    # dropping the conjugation in the antiholomorphic slot must not go unnoticed
    monkeypatch.setattr(wm, "surface_formula",
                        lambda *a: real(*a[:4], *np.conj(a[4:8]), a[8]))
    assert np.isfinite(minimal_surface(PAIR, 0.5, 1.0)).all()
    with pytest.raises(NonReal):
        minimal_surface(PAIR, 0.5 + 0.5j, 1j)


@given(points)
def test_isotropic_block(z):
    B = b_hat(complex(PAIR.df2(z)), complex(PAIR.df4(z)))
    J13 = np.diag([-1.0, 1, 1, 1])
    assert np.abs(B.T @ J13 @ B).max() < 1e-12
    X = off_diagonal(B)
    assert np.abs(X.T @ J + J @ X).max() < 1e-12


@settings(max_examples=30)
@given(points)
def test_closed_form_frames(z):
    P, Q, d1, d2, d3 = closed_form_frames(PAIR, z)
    # non-compact frame columns: Gram diag(-1, 1, 1, 1) in R^{1,7}
    assert np.allclose(P.conj().T @ J @ P, np.diag([-1.0, 1, 1, 1]), atol=1e-10)
    assert np.allclose(P.imag, 0, atol=1e-12) and np.allclose(Q.imag, 0, atol=1e-12)
    assert np.allclose(Q.T @ Q, np.eye(4), atol=1e-10)
    nc, c = closed_form_embeddings(PAIR, z)
    assert np.allclose(nc @ nc, np.eye(8), atol=1e-9) and np.allclose(c @ c, np.eye(8), atol=1e-9)


def test_closed_form_at_origin():
    # f2 = f4 = 0: the frames are the first four unit vectors
    P, Q, *_ = closed_form_frames(PAIR, 0.0)
    assert np.array_equal(P, np.eye(8)[:, :4]) and np.array_equal(Q, np.eye(8)[:, :4])


def test_small_mesh(tmp_path):
    g = GridSpec(1.0 + 1.0j, 0.1, 2, 2)
    mesh = surface_mesh(PAIR, g, 1.0)
    assert mesh.n_vertices == 4 and mesh.faces() == [(1, 2, 4, 3)]
    paths = export_mesh(PAIR, g, [1.0, 1j], tmp_path)
    assert sorted(p.name for p in paths) == ["surface_0.csv", "surface_0.obj",
                                             "surface_1.csv", "surface_1.obj"]
    obj = (tmp_path / "surface_0.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in obj) == 4
    assert obj[-1] == "f 1 2 4 3"
    rows = (tmp_path / "surface_0.csv").read_text().splitlines()
    assert rows[0] == "re_z,im_z,x1,x2,x3,x4" and len(rows) == 5


def test_mesh_excludes_singular_point():
    g = GridSpec(0.1 + 0.1j, 0.02, 50, 50)
    full = surface_mesh(PAIR, GridSpec(1.0, 0.02, 50, 50), 1.0)
    assert full.n_vertices == 2500
    near0 = surface_mesh(PAIR, g, 1.0, exclusion=0.1)
    Z = g.points()
    assert near0.n_vertices == int((np.abs(Z) >= 0.1).sum()) < 2500


def test_export_is_deterministic(tmp_path):
    g = GridSpec(0.5, 0.05, 6, 5)
    export_mesh(PAIR, g, [1j], tmp_path / "a")
    export_mesh(PAIR, g, [1j], tmp_path / "b")
    for name in ("surface_0.obj", "surface_0.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
