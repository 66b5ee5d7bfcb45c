import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpwdual.factor import Status, birkhoff, iwasawa_compact, iwasawa_real
from dpwdual.loopalg import LaurentLoop, roots_of_unity
from dpwdual.symspace import SymmetricSpaceSpec, willmore_space

from twisted import k_element, p_nilpotent, simple, twisted_pair

SPACES = {4: SymmetricSpaceSpec.standard(4, 1, 2), 8: willmore_space()}
seeds = st.integers(0, 2**32 - 1)


def unit_error(u, metric):
    lam = roots_of_unity(16)
    V = u(lam)
    G = metric @ np.conj(np.swapaxes(V, 1, 2)) @ np.linalg.inv(metric) @ V
    return float(np.abs(G - np.eye(len(metric))).max())


@pytest.mark.parametrize("n", [4, 8])
def test_random_twisted_loops(n):
    spec = SPACES[n]
    rng = np.random.default_rng(n)
    for _ in range(100):
        gm, gp = twisted_pair(rng, spec)
        g = gm @ gp
        assert max(-g.lo, g.hi) <= 3
        b = birkhoff(g)
        assert b.ok, b.detail
        assert b.reconstruction_error(g) < 1e-9
        assert b.left.distance(gm) < 1e-9 and b.right.distance(gp) < 1e-9
        c = iwasawa_compact(g, spec)
        assert c.ok, c.detail
        assert c.reconstruction_error(g) < 1e-9
        assert unit_error(c.left, spec.compact_metric) < 1e-9
        assert c.left.twist_residual(spec.S) < 1e-9 and c.right.twist_residual(spec.S) < 1e-9
        assert c.right.lo == 0


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_section_size_does_not_matter(seed):
    spec = SPACES[4]
    gm, gp = twisted_pair(np.random.default_rng(seed), spec)
    g = gm @ gp
    a, b = birkhoff(g, M=8), birkhoff(g, M=10)
    assert a.left.distance(b.left) < 1e-9 and a.right.distance(b.right) < 1e-9
    a, b = iwasawa_compact(g, spec, M=12), iwasawa_compact(g, spec, M=14)
    assert a.left.distance(b.left) < 1e-9


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_compact_normalization(seed):
    spec = SPACES[8]
    gm, gp = twisted_pair(np.random.default_rng(seed), spec)
    c = iwasawa_compact(gm @ gp, spec)
    W0 = c.right.coeff(0)
    # lam^0 term of the plus factor is Hermitian positive definite
    assert np.abs(W0 - W0.conj().T).max() < 1e-9
    assert np.linalg.eigvalsh((W0 + W0.conj().T) / 2).min() > 0


def test_constant_loop_is_polar():
    rng = np.random.default_rng(0)
    g = k_element(rng, SPACES[8], scale=1.0)
    c = iwasawa_compact(LaurentLoop.constant(g), SPACES[8])
    u, w = c.left.coeff(0), c.right.coeff(0)
    assert np.allclose(u @ w, g) and np.allclose(u.conj().T @ u, np.eye(8))
    assert np.allclose(w, w.conj().T)


def engineered(rng, spec):
    """k b k' p_+ with b = exp(i pi/2 boost): the lam^0 Gram factor has eigenvalues -1."""
    b = np.eye(spec.n, dtype=complex)
    b[:2, :2] = [[0, 1j], [1j, 0]]
    g = LaurentLoop.constant(k_element(rng, spec, 0.5, real=True) @ b
                             @ k_element(rng, spec, 0.5, real=True))
    for _ in range(rng.integers(0, 3)):
        g = g @ simple(p_nilpotent(rng, spec), 1)
    return g


def test_engineered_outside_iwasawa_cell():
    spec = SPACES[8]
    rng = np.random.default_rng(11)
    statuses = [iwasawa_real(engineered(rng, spec), spec).status for _ in range(100)]
    assert statuses == [Status.OUTSIDE_IWASAWA_CELL] * 100
    # the compact splitting of the same loops is unobstructed
    assert iwasawa_compact(engineered(rng, spec), spec).ok


def test_big_cell_exit():
    # lam^-1 alone has no Birkhoff splitting with gamma_-(inf) = I
    g = LaurentLoop.from_dict({-1: np.eye(2), 0: np.zeros((2, 2))})
    assert birkhoff(g).status is Status.OUTSIDE_BIG_CELL


def so12_loop(z):
    X = np.array([[0, 1, 1j], [1, 0, 0], [1j, 0, 0]])
    return LaurentLoop(-2, [z * z * X @ X / 2, z * X, np.eye(3)])


def test_so12_stress():
    """exp(z X / lam) in SO+(1,2)/SO(2): the Iwasawa cell of the base is the unit disk.

    On |z| = 1 the Gram loop degenerates; outside, the real factor would land
    on the other sheet of the hyperboloid.
    """
    spec = SymmetricSpaceSpec.standard(3, 1, 1)
    for r in (0.5, 0.9, 0.99):
        g = so12_loop(r * np.exp(0.3j))
        out = iwasawa_real(g, spec, M=12)
        assert out.ok, (r, out.detail)
        assert out.left(1.0)[0, 0].real >= 1
        if r < 0.95:  # near the circle the section at M = 12 truncates
            assert out.reconstruction_error(g) < 1e-9
            assert unit_error(out.left, spec.real_metric) < 1e-9
    for r in (1.0, 1.01, 2.0):
        out = iwasawa_real(so12_loop(r * np.exp(0.3j)), spec, M=12)
        assert out.status is Status.OUTSIDE_IWASAWA_CELL, r
        assert iwasawa_compact(so12_loop(r * np.exp(0.3j)), spec, M=12).ok


def test_real_factor_is_orthochronous():
    spec = SPACES[8]
    R = np.diag([-1.0, 1, 1, -1, 1, 1, 1, 1])  # in SO(1,7) but reverses time
    rng = np.random.default_rng(4)
    g = LaurentLoop.constant(R) @ simple(p_nilpotent(rng, spec), 1)
    out = iwasawa_real(g, spec)
    assert out.ok
    assert out.left(1.0)[0, 0].real >= 1
    assert out.reconstruction_error(g) < 1e-12
    assert out.left.twist_residual(spec.S) < 1e-12
