import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpwdual.loopalg import LaurentLoop
from dpwdual.symspace import (SymmetricSpaceSpec, cartan_embed, inner_space_check, project_kp,
                              so_residual, willmore_space)


def test_willmore_space_shape():
    spec = willmore_space()
    assert (spec.n, spec.n_neg, spec.k_dim) == (8, 1, 4)
    assert len(spec.basis_g) == 28
    assert np.array_equal(spec.compact_metric, np.eye(8))
    assert np.array_equal(spec.real_metric, spec.J)
    U = spec.unitarizer
    assert np.allclose(U.T @ spec.J @ U, np.eye(8))


def test_inner_and_spanning():
    rep = inner_space_check(willmore_space())
    assert rep.spans and rep.inner
    assert rep.dim_k == 6 + 6
    assert rep.dim_u_cap_k == rep.dim_k


@given(st.integers(0, 2**32 - 1))
def test_kp_split(seed):
    spec = willmore_space()
    rng = np.random.default_rng(seed)
    X = np.tensordot(rng.normal(size=28) + 1j * rng.normal(size=28), spec.basis_g, axes=1)
    Xk, Xp = project_kp(X, spec)
    assert np.allclose(Xk + Xp, X)
    assert np.allclose(spec.sigma(Xk), Xk) and np.allclose(spec.sigma(Xp), -Xp)
    assert so_residual(Xk, spec.J) < 1e-12 and so_residual(Xp, spec.J) < 1e-12


def test_bad_specs():
    with pytest.raises(ValueError):
        SymmetricSpaceSpec.standard(3, n_neg=4)
    with pytest.raises(ValueError):
        SymmetricSpaceSpec.standard(3, k_dim=0)


def test_cartan_embedding_of_identity():
    spec = SymmetricSpaceSpec.standard(3, 1, 1)
    C = cartan_embed(LaurentLoop.identity(3), 1.0, spec)
    assert np.array_equal(C, spec.S)
    with pytest.raises(np.linalg.LinAlgError):
        cartan_embed(np.zeros((3, 3)), 1.0, spec)
