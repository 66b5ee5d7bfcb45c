"""Random twisted loops with known polynomial factors, shared by the tests."""
import numpy as np
import scipy.linalg

from dpwdual.loopalg import LaurentLoop


def isotropic(rng, spec, idx):
    """A null vector for J supported on two axes of idx."""
    d = np.diag(spec.J)
    a, b = rng.choice(idx, 2, replace=False)
    v = np.zeros(spec.n, complex)
    s = rng.normal() + 1j * rng.normal()
    v[a] = s
    v[b] = s * np.sqrt(complex(-d[a] / d[b])) * rng.choice([-1, 1])
    return v


def p_nilpotent(rng, spec, scale=0.3):
    """u (Jv)^t - v (Ju)^t with u, v null in the two S-blocks: in p, squares to 0."""
    k, p = spec.block_slices()
    u, v = isotropic(rng, spec, k), isotropic(rng, spec, p)
    J = spec.J
    return scale * (np.outer(u, J @ v) - np.outer(v, J @ u))


def k_element(rng, spec, scale=0.3, real=False):
    c = rng.normal(size=len(spec.basis_g))
    if not real:
        c = c + 1j * rng.normal(size=len(spec.basis_g))
    X = np.tensordot(c, spec.basis_g, axes=1)
    return scipy.linalg.expm(scale * (X + spec.sigma(X)) / 2)


def simple(X, j):
    """exp(lam^j X) = I + lam^j X for X^2 = 0."""
    return LaurentLoop.from_dict({0: np.eye(len(X)), j: X})


def twisted_pair(rng, spec, max_deg=3):
    """(gamma_-, gamma_+) with gamma_-(inf) = I, each of degree <= max_deg."""
    gm = LaurentLoop.identity(spec.n)
    gp = LaurentLoop.constant(k_element(rng, spec))
    for _ in range(rng.integers(1, max_deg + 1)):
        gm = gm @ simple(p_nilpotent(rng, spec), -1)
    for _ in range(rng.integers(1, max_deg + 1)):
        gp = gp @ simple(p_nilpotent(rng, spec), 1)
    return gm, gp
