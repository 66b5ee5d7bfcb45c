"""Matrix realization of a symmetric space G/K inside SO(J, C).

J = diag(-1,..,-1, 1,..,1) is the metric, sigma is conjugation by
S = diag(I_k, -I_{n-k}), tau is entrywise conjugation (fixing the real form
G = SO(J)) and rho(g) = J conj(g) J fixes the maximal compact U of SO(J, C).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loopalg import LaurentLoop, PointInvolution


class SpanFailure(ValueError):
    pass


def so_basis(J: np.ndarray) -> np.ndarray:
    """Basis J (E_ab - E_ba), a < b, of so(J, C)."""
    n = len(J)
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            E = np.zeros((n, n))
            E[a, b], E[b, a] = 1.0, -1.0
            out.append(J @ E)
    return np.array(out, dtype=complex)


@dataclass(frozen=True, eq=False)
class SymmetricSpaceSpec:
    n: int
    J: np.ndarray
    S: np.ndarray
    tau: PointInvolution
    rho: PointInvolution
    basis_g: np.ndarray = field(repr=False)

    def __post_init__(self):
        J, S = np.asarray(self.J), np.asarray(self.S)
        if J.shape != (self.n, self.n) or S.shape != (self.n, self.n):
            raise ValueError("J and S must be n x n")
        if not np.array_equal(S @ S, np.eye(self.n)):
            raise ValueError("S must square to the identity")
        if np.abs(J - np.diag(np.diag(J))).max() > 0 or not np.all(np.abs(np.diag(J)) == 1):
            raise ValueError("J must be diagonal with entries +-1")
        for X in self.basis_g:
            if so_residual(X, J) > 1e-12:
                raise ValueError("basis element outside so(J)")
        sig = lambda X: S @ X @ S  # noqa: E731
        maps = [sig, self.tau.on_algebra, self.rho.on_algebra]
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = maps[i], maps[j]
                if np.abs(a(b(self.basis_g)) - b(a(self.basis_g))).max() > 1e-12:
                    raise ValueError("sigma, tau, rho must commute pairwise")

    @classmethod
    def standard(cls, n: int, n_neg: int = 1, k_dim: int | None = None) -> SymmetricSpaceSpec:
        """SO(n_neg, n - n_neg) with K the stabilizer of the first k_dim axes."""
        if k_dim is None:
            k_dim = n
        if not (0 <= n_neg <= n and 0 < k_dim <= n):
            raise ValueError(f"bad block sizes n={n} n_neg={n_neg} k_dim={k_dim}")
        J = np.diag([-1.0] * n_neg + [1.0] * (n - n_neg))
        S = np.diag([1.0] * k_dim + [-1.0] * (n - k_dim))
        return cls(n, J, S, PointInvolution(np.eye(n), conj=True),
                   PointInvolution(J, conj=True), so_basis(J))

    @property
    def n_neg(self) -> int:
        return int(np.sum(np.diag(self.J) < 0))

    @property
    def k_dim(self) -> int:
        return int(np.sum(np.diag(self.S) > 0))

    def sigma(self, X):
        return self.S @ X @ self.S

    @property
    def compact_metric(self) -> np.ndarray:
        """M with rho(g)^-1 = M g^* M^-1 on SO(J, C)."""
        return self.rho.A @ self.J

    @property
    def real_metric(self) -> np.ndarray:
        """M with tau(g)^-1 = M g^* M^-1 on SO(J, C)."""
        return self.tau.A @ self.J

    @property
    def unitarizer(self) -> np.ndarray:
        """P with P^-1 U P = SO(n) for the rho-fixed group U."""
        return np.diag(np.where(np.diag(self.J) < 0, 1j, 1.0))

    def block_slices(self) -> list[np.ndarray]:
        d = np.diag(self.S)
        return [np.nonzero(d > 0)[0], np.nonzero(d < 0)[0]]

    def to_dict(self) -> dict:
        return {"n": self.n, "n_neg": self.n_neg, "k_dim": self.k_dim}


def willmore_space(m: int = 4) -> SymmetricSpaceSpec:
    """SO+(1, m+3) / SO+(1,3) x SO(m), the target of conformal Gauss maps."""
    return SymmetricSpaceSpec.standard(m + 4, n_neg=1, k_dim=4)


def so_residual(X, J) -> float:
    X = np.asarray(X)
    return float(np.abs(np.swapaxes(X, -1, -2) @ J + J @ X).max())


def project_kp(X, spec: SymmetricSpaceSpec):
    X = np.asarray(X)
    sXs = spec.S @ X @ spec.S
    Xk = (X + sXs) / 2
    return Xk, X - Xk


def _real_rank(vectors: np.ndarray, tol: float = 1e-9) -> int:
    V = np.concatenate([vectors.real, vectors.imag], axis=1)
    if V.size == 0:
        return 0
    s = np.linalg.svd(V, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _complex_rank(vectors: np.ndarray, tol: float = 1e-9) -> int:
    if vectors.size == 0:
        return 0
    s = np.linalg.svd(vectors, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _real_basis(vectors: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    V = np.concatenate([vectors.real, vectors.imag], axis=1)
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    half = vectors.shape[1]
    return vt[:r, :half] + 1j * vt[:r, half:]


def _centralizer_dim(X: np.ndarray, basis: np.ndarray) -> int:
    """Real dimension of {Y in span_R(basis) : [X, Y] = 0}."""
    n = X.shape[0]
    mats = basis.reshape(-1, n, n)
    brackets = X @ mats - mats @ X
    A = brackets.reshape(len(mats), -1)
    A = np.concatenate([A.real, A.imag], axis=1)
    s = np.linalg.svd(A, compute_uv=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    return len(mats) - int(np.sum(s > 1e-9 * scale))


@dataclass(frozen=True)
class InnerSpaceReport:
    dim_u_cap_k: int
    dim_k: int
    complexified_rank: int
    rank_u: int
    rank_u_cap_k: int

    @property
    def spans(self) -> bool:
        return self.complexified_rank == self.dim_k

    @property
    def inner(self) -> bool:
        return self.rank_u == self.rank_u_cap_k


def inner_space_check(spec: SymmetricSpaceSpec) -> InnerSpaceReport:
    """Checks (u cap k^C)^C = k^C and rank u = rank(u cap k^C)."""
    n = spec.n
    g = spec.basis_g
    rho = spec.rho.on_algebra
    # real spanning set of u: the rho-real parts of X and iX
    u_span = np.concatenate([(g + rho(g)) / 2, (1j * g + rho(1j * g)) / 2])
    u = _real_basis(u_span.reshape(len(u_span), -1))
    uk_span = (u.reshape(-1, n, n) + spec.sigma(u.reshape(-1, n, n))) / 2
    uk = _real_basis(uk_span.reshape(len(uk_span), -1))
    k = (g + spec.sigma(g)) / 2
    dim_k = _complex_rank(k.reshape(len(k), -1))
    rep_rank = _complex_rank(uk)
    if rep_rank != dim_k:
        raise SpanFailure(f"complexified span of u cap k^C has rank {rep_rank}, "
                          f"k^C has dimension {dim_k}")
    rng = np.random.default_rng(12345)
    Xu = np.tensordot(rng.normal(size=len(u)), u, axes=1).reshape(n, n)
    Xuk = np.tensordot(rng.normal(size=len(uk)), uk, axes=1).reshape(n, n)
    return InnerSpaceReport(
        dim_u_cap_k=_real_rank(uk), dim_k=dim_k, complexified_rank=rep_rank,
        rank_u=_centralizer_dim(Xu, u), rank_u_cap_k=_centralizer_dim(Xuk, uk))


def cartan_embed(F, lam, spec: SymmetricSpaceSpec) -> np.ndarray:
    """F(lam) S F(lam)^-1; F is a LaurentLoop or an array of frame values."""
    vals = F(lam) if isinstance(F, LaurentLoop) else np.asarray(F)
    cond = np.linalg.cond(vals)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise np.linalg.LinAlgError("singular frame value in Cartan embedding")
    return vals @ spec.S @ np.linalg.inv(vals)
