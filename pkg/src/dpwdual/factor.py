"""Birkhoff and Iwasawa factorization of Laurent loops.

Both engines rest on one finite block-Toeplitz solve for the inverse of a
plus-factor.  The Iwasawa splitting gamma = u w_+ with u^# u = I (u^# the
anti-involution fixing the real form on the circle) reduces to Birkhoff
factoring h = gamma^# gamma = h_- h_+; then w_+ = B^{-1/2} h_+ with
B = h_+(0), and u = gamma delta B^{1/2} with delta = h_+^{-1}.  The constant
B^{1/2} is the normalization of the lambda^0 term: Hermitian positive for
the compact form, the principal square root in general.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .loopalg import (DEFAULT_WINDOW, TAIL_TOL, LaurentLoop, LoopError,
                      loop_inverse, roots_of_unity)
from .symspace import SymmetricSpaceSpec

SINGULAR_TOL = 1e-10
COND_MAX = 1e12
NEG_AXIS_TOL = 1e-8
# with M left open the section grows until the dropped equations fall below this
ADAPTIVE_TOL = 1e-13
M_MAX = 64
RECONSTRUCT_SAMPLES = 16


class Status(str, Enum):
    SUCCESS = "Success"
    OUTSIDE_BIG_CELL = "OutsideBigCell"
    OUTSIDE_IWASAWA_CELL = "OutsideIwasawaCell"
    ILL_CONDITIONED = "IllConditioned"


@dataclass(frozen=True, eq=False)
class FactorizationOutcome:
    status: Status
    left: LaurentLoop | None = None
    right: LaurentLoop | None = None
    condition: float = float("nan")
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.SUCCESS

    def reconstruction_error(self, gamma: LaurentLoop, n_samples: int = RECONSTRUCT_SAMPLES) -> float:
        lam = roots_of_unity(n_samples)
        return float(np.abs(gamma(lam) - self.left(lam) @ self.right(lam)).max())


def _toeplitz(gamma: LaurentLoop, M: int) -> np.ndarray:
    n = gamma.n
    P = gamma.padded(-M, M)
    idx = np.arange(M + 1)[:, None] - np.arange(M + 1)[None, :]
    T = P[idx + M]  # (M+1, M+1, n, n), block (i, j) = c_{i-j}
    return T.transpose(0, 2, 1, 3).reshape((M + 1) * n, (M + 1) * n)


def plus_inverse(gamma: LaurentLoop, M: int):
    """delta = gamma_+^{-1} of degree <= M from (gamma delta)_0 = I, (gamma delta)_j = 0, 1 <= j <= M.

    Returns (delta, smallest singular value, condition number).
    """
    n = gamma.n
    T = _toeplitz(gamma, M)
    s = np.linalg.svd(T, compute_uv=False)
    smin = float(s[-1])
    cond = float(s[0] / s[-1]) if smin > 0 else float("inf")
    if smin < SINGULAR_TOL:
        return None, smin, cond
    rhs = np.zeros(((M + 1) * n, n), complex)
    rhs[:n] = np.eye(n)
    d = np.linalg.solve(T, rhs).reshape(M + 1, n, n)
    return LaurentLoop(0, d), smin, cond


def _neglected(prod: LaurentLoop, M: int) -> float:
    """Size of the equations the finite section drops (degrees above M)."""
    if prod.hi <= M:
        return 0.0
    return float(prod.norms()[M + 1 - prod.lo:].max())


def _trim_plus(a: LaurentLoop, tol: float = 1e-15) -> LaurentLoop:
    """Drop negligible top coefficients, keeping degree 0 as the lower edge."""
    sig = np.nonzero(a.norms() > tol)[0]
    hi = a.lo + (int(sig[-1]) if sig.size else 0)
    return a.restrict(0, max(hi, 0))


def _section(gamma: LaurentLoop, M: int | None):
    """plus_inverse at M, or at the smallest doubling of the default M that resolves gamma."""
    if M is not None:
        return (M,) + plus_inverse(gamma, M)
    M = DEFAULT_WINDOW[1]
    scale = max(1.0, float(np.abs(gamma.coeffs).max()))
    while True:
        delta, smin, cond = plus_inverse(gamma, M)
        if delta is None or M >= M_MAX or _neglected(gamma @ delta, M) <= ADAPTIVE_TOL * scale:
            return M, delta, smin, cond
        M *= 2


def birkhoff(gamma: LaurentLoop, M: int | None = None) -> FactorizationOutcome:
    """gamma = gamma_- gamma_+ with gamma_- = I + O(1/lam) and gamma_+ holomorphic in the disk.

    M fixes the Toeplitz section; None starts at 8 and doubles (up to 64) as needed.
    """
    M, delta, smin, cond = _section(gamma, M)
    if delta is None:
        return FactorizationOutcome(Status.OUTSIDE_BIG_CELL, condition=cond,
                                    detail=f"Toeplitz section singular (smin {smin:.3g})")
    if cond > COND_MAX:
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond)
    prod = gamma @ delta
    scale = max(1.0, float(np.abs(gamma.coeffs).max()))
    dropped = _neglected(prod, M)
    if dropped > TAIL_TOL * scale:
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond,
                                    detail=f"truncation M={M} leaves {dropped:.3g}")
    neg = prod.padded(min(prod.lo, 0), 0)
    neg[-1] = np.eye(gamma.n)
    left = LaurentLoop(min(prod.lo, 0), neg)
    try:
        right = _trim_plus(loop_inverse(delta, (0, M + max(gamma.hi, 0))))
    except LoopError as exc:
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond, detail=str(exc))
    return FactorizationOutcome(Status.SUCCESS, left, right, cond)


def _inertia(H: np.ndarray, tol: float = 1e-10) -> tuple[int, int]:
    e = np.linalg.eigvalsh((H + H.conj().T) / 2)
    scale = max(1.0, np.abs(e).max())
    if np.any(np.abs(e) <= tol * scale):
        return -1, -1
    return int(np.sum(e < 0)), int(np.sum(e > 0))


def _blocks(spec: SymmetricSpaceSpec | None, B: np.ndarray) -> list[np.ndarray]:
    n = B.shape[0]
    if spec is None:
        return [np.arange(n)]
    k, p = spec.block_slices()
    off = max(np.abs(B[np.ix_(k, p)]).max(initial=0.0), np.abs(B[np.ix_(p, k)]).max(initial=0.0))
    if off > 1e-9 * max(1.0, np.abs(B).max()):
        return [np.arange(n)]
    return [b for b in (k, p) if b.size]


def _hermitian_sqrt(B: np.ndarray) -> np.ndarray:
    e, V = np.linalg.eigh((B + B.conj().T) / 2)
    return (V * np.sqrt(e)) @ V.conj().T


def _orientation_flip(spec: SymmetricSpaceSpec, metric: np.ndarray) -> np.ndarray | None:
    """A real diagonal d = d^-1 in K^C reversing time orientation, if one exists.

    d is -1 on one negative axis and one positive axis of the same S-block,
    so it has determinant 1 on each block and commutes with S.
    """
    neg = np.diag(metric) < 0
    for blk in spec.block_slices():
        a = [i for i in blk if neg[i]]
        b = [i for i in blk if not neg[i]]
        if a and b:
            d = np.ones(len(metric))
            d[[a[0], b[0]]] = -1.0
            return np.diag(d)
    return None


def _iwasawa(gamma: LaurentLoop, metric: np.ndarray, spec: SymmetricSpaceSpec | None,
             M: int | None, compact: bool) -> FactorizationOutcome:
    outside = Status.ILL_CONDITIONED if compact else Status.OUTSIDE_IWASAWA_CELL
    h = gamma.adjoint(metric) @ gamma
    M, delta, smin, cond = _section(h, M)
    if delta is None:
        return FactorizationOutcome(outside, condition=cond,
                                    detail=f"Gram loop outside the big cell (smin {smin:.3g})")
    if cond > COND_MAX:
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond)
    scale = max(1.0, float(np.abs(h.coeffs).max()))
    dropped = _neglected(h @ delta, M)
    if dropped > TAIL_TOL * scale:
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond,
                                    detail=f"truncation M={M} leaves {dropped:.3g}")
    B = np.linalg.inv(delta.coeffs[0])
    G0 = metric @ B
    if np.abs(G0 - G0.conj().T).max() > 1e-8 * max(1.0, np.abs(G0).max()):
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond,
                                    detail="lambda^0 Gram block is not Hermitian")
    for blk in _blocks(spec, B):
        want = _inertia(metric[np.ix_(blk, blk)])
        got = _inertia(G0[np.ix_(blk, blk)])
        if got != want:
            return FactorizationOutcome(outside, condition=cond,
                                        detail=f"lambda^0 Gram block has inertia {got}, need {want}")
    if compact:
        W = _hermitian_sqrt(B)
    else:
        mu = np.linalg.eigvals(B)
        bad = (mu.real <= 0) & (np.abs(mu.imag) <= NEG_AXIS_TOL * np.abs(mu))
        if np.any(bad) or np.any(np.abs(mu) < SINGULAR_TOL):
            return FactorizationOutcome(outside, condition=cond,
                                        detail="lambda^0 Gram factor has spectrum on the negative axis")
        W = scipy.linalg.sqrtm(B)
    left = (gamma @ delta).right(W).trim(1e-15)
    right = left.adjoint(metric) @ gamma
    neg = right.norms()[:max(0, -right.lo)]
    if neg.size and neg.max() > 1e-10 * max(1.0, float(np.abs(gamma.coeffs).max())):
        return FactorizationOutcome(Status.ILL_CONDITIONED, condition=cond,
                                    detail=f"plus factor has negative-degree mass {neg.max():.3g}")
    right = _trim_plus(right.restrict(0, max(right.hi, 0)))
    if not compact:
        # u must lie in the identity component of the real form; u(1) decides for the whole loop
        neg = np.diag(metric) < 0
        if neg.any() and np.linalg.det(left(1.0)[np.ix_(neg, neg)]).real < 0:
            d = _orientation_flip(spec, metric) if spec is not None else None
            if d is None:
                return FactorizationOutcome(outside, condition=cond,
                                            detail="real factor leaves the identity component")
            left, right = left.right(d), right.left(d)
    return FactorizationOutcome(Status.SUCCESS, left, right, cond)


def iwasawa_compact(gamma: LaurentLoop, spec: SymmetricSpaceSpec | None = None,
                    M: int | None = None) -> FactorizationOutcome:
    """gamma = u w_+ with u fixed by rho on the circle; global for valid input.

    Without a spec the real form is the unitary group (rho^* = conjugate transpose).
    """
    metric = np.eye(gamma.n) if spec is None else spec.compact_metric
    return _iwasawa(gamma, metric, spec, M, compact=True)


def iwasawa_real(gamma: LaurentLoop, spec: SymmetricSpaceSpec, M: int | None = None) -> FactorizationOutcome:
    """gamma = u w_+ with u fixed by tau on the circle, when gamma lies in the open Iwasawa cell."""
    return _iwasawa(gamma, spec.real_metric, spec, M, compact=False)
