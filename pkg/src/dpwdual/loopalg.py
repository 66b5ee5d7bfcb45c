"""Matrix-valued Laurent loops in the loop parameter lambda.

A loop is stored by its Fourier coefficients on a finite degree window.
Products and involutions act on coefficients; inverses go through samples
on the unit circle and a discrete Fourier transform back.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

# one constant decides "is a Laurent polynomial of this window" everywhere
TAIL_TOL = 1e-8
DEFAULT_WINDOW = (-8, 8)
DEFAULT_SAMPLES = 32
SINGULAR_COND = 1e12


class LoopError(ValueError):
    pass


class SingularSample(LoopError):
    pass


class WindowOverflow(LoopError):
    pass


class AliasingWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LaurentLoop:
    """sum_j coeffs[j - lo] * lam**j for j in [lo, hi]."""

    lo: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] == 0:
            raise LoopError(f"coeffs must have shape (m, n, n), got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def hi(self) -> int:
        return self.lo + self.coeffs.shape[0] - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.lo, self.hi

    @classmethod
    def identity(cls, n: int) -> LaurentLoop:
        return cls(0, np.eye(n)[None])

    @classmethod
    def constant(cls, m) -> LaurentLoop:
        return cls(0, np.asarray(m)[None])

    @classmethod
    def from_dict(cls, terms: dict[int, np.ndarray]) -> LaurentLoop:
        lo, hi = min(terms), max(terms)
        n = np.asarray(next(iter(terms.values()))).shape[0]
        c = np.zeros((hi - lo + 1, n, n), complex)
        for j, m in terms.items():
            c[j - lo] = m
        return cls(lo, c)

    def coeff(self, j: int) -> np.ndarray:
        if self.lo <= j <= self.hi:
            return self.coeffs[j - self.lo]
        return np.zeros((self.n, self.n), complex)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        powers = lam[..., None] ** np.arange(self.lo, self.hi + 1)
        return np.einsum("...j,jab->...ab", powers, self.coeffs)

    def __matmul__(self, other: LaurentLoop) -> LaurentLoop:
        return loop_mul(self, other)

    def __add__(self, other: LaurentLoop) -> LaurentLoop:
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return LaurentLoop(lo, self.padded(lo, hi) + other.padded(lo, hi))

    def __sub__(self, other: LaurentLoop) -> LaurentLoop:
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return LaurentLoop(lo, self.padded(lo, hi) - other.padded(lo, hi))

    def scale(self, s: complex) -> LaurentLoop:
        return LaurentLoop(self.lo, s * self.coeffs)

    def left(self, m) -> LaurentLoop:
        return LaurentLoop(self.lo, np.asarray(m) @ self.coeffs)

    def right(self, m) -> LaurentLoop:
        return LaurentLoop(self.lo, self.coeffs @ np.asarray(m))

    def padded(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients on [lo, hi]; anything of self outside is dropped."""
        out = np.zeros((hi - lo + 1, self.n, self.n), complex)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.coeffs[a - self.lo:b - self.lo + 1]
        return out

    def restrict(self, lo: int, hi: int) -> LaurentLoop:
        return LaurentLoop(lo, self.padded(lo, hi))

    def norms(self) -> np.ndarray:
        """Spectral-free size per coefficient (max abs entry)."""
        return np.abs(self.coeffs).max(axis=(1, 2))

    def trim(self, tol: float = 0.0) -> LaurentLoop:
        """Drop edge coefficients with max entry <= tol (keeps at least one)."""
        sig = np.nonzero(self.norms() > tol)[0]
        if sig.size == 0:
            return LaurentLoop(0, np.zeros((1, self.n, self.n)))
        a, b = sig[0], sig[-1]
        return LaurentLoop(self.lo + int(a), self.coeffs[a:b + 1])

    def support(self, tol: float = TAIL_TOL) -> tuple[int, int]:
        t = self.trim(tol)
        return t.lo, t.hi

    def adjoint(self, metric=None) -> LaurentLoop:
        """metric @ gamma(lam)^* @ metric^-1 on the circle, as a loop.

        On |lam| = 1 the pointwise conjugate transpose is the loop with
        coefficient c_{-j}^* at degree j.
        """
        c = np.conj(np.swapaxes(self.coeffs[::-1], 1, 2))
        if metric is not None:
            c = np.asarray(metric) @ c @ np.linalg.inv(metric)
        return LaurentLoop(-self.hi, c)

    def twist_residual(self, S, n_samples: int = 16) -> float:
        """max over circle samples of ||gamma(-lam) - S gamma(lam) S^-1||."""
        lam = roots_of_unity(n_samples)
        S = np.asarray(S)
        return float(np.abs(self(-lam) - S @ self(lam) @ np.linalg.inv(S)).max())

    def distance(self, other: LaurentLoop, n_samples: int = 16) -> float:
        lam = roots_of_unity(n_samples)
        return float(np.abs(self(lam) - other(lam)).max())


def roots_of_unity(N: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(N) / N)


def loop_mul(a: LaurentLoop, b: LaurentLoop) -> LaurentLoop:
    if a.n != b.n:
        raise LoopError(f"dimension mismatch: {a.n} vs {b.n}")
    ma, mb = a.coeffs.shape[0], b.coeffs.shape[0]
    out = np.zeros((ma + mb - 1, a.n, a.n), complex)
    for i in range(ma):
        out[i:i + mb] += a.coeffs[i] @ b.coeffs
    return LaurentLoop(a.lo + b.lo, out)


def _safe_count(lo: int, hi: int) -> int:
    return 2 * max(abs(lo), abs(hi)) + 1


def coeffs_to_samples(a: LaurentLoop, N: int) -> tuple[np.ndarray, np.ndarray]:
    lam = roots_of_unity(N)
    return lam, a(lam)


def samples_to_coeffs(values, lam=None, window: tuple[int, int] | None = None) -> LaurentLoop:
    """Coefficients of a loop from its values at the N-th roots of unity.

    values has shape (N, n, n) ordered as exp(2 pi i k / N).  The default
    window is the centred one, [-(N-1)//2, N//2].
    """
    values = np.asarray(values, dtype=complex)
    N = values.shape[0]
    if lam is not None and not np.allclose(lam, roots_of_unity(N), atol=1e-14):
        raise LoopError("samples must sit at the N-th roots of unity, in order")
    explicit = window is not None
    if window is None:
        window = (-((N - 1) // 2), N // 2)
    lo, hi = window
    if explicit and N < _safe_count(lo, hi):
        warnings.warn(
            f"{N} samples alias a window [{lo}, {hi}]; need at least "
            f"{_safe_count(lo, hi)}", AliasingWarning, stacklevel=2)
    fft = np.fft.fft(values, axis=0) / N
    idx = np.arange(lo, hi + 1) % N
    return LaurentLoop(lo, fft[idx])


def _sample_count(*windows: tuple[int, int], minimum: int = DEFAULT_SAMPLES) -> int:
    need = max([minimum] + [_safe_count(lo, hi) + (hi - lo + 1) for lo, hi in windows])
    return 1 << int(np.ceil(np.log2(need)))


def loop_inverse(a: LaurentLoop, target_window: tuple[int, int] | None = None,
                 n_samples: int | None = None) -> LaurentLoop:
    """Pointwise inverse on circle samples, transformed back to coefficients.

    Raises SingularSample if some a(lam) is numerically singular and
    WindowOverflow if the inverse has coefficients above TAIL_TOL outside
    target_window.
    """
    if target_window is None:
        target_window = DEFAULT_WINDOW
    lo, hi = target_window
    N = n_samples or _sample_count(target_window, a.window)
    lam, vals = coeffs_to_samples(a, N)
    cond = np.linalg.cond(vals)
    if not np.all(np.isfinite(cond)) or cond.max() > SINGULAR_COND:
        raise SingularSample(f"loop is singular on the circle (cond {cond.max():.3g})")
    full = samples_to_coeffs(np.linalg.inv(vals))
    keep = (np.arange(full.lo, full.hi + 1) >= lo) & (np.arange(full.lo, full.hi + 1) <= hi)
    tail = full.norms()[~keep]
    if tail.size and tail.max() > TAIL_TOL:
        raise WindowOverflow(
            f"inverse has coefficients up to {tail.max():.3g} outside [{lo}, {hi}]")
    return full.restrict(lo, hi)


@dataclass(frozen=True, eq=False)
class PointInvolution:
    """X -> A op(X) A^-1 with op optional conjugation and inverse-transpose."""

    A: np.ndarray
    conj: bool = False
    invert: bool = False

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        A.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_Ainv", np.linalg.inv(A))
        rng = np.random.default_rng(0)
        X = rng.normal(size=A.shape) + 1j * rng.normal(size=A.shape) + 3 * np.eye(len(A))
        if np.abs(self(self(X)) - X).max() > 1e-12 * max(1.0, np.abs(X).max()):
            raise ValueError("point map is not an involution")

    def __call__(self, X):
        X = np.asarray(X)
        Y = np.conj(X) if self.conj else X
        if self.invert:
            Y = np.linalg.inv(np.swapaxes(Y, -1, -2))
        return self.A @ Y @ self._Ainv

    def on_algebra(self, X):
        """Derivative of the group map at the identity."""
        X = np.asarray(X)
        Y = np.conj(X) if self.conj else X
        if self.invert:
            Y = -np.swapaxes(Y, -1, -2)
        return self.A @ Y @ self._Ainv


LambdaAction = Literal["id", "neg", "inv_conj", "neg_inv_conj"]
_ANTIHOLOMORPHIC = {"inv_conj", "neg_inv_conj"}


@dataclass(frozen=True, eq=False)
class LoopInvolution:
    point: PointInvolution
    lambda_action: LambdaAction = "id"

    def __post_init__(self):
        if self.lambda_action not in ("id", "neg", "inv_conj", "neg_inv_conj"):
            raise ValueError(f"unknown lambda action {self.lambda_action!r}")
        if self.point.conj != (self.lambda_action in _ANTIHOLOMORPHIC):
            raise ValueError("a conjugating point map must pair with lam -> +-1/conj(lam) "
                             "(and only then) to keep loops holomorphic in lam")

    def __call__(self, a: LaurentLoop) -> LaurentLoop:
        return apply_involution(self, a)


def apply_involution(iota: LoopInvolution, a: LaurentLoop) -> LaurentLoop:
    """result(lam) = point(a(action(lam))); every action here is its own inverse."""
    act = iota.lambda_action
    degrees = np.arange(a.lo, a.hi + 1)
    c = a.coeffs
    if act in ("neg", "neg_inv_conj"):
        c = c * ((-1.0) ** degrees)[:, None, None]
    if act in _ANTIHOLOMORPHIC:
        # conj(sum c_j mu^j) with mu = +-1/conj(lam) is sum conj(c_j)(+-1)^j lam^-j
        c, lo = c[::-1], -a.hi
    else:
        lo = a.lo
    if iota.point.invert:
        vals = LaurentLoop(lo, c)
        p = PointInvolution(iota.point.A, iota.point.conj, invert=False)
        inv_t = loop_inverse(LaurentLoop(lo, np.swapaxes(np.conj(c) if p.conj else c, 1, 2)),
                             target_window=(lo - 2 * vals.coeffs.shape[0],
                                            vals.hi + 2 * vals.coeffs.shape[0]))
        return inv_t.left(p.A).right(np.linalg.inv(p.A)).trim(1e-13)
    return LaurentLoop(lo, iota.point(c))
