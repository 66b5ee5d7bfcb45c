"""Potentials, holomorphic frames and extended frames on a rectangular grid.

Forward: integrate dF_- = F_- lam^-1 eta_{-1}(z) dz from the base point,
then split F_- = F w_+ pointwise with an Iwasawa factorization.  Backward:
Birkhoff-split the extended frame and differentiate the negative factor.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .factor import FactorizationOutcome, Status, birkhoff, iwasawa_compact, iwasawa_real
from .loopalg import DEFAULT_WINDOW, TAIL_TOL, LaurentLoop, WindowOverflow, roots_of_unity
from .symspace import SymmetricSpaceSpec, project_kp, so_residual

RK_STEP_BOUND = 0.25


class PotentialError(ValueError):
    pass


class PathThroughPole(RuntimeError):
    pass


# ---------------------------------------------------------------- rational functions

def _poly(c) -> Polynomial:
    return Polynomial(np.asarray(c, dtype=complex))


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """num(z) / den(z), coefficients lowest degree first."""

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: _poly([1.0]))

    def __post_init__(self):
        num, den = _poly(self.num.coef).trim(), _poly(self.den.coef).trim()
        if np.all(den.coef == 0):
            raise ValueError("denominator is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def poly(cls, coeffs) -> RationalFunction:
        return cls(_poly(coeffs))

    @classmethod
    def from_coeffs(cls, num, den=(1.0,)) -> RationalFunction:
        return cls(_poly(num), _poly(den))

    @classmethod
    def constant(cls, c: complex) -> RationalFunction:
        return cls(_poly([c]))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.num(z) / self.den(z)

    def deriv(self) -> RationalFunction:
        return RationalFunction(self.num.deriv() * self.den - self.num * self.den.deriv(),
                                self.den * self.den)

    def conj_fn(self) -> RationalFunction:
        """w -> conj(f(conj(w))), holomorphic again."""
        return RationalFunction(_poly(np.conj(self.num.coef)), _poly(np.conj(self.den.coef)))

    def _lift(self, other) -> RationalFunction:
        return other if isinstance(other, RationalFunction) else RationalFunction.constant(other)

    def __add__(self, other):
        o = self._lift(other)
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.is_zero():
            raise ZeroDivisionError("division by the zero function")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def is_zero(self) -> bool:
        return bool(np.all(np.abs(self.num.coef) == 0))

    def is_constant(self) -> bool:
        return self.deriv().is_zero()

    def poles(self) -> np.ndarray:
        """Zeros of the denominator that the numerator does not cancel."""
        if self.den.degree() == 0:
            return np.zeros(0, complex)
        r = self.den.roots()
        scale = max(1.0, float(np.abs(self.num.coef).max(initial=0.0)))
        keep = np.abs(self.num(r)) > 1e-9 * scale
        return np.asarray(r[keep], complex)

    def to_dict(self) -> dict:
        enc = lambda p: [str(complex(c)) for c in p.coef]  # noqa: E731
        return {"num": enc(self.num), "den": enc(self.den)}


# ---------------------------------------------------------------- potentials

@dataclass(frozen=True, eq=False)
class NormalizedPotential:
    """eta = lam^-1 eta_{-1}(z) dz with eta_{-1} = sum_k r_k(z) C_k in p^C."""

    terms: tuple[tuple[RationalFunction, np.ndarray], ...]
    spec: SymmetricSpaceSpec

    def __post_init__(self):
        terms = tuple((r, np.asarray(C, dtype=complex)) for r, C in self.terms if not r.is_zero())
        object.__setattr__(self, "terms", terms)
        poles = [r.poles() for r, _ in terms]
        object.__setattr__(self, "_poles", np.concatenate(poles) if poles else np.zeros(0, complex))
        rng = np.random.default_rng(20)
        pts = rng.uniform(-1.5, 1.5, 40) + 1j * rng.uniform(-1.5, 1.5, 40)
        if self._poles.size:
            far = np.abs(pts[:, None] - self._poles[None]).min(axis=1) > 1e-3
            pts = pts[far]
        vals = self(pts[:20])
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        k_part, _ = project_kp(vals, self.spec)
        rk = float(np.abs(k_part).max(initial=0.0)) / scale
        if rk > 1e-12:
            raise PotentialError(f"eta_-1 is not p-valued: k-part residual {rk:.3e}")
        rs = so_residual(vals, self.spec.J) / scale if vals.size else 0.0
        if rs > 1e-12:
            raise PotentialError(f"eta_-1 leaves the Lie algebra: residual {rs:.3e}")

    @classmethod
    def zero(cls, spec: SymmetricSpaceSpec) -> NormalizedPotential:
        return cls((), spec)

    @classmethod
    def constant(cls, C, spec: SymmetricSpaceSpec) -> NormalizedPotential:
        return cls(((RationalFunction.constant(1.0), C),), spec)

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[RationalFunction | None]],
                     spec: SymmetricSpaceSpec) -> NormalizedPotential:
        n = spec.n
        terms = []
        for a in range(n):
            for b in range(n):
                r = entries[a][b]
                if r is None or r.is_zero():
                    continue
                E = np.zeros((n, n), complex)
                E[a, b] = 1.0
                terms.append((r, E))
        return cls(tuple(terms), spec)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def poles(self) -> np.ndarray:
        return self._poles

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (self.n, self.n), complex)
        for r, C in self.terms:
            out += r(z)[..., None, None] * C
        return out

    def is_zero(self) -> bool:
        return not self.terms


# ---------------------------------------------------------------- grids

class FrameStatus(IntEnum):
    OK = 0
    NEAR_POLE = 1
    FACTOR_FAILED = 2


@dataclass(frozen=True)
class GridSpec:
    """z[iy, ix] = center + h (ix - nx//2) + i h (iy - ny//2); base must be a node."""

    center: complex = 0.0
    h: float = 0.02
    nx: int = 50
    ny: int = 50
    base: complex | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing h must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one point per axis")
        object.__setattr__(self, "center", complex(self.center))
        if self.base is not None:
            object.__setattr__(self, "base", complex(self.base))
        self.base_index  # validates

    @property
    def shape(self) -> tuple[int, int]:
        return self.ny, self.nx

    def points(self) -> np.ndarray:
        ix = np.arange(self.nx) - self.nx // 2
        iy = np.arange(self.ny) - self.ny // 2
        return self.center + self.h * ix[None, :] + 1j * self.h * iy[:, None]

    def index_of(self, z: complex) -> tuple[int, int]:
        d = (complex(z) - self.center) / self.h
        fx, fy = d.real + self.nx // 2, d.imag + self.ny // 2
        ix, iy = int(round(fx)), int(round(fy))
        if abs(fx - ix) > 1e-9 or abs(fy - iy) > 1e-9 or not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"{z} is not a node of the grid")
        return iy, ix

    @property
    def base_point(self) -> complex:
        return self.center if self.base is None else self.base

    @property
    def base_index(self) -> tuple[int, int]:
        return self.index_of(self.base_point)

    def refined(self, factor: int = 2) -> GridSpec:
        """Same center and base, spacing h/factor, covering the same extent."""
        return GridSpec(self.center, self.h / factor, (self.nx - 1) * factor + 1,
                        (self.ny - 1) * factor + 1, self.base)

    def to_dict(self) -> dict:
        b = self.base_point
        return {"center": [self.center.real, self.center.imag], "h": self.h,
                "nx": self.nx, "ny": self.ny, "base": [b.real, b.imag]}


@dataclass(frozen=True, eq=False)
class FrameGrid:
    """One Laurent loop per grid node, stored on a common degree window."""

    grid: GridSpec
    lo: int
    coeffs: np.ndarray  # (ny, nx, m, n, n)
    mask: np.ndarray    # (ny, nx) FrameStatus codes

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape[:2] != self.grid.shape or c.ndim != 5:
            raise ValueError(f"coefficient array {c.shape} does not fit grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=np.int8))

    @classmethod
    def identity(cls, grid: GridSpec, n: int) -> FrameGrid:
        c = np.broadcast_to(np.eye(n, dtype=complex), grid.shape + (1, n, n)).copy()
        return cls(grid, 0, c, np.zeros(grid.shape, np.int8))

    @classmethod
    def from_loops(cls, grid: GridSpec, loops: dict[tuple[int, int], LaurentLoop], n: int,
                   mask: np.ndarray) -> FrameGrid:
        """Nodes missing from loops hold the identity (and should be masked)."""
        lo = min([a.lo for a in loops.values()] + [0])
        hi = max([a.hi for a in loops.values()] + [0])
        c = np.zeros(grid.shape + (hi - lo + 1, n, n), complex)
        c[:, :, -lo] = np.eye(n)
        for (iy, ix), a in loops.items():
            c[iy, ix] = a.padded(lo, hi)
        return cls(grid, lo, c, mask)

    @property
    def n(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def hi(self) -> int:
        return self.lo + self.coeffs.shape[2] - 1

    @property
    def ok(self) -> np.ndarray:
        return self.mask == FrameStatus.OK

    def loop(self, iy: int, ix: int) -> LaurentLoop:
        return LaurentLoop(self.lo, self.coeffs[iy, ix])

    def evaluate(self, lam) -> np.ndarray:
        """Values at lam: (ny, nx, n, n) for scalar lam, (L, ny, nx, n, n) for a 1-d array."""
        lam = np.asarray(lam, dtype=complex)
        powers = lam[..., None] ** np.arange(self.lo, self.hi + 1)
        if lam.ndim == 0:
            return np.einsum("j,yxjab->yxab", powers, self.coeffs)
        return np.einsum("lj,yxjab->lyxab", powers, self.coeffs)

    def trimmed(self, tol: float = 0.0) -> FrameGrid:
        norms = np.abs(self.coeffs).max(axis=(0, 1, 3, 4))
        sig = np.nonzero(norms > tol)[0]
        a, b = (int(sig[0]), int(sig[-1])) if sig.size else (0, 0)
        return FrameGrid(self.grid, self.lo + a, self.coeffs[:, :, a:b + 1], self.mask)

    def support(self, tol: float = TAIL_TOL) -> tuple[int, int]:
        norms = np.abs(self.coeffs[self.ok]).max(axis=(0, 2, 3), initial=0.0)
        sig = np.nonzero(norms > tol)[0]
        if not sig.size:
            return 0, 0
        return self.lo + int(sig[0]), self.lo + int(sig[-1])

    def twist_residual(self, S, n_samples: int = 16) -> float:
        lam = roots_of_unity(n_samples)
        V = self.evaluate(lam)
        Vm = self.evaluate(-lam)
        r = np.abs(Vm - S @ V @ S).max(axis=(3, 4))
        return float(r[:, self.ok].max(initial=0.0))

    def subsampled(self, step: int = 2) -> FrameGrid:
        """Every step-th node along each axis, keeping the base point."""
        by, bx = self.grid.base_index
        ys = np.arange(by % step, self.grid.ny, step)
        xs = np.arange(bx % step, self.grid.nx, step)
        Z = self.grid.points()
        g = GridSpec(Z[ys[len(ys) // 2], xs[len(xs) // 2]], self.grid.h * step,
                     len(xs), len(ys), self.grid.base_point)
        return FrameGrid(g, self.lo, self.coeffs[np.ix_(ys, xs)], self.mask[np.ix_(ys, xs)])

    def with_mask(self, mask) -> FrameGrid:
        return FrameGrid(self.grid, self.lo, self.coeffs, mask)


# ---------------------------------------------------------------- ODE integration

def _rk4_edges(eta: NormalizedPotential, Y: np.ndarray, z0: np.ndarray, z1: np.ndarray,
               m: int) -> np.ndarray:
    """Integrate dY_k/dz = Y_{k-1} eta(z) along straight segments z0 -> z1 in m steps.

    Y has shape (B, K, n, n) with slot k the coefficient of lam^-k.
    """
    dz = (z1 - z0) / m

    def rhs(Yc, z):
        out = np.zeros_like(Yc)
        out[:, 1:] = Yc[:, :-1] @ eta(z)[:, None]
        return out

    d = dz[:, None, None, None]
    for s in range(m):
        z = z0 + s * dz
        k1 = rhs(Y, z)
        k2 = rhs(Y + 0.5 * d * k1, z + 0.5 * dz)
        k3 = rhs(Y + 0.5 * d * k2, z + 0.5 * dz)
        k4 = rhs(Y + d * k3, z + dz)
        Y = Y + d * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return Y


def _substeps(eta: NormalizedPotential, z0: np.ndarray, z1: np.ndarray) -> np.ndarray:
    size = np.stack([np.abs(eta(z)).sum(axis=-1).max(axis=-1)
                     for z in (z0, (z0 + z1) / 2, z1)]).max(axis=0)
    m = np.ceil(np.abs(z1 - z0) * size / RK_STEP_BOUND)
    return np.maximum(m, 1).astype(int)


def _stacked_to_loop(Y: np.ndarray) -> LaurentLoop:
    """Slots k = 0..K of lam^-k into a loop on [-K, 0]."""
    return LaurentLoop(-(Y.shape[0] - 1), Y[::-1])


def _check_overflow(Y: np.ndarray, cap: int) -> None:
    tail = np.abs(Y[..., cap + 1, :, :]).max(initial=0.0)
    if tail > TAIL_TOL:
        raise WindowOverflow(f"holomorphic frame needs degrees below -{cap} "
                             f"(coefficient {tail:.3g})")


def integrate_path(eta: NormalizedPotential, path: Sequence[complex],
                   window_cap: int = -DEFAULT_WINDOW[0], refine: int = 1) -> LaurentLoop:
    """F_- at the end of a polyline starting at path[0] with F_- = I there."""
    n = eta.n
    Y = np.zeros((1, window_cap + 2, n, n), complex)
    Y[0, 0] = np.eye(n)
    for a, b in zip(path[:-1], path[1:]):
        z0, z1 = np.array([a], complex), np.array([b], complex)
        m = int(_substeps(eta, z0, z1)[0]) * refine
        Y = _rk4_edges(eta, Y, z0, z1, m)
    _check_overflow(Y, window_cap)
    return _stacked_to_loop(Y[0, :window_cap + 1]).trim(0.0)


def _segment_distance(a: np.ndarray, b: np.ndarray, p: complex) -> np.ndarray:
    d = b - a
    t = np.clip(((p - a) * np.conj(d)).real / np.maximum(np.abs(d) ** 2, 1e-300), 0.0, 1.0)
    return np.abs(a + t * d - p)


def default_pole_radius(grid: GridSpec) -> float:
    return 0.05 * grid.h * max(grid.nx, grid.ny)


def _path_tree(grid: GridSpec, blocked_node: np.ndarray,
               edge_ok: Callable[[tuple[int, int], tuple[int, int]], bool]):
    """Parent and depth per node: horizontal-then-vertical from the base, BFS around obstacles."""
    ny, nx = grid.shape
    by, bx = grid.base_index
    parent = -np.ones((ny, nx, 2), int)
    depth = -np.ones((ny, nx), int)
    depth[by, bx] = 0
    order = sorted(((abs(iy - by) + abs(ix - bx), iy, ix) for iy in range(ny) for ix in range(nx)))
    for d, iy, ix in order[1:]:
        if blocked_node[iy, ix]:
            continue
        p = (iy - np.sign(iy - by), ix) if iy != by else (iy, ix - np.sign(ix - bx))
        if depth[p] >= 0 and edge_ok(p, (iy, ix)):
            parent[iy, ix] = p
            depth[iy, ix] = depth[p] + 1
    queue = deque(sorted(zip(*np.nonzero(depth >= 0)), key=lambda t: depth[t]))
    while queue:
        cur = queue.popleft()
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nb = (cur[0] + dy, cur[1] + dx)
            if not (0 <= nb[0] < ny and 0 <= nb[1] < nx) or depth[nb] >= 0 or blocked_node[nb]:
                continue
            if edge_ok(cur, nb):
                parent[nb] = cur
                depth[nb] = depth[cur] + 1
                queue.append(nb)
    return parent, depth


def integrate_potential(eta: NormalizedPotential, grid: GridSpec,
                        window_cap: int = -DEFAULT_WINDOW[0],
                        r_pole: float | None = None) -> FrameGrid:
    """Holomorphic frame F_- with F_-(base) = I on every node away from poles."""
    n = eta.n
    Z = grid.points()
    if r_pole is None:
        r_pole = default_pole_radius(grid)
    poles = eta.poles
    near = np.zeros(grid.shape, bool)
    for p in poles:
        near |= np.abs(Z - p) < r_pole
    by, bx = grid.base_index
    if near[by, bx]:
        raise PathThroughPole(f"base point {grid.base_point} lies within {r_pole:g} of a pole")

    def edge_ok(a, b):
        za, zb = np.array([Z[a]]), np.array([Z[b]])
        return all(_segment_distance(za, zb, p)[0] >= r_pole for p in poles)

    parent, depth = _path_tree(grid, near, edge_ok)
    lost = (~near) & (depth < 0)
    if lost.any():
        iy, ix = map(int, np.argwhere(lost)[0])
        raise PathThroughPole(f"no pole-avoiding grid path from the base to z = {Z[iy, ix]}")

    K = window_cap + 2
    Y = np.zeros(grid.shape + (K, n, n), complex)
    Y[by, bx, 0] = np.eye(n)
    if not eta.is_zero():
        for d in range(1, int(depth.max()) + 1):
            iy, ix = np.nonzero(depth == d)
            py, px = parent[iy, ix, 0], parent[iy, ix, 1]
            z0, z1 = Z[py, px], Z[iy, ix]
            m = _substeps(eta, z0, z1)
            for mm in np.unique(m):
                sel = m == mm
                Y[iy[sel], ix[sel]] = _rk4_edges(eta, Y[py[sel], px[sel]], z0[sel], z1[sel], int(mm))
    else:
        Y[~near, 0] = np.eye(n)
    _check_overflow(Y[~near], window_cap)
    Y = Y[:, :, :window_cap + 1]
    Y[near] = 0
    Y[near, 0] = np.eye(n)
    mask = np.where(near, FrameStatus.NEAR_POLE, FrameStatus.OK)
    # slot k holds lam^-k: reverse onto the window [-cap, 0]
    return FrameGrid(grid, -window_cap, Y[:, :, ::-1], mask).trimmed(1e-15)


# ---------------------------------------------------------------- factorization over a grid

def factor_grid(F: FrameGrid, fn: Callable[[LaurentLoop], FactorizationOutcome],
                enforce_base: bool = True):
    """Apply a factorization at every OK node.

    Returns (left grid, right grid, status array of Status values or None).
    Failed nodes are masked FACTOR_FAILED and hold the identity.
    """
    lefts, rights = {}, {}
    status = np.full(F.grid.shape, None, dtype=object)
    mask = F.mask.copy()
    conds = np.full(F.grid.shape, np.nan)
    for iy, ix in zip(*np.nonzero(F.ok)):
        out = fn(F.loop(iy, ix))
        status[iy, ix] = out.status
        conds[iy, ix] = out.condition
        if out.ok:
            lefts[iy, ix], rights[iy, ix] = out.left, out.right
        else:
            mask[iy, ix] = FrameStatus.FACTOR_FAILED
    base = F.grid.base_index
    if enforce_base and base in lefts:
        lefts[base] = LaurentLoop.identity(F.n)
        rights[base] = LaurentLoop.identity(F.n)
    L = FrameGrid.from_loops(F.grid, lefts, F.n, mask)
    R = FrameGrid.from_loops(F.grid, rights, F.n, mask)
    return L, R, status, conds


def frames_from_potential(eta: NormalizedPotential, grid: GridSpec, target: str = "compact",
                          M: int | None = None, window_cap: int = -DEFAULT_WINDOW[0],
                          F_minus: FrameGrid | None = None) -> FrameGrid:
    """Extended frames of the harmonic map with normalized potential eta."""
    if target not in ("compact", "noncompact"):
        raise ValueError(f"target must be 'compact' or 'noncompact', got {target!r}")
    if F_minus is None:
        F_minus = integrate_potential(eta, grid, window_cap)
    spec = eta.spec
    if target == "compact":
        fn = lambda g: iwasawa_compact(g, spec, M)  # noqa: E731
    else:
        fn = lambda g: iwasawa_real(g, spec, M)  # noqa: E731
    L, _, _, _ = factor_grid(F_minus, fn)
    return L.trimmed(1e-15)


# ---------------------------------------------------------------- backward direction

def _dx(V: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order central differences inside, np.gradient (2nd order) near the edges."""
    D = np.gradient(V, h, axis=axis, edge_order=2) if V.shape[axis] > 2 else \
        np.gradient(V, h, axis=axis)
    if V.shape[axis] >= 5:
        Vm = np.moveaxis(V, axis, 0)
        Dm = np.moveaxis(D, axis, 0)
        Dm[2:-2] = (Vm[:-4] - 8 * Vm[1:-3] + 8 * Vm[3:-1] - Vm[4:]) / (12 * h)
    return D


@dataclass(frozen=True, eq=False)
class PotentialSamples:
    """eta_{-1} recovered at grid nodes; NaN where unavailable."""

    grid: GridSpec
    values: np.ndarray       # (ny, nx, n, n)
    mask: np.ndarray         # FrameStatus codes
    shape_residual: np.ndarray  # per node, size of non-lam^-1 coefficients

    @property
    def ok(self) -> np.ndarray:
        return (self.mask == FrameStatus.OK) & np.isfinite(self.values).all(axis=(2, 3))

    @property
    def max_shape_residual(self) -> float:
        return float(np.nanmax(np.where(self.ok, self.shape_residual, np.nan), initial=0.0)) \
            if self.ok.any() else 0.0

    def gap(self, other: PotentialSamples | np.ndarray) -> float:
        vals = other.values if isinstance(other, PotentialSamples) else np.asarray(other)
        ok = self.ok & (other.ok if isinstance(other, PotentialSamples) else True)
        if not ok.any():
            return 0.0
        return float(np.abs(self.values - vals)[ok].max())


def negative_parts(F: FrameGrid, M: int | None = None) -> FrameGrid:
    """Birkhoff negative factor F_- (F = F_- F_+) at every OK node."""
    L, _, _, _ = factor_grid(F, lambda g: birkhoff(g, M))
    return L


def potential_from_frames(F: FrameGrid, M: int | None = None,
                          n_samples: int = 32) -> PotentialSamples:
    """Normalized potential eta_{-1}(z) of the map framed by F."""
    Fm = negative_parts(F, M)
    lam = roots_of_unity(n_samples)
    V = Fm.evaluate(lam)  # (L, ny, nx, n, n)
    bad = Fm.mask != FrameStatus.OK
    V[:, bad] = np.nan
    h = F.grid.h
    # F_- is holomorphic in z, so d/dz is d/dx along rows; fall back to -i d/dy on 1-wide grids
    if F.grid.nx > 1:
        dV = _dx(V, h, axis=2)
    elif F.grid.ny > 1:
        dV = -1j * _dx(V, h, axis=1)
    else:
        dV = np.zeros_like(V)
    A = np.linalg.solve(V, dV) if np.isfinite(V).all() else _nan_solve(V, dV)
    coeffs = np.fft.fft(A, axis=0) / n_samples  # index j holds degree j mod N
    eta = coeffs[-1]
    other = np.abs(np.delete(coeffs, n_samples - 1, axis=0)).max(axis=(0, 3, 4))
    mask = Fm.mask.copy()
    return PotentialSamples(F.grid, eta, mask, other)


def _nan_solve(V: np.ndarray, dV: np.ndarray) -> np.ndarray:
    out = np.full(np.broadcast_shapes(V.shape, dV.shape), np.nan, complex)
    good = np.isfinite(V).all(axis=(-1, -2)) & np.isfinite(dV).all(axis=(-1, -2))
    out[good] = np.linalg.solve(V[good], dV[good])
    return out


# ---------------------------------------------------------------- harmonicity

@dataclass(frozen=True, eq=False)
class FlatnessResidual:
    maurer_cartan: np.ndarray  # (ny, nx), NaN where undefined
    shape: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return np.fmax(self.maurer_cartan, self.shape)

    def max(self, where: np.ndarray | None = None) -> float:
        c = self.combined
        if where is not None:
            c = np.where(where, c, np.nan)
        return float(np.nanmax(c)) if np.isfinite(c).any() else 0.0


def maurer_cartan_forms(F: FrameGrid, lam: np.ndarray):
    """A = F^-1 F_x and B = F^-1 F_y at each lam sample by central differences."""
    V = F.evaluate(lam)
    V[:, ~F.ok] = np.nan
    h = F.grid.h
    Vx = np.gradient(V, h, axis=2, edge_order=2) if F.grid.nx > 2 else np.zeros_like(V)
    Vy = np.gradient(V, h, axis=1, edge_order=2) if F.grid.ny > 2 else np.zeros_like(V)
    return _nan_solve(V, Vx), _nan_solve(V, Vy)


def flatness_residual(F: FrameGrid, spec: SymmetricSpaceSpec, n_lambda: int = 8) -> FlatnessResidual:
    """Maurer-Cartan and lam-shape residuals of alpha = F^-1 dF per grid node.

    Shape: alpha_z may only have lam^-1 (in p) and lam^0 (in k) terms,
    alpha_zbar only lam^0 (in k) and lam^1 (in p).
    """
    lam = roots_of_unity(n_lambda)
    A, B = maurer_cartan_forms(F, lam)
    h = F.grid.h
    Bx = np.gradient(B, h, axis=2, edge_order=2) if F.grid.nx > 2 else np.zeros_like(B)
    Ay = np.gradient(A, h, axis=1, edge_order=2) if F.grid.ny > 2 else np.zeros_like(A)
    mc = np.abs(Bx - Ay + A @ B - B @ A).max(axis=(0, 3, 4))

    az = np.fft.fft(0.5 * (A - 1j * B), axis=0) / n_lambda
    azb = np.fft.fft(0.5 * (A + 1j * B), axis=0) / n_lambda
    deg = np.fft.fftfreq(n_lambda, 1.0 / n_lambda).astype(int)
    res = np.zeros(A.shape[1:3])
    for c, allowed in ((az, {-1: "p", 0: "k"}), (azb, {1: "p", 0: "k"})):
        for idx, d in enumerate(deg):
            X = c[idx]
            if d not in allowed:
                r = np.abs(X).max(axis=(2, 3))
            else:
                Xk, Xp = project_kp(X, spec)
                r = np.abs(Xk if allowed[d] == "p" else Xp).max(axis=(2, 3))
            res = np.fmax(res, r)
    nan = ~np.isfinite(mc)
    res[nan] = np.nan
    return FlatnessResidual(mc, res)


def refinement_ratio(F: FrameGrid, residual: Callable[[FrameGrid], np.ndarray],
                     margin: int = 2) -> tuple[float, float, float]:
    """(coarse, fine, coarse/fine) of a per-node residual at spacings 2h and h.

    The coarse grid is F subsampled by 2; both maxima are taken over the
    coarse nodes at least margin nodes inside its boundary.
    """
    C = F.subsampled(2)
    rc = residual(C)
    rf_all = residual(F)
    by, bx = F.grid.base_index
    rf = rf_all[by % 2::2, bx % 2::2][:rc.shape[0], :rc.shape[1]]
    sl = (slice(margin, -margin or None), slice(margin, -margin or None))
    rc, rf = rc[sl], rf[sl]
    good = np.isfinite(rc) & np.isfinite(rf)
    if not good.any():
        return 0.0, 0.0, float("nan")
    c, f = float(rc[good].max()), float(rf[good].max())
    return c, f, (c / f if f > 0 else float("inf"))
