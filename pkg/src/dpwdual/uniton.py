"""Finite-uniton diagnostics: Laurent degree of Ad(F), extended solutions and
the Uhlenbeck equation for them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpw import FrameGrid
from .loopalg import DEFAULT_WINDOW, TAIL_TOL, WindowOverflow, roots_of_unity
from .symspace import SymmetricSpaceSpec


@dataclass(frozen=True)
class UnitonReport:
    frame_window: tuple[int, int]
    ad_degree: int
    tail_mass: float
    uhlenbeck_residual: float = float("nan")
    window_cap: int = -DEFAULT_WINDOW[0]

    @property
    def finite(self) -> bool:
        return self.tail_mass < TAIL_TOL and self.ad_degree < self.window_cap * 2

    def to_dict(self) -> dict:
        return {"frame_window": list(self.frame_window), "ad_degree": self.ad_degree,
                "tail_mass": self.tail_mass, "uhlenbeck_residual": self.uhlenbeck_residual,
                "finite_uniton_type": self.finite}


def ad_coefficients(F: FrameGrid, spec: SymmetricSpaceSpec, n_samples: int) -> np.ndarray:
    """Largest Ad(F) coefficient (in basis coordinates) per DFT index, max over OK nodes."""
    basis = spec.basis_g
    dim, n = len(basis), spec.n
    coord = np.linalg.pinv(basis.reshape(dim, n * n).T)  # (dim, n^2)
    lam = roots_of_unity(n_samples)
    powers = lam[:, None] ** np.arange(F.lo, F.hi + 1)
    peak = np.zeros(n_samples)
    for iy in range(F.grid.ny):
        ok = F.ok[iy]
        if not ok.any():
            continue
        V = np.einsum("lj,xjab->lxab", powers, F.coeffs[iy, ok])  # (L, nx', n, n)
        Vinv = np.linalg.inv(V)
        img = V[:, :, None] @ basis[None, None] @ Vinv[:, :, None]  # (L, nx', dim, n, n)
        c = img.reshape(img.shape[:3] + (n * n,)) @ coord.T          # (L, nx', dim, dim)
        C = np.fft.fft(c, axis=0) / n_samples
        peak = np.maximum(peak, np.abs(C).max(axis=(1, 2, 3)))
    return peak


def uniton_number(F: FrameGrid, spec: SymmetricSpaceSpec, n_samples: int | None = None,
                  tol: float = TAIL_TOL, window_cap: int = -DEFAULT_WINDOW[0],
                  uhlenbeck: bool = True) -> UnitonReport:
    """Minimal k with Ad(F) = sum_{|j| <= k} lam^j T_j over the OK nodes."""
    lo, hi = F.support(tol)
    if max(-lo, hi) >= window_cap:
        raise WindowOverflow(f"frame support [{lo}, {hi}] touches the window cap {window_cap}")
    bound = 2 * max(-F.lo, F.hi, 1)  # Ad(F) degrees lie in [-bound, bound]
    if n_samples is None:
        n_samples = max(16, 1 << int(np.ceil(np.log2(2 * bound + 2))))
    peak = ad_coefficients(F, spec, n_samples)
    deg = np.abs(np.fft.fftfreq(n_samples, 1.0 / n_samples).astype(int))
    sig = deg[peak > tol]
    k = int(sig.max()) if sig.size else 0
    tail = peak[deg > k]
    res = float("nan")
    if uhlenbeck:
        res = uhlenbeck_residual(extended_solution(F)).max
    return UnitonReport((lo, hi), k, float(tail.max(initial=0.0)), res, window_cap)


@dataclass(frozen=True, eq=False)
class ExtendedSolution:
    Phi: FrameGrid       # F(lam) F(1)^-1
    A_x: np.ndarray      # (ny, nx, n, n), A = A_x dx + A_y dy
    A_y: np.ndarray

    @property
    def A_z(self) -> np.ndarray:
        return 0.5 * (self.A_x - 1j * self.A_y)

    @property
    def A_zbar(self) -> np.ndarray:
        return 0.5 * (self.A_x + 1j * self.A_y)


def _grad(V: np.ndarray, h: float, axis: int) -> np.ndarray:
    if V.shape[axis] < 3:
        return np.zeros_like(V)
    return np.gradient(V, h, axis=axis, edge_order=2)


def extended_solution(F: FrameGrid) -> ExtendedSolution:
    """Phi = F F(1)^-1 and A = 1/2 Fr^-1 dFr with Fr = F(-1) F(1)^-1."""
    F1 = F.evaluate(1.0)
    bad = ~F.ok
    F1[bad] = np.eye(F.n)
    cond = np.linalg.cond(F1)
    if not np.all(np.isfinite(cond)) or cond.max() > 1e12:
        raise np.linalg.LinAlgError("frame is singular at lam = 1")
    F1inv = np.linalg.inv(F1)
    Phi = FrameGrid(F.grid, F.lo, F.coeffs @ F1inv[:, :, None], F.mask)
    if np.abs(Phi.evaluate(1.0)[F.ok] - np.eye(F.n)).max(initial=0.0) > 1e-12:
        raise AssertionError("Phi(z, 1) is not the identity")
    base = F.grid.base_index
    if F.ok[base] and np.abs(Phi.coeffs[base] - F.loop(*base).coeffs).max() > 0:
        raise AssertionError("Phi at the base point differs from the frame there")
    Fr = F.evaluate(-1.0) @ F1inv
    Fr[bad] = np.nan
    h = F.grid.h
    Frinv = np.linalg.inv(np.where(np.isfinite(Fr), Fr, np.eye(F.n)))
    Frinv[bad] = np.nan
    A_x = 0.5 * Frinv @ _grad(Fr, h, axis=1)
    A_y = 0.5 * Frinv @ _grad(Fr, h, axis=0)
    return ExtendedSolution(Phi, A_x, A_y)


@dataclass(frozen=True, eq=False)
class UhlenbeckResidual:
    per_point: np.ndarray

    @property
    def max(self) -> float:
        v = self.per_point
        return float(np.nanmax(v)) if np.isfinite(v).any() else 0.0


def uhlenbeck_residual(E: ExtendedSolution, n_lambda: int = 8) -> UhlenbeckResidual:
    """Gap in Phi^-1 dPhi = (1 - 1/lam) A^(1,0) + (1 - lam) A^(0,1) per node."""
    lam = roots_of_unity(n_lambda)
    V = E.Phi.evaluate(lam)
    V[:, ~E.Phi.ok] = np.nan
    h = E.Phi.grid.h
    Vx, Vy = _grad(V, h, axis=2), _grad(V, h, axis=1)
    good = np.isfinite(V).all(axis=(0, 3, 4))
    Vinv = np.full_like(V, np.nan)
    Vinv[:, good] = np.linalg.inv(V[:, good])
    X, Y = Vinv @ Vx, Vinv @ Vy
    lz = (1 - 1 / lam)[:, None, None, None, None]
    lzb = (1 - lam)[:, None, None, None, None]
    gap_z = 0.5 * (X - 1j * Y) - lz * E.A_z[None]
    gap_zb = 0.5 * (X + 1j * Y) - lzb * E.A_zbar[None]
    r = np.fmax(np.abs(gap_z).max(axis=(0, 3, 4)), np.abs(gap_zb).max(axis=(0, 3, 4)))
    return UhlenbeckResidual(r)
