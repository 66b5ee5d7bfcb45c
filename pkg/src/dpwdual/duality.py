"""Compact dual of a harmonic map into a non-compact symmetric space, and back.

Forward: split the extended frame F = F_U W_+ with F_U in the compact real
form (always possible).  Backward: split a compact frame H = F W_+ with F
in the non-compact real form, which only works near the base point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .dpw import (FrameGrid, PotentialSamples, factor_grid, maurer_cartan_forms,
                  potential_from_frames)
from .factor import Status, iwasawa_compact, iwasawa_real
from .loopalg import roots_of_unity
from .symspace import SymmetricSpaceSpec, project_kp


class EmptyDomain(RuntimeError):
    pass


@dataclass(eq=False)
class DualityReport:
    potential_gap: float = 0.0
    reality_gap: float = 0.0
    k_residual: float = 0.0
    theta_residual: float = 0.0
    local_domain: np.ndarray | None = None
    w_plus_record: FrameGrid | None = field(default=None, repr=False)
    status_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"potential_gap": self.potential_gap, "reality_gap": self.reality_gap,
             "k_residual": self.k_residual, "theta_residual": self.theta_residual,
             "status_counts": dict(sorted(self.status_counts.items()))}
        if self.local_domain is not None:
            d["local_domain_points"] = int(self.local_domain.sum())
            d["grid_points"] = int(self.local_domain.size)
        return d


def _counts(status: np.ndarray) -> dict:
    out: dict[str, int] = {}
    for s in status.ravel():
        key = s.value if isinstance(s, Status) else "Masked"
        out[key] = out.get(key, 0) + 1
    return out


def reality_residual(F: FrameGrid, point_map, n_samples: int = 16) -> float:
    """max |point_map(F(lam)) - F(lam)| on circle samples at OK nodes.

    For an anti-holomorphic point map the loop-level involution evaluates
    at 1/conj(lam), which is lam on the circle.
    """
    V = F.evaluate(roots_of_unity(n_samples))
    r = np.abs(point_map(V) - V).max(axis=(0, 3, 4))
    return float(r[F.ok].max(initial=0.0))


def structure_residuals(F: FrameGrid, spec: SymmetricSpaceSpec, n_lambda: int = 8):
    """(k, theta) residuals of the compact frame's Maurer-Cartan form.

    k: the lam^0 terms of alpha_x, alpha_y must lie in u cap k^C.
    theta: the lam^1 term of alpha_zbar must equal theta of the lam^-1 term of alpha_z.
    """
    A, B = maurer_cartan_forms(F, roots_of_unity(n_lambda))
    theta = spec.rho.on_algebra
    cA = np.fft.fft(A, axis=0) / n_lambda
    cB = np.fft.fft(B, axis=0) / n_lambda
    k_res = 0.0
    for c in (cA[0], cB[0]):
        _, Xp = project_kp(c, spec)
        r = np.fmax(np.abs(Xp).max(axis=(2, 3)), np.abs(theta(c) - c).max(axis=(2, 3)))
        k_res = max(k_res, float(np.nanmax(r, initial=0.0)))
    az_m1 = 0.5 * (cA[-1] - 1j * cB[-1])
    azb_p1 = 0.5 * (cA[1] + 1j * cB[1])
    t = np.abs(theta(az_m1) - azb_p1).max(axis=(2, 3))
    return k_res, float(np.nanmax(t, initial=0.0))


def compact_dual(F: FrameGrid, spec: SymmetricSpaceSpec, M: int | None = None,
                 check_potential: bool = True) -> tuple[FrameGrid, DualityReport]:
    """F = F_U W_+ pointwise; F_U frames the compact dual harmonic map."""
    FU, W, status, _ = factor_grid(F, lambda g: iwasawa_compact(g, spec, M))
    FU = FU.trimmed(1e-15)
    k_res, t_res = structure_residuals(FU, spec)
    rep = DualityReport(
        reality_gap=reality_residual(FU, spec.rho),
        k_residual=k_res, theta_residual=t_res,
        local_domain=FU.ok, w_plus_record=W, status_counts=_counts(status))
    if check_potential:
        rep.potential_gap = same_potential_check(F, FU, M)
    return FU, rep


def base_component(ok: np.ndarray, base: tuple[int, int]) -> np.ndarray:
    """Connected (4-neighbour) component of ok containing base."""
    if not ok[base]:
        return np.zeros_like(ok)
    lab, _ = ndimage.label(ok)
    return lab == lab[base]


def noncompact_from_compact(H: FrameGrid, spec: SymmetricSpaceSpec, M: int | None = None,
                            check_potential: bool = True) -> tuple[FrameGrid, DualityReport]:
    """H = F W_+ pointwise with F in the non-compact real form, where it exists."""
    F, W, status, _ = factor_grid(H, lambda g: iwasawa_real(g, spec, M))
    base = H.grid.base_index
    if not F.ok[base]:
        raise EmptyDomain(f"non-compact Iwasawa fails at the base point ({status[base]})")
    F = F.trimmed(1e-15)
    rep = DualityReport(
        reality_gap=reality_residual(F, spec.tau),
        local_domain=base_component(F.ok, base), w_plus_record=W,
        status_counts=_counts(status))
    if check_potential:
        rep.potential_gap = same_potential_check(H, F, M)
    return F, rep


def same_potential_check(F: FrameGrid, H: FrameGrid, M: int | None = None,
                         samples: tuple[PotentialSamples, PotentialSamples] | None = None) -> float:
    """max |eta_F - eta_H| over nodes where both potentials are available."""
    if F.grid != H.grid:
        raise ValueError("frame grids differ in geometry or base point")
    a, b = samples if samples is not None else (potential_from_frames(F, M),
                                                potential_from_frames(H, M))
    return a.gap(b)


def embedding_gap(F: FrameGrid, H: FrameGrid, spec: SymmetricSpaceSpec,
                  lam=(1.0, 1j, -1.0), where: np.ndarray | None = None) -> float:
    """max |F S F^-1 - H S H^-1| over the given lam values and common OK nodes."""
    ok = F.ok & H.ok
    if where is not None:
        ok &= where
    if not ok.any():
        return 0.0
    gap = 0.0
    for l in lam:
        A, B = F.evaluate(l)[ok], H.evaluate(l)[ok]
        CA = A @ spec.S @ np.linalg.inv(A)
        CB = B @ spec.S @ np.linalg.inv(B)
        gap = max(gap, float(np.abs(CA - CB).max()))
    return gap

