"""The isotropic Willmore example: potential from (f2, f4), closed-form frames,
and the associated family of minimal surfaces x_lam in R^4.

The closed-form 8x4 matrices and x_lam are transcribed once and serve as
the oracle for the numerical pipeline.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dpw import GridSpec, NormalizedPotential, RationalFunction, default_pole_radius
from .symspace import SymmetricSpaceSpec, willmore_space

J13 = np.diag([-1.0, 1.0, 1.0, 1.0])
REALITY_TOL = 1e-10


class NonReal(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class MeromorphicPair:
    f2: RationalFunction
    f4: RationalFunction

    def __post_init__(self):
        if self.f4.deriv().is_zero():
            raise ValueError("f4' vanishes identically; x_lam divides by it")

    @classmethod
    def polynomials(cls, f2_coeffs, f4_coeffs) -> MeromorphicPair:
        return cls(RationalFunction.poly(f2_coeffs), RationalFunction.poly(f4_coeffs))

    @property
    def df2(self) -> RationalFunction:
        return self.f2.deriv()

    @property
    def df4(self) -> RationalFunction:
        return self.f4.deriv()

    def rebased(self, z0: complex) -> MeromorphicPair:
        """Same derivatives, values shifted so that f2(z0) = f4(z0) = 0."""
        return MeromorphicPair(self.f2 - complex(self.f2(z0)), self.f4 - complex(self.f4(z0)))

    def poles(self) -> np.ndarray:
        return np.concatenate([self.f2.poles(), self.f4.poles()])

    def singular_points(self) -> np.ndarray:
        """Poles of f2, f4 and zeros of f4' (where x_lam blows up)."""
        d4 = self.df4
        zeros = d4.num.roots() if d4.num.degree() > 0 else np.zeros(0, complex)
        return np.concatenate([self.poles(), np.asarray(zeros, complex)])


def b_hat(df2, df4) -> np.ndarray:
    """The 4x4 block; broadcasts over array-valued derivatives."""
    a, b = np.broadcast_arrays(np.asarray(df2, complex), np.asarray(df4, complex))
    B = np.zeros(a.shape + (4, 4), complex)
    B[..., 0, 0], B[..., 0, 1] = -1j * a, a
    B[..., 1, 0], B[..., 1, 1] = 1j * a, -a
    B[..., 2, 0], B[..., 2, 1] = b, 1j * b
    B[..., 3, 0], B[..., 3, 1] = 1j * b, -b
    return 0.5 * B


def off_diagonal(B: np.ndarray) -> np.ndarray:
    """[[0, B], [-B^t I_{1,3}, 0]] in so(1,7)."""
    X = np.zeros(B.shape[:-2] + (8, 8), complex)
    X[..., :4, 4:] = B
    X[..., 4:, :4] = -np.swapaxes(B, -1, -2) @ J13
    return X


def example_potential(p: MeromorphicPair, spec: SymmetricSpaceSpec | None = None) -> NormalizedPotential:
    spec = spec or willmore_space()
    C2 = off_diagonal(b_hat(1.0, 0.0))
    C4 = off_diagonal(b_hat(0.0, 1.0))
    eta = NormalizedPotential(((p.df2, C2), (p.df4, C4)), spec)
    rng = np.random.default_rng(7)
    for z in rng.uniform(-1, 1, 5) + 1j * rng.uniform(-1, 1, 5):
        if np.min(np.abs(p.singular_points() - z), initial=np.inf) < 1e-6:
            continue
        B = b_hat(p.df2(z), p.df4(z))
        if np.abs(B.T @ J13 @ B).max() > 1e-12 * max(1.0, np.abs(B).max() ** 2):
            raise AssertionError("B_hat fails isotropy")
    return eta


def closed_form_frames(p: MeromorphicPair, z: complex):
    """(Phi, Phi_tilde, d1, d2, d3): the non-compact and compact 8x4 column frames."""
    f2, f4 = complex(p.f2(z)), complex(p.f4(z))
    if not (np.isfinite(f2) and np.isfinite(f4)):
        raise ZeroDivisionError(f"pole at z = {z}")
    c = np.conj
    a2 = abs(f2) ** 2
    d1, d2, d3 = 1 + a2 + abs(f4) ** 2, 1 + a2, 1 + abs(f4) ** 2
    s3 = np.sqrt(d3)
    im_part = c(f2) * f4 - f2 * c(f4)
    re_part = c(f2) * f4 + f2 * c(f4)

    P = np.zeros((8, 4), complex)
    P[0] = [1 + a2 / 2, a2 / 2, -1j * im_part / (2 * s3), re_part / (2 * s3)]
    P[1] = [-a2 / 2, 1 - a2 / 2, 1j * im_part / (2 * s3), -re_part / (2 * s3)]
    P[2] = [0, 0, 1 / s3, 0]
    P[3] = [0, 0, 0, 1 / s3]
    P[4] = [-1j * (f2 - c(f2)) / 2, -1j * (f2 - c(f2)) / 2, -(f4 + c(f4)) / (2 * s3),
            -1j * (f4 - c(f4)) / (2 * s3)]
    P[5] = [(f2 + c(f2)) / 2, (f2 + c(f2)) / 2, -1j * (f4 - c(f4)) / (2 * s3),
            (f4 + c(f4)) / (2 * s3)]

    s12, s2 = np.sqrt(d1 * d2), np.sqrt(d2)
    Q = np.zeros((8, 4), complex)
    Q[0] = [1 / s2, 0, re_part / (2 * s12), 1j * im_part / (2 * s12)]
    Q[1] = [0, 1 / s2, 1j * im_part / (2 * s12), -re_part / (2 * s12)]
    Q[2] = [0, 0, s2 / np.sqrt(d1), 0]
    Q[3] = [0, 0, 0, s2 / np.sqrt(d1)]
    Q[4] = [(f2 + c(f2)) / (2 * s2), -1j * (f2 - c(f2)) / (2 * s2), -(f4 + c(f4)) / (2 * s12),
            -1j * (f4 - c(f4)) / (2 * s12)]
    Q[5] = [1j * (f2 - c(f2)) / (2 * s2), (f2 + c(f2)) / (2 * s2), -1j * (f4 - c(f4)) / (2 * s12),
            (f4 + c(f4)) / (2 * s12)]
    return P, Q, d1, d2, d3


def noncompact_embedding(Phi: np.ndarray, J: np.ndarray | None = None) -> np.ndarray:
    """2 Pi - I with Pi the J-orthogonal projector onto the column span."""
    J = np.diag([-1.0] + [1.0] * 7) if J is None else J
    Pi = Phi @ np.linalg.solve(Phi.T @ J @ Phi, Phi.T @ J)
    return 2 * Pi - np.eye(len(J))


def compact_embedding(Phi_t: np.ndarray, spec: SymmetricSpaceSpec | None = None) -> np.ndarray:
    """2 Phi Phi^t - I moved into the J-basis by the unitarizer."""
    spec = spec or willmore_space()
    U = spec.unitarizer
    return U @ (2 * Phi_t @ Phi_t.T - np.eye(spec.n)) @ np.linalg.inv(U)


def closed_form_embeddings(p: MeromorphicPair, z: complex, spec: SymmetricSpaceSpec | None = None):
    """Cartan embeddings (non-compact, compact) of the closed-form maps at z."""
    spec = spec or willmore_space()
    Phi, Phi_t, *_ = closed_form_frames(p, z)
    return noncompact_embedding(Phi, spec.J), compact_embedding(Phi_t, spec)


# ---------------------------------------------------------------- minimal surface

def surface_formula(f2, df2, f4, df4, cf2, cdf2, cf4, cdf4, lam) -> np.ndarray:
    """x_lam with holomorphic data and their conjugates passed separately."""
    return np.stack([
        -1j * df2 / df4 + 1j * cdf2 / cdf4,
        -df2 / df4 - cdf2 / cdf4,
        -1j * (f2 / lam - lam * cf2) + 1j * df2 * f4 / (lam * df4) - 1j * lam * cdf2 * cf4 / cdf4,
        (f2 / lam + lam * cf2) - df2 * f4 / (lam * df4) - lam * cdf2 * cf4 / cdf4,
    ], axis=-1)


def _values(p: MeromorphicPair, z):
    return p.f2(z), p.df2(z), p.f4(z), p.df4(z)


def polarized_surface(p: MeromorphicPair, z, w, lam: complex) -> np.ndarray:
    """X(z, w) with conj(f(z)) replaced by conj(f(conj w)); x(z) = X(z, conj z)."""
    hol = _values(p, z)
    anti = tuple(np.conj(v) for v in _values(p, np.conj(np.asarray(w, complex))))
    return surface_formula(*hol, *anti, lam)


def minimal_surface(p: MeromorphicPair, z, lam: complex = 1.0) -> np.ndarray:
    """Real 4-vector(s) x_lam(z); raises at zeros of f4' or if the formula is not real."""
    z = np.asarray(z, complex)
    df4 = p.df4(z)
    if np.any(df4 == 0):
        raise ZeroDivisionError("f4' vanishes at an evaluation point")
    if abs(abs(lam) - 1) > 1e-12:
        raise ValueError("lam must lie on the unit circle")
    x = polarized_surface(p, z, np.conj(z), lam)
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    im = float(np.abs(x.imag).max(initial=0.0))
    if im > REALITY_TOL * scale:
        raise NonReal(f"x_lam has imaginary part {im:.3g}")
    return x.real


def mixed_laplacian(p: MeromorphicPair, z, lam: complex, eps: float) -> np.ndarray:
    """(X(z+e, w+e) - X(z+e, w-e) - X(z-e, w+e) + X(z-e, w-e)) / (4 e^2) at w = conj z.

    For X = hol(z) + antihol(w) this vanishes identically, so it tests x_{z zbar} = 0.
    """
    z = np.asarray(z, complex)
    w = np.conj(z)
    X = lambda a, b: polarized_surface(p, a, b, lam)  # noqa: E731
    return (X(z + eps, w + eps) - X(z + eps, w - eps) - X(z - eps, w + eps)
            + X(z - eps, w - eps)) / (4 * eps ** 2)


def surface_dz(p: MeromorphicPair, z, lam: complex, radius: float, n_nodes: int = 32) -> np.ndarray:
    """d x / d z by the Cauchy integral over a circle, in the holomorphic slot only."""
    z = np.asarray(z, complex)
    w = np.conj(z)
    r = np.asarray(radius, float)[..., None]
    e = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    vals = polarized_surface(p, z[..., None] + r * e, w[..., None], lam)
    return np.mean(vals * np.conj(e)[:, None], axis=-2) / r


def conformality_residual(p: MeromorphicPair, z, lam: complex, radius: float) -> np.ndarray:
    """|<x_z, x_z>| / |x_z|^2 (complex bilinear over Hermitian norm) per point."""
    d = surface_dz(p, z, lam, radius)
    num = np.abs(np.sum(d * d, axis=-1))
    den = np.sum(np.abs(d) ** 2, axis=-1)
    return num / np.maximum(den, 1e-300)


# ---------------------------------------------------------------- meshes

@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    grid: GridSpec
    lam: complex
    vertices: np.ndarray  # (ny, nx, 4), NaN where excluded
    valid: np.ndarray     # (ny, nx) bool

    @property
    def n_vertices(self) -> int:
        return int(self.valid.sum())

    def faces(self) -> list[tuple[int, int, int, int]]:
        """Quads (1-based, counter-clockwise in the z-plane) over fully valid cells."""
        idx = -np.ones(self.valid.shape, int)
        idx[self.valid] = np.arange(1, self.n_vertices + 1)
        out = []
        ny, nx = self.valid.shape
        for iy in range(ny - 1):
            for ix in range(nx - 1):
                q = (idx[iy, ix], idx[iy, ix + 1], idx[iy + 1, ix + 1], idx[iy + 1, ix])
                if min(q) > 0:
                    out.append(tuple(int(v) for v in q))
        return out


def surface_mesh(p: MeromorphicPair, grid: GridSpec, lam: complex,
                 exclusion: float | None = None) -> SurfaceMesh:
    Z = grid.points()
    r = default_pole_radius(grid) if exclusion is None else exclusion
    sing = p.singular_points()
    valid = np.ones(grid.shape, bool)
    for s in sing:
        valid &= np.abs(Z - s) >= r
    V = np.full(grid.shape + (4,), np.nan)
    if valid.any():
        V[valid] = minimal_surface(p, Z[valid], lam)
    return SurfaceMesh(grid, complex(lam), V, valid)


def _fmt(x: float) -> str:
    return f"{x:.15e}"


def mesh_obj(mesh: SurfaceMesh) -> str:
    buf = io.StringIO()
    buf.write(f"# minimal surface x_lam, lam = {_fmt(mesh.lam.real)} {_fmt(mesh.lam.imag)}\n")
    buf.write("# coordinates x1 x2 x3; x4 is in the CSV\n")
    for v in mesh.vertices[mesh.valid]:
        buf.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
    for q in mesh.faces():
        buf.write("f " + " ".join(map(str, q)) + "\n")
    return buf.getvalue()


def mesh_csv(mesh: SurfaceMesh) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_z", "im_z", "x1", "x2", "x3", "x4"])
    Z = mesh.grid.points()
    for z, v in zip(Z[mesh.valid], mesh.vertices[mesh.valid]):
        w.writerow([_fmt(z.real), _fmt(z.imag)] + [_fmt(c) for c in v])
    return buf.getvalue()


def export_mesh(p: MeromorphicPair, grid: GridSpec, lam_list: Sequence[complex], out_dir,
                exclusion: float | None = None) -> list[Path]:
    """surface_<k>.obj and surface_<k>.csv for each lam_list[k]; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, lam in enumerate(lam_list):
        mesh = surface_mesh(p, grid, lam, exclusion)
        if mesh.n_vertices == 0:
            raise ValueError("no grid points left after excluding singular points")
        for suffix, text in (("obj", mesh_obj(mesh)), ("csv", mesh_csv(mesh))):
            path = out / f"surface_{k}.{suffix}"
            path.write_text(text)
            written.append(path)
    return written
