"""Command line pipeline: potential -> frames -> duality -> uniton -> surfaces.

    dpwdual run config.toml [--out DIR] [--grid NX NY] [--h H] [--window M]
                            [--samples N] [--target compact|noncompact|both]
                            [--check-only]

Exit codes: 0 all checks pass, 1 numerical failure or failed check, 2 config error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, PipelineConfig, Tolerances, parse_config, parse_target
from .dpw import (FrameGrid, FrameStatus, GridSpec, NormalizedPotential, PathThroughPole,
                  PotentialError, RationalFunction, flatness_residual, frames_from_potential,
                  integrate_potential, potential_from_frames, refinement_ratio)
from .duality import EmptyDomain, compact_dual, embedding_gap, noncompact_from_compact
from .loopalg import LaurentLoop, LoopError
from .symspace import SymmetricSpaceSpec, willmore_space
from .uniton import extended_solution, uhlenbeck_residual, uniton_number
from .willmore import (MeromorphicPair, closed_form_embeddings, conformality_residual,
                       example_potential, export_mesh, mixed_laplacian, surface_mesh)

log = logging.getLogger("dpwdual")


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunReport:
    config: dict
    checks: list[Check] = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def check(self, name: str, value: float, threshold: float, relation: str = "<") -> Check:
        value = float(value)
        ok = {"<": value < threshold, "<=": value <= threshold, ">": value > threshold,
              ">=": value >= threshold, "==": value == threshold}[relation]
        c = Check(name, value, float(threshold), bool(ok), relation)
        self.checks.append(c)
        return c

    def to_dict(self, timestamp: str | None = None) -> dict:
        timing = dict(self.timing)
        if timestamp is not None:
            timing["timestamp"] = timestamp
        return {"tool": {"name": "dpwdual", "version": __version__},
                "passed": self.passed, "error": self.error,
                "config": self.config,
                "checks": [c.to_dict() for c in self.checks],
                "stages": self.stages, "timing": timing}


def _clean(x):
    """JSON-safe floats (NaN and inf as strings)."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_potential(cfg: PipelineConfig):
    """(potential, spec, meromorphic pair or None)."""
    pc = cfg.potential
    if pc.kind == "example":
        if (cfg.space.n, cfg.space.n_neg, cfg.space.k_dim) != (8, 1, 4):
            raise ConfigError("the example potential lives in n = 8, n_neg = 1, k_dim = 4")
        spec = willmore_space()
        try:
            p = MeromorphicPair(RationalFunction.from_coeffs(pc.f2, pc.f2_den),
                                RationalFunction.from_coeffs(pc.f4, pc.f4_den))
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from None
        return example_potential(p, spec), spec, p
    try:
        spec = SymmetricSpaceSpec.standard(cfg.space.n, cfg.space.n_neg, cfg.space.k_dim)
    except ValueError as exc:
        raise ConfigError(f"space: {exc}") from None
    n = spec.n
    entries = [[None] * n for _ in range(n)]
    for e in pc.entries:
        if not (0 <= e.row < n and 0 <= e.col < n):
            raise ConfigError(f"potential entry ({e.row}, {e.col}) outside an {n}x{n} matrix")
        if entries[e.row][e.col] is not None:
            raise ConfigError(f"potential entry ({e.row}, {e.col}) given twice")
        try:
            entries[e.row][e.col] = RationalFunction.from_coeffs(e.num, e.den)
        except ValueError as exc:
            raise ConfigError(f"potential entry ({e.row}, {e.col}): {exc}") from None
    try:
        return NormalizedPotential.from_entries(entries, spec), spec, None
    except PotentialError as exc:
        raise ConfigError(f"potential rejected: {exc}") from None


def grid_of(cfg: PipelineConfig) -> GridSpec:
    g = cfg.grid
    try:
        return GridSpec(g.center, g.h, g.nx, g.ny, g.base)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def validate(cfg: PipelineConfig):
    """Everything that can be checked without numerical work."""
    eta, spec, pair = build_potential(cfg)
    grid = grid_of(cfg)
    return eta, spec, pair, grid


def _mask_counts(F: FrameGrid) -> dict:
    return {s.name: int((F.mask == s).sum()) for s in FrameStatus}


def _frame_rows(target: str, F: FrameGrid, spec: SymmetricSpaceSpec) -> list[list[str]]:
    """Cartan embedding at lam = 1, in a basis where it is real."""
    V = F.evaluate(1.0)
    U = spec.unitarizer if target == "compact" else np.eye(spec.n)
    Z = F.grid.points()
    rows = []
    for iy in range(F.grid.ny):
        for ix in range(F.grid.nx):
            status = FrameStatus(int(F.mask[iy, ix])).name
            head = [target, f"{Z[iy, ix].real:.15e}", f"{Z[iy, ix].imag:.15e}", status]
            if F.mask[iy, ix] == FrameStatus.OK:
                C = np.linalg.inv(U) @ V[iy, ix] @ spec.S @ np.linalg.inv(V[iy, ix]) @ U
                rows.append(head + [f"{c:.15e}" for c in C.real.ravel()])
            else:
                rows.append(head + ["nan"] * spec.n ** 2)
    return rows


def _closed_form_gap(F: FrameGrid, pair: MeromorphicPair, spec, target: str) -> float:
    pb = pair.rebased(F.grid.base_point)
    Z = F.grid.points()
    V = F.evaluate(1.0)
    gap = 0.0
    for iy, ix in zip(*np.nonzero(F.ok)):
        nc, c = closed_form_embeddings(pb, Z[iy, ix], spec)
        ref = c if target == "compact" else nc
        C = V[iy, ix] @ spec.S @ np.linalg.inv(V[iy, ix])
        gap = max(gap, float(np.abs(C - ref).max()))
    return gap


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path | None = None) -> RunReport:
    out = Path(out_dir if out_dir is not None else cfg.out)
    tol: Tolerances = cfg.tolerances
    rep = RunReport(_clean(cfg.to_dict()))
    t_all = time.perf_counter()

    def stage(name):
        t = time.perf_counter()

        def done():
            rep.timing[name] = round(time.perf_counter() - t, 6)
        return done

    eta, spec, pair, grid = validate(cfg)
    M, N, cap = cfg.loop.window, cfg.loop.samples, cfg.loop.window
    rep.stages["potential"] = _clean({
        "kind": cfg.potential.kind, "n": spec.n, "zero": eta.is_zero(),
        "poles": [[p.real, p.imag] for p in np.sort_complex(eta.poles)]})
    try:
        done = stage("integrate")
        Fm = integrate_potential(eta, grid, window_cap=cap)
        done()
        rep.stages["integrate"] = {"window": [Fm.lo, Fm.hi], "mask": _mask_counts(Fm)}

        frames: dict[str, FrameGrid] = {}
        for target in cfg.targets:
            done = stage(f"frames_{target}")
            F = frames_from_potential(eta, grid, target, M, cap, F_minus=Fm)
            done()
            frames[target] = F
            point = spec.rho if target == "compact" else spec.tau
            V = F.evaluate(np.exp(2j * np.pi * np.arange(16) / 16))
            real = np.abs(point(V) - V).max(axis=(0, 3, 4))[F.ok].max(initial=0.0)
            base = F.loop(*grid.base_index)
            rep.stages[f"frames_{target}"] = {"window": [F.lo, F.hi], "mask": _mask_counts(F)}
            rep.check(f"frames.{target}.twist", F.twist_residual(spec.S), tol.twist)
            rep.check(f"frames.{target}.reality", real, tol.reality)
            ident = LaurentLoop.identity(spec.n).padded(base.lo, base.hi)
            rep.check(f"frames.{target}.base_identity",
                      float(np.abs(base.coeffs - ident).max()), 0.0, "==")
            if pair is not None:
                done = stage(f"closed_form_{target}")
                rep.check(f"closed_form.{target}", _closed_form_gap(F, pair, spec, target),
                          tol.embedding)
                done()

        done = stage("potentials")
        Z = grid.points()
        samples = {}
        for target, F in frames.items():
            ps = potential_from_frames(F, M, N)
            samples[target] = ps
            rep.check(f"potential.{target}.roundtrip", ps.gap(eta(Z)), tol.potential)
            rep.check(f"potential.{target}.shape", ps.max_shape_residual, tol.potential)
        done()

        done = stage("flatness")
        for target, F in frames.items():
            fr = flatness_residual(F, spec)
            c, f, ratio = refinement_ratio(F, lambda G: flatness_residual(G, spec).combined)
            rep.stages[f"flatness_{target}"] = {"residual": fr.max(), "coarse": c, "fine": f,
                                                "ratio": ratio}
            rep.check(f"flatness.{target}.order", ratio if f > tol.flatness else np.inf,
                      tol.order_ratio_min, ">=")
        done()

        H = frames.get("compact")
        pot_H = samples.get("compact")
        if "noncompact" in frames:
            done = stage("duality_forward")
            FU, drep = compact_dual(frames["noncompact"], spec, M, check_potential=False)
            pot_H = potential_from_frames(FU, M, N)
            drep.potential_gap = samples["noncompact"].gap(pot_H)
            done()
            rep.stages["duality_forward"] = _clean(drep.to_dict())
            rep.check("duality.potential_gap", drep.potential_gap, tol.potential)
            rep.check("duality.reality", drep.reality_gap, tol.reality)
            rep.check("duality.k_structure", drep.k_residual, tol.structure)
            rep.check("duality.theta_structure", drep.theta_residual, tol.structure)
            if H is not None:
                rep.check("duality.dual_vs_compact_frames", embedding_gap(FU, H, spec), tol.embedding)
            H = FU
        done = stage("duality_converse")
        try:
            Fb, brep = noncompact_from_compact(H, spec, M, check_potential=False)
            rep.stages["duality_converse"] = _clean(brep.to_dict())
            back = potential_from_frames(Fb, M, N)
            region = brep.local_domain
            gap = float(np.abs(back.values - pot_H.values)[region & back.ok & pot_H.ok].max(initial=0.0))
            rep.check("duality.converse_potential_gap", gap, tol.potential)
            rep.check("duality.converse_base_ok", float(region[grid.base_index]), 1.0, "==")
            if "noncompact" in frames:
                rep.check("duality.roundtrip_embedding",
                          embedding_gap(Fb, frames["noncompact"], spec, where=region), tol.roundtrip)
        except EmptyDomain as exc:
            rep.stages["duality_converse"] = {"error": str(exc)}
            rep.check("duality.converse_base_ok", 0.0, 1.0, "==")
        done()

        done = stage("uniton")
        ureps = {}
        for target, F in frames.items():
            ureps[target] = uniton_number(F, spec, n_samples=None, window_cap=cap, uhlenbeck=False)
        if "noncompact" in frames:
            ureps["compact_dual"] = uniton_number(FU, spec, window_cap=cap, uhlenbeck=False)
        for name, u in ureps.items():
            F = frames.get(name, H)
            ures = uhlenbeck_residual(extended_solution(F))
            c, f, ratio = refinement_ratio(F, lambda G: uhlenbeck_residual(extended_solution(G)).per_point)
            u = dataclasses.replace(u, uhlenbeck_residual=ures.max)
            ureps[name] = u
            rep.stages[f"uniton_{name}"] = _clean({**u.to_dict(), "uhlenbeck_coarse": c,
                                                   "uhlenbeck_fine": f, "uhlenbeck_ratio": ratio})
            rep.check(f"uniton.{name}.tail_mass", u.tail_mass, tol.tail)
            rep.check(f"uniton.{name}.uhlenbeck_order", ratio if f > tol.uhlenbeck else np.inf,
                      tol.order_ratio_min, ">=")
        if "noncompact" in ureps:
            a, b = ureps["noncompact"], ureps["compact_dual"]
            rep.check("uniton.duality_degree_gap", abs(a.ad_degree - b.ad_degree), 0, "==")
            rep.check("uniton.duality_window_gap",
                      float(np.abs(np.subtract(a.frame_window, b.frame_window)).max()), 0, "==")
        done()

        if pair is not None:
            done = stage("surfaces")
            written = export_mesh(pair, grid, cfg.lambdas, out)
            surf = {}
            for k, lam in enumerate(cfg.lambdas):
                mesh = surface_mesh(pair, grid, lam)
                zv = Z[mesh.valid]
                scale = max(1.0, float(np.abs(mesh.vertices[mesh.valid]).max()))
                lap = float(np.abs(mixed_laplacian(pair, zv, lam, grid.h / 2)).max(initial=0.0))
                dist = np.min(np.abs(zv[:, None] - pair.singular_points()[None]), axis=1,
                              initial=np.inf)
                radius = np.minimum(0.25 * dist, grid.h)
                conf = float(conformality_residual(pair, zv, lam, radius).max(initial=0.0))
                surf[str(k)] = {"lambda": [complex(lam).real, complex(lam).imag],
                                "vertices": mesh.n_vertices, "faces": len(mesh.faces()),
                                "laplacian": lap, "conformality": conf}
                rep.check(f"surface.{k}.harmonic", lap, tol.harmonic * scale)
                rep.check(f"surface.{k}.conformal", conf, tol.conformal)
            csv_src = out / "surface_0.csv"
            (out / "surface.csv").write_bytes(csv_src.read_bytes())
            rep.stages["surfaces"] = _clean({"files": sorted(p.name for p in written) + ["surface.csv"],
                                             **surf})
            done()

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "re_z", "im_z", "status"]
                   + [f"c{a}{b}" for a in range(spec.n) for b in range(spec.n)])
        for target, F in frames.items():
            w.writerows(_frame_rows(target, F, spec))
        out.mkdir(parents=True, exist_ok=True)
        (out / "frames.csv").write_text(buf.getvalue())
    except (LoopError, PathThroughPole, np.linalg.LinAlgError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    rep.timing["total"] = round(time.perf_counter() - t_all, 6)
    rep.stages = _clean(rep.stages)
    return rep


def write_report(rep: RunReport, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = out / "report.json"
    path.write_text(json.dumps(_clean(rep.to_dict(stamp)), indent=2) + "\n")
    return path


def _defaults_help() -> str:
    d = PipelineConfig().to_dict()
    lines = ["config defaults (TOML tables and keys):"]
    for sect in ("grid", "loop", "tolerances"):
        lines.append(f"  [{sect}] " + ", ".join(f"{k} = {v}" for k, v in d[sect].items()))
    lines.append("  [potential] kind = \"example\", f2 = [0, 1], f4 = [0, 0, 1] "
                 "(coefficients lowest degree first)")
    lines.append("  [run] target = \"both\", lambdas = [1, \"1j\", -1]   [output] dir = \"out\"")
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpwdual", description=__doc__.split("\n")[0],
                                 epilog=_defaults_help(),
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the pipeline on a TOML config",
                         epilog=_defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    run.add_argument("--grid", nargs=2, type=int, metavar=("NX", "NY"))
    run.add_argument("--h", type=float, help="grid spacing")
    run.add_argument("--window", type=int, metavar="M", help="loop degree window / truncation")
    run.add_argument("--samples", type=int, metavar="N", help="circle samples")
    run.add_argument("--target", choices=["compact", "noncompact", "both"])
    run.add_argument("--check-only", action="store_true",
                     help="validate the config and potential, then exit")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
        nx, ny = args.grid if args.grid else (None, None)
        cfg = cfg.with_overrides(grid_nx=nx, grid_ny=ny, grid_h=args.h, loop_window=args.window,
                                 loop_samples=args.samples,
                                 targets=parse_target(args.target) if args.target else None,
                                 out=str(args.out) if args.out else None)
        validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.check_only:
        print(f"config OK: {args.config}")
        return 0
    rep = run_pipeline(cfg)
    path = write_report(rep, Path(cfg.out))
    for c in rep.checks:
        log.info("%-40s %-4s %.3e %s %.3e", c.name, "PASS" if c.passed else "FAIL",
                 c.value, c.relation, c.threshold)
    failed = [c.name for c in rep.checks if not c.passed]
    if rep.error:
        print(f"numerical failure: {rep.error}", file=sys.stderr)
    elif failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
    print(f"report: {path}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
