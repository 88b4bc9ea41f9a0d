"""Run orchestration behind the ``anideg-ch`` command.

Every ``cmd_*`` returns an exit code (0 iff all checks pass); library
errors propagate and are turned into a one-line message by the CLI.
"""

from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from anideg import __version__
from anideg.anisotropy import certify_constants
from anideg.config import RunConfig, load_config
from anideg.diagnostics import CSV_COLUMNS
from anideg.errors import MissingArtifact
from anideg.estimates import (
    REPORT_COLUMNS,
    check_energy_law,
    check_energy_monotone,
    check_entropy_estimate,
    check_mass_conservation,
    check_snapshots_excess,
    check_snapshots_h2,
    check_weak_residual,
    CheckReport,
    run_delta_continuation,
)
from anideg.grid import read_snapshot, write_snapshot
from anideg.io import (
    CHECKS_FILE,
    DIAGNOSTICS_FILE,
    MANIFEST_FILE,
    SNAPSHOT_DIR,
    FileTrajectory,
    read_diagnostics,
    snapshot_name,
    write_csv_atomic,
    write_diagnostics,
    write_json_atomic,
    write_text_atomic,
)
from anideg.material import RegularizedMaterial, regularize_initial
from anideg.stepper import SimState, advance

log = logging.getLogger(__name__)

SCALING_FILE = "scaling.csv"
SCALING_SUMMARY = "scaling.json"
MIN_SLOPE = 0.3


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    started: str
    finished: str = ""
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def write(self, directory):
        write_json_atomic(Path(directory) / MANIFEST_FILE, self.__dict__)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _check_dict(rep: CheckReport):
    return {
        "name": rep.name,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "margin": rep.margin,
        "pass": bool(rep.passed),
        "detail": rep.detail,
    }


def prepare(cfg: RunConfig, delta=None):
    """(grid, anisotropy, material, phi0) for a config; phi0 already scaled."""
    grid = cfg.build_grid()
    aniso = cfg.build_anisotropy()
    certify_constants(aniso, cfg.anisotropy["n_samples"], cfg.anisotropy["seed"])
    delta = cfg.material["delta"] if delta is None else delta
    material = RegularizedMaterial(cfg.material_factory()(), delta)
    raw = cfg.initial_raw(grid)
    if cfg.initial["kind"] == "from_snapshot":
        # a stored state is resumed as-is
        phi0 = raw
    else:
        phi0 = regularize_initial(raw, delta)
    return grid, aniso, material, phi0


def run_checks(traj, final, material, aniso):
    """The post-run checks recorded in checks.csv and the manifest."""
    reports = [
        check_mass_conservation(traj, strict=False),
        check_energy_law(traj, strict=False),
        check_energy_monotone(traj, strict=False),
        check_entropy_estimate(traj, material, aniso, strict=False),
        check_snapshots_h2(traj, aniso, strict=False),
        check_snapshots_excess(traj, material, strict=False),
    ]
    res = check_weak_residual(final.grid, final.phi, final.J, final.w, material, aniso)
    reports.append(CheckReport("weak_residual_aux", res["aux"], 1e-10, res["aux"] - 1e-10, res["aux"] <= 1e-10))
    return reports


def _summary(traj, final):
    last = traj.accepted[-1]
    return {
        "t": last.t,
        "steps": final.step_count,
        "rejected": final.n_rejected,
        "mass": last.mass,
        "energy": last.energy,
        "entropy": last.entropy,
        "dissipation_cum": last.dissipation_cum,
        "excess_L2": last.excess_L2,
        "phi_min": float(np.min(final.phi)),
        "phi_max": float(np.max(final.phi)),
    }


def _print_reports(reports, out=print):
    width = max(len(r.name) for r in reports)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        out(f"{r.name:<{width}}  lhs={r.lhs: .6e}  rhs={r.rhs: .6e}  {status}  {r.detail}".rstrip())


def cmd_run(config_path, output=None) -> int:
    cfg = load_config(config_path)
    outdir = Path(output or cfg.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.hash, __version__, _now())
    grid, aniso, material, phi0 = prepare(cfg)
    state = SimState.from_phi(grid, phi0, material, aniso)
    traj = FileTrajectory(outdir, grid, cfg.output["snapshots"])
    final = advance(state, cfg.build_solver(), traj)

    write_diagnostics(outdir / DIAGNOSTICS_FILE, traj.records)
    reports = run_checks(traj, final, material, aniso)
    write_csv_atomic(outdir / CHECKS_FILE, REPORT_COLUMNS, [r.csv_row() for r in reports])
    _print_reports(reports)

    manifest.artifacts = [DIAGNOSTICS_FILE, CHECKS_FILE] + traj.snapshot_files
    manifest.summary = _summary(traj, final)
    manifest.checks = [_check_dict(r) for r in reports]
    manifest.finished = _now()
    manifest.write(outdir)
    return 0 if all(r.passed for r in reports) else 1


def parse_deltas(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"cannot parse deltas {text!r}") from None


def cmd_continuation(config_path, deltas, output=None, workers=None) -> int:
    cfg = load_config(config_path)
    if isinstance(deltas, str):
        deltas = parse_deltas(deltas)
    outdir = Path(output or cfg.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.hash, __version__, _now())
    grid = cfg.build_grid()
    aniso = cfg.build_anisotropy()
    certify_constants(aniso, cfg.anisotropy["n_samples"], cfg.anisotropy["seed"])
    factory = cfg.material_factory()
    raw = cfg.initial_raw(grid)
    result = run_delta_continuation(grid, factory, aniso, raw, cfg.build_solver(), deltas, workers)

    reports = []
    artifacts = []
    for delta, traj in zip(result.deltas, result.trajectories):
        sub = Path(f"delta_{delta:g}")
        write_diagnostics(outdir / sub / DIAGNOSTICS_FILE, traj.records)
        artifacts.append(str(sub / DIAGNOSTICS_FILE))
        if cfg.output["snapshots"]:
            (outdir / sub / SNAPSHOT_DIR).mkdir(parents=True, exist_ok=True)
            for i, (t, phi) in enumerate(traj.snapshots):
                rel = sub / SNAPSHOT_DIR / snapshot_name(i)
                write_snapshot(outdir / rel, grid, t, phi)
                artifacts.append(str(rel))
        material = RegularizedMaterial(factory(), delta)
        reports.append(check_snapshots_excess(traj, material, strict=False))

    if result.vacuous:
        reports.append(CheckReport("excess_slope", float("nan"), MIN_SLOPE, 0.0, True, "vacuous: excess identically zero"))
    else:
        detail = f"fit over {len(result.deltas) - len(result.vacuous_deltas)} runs"
        reports.append(
            CheckReport("excess_slope", MIN_SLOPE, result.slope, MIN_SLOPE - result.slope, result.slope >= MIN_SLOPE, detail)
        )

    rows = []
    for i, (delta, sup) in enumerate(zip(result.deltas, result.excess_sup)):
        cauchy = result.cauchy[i] if i < len(result.cauchy) else float("nan")
        rows.append([repr(delta), repr(float(sup)), repr(cauchy)])
    write_csv_atomic(outdir / SCALING_FILE, ("delta", "excess_sup", "cauchy_to_next"), rows)
    write_json_atomic(
        outdir / SCALING_SUMMARY,
        {
            "deltas": result.deltas,
            "excess_sup": [float(x) for x in result.excess_sup],
            "slope": result.slope,
            "intercept": result.intercept,
            "vacuous": result.vacuous,
            "vacuous_deltas": result.vacuous_deltas,
            "cauchy": result.cauchy,
        },
    )
    write_csv_atomic(outdir / CHECKS_FILE, REPORT_COLUMNS, [r.csv_row() for r in reports])
    _print_reports(reports)
    print(f"slope = {result.slope:.4f}  vacuous = {result.vacuous}")

    manifest.artifacts = [SCALING_FILE, SCALING_SUMMARY, CHECKS_FILE] + artifacts
    manifest.summary = {"slope": result.slope, "vacuous": result.vacuous, "excess_sup": list(map(float, result.excess_sup))}
    manifest.checks = [_check_dict(r) for r in reports]
    manifest.finished = _now()
    manifest.write(outdir)
    return 0 if all(r.passed for r in reports) else 1


def _fmt(x):
    return repr(float(x))


def grid_dump(grid, values):
    """gnuplot text: one ``x [y] value`` line per node, blank line between x-blocks."""
    x = grid.coords()
    lines = []
    if grid.dim == 1:
        for xi, v in zip(x[0], values):
            lines.append(f"{_fmt(xi)} {_fmt(v)}")
        return "\n".join(lines) + "\n"
    if grid.dim != 2:
        raise ValueError("grid dumps are written for 1D and 2D only")
    for i in range(grid.N[0]):
        for j in range(grid.N[1]):
            lines.append(f"{_fmt(x[0][i, j])} {_fmt(x[1][i, j])} {_fmt(values[i, j])}")
        lines.append("")
    return "\n".join(lines) + "\n"


def emit_plot_data(run_dir):
    """Two-column ``t value`` files per diagnostic plus a final-field dump."""
    run_dir = Path(run_dir)
    diag = run_dir / DIAGNOSTICS_FILE
    if not diag.is_file():
        raise MissingArtifact(f"{run_dir} has no {DIAGNOSTICS_FILE}")
    recs = [r for r in read_diagnostics(diag) if r.accepted]
    written = []
    for col in CSV_COLUMNS:
        if col in ("t", "accepted"):
            continue
        path = run_dir / f"{col}.dat"
        text = "".join(f"{_fmt(r.t)} {_fmt(getattr(r, col))}\n" for r in recs)
        write_text_atomic(path, text)
        written.append(path)
    snaps = sorted((run_dir / SNAPSHOT_DIR).glob("*.adch"))
    if snaps:
        grid, t, values = read_snapshot(snaps[-1])
        if grid.dim <= 2:
            path = run_dir / "final_field.dat"
            write_text_atomic(path, f"# t = {t!r}\n" + grid_dump(grid, values))
            written.append(path)
    return written
