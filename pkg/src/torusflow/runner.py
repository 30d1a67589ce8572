"""Experiment orchestration: reference, initial data, flow, diagnostics, outputs.

Output layout under ``<output_dir>/<name>/``::

    trajectory/          snapshots (binary height fields) + steps.ndjson
    diagnostics.ndjson   one DiagnosticsRecord per snapshot
    summary.json         rate fits and measured constants
    manifest.json        RunManifest

The output directory resolves as: explicit argument, then the
``TORUSFLOW_OUTPUT_DIR`` environment variable, then the config value.
"""

from dataclasses import asdict, dataclass, field
import json
import logging
import os
from pathlib import Path
import time

import numpy as np

from . import __version__
from .config import DiagnosticsSpec, ExperimentConfig, InitialSpec, config_to_toml
from .diagnostics import (fit_rate, isoperimetric_check, linear_rate, linearized_constants,
                          trajectory_diagnostics)
from .errors import ConfigError, InsufficientData
from .flow import FlowConfig, run_flow
from .initial import generate_initial
from .io import dumps, write_ndjson, write_trajectory
from .recentering import track_translations
from .reference import Kind, ReferenceSpec, make_reference

log = logging.getLogger(__name__)

OUTPUT_ENV = "TORUSFLOW_OUTPUT_DIR"


def resolve_output_dir(explicit=None, configured="runs"):
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(configured)


@dataclass
class RunManifest:
    name: str
    config_hash: str
    code_version: str
    grid: dict
    wall_time: float
    acceptance: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    error: dict = None

    @property
    def passed(self):
        return self.error is None and all(self.acceptance.values())

    def to_dict(self):
        return asdict(self)


class PhaseError(Exception):
    """Wraps a module failure with the experiment phase it occurred in."""

    def __init__(self, phase, exc):
        super().__init__(f"[{phase}] {type(exc).__name__}: {exc}")
        self.phase = phase
        self.original = exc


def _summary(ref, cfg, traj, recs):
    dg = cfg.diagnostics
    out = {"fits": {}, "constants": {}, "linearized": linearized_constants(ref),
           "linear_rate": linear_rate(ref, cfg.flow.flow_kind)}
    for key, win in dg.fit_windows.items():
        try:
            out["fits"][key] = fit_rate(recs, key, win).to_dict()
        except (InsufficientData, ValueError) as exc:
            out["fits"][key] = {"error": str(exc)}
    for key in ("alexandrov_quotient", "poincare_quotient"):
        vals = [getattr(r, key) for r in recs if getattr(r, key) is not None]
        out["constants"][f"max_{key}"] = max(vals) if vals else None
    try:
        out["constants"]["isoperimetric"] = isoperimetric_check(recs)
    except InsufficientData:
        out["constants"]["isoperimetric"] = None
    defects = [r.projection_defect for r in recs if r.projection_defect is not None]
    out["constants"]["max_projection_defect"] = max(defects) if defects else None
    return out


def _acceptance(ref, cfg, traj, recs, summary):
    dg = cfg.diagnostics
    P = ref.perimeter
    gaps = np.array([r.perimeter_gap for r in recs])
    checks = {"perimeter_monotone": bool(np.all(np.diff(gaps) <= cfg.flow.monotone_tol * P))}
    if cfg.flow.volume_projection:
        checks["volume_conserved"] = bool(max(abs(r.volume_drift) for r in recs) <= dg.volume_tol)
    if dg.recentre:
        m = summary["constants"]["max_projection_defect"]
        checks["projection_defect_le_delta_star"] = m is not None and m <= dg.delta_star
    for key, target in dg.expected_rates.items():
        fit = summary["fits"].get(key, {})
        checks[f"rate_{key}"] = "rate" in fit and abs(fit["rate"] / target - 1) <= dg.rate_rtol
    return checks


@dataclass
class RunResult:
    ref: object
    trajectory: object
    records: list
    summary: dict
    acceptance: dict


def execute(cfg: ExperimentConfig) -> RunResult:
    """Compute an experiment without touching the filesystem.

    Failures are re-raised as PhaseError naming the phase.
    """
    phase = "reference"
    try:
        ref = make_reference(cfg.reference)
        phase = "initial"
        ini = cfg.initial
        u0 = generate_initial(ref, ini.kind, ini.amplitude, ini.kmax, ini.seed, ini.c11_target,
                              ini.k, ini.modes)
        if float(np.max(np.abs(u0))) > 0.2 * ref.tubular_radius:
            raise ConfigError("initial amplitude exceeds 0.2 * tubular radius")
        phase = "flow"
        traj = run_flow(ref, u0, cfg.flow)
        phase = "diagnostics"
        dg = cfg.diagnostics
        recs = trajectory_diagnostics(ref, traj, dg.delta_star, dg.recentre, dg.asymmetry)
        summary = _summary(ref, cfg, traj, recs)
        if dg.recentre and ref.kind in (Kind.DISC2D, Kind.CYLINDER3D):
            tt = track_translations(ref, traj, dg.delta_star,
                                    window=dg.fit_windows.get("perimeter_gap"))
            summary["translations"] = {"sigma_end": tt.sigmas[-1], "cauchy": tt.cauchy,
                                       "fit": tt.fit.to_dict() if tt.fit else None}
        acc = _acceptance(ref, cfg, traj, recs, summary)
    except Exception as exc:
        raise PhaseError(phase, exc) from exc
    return RunResult(ref, traj, recs, summary, acc)


def write_outputs(root, res: RunResult, manifest: RunManifest = None):
    """Trajectory, diagnostics stream and summary of a computed run."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_trajectory(root / "trajectory", res.ref, res.trajectory)
    write_ndjson(root / "diagnostics.ndjson", res.records)
    (root / "summary.json").write_text(dumps(res.summary) + "\n")
    if manifest is not None:
        manifest.grid["shape"] = list(res.ref.grid.shape)
        manifest.acceptance = res.acceptance
        manifest.outputs = {"trajectory": str(root / "trajectory"),
                            "diagnostics": str(root / "diagnostics.ndjson"),
                            "summary": str(root / "summary.json")}


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> RunManifest:
    """Run one configured experiment and write all outputs.

    A module failure is recorded in manifest.json with its phase and then
    re-raised (as PhaseError).
    """
    t0 = time.perf_counter()
    root = resolve_output_dir(output_dir, cfg.output_dir) / cfg.name
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.name, cfg.hash(), __version__,
                           {"kind": cfg.reference.kind.value, "n": cfg.reference.n}, 0.0)
    (root / "config.toml").write_text(config_to_toml(cfg))
    try:
        res = execute(cfg)
    except PhaseError as exc:
        manifest.error = {"phase": exc.phase, "type": type(exc.original).__name__,
                          "message": str(exc.original)}
        manifest.wall_time = time.perf_counter() - t0
        (root / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
        raise
    write_outputs(root, res, manifest)
    manifest.wall_time = time.perf_counter() - t0
    (root / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _preset(name, ref, flow, initial, diagnostics):
    return ExperimentConfig(name, ref, flow, initial, diagnostics)


def presets(n_lamella=128, n_disc=128):
    """Named reproduction recipes for the trajectory-based acceptance checks."""
    lam = ReferenceSpec(Kind.LAMELLA2D, n=n_lamella)
    disc = ReferenceSpec(Kind.DISC2D, radius=0.25, n=n_disc)
    lam_rate = 2 * (2 * np.pi) ** 2
    return {
        "lamella-vpmcf-rate": _preset(
            "lamella-vpmcf-rate", lam, FlowConfig("VPMCF", dt=1e-4, t_end=0.2, snapshot_every=40),
            InitialSpec("single_mode", 1e-3, k=1),
            DiagnosticsSpec(fit_windows={"perimeter_gap": [0.02, 0.2]},
                            expected_rates={"perimeter_gap": lam_rate})),
        "lamella-sdf-rate": _preset(
            "lamella-sdf-rate", lam, FlowConfig("SDF", dt=1e-6, t_end=0.005, snapshot_every=100),
            InitialSpec("single_mode", 1e-3, k=1),
            DiagnosticsSpec(fit_windows={"perimeter_gap": [0.0005, 0.005]},
                            expected_rates={"perimeter_gap": lam_rate * (2 * np.pi) ** 2})),
        "disc-vpmcf-translate": _preset(
            "disc-vpmcf-translate", disc, FlowConfig("VPMCF", dt=1e-4, t_end=0.3, snapshot_every=50),
            InitialSpec("fourier_modes", modes=[[1, 0.01, 0.0], [2, 0.005, 0.0]]),
            DiagnosticsSpec(fit_windows={"perimeter_gap": [0.02, 0.25]},
                            expected_rates={"perimeter_gap": 96.0}, rate_rtol=0.10)),
        "lamella-zero": _preset(
            "lamella-zero", ReferenceSpec(Kind.LAMELLA2D, n=64),
            FlowConfig("VPMCF", dt=1e-4, t_end=0.01, snapshot_every=10),
            InitialSpec("zero"), DiagnosticsSpec()),
        "lamella-random-small": _preset(
            "lamella-random-small", ReferenceSpec(Kind.LAMELLA2D, n=64),
            FlowConfig("VPMCF", dt=1e-4, t_end=0.01, snapshot_every=10, seed=3),
            InitialSpec("random_band_limited", kmax=4, seed=3, c11_target=1e-2),
            DiagnosticsSpec()),
    }


def preset_toml(name):
    return config_to_toml(presets()[name])
