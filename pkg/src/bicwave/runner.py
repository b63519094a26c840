"""
Run configured scenarios and write their export bundles.

Output layout under the configured directory::

    manifest.yaml      config echo, versions, one entry per sub-run
    summary.csv        E_R, converged cost in dB, modulus deviation, spectral error
    run00_er_0.01/     one directory per E_R value
        beampattern.csv  angle_marginal.csv  spectrum.csv
        spectrum_antennas.csv  waveform.csv  trace.csv  manifest.yaml
"""

from __future__ import annotations

import math
import multiprocessing
import os
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy
import yaml

from . import __version__
from .config import ScenarioConfig
from .export import export_beampattern, export_spectrum, export_trace, export_waveform, write_table
from .qp_engine import DesiredBeampattern
from .solver import solve_beampattern, solve_nullform
from .spectral_mask import build_mask
from .signal_model import steering_set


@dataclass
class SubRun:
    index: int
    E_R: float
    seed: int
    directory: Path
    status: str
    summary: dict
    error: Optional[str] = None
    warnings: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def cost_db(self) -> float:
        cost = self.summary.get("cost_star", float("nan"))
        return 10 * math.log10(cost) if cost > 0 else float("-inf") if cost == 0 else float("nan")


@dataclass
class ExportBundle:
    directory: Path
    config: ScenarioConfig
    runs: List[SubRun]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.runs)

    @property
    def manifest(self) -> Path:
        return self.directory / "manifest.yaml"

    @property
    def summary_table(self) -> Path:
        return self.directory / "summary.csv"


def versions() -> dict:
    return {
        "bicwave": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def sub_run_seed(cfg: ScenarioConfig, index: int) -> int:
    """Seed for sweep entry ``index``: the configured seed, or one derived from it."""
    if cfg.solver.sweep_seed == "shared":
        return cfg.solver.seed
    return int(np.random.SeedSequence([cfg.solver.seed, index]).generate_state(1)[0])


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def solve_one(cfg: ScenarioConfig, index: int, E_R: float, seed: int, directory) -> SubRun:
    """Solve one sweep entry and write its files. Solver errors are recorded, not raised."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sub_cfg = replace(cfg, E_R=(E_R,), solver=replace(cfg.solver, seed=seed))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            sc = cfg.scenario()
            mask = build_mask(sc, cfg.band_spec(), E_R)
            params = cfg.solver.params(E_R, seed)
            steering = steering_set(sc)
            if cfg.mode == "nullform":
                report = solve_nullform(sc, list(cfg.null_angles_deg), mask, params)
            else:
                desired = DesiredBeampattern(cfg.desired_grid(sc))
                report = solve_beampattern(sc, steering, desired, mask, params)
            export_beampattern(report, sc, directory, steering)
            export_spectrum(report, sc, directory)
            export_waveform(report, sc, directory)
            export_trace(report, directory)
            summary = {k: _plain(v) for k, v in report.summary().items()}
            status, error = "ok", None
        except Exception as exc:  # recorded per sub-run; siblings keep going
            summary, status, error = {}, "error", f"{type(exc).__name__}: {exc}"
    notes = tuple(sorted({str(w.message) for w in caught}))
    manifest = {
        "schema_version": cfg.schema_version,
        "status": status,
        "error": error,
        "E_R": E_R,
        "seed": seed,
        "versions": versions(),
        "warnings": list(notes),
        "metrics": summary,
        "config": sub_cfg.to_dict(),
    }
    (directory / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    return SubRun(index, E_R, seed, directory, status, summary, error, notes)


def _dir_name(index: int, E_R: float) -> str:
    return f"run{index:02d}_er_{E_R:g}"


def run(cfg: ScenarioConfig, out_dir=None, workers: Optional[int] = None) -> ExportBundle:
    """Solve every E_R value of ``cfg`` and write the bundle.

    Sweep entries run in separate processes (``workers`` of them, default
    one per entry up to the CPU count); ``workers=1`` solves in-process.
    """
    root = Path(out_dir if out_dir is not None else cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, i, e, sub_run_seed(cfg, i), root / _dir_name(i, e)) for i, e in enumerate(cfg.E_R)]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers <= 1 or len(jobs) == 1:
        runs = [solve_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers, mp_context=multiprocessing.get_context("spawn")) as pool:
            futures = [pool.submit(solve_one, *job) for job in jobs]
            runs = [f.result() for f in futures]

    write_table(
        root / "summary.csv",
        ("E_R", "cost_db", "modulus_dev", "spectral_error", "converged", "iterations", "seed", "status"),
        (
            (
                r.E_R,
                r.cost_db,
                r.summary.get("modulus_dev", float("nan")),
                r.summary.get("spectral_error_star", float("nan")),
                bool(r.summary.get("converged", False)),
                int(r.summary.get("iterations_used", 0)),
                r.seed,
                r.status,
            )
            for r in runs
        ),
    )
    manifest = {
        "schema_version": cfg.schema_version,
        "versions": versions(),
        "config": cfg.to_dict(),
        "runs": [
            {"directory": r.directory.name, "E_R": r.E_R, "seed": r.seed, "status": r.status, "error": r.error}
            for r in runs
        ],
    }
    (root / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    return ExportBundle(root, cfg, runs)
