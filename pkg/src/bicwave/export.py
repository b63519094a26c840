"""
Delimited-text exports of solved waveforms.

Every file is comma separated with a one-line header; column names carry
their units. Numbers are written with a fixed format so that repeated runs
produce byte-identical files. Power in dB is normalized to the maximum of
the exported quantity, so the largest row is exactly 0 dB, and clamped at
``DB_FLOOR``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .signal_model import ArrayScenario, SteeringSet, beampattern, dft_spectrum, steering_set
from .solver import TRACE_COLUMNS, SolveReport

DB_FLOOR = -350.0
_FMT = "{:.12e}"


def to_db(power: np.ndarray) -> np.ndarray:
    """``10 log10(P / max P)`` clamped at ``DB_FLOOR``; all-zero input maps to the floor."""
    power = np.asarray(power, dtype=float)
    peak = float(np.max(power)) if power.size else 0.0
    if not peak > 0:
        return np.full(power.shape, DB_FLOOR)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    return np.maximum(db, DB_FLOOR)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0.0:
            v = 0.0  # drop the sign of negative zero
        return _FMT.format(v)
    return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def export_beampattern(report: SolveReport, scenario: ArrayScenario, out_dir, steering: SteeringSet | None = None) -> tuple:
    """Write ``beampattern.csv`` (one row per angle and bin) and ``angle_marginal.csv``.

    Both are globally normalized: the grid to its largest ``P_kp`` and the
    marginal, ``sum_p P_kp``, to its largest angle.
    """
    out_dir = Path(out_dir)
    steering = steering or steering_set(scenario)
    P = beampattern(scenario, steering, report.x_star)
    db = to_db(P)
    freqs = scenario.bin_frequencies
    grid_rows = (
        (steering.angles_deg[k], freqs[i], P[k, i], db[k, i])
        for k in range(P.shape[0])
        for i in range(P.shape[1])
    )
    grid = write_table(out_dir / "beampattern.csv", ("theta_deg", "freq_hz", "power", "power_db"), grid_rows)
    marginal = P.sum(axis=1)
    mdb = to_db(marginal)
    marg = write_table(
        out_dir / "angle_marginal.csv",
        ("theta_deg", "power", "power_db"),
        zip(steering.angles_deg, marginal, mdb),
    )
    return grid, marg


def export_spectrum(report: SolveReport, scenario: ArrayScenario, out_dir) -> tuple:
    """Write the antenna-mean spectrum and the per-antenna spectra of ``x_star``."""
    out_dir = Path(out_dir)
    power = np.abs(dft_spectrum(scenario, report.x_star)) ** 2
    mean = power.mean(axis=0)
    freqs = scenario.bin_frequencies
    bins = scenario.bins
    mean_file = write_table(
        out_dir / "spectrum.csv",
        ("bin", "freq_hz", "power", "power_db"),
        zip(bins, freqs, mean, to_db(mean)),
    )
    per_db = to_db(power)
    per_rows = (
        (m, bins[i], freqs[i], power[m, i], per_db[m, i])
        for m in range(scenario.M)
        for i in range(scenario.N)
    )
    per_file = write_table(
        out_dir / "spectrum_antennas.csv", ("antenna", "bin", "freq_hz", "power", "power_db"), per_rows
    )
    return mean_file, per_file


def export_waveform(report: SolveReport, scenario: ArrayScenario, out_dir) -> Path:
    """Projected waveform and the pre-projection iterate, one row per sample."""
    rows = (
        (l // scenario.N, l % scenario.N, report.x_star[l].real, report.x_star[l].imag,
         report.x_final[l].real, report.x_final[l].imag)
        for l in range(scenario.L)
    )
    return write_table(
        Path(out_dir) / "waveform.csv",
        ("antenna", "sample", "re_star", "im_star", "re_final", "im_final"),
        rows,
    )


def export_trace(report: SolveReport, out_dir) -> Path:
    rows = ([getattr(r, c) for c in TRACE_COLUMNS] for r in report.trace)
    return write_table(Path(out_dir) / "trace.csv", TRACE_COLUMNS, rows)
