"""
Scenario configuration files.

A scenario is a YAML mapping::

    schema_version: 1
    mode: nullform            # or beampattern
    array: {M: 16, N: 32, f_c: 300.0e6, B: 200.0e6, K: 181, d_over_halfwavelength: 1.0}
    null_angles_deg: [10, 40, 120]
    desired_background: 1.0   # beampattern mode: d outside every box
    desired_boxes:            # later boxes override earlier ones
      - {theta_lo: 40, theta_hi: 80, f_lo: 943.75e6, f_hi: 981.25e6, level: 0.0}
    normalize_desired: true   # scale d so that sum d^2 = K N M N
    protected_bands:
      - {f_lo: 328.6e6, f_hi: 335.0e6}          # optional "level" (default 0)
    E_R: 0.03                 # or a list for a sweep
    solver: {lambda: null, zeta_inner: 1.0e-5, zeta_outer: 1.0e-5,
             max_inner_iters: 500, max_outer_iters: 100, seed: 0,
             alignment: template, sweep_seed: shared}
    output: {dir: out}

Angles are in degrees and frequencies in Hz. ``d_meters`` may replace
``d_over_halfwavelength``; the half wavelength is taken at ``f_c``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .signal_model import SPEED_OF_LIGHT, ArrayScenario, InputDomainError
from .spectral_mask import ALIGNMENTS, BandSpec, bins_in_band
from .solver import SolverParams

SCHEMA_VERSION = 1
MODES = ("nullform", "beampattern")
SWEEP_SEEDS = ("shared", "derived")


class ConfigError(ValueError):
    """Configuration failed to parse or validate; ``problems`` lists every issue."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ArrayConfig:
    M: int
    N: int
    f_c: float
    B: float
    K: int
    d_over_halfwavelength: Optional[float] = 1.0
    d_meters: Optional[float] = None
    c: float = SPEED_OF_LIGHT

    @property
    def spacing(self) -> float:
        if self.d_meters is not None:
            return self.d_meters
        return self.d_over_halfwavelength * self.c / (2.0 * self.f_c)

    def scenario(self) -> ArrayScenario:
        return ArrayScenario(M=self.M, N=self.N, d=self.spacing, f_c=self.f_c, B=self.B, K=self.K, c=self.c)


@dataclass(frozen=True)
class DesiredBox:
    theta_lo: float
    theta_hi: float
    f_lo: float
    f_hi: float
    level: float = 0.0


@dataclass(frozen=True)
class ProtectedBand:
    f_lo: float
    f_hi: float
    level: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    lam: Optional[float] = None
    zeta_inner: float = 1e-5
    zeta_outer: float = 1e-5
    max_inner_iters: int = 500
    max_outer_iters: int = 100
    seed: int = 0
    alignment: str = "template"
    sweep_seed: str = "shared"

    def params(self, E_R: float, seed: Optional[int] = None) -> SolverParams:
        return SolverParams(
            lam=self.lam,
            zeta_inner=self.zeta_inner,
            zeta_outer=self.zeta_outer,
            max_inner_iters=self.max_inner_iters,
            max_outer_iters=self.max_outer_iters,
            E_R=E_R,
            seed=self.seed if seed is None else seed,
            alignment=self.alignment,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    array: ArrayConfig
    mode: str
    E_R: tuple
    null_angles_deg: tuple = ()
    desired_boxes: tuple = ()
    desired_background: float = 0.0
    normalize_desired: bool = True
    protected_bands: tuple = ()
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "out"
    schema_version: int = SCHEMA_VERSION

    @property
    def is_sweep(self) -> bool:
        return len(self.E_R) > 1

    def scenario(self) -> ArrayScenario:
        return self.array.scenario()

    def band_spec(self) -> BandSpec:
        bands = tuple((b.f_lo, b.f_hi) for b in self.protected_bands)
        levels = [b.level for b in self.protected_bands]
        return BandSpec(bands=bands, levels=levels if any(levels) else None)

    def desired_grid(self, scenario: Optional[ArrayScenario] = None) -> np.ndarray:
        """``d_kp`` sampled on the (angle, bin) grid; empty for null-forming."""
        sc = scenario or self.scenario()
        if self.mode == "nullform":
            return np.zeros((0, sc.N))
        theta = sc.angles_deg
        d = np.full((sc.K, sc.N), float(self.desired_background))
        for box in self.desired_boxes:
            rows = (theta >= box.theta_lo) & (theta <= box.theta_hi)
            cols = bins_in_band(sc, box.f_lo, box.f_hi)
            d[np.ix_(rows, cols)] = box.level
        if self.normalize_desired and np.any(d):
            # Match the energy of d to that of a unit-modulus response, |a^H W_p x|^2 ~ M N.
            d *= math.sqrt(sc.K * sc.N * sc.L / float(np.sum(d ** 2)))
        return d

    def with_overrides(self, seed=None, max_iters=None, E_R=None, output_dir=None) -> "ScenarioConfig":
        solver = self.solver
        if seed is not None:
            solver = replace(solver, seed=int(seed))
        if max_iters is not None:
            solver = replace(solver, max_inner_iters=int(max_iters), max_outer_iters=int(max_iters))
        out = replace(self, solver=solver)
        if E_R is not None:
            out = replace(out, E_R=tuple(float(e) for e in E_R))
        if output_dir is not None:
            out = replace(out, output_dir=str(output_dir))
        problems = validate(out)
        if problems:
            raise ConfigError(problems)
        return out

    def to_dict(self) -> dict:
        """Plain mapping in the file schema; :func:`parse_config` inverts it."""
        arr = asdict(self.array)
        if arr["d_meters"] is None:
            arr.pop("d_meters")
        else:
            arr.pop("d_over_halfwavelength")
        solver = asdict(self.solver)
        solver["lambda"] = solver.pop("lam")
        return {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "array": arr,
            "null_angles_deg": list(self.null_angles_deg),
            "desired_background": self.desired_background,
            "desired_boxes": [asdict(b) for b in self.desired_boxes],
            "normalize_desired": self.normalize_desired,
            "protected_bands": [asdict(b) for b in self.protected_bands],
            "E_R": self.E_R[0] if len(self.E_R) == 1 else list(self.E_R),
            "solver": solver,
            "output": {"dir": self.output_dir},
        }


_TOP_KEYS = {
    "schema_version", "mode", "array", "null_angles_deg", "desired_boxes", "desired_background",
    "normalize_desired", "protected_bands", "E_R", "solver", "output",
}
_ARRAY_KEYS = {"M", "N", "f_c", "B", "K", "d_over_halfwavelength", "d_meters", "c"}
_SOLVER_KEYS = {
    "lambda", "zeta_inner", "zeta_outer", "max_inner_iters", "max_outer_iters", "seed", "alignment", "sweep_seed",
}


def _unknown(section: str, got, allowed, problems) -> None:
    for key in sorted(set(got) - allowed):
        problems.append(f"{section}: unknown key {key!r}")


def _number(value, name, problems, integer=False):
    try:
        out = int(value) if integer else float(value)
    except (TypeError, ValueError):
        problems.append(f"{name} must be a number, got {value!r}")
        return None
    if integer and out != value:
        problems.append(f"{name} must be an integer, got {value!r}")
    return out


def _mapping(value, name, problems) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        problems.append(f"{name} must be a mapping")
        return {}
    return value


def _entries(value, name, problems) -> list:
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        problems.append(f"{name} must be a list")
        return []
    return list(value)


def parse_config(raw) -> ScenarioConfig:
    """Build and validate a config from a parsed mapping."""
    problems: list[str] = []
    raw = _mapping(raw, "config", problems)
    if problems:
        raise ConfigError(problems)
    _unknown("config", raw, _TOP_KEYS, problems)

    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version {version!r} unsupported (expected {SCHEMA_VERSION})")

    arr = _mapping(raw.get("array"), "array", problems)
    _unknown("array", arr, _ARRAY_KEYS, problems)
    missing = [k for k in ("M", "N", "f_c", "B", "K") if k not in arr]
    problems.extend(f"array: missing {k!r}" for k in missing)
    if "d_meters" in arr and "d_over_halfwavelength" in arr:
        problems.append("array: give d_meters or d_over_halfwavelength, not both")
    array_cfg = None
    if not missing:
        vals = {k: _number(arr[k], f"array.{k}", problems, integer=k in ("M", "N", "K")) for k in ("M", "N", "f_c", "B", "K")}
        d_m = _number(arr["d_meters"], "array.d_meters", problems) if "d_meters" in arr else None
        d_h = None if d_m is not None else _number(arr.get("d_over_halfwavelength", 1.0), "array.d_over_halfwavelength", problems)
        c = _number(arr.get("c", SPEED_OF_LIGHT), "array.c", problems)
        if None not in vals.values() and c is not None and (d_m is not None or d_h is not None):
            array_cfg = ArrayConfig(**vals, d_over_halfwavelength=d_h, d_meters=d_m, c=c)

    mode = raw.get("mode")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {mode!r}")

    nulls = tuple(
        v for v in (_number(a, "null_angles_deg entry", problems) for a in _entries(raw.get("null_angles_deg"), "null_angles_deg", problems))
        if v is not None
    )

    boxes = []
    for i, b in enumerate(_entries(raw.get("desired_boxes"), "desired_boxes", problems)):
        b = _mapping(b, f"desired_boxes[{i}]", problems)
        _unknown(f"desired_boxes[{i}]", b, {"theta_lo", "theta_hi", "f_lo", "f_hi", "level"}, problems)
        need = [k for k in ("theta_lo", "theta_hi", "f_lo", "f_hi") if k not in b]
        problems.extend(f"desired_boxes[{i}]: missing {k!r}" for k in need)
        if not need:
            vals = {k: _number(b[k], f"desired_boxes[{i}].{k}", problems) for k in ("theta_lo", "theta_hi", "f_lo", "f_hi")}
            level = _number(b.get("level", 0.0), f"desired_boxes[{i}].level", problems)
            if None not in vals.values() and level is not None:
                boxes.append(DesiredBox(**vals, level=level))

    bands = []
    for i, b in enumerate(_entries(raw.get("protected_bands"), "protected_bands", problems)):
        if isinstance(b, (list, tuple)) and len(b) == 2:
            b = {"f_lo": b[0], "f_hi": b[1]}
        b = _mapping(b, f"protected_bands[{i}]", problems)
        _unknown(f"protected_bands[{i}]", b, {"f_lo", "f_hi", "level"}, problems)
        need = [k for k in ("f_lo", "f_hi") if k not in b]
        problems.extend(f"protected_bands[{i}]: missing {k!r}" for k in need)
        if not need:
            lo = _number(b["f_lo"], f"protected_bands[{i}].f_lo", problems)
            hi = _number(b["f_hi"], f"protected_bands[{i}].f_hi", problems)
            level = _number(b.get("level", 0.0), f"protected_bands[{i}].level", problems)
            if None not in (lo, hi, level):
                bands.append(ProtectedBand(lo, hi, level))

    er_raw = raw.get("E_R")
    if er_raw is None:
        problems.append("E_R is required")
        er_list = []
    else:
        er_list = [_number(e, "E_R", problems) for e in (er_raw if isinstance(er_raw, (list, tuple)) else [er_raw])]
        er_list = [e for e in er_list if e is not None]

    sol = _mapping(raw.get("solver"), "solver", problems)
    _unknown("solver", sol, _SOLVER_KEYS, problems)
    defaults = SolverConfig()
    lam = sol.get("lambda")
    solver_cfg = SolverConfig(
        lam=None if lam is None else _number(lam, "solver.lambda", problems),
        zeta_inner=_number(sol.get("zeta_inner", defaults.zeta_inner), "solver.zeta_inner", problems),
        zeta_outer=_number(sol.get("zeta_outer", defaults.zeta_outer), "solver.zeta_outer", problems),
        max_inner_iters=_number(sol.get("max_inner_iters", defaults.max_inner_iters), "solver.max_inner_iters", problems, True),
        max_outer_iters=_number(sol.get("max_outer_iters", defaults.max_outer_iters), "solver.max_outer_iters", problems, True),
        seed=_number(sol.get("seed", defaults.seed), "solver.seed", problems, True),
        alignment=sol.get("alignment", defaults.alignment),
        sweep_seed=sol.get("sweep_seed", defaults.sweep_seed),
    )
    output = _mapping(raw.get("output"), "output", problems)
    _unknown("output", output, {"dir"}, problems)

    background = _number(raw.get("desired_background", 0.0), "desired_background", problems)
    normalize = raw.get("normalize_desired", True)
    if not isinstance(normalize, bool):
        problems.append("normalize_desired must be true or false")

    if array_cfg is None or mode not in MODES or background is None:
        raise ConfigError(problems or ["array block incomplete"])
    cfg = ScenarioConfig(
        array=array_cfg,
        mode=mode,
        E_R=tuple(er_list),
        null_angles_deg=nulls,
        desired_boxes=tuple(boxes),
        desired_background=background,
        normalize_desired=normalize,
        protected_bands=tuple(bands),
        solver=solver_cfg,
        output_dir=str(output.get("dir", "out")),
        schema_version=version,
    )
    # Semantic checks still run after structural problems so one pass lists everything.
    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: ScenarioConfig) -> list:
    """Every violated invariant of ``cfg``, as messages; empty when valid."""
    problems = []
    try:
        sc = cfg.scenario()
    except InputDomainError as exc:
        problems.append(f"array: {exc}")
        sc = None
    if cfg.array.d_meters is None and not (cfg.array.d_over_halfwavelength or 0) > 0:
        problems.append("array: d_over_halfwavelength must be positive")

    if sc is not None:
        lo_edge, hi_edge = sc.f_c - sc.B / 2, sc.f_c + sc.B / 2

        def check_band(name, f_lo, f_hi):
            if f_lo > f_hi:
                problems.append(f"{name} ({f_lo:g}, {f_hi:g}) Hz: f_lo > f_hi")
            if f_lo < lo_edge or f_hi > hi_edge:
                problems.append(f"{name} ({f_lo:g}, {f_hi:g}) Hz outside [{lo_edge:g}, {hi_edge:g}] Hz")

        for i, b in enumerate(cfg.protected_bands):
            check_band(f"protected_bands[{i}]", b.f_lo, b.f_hi)
            if b.level < 0:
                problems.append(f"protected_bands[{i}]: level must be nonnegative")
        for i, b in enumerate(cfg.desired_boxes):
            check_band(f"desired_boxes[{i}]", b.f_lo, b.f_hi)
        if cfg.protected_bands:
            stop = np.zeros(sc.N, dtype=bool)
            for b in cfg.protected_bands:
                if b.level == 0:
                    stop |= bins_in_band(sc, b.f_lo, b.f_hi)
            if stop.all():
                problems.append("protected_bands cover every frequency bin")

    for i, b in enumerate(cfg.desired_boxes):
        if b.theta_lo > b.theta_hi:
            problems.append(f"desired_boxes[{i}]: theta_lo > theta_hi")
        if b.theta_lo < 0 or b.theta_hi > 180:
            problems.append(f"desired_boxes[{i}]: angles outside [0, 180] degrees")
        if b.level < 0:
            problems.append(f"desired_boxes[{i}]: level must be nonnegative")
    if cfg.desired_background < 0:
        problems.append("desired_background must be nonnegative")

    if cfg.mode == "nullform":
        if not cfg.null_angles_deg:
            problems.append("nullform mode needs at least one entry in null_angles_deg")
        if cfg.desired_boxes:
            problems.append("desired_boxes only apply in beampattern mode")
    elif cfg.null_angles_deg:
        problems.append("null_angles_deg only apply in nullform mode")
    for a in cfg.null_angles_deg:
        if not 0 <= a <= 180:
            problems.append(f"null angle {a:g} outside [0, 180] degrees")

    if not cfg.E_R:
        problems.append("E_R needs at least one value")
    for e in cfg.E_R:
        if not e >= 0:
            problems.append(f"E_R must be nonnegative, got {e:g}")
    if len(set(cfg.E_R)) != len(cfg.E_R):
        problems.append("E_R sweep values must be distinct")

    s = cfg.solver
    if s.lam is not None and not s.lam > 0:
        problems.append("solver.lambda must be positive")
    if s.zeta_inner is None or not s.zeta_inner > 0 or s.zeta_outer is None or not s.zeta_outer > 0:
        problems.append("solver: stopping thresholds must be positive")
    if s.max_inner_iters is None or s.max_inner_iters < 1 or s.max_outer_iters is None or s.max_outer_iters < 1:
        problems.append("solver: iteration caps must be >= 1")
    if s.seed is None or s.seed < 0:
        problems.append("solver.seed must be a nonnegative integer")
    if s.alignment not in ALIGNMENTS:
        problems.append(f"solver.alignment must be one of {ALIGNMENTS}")
    if s.sweep_seed not in SWEEP_SEEDS:
        problems.append(f"solver.sweep_seed must be one of {SWEEP_SEEDS}")
    return problems


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror or exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"parse error in {path}: {exc}"]) from exc
    return parse_config(raw)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
