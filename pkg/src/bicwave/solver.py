"""
Successive tangent-QP solver for constant-modulus beampattern design.

:func:`inner_loop` runs the sequence of tangent programs for fixed target
phases; :func:`solve_beampattern` alternates it with target-phase updates;
:func:`solve_nullform` runs the inner loop alone on the null-forming cost.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .qp_engine import (
    DesiredBeampattern,
    LiftedQP,
    assemble_full,
    assemble_nullform,
    kkt_residuals,
    solve_with_inequality,
    tangent_update,
)
from .signal_model import (
    ArrayScenario,
    InputDomainError,
    SteeringSet,
    array_response,
    beampattern,
    dft_spectrum,
    modulus_deviation,
    random_unimodular,
    safe_angle,
    steering_set,
)
from .spectral_mask import ALIGNMENTS, SpectralMask, constrained_error, constraint_vector, spectral_error

log = logging.getLogger(__name__)

MODULUS_TOL = 1e-3
DESCENT_SLACK = 1e-9
FEASIBILITY_TOL = 1e-8


class DescentViolation(RuntimeError):
    """An inner iteration increased the objective beyond round-off slack."""

    def __init__(self, message, dump):
        super().__init__(message)
        self.dump = dump


@dataclass
class SolverParams:
    lam: Optional[float] = None
    zeta_inner: float = 1e-5
    zeta_outer: float = 1e-5
    max_inner_iters: int = 500
    max_outer_iters: int = 100
    E_R: Optional[float] = None
    seed: int = 0
    alignment: str = "template"
    relative_stop: bool = False
    strict_descent: bool = True

    def __post_init__(self):
        problems = []
        if self.lam is not None and not self.lam > 0:
            problems.append("lam must be positive")
        if not (self.zeta_inner > 0 and self.zeta_outer > 0):
            problems.append("stopping thresholds must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            problems.append("iteration caps must be >= 1")
        if self.alignment not in ALIGNMENTS:
            problems.append(f"alignment must be one of {ALIGNMENTS}")
        if self.E_R is not None and self.E_R < 0:
            problems.append("E_R must be nonnegative")
        if problems:
            raise InputDomainError("; ".join(problems))


@dataclass
class IterationRecord:
    level: str
    outer: int
    inner: int
    cost: float
    objective: float
    modulus_dev: float
    spectral_error: float
    linear_slack: float
    branch: str = ""
    mu: float = 0.0
    alpha: float = float("nan")
    kkt_max: float = 0.0
    prev_equality: float = float("nan")
    prev_slack: float = float("nan")
    cold: bool = False


TRACE_COLUMNS = tuple(IterationRecord.__dataclass_fields__)


@dataclass
class InnerResult:
    x: np.ndarray
    gamma: np.ndarray
    s: np.ndarray
    trace: List[IterationRecord]
    converged: bool
    iterations: int


@dataclass
class SolveReport:
    x_star: np.ndarray
    x_final: np.ndarray
    trace: List[IterationRecord]
    converged: bool
    iterations_used: int
    seed: int
    lam: float
    E_R: float
    alignment: str
    cost_final: float
    cost_star: float
    modulus_dev: float
    spectral_error_final: float
    spectral_error_star: float
    metrics: dict = field(default_factory=dict)

    @property
    def inner_trace(self) -> List[IterationRecord]:
        return [r for r in self.trace if r.level == "inner"]

    @property
    def outer_trace(self) -> List[IterationRecord]:
        return [r for r in self.trace if r.level == "outer"]

    def summary(self) -> dict:
        out = {
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "seed": self.seed,
            "lambda": self.lam,
            "E_R": self.E_R,
            "alignment": self.alignment,
            "cost_final": self.cost_final,
            "cost_star": self.cost_star,
            "cost_star_db": 10 * np.log10(self.cost_star) if self.cost_star > 0 else float("-inf"),
            "modulus_dev": self.modulus_dev,
            "spectral_error_final": self.spectral_error_final,
            "spectral_error_star": self.spectral_error_star,
        }
        out.update(self.metrics)
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in out.items()}


def project_unimodular(x) -> np.ndarray:
    return np.exp(1j * safe_angle(x))


def _stopped(prev: float, cur: float, zeta: float, relative: bool, signed: bool = False) -> bool:
    scale = max(1.0, abs(prev)) if relative else 1.0
    change = prev - cur if signed else abs(prev - cur)
    return change < zeta * scale


def inner_loop(
    qp: LiftedQP,
    mask: SpectralMask,
    x0,
    params: SolverParams,
    gamma0=None,
    outer: int = 0,
) -> InnerResult:
    """Run the tangent-program sequence from ``x0`` until the cost settles.

    ``gamma0`` continues a previous tangent chain (warm start); without it
    the first tangent touches the unit circle at ``arg x0``.
    """
    E_R = mask.E_R if params.E_R is None else params.E_R
    threshold = (1.0 - E_R / 2.0) * mask.scenario.L
    x_prev = np.asarray(x0, dtype=complex)
    if x_prev.shape[0] != qp.L:
        raise InputDomainError(f"x0 length {x_prev.shape[0]} != L = {qp.L}")
    warm = gamma0 is not None
    gamma = np.asarray(gamma0, dtype=float) if warm else safe_angle(x_prev)
    s_prev = qp.lift(x_prev)
    f_prev = qp.form(x_prev)
    g_prev = qp.objective(s_prev)
    trace: List[IterationRecord] = []
    converged = False
    n = 0
    for n in range(1, params.max_inner_iters + 1):
        tangents = tangent_update(x_prev, gamma, qp.augmented)
        s_bar = constraint_vector(mask, x_prev, params.alignment, qp.augmented)
        prev_eq = float(np.max(np.abs(tangents.dot(s_prev) - 1.0)))
        prev_slack = float(s_bar @ s_prev) - threshold
        sol = solve_with_inequality(qp, tangents, s_bar, threshold)
        res = kkt_residuals(qp, tangents, s_bar, sol)
        x = qp.unlift(sol.s)
        f = qp.form(x)
        g = qp.objective(sol.s)
        # A random start generally violates the spectral row, so the first
        # step is a projection rather than a descent step.
        cold = n == 1 and not warm and prev_slack < -FEASIBILITY_TOL * (1.0 + threshold)
        trace.append(
            IterationRecord(
                level="inner",
                outer=outer,
                inner=n,
                cost=f,
                objective=g,
                modulus_dev=modulus_deviation(x),
                spectral_error=constrained_error(mask, x, params.alignment),
                linear_slack=res.slack,
                branch=sol.branch,
                mu=sol.mu,
                alpha=float("nan") if sol.alpha is None else sol.alpha,
                kkt_max=res.max(),
                prev_equality=prev_eq,
                prev_slack=prev_slack,
                cold=cold,
            )
        )
        if not cold and g > g_prev + DESCENT_SLACK * (1.0 + abs(g_prev)):
            dump = {
                "outer": outer,
                "inner": n,
                "g_prev": g_prev,
                "g": g,
                "prev_equality": prev_eq,
                "prev_slack": prev_slack,
                "kkt": asdict(res),
                "branch": sol.branch,
            }
            msg = f"objective increased from {g_prev!r} to {g!r} at outer {outer}, inner {n}"
            if params.strict_descent:
                raise DescentViolation(msg, dump)
            log.warning(msg)
        gamma = tangents.gamma
        stop = not cold and _stopped(f_prev, f, params.zeta_inner, params.relative_stop)
        x_prev, s_prev, f_prev, g_prev = x, sol.s, f, g
        if stop:
            converged = True
            break
    return InnerResult(x_prev, gamma, s_prev, trace, converged, n)


def phase_update(scenario: ArrayScenario, steering: SteeringSet, x) -> np.ndarray:
    """Target phases ``arg(a_kp^H W_p x)`` (0 where the response vanishes)."""
    return safe_angle(array_response(scenario, steering, x))


def magnitude_cost(scenario: ArrayScenario, steering: SteeringSet, desired: DesiredBeampattern, x) -> float:
    """Phase-free cost ``sum w (d - |a^H W_p x|)^2``."""
    resp = np.abs(array_response(scenario, steering, x))
    w = np.ones_like(desired.d) if desired.weights is None else desired.weights
    return float(np.sum(w * (desired.d - resp) ** 2))


def null_cost(scenario: ArrayScenario, steering: SteeringSet, x) -> float:
    return float(np.sum(beampattern(scenario, steering, x)))


def _finish(scenario, mask, params, x_final, trace, converged, iterations, lam, cost_fn, E_R) -> SolveReport:
    x_star = project_unimodular(x_final)
    dev = modulus_deviation(x_final)
    if dev > MODULUS_TOL:
        warnings.warn(
            f"final modulus deviation {dev:.2e} exceeds {MODULUS_TOL:g}; consider a larger lambda "
            f"(current {lam:.4g}) or a looser E_R",
            stacklevel=3,
        )
    return SolveReport(
        x_star=x_star,
        x_final=x_final,
        trace=trace,
        converged=converged,
        iterations_used=iterations,
        seed=params.seed,
        lam=lam,
        E_R=E_R,
        alignment=params.alignment,
        cost_final=cost_fn(x_final),
        cost_star=cost_fn(x_star),
        modulus_dev=dev,
        spectral_error_final=constrained_error(mask, x_final, params.alignment),
        spectral_error_star=constrained_error(mask, x_star, params.alignment),
        metrics={"notch_depth_db": notch_depth_db(scenario, mask, x_star)},
    )


def _initial(scenario: ArrayScenario, params: SolverParams, x0) -> np.ndarray:
    if x0 is not None:
        return np.asarray(x0, dtype=complex)
    return random_unimodular(scenario.L, np.random.default_rng(params.seed))


def solve_beampattern(
    scenario: ArrayScenario,
    steering: SteeringSet,
    desired: DesiredBeampattern,
    mask: SpectralMask,
    params: Optional[SolverParams] = None,
    x0=None,
) -> SolveReport:
    """Match ``|a_kp^H W_p x|`` to ``d_kp`` under constant modulus and the spectral constraint.

    Each outer pass fixes the target phases at the current response, lifts
    the cost and runs :func:`inner_loop` warm-started from the previous
    pass (iterate and tangent chain). Stops when the phase-free cost
    changes by less than ``zeta_outer``.
    """
    params = params or SolverParams()
    if desired.d.shape != (steering.K, scenario.N):
        raise InputDomainError(f"desired grid shape {desired.d.shape} != ({steering.K}, {scenario.N})")
    E_R = mask.E_R if params.E_R is None else params.E_R
    x = _initial(scenario, params, x0)
    gamma = None
    lam = params.lam

    def cost_fn(v):
        return magnitude_cost(scenario, steering, desired, v)

    # The first pass starts from an infeasible random x0, so its cost is not a baseline.
    f_prev = None
    trace: List[IterationRecord] = []
    converged = False
    iterations = 0
    phase_free = not np.any(desired.d)
    for m in range(1, params.max_outer_iters + 1):
        phases = phase_update(scenario, steering, x)
        qp = assemble_full(steering, desired.with_phases(phases), lam)
        lam = qp.lam
        inner = inner_loop(qp, mask, x, params, gamma, outer=m)
        trace.extend(inner.trace)
        iterations += inner.iterations
        x, gamma = inner.x, inner.gamma
        f = cost_fn(x)
        trace.append(
            IterationRecord(
                level="outer",
                outer=m,
                inner=inner.iterations,
                cost=f,
                # f' + lam (||x||^2 + 1): non-increasing over passes, unlike f' off the unit circle
                objective=f + lam * (float(np.vdot(x, x).real) + 1.0),
                modulus_dev=modulus_deviation(x),
                spectral_error=constrained_error(mask, x, params.alignment),
                linear_slack=inner.trace[-1].linear_slack,
                branch=inner.trace[-1].branch,
            )
        )
        log.debug("outer %d: cost %.6g after %d inner iterations", m, f, inner.iterations)
        # An increase also ends the loop: the improvement is then below zeta.
        if phase_free or (
            f_prev is not None and _stopped(f_prev, f, params.zeta_outer, params.relative_stop, signed=True)
        ):
            converged = inner.converged
            break
        f_prev = f
    report = _finish(scenario, mask, params, x, trace, converged, iterations, lam, cost_fn, E_R)
    report.metrics.update(beam_metrics(scenario, steering, desired, report.x_star))
    return report


def solve_nullform(
    scenario: ArrayScenario,
    null_angles: Sequence[float],
    mask: SpectralMask,
    params: Optional[SolverParams] = None,
    x0=None,
) -> SolveReport:
    """Minimize the power radiated toward ``null_angles`` under both constraints."""
    params = params or SolverParams()
    if len(null_angles) == 0:
        raise InputDomainError("at least one null angle is required")
    E_R = mask.E_R if params.E_R is None else params.E_R
    nulls = steering_set(scenario, null_angles)
    qp = assemble_nullform(nulls, params.lam)
    x0 = _initial(scenario, params, x0)
    inner = inner_loop(qp, mask, x0, params)

    def cost_fn(v):
        return null_cost(scenario, nulls, v)

    report = _finish(scenario, mask, params, inner.x, inner.trace, inner.converged, inner.iterations, qp.lam, cost_fn, E_R)
    depths = null_depth_db(scenario, report.x_star, null_angles)
    report.metrics.update({f"null_depth_db_{a:g}": float(v) for a, v in zip(null_angles, depths)})
    return report


def spectrum_profile(scenario: ArrayScenario, x) -> np.ndarray:
    """Mean over antennas of ``|y_m(p)|^2``."""
    return np.mean(np.abs(dft_spectrum(scenario, x)) ** 2, axis=0)


def notch_depth_db(scenario: ArrayScenario, mask: SpectralMask, x) -> float:
    """Mean stop-band power relative to mean passband power, in dB (nan without stop bins)."""
    if not np.any(mask.stop_bins):
        return float("nan")
    prof = spectrum_profile(scenario, x)
    stop = np.mean(prof[mask.stop_bins])
    passband = np.mean(prof[~mask.stop_bins])
    return float(10 * np.log10(max(stop, 1e-300) / passband))


def angular_profile(scenario: ArrayScenario, x, angles_deg=None) -> np.ndarray:
    """Beampattern summed over frequency bins, per angle."""
    return beampattern(scenario, steering_set(scenario, angles_deg), x).sum(axis=1)


def null_depth_db(scenario: ArrayScenario, x, null_angles: Sequence[float]) -> np.ndarray:
    """Power toward each null relative to the angular mean on the scenario grid, in dB."""
    mean = np.mean(angular_profile(scenario, x))
    at_nulls = angular_profile(scenario, x, null_angles)
    return 10 * np.log10(np.maximum(at_nulls, 1e-300) / mean)


def beam_metrics(scenario: ArrayScenario, steering: SteeringSet, desired: DesiredBeampattern, x) -> dict:
    """Mean power where ``d`` is positive versus where it is zero, in dB."""
    P = beampattern(scenario, steering, x)
    on = desired.d > 0
    if not np.any(on) or np.all(on):
        return {}
    return {"in_sector_over_out_db": float(10 * np.log10(np.mean(P[on]) / max(np.mean(P[~on]), 1e-300)))}
