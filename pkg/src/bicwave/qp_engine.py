"""
Real-valued lifting of the beampattern cost and closed-form solves of the
tangent-constrained quadratic programs.

Each program in the sequence is::

    minimize    s^T (R + lam I) s
    subject to  B s = 1
                s_bar^T s >= threshold

where every row of ``B`` is a unit vector touching one coordinate pair
``(l, l + L)`` (plus, in full mode, a row pinning the trailing coordinate
of ``s`` to 1). ``Rbar = 2 (R + lam I)`` is factorized once per
:class:`LiftedQP` and reused for every tangent set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .signal_model import InputDomainError, SteeringSet, safe_angle


class InfeasibleStepError(ArithmeticError):
    """The spectral row is dependent on the tangent rows and cannot be met."""


class FactorizationError(ArithmeticError):
    """``Rbar`` or ``B Rbar^-1 B^T`` failed to factorize."""


@dataclass
class DesiredBeampattern:
    """Desired magnitudes ``d[k, i]`` on the steering grid.

    ``weights`` (optional) are positive and sum to one. ``phases`` are the
    auxiliary phases attached to ``d``; they default to zero.
    """

    d: np.ndarray
    weights: Optional[np.ndarray] = None
    phases: Optional[np.ndarray] = None

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if np.any(self.d < 0) or not np.all(np.isfinite(self.d)):
            raise InputDomainError("desired beampattern must be finite and nonnegative")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.d.shape:
                raise InputDomainError("weights must match the desired grid shape")
            if np.any(self.weights <= 0) or not np.isclose(self.weights.sum(), 1.0, rtol=0, atol=1e-9):
                raise InputDomainError("weights must be positive and sum to 1")
        if self.phases is None:
            self.phases = np.zeros_like(self.d)
        else:
            self.phases = np.asarray(self.phases, dtype=float)
            if self.phases.shape != self.d.shape:
                raise InputDomainError("phases must match the desired grid shape")

    def with_phases(self, phases) -> "DesiredBeampattern":
        return DesiredBeampattern(self.d, self.weights, phases)

    @property
    def root_weights(self) -> np.ndarray:
        return np.ones_like(self.d) if self.weights is None else np.sqrt(self.weights)

    @property
    def targets(self) -> np.ndarray:
        """Weighted complex targets ``sqrt(w) d e^{j phi}``."""
        return self.root_weights * self.d * np.exp(1j * self.phases)


@dataclass(frozen=True)
class QuadraticForm:
    """``f(x) = x^H P x - 2 Re{q^H x} + r``."""

    P: np.ndarray
    q: np.ndarray
    r: float

    def __call__(self, x) -> float:
        x = np.asarray(x)
        return float(np.vdot(x, self.P @ x).real - 2 * np.vdot(self.q, x).real + self.r)


def _dft_rows(N: int, bins: np.ndarray) -> np.ndarray:
    # E[i, n] = exp(-j 2 pi n p_i / N), the row e_p^H of W_p
    return np.exp(-2j * np.pi * np.outer(bins, np.arange(N)) / N)


def _weighted_rows(steering: SteeringSet, root_weights: Optional[np.ndarray]) -> np.ndarray:
    A = steering.vectors.conj()  # A[k, i, :] = a_kp^H
    if root_weights is not None:
        A = A * root_weights[:, :, None]
    return A


def quadratic_form(steering: SteeringSet, desired: Optional[DesiredBeampattern] = None) -> QuadraticForm:
    """Complex quadratic form of ``sum_p ||d_p - A_p W_p x||^2``.

    With ``desired=None`` the targets are zero (``q = 0``, ``r = 0``).
    """
    K, N, M = steering.vectors.shape
    if desired is not None and desired.d.shape != (K, N):
        raise InputDomainError(f"desired grid shape {desired.d.shape} != ({K}, {N})")
    A = _weighted_rows(steering, None if desired is None else desired.root_weights)
    E = _dft_rows(N, steering.bins)
    G = np.einsum("kia,kib->iab", A.conj(), A)
    P = np.einsum("in,iab,ik->anbk", E.conj(), G, E).reshape(M * N, M * N)
    P = 0.5 * (P + P.conj().T)
    if desired is None:
        return QuadraticForm(P, np.zeros(M * N, dtype=complex), 0.0)
    targets = desired.targets
    h = np.einsum("kia,ki->ia", A.conj(), targets)
    q = np.einsum("in,ia->an", E.conj(), h).ravel()
    r = float(np.sum(np.abs(targets) ** 2))
    return QuadraticForm(P, q, r)


def _real_block(P: np.ndarray) -> np.ndarray:
    return np.block([[P.real, -P.imag], [P.imag, P.real]])


def default_ridge(R: np.ndarray) -> float:
    """``10 * trace(R) / D``."""
    lam = 10.0 * np.trace(R) / R.shape[0]
    return float(lam) if lam > 0 else 1.0


@dataclass
class LiftedQP:
    """Real symmetric cost matrix ``R`` with ridge ``lam``.

    ``mode`` is ``"full"`` (``D = 2L + 1``, trailing coordinate pinned to 1)
    or ``"nullform"`` (``D = 2L``).
    """

    R: np.ndarray
    lam: float
    mode: str
    form: Optional[QuadraticForm] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise InputDomainError(f"ridge lambda must be positive, got {self.lam}")
        if self.mode not in ("full", "nullform"):
            raise InputDomainError(f"unknown mode {self.mode!r}")

    @property
    def D(self) -> int:
        return self.R.shape[0]

    @property
    def L(self) -> int:
        return self.D // 2

    @property
    def augmented(self) -> bool:
        return self.mode == "full"

    @cached_property
    def rbar(self) -> np.ndarray:
        return 2.0 * (self.R + self.lam * np.eye(self.D))

    @cached_property
    def rbar_inv(self) -> np.ndarray:
        """Explicit ``Rbar^-1`` from one Cholesky factorization."""
        try:
            factor = sla.cho_factor(self.rbar, lower=True)
        except np.linalg.LinAlgError as exc:
            w = np.linalg.eigvalsh(self.rbar)
            raise FactorizationError(
                f"Rbar not positive definite (lambda={self.lam}, min eig={w[0]:.3e})"
            ) from exc
        inv = sla.cho_solve(factor, np.eye(self.D))
        return 0.5 * (inv + inv.T)

    def objective(self, s) -> float:
        """``g(s) = s^T (R + lam I) s``."""
        s = np.asarray(s)
        return float(s @ (self.R @ s) + self.lam * (s @ s))

    def lift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        parts = [x.real, x.imag]
        if self.augmented:
            parts.append(np.ones(1))
        return np.concatenate(parts)

    def unlift(self, s) -> np.ndarray:
        L = self.L
        return s[:L] + 1j * s[L:2 * L]


def assemble_full(steering: SteeringSet, desired: DesiredBeampattern, lam: Optional[float] = None) -> LiftedQP:
    """Lift the beampattern-matching cost with targets ``d e^{j phi}``."""
    form = quadratic_form(steering, desired)
    G = _real_block(form.P)
    t = np.concatenate([form.q.real, form.q.imag])
    R = np.block([[G, -t[:, None]], [-t[None, :], np.array([[form.r]])]])
    R = 0.5 * (R + R.T)
    return LiftedQP(R, default_ridge(R) if lam is None else float(lam), "full", form)


def assemble_nullform(steering: SteeringSet, lam: Optional[float] = None) -> LiftedQP:
    """Lift ``x^H V x`` for nulls at the angles of ``steering``."""
    if steering.K == 0:
        raise InputDomainError("null-forming needs at least one null direction")
    form = quadratic_form(steering, None)
    R = _real_block(form.P)
    R = 0.5 * (R + R.T)
    return LiftedQP(R, default_ridge(R) if lam is None else float(lam), "nullform", form)


@dataclass(frozen=True)
class TangentSet:
    """Tangent lines ``cos(g_l) s_l + sin(g_l) s_{l+L} = 1`` as the rows of ``B``.

    ``augmented`` adds the row selecting the trailing coordinate.
    """

    gamma: np.ndarray
    augmented: bool = True

    @property
    def L(self) -> int:
        return self.gamma.shape[0]

    @property
    def D(self) -> int:
        return 2 * self.L + int(self.augmented)

    @property
    def rows(self) -> int:
        return self.L + int(self.augmented)

    @cached_property
    def cos(self) -> np.ndarray:
        return np.cos(self.gamma)

    @cached_property
    def sin(self) -> np.ndarray:
        return np.sin(self.gamma)

    def dot(self, s) -> np.ndarray:
        """``B s`` (``s`` may be a vector or have ``D`` rows)."""
        L = self.L
        s = np.asarray(s)
        c = self.cos.reshape((L,) + (1,) * (s.ndim - 1))
        sn = self.sin.reshape(c.shape)
        head = c * s[:L] + sn * s[L:2 * L]
        if self.augmented:
            return np.concatenate([head, s[2 * L:2 * L + 1]])
        return head

    def tdot(self, w) -> np.ndarray:
        """``B^T w``."""
        L = self.L
        w = np.asarray(w)
        parts = [self.cos * w[:L], self.sin * w[:L]]
        if self.augmented:
            parts.append(w[L:L + 1])
        return np.concatenate(parts)

    def right(self, Mx: np.ndarray) -> np.ndarray:
        """``Mx B^T`` for a matrix with ``D`` columns."""
        L = self.L
        out = Mx[:, :L] * self.cos + Mx[:, L:2 * L] * self.sin
        if self.augmented:
            out = np.concatenate([out, Mx[:, 2 * L:2 * L + 1]], axis=1)
        return out

    def dense(self) -> np.ndarray:
        """``B`` as a dense ``rows x D`` array (tests and small problems only)."""
        return self.right(np.eye(self.D)).T


def wrap_phase(a) -> np.ndarray:
    return np.angle(np.exp(1j * np.asarray(a, dtype=float)))


def tangent_update(x_prev, gamma_prev, augmented: bool = True) -> TangentSet:
    """Reflect the previous tangency angle about ``arg x_prev``.

    ``gamma = 2 arg(x_prev) - gamma_prev`` keeps ``x_prev`` on its tangent
    line while moving the tangency point toward it.
    """
    x_prev = np.asarray(x_prev)
    gamma_prev = np.asarray(gamma_prev, dtype=float)
    if x_prev.shape != gamma_prev.shape:
        raise InputDomainError("x_prev and gamma_prev must have equal length")
    return TangentSet(wrap_phase(2 * safe_angle(x_prev) - gamma_prev), augmented)


@dataclass
class _EqualityParts:
    rinv_bt: np.ndarray
    schur: tuple
    s_hat: np.ndarray


def _equality_parts(qp: LiftedQP, tangents: TangentSet) -> _EqualityParts:
    if tangents.D != qp.D:
        raise InputDomainError(f"tangent set dimension {tangents.D} != QP dimension {qp.D}")
    rinv_bt = tangents.right(qp.rbar_inv)
    S = tangents.dot(rinv_bt)
    S = 0.5 * (S + S.T)
    try:
        schur = sla.cho_factor(S, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("B Rbar^-1 B^T is not positive definite") from exc
    s_hat = rinv_bt @ sla.cho_solve(schur, np.ones(tangents.rows))
    return _EqualityParts(rinv_bt, schur, s_hat)


def solve_equality(qp: LiftedQP, tangents: TangentSet) -> np.ndarray:
    """Minimizer of ``s^T Rbar s`` over ``B s = 1``: ``Rbar^-1 B^T (B Rbar^-1 B^T)^-1 1``."""
    return _equality_parts(qp, tangents).s_hat


@dataclass
class KKTSolution:
    s: np.ndarray
    mu: float
    branch: str
    s_hat: np.ndarray
    alpha: Optional[float] = None
    v: Optional[np.ndarray] = None
    threshold: float = 0.0

    @property
    def active(self) -> bool:
        return self.branch == "active"


def solve_with_inequality(
    qp: LiftedQP,
    tangents: TangentSet,
    s_bar: np.ndarray,
    threshold: float,
) -> KKTSolution:
    """Closed-form solution of one tangent program with the spectral inequality.

    If the equality-only minimizer already satisfies ``s_bar^T s >= threshold``
    it is returned with ``mu = 0``. Otherwise the inequality is active and

    ``alpha = -s_bar^T (Rbar^-1 - Rbar^-1 B^T Rhat B Rbar^-1) s_bar``,
    ``mu = (s_bar^T s_hat - threshold) / alpha``,
    ``s = mu Rbar^-1 (I - B^T Rhat B Rbar^-1) s_bar + s_hat``.
    """
    s_bar = np.asarray(s_bar, dtype=float)
    parts = _equality_parts(qp, tangents)
    s_hat = parts.s_hat
    gap = float(s_bar @ s_hat) - threshold
    if gap >= 0:
        s, mu, alpha, branch = s_hat, 0.0, None, "inactive"
    else:
        u = qp.rbar_inv @ s_bar
        direction = u - parts.rinv_bt @ sla.cho_solve(parts.schur, parts.rinv_bt.T @ s_bar)
        alpha = -float(s_bar @ direction)
        if abs(alpha) < 1e-12 * float(s_bar @ s_bar):
            raise InfeasibleStepError(
                f"spectral row lies in the span of the tangent rows (alpha={alpha:.3e}) "
                f"and the tangent minimizer misses the threshold by {-gap:.3e}"
            )
        mu = gap / alpha
        s = mu * direction + s_hat
        branch = "active"
    v = -tangents.dot(qp.rbar @ s - mu * s_bar)
    return KKTSolution(s=s, mu=float(mu), branch=branch, s_hat=s_hat, alpha=alpha, v=v, threshold=threshold)


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    primal: float
    slack: float
    complementarity: float
    dual: float

    def max(self) -> float:
        """Largest violation; a positive slack is not a violation."""
        return max(self.stationarity, self.primal, max(-self.slack, 0.0), self.complementarity, self.dual)


def kkt_residuals(qp: LiftedQP, tangents: TangentSet, s_bar, sol: KKTSolution, threshold=None) -> KKTResiduals:
    """KKT residuals of ``sol`` with the equality multiplier refit by least squares.

    The rows of ``B`` are orthonormal, so the least-squares multiplier is
    ``-B (Rbar s - mu s_bar)``.
    """
    threshold = sol.threshold if threshold is None else threshold
    s_bar = np.asarray(s_bar, dtype=float)
    grad = qp.rbar @ sol.s - sol.mu * s_bar
    v = -tangents.dot(grad)
    stationarity = float(np.max(np.abs(grad + tangents.tdot(v))))
    primal = float(np.max(np.abs(tangents.dot(sol.s) - 1.0)))
    slack = float(s_bar @ sol.s) - threshold
    return KKTResiduals(
        stationarity=stationarity,
        primal=primal,
        slack=slack,
        complementarity=abs(sol.mu * slack),
        dual=max(-sol.mu, 0.0),
    )
