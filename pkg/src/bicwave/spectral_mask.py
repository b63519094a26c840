"""
Desired transmit spectrum and the spectral-error constraint.

The desired spectrum ``y_hat`` has magnitude 0 on protected (stop) bins and
a common level elsewhere, scaled to unit norm. Its time-domain template is
the per-antenna synthesis of ``y_hat``, tiled over the ``M`` antennas, and
has squared norm ``L = M N``. The constraint bounds the squared distance
between a waveform and the template by ``E_R * L``; for a constant-modulus
waveform that is the linear inequality
``Re{template^H x} >= (1 - E_R/2) L``.

Only the magnitude of ``y_hat`` carries the notch. Its phase decides how
close to constant modulus the template is, and hence which ``E_R`` values
admit a constant-modulus solution at all, so by default the phases are
designed by alternating projections (see :func:`design_spectral_phases`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .signal_model import ArrayScenario, InputDomainError, dft_spectrum, as_waveform, safe_angle, synthesize

ALIGNMENTS = ("template", "spectrum", "time")


class MaskConstructionError(ValueError):
    """The requested protected bands leave no passband."""


@dataclass(frozen=True)
class BandSpec:
    """Protected bands.

    ``bands`` holds ``(f_lo, f_hi)`` pairs in Hz; ``bin_ranges`` holds
    ``(p_lo, p_hi)`` pairs given directly as bin indices. ``levels`` (one per
    Hz band, optional) sets the relative desired magnitude inside a band
    instead of a hard zero, which gives non-uniform masks.
    """

    bands: Sequence[tuple] = ()
    levels: Optional[Sequence[float]] = None
    bin_ranges: Sequence[tuple] = ()


def bins_in_band(scenario: ArrayScenario, f_lo: float, f_hi: float) -> np.ndarray:
    """Boolean bin mask: bin center frequency inside the closed interval ``[f_lo, f_hi]``."""
    f = scenario.bin_frequencies
    # Bin centers are exact multiples of B/N; absorb round-off at the band edges.
    tol = 1e-9 * max(abs(scenario.f_c), 1.0)
    return (f >= f_lo - tol) & (f <= f_hi + tol)


def validate_band(scenario: ArrayScenario, f_lo: float, f_hi: float) -> None:
    lo_edge = scenario.f_c - scenario.B / 2
    hi_edge = scenario.f_c + scenario.B / 2
    if f_lo > f_hi:
        raise InputDomainError(f"band ({f_lo}, {f_hi}): f_lo > f_hi")
    if f_lo < lo_edge or f_hi > hi_edge:
        raise InputDomainError(f"band ({f_lo}, {f_hi}) outside [{lo_edge}, {hi_edge}] Hz")


def design_spectral_phases(magnitude: np.ndarray, iters: int = 2000, tol: float = 1e-13) -> np.ndarray:
    """Phases for ``magnitude`` whose synthesized template is close to constant modulus.

    Alternates between unit-modulus projection in time and magnitude
    projection in frequency, starting from a quadratic (chirp) phase. Each
    sweep cannot decrease ``sum |template|``.
    """
    N = magnitude.shape[0]
    p = np.arange(-N // 2, N // 2)
    phases = np.pi * p ** 2 / N
    nominal = np.sqrt(N) * np.linalg.norm(magnitude)
    prev = -np.inf
    for _ in range(iters):
        t = np.fft.ifft(np.fft.ifftshift(magnitude * np.exp(1j * phases))) * N
        score = np.sum(np.abs(t))
        if score - prev <= tol * nominal:
            break
        prev = score
        Y = np.fft.fftshift(np.fft.fft(np.exp(1j * safe_angle(t))))
        phases = safe_angle(Y)
    return phases


@dataclass(frozen=True)
class SpectralMask:
    """Desired spectrum, its template and the spectral tolerance."""

    scenario: ArrayScenario
    y_hat: np.ndarray
    gamma: float
    E_R: float
    stop_bins: np.ndarray
    template: np.ndarray = field(repr=False)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.y_hat)

    @property
    def s_bar_template(self) -> np.ndarray:
        """``|template|``, the magnitude profile every linearization keeps."""
        return np.abs(self.template)

    @property
    def threshold(self) -> float:
        return (1.0 - self.E_R / 2.0) * self.scenario.L

    def with_tolerance(self, E_R: float) -> "SpectralMask":
        _check_tolerance(E_R)
        return SpectralMask(self.scenario, self.y_hat, self.gamma, float(E_R), self.stop_bins, self.template)


def _check_tolerance(E_R: float) -> None:
    if not E_R >= 0:
        raise InputDomainError(f"E_R must be nonnegative, got {E_R}")
    if E_R == 0:
        warnings.warn(
            "E_R = 0 only admits the template itself; the linearized problem is generally infeasible",
            stacklevel=3,
        )


def build_mask(
    scenario: ArrayScenario,
    bands: BandSpec | Sequence[tuple] = (),
    E_R: float = 0.0,
    profile: Optional[np.ndarray] = None,
    phase_design: str = "unimodular",
) -> SpectralMask:
    """Build the normalized desired spectrum for ``scenario``.

    Parameters
    ----------
    bands : BandSpec or sequence of (f_lo, f_hi)
        Protected bands; bins whose center falls in a band are zeroed (or set
        to the band level).
    E_R : float
        Spectral tolerance, per unit of waveform energy.
    profile : ndarray, optional
        Explicit per-bin desired magnitudes (bin order), overriding ``bands``.
    phase_design : {"unimodular", "none"}
        ``"none"`` keeps ``y_hat`` real.
    """
    _check_tolerance(E_R)
    if not isinstance(bands, BandSpec):
        bands = BandSpec(bands=tuple(bands))
    N = scenario.N
    if profile is not None:
        mag = np.abs(np.asarray(profile, dtype=float)).ravel()
        if mag.shape[0] != N:
            raise InputDomainError(f"profile length {mag.shape[0]} != N = {N}")
    else:
        mag = np.ones(N)
        levels = bands.levels if bands.levels is not None else [0.0] * len(bands.bands)
        if len(levels) != len(bands.bands):
            raise InputDomainError("one level per band required")
        for (f_lo, f_hi), level in zip(bands.bands, levels):
            validate_band(scenario, f_lo, f_hi)
            if level < 0:
                raise InputDomainError(f"band level must be nonnegative, got {level}")
            mag[bins_in_band(scenario, f_lo, f_hi)] = level
        for p_lo, p_hi in bands.bin_ranges:
            if p_lo > p_hi or p_lo < -N // 2 or p_hi > N // 2 - 1:
                raise InputDomainError(f"bin range ({p_lo}, {p_hi}) invalid")
            mag[(scenario.bins >= p_lo) & (scenario.bins <= p_hi)] = 0.0
    norm = np.linalg.norm(mag)
    if norm == 0:
        raise MaskConstructionError("protected bands cover every frequency bin")
    mag = mag / norm
    stop = mag == 0
    pass_count = int(np.count_nonzero(~stop))
    gamma = float(np.max(mag)) if profile is not None or bands.levels else 1.0 / np.sqrt(pass_count)

    if phase_design == "unimodular":
        phases = design_spectral_phases(mag)
    elif phase_design == "none":
        phases = np.zeros(N)
    else:
        raise InputDomainError(f"unknown phase_design {phase_design!r}")
    y_hat = mag * np.exp(1j * phases)
    one = synthesize(scenario, y_hat[None, :])
    template = np.tile(one, scenario.M)
    return SpectralMask(scenario, y_hat, gamma, float(E_R), stop, template)


def spectral_error(mask: SpectralMask, x) -> float:
    """Squared distance between ``x`` and the template."""
    x = as_waveform(mask.scenario, x)
    return float(np.sum(np.abs(mask.template - x) ** 2))


def aligned_spectral_error(mask: SpectralMask, x) -> float:
    """Spectral error after re-phasing the desired spectrum to match ``x``.

    The minimum of the template distance over all phases of ``y_hat``:
    ``L + ||x||^2 - 2 sum_m sum_p |y_hat_p| |y_m(p)|``.
    """
    x = as_waveform(mask.scenario, x)
    Y = dft_spectrum(mask.scenario, x)
    return float(mask.scenario.L + np.vdot(x, x).real - 2 * np.sum(mask.magnitude[None, :] * np.abs(Y)))


def constraint_overlap(mask: SpectralMask, x) -> float:
    """``Re{template^H x}``; the constraint reads ``overlap >= threshold``."""
    return float(np.vdot(mask.template, as_waveform(mask.scenario, x)).real)


def _stack(z: np.ndarray, augmented: bool) -> np.ndarray:
    parts = [z.real, z.imag]
    if augmented:
        parts.append(np.zeros(1))
    return np.concatenate(parts)


def static_constraint_vector(mask: SpectralMask, augmented: bool = True) -> np.ndarray:
    """Real stacking of the template (trailing zero when ``augmented``)."""
    return _stack(mask.template, augmented)


def linear_constraint_vector(mask: SpectralMask, x_prev, augmented: bool = True) -> np.ndarray:
    """Template magnitudes carried on the phases of ``x_prev``, stacked real.

    Keeps ``|template_l|`` and replaces ``arg template_l`` by
    ``arg x_prev_l`` (zero where ``x_prev_l == 0``).
    """
    x_prev = as_waveform(mask.scenario, x_prev)
    rotated = mask.s_bar_template * np.exp(1j * safe_angle(x_prev))
    return _stack(rotated, augmented)


def aligned_constraint_vector(mask: SpectralMask, x_prev, augmented: bool = True) -> np.ndarray:
    """Template whose spectral phases follow the per-antenna spectrum of ``x_prev``.

    Per antenna the desired magnitudes keep their bins but take the phases
    of ``dft_spectrum(x_prev)``, so ``Re{t^H x_prev}`` equals
    ``sum_p |y_hat_p| |y_m(p)|``, the largest value any re-phasing reaches.
    """
    Y = dft_spectrum(mask.scenario, x_prev)
    aligned = mask.magnitude[None, :] * np.exp(1j * safe_angle(Y))
    return _stack(synthesize(mask.scenario, aligned), augmented)


def constraint_vector(mask: SpectralMask, x_prev, alignment: str = "template", augmented: bool = True) -> np.ndarray:
    """Dispatch to the linearization named by ``alignment``."""
    if alignment == "template":
        return static_constraint_vector(mask, augmented)
    if alignment == "time":
        return linear_constraint_vector(mask, x_prev, augmented)
    if alignment == "spectrum":
        return aligned_constraint_vector(mask, x_prev, augmented)
    raise InputDomainError(f"alignment must be one of {ALIGNMENTS}, got {alignment!r}")


def constrained_error(mask: SpectralMask, x, alignment: str = "template") -> float:
    """The quadratic spectral error that ``alignment`` actually bounds."""
    if alignment == "spectrum":
        return aligned_spectral_error(mask, x)
    return spectral_error(mask, x)
