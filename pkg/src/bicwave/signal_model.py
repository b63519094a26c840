"""
Wideband uniform-linear-array signal model.

A waveform ``x`` is the antenna-major concatenation of ``M`` time series of
``N`` samples each. Frequency bins run over ``p = -N/2, ..., N/2 - 1`` and
every bin-indexed array in this package stores bin ``p`` at column
``p + N/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class InputDomainError(ValueError):
    """An argument lies outside the domain of the signal model."""


@dataclass(frozen=True)
class ArrayScenario:
    """Array geometry and sampling parameters.

    Parameters
    ----------
    M : int
        Number of antennas.
    N : int
        Time samples per antenna (even).
    d : float
        Element spacing in meters.
    f_c : float
        Carrier frequency in Hz.
    B : float
        Bandwidth in Hz; the sampling interval is ``1 / B``.
    K : int
        Number of angle grid points over [0, 180] degrees.
    c : float
        Propagation speed in m/s.
    """

    M: int
    N: int
    d: float
    f_c: float
    B: float
    K: int
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        problems = []
        if int(self.M) != self.M or self.M < 1:
            problems.append(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            problems.append(f"N must be an even integer >= 2, got {self.N}")
        if int(self.K) != self.K or self.K < 1:
            problems.append(f"K must be a positive integer, got {self.K}")
        if not self.d > 0:
            problems.append(f"d must be positive, got {self.d}")
        if not self.B > 0:
            problems.append(f"B must be positive, got {self.B}")
        if not self.c > 0:
            problems.append(f"c must be positive, got {self.c}")
        if not self.f_c > self.B / 2:
            problems.append(f"f_c must exceed B/2, got f_c={self.f_c}, B={self.B}")
        if problems:
            raise InputDomainError("; ".join(problems))

    @property
    def L(self) -> int:
        return self.M * self.N

    @property
    def T_s(self) -> float:
        return 1.0 / self.B

    @property
    def bins(self) -> np.ndarray:
        """Frequency bin indices ``-N/2 .. N/2-1``."""
        return np.arange(-self.N // 2, self.N // 2)

    @property
    def bin_frequencies(self) -> np.ndarray:
        """Physical frequency in Hz of every bin: ``f_c + p / (N T_s)``."""
        return self.f_c + self.bins * self.B / self.N

    @property
    def angles_deg(self) -> np.ndarray:
        """Angle grid with inclusive endpoints 0 and 180 degrees."""
        if self.K == 1:
            return np.array([0.0])
        return np.linspace(0.0, 180.0, self.K)

    @classmethod
    def half_wavelength(cls, M, N, f_c, B, K, c=SPEED_OF_LIGHT) -> "ArrayScenario":
        return cls(M=M, N=N, d=c / (2.0 * f_c), f_c=f_c, B=B, K=K, c=c)


def _check_bin(scenario: ArrayScenario, p) -> None:
    p = np.asarray(p)
    if np.any(p != np.round(p)) or np.any(p < -scenario.N // 2) or np.any(p > scenario.N // 2 - 1):
        raise InputDomainError(f"frequency bin out of range [-N/2, N/2-1]: {p}")


def _check_angle(theta_deg) -> None:
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta > 180):
        raise InputDomainError(f"angle out of range [0, 180] degrees: {theta_deg}")


def steering_vector(scenario: ArrayScenario, theta_deg: float, p: int) -> np.ndarray:
    """Length-``M`` phase vector for a plane wave at ``theta_deg`` in bin ``p``."""
    _check_angle(theta_deg)
    _check_bin(scenario, p)
    freq = p / (scenario.N * scenario.T_s) + scenario.f_c
    m = np.arange(scenario.M)
    return np.exp(2j * np.pi * freq * m * scenario.d * np.cos(np.deg2rad(theta_deg)) / scenario.c)


@dataclass(frozen=True)
class SteeringSet:
    """Steering vectors on an (angle, bin) grid.

    ``vectors[k, i]`` is the length-``M`` steering vector for angle
    ``angles_deg[k]`` and bin ``bins[i]``.
    """

    angles_deg: np.ndarray
    bins: np.ndarray
    vectors: np.ndarray

    @property
    def K(self) -> int:
        return len(self.angles_deg)


def steering_set(scenario: ArrayScenario, angles_deg: Optional[Sequence[float]] = None) -> SteeringSet:
    """Steering vectors for every bin at ``angles_deg`` (default: the scenario grid)."""
    angles = scenario.angles_deg if angles_deg is None else np.asarray(angles_deg, dtype=float).ravel()
    _check_angle(angles)
    freqs = scenario.bin_frequencies
    m = np.arange(scenario.M)
    # phase[k, i, m]
    phase = (
        2 * np.pi * freqs[None, :, None] * m[None, None, :] * scenario.d
        * np.cos(np.deg2rad(angles))[:, None, None] / scenario.c
    )
    return SteeringSet(angles_deg=angles, bins=scenario.bins, vectors=np.exp(1j * phase))


def selection_matrix(scenario: ArrayScenario, p: int) -> np.ndarray:
    """Dense ``W_p = I_M kron e_p^H``.

    Only intended for small problems and tests; solver code uses
    :func:`dft_spectrum` instead.
    """
    _check_bin(scenario, p)
    n = np.arange(scenario.N)
    e_h = np.exp(-2j * np.pi * n * p / scenario.N)
    return np.kron(np.eye(scenario.M), e_h[None, :])


def as_waveform(scenario: ArrayScenario, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex).ravel()
    if x.shape[0] != scenario.L:
        raise InputDomainError(f"waveform length {x.shape[0]} != M*N = {scenario.L}")
    return x


def dft_spectrum(scenario: ArrayScenario, x) -> np.ndarray:
    """Unnormalized per-antenna DFT, shape ``(M, N)`` with bin ``p`` at column ``p + N/2``."""
    X = as_waveform(scenario, x).reshape(scenario.M, scenario.N)
    return np.fft.fftshift(np.fft.fft(X, axis=1), axes=1)


def synthesize(scenario: ArrayScenario, spectrum) -> np.ndarray:
    """Map a bin-ordered ``(M, N)`` spectrum to time samples with ``sum_p Y(p) e^{+j2pi np/N}``.

    This is ``N`` times the inverse DFT, so ``dft_spectrum(synthesize(Y)) == N * Y``.
    """
    Y = np.asarray(spectrum, dtype=complex).reshape(-1, scenario.N)
    return (np.fft.ifft(np.fft.ifftshift(Y, axes=1), axis=1) * scenario.N).ravel()


def array_response(scenario: ArrayScenario, steering: SteeringSet, x) -> np.ndarray:
    """``a_kp^H W_p x`` for every grid point, shape ``(K, N)``."""
    Y = dft_spectrum(scenario, x)
    if steering.vectors.shape[1:] != (scenario.N, scenario.M):
        raise InputDomainError("steering set does not match scenario dimensions")
    return np.einsum("kim,mi->ki", steering.vectors.conj(), Y)


def beampattern(scenario: ArrayScenario, steering: SteeringSet, x) -> np.ndarray:
    """Transmit power ``P_kp = |a_kp^H W_p x|^2`` on the (angle, bin) grid."""
    return np.abs(array_response(scenario, steering, x)) ** 2


def random_unimodular(L: int, rng) -> np.ndarray:
    """Pseudo-random unit-modulus sequence."""
    return np.exp(2j * np.pi * rng.random(L))


def modulus_deviation(x) -> float:
    return float(np.max(np.abs(np.abs(x) - 1.0)))


def safe_angle(z) -> np.ndarray:
    """``np.angle`` with the phase of exact zeros pinned to 0."""
    z = np.asarray(z)
    return np.where(z == 0, 0.0, np.angle(z))
