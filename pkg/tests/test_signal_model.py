import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bicwave.signal_model import (
    ArrayScenario,
    InputDomainError,
    array_response,
    beampattern,
    dft_spectrum,
    modulus_deviation,
    random_unimodular,
    selection_matrix,
    steering_set,
    steering_vector,
    synthesize,
)


def scenario(M=4, N=8, K=7, f_c=1e9, B=200e6):
    return ArrayScenario.half_wavelength(M, N, f_c, B, K)


def scalar_steering(M, N, d, f_c, B, c, theta_deg, p):
    # element-by-element evaluation of the steering phase
    out = []
    for m in range(M):
        freq = p * B / N + f_c
        out.append(cmath.exp(2j * math.pi * freq * m * d * math.cos(math.radians(theta_deg)) / c))
    return np.array(out)


def naive_dft(x_m):
    N = len(x_m)
    return np.array([
        sum(x_m[n] * cmath.exp(-2j * math.pi * n * p / N) for n in range(N))
        for p in range(-N // 2, N // 2)
    ])


class TestScenario:
    def test_derived_quantities(self):
        sc = ArrayScenario(M=3, N=4, d=0.5, f_c=300e6, B=100e6, K=5)
        assert sc.L == 12
        assert sc.T_s == pytest.approx(1e-8)
        np.testing.assert_array_equal(sc.bins, [-2, -1, 0, 1])
        np.testing.assert_allclose(sc.bin_frequencies, [250e6, 275e6, 300e6, 325e6])
        np.testing.assert_allclose(sc.angles_deg, [0, 45, 90, 135, 180])

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(M=0, N=4, d=1, f_c=1e9, B=1e8, K=3),
            dict(M=2, N=3, d=1, f_c=1e9, B=1e8, K=3),
            dict(M=2, N=4, d=0, f_c=1e9, B=1e8, K=3),
            dict(M=2, N=4, d=1, f_c=1e9, B=0, K=3),
            dict(M=2, N=4, d=1, f_c=4e7, B=1e8, K=3),
            dict(M=2, N=4, d=1, f_c=1e9, B=1e8, K=0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InputDomainError):
            ArrayScenario(**kwargs)

    def test_all_problems_reported(self):
        with pytest.raises(InputDomainError) as exc:
            ArrayScenario(M=0, N=3, d=-1, f_c=1e9, B=1e8, K=3)
        msg = str(exc.value)
        assert "M must" in msg and "N must" in msg and "d must" in msg


class TestSteering:
    def test_broadside_is_all_ones(self):
        sc = scenario()
        for p in sc.bins:
            np.testing.assert_allclose(steering_vector(sc, 90.0, p), np.ones(sc.M), atol=1e-15)

    def test_endfire_half_wavelength(self):
        sc = scenario(M=5)
        np.testing.assert_allclose(steering_vector(sc, 0.0, 0), (-1.0) ** np.arange(5), atol=1e-12)

    def test_scalar_oracle(self):
        sc = ArrayScenario(M=4, N=32, d=0.5, f_c=300e6, B=100e6, K=3)
        got = steering_vector(sc, 40.0, 3)
        want = scalar_steering(4, 32, 0.5, 300e6, 100e6, sc.c, 40.0, 3)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
        assert got[0] == 1

    def test_set_matches_single_vectors(self):
        sc = scenario(M=3, N=4, K=5)
        S = steering_set(sc)
        for k, theta in enumerate(S.angles_deg):
            for i, p in enumerate(S.bins):
                np.testing.assert_allclose(S.vectors[k, i], steering_vector(sc, theta, p), atol=1e-12)

    def test_unit_magnitude(self):
        S = steering_set(scenario(M=8, N=16, K=31))
        np.testing.assert_allclose(np.abs(S.vectors), 1.0, atol=1e-15)

    @pytest.mark.parametrize("theta,p", [(-1.0, 0), (180.5, 0), (10.0, 4), (10.0, -5), (10.0, 0.5)])
    def test_domain(self, theta, p):
        with pytest.raises(InputDomainError):
            steering_vector(scenario(N=8), theta, p)


class TestSelectionAndDFT:
    def test_selection_example(self):
        sc = ArrayScenario(M=2, N=2, d=1, f_c=1e9, B=1e8, K=1)
        np.testing.assert_allclose(selection_matrix(sc, 0), [[1, 1, 0, 0], [0, 0, 1, 1]])

    def test_impulse(self):
        sc = scenario(M=3, N=8)
        x = np.zeros((3, 8), complex)
        x[:, 0] = 1
        for p in sc.bins:
            np.testing.assert_allclose(selection_matrix(sc, p) @ x.ravel(), np.ones(3))
        np.testing.assert_allclose(dft_spectrum(sc, x), np.ones((3, 8)))

    def test_constant(self):
        sc = scenario(M=2, N=8)
        Y = dft_spectrum(sc, np.ones(16))
        want = np.zeros((2, 8))
        want[:, 4] = 8
        np.testing.assert_allclose(Y, want, atol=1e-12)

    def test_selection_matches_standard_dft(self):
        sc = ArrayScenario(M=2, N=4, d=1, f_c=1e9, B=1e8, K=1)
        x = np.random.default_rng(3).normal(size=8) + 1j * np.random.default_rng(4).normal(size=8)
        got = selection_matrix(sc, 1) @ x
        want = np.fft.fft(x.reshape(2, 4), axis=1)[:, 1]
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_naive_dft(self):
        sc = scenario(M=2, N=8)
        rng = np.random.default_rng(5)
        x = rng.normal(size=16) + 1j * rng.normal(size=16)
        Y = dft_spectrum(sc, x)
        for m in range(2):
            np.testing.assert_allclose(Y[m], naive_dft(x[m * 8:(m + 1) * 8]), atol=1e-12)

    def test_synthesis_inverts(self):
        sc = scenario(M=3, N=8)
        rng = np.random.default_rng(6)
        Y = rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))
        np.testing.assert_allclose(dft_spectrum(sc, synthesize(sc, Y)), 8 * Y, atol=1e-12)

    def test_length_check(self):
        with pytest.raises(InputDomainError):
            dft_spectrum(scenario(M=2, N=4), np.ones(7))


class TestBeampattern:
    def test_single_antenna_constant(self):
        sc = ArrayScenario.half_wavelength(1, 8, 1e9, 2e8, 5)
        P = beampattern(sc, steering_set(sc), np.ones(8))
        want = np.zeros((5, 8))
        want[:, 4] = 64
        np.testing.assert_allclose(P, want, atol=1e-12)

    def test_brute_force(self):
        sc = scenario(M=3, N=4, K=6)
        S = steering_set(sc)
        x = random_unimodular(sc.L, np.random.default_rng(7))
        P = beampattern(sc, S, x)
        for k, theta in enumerate(S.angles_deg):
            for i, p in enumerate(sc.bins):
                W = selection_matrix(sc, p)
                a = scalar_steering(3, 4, sc.d, sc.f_c, sc.B, sc.c, theta, p)
                assert P[k, i] == pytest.approx(abs(np.vdot(a, W @ x)) ** 2, rel=1e-12, abs=1e-12)

    def test_shape_mismatch(self):
        sc = scenario(M=3, N=4)
        other = steering_set(scenario(M=2, N=4))
        with pytest.raises(InputDomainError):
            beampattern(sc, other, np.ones(12))

    def test_nonnegative(self):
        sc = scenario()
        P = beampattern(sc, steering_set(sc), np.random.default_rng(8).normal(size=sc.L))
        assert np.all(P >= 0)


@settings(max_examples=30, deadline=None)
@given(
    M=st.integers(1, 8),
    half_N=st.integers(1, 4),
    seed=st.integers(0, 2 ** 32 - 1),
    alpha=st.floats(-math.pi, math.pi),
)
def test_signal_invariants(M, half_N, seed, alpha):
    N = 2 * half_N
    sc = ArrayScenario.half_wavelength(M, N, 1e9, 2e8, 5)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=sc.L) + 1j * rng.normal(size=sc.L)
    S = steering_set(sc)
    # response through the dense selection matrices
    dense = np.array([[np.vdot(S.vectors[k, i], selection_matrix(sc, p) @ x) for i, p in enumerate(sc.bins)]
                      for k in range(S.K)])
    fast = array_response(sc, S, x)
    np.testing.assert_allclose(fast, dense, rtol=1e-10, atol=1e-10 * np.max(np.abs(dense)))
    # global phase
    P = beampattern(sc, S, x)
    np.testing.assert_allclose(beampattern(sc, S, np.exp(1j * alpha) * x), P, rtol=1e-12, atol=1e-12 * P.max())
    # Parseval
    Y = dft_spectrum(sc, x)
    np.testing.assert_allclose(np.sum(np.abs(Y) ** 2, axis=1),
                               N * np.sum(np.abs(x.reshape(M, N)) ** 2, axis=1), rtol=1e-10)


def test_modulus_deviation():
    assert modulus_deviation(np.exp(1j * np.arange(5))) < 1e-15
    assert modulus_deviation([1, 0.5, 1.2]) == pytest.approx(0.5)
