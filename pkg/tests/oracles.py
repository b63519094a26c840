"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np
import scipy.linalg as sla

from bicwave.qp_engine import LiftedQP, TangentSet


def dense_tangent_matrix(gamma, augmented):
    """``B`` built row by row from the tangent angles."""
    L = len(gamma)
    D = 2 * L + int(augmented)
    B = np.zeros((L + int(augmented), D))
    for l, g in enumerate(gamma):
        B[l, l] = np.cos(g)
        B[l, l + L] = np.sin(g)
    if augmented:
        B[L, 2 * L] = 1.0
    return B


def nullspace_minimizer(H, A, b):
    """Minimize ``s^T H s`` subject to ``A s = b`` by the null-space method."""
    s0 = np.linalg.lstsq(A, b, rcond=None)[0]
    Z = sla.null_space(A)
    if Z.shape[1] == 0:
        return s0
    w = np.linalg.solve(Z.T @ H @ Z, -Z.T @ H @ s0)
    return s0 + Z @ w


def inequality_oracle(qp, gamma, s_bar, threshold):
    """Minimizer with the spectral inequality: equality-only if it is feasible, else the row is active."""
    B = dense_tangent_matrix(gamma, qp.augmented)
    H = qp.R + qp.lam * np.eye(qp.D)
    ones = np.ones(B.shape[0])
    s = nullspace_minimizer(H, B, ones)
    if s_bar @ s >= threshold:
        return s, "inactive"
    A = np.vstack([B, s_bar])
    return nullspace_minimizer(H, A, np.append(ones, threshold)), "active"


def random_instance(rng, L=None, force=None):
    """Random PSD cost, tangent set, constraint vector and threshold (L <= 10)."""
    L = int(rng.integers(1, 11)) if L is None else L
    mode = "full" if rng.random() < 0.5 else "nullform"
    D = 2 * L + int(mode == "full")
    rank = int(rng.integers(1, D + 1))
    F = rng.normal(size=(D, rank))
    R = F @ F.T
    lam = float(10 ** rng.uniform(-2, 1))
    qp = LiftedQP(0.5 * (R + R.T), lam, mode)
    gamma = rng.uniform(-np.pi, np.pi, L)
    tangents = TangentSet(gamma, qp.augmented)
    s_bar = rng.normal(size=D)
    if qp.augmented:
        s_bar[-1] = 0.0
    B = dense_tangent_matrix(gamma, qp.augmented)
    s_eq = nullspace_minimizer(qp.R + lam * np.eye(D), B, np.ones(B.shape[0]))
    branch = force or ("active" if rng.random() < 0.5 else "inactive")
    shift = float(rng.uniform(0.1, 2.0)) * (1.0 + abs(s_bar @ s_eq))
    threshold = float(s_bar @ s_eq) + (shift if branch == "active" else -shift)
    return qp, tangents, s_bar, threshold


def direct_cost(vectors, bins, targets, x, M, N):
    """``sum_p ||d_p - A_p W_p x||^2`` with explicit ``A_p`` and ``W_p = I_M kron e_p^H``."""
    total = 0.0
    n = np.arange(N)
    for i, p in enumerate(bins):
        W = np.kron(np.eye(M), np.exp(-2j * np.pi * n * p / N)[None, :])
        A = vectors[:, i, :].conj()
        d = np.zeros(vectors.shape[0]) if targets is None else targets[:, i]
        total += np.sum(np.abs(d - A @ (W @ x)) ** 2)
    return float(total)
