"""Reference values from the full state-space model.

Two independent routes are provided. ``h2_norm`` and ``l2_response`` solve a
Lyapunov equation for the observability Gramian of the deflated system.
``simulate_impulse`` integrates the undeflated system in time with RK4.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .closed_form import Dynamics, Output
from .errors import (
    HorizonExceeded,
    LyapunovIllConditioned,
    OutputAssumptionViolated,
    ShapeMismatch,
    Unstable,
)
from .spectral import SpectralData
from .stability import GainSet

LYAP_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x' = A x + B w``, ``y = Cout x``."""

    A: np.ndarray
    B: np.ndarray
    Cout: np.ndarray


@dataclass(frozen=True, eq=False)
class DeflatedSystem:
    """State space in Jordan coordinates with the consensus states removed."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def assemble(L, gains: GainSet | None, dynamics, output, C) -> StateSpace:
    """Closed-loop state space of the single or double integrator network."""
    dynamics, output = Dynamics(dynamics), Output(output)
    L = np.asarray(L, dtype=float)
    C = np.atleast_2d(np.asarray(C))
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ShapeMismatch(f"Laplacian must be square, got {L.shape}")
    n = L.shape[0]
    if C.shape[1] != n:
        raise ShapeMismatch(f"C has {C.shape[1]} columns, expected {n}")
    if dynamics is Dynamics.FIRST:
        if output is Output.VELOCITY:
            raise ShapeMismatch("first-order networks have no velocity output")
        return StateSpace(-L, np.eye(n), C.copy())
    if gains is None:
        raise ShapeMismatch("second-order networks require gains")
    I, Z = np.eye(n), np.zeros((n, n))
    A = np.block([
        [Z, I],
        [-gains.k_p * I - gains.gamma_p * L, -gains.k_d * I - gains.gamma_d * L],
    ])
    B = np.vstack([Z, I])
    Zc = np.zeros_like(C)
    Cout = np.hstack([C, Zc]) if output is Output.POSITION else np.hstack([Zc, C])
    return StateSpace(A, B, Cout)


def deflate(ss: StateSpace, S: SpectralData) -> DeflatedSystem:
    """Transform to Jordan coordinates and drop the consensus position/velocity states."""
    n = S.n
    N = ss.A.shape[0]
    if N == n:
        T, Tinv, drop = S.R, S.Rinv, [0]
    elif N == 2 * n:
        T = scipy.linalg.block_diag(S.R, S.R)
        Tinv = scipy.linalg.block_diag(S.Rinv, S.Rinv)
        drop = [0, n]
    else:
        raise ShapeMismatch(f"state dimension {N} does not match n = {n}")
    Ct = ss.Cout @ T
    scale = max(np.linalg.norm(ss.Cout), 1e-300) * np.linalg.norm(T[:, drop])
    if np.linalg.norm(Ct[:, drop]) > 1e-9 * scale:
        raise OutputAssumptionViolated("the output observes the consensus mode (C @ 1 != 0)")
    keep = [i for i in range(N) if i not in drop]
    At = (Tinv @ ss.A @ T)[np.ix_(keep, keep)]
    Bt = (Tinv @ ss.B)[keep]
    return DeflatedSystem(At, Bt, Ct[:, keep])


def _check_stable(A: np.ndarray):
    if A.size and np.max(np.linalg.eigvals(A).real) >= 0:
        raise Unstable("deflated system matrix has an eigenvalue with nonnegative real part")


def observability_gramian(d: DeflatedSystem) -> np.ndarray:
    """Solve ``A^* X + X A = -C^* C`` (Bartels-Stewart) and check the result."""
    _check_stable(d.A)
    A = d.A.astype(complex)
    Q = d.C.conj().T @ d.C
    X = scipy.linalg.solve_continuous_lyapunov(A.conj().T, -Q)
    res = np.linalg.norm(A.conj().T @ X + X @ A + Q)
    scale = np.linalg.norm(Q) + 2 * np.linalg.norm(A) * np.linalg.norm(X)
    if not np.all(np.isfinite(X)) or res > LYAP_RESIDUAL_TOL * max(scale, 1e-300):
        raise LyapunovIllConditioned(f"Lyapunov residual {res:.3e} too large")
    if np.linalg.norm(X - X.conj().T) > 1e-8 * max(np.linalg.norm(X), 1e-300):
        raise LyapunovIllConditioned("Gramian is not Hermitian")
    X = 0.5 * (X + X.conj().T)
    if X.size:
        w = np.linalg.eigvalsh(X)
        if w.min() < -1e-8 * max(abs(w).max(), 1e-300):
            raise LyapunovIllConditioned("Gramian is not positive semidefinite")
    return X


def h2_norm(d: DeflatedSystem) -> float:
    """Squared H2 norm ``tr(B^* X B)``."""
    X = observability_gramian(d)
    return float(np.trace(d.B.conj().T @ X @ d.B).real)


def l2_response(d: DeflatedSystem, w0) -> float:
    """Output energy of the impulse ``w0 delta(t)``."""
    X = observability_gramian(d)
    v = d.B @ np.asarray(w0)
    return float(np.real(np.vdot(v, X @ v)))


def _default_dt(A: np.ndarray) -> float:
    radius = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 1.0
    return 0.05 / max(radius, 1e-12)


def simulate_impulse(ss: StateSpace, w0, dt: float | None = None, horizon: float | None = None,
                     rtol: float = 1e-6, max_steps: int = 10 ** 7) -> float:
    """Output energy of ``x(0) = B w0`` by RK4 and corrected trapezoid quadrature.

    ``w0`` may be a vector or a matrix, in which case the energies of its
    columns are summed (an identity matrix gives the squared H2 norm). The
    trapezoid rule carries its endpoint derivative correction, so the
    quadrature error is fourth order like the integrator. The horizon is
    extended chunk by chunk until a geometric tail estimate drops below
    ``rtol`` times the accumulated value.
    """
    A = np.asarray(ss.A)
    Cout = np.asarray(ss.Cout)
    X = np.asarray(ss.B) @ np.asarray(w0)
    if X.ndim == 1:
        X = X[:, None]
    if dt is None:
        dt = _default_dt(A)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if horizon is None:
        horizon = 200 * dt
    chunk = max(1, int(round(horizon / dt)))
    hA = dt * A
    P = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 5):
        term = term @ hA / k
        P = P + term
    CA = Cout @ A

    def f_and_df(state):
        y = Cout @ state
        return float(np.sum(np.abs(y) ** 2)), float(2 * np.real(np.vdot(y, CA @ state)))

    total = 0.0
    prev_chunk = None
    steps = 0
    f_a, df_a = f_and_df(X)
    while True:
        acc = 0.5 * f_a
        for _ in range(chunk):
            X = P @ X
            f_b, df_b = f_and_df(X)
            acc += f_b
        acc -= 0.5 * f_b
        part = dt * acc - dt * dt / 12.0 * (df_b - df_a)
        total += part
        steps += chunk
        f_a, df_a = f_b, df_b
        if total == 0.0 and part == 0.0 and f_b == 0.0 and prev_chunk == 0.0:
            return 0.0
        if prev_chunk is not None and prev_chunk > 0 and 0 <= part < prev_chunk:
            r = part / prev_chunk
            tail = part * r / (1 - r)
            if tail < rtol * abs(total) and f_b < rtol * abs(total):
                return total
        if steps >= max_steps:
            raise HorizonExceeded(f"no convergence within {max_steps} steps")
        prev_chunk = part


def covariance_response(d: DeflatedSystem, sigma0) -> float:
    """Expected output energy for an impulse direction with second moment ``sigma0``."""
    X = observability_gramian(d)
    return float(np.trace(X @ d.B @ np.asarray(sigma0) @ d.B.conj().T).real)


def psd_factor(sigma0) -> np.ndarray:
    """``F`` with ``F F^* = sigma0`` (negative round-off eigenvalues clipped)."""
    sigma0 = np.asarray(sigma0)
    w, V = np.linalg.eigh(0.5 * (sigma0 + sigma0.conj().T))
    return V * np.sqrt(np.clip(w, 0.0, None))
