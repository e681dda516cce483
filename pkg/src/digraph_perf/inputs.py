"""Disturbance specifications: a fixed impulse direction or a covariance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD, ShapeMismatch

PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Deterministic:
    """Impulse ``w(t) = w0 delta(t)`` with a fixed direction."""

    w0: np.ndarray

    def __post_init__(self):
        w0 = np.asarray(self.w0, dtype=complex if np.iscomplexobj(self.w0) else float).ravel()
        if not np.all(np.isfinite(w0)):
            raise ShapeMismatch("w0 has non-finite entries")
        object.__setattr__(self, "w0", w0)

    def covariance(self, n: int) -> np.ndarray:
        if self.w0.shape != (n,):
            raise ShapeMismatch(f"w0 has length {self.w0.size}, expected {n}")
        return np.outer(self.w0, self.w0.conj())


@dataclass(frozen=True, eq=False)
class Covariance:
    """Random impulse direction with second moment ``E[w0 w0^*] = Sigma0``."""

    sigma0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma0", np.asarray(self.sigma0))

    def covariance(self, n: int) -> np.ndarray:
        S = self.sigma0
        if S.shape != (n, n):
            raise ShapeMismatch(f"Sigma0 has shape {S.shape}, expected {(n, n)}")
        check_psd(S)
        return S


@dataclass(frozen=True)
class IdentityCovariance:
    """Unit covariance. The metric is then the squared H2 norm."""

    def covariance(self, n: int) -> np.ndarray:
        return np.eye(n)


InputSpec = Deterministic | Covariance | IdentityCovariance


def check_psd(S: np.ndarray, tol: float = PSD_TOL) -> None:
    """Raise :class:`NotPSD` unless ``S`` is Hermitian positive semidefinite."""
    S = np.asarray(S)
    if not np.all(np.isfinite(S)):
        raise NotPSD("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if np.max(np.abs(S - S.conj().T), initial=0.0) > tol * scale:
        raise NotPSD("covariance is not Hermitian")
    if S.size and np.linalg.eigvalsh(0.5 * (S + S.conj().T)).min() < -tol * scale:
        raise NotPSD("covariance has a negative eigenvalue")
