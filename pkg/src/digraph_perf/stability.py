"""Gain/output assumptions and input-output stability tests."""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import GainAssumptionViolated, InvalidQuery
from .graph import check_output_matrix

# Shared with closed_form so both modules branch on the same discriminant test.
REPEATED_ROOT_TOL = 1e-9


@dataclass(frozen=True)
class GainSet:
    """Absolute (``k_p``, ``k_d``) and relative (``gamma_p``, ``gamma_d``) gains."""

    k_p: float
    k_d: float
    gamma_p: float
    gamma_d: float

    def __post_init__(self):
        for name in ("k_p", "k_d", "gamma_p", "gamma_d"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise InvalidQuery(f"gain {name} must be a nonnegative real, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def parse(cls, text: str) -> "GainSet":
        """Parse ``"kp,kd,gp,gd"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise InvalidQuery(f"expected four comma separated gains, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            raise InvalidQuery(f"bad gains {text!r}: {exc}") from exc

    def with_gamma_p(self, gamma_p: float) -> "GainSet":
        return GainSet(self.k_p, self.k_d, gamma_p, self.gamma_d)


@dataclass(frozen=True)
class ModeCoefficients:
    """Routh-Hurwitz coefficients of one mode, in terms of ``lambda``."""

    alpha: float
    phi: float
    beta: float
    xi: float

    @property
    def hurwitz(self) -> float:
        """``alpha phi^2 + beta xi phi - beta^2``."""
        return self.alpha * self.phi ** 2 + self.beta * self.xi * self.phi - self.beta ** 2

    @property
    def stable(self) -> bool:
        return self.hurwitz > 0 and self.phi > 0


def mode_coefficients(lam: complex, gains: GainSet) -> ModeCoefficients:
    lam = complex(lam)
    return ModeCoefficients(
        alpha=gains.k_p + gains.gamma_p * lam.real,
        phi=gains.k_d + gains.gamma_d * lam.real,
        beta=gains.gamma_p * lam.imag,
        xi=gains.gamma_d * lam.imag,
    )


def check_gains(gains: GainSet) -> None:
    if gains.k_p == 0 and gains.gamma_p == 0:
        raise GainAssumptionViolated("no position feedback: k_p and gamma_p are both zero")
    if gains.k_d == 0 and gains.gamma_d == 0:
        raise GainAssumptionViolated("no velocity feedback: k_d and gamma_d are both zero")


def check_assumptions(gains: GainSet | None, C) -> None:
    """Raise unless the gains feed back both states and ``C @ 1 == 0``.

    ``gains`` may be ``None`` for single-integrator networks.

    Raises
    ------
    GainAssumptionViolated, OutputAssumptionViolated
    """
    if gains is not None:
        check_gains(gains)
    check_output_matrix(C)


def char_coefficients(lam: complex, gains: GainSet) -> tuple[complex, complex]:
    """``(b, c)`` of ``s^2 + b s + c``."""
    lam = complex(lam)
    return gains.k_d + gains.gamma_d * lam, gains.k_p + gains.gamma_p * lam


def is_repeated(b: complex, c: complex) -> bool:
    disc = b * b - 4 * c
    return abs(disc) <= REPEATED_ROOT_TOL * (1.0 + abs(b) ** 2 + abs(c) ** 2)


def char_roots(lam: complex, gains: GainSet) -> tuple[complex, complex, bool]:
    """Roots of ``s^2 + (k_d + gamma_d lam) s + (k_p + gamma_p lam)``.

    Returns ``(rho1, rho2, repeated)``. Inside the repeated band both roots are
    set to ``-b/2``. Otherwise ``rho1 = (-b + sqrt(disc))/2`` and
    ``rho2 = (-b - sqrt(disc))/2`` (principal square root), evaluated without
    cancellation: the larger-magnitude root comes from the quadratic formula
    and the other from Vieta.
    """
    b, c = char_coefficients(lam, gains)
    if is_repeated(b, c):
        rho = -b / 2
        return rho, rho, True
    sq = cmath.sqrt(b * b - 4 * c)
    plus_is_large = (b.conjugate() * sq).real < 0
    big = (-b + sq) / 2 if plus_is_large else (-b - sq) / 2
    small = c / big if big != 0 else -b - big
    if plus_is_large:
        return big, small, False
    return small, big, False


def io_stable_first_order(C) -> bool:
    """Single-integrator networks are IO stable iff ``C @ 1 == 0``."""
    try:
        check_output_matrix(C)
    except ValueError:
        return False
    return True


def io_stable_second_order(S, gains: GainSet, obsv) -> bool:
    """Routh-Hurwitz test on every observable mode.

    ``S`` is a :class:`~digraph_perf.spectral.SpectralData` or a sequence of
    block eigenvalues; ``obsv`` indexes into it. Boundary cases count as
    unstable.
    """
    eigs = S.eigenvalues if hasattr(S, "eigenvalues") else np.asarray(S)
    return all(mode_coefficients(eigs[k], gains).stable for k in obsv)
