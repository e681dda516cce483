"""Closed-form performance ``P = tr(Sigma_Q Psi)`` from Jordan-block scalar products.

Within a Jordan block of size ``n_k`` the impulse response of a mode is an upper
triangular Toeplitz matrix whose ``(p, q)`` entry depends only on
``sigma = q - p + 1``. The scalar product of two entries therefore depends only
on ``(sigma, upsilon)``, and one small table per pair of blocks is enough to
assemble ``Psi``.

All block entry indices ``p, q, a, b`` in the public scalar-product functions
are 1-based, matching the usual Toeplitz indexing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import mpmath
import numpy as np

from .errors import (
    BlockTooLarge,
    DistinctRoots,
    DivergentIntegral,
    InvalidQuery,
    NotNormal,
    NumericalError,
    RepeatedRoots,
    ShapeMismatch,
    Unstable,
    BadSize,
)
from .graph import check_output_matrix
from .inputs import IdentityCovariance, InputSpec
from .spectral import GeometricWeights, SpectralData, geometric_weights, sigma_q
from .stability import (
    GainSet,
    char_roots,
    check_assumptions,
    io_stable_second_order,
    mode_coefficients,
)

MAX_BLOCK = 20
NEGATIVE_TOL = 1e-12
IMAG_TOL = 1e-9

# Jordan-block kernels are evaluated in mpmath starting at _DPS_START digits and
# doubling until two successive precisions agree to _DPS_AGREE.
_DPS_START = 40
_DPS_MAX = 1280
_DPS_AGREE = 1e-15


def _binom(a: int, b: int) -> int:
    return math.comb(a, b)


class Dynamics(str, Enum):
    FIRST = "first"
    SECOND = "second"


class Output(str, Enum):
    POSITION = "position"
    VELOCITY = "velocity"


@dataclass(frozen=True, eq=False)
class PerformanceQuery:
    """What to measure: network order, output kind, ``C``, gains and input."""

    dynamics: Dynamics
    C: np.ndarray
    output: Output = Output.POSITION
    gains: GainSet | None = None
    input: InputSpec = field(default_factory=IdentityCovariance)

    def __post_init__(self):
        try:
            object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
            object.__setattr__(self, "output", Output(self.output))
        except ValueError as exc:
            raise InvalidQuery(str(exc)) from exc
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C)))
        if self.dynamics is Dynamics.FIRST:
            if self.output is Output.VELOCITY:
                raise InvalidQuery("velocity output is only defined for second-order networks")
            if self.gains is not None:
                raise InvalidQuery("gains are only used by second-order networks")
        elif self.gains is None:
            raise InvalidQuery("second-order networks require gains")


@dataclass(frozen=True, eq=False)
class PerformanceResult:
    """Metric value with per-mode diagonal contributions and diagnostics.

    ``psi_diag`` holds ``Re Psi_kk`` for every column of ``R_tilde`` (zero for
    unobservable modes or entries that were not needed).
    """

    value: float
    psi_diag: np.ndarray
    imag_residual: float
    path: str
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "imag_residual": self.imag_residual,
            "path": self.path,
            "psi_diag": [float(x) for x in self.psi_diag],
            "diagnostics": self.diagnostics,
        }


def _check_block_indices(p, q, a, b):
    if not (1 <= p <= q and 1 <= a <= b):
        raise ShapeMismatch(f"need 1 <= p <= q and 1 <= a <= b, got {(p, q, a, b)}")
    if q - p + 1 > MAX_BLOCK or b - a + 1 > MAX_BLOCK:
        raise BlockTooLarge(f"Jordan blocks larger than {MAX_BLOCK} are not supported")


def _check_delta(delta: int):
    if delta < 1:
        raise ShapeMismatch(f"delta must be a positive integer, got {delta}")
    if delta > MAX_BLOCK:
        raise BlockTooLarge(f"Jordan blocks larger than {MAX_BLOCK} are not supported")


# --- single integrator ------------------------------------------------------------

def _kernel_first(lam_k: complex, lam_l: complex, s: int, u: int) -> complex:
    # s = q - p, u = b - a
    z = complex(lam_k).conjugate() + complex(lam_l)
    if z.real <= 0:
        raise DivergentIntegral(f"Re(conj(lambda_k) + lambda_l) = {z.real} is not positive")
    N = s + u
    return (-1) ** N * math.comb(N, s) / z ** (N + 1)


def scalar_product_first_order(lam_k, lam_l, p: int, q: int, a: int, b: int) -> complex:
    """``<h_ab^(l), h_pq^(k)>`` for single-integrator Jordan blocks.

    Equals ``(-1)^N Phi / (conj(lam_k) + lam_l)^(N+1)`` with ``N = b-a+q-p`` and
    ``Phi = N! / ((b-a)! (q-p)!)``.
    """
    _check_block_indices(p, q, a, b)
    return _kernel_first(lam_k, lam_l, q - p, b - a)


def psi_diag_diagonalizable_first(lam_k, lam_l) -> complex:
    """Scalar-block kernel ``1/(conj(lam_k) + lam_l)`` written out in real terms."""
    lam_k, lam_l = complex(lam_k), complex(lam_l)
    re = lam_k.real + lam_l.real
    im = lam_k.imag - lam_l.imag
    if re <= 0:
        raise DivergentIntegral(f"Re(conj(lambda_k) + lambda_l) = {re} is not positive")
    return complex(re, im) / (re * re + im * im)


# --- double integrator: partial fractions ------------------------------------------

def _tau(zeta: int, l: int, delta: int) -> float:
    return (-1) ** (l - zeta - 1) * _binom(l - 1, zeta) * _binom(delta + l - zeta - 2, l - 1)


# The coefficient and kernel helpers below are written against plain arithmetic
# so the same code runs on Python complex numbers or on mpmath numbers.

def _pf_distinct(r1, r2, gp, gd, delta: int, output: Output) -> list:
    velocity = output is Output.VELOCITY
    c = [0j] * (2 * delta)
    for first, (ra, rb) in enumerate(((r1, r2), (r2, r1))):
        X = gp + ra * gd
        diff = ra - rb
        for l in range(1, delta + 1):
            acc = 0j
            for zeta in range(l):
                if not velocity:
                    w = gd ** zeta
                elif zeta == 0:
                    # gamma_d^{-1} (delta rho gamma_d)/delta, cancelled
                    w = ra
                else:
                    w = gd ** (zeta - 1) * (zeta * gp + delta * ra * gd) / (delta - zeta)
                acc += _tau(zeta, l, delta) * w * X ** (delta - zeta - 1) / diff ** (delta + l - zeta - 1)
            c[l - 1 + first * delta] = acc
    return c


def _pf_repeated(rho, gp, gd, delta: int, output: Output) -> list:
    X = gp + rho * gd
    c = [0j] * (2 * delta)
    if output is Output.POSITION:
        for l in range(1, delta + 1):
            c[l - 1] = gd ** (l - 1) * _binom(delta - 1, l - 1) * X ** (delta - l)
    else:
        c[0] = rho * X ** (delta - 1)
        for l in range(2, delta + 1):
            c[l - 1] = ((l - 1) * gp + delta * rho * gd) / (delta - l + 1) * gd ** (l - 2) \
                * _binom(delta - 1, l - 1) * X ** (delta - l)
        c[delta] = gd ** (delta - 1)
    return c


def pf_coefficients_distinct(lam, gains: GainSet, delta: int, output) -> np.ndarray:
    """Partial-fraction coefficients of ``r(s)(gamma_p + s gamma_d)^(delta-1) / D(s)^delta``.

    With distinct roots ``rho1, rho2`` of ``D``, the expansion is
    ``sum_l c[l-1]/(s-rho1)^(delta-l+1) + c[delta+l-1]/(s-rho2)^(delta-l+1)``.
    ``r(s) = 1`` for position output and ``r(s) = s`` for velocity output.

    Raises
    ------
    RepeatedRoots
        The characteristic roots fall in the repeated band.
    """
    _check_delta(delta)
    output = Output(output)
    r1, r2, repeated = char_roots(lam, gains)
    if repeated:
        raise RepeatedRoots("characteristic roots are repeated; use pf_coefficients_repeated")
    return np.array(_pf_distinct(r1, r2, gains.gamma_p, gains.gamma_d, delta, output), dtype=complex)


def pf_coefficients_repeated(lam, gains: GainSet, delta: int, output) -> np.ndarray:
    """Coefficients of ``sum_l c[l-1]/(s-rho)^(2 delta-l+1)`` for a repeated root ``rho``.

    Raises
    ------
    DistinctRoots
        The characteristic roots are not in the repeated band.
    """
    _check_delta(delta)
    output = Output(output)
    r1, _, repeated = char_roots(lam, gains)
    if not repeated:
        raise DistinctRoots("characteristic roots are distinct; use pf_coefficients_distinct")
    return np.array(_pf_repeated(r1, gains.gamma_p, gains.gamma_d, delta, output), dtype=complex)


def omega_transfer(s, lam, gains: GainSet, delta: int, output) -> complex:
    """Direct evaluation of ``r(s)(gamma_p + s gamma_d)^(delta-1)/(s^2 + b s + c)^delta``."""
    output = Output(output)
    lam = complex(lam)
    D = s * s + (gains.k_d + gains.gamma_d * lam) * s + gains.k_p + gains.gamma_p * lam
    r = s if output is Output.VELOCITY else 1.0
    return r * (gains.gamma_p + s * gains.gamma_d) ** (delta - 1) / D ** delta


def pf_reconstruct(s, lam, gains: GainSet, delta: int, output) -> complex:
    """Evaluate the partial-fraction expansion at ``s``."""
    r1, r2, repeated = char_roots(lam, gains)
    if repeated:
        c = pf_coefficients_repeated(lam, gains, delta, output)
        return sum(c[l - 1] / (s - r1) ** (2 * delta - l + 1) for l in range(1, 2 * delta + 1))
    c = pf_coefficients_distinct(lam, gains, delta, output)
    return sum(
        c[l - 1] / (s - r1) ** (delta - l + 1) + c[delta + l - 1] / (s - r2) ** (delta - l + 1)
        for l in range(1, delta + 1)
    )


# --- double integrator: scalar products --------------------------------------------

class _Mode:
    """Characteristic roots of one eigenvalue plus cached coefficients.

    With ``dps`` set, roots and coefficients are mpmath numbers at that many
    decimal digits. The distinct/repeated branch always follows the shared
    double-precision discriminant test.
    """

    __slots__ = ("lam", "gains", "output", "rho1", "rho2", "repeated", "_gp", "_gd", "_cache")

    def __init__(self, lam, gains: GainSet, output: Output, dps: int | None = None):
        self.lam = complex(lam)
        self.gains = gains
        self.output = output
        self.rho1, self.rho2, self.repeated = char_roots(self.lam, gains)
        self._gp, self._gd = gains.gamma_p, gains.gamma_d
        if dps is not None:
            with mpmath.workdps(dps):
                lam_mp = mpmath.mpc(self.lam.real, self.lam.imag)
                kp, kd, gp, gd = (mpmath.mpf(x) for x in (gains.k_p, gains.k_d, gains.gamma_p, gains.gamma_d))
                b = kd + gd * lam_mp
                if self.repeated:
                    self.rho1 = self.rho2 = -b / 2
                else:
                    root = mpmath.sqrt(b * b - 4 * (kp + gp * lam_mp))
                    self.rho1, self.rho2 = (-b + root) / 2, (-b - root) / 2
                self._gp, self._gd = gp, gd
        self._cache: dict[int, list] = {}

    def coeffs(self, delta: int) -> list:
        c = self._cache.get(delta)
        if c is None:
            if self.repeated:
                c = _pf_repeated(self.rho1, self._gp, self._gd, delta, self.output)
            else:
                c = _pf_distinct(self.rho1, self.rho2, self._gp, self._gd, delta, self.output)
            self._cache[delta] = c
        return c


def _phi(zeta: int, r: int, sigma: int, upsilon: int) -> int:
    # (sigma + upsilon - zeta - r)! / ((sigma - zeta)! (upsilon - r)!) is a binomial coefficient
    sign = 1 if (zeta + r) % 2 else -1
    return sign * math.comb(sigma + upsilon - zeta - r, sigma - zeta)


def _rate(x: complex, y: complex) -> complex:
    z = x.conjugate() + y
    if z.real >= 0:
        raise DivergentIntegral(f"root pair with Re(conj(rho_k) + rho_l) = {z.real} >= 0")
    return z


def _distinct_distinct(mk: _Mode, ml: _Mode, sigma: int, upsilon: int) -> complex:
    ck, cl = mk.coeffs(sigma), ml.coeffs(upsilon)
    z11 = _rate(mk.rho1, ml.rho1)
    z12 = _rate(mk.rho1, ml.rho2)
    z21 = _rate(mk.rho2, ml.rho1)
    z22 = _rate(mk.rho2, ml.rho2)
    total = 0j
    for zeta in range(1, sigma + 1):
        a1 = ck[zeta - 1].conjugate()
        a2 = ck[zeta + sigma - 1].conjugate()
        for r in range(1, upsilon + 1):
            e = sigma + upsilon - zeta - r + 1
            b1 = cl[r - 1]
            b2 = cl[r + upsilon - 1]
            total += _phi(zeta, r, sigma, upsilon) * (
                a1 * b1 / z11 ** e + a1 * b2 / z12 ** e + a2 * b1 / z21 ** e + a2 * b2 / z22 ** e
            )
    return total


def _distinct_repeated(mk: _Mode, ml: _Mode, sigma: int, upsilon: int) -> complex:
    ck, cl = mk.coeffs(sigma), ml.coeffs(upsilon)
    z1 = _rate(mk.rho1, ml.rho1)
    z2 = _rate(mk.rho2, ml.rho1)
    total = 0j
    for zeta in range(1, sigma + 1):
        a1 = ck[zeta - 1].conjugate()
        a2 = ck[zeta + sigma - 1].conjugate()
        for r in range(1, 2 * upsilon + 1):
            e = sigma + 2 * upsilon - zeta - r + 1
            total += _phi(zeta, r, sigma, 2 * upsilon) * cl[r - 1] * (a1 / z1 ** e + a2 / z2 ** e)
    return (-1) ** upsilon * total


def _repeated_repeated(mk: _Mode, ml: _Mode, sigma: int, upsilon: int) -> complex:
    ck, cl = mk.coeffs(sigma), ml.coeffs(upsilon)
    z = _rate(mk.rho1, ml.rho1)
    total = 0j
    for zeta in range(1, 2 * sigma + 1):
        a = ck[zeta - 1].conjugate()
        for r in range(1, 2 * upsilon + 1):
            e = 2 * sigma + 2 * upsilon - zeta - r + 1
            total += _phi(zeta, r, 2 * sigma, 2 * upsilon) * a * cl[r - 1] / z ** e
    return (-1) ** (sigma + upsilon) * total


def _kernel_second(mk: _Mode, ml: _Mode, sigma: int, upsilon: int) -> complex:
    if not mk.repeated and not ml.repeated:
        return _distinct_distinct(mk, ml, sigma, upsilon)
    if not mk.repeated:
        return _distinct_repeated(mk, ml, sigma, upsilon)
    if not ml.repeated:
        # <x, y> = conj(<y, x>) swaps the roles so the distinct mode is conjugated
        return _distinct_repeated(ml, mk, upsilon, sigma).conjugate()
    return _repeated_repeated(mk, ml, sigma, upsilon)


def scalar_product_second_order(lam_k, lam_l, gains: GainSet, output,
                                p: int, q: int, a: int, b: int) -> complex:
    """``<h_ab^(l), h_pq^(k)>`` for double-integrator Jordan blocks.

    Dispatches on whether each mode's characteristic roots are distinct or
    repeated. The mixed case with a repeated ``k`` and distinct ``l`` is the
    complex conjugate of the swapped product.
    """
    _check_block_indices(p, q, a, b)
    output = Output(output)
    mk = _Mode(lam_k, gains, output)
    ml = _Mode(lam_l, gains, output)
    return _kernel_second(mk, ml, q - p + 1, b - a + 1)


def _precise_table(lam_k, lam_l, nk: int, nl: int, gains: GainSet, output: Output) -> np.ndarray:
    """Kernel table ``G[s-1, u-1]`` for two Jordan blocks, in adaptive precision.

    The distinct-root coefficients carry powers of ``1/(rho1 - rho2)`` up to
    twice the block size, so in double precision long blocks lose most of
    their digits to cancellation. The same formulas are evaluated in mpmath
    with doubling precision until the table is stable.
    """
    prev = None
    dps = _DPS_START
    while dps <= _DPS_MAX:
        with mpmath.workdps(dps):
            mk = _Mode(lam_k, gains, output, dps)
            ml = mk if lam_l == lam_k else _Mode(lam_l, gains, output, dps)
            cur = np.array([[complex(_kernel_second(mk, ml, s + 1, u + 1)) for u in range(nl)]
                            for s in range(nk)])
        if prev is not None:
            floor = 1e-25 * float(np.max(np.abs(cur)))
            if np.all(np.abs(cur - prev) <= _DPS_AGREE * np.abs(cur) + floor):
                return cur
        prev = cur
        dps *= 2
    raise NumericalError(f"Jordan-block kernels did not settle within {_DPS_MAX} digits")


# --- assembly ------------------------------------------------------------------------

def _block_from_table(N: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``out[q, b] = sum_{p<=q, a<=b} N[p, a] G[q-p, b-a]``."""
    nk, nl = N.shape
    out = np.empty((nk, nl), dtype=complex)
    for q in range(nk):
        for b in range(nl):
            out[q, b] = np.sum(N[: q + 1, : b + 1] * G[q::-1, b::-1])
    return out


def assemble_psi(S: SpectralData, W: GeometricWeights, query: PerformanceQuery,
                 diagonal_blocks_only: bool = False) -> np.ndarray:
    """Assemble ``Psi`` block by block from the scalar-product tables.

    Only observable blocks are filled; rows and columns of unobservable blocks
    are zero because the matching rows of ``nu`` vanish. With
    ``diagonal_blocks_only`` the off-diagonal blocks are skipped (left zero),
    which is all that is needed when ``Sigma_Q`` is diagonal.
    """
    obs = list(W.observable)
    psi = np.zeros((S.n - 1, S.n - 1), dtype=complex)
    if not obs:
        return psi
    for k in obs:
        if S.block_sizes[k] > MAX_BLOCK:
            raise BlockTooLarge(f"Jordan block of size {S.block_sizes[k]} exceeds {MAX_BLOCK}")
    nu = W.nu
    second = query.dynamics is Dynamics.SECOND
    modes: dict[complex, _Mode] = {}
    kernels: dict[tuple, complex] = {}

    def mode(lam):
        m = modes.get(lam)
        if m is None:
            m = modes[lam] = _Mode(lam, query.gains, query.output)
        return m

    def kernel(lk, ll, sigma, upsilon):
        key = (lk, ll, sigma, upsilon)
        v = kernels.get(key)
        if v is None:
            if second:
                v = _kernel_second(mode(lk), mode(ll), sigma, upsilon)
            else:
                v = _kernel_first(lk, ll, sigma - 1, upsilon - 1)
            kernels[key] = v
        return v

    lam = [complex(x) for x in S.eigenvalues]
    if all(S.block_sizes[k] == 1 for k in obs):
        idx = np.array([k - 1 for k in obs])
        K = np.zeros((len(obs), len(obs)), dtype=complex)
        for i, k in enumerate(obs):
            others = [i] if diagonal_blocks_only else range(i, len(obs))
            for j in others:
                K[i, j] = kernel(lam[k], lam[obs[j]], 1, 1)
                K[j, i] = K[i, j].conjugate()
        sub = nu[np.ix_(idx, idx)] * K
        if diagonal_blocks_only:
            psi[idx, idx] = np.diagonal(sub)
        else:
            psi[np.ix_(idx, idx)] = sub
        return psi

    for i, k in enumerate(obs):
        sk = S.tilde_slice(k)
        others = [k] if diagonal_blocks_only else obs[i:]
        for l in others:
            sl = S.tilde_slice(l)
            nk, nl = S.block_sizes[k], S.block_sizes[l]
            if second:
                G = _precise_table(lam[k], lam[l], nk, nl, query.gains, query.output)
            else:
                G = np.empty((nk, nl), dtype=complex)
                for s in range(nk):
                    for u in range(nl):
                        G[s, u] = kernel(lam[k], lam[l], s + 1, u + 1)
            block = _block_from_table(nu[sk, sl], G)
            psi[sk, sl] = block
            if l != k:
                psi[sl, sk] = block.conj().T
    return psi


def performance(L, S: SpectralData, query: PerformanceQuery) -> PerformanceResult:
    """Performance metric ``P = Re tr(Sigma_Q Psi)``.

    With :class:`~digraph_perf.inputs.IdentityCovariance` this is the squared
    H2 norm of the closed loop from ``w`` to ``y``.

    Raises
    ------
    GainAssumptionViolated, OutputAssumptionViolated
        Gains lack position or velocity feedback, or ``C @ 1 != 0``.
    Unstable
        Some observable mode is not Hurwitz.
    """
    n = S.n
    if L is not None and np.shape(L) != (n, n):
        raise ShapeMismatch(f"Laplacian shape {np.shape(L)} does not match the spectral data")
    second = query.dynamics is Dynamics.SECOND
    check_assumptions(query.gains, query.C)
    check_output_matrix(query.C, n)
    W = geometric_weights(query.C, S)
    if second and not io_stable_second_order(S, query.gains, W.observable):
        raise Unstable("an observable mode fails the Routh-Hurwitz test")
    SQ = sigma_q(S, query.input)
    diagonal = not np.any(SQ - np.diag(np.diag(SQ)))
    psi = assemble_psi(S, W, query, diagonal_blocks_only=diagonal)

    terms = SQ * psi.T
    tr = complex(np.sum(terms))
    scale = float(np.sum(np.abs(terms)))
    value = tr.real
    imag = abs(tr.imag)
    diagnostics: dict = {"observable": [int(k) for k in W.observable]}
    if second:
        rep = [int(k) for k in W.observable if char_roots(S.eigenvalues[k], query.gains)[2]]
        if rep:
            diagnostics["repeated_root_modes"] = rep
    if imag > IMAG_TOL * (1.0 + abs(value)) and imag > 1e-12 * scale:
        raise NumericalError(f"trace has imaginary part {imag:.3e} for value {value:.3e}")
    if value < 0:
        if value < -NEGATIVE_TOL * max(1.0, scale):
            raise NumericalError(f"negative performance {value:.3e}")
        diagnostics["clipped_from"] = value
        value = 0.0
    structure = "scalar" if all(S.block_sizes[k] == 1 for k in W.observable) else "jordan"
    path = f"{query.dynamics.value}-order/{structure}"
    if diagonal:
        path += "/diagonal-sigma"
    return PerformanceResult(
        value=float(value),
        psi_diag=np.diagonal(psi).real.copy(),
        imag_residual=float(imag),
        path=path,
        diagnostics=diagnostics,
    )


# --- fast paths -------------------------------------------------------------------

def psi_kk_second_order(lam, gains: GainSet, output) -> float:
    """Diagonal ``Psi_kk`` of a scalar double-integrator mode.

    Position: ``phi / (2 H)``. Velocity: ``(xi beta + phi alpha) / (2 H)``, with
    ``H = alpha phi^2 + beta xi phi - beta^2``.
    """
    output = Output(output)
    mc = mode_coefficients(lam, gains)
    if not mc.stable:
        raise Unstable(f"mode lambda = {lam} fails the Routh-Hurwitz test")
    H = mc.hurwitz
    if output is Output.POSITION:
        return mc.phi / (2 * H)
    return (mc.xi * mc.beta + mc.phi * mc.alpha) / (2 * H)


def psi_cross_real_eigen(lam_k: float, lam_l: float, gains: GainSet, output) -> float:
    """Cross kernel ``Psi_kl / nu_kl`` for two real scalar double-integrator modes."""
    output = Output(output)
    lk, ll = float(np.real(lam_k)), float(np.real(lam_l))
    if np.imag(lam_k) != 0 or np.imag(lam_l) != 0:
        raise ShapeMismatch("psi_cross_real_eigen needs real eigenvalues")
    kp, kd, gp, gd = gains.k_p, gains.k_d, gains.gamma_p, gains.gamma_d
    ak, al = kp + gp * lk, kp + gp * ll
    fk, fl = kd + gd * lk, kd + gd * ll
    if min(ak, al, fk, fl) <= 0:
        raise Unstable("a real mode has a nonpositive characteristic coefficient")
    denom = fk * fl * (2 * kp + gp * (lk + ll)) + gp ** 2 * (lk - ll) ** 2 + ak * fl ** 2 + al * fk ** 2
    if output is Output.POSITION:
        num = 2 * kd + gd * (lk + ll)
    else:
        num = al * fk + ak * fl
    return num / denom


def h2_normal(S: SpectralData, W: GeometricWeights, query: PerformanceQuery) -> float:
    """Squared H2 norm for a normal Laplacian from the diagonal of ``Psi`` alone.

    Raises
    ------
    NotNormal
        ``S`` does not carry an orthonormal eigenbasis.
    """
    if not S.unitary:
        raise NotNormal("h2_normal needs orthonormal eigenvectors (a normal Laplacian)")
    if not isinstance(query.input, IdentityCovariance):
        raise InvalidQuery("h2_normal is defined for unit input covariance only")
    total = 0.0
    for k in W.observable:
        lam = complex(S.eigenvalues[k])
        nu_kk = float(W.nu[k - 1, k - 1].real)
        if query.dynamics is Dynamics.FIRST:
            if lam.real <= 0:
                raise Unstable(f"mode lambda = {lam} is not stable")
            total += nu_kk / (2 * lam.real)
        else:
            total += nu_kk * psi_kk_second_order(lam, query.gains, query.output)
    return total


def star_performance(n: int, dynamics, output=Output.POSITION, gains: GainSet | None = None,
                     mu=None) -> float:
    """Expected performance of the imploding star with a circulant output.

    Parameters
    ----------
    mu : array_like, optional
        Eigenvalues of ``M = C^T C`` in Fourier order. Length ``n`` (the first
        entry, the consensus mode, is ignored) or ``n - 1``. Defaults to all
        ones, the deviation-from-average output.
    """
    if n < 2:
        raise BadSize(f"star graph needs n >= 2, got {n}")
    dynamics, output = Dynamics(dynamics), Output(output)
    if mu is None:
        mu_i = np.ones(n - 1)
    else:
        mu = np.asarray(mu, dtype=float).ravel()
        if mu.size == n:
            mu_i = mu[1:]
        elif mu.size == n - 1:
            mu_i = mu
        else:
            raise ShapeMismatch(f"mu must have length n or n-1, got {mu.size}")
    i = np.arange(2, n + 1)
    idx = np.arange(2, n + 1)
    diff = idx[None, :] - idx[:, None]  # l - k
    theta = 2 * np.pi * (i - 1) / n
    if dynamics is Dynamics.FIRST:
        upper = np.triu(np.ones_like(diff, dtype=bool), 1)
        cos_sum = np.array([np.cos(t * diff[upper]).sum() for t in theta])
        return float((n - 1) / n ** 2 * np.sum(mu_i * (n - 1 + cos_sum)))
    if gains is None:
        raise InvalidQuery("second-order networks require gains")
    exp_sum = np.array([np.exp(1j * t * diff).sum() for t in theta])
    p0c = (np.sum(mu_i) * (n - 1) + np.sum(exp_sum * mu_i)) / n
    if abs(p0c.imag) > 1e-9 * (1 + abs(p0c.real)):
        raise NumericalError(f"star sum has imaginary residual {p0c.imag:.3e}")
    p0 = p0c.real
    lam = n / (n - 1)
    kd_eff = gains.k_d + gains.gamma_d * lam
    kp_eff = gains.k_p + gains.gamma_p * lam
    if kd_eff <= 0 or kp_eff <= 0:
        raise Unstable("star mode is not Hurwitz")
    if output is Output.POSITION:
        return float(p0 / (2 * kp_eff * kd_eff))
    return float(p0 / (2 * kd_eff))
