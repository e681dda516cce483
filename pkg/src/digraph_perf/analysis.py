"""Directed-versus-undirected comparisons and parameter sweeps."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .closed_form import (
    Dynamics,
    Output,
    PerformanceQuery,
    h2_normal,
    performance,
)
from .errors import NoComplexObservableMode, NotNormal, NumericalError, Unstable
from .graph import (
    complete_laplacian,
    cyclic_laplacian,
    deviation_from_average_output,
    hermitian_part,
    imploding_star_laplacian,
    is_normal,
)
from .inputs import IdentityCovariance
from .spectral import SpectralData, decompose, geometric_weights
from .stability import GainSet

IMAG_TOL = 1e-9
SIGN_TOL = 1e-9
BISECT_TOL = 1e-6
TIE_RTOL = 1e-9


class Relation(str, Enum):
    LESS = "Less"
    EQUAL = "Equal"
    GREATER = "Greater"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ComparisonReport:
    """Directed performance ``P`` against its undirected counterpart ``P'``."""

    p_directed: float
    p_undirected: float
    relation: Relation
    theorem_prediction: Relation | None
    consistent: bool

    def to_json(self) -> dict:
        return {
            "p_directed": self.p_directed,
            "p_undirected": self.p_undirected,
            "relation": self.relation.value,
            "theorem_prediction": None if self.theorem_prediction is None else self.theorem_prediction.value,
            "consistent": self.consistent,
        }


def relation_of(p: float, p_prime: float) -> Relation:
    """Compare with tolerance ``1e-9 (1 + max(p, p'))``."""
    tol = 1e-9 * (1.0 + max(abs(p), abs(p_prime)))
    if p < p_prime - tol:
        return Relation.LESS
    if p > p_prime + tol:
        return Relation.GREATER
    return Relation.EQUAL


def _complex_modes(S: SpectralData, observable) -> list[int]:
    out = []
    for k in observable:
        lam = complex(S.eigenvalues[k])
        if abs(lam.imag) > IMAG_TOL * (1.0 + abs(lam)):
            out.append(k)
    return out


def predict_relation(S: SpectralData, observable, query: PerformanceQuery) -> Relation:
    """Predict ``P`` versus ``P'`` from eigenvalues and gains alone.

    The rules hold for a normal Laplacian with unit input covariance.
    Single integrators always tie. For position output the sign of
    ``gamma_d (k_d + gamma_d Re lambda_k) - gamma_p`` over the observable
    complex modes decides. For velocity output the directed network is worse
    whenever relative position feedback meets an observable complex mode.
    """
    if not isinstance(query.input, IdentityCovariance):
        return Relation.INDETERMINATE
    if query.dynamics is Dynamics.FIRST:
        return Relation.EQUAL
    g = query.gains
    cplx = _complex_modes(S, observable)
    if g.gamma_p == 0 or not cplx:
        return Relation.EQUAL
    if query.output is Output.VELOCITY:
        return Relation.GREATER
    signs = []
    for k in cplx:
        s = g.gamma_d * (g.k_d + g.gamma_d * S.eigenvalues[k].real) - g.gamma_p
        scale = 1.0 + g.gamma_p + g.gamma_d * (g.k_d + g.gamma_d * abs(S.eigenvalues[k].real))
        signs.append(0 if abs(s) <= SIGN_TOL * scale else (1 if s > 0 else -1))
    if all(s == 0 for s in signs):
        return Relation.EQUAL
    if all(s >= 0 for s in signs):
        return Relation.LESS
    if all(s <= 0 for s in signs):
        return Relation.GREATER
    return Relation.INDETERMINATE


def compare_directed_undirected(L, query: PerformanceQuery) -> ComparisonReport:
    """Compare a normal directed Laplacian with its Hermitian part.

    The prediction is fixed before either performance is evaluated.

    Raises
    ------
    NotNormal
        ``L`` is not normal.
    Unstable
        Either network is unstable for the query.
    """
    L = np.asarray(L, dtype=float)
    if not is_normal(L):
        raise NotNormal("directed/undirected comparison needs a normal Laplacian")
    L_prime = hermitian_part(L)
    S = decompose(L)
    S_prime = decompose(L_prime)
    W = geometric_weights(query.C, S)
    prediction = predict_relation(S, W.observable, query)
    p = performance(L, S, query).value
    p_prime = performance(L_prime, S_prime, query).value
    rel = relation_of(p, p_prime)
    consistent = prediction is Relation.INDETERMINATE or rel is prediction
    return ComparisonReport(p, p_prime, rel, prediction, consistent)


# --- gamma_p thresholds ------------------------------------------------------------

def _normal_h2_or_inf(S, W, query) -> float:
    try:
        return h2_normal(S, W, query)
    except Unstable:
        return float("inf")


def gamma_p_thresholds(L, k_p: float, k_d: float, gamma_d: float, C, output=Output.POSITION,
                       grid_points: int = 400) -> tuple[float, float, list[float]]:
    """Bracket ``[gamma_l, gamma_u]`` and the sign changes of ``P - P'`` inside it.

    ``gamma_l`` and ``gamma_u`` are the extremes of
    ``gamma_d (k_d + gamma_d Re lambda_k)`` over observable complex modes.
    Below ``gamma_l`` the directed network is strictly better and above
    ``gamma_u`` strictly worse. A directed network that loses stability has
    infinite performance, which counts as worse. Sign changes are found on a
    uniform grid and refined by bisection to ``1e-6``.

    Raises
    ------
    NoComplexObservableMode
        No observable eigenvalue has a nonzero imaginary part.
    """
    L = np.asarray(L, dtype=float)
    if not is_normal(L):
        raise NotNormal("gamma_p thresholds need a normal Laplacian")
    S = decompose(L)
    S_prime = decompose(hermitian_part(L))
    W = geometric_weights(C, S)
    W_prime = geometric_weights(C, S_prime)
    cplx = _complex_modes(S, W.observable)
    if not cplx:
        raise NoComplexObservableMode("no observable eigenvalue with nonzero imaginary part")
    vals = [gamma_d * (k_d + gamma_d * S.eigenvalues[k].real) for k in cplx]
    g_lo, g_hi = float(min(vals)), float(max(vals))

    def diff(gp: float) -> float:
        q = PerformanceQuery(Dynamics.SECOND, C, output, GainSet(k_p, k_d, gp, gamma_d))
        p = _normal_h2_or_inf(S, W, q)
        p_prime = _normal_h2_or_inf(S_prime, W_prime, q)
        if np.isinf(p_prime):
            raise Unstable(f"undirected network unstable at gamma_p = {gp}")
        return p - p_prime

    def sign(x: float) -> int:
        return 0 if x == 0 else (1 if x > 0 else -1)

    grid = np.linspace(g_lo, g_hi, max(grid_points, 2))
    values = [diff(g) for g in grid]
    crossings = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if sign(fa) == 0:
            crossings.append(float(a))
            continue
        if sign(fa) * sign(fb) < 0:
            sa = sign(fa)
            while b - a > BISECT_TOL:
                mid = 0.5 * (a + b)
                fm = diff(mid)
                if sign(fm) == sa:
                    a = mid
                elif sign(fm) == 0:
                    a = b = mid
                else:
                    b = mid
            crossings.append(float(0.5 * (a + b)))
    if values and sign(values[-1]) == 0:
        crossings.append(float(grid[-1]))
    return g_lo, g_hi, crossings


# --- sweeps --------------------------------------------------------------------------

def _max_workers() -> int:
    env = os.environ.get("DIGRAPH_PERF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parallel_map(fn: Callable, items: Sequence) -> list:
    workers = min(_max_workers(), len(items)) if items else 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class OmegaRow:
    omega: int
    performance: float
    stable: bool


def omega_sweep(n: int, gains: GainSet | None, dynamics, output=Output.POSITION, C=None) -> list[OmegaRow]:
    """Unit-covariance performance of ``L^cyc(1, omega)`` for ``omega = 1..n-1``.

    Unstable points are reported with ``stable=False`` and a NaN value.
    """
    C = deviation_from_average_output(n) if C is None else np.asarray(C)
    query = PerformanceQuery(dynamics, C, output, gains)

    def one(omega: int) -> OmegaRow:
        L = cyclic_laplacian(n, 1.0, omega)
        S = decompose(L, f"cycle:{n},1,{omega}")
        try:
            return OmegaRow(omega, performance(L, S, query).value, True)
        except Unstable:
            return OmegaRow(omega, float("nan"), False)

    return _parallel_map(one, list(range(1, n)))


def sweep_argmin(rows: Iterable[OmegaRow], rtol: float = TIE_RTOL) -> int:
    """Smallest ``omega`` whose value is within ``rtol`` of the minimum."""
    rows = [r for r in rows if r.stable]
    best = min(r.performance for r in rows)
    return min(r.omega for r in rows if r.performance <= best + rtol * abs(best))


@dataclass(frozen=True)
class StarCompleteRow:
    n: int
    p_star: float
    p_complete: float
    abs_diff: float


def star_vs_complete(n_range: Iterable[int], gains: GainSet | None, dynamics, output=Output.POSITION,
                     rtol: float | None = 1e-10) -> list[StarCompleteRow]:
    """Deviation-from-average performance of the star and the complete graph.

    With ``rtol`` set, a relative mismatch above it raises
    :class:`~digraph_perf.errors.NumericalError`.
    """
    def one(n: int) -> StarCompleteRow:
        C = deviation_from_average_output(n)
        query = PerformanceQuery(dynamics, C, output, gains)
        Ls, Lc = imploding_star_laplacian(n), complete_laplacian(n)
        ps = performance(Ls, decompose(Ls, "star"), query).value
        pc = performance(Lc, decompose(Lc, "complete"), query).value
        return StarCompleteRow(n, ps, pc, abs(ps - pc))

    rows = _parallel_map(one, list(n_range))
    if rtol is not None:
        for r in rows:
            if r.abs_diff > rtol * max(abs(r.p_star), abs(r.p_complete), 1e-300):
                raise NumericalError(f"star and complete graph differ at n = {r.n}: {r.abs_diff:.3e}")
    return rows


@dataclass(frozen=True)
class GammaRow:
    gamma_p: float
    p_directed: float
    p_undirected: float
    stable_directed: bool
    stable_undirected: bool


def gamma_sweep(L, L_prime, k_p: float, k_d: float, gamma_d: float, gamma_p_grid,
                output=Output.POSITION, C=None) -> list[GammaRow]:
    """Second-order performance of ``L`` and ``L'`` along a ``gamma_p`` grid.

    Unstable points carry ``inf`` and a ``False`` stability flag.
    """
    L, L_prime = np.asarray(L, dtype=float), np.asarray(L_prime, dtype=float)
    n = L.shape[0]
    C = deviation_from_average_output(n) if C is None else np.asarray(C)
    S, S_prime = decompose(L), decompose(L_prime)

    def value(Lx, Sx, q):
        try:
            return performance(Lx, Sx, q).value, True
        except Unstable:
            return float("inf"), False

    def one(gp: float) -> GammaRow:
        q = PerformanceQuery(Dynamics.SECOND, C, output, GainSet(k_p, k_d, float(gp), gamma_d))
        pd, sd = value(L, S, q)
        pu, su = value(L_prime, S_prime, q)
        return GammaRow(float(gp), pd, pu, sd, su)

    return _parallel_map(one, [float(g) for g in gamma_p_grid])


# --- random instances ------------------------------------------------------------

def random_normal_laplacian(n: int, rng: np.random.Generator, max_terms: int = 3,
                            symmetric: bool = False) -> np.ndarray:
    """Random convex combination of circulant Laplacians, scaled by a random degree.

    Circulant matrices commute, so the result is normal, weight balanced and
    strongly connected. With ``symmetric`` every term is paired with its
    transpose.
    """
    terms = int(rng.integers(1, max_terms + 1))
    weights = rng.dirichlet(np.ones(terms))
    L = np.zeros((n, n))
    for w in weights:
        base = cyclic_laplacian(n, 1.0, int(rng.integers(1, n)))
        if symmetric:
            base = 0.5 * (base + base.T)
        elif rng.random() < 0.3:
            base = base.T
        L += w * base
    return L * rng.uniform(0.5, 2.0)


def fourier_basis(n: int) -> np.ndarray:
    """Unitary DFT eigenvectors shared by all circulant matrices of size ``n``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def random_circulant_output(n: int, rng: np.random.Generator,
                            drop_modes: Sequence[int] = ()) -> np.ndarray:
    """Random real circulant ``C`` with ``C @ 1 = 0``, blind to selected Fourier modes.

    ``drop_modes`` lists Fourier indices in ``1..n-1``; each index removes that
    mode and its conjugate, so ``C`` stays real.
    """
    drop = {0}
    for k in drop_modes:
        drop.add(k % n)
        drop.add((-k) % n)
    chat = np.fft.fft(rng.normal(size=n))
    chat[sorted(drop)] = 0.0
    c = np.fft.ifft(chat).real
    return np.array([np.roll(c, i) for i in range(n)])


# --- CSV ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def to_csv(rows: Sequence, kind: str) -> str:
    """Serialize sweep rows with fixed headers and 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "omega":
        w.writerow(["omega", "performance", "stable"])
        for r in rows:
            w.writerow([_fmt(r.omega), _fmt(r.performance), _fmt(r.stable)])
    elif kind == "gamma":
        w.writerow(["gamma_p", "p_directed", "p_undirected"])
        for r in rows:
            w.writerow([_fmt(r.gamma_p), _fmt(r.p_directed), _fmt(r.p_undirected)])
    elif kind == "star":
        w.writerow(["n", "p_star", "p_complete", "abs_diff"])
        for r in rows:
            w.writerow([_fmt(r.n), _fmt(r.p_star), _fmt(r.p_complete), _fmt(r.abs_diff)])
    else:
        raise ValueError(f"unknown table kind {kind!r}")
    return buf.getvalue()
