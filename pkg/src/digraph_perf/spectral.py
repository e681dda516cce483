"""Jordan data of a Laplacian and the geometric weights built from it.

The decomposition is ``L = R J R^{-1}`` with ``J`` upper Jordan (ones on the
superdiagonal). Block 0 is always the simple zero eigenvalue, and the first
column of ``R`` is ``alpha * 1``. ``R_tilde`` is ``R`` without its first column and
``Q_tilde`` is ``R^{-1}`` without its first row.

Block indices used throughout the package are 0-based, so the observable set
is a subset of ``1..m-1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DecompositionError,
    DefectiveOrIllConditioned,
    NoReachableNode,
    ResidualTooLarge,
    ShapeMismatch,
    SingularR,
)
from .graph import (
    check_laplacian,
    check_output_matrix,
    has_globally_reachable_node,
    is_normal,
    parse_family,
)
from .inputs import Covariance, Deterministic, IdentityCovariance, check_psd

RESIDUAL_TOL = 1e-8
INVERSE_TOL = 1e-8
ZERO_EIG_TOL = 1e-9
MAX_EIGVEC_COND = 1e8
MAX_R_COND = 1e12
OBSERVABLE_TOL = 1e-10
NORMAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Validated Jordan data ``(lambda_k, n_k, R, R^{-1})`` of a Laplacian.

    Attributes
    ----------
    eigenvalues : ndarray of complex, shape (m,)
        One eigenvalue per Jordan block; ``eigenvalues[0] == 0``.
    block_sizes : tuple of int
        Jordan block sizes, ``block_sizes[0] == 1``.
    R, Rinv : ndarray, shape (n, n)
        Generalized eigenvector matrix and its inverse.
    alpha : complex
        Scale of the first column of ``R`` (``R[:, 0] == alpha * 1``).
    unitary : bool
        Whether ``R`` has orthonormal columns (true for normal ``L`` on the
        Schur and circulant paths).
    """

    eigenvalues: np.ndarray
    block_sizes: tuple[int, ...]
    R: np.ndarray
    Rinv: np.ndarray
    alpha: complex
    unitary: bool = False

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def m(self) -> int:
        return len(self.block_sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Column offsets ``d_k`` of each block in ``R``."""
        return np.concatenate(([0], np.cumsum(self.block_sizes)[:-1])).astype(int)

    def block_slice(self, k: int) -> slice:
        """Columns of ``R`` (rows of ``R^{-1}``) belonging to block ``k``."""
        d = int(self.offsets[k])
        return slice(d, d + self.block_sizes[k])

    def tilde_slice(self, k: int) -> slice:
        """Indices of block ``k >= 1`` inside ``R_tilde`` / ``nu`` / ``Psi``."""
        d = int(self.offsets[k]) - 1
        return slice(d, d + self.block_sizes[k])

    @property
    def J(self) -> np.ndarray:
        return jordan_matrix(self.eigenvalues, self.block_sizes)

    @property
    def R_tilde(self) -> np.ndarray:
        return self.R[:, 1:]

    @property
    def Q_tilde(self) -> np.ndarray:
        return self.Rinv[1:, :]

    def block_eigenvalues(self) -> np.ndarray:
        """Eigenvalue of every column of ``R_tilde`` (repeated per block size)."""
        return np.repeat(self.eigenvalues[1:], self.block_sizes[1:])


@dataclass(frozen=True, eq=False)
class GeometricWeights:
    """Output weights ``nu = R_tilde^* M R_tilde`` with ``M = C^* C``.

    ``mu`` holds the eigenvalues of ``M`` with ``mu[0] = 0`` paired to the
    consensus direction and ``theta`` the matching orthonormal eigenvectors.
    ``observable`` lists observable Jordan blocks (0-based, never 0).
    """

    nu: np.ndarray
    mu: np.ndarray
    theta: np.ndarray
    observable: tuple[int, ...]


def jordan_matrix(eigenvalues, block_sizes) -> np.ndarray:
    """Block-diagonal upper Jordan matrix."""
    n = int(sum(block_sizes))
    J = np.zeros((n, n), dtype=complex)
    d = 0
    for lam, size in zip(eigenvalues, block_sizes):
        J[d:d + size, d:d + size] = lam * np.eye(size) + np.eye(size, k=1)
        d += size
    return J


def _gauge(v: np.ndarray) -> np.ndarray:
    """Unit 2-norm, first entry of largest magnitude real positive."""
    v = v / np.linalg.norm(v)
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def _validate(L, eigenvalues, block_sizes, R, Rinv=None) -> SpectralData:
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    R = np.array(R, dtype=complex)
    eigenvalues = np.array(eigenvalues, dtype=complex).ravel()
    block_sizes = tuple(int(b) for b in block_sizes)
    if R.shape != (n, n):
        raise ShapeMismatch(f"R has shape {R.shape}, expected {(n, n)}")
    if len(eigenvalues) != len(block_sizes) or sum(block_sizes) != n or min(block_sizes) < 1:
        raise ShapeMismatch("eigenvalues and block sizes do not describe an n x n Jordan matrix")
    J = jordan_matrix(eigenvalues, block_sizes)
    normL = np.linalg.norm(L)
    if np.linalg.norm(L @ R - R @ J) > RESIDUAL_TOL * max(normL, 1e-300):
        raise ResidualTooLarge("||L R - R J|| exceeds tolerance")
    if Rinv is None:
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(R)
        if not np.isfinite(cond) or cond > MAX_R_COND:
            raise SingularR(f"R is singular or nearly so (condition number {cond:.3g})")
        Rinv = np.linalg.inv(R)
    Rinv = np.array(Rinv, dtype=complex)
    if np.linalg.norm(R @ Rinv - np.eye(n)) > INVERSE_TOL:
        raise SingularR("||R R^{-1} - I|| exceeds tolerance")
    if block_sizes[0] != 1 or abs(eigenvalues[0]) > ZERO_EIG_TOL * max(normL, 1.0):
        raise DecompositionError("the first Jordan block must be the simple zero eigenvalue")
    eigenvalues[0] = 0.0
    alpha = complex(R[0, 0])
    if abs(alpha) == 0 or np.linalg.norm(R[:, 0] - alpha) > 1e-8 * abs(alpha) * np.sqrt(n):
        raise DecompositionError("the first column of R must be a multiple of the ones vector")
    if n > 1 and np.min(eigenvalues[1:].real) <= ZERO_EIG_TOL * max(normL, 1.0):
        raise NoReachableNode("a nonzero block has an eigenvalue with nonpositive real part")
    unitary = bool(np.linalg.norm(R.conj().T @ R - np.eye(n)) <= 1e-10 * n)
    for a in (R, Rinv, eigenvalues):
        a.setflags(write=False)
    return SpectralData(eigenvalues, block_sizes, R, Rinv, alpha, unitary)


def import_jordan(L, eigenvalues, block_sizes, R) -> SpectralData:
    """Validate user-supplied Jordan data for ``L``.

    Raises
    ------
    ResidualTooLarge
        ``||L R - R J||_F > 1e-8 ||L||_F``.
    SingularR
        ``R`` is not invertible to working accuracy.
    """
    L = np.asarray(L, dtype=float)
    check_laplacian(L)
    return _validate(L, eigenvalues, block_sizes, R)


def jordan_from_json(data: dict) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Parse ``{"eigenvalues": [[re, im], ...], "block_sizes": [...], "R": [[[re, im], ...], ...]}``."""
    try:
        eig = np.array([complex(re, im) for re, im in data["eigenvalues"]])
        sizes = [int(b) for b in data["block_sizes"]]
        R = np.array([[complex(re, im) for re, im in row] for row in data["R"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed Jordan JSON: {exc}") from exc
    return eig, sizes, R


# --- analytic families ---------------------------------------------------------

def _cycle_data(n: int, d: float, omega: int):
    k = np.arange(n)
    i = np.arange(1, omega + 1)
    lam = d * (1.0 - np.exp(-2j * np.pi * np.outer(k, i) / n).sum(axis=1) / omega)
    lam[0] = 0.0
    R = np.exp(-2j * np.pi * np.outer(np.arange(n), k) / n) / np.sqrt(n)
    return lam, [1] * n, R, R.conj().T


def _star_data(n: int):
    c = n / (n - 1)
    lam = np.array([0.0] + [c] * (n - 1), dtype=complex)
    R = np.zeros((n, n), dtype=complex)
    R[:, 0] = 1.0
    R[: n - 1, 1:] = np.eye(n - 1)
    Rinv = np.zeros((n, n), dtype=complex)
    Rinv[0, n - 1] = 1.0
    Rinv[1:, : n - 1] = np.eye(n - 1)
    Rinv[1:, n - 1] = -1.0
    return lam, [1] * n, R, Rinv


def _path_data(n: int):
    # chain (L - I) r_{j+1} = r_j starting from the eigenvector e_{n-1}
    R = np.zeros((n, n), dtype=complex)
    R[:, 0] = 1.0
    for j in range(1, n):
        R[n - j, j] = (-1.0) ** (j - 1)
    Rinv = np.linalg.inv(R)
    if n == 1:
        return np.array([0.0]), [1], R, Rinv
    return np.array([0.0, 1.0]), [1, n - 1], R, Rinv


def _analytic(L: np.ndarray, hint: str):
    n = L.shape[0]
    name, _, rest = hint.partition(":")
    name = name.strip().lower()
    params = parse_family(hint)[1] if rest.strip() else None
    if params is not None and params[0] != n:
        raise ResidualTooLarge(f"hint {hint!r} does not match a {n}-node Laplacian")
    if name == "cycle":
        if params is None:
            d = float(L[0, 0])
            omega = int(np.count_nonzero(L[0] < 0))
        else:
            _, d, omega = params
        return _cycle_data(n, d, omega)
    if name == "complete":
        return _cycle_data(n, 1.0, n - 1)
    if name == "star":
        return _star_data(n)
    if name == "path":
        return _path_data(n)
    raise DecompositionError(f"unknown family hint {hint!r}")


def _numeric(L: np.ndarray):
    n = L.shape[0]
    normL = np.linalg.norm(L)
    if is_normal(L, NORMAL_TOL):
        T, Z = scipy.linalg.schur(L.astype(complex), output="complex")
        lam = np.diag(T).copy()
        vecs = Z
        unitary = True
    else:
        lam, vecs = np.linalg.eig(L)
        vecs = vecs / np.linalg.norm(vecs, axis=0)
        cond = np.linalg.cond(vecs)
        if not np.isfinite(cond) or cond > MAX_EIGVEC_COND:
            raise DefectiveOrIllConditioned(
                f"eigenvector matrix condition number {cond:.3g} exceeds {MAX_EIGVEC_COND:.0e}; "
                "supply a family hint or explicit Jordan data"
            )
        unitary = False
    zero = np.flatnonzero(np.abs(lam) <= ZERO_EIG_TOL * max(normL, 1.0))
    if len(zero) != 1:
        raise NoReachableNode(f"expected one zero eigenvalue, found {len(zero)}")
    z = int(zero[0])
    rest = [i for i in range(n) if i != z]
    rest.sort(key=lambda i: (round(lam[i].real, 10), round(lam[i].imag, 10), i))
    order = [z] + rest
    lam = lam[order]
    lam[0] = 0.0
    R = np.empty((n, n), dtype=complex)
    R[:, 0] = 1.0 / np.sqrt(n) if unitary else 1.0
    for c, i in enumerate(rest, start=1):
        R[:, c] = _gauge(vecs[:, i])
    Rinv = R.conj().T if unitary else None
    return lam, [1] * n, R, Rinv


def decompose(L, hint: str | None = None) -> SpectralData:
    """Jordan data of a Laplacian.

    Parameters
    ----------
    L : array_like, shape (n, n)
        Laplacian with a globally reachable node.
    hint : str, optional
        Family tag (``"cycle"``, ``"star"``, ``"path"``, ``"complete"``, optionally
        with parameters as in ``"cycle:n,d,omega"``). Selects the analytic
        decomposition, which is still validated against ``L``.

    Returns
    -------
    SpectralData

    Raises
    ------
    NoReachableNode
        ``L`` has no globally reachable node.
    DefectiveOrIllConditioned
        No hint was given and the numeric eigenvector matrix is too ill
        conditioned to certify diagonalizability.
    """
    L = np.asarray(L, dtype=float)
    check_laplacian(L)
    if not has_globally_reachable_node(L):
        raise NoReachableNode("the graph has no globally reachable node")
    if L.shape[0] == 1:
        return _validate(L, [0.0], [1], np.ones((1, 1)), np.ones((1, 1)))
    if hint:
        lam, sizes, R, Rinv = _analytic(L, hint)
    else:
        lam, sizes, R, Rinv = _numeric(L)
    return _validate(L, lam, sizes, R, Rinv)


# --- output weights --------------------------------------------------------------

def observable_indices(C, S: SpectralData) -> tuple[int, ...]:
    """Blocks ``k >= 1`` with ``||C R_k|| > 1e-10 ||C|| ||R_k||``."""
    C = check_output_matrix(C, S.n)
    normC = np.linalg.norm(C)
    if normC == 0:
        return ()
    out = []
    for k in range(1, S.m):
        Rk = S.R[:, S.block_slice(k)]
        if np.linalg.norm(C @ Rk) > OBSERVABLE_TOL * normC * np.linalg.norm(Rk):
            out.append(k)
    return tuple(out)


def geometric_weights(C, S: SpectralData) -> GeometricWeights:
    """Compute ``nu`` from the eigen-decomposition of ``M = C^* C``.

    ``M`` is diagonalized on the orthogonal complement of the ones vector so
    that ``mu[0] = 0`` is paired exactly with ``theta[:, 0] = 1/sqrt(n)``.
    """
    C = check_output_matrix(C, S.n)
    n = S.n
    obs = observable_indices(C, S)
    M = C.conj().T @ C
    theta = np.empty((n, n), dtype=complex)
    theta[:, 0] = 1.0 / np.sqrt(n)
    mu = np.zeros(n)
    if n > 1:
        P = scipy.linalg.null_space(np.ones((1, n)))
        w, V = np.linalg.eigh(P.T @ M @ P)
        mu[1:] = np.clip(w, 0.0, None)
        theta[:, 1:] = P @ V
    proj = theta[:, 1:].conj().T @ S.R_tilde
    nu = proj.conj().T @ (mu[1:, None] * proj)
    nu = 0.5 * (nu + nu.conj().T)
    nu[np.diag_indices_from(nu)] = np.clip(nu.diagonal().real, 0.0, None)
    for a in (nu, mu, theta):
        a.setflags(write=False)
    return GeometricWeights(nu, mu, theta, obs)


def sigma_q(S: SpectralData, spec=None) -> np.ndarray:
    """``Sigma_Q = Q_tilde Sigma_0 Q_tilde^*``.

    ``spec`` is an input specification or a raw covariance matrix. With a unit
    covariance and orthonormal ``R`` the identity is returned exactly.
    """
    if spec is None:
        spec = IdentityCovariance()
    if isinstance(spec, np.ndarray):
        spec = Covariance(spec)
    if isinstance(spec, IdentityCovariance) and S.unitary:
        return np.eye(S.n - 1, dtype=complex)
    sigma0 = spec.covariance(S.n)
    if isinstance(spec, Covariance):
        check_psd(sigma0)
    elif not isinstance(spec, (Deterministic, IdentityCovariance)):
        raise TypeError(f"unsupported input specification {spec!r}")
    Q = S.Q_tilde
    out = Q @ sigma0 @ Q.conj().T
    return 0.5 * (out + out.conj().T)


__all__ = [
    "SpectralData",
    "GeometricWeights",
    "decompose",
    "import_jordan",
    "jordan_from_json",
    "jordan_matrix",
    "observable_indices",
    "geometric_weights",
    "sigma_q",
]
