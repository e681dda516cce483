"""Random instance generators and small numeric oracles shared by the tests."""
import numpy as np
import scipy.integrate
import scipy.linalg

from digraph_perf.graph import has_globally_reachable_node


def random_digraph_laplacian(n, rng, density=0.4):
    """Random weighted digraph with a spanning in-tree, so a root is reachable."""
    L = np.zeros((n, n))
    perm = rng.permutation(n)
    for pos in range(1, n):
        i = perm[pos]
        j = perm[rng.integers(0, pos)]
        L[i, j] -= rng.uniform(0.2, 2.0)
    extra = rng.random((n, n)) < density
    np.fill_diagonal(extra, False)
    L[extra & (L == 0)] -= rng.uniform(0.2, 2.0, size=int(np.sum(extra & (L == 0))))
    L[np.diag_indices(n)] = -L.sum(axis=1)
    assert has_globally_reachable_node(L)
    return L


def random_output(n, rng, rows=None):
    """Random real C with C @ 1 = 0."""
    q = rows or int(rng.integers(1, n + 1))
    G = rng.normal(size=(q, n))
    return G - G.mean(axis=1, keepdims=True)


def quad_complex(f, upper=np.inf):
    """Integral of a complex function over [0, upper)."""
    re = scipy.integrate.quad(lambda t: f(t).real, 0, upper, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    im = scipy.integrate.quad(lambda t: f(t).imag, 0, upper, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    return re + 1j * im


def mode_realization(lam, gains, output):
    """2x2 state space of one scalar double-integrator mode."""
    A = np.array([[0, 1], [-(gains.k_p + gains.gamma_p * lam), -(gains.k_d + gains.gamma_d * lam)]],
                 dtype=complex)
    B = np.array([[0], [1]], dtype=complex)
    C = np.array([[1, 0]], dtype=complex) if output == "position" else np.array([[0, 1]], dtype=complex)
    return A, B, C


def sylvester_kernel(lam_k, lam_l, gains, output):
    """B_k^* X B_l with A_k^* X + X A_l = -C_k^* C_l, the scalar-mode cross kernel."""
    Ak, Bk, Ck = mode_realization(lam_k, gains, output)
    Al, Bl, Cl = mode_realization(lam_l, gains, output)
    X = scipy.linalg.solve_sylvester(Ak.conj().T, Al, -Ck.conj().T @ Cl)
    return complex((Bk.conj().T @ X @ Bl)[0, 0])


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def block_realization(lam, size, gains=None, output="position"):
    """State space of one Jordan block; ``gains=None`` gives the single integrator."""
    J = lam * np.eye(size, dtype=complex) + np.eye(size, k=1)
    if gains is None:
        return -J, np.eye(size, dtype=complex), np.eye(size, dtype=complex)
    I, Z = np.eye(size), np.zeros((size, size))
    A = np.block([[Z, I], [-(gains.k_p * I + gains.gamma_p * J), -(gains.k_d * I + gains.gamma_d * J)]])
    B = np.vstack([Z, I]).astype(complex)
    C = np.hstack([I, Z]) if output == "position" else np.hstack([Z, I])
    return A, B, C.astype(complex)


def block_scalar_product(lam_k, lam_l, p, q, a, b, gains=None, output="position"):
    """int conj(h_pq^(k)) h_ab^(l) dt from a Sylvester solve; indices 1-based."""
    size_k, size_l = q, b
    Ak, Bk, Ck = block_realization(lam_k, size_k, gains, output)
    Al, Bl, Cl = block_realization(lam_l, size_l, gains, output)
    rhs = -np.outer(Ck[p - 1].conj(), Cl[a - 1])
    X = scipy.linalg.solve_sylvester(Ak.conj().T, Al, rhs)
    return complex(Bk[:, q - 1].conj() @ X @ Bl[:, b - 1])


def impulse_entry(lam, size, p, q, t, gains=None, output="position"):
    """h_pq(t) of a Jordan block by matrix exponential."""
    A, B, C = block_realization(lam, size, gains, output)
    return (C @ scipy.linalg.expm(A * t) @ B)[p - 1, q - 1]
