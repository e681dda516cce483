import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from _helpers import (
    block_scalar_product,
    impulse_entry,
    quad_complex,
    random_digraph_laplacian,
    random_output,
    rel,
    sylvester_kernel,
)
from digraph_perf import oracle
from digraph_perf.analysis import random_normal_laplacian
from digraph_perf.closed_form import (
    PerformanceQuery,
    assemble_psi,
    h2_normal,
    omega_transfer,
    performance,
    pf_coefficients_distinct,
    pf_coefficients_repeated,
    pf_reconstruct,
    psi_cross_real_eigen,
    psi_diag_diagonalizable_first,
    psi_kk_second_order,
    scalar_product_first_order,
    scalar_product_second_order,
    star_performance,
)
from digraph_perf.errors import (
    BlockTooLarge,
    DistinctRoots,
    DivergentIntegral,
    GainAssumptionViolated,
    InvalidQuery,
    NotNormal,
    OutputAssumptionViolated,
    RepeatedRoots,
    Unstable,
)
from digraph_perf.graph import (
    complete_laplacian,
    cyclic_laplacian,
    deviation_from_average_output,
    directed_path_laplacian,
    imploding_star_laplacian,
)
from digraph_perf.inputs import Covariance, Deterministic
from digraph_perf.spectral import decompose, geometric_weights
from digraph_perf.stability import GainSet, char_roots, io_stable_second_order

G1 = GainSet(1, 1, 1, 1)
# (0.25, 1, 1, 1) gives a double root at lambda = 2
G_REP = GainSet(0.25, 1, 1, 1)
# (0.1, 1, 1, 1) gives double roots at lambda = 1 +- sqrt(0.4)
G_REP2 = GainSet(0.1, 1, 1, 1)
# (0.1, 2, 1.5, 1) gives double roots at lambda = 1 +- j sqrt(2.6)
G_REPC = GainSet(0.1, 2, 1.5, 1)
LAM_REPC = 1 + 1j * np.sqrt(2.6)


def dav(n):
    return deviation_from_average_output(n)


def first(C, **kw):
    return PerformanceQuery("first", C, **kw)


def second(C, gains=G1, output="position", **kw):
    return PerformanceQuery("second", C, output, gains, **kw)


def gramian_value(L, S, q):
    ss = oracle.assemble(L, q.gains, q.dynamics, q.output, q.C)
    return oracle.h2_norm(oracle.deflate(ss, S))


# --- queries -----------------------------------------------------------------------

def test_query_validation():
    with pytest.raises(InvalidQuery):
        PerformanceQuery("first", dav(3), "velocity")
    with pytest.raises(InvalidQuery):
        PerformanceQuery("first", dav(3), gains=G1)
    with pytest.raises(InvalidQuery):
        PerformanceQuery("second", dav(3))
    with pytest.raises(InvalidQuery):
        PerformanceQuery("third", dav(3))


# --- first-order scalar products ---------------------------------------------------------

def test_first_order_same_mode():
    assert np.isclose(scalar_product_first_order(1 + 1j, 1 + 1j, 1, 1, 1, 1), 0.5, rtol=0, atol=1e-15)


def test_first_order_block_entry():
    assert np.isclose(scalar_product_first_order(2, 2, 1, 2, 1, 2), 0.03125, rtol=1e-15)
    # int t^2 e^{-4t} dt
    assert np.isclose(quad_complex(lambda t: t * t * np.exp(-4 * t)), 0.03125, rtol=1e-12)


def test_first_order_conjugate_pair():
    assert np.isclose(scalar_product_first_order(1 + 1j, 1 - 1j, 1, 1, 1, 1), 0.25 + 0.25j, rtol=1e-15)


def test_first_order_divergent():
    with pytest.raises(DivergentIntegral):
        scalar_product_first_order(-1, 0.5, 1, 1, 1, 1)


@pytest.mark.parametrize("lk,ll", [(1 + 1j, 0.5 - 2j), (2, 2), (0.3 + 0.1j, 1.7)])
@pytest.mark.parametrize("p,q,a,b", [(1, 1, 1, 1), (1, 2, 1, 1), (1, 3, 2, 3), (2, 4, 1, 3), (1, 4, 1, 4)])
def test_first_order_matches_sylvester(lk, ll, p, q, a, b):
    ref = block_scalar_product(lk, ll, p, q, a, b)
    assert rel(scalar_product_first_order(lk, ll, p, q, a, b), ref) <= 1e-12


def test_first_order_matches_quadrature():
    lk, ll = 0.8 + 0.6j, 1.1 - 0.4j
    f = lambda t: np.conj(impulse_entry(lk, 3, 1, 3, t)) * impulse_entry(ll, 2, 1, 2, t)  # noqa: E731
    assert rel(scalar_product_first_order(lk, ll, 1, 3, 1, 2), quad_complex(f, 80)) <= 1e-9


def test_diagonalizable_kernel_examples():
    assert psi_diag_diagonalizable_first(1.5 + 2j, 1.5 + 2j) == pytest.approx(1 / 3)
    assert psi_diag_diagonalizable_first(1 + 1j, 1 - 1j) == pytest.approx((2 + 2j) / 8)


def test_diagonalizable_kernel_agrees_with_scalar_product(rng):
    for _ in range(1000):
        lk = complex(rng.uniform(0.01, 10), rng.uniform(-10, 10))
        ll = complex(rng.uniform(0.01, 10), rng.uniform(-10, 10))
        a = psi_diag_diagonalizable_first(lk, ll)
        b = scalar_product_first_order(lk, ll, 1, 1, 1, 1)
        assert abs(a - b) <= 1e-12 * abs(b)


# --- partial fractions ------------------------------------------------------------------

def test_pf_distinct_position():
    # roots -1, -2: s^2 + 3 s + 2
    np.testing.assert_allclose(pf_coefficients_distinct(0, GainSet(2, 3, 0, 0), 1, "position"), [1, -1])


def test_pf_distinct_velocity():
    np.testing.assert_allclose(pf_coefficients_distinct(0, GainSet(2, 3, 0, 0), 1, "velocity"), [-1, 2])


def test_pf_distinct_example_reconstruction(rng):
    for s in rng.normal(size=10) + 1j * rng.normal(size=10):
        for output in ("position", "velocity"):
            a = pf_reconstruct(s, 3, G1, 2, output)
            b = omega_transfer(s, 3, G1, 2, output)
            assert abs(a - b) <= 1e-10 * max(1, abs(b))


def test_pf_repeated_examples():
    g = GainSet(9, 6, 0, 0)  # (s + 3)^2
    np.testing.assert_allclose(pf_coefficients_repeated(0, g, 1, "position"), [1, 0])
    np.testing.assert_allclose(pf_coefficients_repeated(0, g, 1, "velocity"), [-3, 1])
    g = GainSet(1, 2, 1, 1)  # at lambda = 0: (s + 1)^2 and gamma_p + s gamma_d = 1 + s
    np.testing.assert_allclose(pf_coefficients_repeated(0, g, 2, "position"), [0, 1, 0, 0], atol=1e-15)


def test_pf_wrong_variant():
    with pytest.raises(RepeatedRoots):
        pf_coefficients_distinct(0, GainSet(9, 6, 0, 0), 1, "position")
    with pytest.raises(DistinctRoots):
        pf_coefficients_repeated(0, GainSet(2, 3, 0, 0), 1, "position")


def test_pf_block_limit():
    with pytest.raises(BlockTooLarge):
        pf_coefficients_distinct(1, G1, 21, "position")


@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.tuples(*[st.floats(0.05, 3)] * 4), st.integers(1, 4),
       st.sampled_from(["position", "velocity"]), st.integers(0, 2 ** 31))
def test_pf_reconstruction_property(lam, g, delta, output, seed):
    gains = GainSet(*g)
    rng = np.random.default_rng(seed)
    r1, r2, rep = char_roots(lam, gains)
    # keep clear of near-repeated roots where the distinct expansion is ill-conditioned
    if not rep and abs(r1 - r2) < 1e-2 * (1 + abs(r1)):
        return
    for s in rng.normal(scale=3, size=5) + 1j * rng.normal(scale=3, size=5):
        if min(abs(s - r1), abs(s - r2)) < 0.1:
            continue
        a = pf_reconstruct(s, lam, gains, delta, output)
        b = omega_transfer(s, lam, gains, delta, output)
        assert abs(a - b) <= 1e-9 * max(abs(b), 1e-300) or abs(a - b) <= 1e-12


def test_pf_velocity_at_zero_gamma_d():
    g = GainSet(1, 2.5, 0.7, 0.0)
    for delta in (1, 2, 3):
        for s in (0.3 + 1j, -0.2 + 0.5j, 2.0):
            a = pf_reconstruct(s, 1.3, g, delta, "velocity")
            b = omega_transfer(s, 1.3, g, delta, "velocity")
            assert abs(a - b) <= 1e-12 * abs(b)


# --- second-order scalar products -----------------------------------------------------------

def test_second_order_examples():
    g = GainSet(0, 0, 1, 1)
    assert scalar_product_second_order(2, 2, g, "position", 1, 1, 1, 1) == pytest.approx(0.125, rel=1e-14)
    assert scalar_product_second_order(2, 2, g, "velocity", 1, 1, 1, 1) == pytest.approx(0.25, rel=1e-14)
    assert scalar_product_second_order(1 + 1j, 1 + 1j, G1, "position", 1, 1, 1, 1) == pytest.approx(2 / 18, rel=1e-14)


@pytest.mark.parametrize("g,lk,ll", [
    (G1, 1 + 1j, 0.5 - 0.3j),          # distinct / distinct
    (G_REP, 0.5 + 1j, 2.0),            # distinct / repeated
    (G_REP, 2.0, 1 - 0.5j),            # repeated / distinct
    (G_REP, 2.0, 2.0),                 # repeated / repeated, same mode
    (G_REP2, 1 + np.sqrt(0.4), 1 - np.sqrt(0.4)),   # two different repeated modes
    (G_REPC, LAM_REPC, np.conj(LAM_REPC)),          # complex repeated modes
    (G_REPC, LAM_REPC, 1.2),
])
@pytest.mark.parametrize("output", ["position", "velocity"])
@pytest.mark.parametrize("p,q,a,b", [(1, 1, 1, 1), (1, 2, 1, 1), (1, 1, 2, 3), (1, 3, 1, 2), (2, 4, 1, 4)])
def test_second_order_matches_block_sylvester(g, lk, ll, output, p, q, a, b):
    ref = block_scalar_product(lk, ll, p, q, a, b, g, output)
    got = scalar_product_second_order(lk, ll, g, output, p, q, a, b)
    assert abs(got - ref) <= 1e-8 * max(abs(ref), 1e-3)


def test_second_order_mixed_case_matches_quadrature():
    lk, ll = 0.5 + 1j, 2.0
    for output in ("position", "velocity"):
        f = lambda t: np.conj(impulse_entry(lk, 2, 1, 2, t, G_REP, output)) * impulse_entry(ll, 2, 1, 2, t, G_REP, output)  # noqa: E731,E501
        ref = quad_complex(f, 60)
        got = scalar_product_second_order(lk, ll, G_REP, output, 1, 2, 1, 2)
        assert rel(got, ref) <= 1e-8


def test_mixed_case_conjugate_symmetry():
    a = scalar_product_second_order(2.0, 0.5 + 1j, G_REP, "velocity", 1, 2, 1, 3)
    b = scalar_product_second_order(0.5 + 1j, 2.0, G_REP, "velocity", 1, 3, 1, 2)
    assert abs(a - np.conj(b)) <= 1e-14 * abs(a)


@given(st.floats(0.05, 4), st.floats(0.05, 4), st.tuples(*[st.floats(0.05, 3)] * 4),
       st.sampled_from(["position", "velocity"]))
def test_scalar_modes_match_sylvester(xk, xl, g, output):
    gains = GainSet(*g)
    lk, ll = complex(xk, xl - 2), complex(xl, 2 - xk)
    from digraph_perf.stability import mode_coefficients
    if not (mode_coefficients(lk, gains).stable and mode_coefficients(ll, gains).stable):
        return
    ref = sylvester_kernel(lk, ll, gains, output)
    got = scalar_product_second_order(lk, ll, gains, output, 1, 1, 1, 1)
    assert abs(got - ref) <= 1e-7 * abs(ref)


# --- special-case fast paths --------------------------------------------------------------------

def test_psi_kk_examples():
    assert psi_kk_second_order(2, GainSet(0, 0, 1, 1), "position") == pytest.approx(0.125)
    assert psi_kk_second_order(1 + 1j, G1, "velocity") == pytest.approx(5 / 18)
    assert psi_kk_second_order(1 + 1j, G1, "position") == pytest.approx(2 / 18)


def test_psi_kk_real_reduction():
    g = GainSet(0.7, 1.3, 0.4, 2.1)
    lam = 1.7
    alpha, phi = g.k_p + g.gamma_p * lam, g.k_d + g.gamma_d * lam
    assert psi_kk_second_order(lam, g, "position") == pytest.approx(1 / (2 * alpha * phi), rel=1e-14)


def test_psi_kk_unstable():
    with pytest.raises(Unstable):
        psi_kk_second_order(1 + 5j, GainSet(0, 0.1, 1, 0), "position")


@given(st.complex_numbers(max_magnitude=6, allow_nan=False, allow_infinity=False).filter(lambda z: z.real > 0.01),
       st.tuples(*[st.floats(0.05, 3)] * 4), st.sampled_from(["position", "velocity"]))
def test_psi_kk_matches_kernel(lam, g, output):
    gains = GainSet(*g)
    from digraph_perf.stability import mode_coefficients
    if not mode_coefficients(lam, gains).stable or mode_coefficients(lam, gains).hurwitz < 1e-3:
        return
    a = psi_kk_second_order(lam, gains, output)
    b = scalar_product_second_order(lam, lam, gains, output, 1, 1, 1, 1)
    assert abs(a - b.real) <= 1e-9 * a and abs(b.imag) <= 1e-9 * a


def test_cross_real_at_coincidence():
    for output in ("position", "velocity"):
        assert psi_cross_real_eigen(1.5, 1.5, G1, output) == pytest.approx(psi_kk_second_order(1.5, G1, output))


@pytest.mark.parametrize("output", ["position", "velocity"])
@pytest.mark.parametrize("lk,ll,g", [(1, 2, G1), (0.3, 4.1, GainSet(0.2, 0.5, 1.7, 0.9)), (2.5, 0.8, GainSet(1, 0, 2, 1))])
def test_cross_real_matches_sylvester(lk, ll, g, output):
    assert rel(psi_cross_real_eigen(lk, ll, g, output), sylvester_kernel(lk, ll, g, output).real) <= 1e-10


# --- assembly ---------------------------------------------------------------------------------

def test_psi_zero_for_zero_output():
    S = decompose(cyclic_laplacian(5, 1, 1), "cycle")
    W = geometric_weights(np.zeros((1, 5)), S)
    np.testing.assert_array_equal(assemble_psi(S, W, second(np.zeros((1, 5)))), 0)


def test_psi_scalar_blocks_are_nu_times_kernel(rng):
    L = random_digraph_laplacian(6, rng)
    C = random_output(6, rng)
    S = decompose(L)
    W = geometric_weights(C, S)
    psi = assemble_psi(S, W, second(C))
    lam = S.eigenvalues
    for k in range(1, 6):
        for l in range(1, 6):
            K = scalar_product_second_order(lam[k], lam[l], G1, "position", 1, 1, 1, 1)
            assert abs(psi[k - 1, l - 1] - W.nu[k - 1, l - 1] * K) <= 1e-12 * max(1, abs(psi[k - 1, l - 1]))


@pytest.mark.parametrize("n", [3, 5, 8])
def test_psi_equals_gramian_on_path_first_order(n):
    L = directed_path_laplacian(n)
    S = decompose(L, "path")
    q = first(dav(n))
    psi = assemble_psi(S, geometric_weights(q.C, S), q)
    X = oracle.observability_gramian(oracle.deflate(oracle.assemble(L, None, "first", "position", q.C), S))
    np.testing.assert_allclose(psi, X, atol=1e-9 * np.abs(X).max())


@pytest.mark.parametrize("output", ["position", "velocity"])
@pytest.mark.parametrize("g", [G1, G_REP, GainSet(0.5, 1, 0.5, 1)])
def test_psi_equals_gramian_on_path_second_order(output, g):
    n = 5
    L = directed_path_laplacian(n)
    S = decompose(L, "path")
    q = second(dav(n), g, output)
    psi = assemble_psi(S, geometric_weights(q.C, S), q)
    X = oracle.observability_gramian(oracle.deflate(oracle.assemble(L, g, "second", output, q.C), S))
    Xvv = X[n - 1:, n - 1:]
    np.testing.assert_allclose(psi, Xvv, atol=1e-9 * np.abs(Xvv).max())


def test_psi_equals_gramian_random_digraph(rng):
    n = 7
    L = random_digraph_laplacian(n, rng)
    C = random_output(n, rng)
    S = decompose(L)
    for output in ("position", "velocity"):
        q = second(C, GainSet(0.8, 1.2, 0.6, 0.9), output)
        psi = assemble_psi(S, geometric_weights(C, S), q)
        X = oracle.observability_gramian(oracle.deflate(oracle.assemble(L, q.gains, "second", output, C), S))
        np.testing.assert_allclose(psi, X[n - 1:, n - 1:], atol=1e-9 * np.abs(psi).max())


def test_reduction_consistency(rng):
    L = random_normal_laplacian(7, rng)
    C = random_output(7, rng)
    S = decompose(L)
    W = geometric_weights(C, S)
    psi1 = assemble_psi(S, W, first(C))
    g = GainSet(1.1, 0.9, 0.8, 1.3)
    psi2 = assemble_psi(S, W, second(C, g))
    for k in W.observable:
        lam = S.eigenvalues[k]
        nu = W.nu[k - 1, k - 1].real
        assert abs(psi1[k - 1, k - 1] - nu * psi_diag_diagonalizable_first(lam, lam)) <= 1e-12 * max(1, nu)
        assert abs(psi2[k - 1, k - 1] - nu * psi_kk_second_order(lam, g, "position")) <= 1e-12 * max(1, nu)


# --- performance ------------------------------------------------------------------------------

@pytest.mark.parametrize("hint", ["star", None])
def test_star_five_first_order(hint):
    L = imploding_star_laplacian(5)
    r = performance(L, decompose(L, hint), first(dav(5)))
    assert r.value == pytest.approx(1.6, rel=1e-12)


def test_zero_covariance_gives_zero():
    L = cyclic_laplacian(5, 1, 1)
    r = performance(L, decompose(L, "cycle"), second(dav(5), input=Covariance(np.zeros((5, 5)))))
    assert r.value == 0


def test_path_three_second_order_matches_lyapunov():
    L = directed_path_laplacian(3)
    S = decompose(L, "path")
    for output, frozen in (("position", 29 / 96), ("velocity", 9 / 16)):
        q = second(dav(3), G1, output)
        v = performance(L, S, q).value
        assert rel(v, gramian_value(L, S, q)) <= 1e-8
        assert v == pytest.approx(frozen, rel=1e-12)


def test_path_three_first_order():
    L = directed_path_laplacian(3)
    S = decompose(L, "path")
    assert performance(L, S, first(dav(3))).value == pytest.approx(4 / 3, rel=1e-12)


def test_result_reports_realness_and_path():
    L = directed_path_laplacian(4)
    r = performance(L, decompose(L, "path"), second(dav(4)))
    assert r.imag_residual <= 1e-9 * (1 + r.value)
    assert r.path.startswith("second-order/jordan")
    assert r.to_json()["value"] == r.value


def test_repeated_root_modes_are_flagged():
    L = cyclic_laplacian(4, 1, 1)  # eigenvalue 2 is present
    r = performance(L, decompose(L, "cycle"), second(dav(4), G_REP))
    assert len(r.diagnostics["repeated_root_modes"]) == 1
    assert rel(r.value, gramian_value(L, decompose(L, "cycle"), second(dav(4), G_REP))) <= 1e-8


def test_performance_checks_assumptions():
    L = cyclic_laplacian(4, 1, 1)
    S = decompose(L, "cycle")
    with pytest.raises(OutputAssumptionViolated):
        performance(L, S, first(np.eye(4)))
    with pytest.raises(GainAssumptionViolated):
        performance(L, S, second(dav(4), GainSet(0, 1, 0, 1)))


def test_performance_unstable():
    L = cyclic_laplacian(50, 1, 1)
    with pytest.raises(Unstable):
        performance(L, decompose(L, "cycle"), second(dav(50), GainSet(1, 2, 40, 6.5)))


def test_unstable_unobservable_mode_is_ignored():
    # on the 4-cycle the modes at 1 +- j are unstable for these gains; kill them in the output
    L = cyclic_laplacian(4, 1, 1)
    S = decompose(L, "cycle")
    g = GainSet(0, 0.1, 1, 0)
    C = np.array([[1.0, -1.0, 1.0, -1.0]])   # observes only lambda = 2
    r = performance(L, S, second(C, g))
    assert r.diagnostics["observable"] == [int(np.argmin(abs(S.eigenvalues - 2)))]
    assert r.value > 0


@pytest.mark.parametrize("seed", range(6))
def test_random_digraph_inputs_match_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    L = random_digraph_laplacian(n, rng)
    C = random_output(n, rng)
    S = decompose(L)
    g = GainSet(*rng.uniform(0.3, 2, 4))
    w0 = rng.normal(size=n)
    F = rng.normal(size=(n, n))
    sig = F @ F.T
    for q in (first(C), second(C, g, "position"), second(C, g, "velocity")):
        ss = oracle.assemble(L, q.gains, q.dynamics, q.output, C)
        d = oracle.deflate(ss, S)
        assert rel(performance(L, S, q).value, oracle.h2_norm(d)) <= 1e-8
        qd = PerformanceQuery(q.dynamics, C, q.output, q.gains, Deterministic(w0))
        assert rel(performance(L, S, qd).value, oracle.l2_response(d, w0)) <= 1e-8
        qc = PerformanceQuery(q.dynamics, C, q.output, q.gains, Covariance(sig))
        assert rel(performance(L, S, qc).value, oracle.covariance_response(d, sig)) <= 1e-8


@pytest.mark.parametrize("n", [3, 6, 10])
def test_path_family_matches_oracle(n):
    L = directed_path_laplacian(n)
    S = decompose(L, "path")
    for q in (first(dav(n)), second(dav(n), G1, "position"), second(dav(n), GainSet(0.5, 1, 0.5, 1), "velocity")):
        assert rel(performance(L, S, q).value, gramian_value(L, S, q)) <= 1e-8


@pytest.mark.parametrize("output", ["position", "velocity"])
def test_long_path_with_close_roots(output):
    # |rho1 - rho2| is about 0.69 at lambda = 1, so a size-11 block needs powers up to 1/0.69^22
    # and loses several digits in double precision
    n = 12
    g = GainSet(1.0818808246896323, 1.7205946632794027, 1.1591336643911467, 1.1911033653926986)
    L = directed_path_laplacian(n)
    S = decompose(L, "path")
    q = second(dav(n), g, output)
    assert rel(performance(L, S, q).value, gramian_value(L, S, q)) <= 1e-10


@given(st.integers(3, 9), st.integers(0, 2 ** 31))
def test_nonnegative_and_real(n, seed):
    rng = np.random.default_rng(seed)
    L = random_normal_laplacian(n, rng)
    C = random_output(n, rng)
    S = decompose(L)
    g = GainSet(*rng.uniform(0.2, 2, 4))
    assume(io_stable_second_order(S.eigenvalues, g, geometric_weights(C, S).observable))
    r = performance(L, S, second(C, g))
    assert r.value >= 0 and r.imag_residual <= 1e-9 * (1 + r.value)


# --- normal and star fast paths -----------------------------------------------------------------

def test_h2_normal_three_cycle():
    L = cyclic_laplacian(3, 1, 1)
    S = decompose(L, "cycle")
    q = first(dav(3))
    v = h2_normal(S, geometric_weights(q.C, S), q)
    assert v == pytest.approx(2 / 3, rel=1e-12)
    assert v == pytest.approx(performance(L, S, q).value, rel=1e-12)


def test_h2_normal_complete_three():
    L = complete_laplacian(3)
    S = decompose(L, "complete")
    q = second(dav(3))
    assert h2_normal(S, geometric_weights(q.C, S), q) == pytest.approx(0.16, rel=1e-12)


def test_h2_normal_velocity_without_relative_position_gain(rng):
    L = random_normal_laplacian(6, rng)
    S = decompose(L)
    C = random_output(6, rng)
    g = GainSet(1.2, 0.4, 0.0, 0.9)
    W = geometric_weights(C, S)
    q = second(C, g, "velocity")
    expected = sum(W.nu[k - 1, k - 1].real / (2 * (g.k_d + g.gamma_d * S.eigenvalues[k].real)) for k in W.observable)
    assert h2_normal(S, W, q) == pytest.approx(expected, rel=1e-12)


@given(st.integers(3, 9), st.integers(0, 2 ** 31), st.sampled_from(["first", "position", "velocity"]))
def test_h2_normal_equals_performance(n, seed, kind):
    rng = np.random.default_rng(seed)
    L = random_normal_laplacian(n, rng)
    C = random_output(n, rng)
    S = decompose(L)
    q = first(C) if kind == "first" else second(C, GainSet(*rng.uniform(0.2, 2, 4)), kind)
    try:
        a = h2_normal(S, geometric_weights(C, S), q)
    except Unstable:
        return
    assert rel(a, performance(L, S, q).value) <= 1e-10


def test_h2_normal_rejects_non_normal():
    L = imploding_star_laplacian(4)
    S = decompose(L, "star")
    with pytest.raises(NotNormal):
        h2_normal(S, geometric_weights(dav(4), S), first(dav(4)))


def test_star_performance_examples():
    assert star_performance(5, "first") == pytest.approx(1.6, rel=1e-14)
    assert star_performance(3, "second", "position", G1) == pytest.approx(0.16, rel=1e-14)
    assert star_performance(3, "second", "velocity", G1) == pytest.approx(0.4, rel=1e-14)


@pytest.mark.parametrize("n", [2, 3, 7, 12])
def test_star_performance_dav_closed_forms(n):
    g = GainSet(0.6, 1.4, 0.9, 0.3)
    lam = n / (n - 1)
    kp, kd = g.k_p + g.gamma_p * lam, g.k_d + g.gamma_d * lam
    assert star_performance(n, "first") == pytest.approx((n - 1) ** 2 / (2 * n), rel=1e-12)
    assert star_performance(n, "second", "position", g) == pytest.approx((n - 1) / (2 * kp * kd), rel=1e-12)
    assert star_performance(n, "second", "velocity", g) == pytest.approx((n - 1) / (2 * kd), rel=1e-12)


def test_star_performance_circulant_output_matches_general_path(rng):
    from digraph_perf.analysis import fourier_basis, random_circulant_output
    n = 7
    C = random_circulant_output(n, rng, drop_modes=[3])
    F = fourier_basis(n)
    D = F.conj().T @ C.T @ C @ F
    np.testing.assert_allclose(D, np.diag(np.diag(D)), atol=1e-12)
    mu_f = np.diag(D).real
    L = imploding_star_laplacian(n)
    S = decompose(L, "star")
    for dyn, out, g in (("first", "position", None), ("second", "position", G1), ("second", "velocity", G1)):
        q = PerformanceQuery(dyn, C, out, g)
        assert rel(star_performance(n, dyn, out, g, mu=mu_f), performance(L, S, q).value) <= 1e-10
