import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtest.ensembles import EnsembleSpec, SeededSource, haar_orthogonal, haar_unitary
from symtest.errors import MemoryGuardError, UnsupportedError, ValidationError
from symtest.fileio import cmat_loads
from symtest.performance import (
    build_omega,
    build_omega_diagonal_closed_form,
    omega_monte_carlo,
    overlap_from_omega,
    overlap_moment,
    swap_operator,
    twirl,
    twirl_closed_form,
)
from symtest.tensor import kron, max_entangled, vectorize_tensor_power

KINDS = ["haar_unitary", "haar_orthogonal", "haar_diagonal", "haar_special_orthogonal"]


def rand_state(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("m", range(1, 7))
def test_omega_invariants(kind, m):
    om = build_omega(EnsembleSpec(kind), m)
    evals = om.check()
    assert abs(om.trace - 2 ** m) < 1e-9
    assert abs(np.trace(om.matrix).real - 2 ** m) < 1e-9
    assert evals[-1] <= 2 ** m + 1e-9
    a = om.matrix
    assert np.abs(a - a.conj().T).max() <= 1e-10 * np.abs(a).max()
    if kind in ("haar_orthogonal", "haar_special_orthogonal"):
        assert np.abs(a.imag).max() <= 1e-10


def test_diagonal_examples():
    om = build_omega(EnsembleSpec("diagonal"), 1)
    ref = np.zeros((4, 4))
    ref[0, 0] = ref[3, 3] = 1
    assert np.abs(om.matrix - ref).max() < 1e-14
    cf = build_omega_diagonal_closed_form(1)
    assert np.abs(cf.matrix - ref).max() == 0
    for m in range(1, 7):
        cf = build_omega_diagonal_closed_form(m)
        q = build_omega(EnsembleSpec("diagonal"), m)
        assert np.abs(cf.matrix - q.matrix).max() < 1e-12
        if m <= 4:
            assert np.linalg.matrix_rank(cf.matrix) == m + 1
        assert abs(np.trace(cf.matrix) - 2 ** m) == 0


def test_omega_is_average_of_vectorized_powers():
    om = build_omega(haar_orthogonal(), 2)
    u = np.array([[0.6, -0.8], [0.8, 0.6]])
    v = vectorize_tensor_power(u, 2)
    # every group element has |<<U|Omega|U>>| bounded by d^(2m)
    assert np.vdot(v, om.matrix @ v).real <= 16 + 1e-9
    # <<I|Omega|I>> = E |tr O|^4 = 3 for O(2)
    vi = vectorize_tensor_power(np.eye(2), 2)
    assert abs(np.vdot(vi, om.matrix @ vi).real - 3) < 1e-12


@pytest.mark.parametrize("kind", ["haar_unitary", "haar_orthogonal", "haar_diagonal"])
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_omega_quadrature_vs_monte_carlo(kind, m):
    ens = EnsembleSpec(kind)
    q = build_omega(ens, m).matrix
    est = omega_monte_carlo(ens, m, 100_000, SeededSource(100 + m))
    assert est.within(q).all()


def test_monte_carlo_omega_metadata():
    om = build_omega(haar_unitary(), 1, method="monte-carlo", samples=2000, src=SeededSource(5))
    assert om.method == "monte_carlo" and om.samples == 2000 and om.seed == 5
    assert om.stderr.shape == (4, 4)
    assert abs(om.trace - 2) < 1e-12


def test_memory_guard():
    with pytest.raises(MemoryGuardError):
        build_omega(haar_unitary(), 7)
    with pytest.raises(MemoryGuardError):
        build_omega(EnsembleSpec("unitary", 3), 4, method="monte_carlo", samples=10)
    with pytest.raises(UnsupportedError):
        build_omega(haar_unitary(), 2, method="closed_form")


def test_omega_cmat_header():
    blob = build_omega(EnsembleSpec("diagonal"), 2).to_cmat()
    a, header = cmat_loads(blob)
    assert header["hermitian"] is True
    assert header["omega"]["m"] == 2 and header["omega"]["ensemble"] == "haar_diagonal"
    assert a.shape == (16, 16)


def test_twirl_first_moment_from_quadrature():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    out = twirl(x, haar_unitary(), 1)
    assert np.abs(out - np.trace(x) * np.eye(2) / 2).max() < 1e-13


def test_twirl_second_moment_from_quadrature():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.abs(twirl(x, haar_unitary(), 2) - twirl_closed_form(x, 2, 2)).max() < 1e-13


@pytest.mark.parametrize("d", [2, 3])
def test_second_moment_formula_properties(d):
    rng = np.random.default_rng(d)
    x = rng.standard_normal((d * d, d * d)) + 1j * rng.standard_normal((d * d, d * d))
    t = twirl_closed_form(x, d, 2)
    s = swap_operator(d)
    assert abs(np.trace(t) - np.trace(x)) < 1e-12
    assert abs(np.trace(s @ t) - np.trace(s @ x)) < 1e-12
    assert np.abs(twirl_closed_form(t, d, 2) - t).max() < 1e-12
    assert np.abs(twirl_closed_form(np.eye(d * d), d, 2) - np.eye(d * d)).max() < 1e-12


@pytest.mark.parametrize("kind", ["haar_unitary", "haar_orthogonal", "haar_diagonal"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_twirl_properties(kind, k):
    rng = np.random.default_rng(k)
    n = 2 ** k
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ens = EnsembleSpec(kind)
    t = twirl(x, ens, k)
    assert abs(np.trace(t) - np.trace(x)) <= 1e-10 * abs(np.trace(x)) + 1e-12
    assert np.abs(twirl(t, ens, k) - t).max() < 1e-9
    assert np.abs(twirl(np.eye(n), ens, k) - np.eye(n)).max() < 1e-12


def test_twirl_dimension_check():
    with pytest.raises(ValidationError):
        twirl(np.eye(3), haar_unitary(), 1)


def test_overlap_examples():
    phi = max_entangled()
    assert abs(overlap_moment([1, 0], EnsembleSpec("diagonal"), 1) - 1) < 1e-12
    assert abs(overlap_moment([1, 0], haar_unitary(), 1) - 0.5) < 1e-12
    assert abs(overlap_moment(phi, haar_orthogonal(), 2) - 1) < 1e-12
    for k in (1, 2, 3):
        psi = kron(*([phi] * k))
        assert abs(overlap_moment(psi, haar_unitary(), 2 * k) - 1 / (2 * k + 1)) < 1e-12
    om = build_omega(haar_unitary(), 2)
    probe = kron(phi.conj(), phi)
    assert abs(np.vdot(probe, om.matrix @ probe).real - 1 / 3) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.sampled_from(["haar_unitary", "haar_orthogonal", "haar_diagonal"]))
def test_overlap_node_loop_equals_trace_formula(seed, m, kind):
    rng = np.random.default_rng(seed)
    psi = rand_state(rng, 2 ** m)
    ens = EnsembleSpec(kind)
    direct = overlap_moment(psi, ens, m)
    assert -1e-10 <= direct <= 1 + 1e-10
    assert abs(direct - overlap_from_omega(build_omega(ens, m), psi)) < 1e-9
    assert abs(direct - overlap_moment(psi, ens, m, method="omega")) < 1e-9
    if kind == "haar_diagonal":
        assert abs(direct - overlap_moment(psi, ens, m, method="closed_form")) < 1e-12


def test_overlap_monte_carlo():
    psi = max_entangled()
    est = overlap_moment(psi, haar_unitary(), 2, method="monte_carlo", samples=20_000, src=SeededSource(1))
    assert abs(est - 1 / 3) < 0.02
