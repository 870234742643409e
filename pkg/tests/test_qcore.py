import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qresource.qcore import (
    DensityMatrix,
    PureState,
    Tolerances,
    ValidationError,
    bell_state,
    eigh,
    ket,
    matrix_log2,
    partial_trace,
    random_density,
    random_pure,
    random_unitary,
    schmidt,
    tensor,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_tensor_identity():
    assert np.array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_projector():
    m = tensor(np.diag([1, 0]), np.diag([0, 1]))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    assert np.array_equal(m, expected)


def test_tensor_dims_concatenate():
    a = random_density(2, 1)
    b = random_density(3, 2)
    assert tensor(a, b).dims == (2, 3)


@given(seeds)
def test_tensor_trace_factorises(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    # direct index sum for the trace of a Kronecker product
    tr = sum(a[i, i] * b[j, j] for i in range(2) for j in range(2))
    assert abs(np.trace(tensor(a, b)) - tr) < 1e-12
    assert abs(np.trace(tensor(a, b)) - np.trace(a) * np.trace(b)) < 1e-12


def test_partial_trace_bell_marginal():
    red = partial_trace(bell_state("phi+"), [0])
    assert np.allclose(red.data, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_product():
    a = random_density(2, 3)
    b = random_density(3, 4)
    assert np.allclose(partial_trace(tensor(a, b), [0]).data, a.data, atol=1e-12)
    assert np.allclose(partial_trace(tensor(a, b), [1]).data, b.data, atol=1e-12)


@given(seeds)
def test_partial_trace_index_sum(seed):
    rho = random_density(4, seed, dims=(2, 2))
    t = rho.data.reshape(2, 2, 2, 2)
    oracle = sum(t[:, j, :, j] for j in range(2))
    red = partial_trace(rho, [0])
    assert np.allclose(red.data, oracle, atol=1e-12)
    assert abs(np.trace(red.data) - 1) < 1e-12


def test_partial_trace_bad_index():
    with pytest.raises(ValidationError) as err:
        partial_trace(bell_state(), [2])
    assert err.value.invariant == "subsystem"


def test_partial_trace_three_parties_order():
    a, b, c = random_density(2, 1), random_density(3, 2), random_density(2, 3)
    abc = tensor(tensor(a, b), c)
    assert np.allclose(partial_trace(abc, [0, 2]).data, tensor(a, c).data, atol=1e-12)


def test_eigh_diagonal():
    w, _ = eigh(np.diag([0.3, 0.7]))
    assert np.allclose(w, [0.7, 0.3])


def test_eigh_pauli_x():
    w, v = eigh(np.array([[0, 1], [1, 0]]))
    assert np.allclose(w, [1, -1])
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(np.vdot(v[:, 0], plus)) - 1) < 1e-12


@given(seeds)
@settings(max_examples=50)
def test_eigh_reconstruction(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = a + a.conj().T
    w, v = eigh(h)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) < 1e-10


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ValidationError) as err:
        eigh(np.array([[0, 1], [0, 0]]))
    assert err.value.invariant == "hermitian"


@given(seeds)
def test_density_spectrum_sums_to_one(seed):
    w, _ = eigh(random_density(5, seed).data)
    assert abs(w.sum() - 1) < 1e-9


def test_log2_maximally_mixed():
    assert np.allclose(matrix_log2(np.eye(2) / 2), -np.eye(2))


def test_log2_pure_is_zero_on_support():
    assert np.allclose(matrix_log2(np.diag([1.0, 0.0])), 0)


def test_log2_diagonal():
    assert np.allclose(matrix_log2(np.diag([0.25, 0.75])), np.diag([-2, np.log2(0.75)]))


@given(seeds)
@settings(max_examples=50)
def test_log2_exponentiates_back_on_support(seed):
    rho = random_density(4, seed, rank=3)
    lg = matrix_log2(rho.data)
    w, v = np.linalg.eigh(lg)
    back = (v * 2.0**w) @ v.conj().T
    wr, vr = np.linalg.eigh(rho.data)
    support = vr[:, wr > 1e-10]
    proj = support @ support.conj().T
    assert np.max(np.abs(proj @ back @ proj - rho.data)) < 1e-9


def test_schmidt_bell():
    s, _, _ = schmidt(bell_state("phi+"))
    assert np.allclose(s, [2**-0.5, 2**-0.5])


def test_schmidt_product():
    s, _, _ = schmidt(ket((0, 1), (2, 2)))
    assert np.allclose(s, [1, 0])


@given(seeds)
def test_schmidt_matches_reduced_spectrum(seed):
    psi = random_pure(9, seed, dims=(3, 3))
    s, left, right = schmidt(psi)
    red = np.linalg.eigvalsh(partial_trace(psi, [0]).data)[::-1]
    assert np.max(np.abs(s**2 - red)) < 1e-10
    assert abs(np.sum(s**2) - 1) < 1e-10
    rebuilt = sum(s[k] * np.kron(left[:, k], right[:, k]) for k in range(len(s)))
    assert np.max(np.abs(rebuilt - psi.data)) < 1e-10


def test_schmidt_needs_bipartite():
    with pytest.raises(ValidationError):
        schmidt(ket((0, 0, 0), (2, 2, 2)))


def test_random_pure_one_dimensional():
    assert abs(abs(random_pure(1, 5).data[0]) - 1) < 1e-15


def test_random_pure_deterministic():
    assert np.array_equal(random_pure(4, 11).data, random_pure(4, 11).data)


def test_random_pure_haar_moment():
    rng = np.random.default_rng(0)
    vals = [abs(random_pure(2, rng).data[0]) ** 2 for _ in range(10_000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


def test_random_unitary_is_unitary():
    u = random_unitary(6, 3)
    assert np.max(np.abs(u.conj().T @ u - np.eye(6))) < 1e-12


def test_density_validation_names_invariant():
    with pytest.raises(ValidationError) as err:
        DensityMatrix(np.eye(2) * 0.45)
    assert err.value.invariant == "unit trace"
    with pytest.raises(ValidationError) as err:
        DensityMatrix(np.diag([1.5, -0.5]))
    assert err.value.invariant == "positive"
    with pytest.raises(ValidationError) as err:
        DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]]))
    assert err.value.invariant == "hermitian"


def test_density_dims_must_match():
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(4) / 4, dims=(2, 3))


def test_pure_state_norm_check():
    with pytest.raises(ValidationError) as err:
        PureState([1, 1])
    assert err.value.invariant == "unit norm"


def test_density_is_immutable():
    rho = random_density(2, 0)
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1


def test_tolerances_nonnegative():
    with pytest.raises(ValidationError):
        Tolerances(tol_supp=-1)
