import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qresource.channels import random_channel
from qresource.infotheory import (
    binary_entropy,
    classical_rel_entropy,
    coding_capacity,
    conditional_entropy,
    kernel_overlap,
    mutual_information,
    rel_entropy,
    shannon_entropy,
    vn_entropy,
)
from qresource.qcore import (
    DensityMatrix,
    ValidationError,
    bell_state,
    ket,
    partial_trace,
    random_density,
    random_pure,
    tensor,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def logm_rel_entropy(r, s):
    """Relative entropy of full-rank matrices through scipy's matrix logarithm."""
    val = np.trace(r @ (scipy.linalg.logm(r) - scipy.linalg.logm(s))).real
    return val / math.log(2)


def classically_correlated():
    return DensityMatrix(np.diag([0.5, 0, 0, 0.5]), (2, 2))


def test_shannon_values():
    assert shannon_entropy([1, 0]) == 0
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(1, abs=1e-15)
    assert shannon_entropy([0.3, 0.7]) == pytest.approx(-0.3 * math.log2(0.3) - 0.7 * math.log2(0.7), abs=1e-9)
    assert shannon_entropy([0.3, 0.7]) == pytest.approx(0.8812908992306927, abs=1e-9)


def test_shannon_rejects_bad_distribution():
    with pytest.raises(ValidationError):
        shannon_entropy([0.5, 0.6])
    with pytest.raises(ValidationError):
        shannon_entropy([1.2, -0.2])


def test_binary_entropy_edges():
    assert binary_entropy(0) == 0 and binary_entropy(1) == 0
    assert binary_entropy(0.5) == pytest.approx(1)


def test_classical_rel_entropy_values():
    assert classical_rel_entropy([0.2, 0.8], [0.2, 0.8]) == 0
    assert classical_rel_entropy([1, 0], [0, 1]) == math.inf
    expected = 0.5 * math.log2(0.5 / 0.25) + 0.5 * math.log2(0.5 / 0.75)
    assert classical_rel_entropy([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
    assert classical_rel_entropy([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.2075187496, abs=1e-9)


def test_classical_rel_entropy_length_mismatch():
    with pytest.raises(ValidationError):
        classical_rel_entropy([1, 0], [0.5, 0.25, 0.25])


def test_vn_entropy_values():
    assert vn_entropy(random_pure(5, 3)) == pytest.approx(0, abs=1e-12)
    assert vn_entropy(np.eye(6) / 6) == pytest.approx(math.log2(6), abs=1e-12)
    assert vn_entropy(partial_trace(bell_state(), [0])) == pytest.approx(1, abs=1e-12)


@given(seeds)
@settings(max_examples=50)
def test_vn_entropy_matches_spectrum(seed):
    rho = random_density(4, seed)
    w = np.linalg.eigvalsh(rho.data)
    assert vn_entropy(rho) == pytest.approx(-np.sum(w * np.log2(w)), abs=1e-10)


def test_rel_entropy_values():
    rho = random_density(3, 1)
    assert rel_entropy(rho, rho) == pytest.approx(0, abs=1e-12)
    assert rel_entropy(np.eye(2) / 2, np.diag([1.0, 0.0])) == math.inf
    plus = np.full((2, 2), 0.5)
    assert rel_entropy(plus, np.eye(2) / 2) == pytest.approx(1, abs=1e-12)


def test_rel_entropy_finite_on_nested_support():
    # pure rho inside the support of a rank-2 sigma
    sigma = np.diag([0.5, 0.5, 0.0])
    rho = np.diag([1.0, 0.0, 0.0])
    assert rel_entropy(rho, sigma) == pytest.approx(1, abs=1e-12)


def test_kernel_overlap():
    assert kernel_overlap(np.eye(2) / 2, np.diag([1.0, 0.0])) == pytest.approx(0.5)


@given(seeds)
@settings(max_examples=50)
def test_rel_entropy_matches_logm_oracle(seed):
    rng = np.random.default_rng(seed)
    r = random_density(3, rng).data
    s = random_density(3, rng).data
    assert rel_entropy(r, s) == pytest.approx(logm_rel_entropy(r, s), abs=1e-8)


@given(seeds)
@settings(max_examples=50)
def test_klein_inequality(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    r = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
    s = random_density(d, rng)
    assert rel_entropy(r, s) >= -1e-8


@given(seeds)
@settings(max_examples=50)
def test_partial_trace_monotonicity(seed):
    rng = np.random.default_rng(seed)
    r = random_density(4, rng, dims=(2, 2))
    s = random_density(4, rng, dims=(2, 2))
    full = rel_entropy(r, s)
    red = rel_entropy(partial_trace(r, [0]), partial_trace(s, [0]))
    assert full - red >= -1e-8


@given(seeds)
@settings(max_examples=50)
def test_channel_monotonicity(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(3, int(rng.integers(1, 4)), rng)
    r = random_density(3, rng).data
    s = random_density(3, rng).data
    assert rel_entropy(r, s) - rel_entropy(ch.apply_array(r), ch.apply_array(s)) >= -1e-8


@given(seeds)
@settings(max_examples=50)
def test_joint_convexity(seed):
    rng = np.random.default_rng(seed)
    k = 3
    p = rng.dirichlet(np.ones(k))
    rs = [random_density(3, rng).data for _ in range(k)]
    ss = [random_density(3, rng).data for _ in range(k)]
    mixed = rel_entropy(sum(pi * r for pi, r in zip(p, rs)), sum(pi * s for pi, s in zip(p, ss)))
    bound = sum(pi * rel_entropy(r, s) for pi, r, s in zip(p, rs, ss))
    assert bound - mixed >= -1e-9


@given(seeds)
@settings(max_examples=50)
def test_strong_subadditivity(seed):
    rho = random_density(8, seed, dims=(2, 2, 2))
    s123 = vn_entropy(rho)
    s12 = vn_entropy(partial_trace(rho, [0, 1]))
    s23 = vn_entropy(partial_trace(rho, [1, 2]))
    s2 = vn_entropy(partial_trace(rho, [1]))
    assert (s23 - s2) - (s123 - s12) >= -1e-8


@given(seeds)
@settings(max_examples=30)
def test_ancilla_invariance(seed):
    rng = np.random.default_rng(seed)
    r = random_density(2, rng)
    s = random_density(2, rng)
    pi = random_density(3, rng)
    assert rel_entropy(tensor(r, pi), tensor(s, pi)) == pytest.approx(rel_entropy(r, s), abs=1e-9)


def test_conditional_entropy_values():
    assert conditional_entropy(bell_state(), [1]) == pytest.approx(-1, abs=1e-12)
    a, b = random_density(2, 1), random_density(3, 2)
    assert conditional_entropy(tensor(a, b), [1]) == pytest.approx(vn_entropy(a), abs=1e-12)


def test_conditional_entropy_classical_oracle():
    p = np.array([[0.1, 0.2], [0.3, 0.4]])  # p[a, b]
    rho = DensityMatrix(np.diag(p.reshape(-1)), (2, 2))
    pb = p.sum(axis=0)
    h_a_given_b = -sum(p[a, b] * math.log2(p[a, b] / pb[b]) for a in range(2) for b in range(2))
    assert conditional_entropy(rho, [1]) == pytest.approx(h_a_given_b, abs=1e-10)


def test_mutual_information_values():
    assert mutual_information(tensor(random_density(2, 3), random_density(2, 4)), [0]) == pytest.approx(0, abs=1e-12)
    assert mutual_information(bell_state(), [0]) == pytest.approx(2, abs=1e-12)
    assert mutual_information(classically_correlated(), [0]) == pytest.approx(1, abs=1e-12)


@given(seeds)
@settings(max_examples=30)
def test_mutual_information_relative_entropy_form(seed):
    rho = random_density(6, seed, dims=(2, 3))
    prod_state = tensor(partial_trace(rho, [0]), partial_trace(rho, [1]))
    assert mutual_information(rho, [0]) == pytest.approx(rel_entropy(rho, prod_state), abs=1e-9)


def test_coding_capacity_values():
    assert coding_capacity(bell_state()) == pytest.approx(2, abs=1e-12)
    # S(AB) = 2 and S(B) = 1 leave log2(2) - 1 = 0
    assert coding_capacity(DensityMatrix(np.eye(4) / 4, (2, 2))) == pytest.approx(0, abs=1e-12)
    assert coding_capacity(classically_correlated()) == pytest.approx(1, abs=1e-12)


def test_coding_capacity_needs_receiver():
    with pytest.raises(ValidationError):
        coding_capacity(ket((0, 0), (2, 2)), [0, 1])
