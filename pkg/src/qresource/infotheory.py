"""Classical and quantum entropies in bits.

Relative entropies return ``math.inf`` when the support condition fails,
which is how the extended-real value is represented throughout the package.
"""

import math

import numpy as np

from .qcore import (
    DEFAULT_TOL,
    ValidationError,
    as_density,
    clip_spectrum,
    eigh,
    partial_trace_array,
)


def _distribution(p, tol=1e-9):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValidationError("distribution", "expected a 1-d probability vector")
    if np.any(p < -tol):
        raise ValidationError("distribution", "negative probability")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError("distribution", f"probabilities sum to {p.sum():.12g}")
    return np.clip(p, 0.0, None)


def _h(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_entropy(p):
    """-sum p log2 p with the 0 log 0 = 0 convention."""
    return _h(_distribution(p))


def binary_entropy(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def classical_rel_entropy(p, q, tol=None):
    """Kullback-Leibler divergence in bits, ``inf`` on support mismatch."""
    tol = tol or DEFAULT_TOL
    p = _distribution(p)
    q = _distribution(q)
    if p.shape != q.shape:
        raise ValidationError("distribution", "length mismatch")
    if np.any((p > tol.tol_supp) & (q <= tol.tol_supp)):
        return math.inf
    m = p > tol.tol_supp
    return float(np.sum(p[m] * (np.log2(p[m]) - np.log2(q[m]))))


def spectrum(m, tol=None):
    """Clipped eigenvalues of a density matrix given as an array."""
    w, _ = eigh(m, tol)
    return clip_spectrum(w, tol)


def entropy_array(m, tol=None):
    return _h(spectrum(m, tol))


def vn_entropy(rho, tol=None):
    """Von Neumann entropy of the clipped spectrum, in bits."""
    return entropy_array(as_density(rho).data, tol)


def rel_entropy_array(r, s, tol=None):
    """Quantum relative entropy for raw matrices.

    Infinite when ``Tr[P_ker(s) r] > tol_supp``.
    """
    tol = tol or DEFAULT_TOL
    if r.shape != s.shape:
        raise ValidationError("dims", f"shape mismatch {r.shape} vs {s.shape}")
    ws, vs = eigh(s, tol)
    ws = clip_spectrum(ws, tol)
    supp = ws > tol.tol_supp
    # diagonal of r in the eigenbasis of s
    rd = np.einsum("ij,jk,ki->i", vs.conj().T, r, vs).real
    if rd[~supp].sum() > tol.tol_supp:
        return math.inf
    wr = spectrum(r, tol)
    neg_entropy = -_h(wr)
    cross = float(np.sum(rd[supp] * np.log2(ws[supp])))
    return neg_entropy - cross


def kernel_overlap(r, s, tol=None):
    """Weight of ``r`` on the kernel of ``s``: Tr[P_ker(s) r]."""
    tol = tol or DEFAULT_TOL
    ws, vs = eigh(s, tol)
    ws = clip_spectrum(ws, tol)
    rd = np.einsum("ij,jk,ki->i", vs.conj().T, r, vs).real
    return float(rd[ws <= tol.tol_supp].sum())


def rel_entropy(rho, sigma, tol=None):
    """S(rho || sigma) in bits, ``math.inf`` if supp(rho) is not in supp(sigma)."""
    rho = as_density(rho)
    sigma = as_density(sigma)
    if rho.dims != sigma.dims and rho.dim != sigma.dim:
        raise ValidationError("dims", f"{rho.dims} vs {sigma.dims}")
    return rel_entropy_array(rho.data, sigma.data, tol)


def _complement(indices, n):
    return [i for i in range(n) if i not in set(indices)]


def conditional_entropy(rho, part_b, tol=None):
    """S(A|B) = S(AB) - S(B) where ``part_b`` lists the conditioning subsystems."""
    rho = as_density(rho)
    part_b = list(part_b)
    s_ab = entropy_array(rho.data, tol)
    s_b = entropy_array(partial_trace_array(rho.data, rho.dims, part_b), tol)
    return s_ab - s_b


def mutual_information(rho, part_a, part_b=None, tol=None):
    """I(A:B) = S(A) + S(B) - S(AB); ``part_b`` defaults to the complement."""
    rho = as_density(rho)
    part_a = list(part_a)
    if part_b is None:
        part_b = _complement(part_a, len(rho.dims))
    part_b = list(part_b)
    both = sorted(part_a + part_b)
    s_a = entropy_array(partial_trace_array(rho.data, rho.dims, part_a), tol)
    s_b = entropy_array(partial_trace_array(rho.data, rho.dims, part_b), tol)
    s_ab = entropy_array(partial_trace_array(rho.data, rho.dims, both), tol)
    return s_a + s_b - s_ab


def coding_capacity(rho, sender=(0,), tol=None):
    """Superdense coding capacity log2(d_A) - S(A|B), A being ``sender``."""
    rho = as_density(rho)
    sender = list(sender)
    receiver = _complement(sender, len(rho.dims))
    if not receiver:
        raise ValidationError("subsystem", "the receiver side is empty")
    d_a = math.prod(rho.dims[i] for i in sender)
    return math.log2(d_a) - conditional_entropy(rho, receiver, tol)
