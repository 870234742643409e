"""Concurrence-family measures, channel quality factors and effective
entanglement under local restrictions."""

import math
from dataclasses import dataclass, field
from itertools import product
from math import prod

import numpy as np

from .channels import QuantumChannel, choi, g_from_phase_dist, tensor_channels
from .infotheory import binary_entropy
from .qcore import (
    DEFAULT_TOL,
    DensityMatrix,
    PureState,
    UnsupportedError,
    ValidationError,
    as_density,
    clip_spectrum,
    eigh,
    maximally_entangled,
)

RANK_CUTOFF = 64 * np.finfo(float).eps
SIGMA_YY = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0])).astype(complex)


def _require_two_qubits(x):
    if tuple(x.dims) != (2, 2):
        raise ValidationError("dims", f"expected two qubits, got dims {list(x.dims)}")


def concurrence_pure(psi):
    """2 |det A| for the amplitude matrix A of a two-qubit pure state."""
    _require_two_qubits(psi)
    return float(2 * abs(np.linalg.det(psi.data.reshape(2, 2))))


def _wootters_lambdas(m, tol):
    w, v = eigh(m, tol)
    w = clip_spectrum(w, tol)
    # round-off eigenvalues would enter as their square roots (~1e-8)
    w[w < RANK_CUTOFF * max(w.max(), 0.0)] = 0.0
    root = (v * np.sqrt(w)) @ v.conj().T
    root_tilde = SIGMA_YY @ root.conj() @ SIGMA_YY
    # singular values of sqrt(rho~) sqrt(rho) are the square roots of the
    # eigenvalues of the Hermitian product sqrt(rho) rho~ sqrt(rho)
    return np.linalg.svd(root_tilde @ root, compute_uv=False)


def concurrence(rho, tol=None):
    """Wootters concurrence of a two-qubit state."""
    tol = tol or DEFAULT_TOL
    rho = as_density(rho)
    _require_two_qubits(rho)
    lam = np.sort(_wootters_lambdas(rho.data, tol))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def eof_from_concurrence(c):
    c = min(max(float(c), 0.0), 1.0)
    return binary_entropy((1 + math.sqrt(1 - c * c)) / 2)


def eof(rho, tol=None):
    """Entanglement of formation of a two-qubit state, in bits."""
    return eof_from_concurrence(concurrence(rho, tol))


def g_concurrence_pure(psi):
    """d |det A|^{2/d} for a pure state on d x d."""
    if len(psi.dims) != 2 or psi.dims[0] != psi.dims[1]:
        raise ValidationError("dims", f"G-concurrence needs equal local dimensions, got {list(psi.dims)}")
    d = psi.dims[0]
    det = abs(np.linalg.det(psi.data.reshape(d, d)))
    return float(d * det ** (2 / d))


def _pure_from_rank_one(m, dims, tol):
    w, v = eigh(m, tol)
    w = clip_spectrum(w, tol)
    if w[1:].sum() > 1e-9:
        return None
    return PureState(v[:, 0], dims, check=False)


def quality_factor(channel, tol=None):
    """G-concurrence of the Choi state of a one-sided channel.

    For qubits the Wootters concurrence handles mixed Choi states. In higher
    dimension only pure Choi states (single Kraus operator) are supported.
    """
    tol = tol or DEFAULT_TOL
    if channel.d_in != channel.d_out:
        raise ValidationError("dims", "quality factor needs a channel from a space to itself")
    d = channel.d_in
    c = choi(channel).state
    state = DensityMatrix(c.data, (d, d), check=False)
    if d == 2:
        return concurrence(state, tol)
    psi = _pure_from_rank_one(state.data, (d, d), tol)
    if psi is None:
        raise UnsupportedError("mixed Choi state in dimension > 2 needs a convex roof")
    return g_concurrence_pure(psi)


def _one_sided(channel, d):
    eye = QuantumChannel([np.eye(d)], d, check=False)
    return tensor_channels(channel, eye)


def evolved_g_concurrence(channel, psi, tol=None):
    """Measure of (S x 1)(|psi><psi|) for a pure d x d input."""
    tol = tol or DEFAULT_TOL
    if len(psi.dims) != 2 or psi.dims[0] != psi.dims[1] or channel.d_in != psi.dims[0]:
        raise ValidationError("dims", "channel and state dimensions do not match")
    d = psi.dims[0]
    out = _one_sided(channel, d).apply_array(np.outer(psi.data, psi.data.conj()))
    if d == 2:
        return concurrence(DensityMatrix(out, (2, 2), check=False), tol)
    pure = _pure_from_rank_one(out, (d, d), tol)
    if pure is None:
        raise UnsupportedError("mixed output in dimension > 2 needs a convex roof")
    return g_concurrence_pure(pure)


def effective_state(rho, local_channels):
    """State after local restrictions: (S_A x S_B x ...)(rho).

    ``local_channels`` is a sequence with one channel per subsystem or a
    channel built by :func:`tensor_channels`.
    """
    rho = as_density(rho)
    if isinstance(local_channels, QuantumChannel):
        if not local_channels.factors:
            raise ValidationError("product form", "channel is not a tensor product of local channels")
        local_channels = local_channels.factors
    local_channels = list(local_channels)
    if len(local_channels) != len(rho.dims):
        raise ValidationError("product form", "one local channel per subsystem is required")
    for s, d in zip(local_channels, rho.dims):
        if s.d_in != d:
            raise ValidationError("dims", f"local channel input {s.d_in} does not match subsystem {d}")
    total = tensor_channels(*local_channels)
    return DensityMatrix(total.apply_array(rho.data), total.dims_out, check=False)


@dataclass
class SSRBlock:
    pattern: tuple
    weight: float
    state: DensityMatrix
    local_indices: list = field(default_factory=list)

    def compressed(self):
        """Block restricted to its local sectors, as a state on the sector dims."""
        dims = tuple(len(i) for i in self.local_indices)
        grid = np.meshgrid(*self.local_indices, indexing="ij")
        flat = np.ravel_multi_index([g.reshape(-1) for g in grid], self.state.dims)
        return DensityMatrix(self.state.data[np.ix_(flat, flat)], dims, check=False)


@dataclass
class SSRBlockDecomposition:
    blocks: list

    def weights(self):
        return np.array([b.weight for b in self.blocks])

    def reassemble(self):
        return sum(b.weight * b.state.data for b in self.blocks)


def _check_grading(local_numbers, dims):
    if len(local_numbers) != len(dims):
        raise ValidationError("grading", "one local-number list per subsystem is required")
    for nums, d in zip(local_numbers, dims):
        if len(nums) != d or any(int(n) != n or n < 0 for n in nums):
            raise ValidationError("grading", "local numbers must be nonnegative integers aligned with the basis")


def ssr_decompose(rho, local_numbers, tol=None):
    """Split a state into blocks of fixed local particle numbers.

    Returns the weights ``Tr[Pi_n rho]`` and normalised blocks for every
    pattern with nonzero weight.
    """
    tol = tol or DEFAULT_TOL
    rho = as_density(rho)
    _check_grading(local_numbers, rho.dims)
    nums = [np.asarray(x, dtype=int) for x in local_numbers]
    patterns = product(*[sorted(set(x.tolist())) for x in nums])
    blocks = []
    for pat in patterns:
        masks = [(x == n).astype(float) for x, n in zip(nums, pat)]
        diag = masks[0]
        for m in masks[1:]:
            diag = np.kron(diag, m)
        proj = diag[:, None] * rho.data * diag[None, :]
        w = float(np.trace(proj).real)
        if w > tol.tol_supp:
            local = [np.flatnonzero(x == n).tolist() for x, n in zip(nums, pat)]
            blocks.append(SSRBlock(tuple(pat), w, DensityMatrix(proj / w, rho.dims, check=False), local))
    return SSRBlockDecomposition(blocks)


def ssr_effective_entanglement(rho, local_numbers, measure=concurrence, tol=None):
    """Weighted block average sum_n p_n E(rho_n) of a bipartite measure.

    Returns ``(value, is_upper_bound)``; the flag is set for mixed inputs,
    for which the block average only bounds the effective entanglement from
    above. Blocks with a one-dimensional local sector are product states and
    contribute zero.
    """
    rho = as_density(rho)
    if len(rho.dims) != 2:
        raise ValidationError("dims", "a bipartite state is required")
    dec = ssr_decompose(rho, local_numbers, tol)
    total = 0.0
    for b in dec.blocks:
        block = b.compressed()
        if min(block.dims) == 1:
            continue
        total += b.weight * measure(block)
    w = np.linalg.eigvalsh(rho.data)
    mixed = w[:-1].sum() > 1e-9
    return total, bool(mixed)


def bec_effective_quality(p):
    """|g| of a phase distribution, the quality factor of the induced map."""
    return abs(g_from_phase_dist(p))


def quality_factor_phi(channel):
    """Quality factor evaluated literally as G_d of (S x 1)|phi_d>."""
    d = channel.d_in
    return evolved_g_concurrence(channel, maximally_entangled(d))
