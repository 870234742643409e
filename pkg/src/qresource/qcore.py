"""Dense linear algebra and state containers shared by every other module.

States carry an explicit list of subsystem dimensions so that partial traces
and local operations can address subsystems by index instead of by position
in a Kronecker product.
"""

from dataclasses import dataclass
from functools import reduce
from math import prod

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant.

    The ``invariant`` attribute names the check that failed so that callers
    (notably the command line) can report it.
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class UnsupportedError(ValueError):
    """Raised for inputs outside the cases an operation can handle exactly."""


@dataclass(frozen=True)
class Tolerances:
    tol_herm: float = 1e-9
    tol_trace: float = 1e-9
    tol_psd: float = 1e-9
    tol_norm: float = 1e-9
    tol_supp: float = 1e-10

    def __post_init__(self):
        for name in ("tol_herm", "tol_trace", "tol_psd", "tol_norm", "tol_supp"):
            if getattr(self, name) < 0:
                raise ValidationError("tolerances", f"{name} must be nonnegative")


DEFAULT_TOL = Tolerances()


def _as_dims(dims, d):
    if dims is None:
        return (d,)
    dims = tuple(int(x) for x in dims)
    if any(x < 1 for x in dims) or prod(dims) != d:
        raise ValidationError("dims", f"dimensions {dims} do not multiply to {d}")
    return dims


def _as_array(x):
    if isinstance(x, (DensityMatrix, PureState)):
        return x.data
    return np.asarray(x, dtype=complex)


class DensityMatrix:
    """Positive, unit-trace, Hermitian matrix over labelled subsystems.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix.
    dims : sequence of int, optional
        Subsystem dimensions, product must equal the matrix size.
    tol : Tolerances, optional
    check : bool
        Run the Hermiticity, trace and positivity checks. Internal code that
        has already guaranteed these properties passes ``False``.
    """

    def __init__(self, matrix, dims=None, tol=None, check=True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("shape", f"expected a square matrix, got shape {m.shape}")
        self.data = m
        self.dims = _as_dims(dims, m.shape[0])
        if check:
            self.validate(tol)
        self.data.setflags(write=False)

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def matrix(self):
        return self.data

    def validate(self, tol=None):
        tol = tol or DEFAULT_TOL
        for name, ok, msg in self.checks(tol):
            if not ok:
                raise ValidationError(name, msg)

    def checks(self, tol=None):
        """Return ``(name, passed, message)`` for every invariant."""
        tol = tol or DEFAULT_TOL
        m = self.data
        out = []
        finite = bool(np.all(np.isfinite(m)))
        out.append(("finite", finite, "all entries finite" if finite else "non-finite entries"))
        if not finite:
            return out
        herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        out.append(("hermitian", herm <= tol.tol_herm, f"max deviation {herm:.3e}"))
        tr = np.trace(m)
        dev = abs(tr - 1.0)
        out.append(("unit trace", dev <= tol.tol_trace, f"trace {tr.real:.12g}, deviation {dev:.3e}"))
        lmin = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
        out.append(("positive", lmin >= -tol.tol_psd, f"smallest eigenvalue {lmin:.3e}"))
        return out

    def __repr__(self):
        return f"DensityMatrix(dims={list(self.dims)})"


class PureState:
    """Unit-norm state vector over labelled subsystems."""

    def __init__(self, amplitudes, dims=None, tol=None, check=True):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        self.data = v
        self.dims = _as_dims(dims, v.shape[0])
        if check:
            self.validate(tol)
        self.data.setflags(write=False)

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def amplitudes(self):
        return self.data

    def validate(self, tol=None):
        for name, ok, msg in self.checks(tol):
            if not ok:
                raise ValidationError(name, msg)

    def checks(self, tol=None):
        tol = tol or DEFAULT_TOL
        v = self.data
        finite = bool(np.all(np.isfinite(v)))
        out = [("finite", finite, "all entries finite" if finite else "non-finite entries")]
        if finite:
            dev = abs(np.linalg.norm(v) - 1.0)
            out.append(("unit norm", dev <= tol.tol_norm, f"norm deviation {dev:.3e}"))
        return out

    def density(self):
        return DensityMatrix(np.outer(self.data, self.data.conj()), self.dims, check=False)

    def __repr__(self):
        return f"PureState(dims={list(self.dims)})"


def as_density(x, dims=None):
    """Coerce a PureState, DensityMatrix, vector or matrix to a DensityMatrix."""
    if isinstance(x, DensityMatrix):
        return x
    if isinstance(x, PureState):
        return x.density()
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        return PureState(a, dims).density()
    return DensityMatrix(a, dims)


def tensor(a, b):
    """Kronecker product with subsystem order ``(a, b)``.

    Works on DensityMatrix, PureState or plain arrays; the result has the
    same kind as ``a`` and concatenated dims.
    """
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.data, b.data), a.dims + b.dims, check=False)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.data, b.data), a.dims + b.dims, check=False)
    return np.kron(_as_array(a), _as_array(b))


def tensor_all(items):
    return reduce(tensor, items)


def _check_indices(indices, n):
    indices = sorted(set(int(i) for i in indices))
    if not indices:
        raise ValidationError("subsystem", "at least one subsystem must be kept")
    for i in indices:
        if not 0 <= i < n:
            raise ValidationError("subsystem", f"index {i} out of range for {n} subsystems")
    return indices


def partial_trace_array(m, dims, keep):
    """Partial trace on a raw matrix; returns the reduced matrix."""
    n = len(dims)
    keep = _check_indices(keep, n)
    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract traced indices pairwise, highest first so positions stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        nleft = n - count
        t = np.trace(t, axis1=i, axis2=i + nleft)
    dk = prod(dims[i] for i in keep)
    return t.reshape(dk, dk)


def partial_trace(rho, keep):
    """Reduced state on the subsystems listed in ``keep``."""
    rho = as_density(rho)
    keep = _check_indices(keep, len(rho.dims))
    m = partial_trace_array(rho.data, rho.dims, keep)
    return DensityMatrix(m, tuple(rho.dims[i] for i in keep), check=False)


def eigh(h, tol=None):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    Returns
    -------
    (ndarray, ndarray)
        Real eigenvalues and a unitary matrix whose columns are eigenvectors.
    """
    tol = tol or DEFAULT_TOL
    m = _as_array(h)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("shape", "eigh needs a square matrix")
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > tol.tol_herm:
        raise ValidationError("hermitian", f"max deviation {dev:.3e}")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w[::-1], v[:, ::-1]


def clip_spectrum(w, tol=None):
    """Clip tiny negative eigenvalues to zero; reject clearly negative ones."""
    tol = tol or DEFAULT_TOL
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -tol.tol_psd:
        raise ValidationError("positive", f"eigenvalue {w.min():.3e} below -{tol.tol_psd:g}")
    return np.where(w < 0, 0.0, w)


def matrix_log2(rho, tol=None):
    """Base-2 logarithm restricted to the support of a PSD matrix.

    Eigenvalues at or below ``tol_supp`` are dropped, so the result is zero on
    the kernel.
    """
    tol = tol or DEFAULT_TOL
    w, v = eigh(_as_array(rho), tol)
    w = clip_spectrum(w, tol)
    keep = w > tol.tol_supp
    return (v[:, keep] * np.log2(w[keep])) @ v[:, keep].conj().T


def sqrtm_psd(m, tol=None):
    w, v = eigh(m, tol)
    w = clip_spectrum(w, tol)
    return (v * np.sqrt(w)) @ v.conj().T


def schmidt(psi):
    """Schmidt decomposition of a bipartite pure state.

    Returns
    -------
    coefficients : ndarray
        Descending nonnegative coefficients (square roots of the reduced
        spectrum).
    left, right : ndarray
        Matrices whose columns are the Schmidt vectors on each side.
    """
    if not isinstance(psi, PureState):
        raise ValidationError("dims", "schmidt expects a PureState")
    if len(psi.dims) != 2:
        raise ValidationError("dims", f"schmidt needs exactly two subsystems, got {len(psi.dims)}")
    a = psi.data.reshape(psi.dims)
    u, s, vh = np.linalg.svd(a)
    return s, u[:, : len(s)], vh[: len(s)].T


def amplitude_matrix(psi):
    """Coefficient matrix A with psi = sum A[i, j] |i>|j>."""
    if len(psi.dims) != 2:
        raise ValidationError("dims", "expected a bipartite state")
    return psi.data.reshape(psi.dims)


def random_pure(d, seed=None, dims=None):
    """Haar-random pure state of dimension ``d``, deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState(v / np.linalg.norm(v), dims, check=False)


def random_unitary(d, seed=None):
    """Haar-random unitary via QR with phase correction."""
    rng = np.random.default_rng(seed)
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d, seed=None, rank=None, dims=None):
    """Random mixed state from the induced measure of a purification."""
    rng = np.random.default_rng(seed)
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims, check=False)


def ket(index, dims):
    """Computational basis vector for a tuple of local indices."""
    dims = tuple(dims)
    index = tuple(index)
    v = np.zeros(prod(dims), dtype=complex)
    v[np.ravel_multi_index(index, dims)] = 1.0
    return PureState(v, dims, check=False)


def maximally_entangled(d):
    """|phi_d> = sum_k |kk> / sqrt(d)."""
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(v, (d, d), check=False)


def bell_state(name="phi+"):
    s = 1 / np.sqrt(2)
    vecs = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    if name not in vecs:
        raise ValidationError("state", f"unknown Bell state {name!r}")
    return PureState(vecs[name], (2, 2), check=False)
