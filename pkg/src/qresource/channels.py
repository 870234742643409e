"""Quantum channels in Kraus and Choi form, named channels, gates, and
phase-reference distributions.

The Choi state uses the normalised convention
``choi(S) = (S x 1)(|phi_d><phi_d|)`` with the output factor first, so it is
itself a density matrix.
"""

import cmath
import math
from math import prod

import numpy as np
from scipy.linalg import expm

from .qcore import (
    DEFAULT_TOL,
    DensityMatrix,
    ValidationError,
    as_density,
    clip_spectrum,
    eigh,
    partial_trace_array,
    random_unitary,
)

TP_TOL = 1e-9


def _dims(d_or_dims):
    if isinstance(d_or_dims, (int, np.integer)):
        return (int(d_or_dims),)
    return tuple(int(x) for x in d_or_dims)


class QuantumChannel:
    """Completely positive trace-preserving map stored as Kraus operators.

    Parameters
    ----------
    kraus : sequence of array_like
        Operators of shape ``(d_out, d_in)``.
    dims_in, dims_out : int or sequence of int
        Subsystem dimensions; ``dims_out`` defaults to ``dims_in``.
    check : bool
        Verify trace preservation.
    factors : list of QuantumChannel, optional
        Set when the channel is a tensor product of local channels.
    """

    def __init__(self, kraus, dims_in=None, dims_out=None, check=True, factors=None, name=None):
        ops = [np.array(k, dtype=complex) for k in kraus]
        if not ops:
            raise ValidationError("kraus", "at least one Kraus operator is required")
        shape = ops[0].shape
        if any(k.ndim != 2 or k.shape != shape for k in ops):
            raise ValidationError("kraus", "Kraus operators must be matrices of equal shape")
        self.dims_in = _dims(dims_in if dims_in is not None else shape[1])
        self.dims_out = _dims(dims_out if dims_out is not None else (self.dims_in if shape[0] == shape[1] else shape[0]))
        if prod(self.dims_in) != shape[1] or prod(self.dims_out) != shape[0]:
            raise ValidationError("dims", f"Kraus shape {shape} does not match dims {self.dims_in} -> {self.dims_out}")
        self.kraus = np.stack(ops)
        self.kraus.setflags(write=False)
        self.factors = factors
        self.name = name
        self._superop = None
        if check:
            defect = self.tp_defect()
            if defect > TP_TOL:
                raise ValidationError("trace preservation", f"||sum K^dag K - I||_max = {defect:.3e}")

    @property
    def d_in(self):
        return prod(self.dims_in)

    @property
    def d_out(self):
        return prod(self.dims_out)

    def tp_defect(self):
        s = np.einsum("kji,kjl->il", self.kraus.conj(), self.kraus)
        return float(np.max(np.abs(s - np.eye(self.d_in))))

    def superoperator(self):
        """Matrix of the map acting on row-major vectorised operators."""
        if self._superop is None:
            k = self.kraus
            self._superop = np.einsum("kab,kcd->acbd", k, k.conj()).reshape(self.d_out**2, self.d_in**2)
        return self._superop

    def apply_array(self, m):
        return (self.superoperator() @ m.reshape(-1)).reshape(self.d_out, self.d_out)

    def __call__(self, rho):
        return apply(self, rho)

    def then(self, other):
        """The channel that applies ``self`` first and ``other`` second."""
        return compose(self, other)

    def __repr__(self):
        label = f"{self.name}, " if self.name else ""
        return f"QuantumChannel({label}{len(self.kraus)} Kraus, {list(self.dims_in)} -> {list(self.dims_out)})"


def apply(channel, rho):
    """Apply a channel to a state: sum K rho K^dag."""
    rho = as_density(rho)
    if rho.dim != channel.d_in:
        raise ValidationError("dims", f"state dimension {rho.dim} does not match channel input {channel.d_in}")
    return DensityMatrix(channel.apply_array(rho.data), channel.dims_out, check=False)


def compose(*stages):
    """Sequential composition; ``stages[0]`` acts first."""
    if not stages:
        raise ValidationError("compose", "no stages given")
    kraus = stages[0].kraus
    for prev, nxt in zip(stages, stages[1:]):
        if prev.d_out != nxt.d_in:
            raise ValidationError("dims", f"cannot compose {prev.dims_out} into {nxt.dims_in}")
        kraus = np.einsum("iab,jbc->ijac", nxt.kraus, kraus).reshape(-1, nxt.d_out, stages[0].d_in)
    return QuantumChannel(list(kraus), stages[0].dims_in, stages[-1].dims_out, check=False)


def tensor_channels(*factors):
    """Parallel composition; the result remembers its local factors."""
    kraus = factors[0].kraus
    dims_in = tuple(factors[0].dims_in)
    dims_out = tuple(factors[0].dims_out)
    for f in factors[1:]:
        n1, a, b = kraus.shape
        n2, c, d = f.kraus.shape
        kraus = np.einsum("iab,jcd->ijacbd", kraus, f.kraus).reshape(n1 * n2, a * c, b * d)
        dims_in += tuple(f.dims_in)
        dims_out += tuple(f.dims_out)
    flat = []
    for f in factors:
        flat.extend(f.factors if f.factors else [f])
    return QuantumChannel(list(kraus), dims_in, dims_out, check=False, factors=flat)


def simplify(channel, tol=None):
    """Minimal Kraus representation obtained through the Choi state."""
    return kraus_from_choi(choi(channel), tol)


class ChoiMatrix:
    """Normalised Choi state on ``dims_out + dims_in``."""

    def __init__(self, state, dims_in, dims_out, check=True):
        self.dims_in = _dims(dims_in)
        self.dims_out = _dims(dims_out)
        self.state = state if isinstance(state, DensityMatrix) else DensityMatrix(state, self.dims_out + self.dims_in, check=check)
        if check:
            m = self.state.data
            do, di = prod(self.dims_out), prod(self.dims_in)
            red = partial_trace_array(m, (do, di), [1])
            dev = float(np.max(np.abs(red - np.eye(di) / di)))
            if dev > 1e-9:
                raise ValidationError("choi marginal", f"input marginal differs from I/d by {dev:.3e}")

    @property
    def data(self):
        return self.state.data


def choi(channel):
    """Choi state (S x 1)(|phi_d><phi_d|), output factor first."""
    d = channel.d_in
    # (K x 1) sum_i |ii> is the row-major flattening of K
    vecs = channel.kraus.reshape(len(channel.kraus), -1)
    m = vecs.T @ vecs.conj() / d
    state = DensityMatrix(m, channel.dims_out + channel.dims_in, check=False)
    return ChoiMatrix(state, channel.dims_in, channel.dims_out, check=False)


def kraus_from_choi(c, tol=None):
    """Kraus operators from the spectral decomposition of a Choi state.

    The number of operators equals the rank of the Choi state, counting
    eigenvalues above ``tol_supp``.
    """
    tol = tol or DEFAULT_TOL
    d_in = prod(c.dims_in)
    d_out = prod(c.dims_out)
    w, v = eigh(c.data, tol)
    w = clip_spectrum(w, tol)
    keep = w > tol.tol_supp
    ops = [np.sqrt(d_in * wk) * v[:, k].reshape(d_out, d_in) for k, wk in zip(np.flatnonzero(keep), w[keep])]
    return QuantumChannel(ops, c.dims_in, c.dims_out, check=False)


def dilation_kraus(u, rho_env, dims_sys=None, tol=None):
    """Kraus family of rho -> Tr_env[U (rho x rho_env) U^dag].

    ``U`` acts on system x environment in that order. The operators are
    ``K_kl = sqrt(mu_l) <e_k| U |e_l>`` with ``(mu_l, e_l)`` the spectral
    decomposition of the environment state.
    """
    tol = tol or DEFAULT_TOL
    u = np.asarray(u, dtype=complex)
    rho_env = as_density(rho_env)
    de = rho_env.dim
    if u.shape[0] != u.shape[1] or u.shape[0] % de:
        raise ValidationError("dims", f"unitary of shape {u.shape} incompatible with environment dimension {de}")
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if dev > 1e-9:
        raise ValidationError("unitary", f"||U^dag U - I||_max = {dev:.3e}")
    ds = u.shape[0] // de
    mu, e = eigh(rho_env.data, tol)
    mu = clip_spectrum(mu, tol)
    ut = u.reshape(ds, de, ds, de)
    ops = []
    for l in np.flatnonzero(mu > tol.tol_supp):
        for k in range(de):
            # <e_k| U |e_l> as an operator on the system
            ops.append(np.sqrt(mu[l]) * np.einsum("b,abcd,d->ac", e[:, k].conj(), ut, e[:, l]))
    dims = dims_sys if dims_sys is not None else ds
    return QuantumChannel(ops, dims, dims)


def state_dual_apply(rho, sigma):
    """Map dual to a bipartite state, applied to an operator on the first factor.

    Returns the matrix ``out[m, n] = sum_kl rho[(k, m), (l, n)] sigma[k, l]``,
    which equals ``Tr_A[rho (sigma^T x 1)]``.
    """
    rho = as_density(rho)
    sig = np.asarray(sigma.data if isinstance(sigma, DensityMatrix) else sigma, dtype=complex)
    if len(rho.dims) == 2:
        da, db = rho.dims
    else:
        da = sig.shape[0]
        if rho.dim % da:
            raise ValidationError("dims", "operator dimension does not divide the state dimension")
        db = rho.dim // da
    if sig.shape != (da, da):
        raise ValidationError("dims", f"operator shape {sig.shape} does not match first factor {da}")
    t = rho.data.reshape(da, db, da, db)
    return np.einsum("kmln,kl->mn", t, sig)


# ----------------------------------------------------------------------------
# einselection


class EinselectionSpec:
    """Per-subsystem pointer bases defining a dephasing operator.

    Each entry is either ``"identity"`` (or ``None``) or a square matrix whose
    columns are the pointer vectors of that subsystem.
    """

    def __init__(self, bases, dims=None):
        entries = []
        dlist = []
        for i, b in enumerate(bases):
            if b is None or (isinstance(b, str) and b == "identity"):
                if dims is None:
                    raise ValidationError("einselection", "dims are required for identity entries")
                entries.append(None)
                dlist.append(int(dims[i]))
                continue
            m = np.array(b, dtype=complex)
            if m.ndim == 1:
                m = np.diag(m)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValidationError("einselection", f"basis {i} must be a square matrix of column vectors")
            dev = float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))
            if dev > 1e-10:
                raise ValidationError("einselection", f"basis {i} is not orthonormal (deviation {dev:.3e})")
            entries.append(m)
            dlist.append(m.shape[0])
        if dims is not None and tuple(int(x) for x in dims) != tuple(dlist):
            raise ValidationError("einselection", f"bases give dims {dlist}, expected {list(dims)}")
        self.bases = entries
        self.dims = tuple(dlist)
        self._mask = None
        self._unitary = None
        self._computational = None

    @classmethod
    def computational(cls, dims, identity_on=()):
        dims = _dims(dims)
        return cls(["identity" if i in set(identity_on) else np.eye(d) for i, d in enumerate(dims)], dims)

    @property
    def d(self):
        return prod(self.dims)

    @property
    def rank_one(self):
        """True when every subsystem is dephased (all projectors rank one)."""
        return all(b is not None for b in self.bases)

    def unitary(self):
        """Unitary whose columns are the joint pointer vectors."""
        if self._unitary is None:
            u = np.ones((1, 1), dtype=complex)
            for b, d in zip(self.bases, self.dims):
                u = np.kron(u, np.eye(d) if b is None else b)
            self._unitary = u
        return self._unitary

    def mask(self):
        if self._mask is None:
            idx = np.array(np.unravel_index(np.arange(self.d), self.dims)).T
            sel = [i for i, b in enumerate(self.bases) if b is not None]
            if sel:
                same = np.all(idx[:, None, sel] == idx[None, :, sel], axis=-1)
            else:
                same = np.ones((self.d, self.d), dtype=bool)
            self._mask = same
        return self._mask

    def apply_array(self, m):
        u = self.unitary()
        if self._computational is None:
            self._computational = bool(np.allclose(u, np.eye(self.d), atol=0, rtol=0))
        if self._computational:
            return self.mask() * m
        return u @ (self.mask() * (u.conj().T @ m @ u)) @ u.conj().T

    def __call__(self, rho):
        rho = as_density(rho)
        return DensityMatrix(self.apply_array(rho.data), rho.dims, check=False)

    def projectors(self):
        """Joint projectors Pi_alpha, one per pointer multi-index."""
        local = []
        for b, d in zip(self.bases, self.dims):
            if b is None:
                local.append([np.eye(d, dtype=complex)])
            else:
                local.append([np.outer(b[:, k], b[:, k].conj()) for k in range(d)])
        projs = [np.ones((1, 1), dtype=complex)]
        for group in local:
            projs = [np.kron(p, q) for p in projs for q in group]
        return projs

    def channel(self):
        return QuantumChannel(self.projectors(), self.dims, self.dims, check=False, name="einselection")


def bloch_basis(theta, phi):
    """Orthonormal qubit basis {|n>, |-n>} for Bloch angles (theta, phi)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = cmath.exp(1j * phi)
    return np.array([[c, -s * e.conjugate()], [s * e, c]], dtype=complex)


# ----------------------------------------------------------------------------
# gates

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def rx(theta):
    return expm(-0.5j * theta * PAULI_X)


def rz(theta):
    return np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])


def random_channel(d, n_kraus=None, seed=None, dims=None):
    """Channel from a Haar-random isometry C^d -> C^(n_kraus * d)."""
    k = n_kraus or d
    v = random_unitary(k * d, seed)[:, :d]
    return QuantumChannel(list(v.reshape(k, d, d)), dims if dims is not None else d, check=False, name="random")


def unitary_channel(u, dims=None, name=None):
    u = np.asarray(u, dtype=complex)
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))
    if u.shape[0] != u.shape[1] or dev > 1e-9:
        raise ValidationError("unitary", f"operator is not unitary (deviation {dev:.3e})")
    return QuantumChannel([u], dims if dims is not None else u.shape[0], check=False, name=name)


def gate(kind, params=None):
    """Single-Kraus unitary channel for a named gate.

    Kinds: ``rx``, ``rz`` (param ``theta``), ``hadamard``, ``x``, ``y``,
    ``z``, ``phase`` (param ``alpha``), ``cnot``, ``cnot_pm``, ``swap``.
    ``cnot_pm`` is the CNOT controlled in the ``|+>, |->`` basis.
    """
    params = params or {}
    if kind == "rx":
        return unitary_channel(rx(float(params["theta"])), 2, "rx")
    if kind == "rz":
        return unitary_channel(rz(float(params["theta"])), 2, "rz")
    if kind == "hadamard":
        return unitary_channel(HADAMARD, 2, "hadamard")
    if kind in ("x", "y", "z"):
        return unitary_channel({"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[kind], 2, kind)
    if kind == "phase":
        return unitary_channel(np.diag([1, cmath.exp(1j * float(params["alpha"]))]), 2, "phase")
    if kind == "cnot":
        return unitary_channel(CNOT, (2, 2), "cnot")
    if kind == "cnot_pm":
        h1 = np.kron(HADAMARD, np.eye(2))
        return unitary_channel(h1 @ CNOT @ h1, (2, 2), "cnot_pm")
    if kind == "swap":
        return unitary_channel(SWAP, (2, 2), "swap")
    raise ValidationError("gate", f"unknown gate {kind!r}")


# ----------------------------------------------------------------------------
# named channels


def _unit_interval(name, x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValidationError("parameter", f"{name}={x} outside [0, 1]")
    return x


def identity_channel(dims=2):
    d = prod(_dims(dims))
    return QuantumChannel([np.eye(d)], dims, check=False, name="identity")


def amplitude_damping(gamma):
    g = _unit_interval("gamma", gamma)
    e0 = np.array([[1, 0], [0, math.sqrt(1 - g)]])
    e1 = np.array([[0, math.sqrt(g)], [0, 0]])
    return QuantumChannel([e0, e1], 2, check=False, name="amplitude_damping")


def phase_damping(lam):
    lam = _unit_interval("lambda", lam)
    e0 = np.array([[1, 0], [0, math.sqrt(1 - lam)]])
    e1 = np.array([[0, 0], [0, math.sqrt(lam)]])
    return QuantumChannel([e0, e1], 2, check=False, name="phase_damping")


def weyl_operators(d):
    """Clock-and-shift unitaries X^a Z^b, a, b = 0..d-1."""
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)]


def depolarizing(mu, dims=2):
    """rho -> mu rho + (1 - mu) Tr(rho) I / d on the joint space of ``dims``."""
    mu = _unit_interval("mu", mu)
    dims = _dims(dims)
    d = prod(dims)
    ws = weyl_operators(d)
    ops = [math.sqrt(mu + (1 - mu) / d**2) * ws[0]]
    ops += [math.sqrt((1 - mu) / d**2) * w for w in ws[1:]] if mu < 1 else []
    return QuantumChannel(ops, dims, check=False, name="depolarizing")


def ssr_dephasing(local_numbers):
    """Projection onto local particle-number sectors.

    ``local_numbers[s][i]`` is the particle number carried by basis state
    ``i`` of subsystem ``s``. The Kraus operators are the joint projectors
    onto fixed local numbers.
    """
    dims = tuple(len(x) for x in local_numbers)
    local = []
    for nums in local_numbers:
        nums = np.asarray(nums)
        local.append([np.diag((nums == n).astype(float)) for n in sorted(set(nums.tolist()))])
    projs = [np.ones((1, 1))]
    for group in local:
        projs = [np.kron(p, q) for p in projs for q in group]
    return QuantumChannel(projs, dims, check=False, name="ssr_dephasing")


def streltsov_map():
    """Qubit channel with Kraus operators |0><0| and |+><1|."""
    plus = np.array([1, 1]) / np.sqrt(2)
    k0 = np.array([[1, 0], [0, 0]])
    k1 = np.outer(plus, [0, 1])
    return QuantumChannel([k0, k1], 2, check=False, name="streltsov")


def _coherence_factor(g):
    g = complex(g)
    if abs(g) > 1 + 1e-12:
        raise ValidationError("parameter", f"|g| = {abs(g):.6g} exceeds 1")
    # averaging R_z(phi) multiplies the off-diagonal element by
    # int p(phi) e^{-i phi} dphi = -i conj(g)
    return -1j * g.conjugate()


def _dephase_with_phase(g):
    kappa = _coherence_factor(g)
    mag = min(abs(kappa), 1.0)
    turn = rz(-cmath.phase(kappa)) if mag > 0 else np.eye(2)
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    ops = [math.sqrt(1 - mag) * turn @ p0, math.sqrt(1 - mag) * turn @ p1, math.sqrt(mag) * turn]
    return [k for k in ops if np.any(k)]


def bec_channel(g, theta):
    """Rotation attempted with a phase-uncertain condensate as reference.

    Applies ``R_x(theta)`` and then the phase average over the reference
    phase, which keeps populations and multiplies coherences by
    ``-i conj(g)``; ``|g| = 1`` gives a unitary, ``g = 0`` full dephasing.
    """
    r = rx(float(theta))
    ops = [k @ r for k in _dephase_with_phase(g)]
    return QuantumChannel(ops, 2, check=False, name="bec")


def bec_map(g, theta):
    """``R_x(theta)^dag`` applied after :func:`bec_channel`; a local CPM whose
    quality factor is ``|g|``."""
    r = rx(float(theta))
    ops = [r.conj().T @ k for k in bec_channel(g, theta).kraus]
    return QuantumChannel(ops, 2, check=False, name="bec_map")


def named_channel(kind, params=None):
    """Build a channel by name.

    Kinds and parameters: ``identity`` (dims), ``amplitude_damping`` (gamma),
    ``phase_damping`` (lambda), ``depolarizing`` (mu, dims), ``einselection``
    (bases, dims), ``ssr_dephasing`` (local_numbers), ``bec`` (g, theta),
    ``bec_map`` (g, theta), ``streltsov``, ``unitary`` (re, im, dims) and every
    gate name accepted by :func:`gate`.
    """
    p = dict(params or {})
    if kind == "identity":
        return identity_channel(p.get("dims", 2))
    if kind == "amplitude_damping":
        return amplitude_damping(p["gamma"])
    if kind == "phase_damping":
        return phase_damping(p["lambda"] if "lambda" in p else p["lam"])
    if kind == "depolarizing":
        return depolarizing(p["mu"], p.get("dims", p.get("d", 2)))
    if kind == "einselection":
        bases = p.get("bases")
        dims = p.get("dims")
        if bases is None:
            return EinselectionSpec.computational(dims, p.get("identity_on", ())).channel()
        return EinselectionSpec([_parse_basis(b) for b in bases], dims).channel()
    if kind == "ssr_dephasing":
        return ssr_dephasing(p["local_numbers"])
    if kind in ("bec", "bec_map"):
        g = complex(p.get("g_re", p.get("g", 0.0)), p.get("g_im", 0.0))
        return (bec_channel if kind == "bec" else bec_map)(g, p.get("theta", 0.0))
    if kind == "streltsov":
        return streltsov_map()
    if kind == "unitary":
        u = np.asarray(p["re"], dtype=float) + 1j * np.asarray(p.get("im", np.zeros_like(p["re"])), dtype=float)
        return unitary_channel(u, p.get("dims"))
    return gate(kind, p)


def _parse_basis(b):
    if isinstance(b, str):
        return b
    if isinstance(b, dict):
        return np.asarray(b["re"], dtype=float) + 1j * np.asarray(b.get("im", np.zeros_like(b["re"])), dtype=float)
    return np.asarray(b)


# ----------------------------------------------------------------------------
# phase distributions


class PhaseDistribution:
    """Probability density of a reference phase on [0, 2 pi).

    Families
    --------
    ``wrapped_normal``: ``sigma``, ``mu``.
    ``uniform``.
    ``atoms``: point masses at ``phases`` with ``weights``.
    ``two_flat``: two flat pieces of width ``w`` centred at ``delta/2`` and
    ``2 pi - delta/2``.
    ``tabulated``: samples ``values`` at ``phases``, interpolated linearly
    and periodically.

    Densities are normalised to unit integral over the circle.
    """

    FAMILIES = ("wrapped_normal", "uniform", "atoms", "two_flat", "tabulated")

    def __init__(self, family, **params):
        if family not in self.FAMILIES:
            raise ValidationError("phase distribution", f"unknown family {family!r}")
        self.family = family
        self.params = params
        if family == "wrapped_normal" and float(params["sigma"]) <= 0:
            raise ValidationError("phase distribution", "sigma must be positive")
        if family == "atoms":
            w = np.asarray(params["weights"], dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
                raise ValidationError("phase distribution", "atom weights must be a distribution")
        if family == "two_flat":
            w = float(params["w"])
            if not 0 < w <= math.pi:
                raise ValidationError("phase distribution", "width must lie in (0, pi]")
        if family == "tabulated":
            v = np.asarray(params["values"], dtype=float)
            if np.any(v < 0):
                raise ValidationError("phase distribution", "negative density")

    @property
    def discrete(self):
        return self.family == "atoms"

    def breakpoints(self):
        """Points in [0, 2 pi) where the density jumps or kinks, or None if smooth."""
        if self.family == "two_flat":
            w = float(self.params["w"])
            delta = float(self.params["delta"])
            pts = [c + sgn * w / 2 for c in (delta / 2, 2 * np.pi - delta / 2) for sgn in (-1, 1)]
        elif self.family == "tabulated":
            pts = list(np.asarray(self.params["phases"], dtype=float))
        else:
            return None
        return np.unique(np.mod(pts, 2 * np.pi))

    def pdf(self, phi):
        phi = np.mod(np.asarray(phi, dtype=float), 2 * np.pi)
        f = self.family
        if f == "uniform":
            return np.full_like(phi, 1 / (2 * np.pi))
        if f == "wrapped_normal":
            s = float(self.params["sigma"])
            mu = float(self.params.get("mu", 0.0))
            kmax = int(math.ceil(10 * s / (2 * np.pi))) + 2
            k = np.arange(-kmax, kmax + 1)
            x = phi[..., None] - mu + 2 * np.pi * k
            return np.exp(-(x**2) / (2 * s * s)).sum(-1) / (s * math.sqrt(2 * np.pi))
        if f == "two_flat":
            w = float(self.params["w"])
            delta = float(self.params["delta"])
            out = np.zeros_like(phi)
            for c in (delta / 2, 2 * np.pi - delta / 2):
                dist = np.abs(np.mod(phi - c + np.pi, 2 * np.pi) - np.pi)
                out += np.where(dist <= w / 2, 1 / (2 * w), 0.0)
            return out
        if f == "tabulated":
            xs = np.asarray(self.params["phases"], dtype=float)
            ys = np.asarray(self.params["values"], dtype=float)
            return np.interp(phi, xs, ys, period=2 * np.pi)
        raise ValidationError("phase distribution", "point masses have no density")


def _trapezoid_circle(f, n):
    phi = 2 * np.pi * np.arange(n) / n
    vals = f(phi)
    return (2 * np.pi / n) * vals.sum(), (2 * np.pi / n) * (vals * np.exp(1j * phi)).sum()


def _piecewise_gauss(f, cuts, n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    edges = np.append(cuts, cuts[0] + 2 * np.pi)
    a, b = edges[:-1, None], edges[1:, None]
    # midpoints of each segment keep the evaluation away from the jumps
    phi = (a + b) / 2 + (b - a) / 2 * nodes
    w = (b - a) / 2 * weights
    vals = f(phi)
    return (w * vals).sum(), (w * vals * np.exp(1j * phi)).sum()


def phase_quadrature(p, start=2**14, max_points=2**22, target=1e-12):
    """Normalisation and mean of e^{i phi} under ``p``.

    Smooth densities use the periodic trapezoid rule, doubling the number of
    nodes until two successive estimates agree to ``target`` (spectral
    accuracy). Densities with jumps or kinks use Gauss-Legendre rules on
    each smooth piece, again doubling until converged. Point masses are
    summed exactly. Returns ``(norm, mean, nodes, change)``.
    """
    if p.discrete:
        ph = np.asarray(p.params["phases"], dtype=float)
        w = np.asarray(p.params["weights"], dtype=float)
        return float(w.sum()), complex(np.sum(w * np.exp(1j * ph))), len(ph), 0.0
    cuts = p.breakpoints()
    if cuts is not None:
        n = 8
        norm, mean = _piecewise_gauss(p.pdf, cuts, n)
        while True:
            norm2, mean2 = _piecewise_gauss(p.pdf, cuts, 2 * n)
            change = max(abs(mean2 - mean), abs(norm2 - norm))
            n *= 2
            norm, mean = norm2, mean2
            if change <= target or n * len(cuts) >= max_points:
                return float(norm.real), complex(mean), n * len(cuts), float(change)
    n = start
    norm, mean = _trapezoid_circle(p.pdf, n)
    while True:
        norm2, mean2 = _trapezoid_circle(p.pdf, 2 * n)
        change = max(abs(mean2 - mean), abs(norm2 - norm))
        n *= 2
        norm, mean = norm2, mean2
        if change <= target or n >= max_points:
            return float(norm.real), complex(mean), n, float(change)


def g_from_phase_dist(p):
    """g = -i * integral p(phi) e^{i phi} dphi."""
    norm, mean, _, _ = phase_quadrature(p)
    if abs(norm - 1) > 1e-6:
        raise ValidationError("phase distribution", f"density integrates to {norm:.9g}, not 1")
    return -1j * mean
