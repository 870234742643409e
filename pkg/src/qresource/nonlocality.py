"""Multi-party Bell tests on bosonic Fock states with particle-number
superselection.

Each party holds one mode (single-copy states) or a pair of modes ``(a, b)``
(two-copy and dual-rail states). A party measures its mode pair behind a
beamsplitter with mixing angle ``theta`` and phase ``phi``; the output Fock
outcomes are binned to +-1. Correlators of all 2^N setting combinations are
computed at once and fed to linear (CHSH, Svetlichny, BBGL, MABK) or
nonlinear (ZB) functionals.
"""

import itertools
import math
from collections import namedtuple
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .qcore import DensityMatrix, ValidationError

PartySetting = namedtuple("PartySetting", ["theta", "phi"])

MAX_ENUMERATION_PARTIES = 6


# ----------------------------------------------------------------------------
# Fock states


def _compositions(total, slots, caps):
    if slots == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]), -1, -1):
        for rest in _compositions(total - first, slots - 1, caps[1:]):
            yield (first,) + rest


class FockBasis:
    """Occupation tuples of ``parties * modes_per_party`` modes holding
    ``total`` particles, party-major (modes of party k are contiguous)."""

    def __init__(self, parties, modes_per_party, total, caps=None):
        if parties < 1 or modes_per_party < 1 or total < 0:
            raise ValidationError("fock basis", "parties, modes and particle number must be positive")
        self.parties = int(parties)
        self.modes_per_party = int(modes_per_party)
        self.total = int(total)
        n_modes = self.parties * self.modes_per_party
        if caps is None:
            caps = [self.total] * n_modes
        elif isinstance(caps, int):
            caps = [caps] * n_modes
        self.caps = tuple(int(c) for c in caps)
        if len(self.caps) != n_modes:
            raise ValidationError("fock basis", "one cap per mode is required")
        self.tuples = list(_compositions(self.total, n_modes, self.caps))
        self.index = {t: i for i, t in enumerate(self.tuples)}

    @property
    def n_modes(self):
        return self.parties * self.modes_per_party

    def __len__(self):
        return len(self.tuples)

    def local(self, t):
        m = self.modes_per_party
        return tuple(tuple(t[k * m : (k + 1) * m]) for k in range(self.parties))

    def party_totals(self, t):
        return tuple(sum(x) for x in self.local(t))


class FockState:
    """Amplitudes over the tuples of a :class:`FockBasis`."""

    def __init__(self, basis, amplitudes, check=True):
        if isinstance(amplitudes, dict):
            vec = np.zeros(len(basis), dtype=complex)
            for t, a in amplitudes.items():
                t = tuple(t)
                if t not in basis.index:
                    raise ValidationError("particle number", f"occupation {t} is outside the declared sector")
                vec[basis.index[t]] += a
        else:
            vec = np.array(amplitudes, dtype=complex).reshape(-1)
            if vec.size != len(basis):
                raise ValidationError("fock state", "amplitude count does not match the basis")
        self.basis = basis
        self.amplitudes = vec
        if check:
            dev = abs(np.linalg.norm(vec) - 1)
            if dev > 1e-10:
                raise ValidationError("unit norm", f"norm deviation {dev:.3e}")

    @property
    def parties(self):
        return self.basis.parties

    @property
    def total(self):
        return self.basis.total

    def support(self, atol=1e-14):
        return [(self.basis.tuples[i], self.amplitudes[i]) for i in np.flatnonzero(np.abs(self.amplitudes) > atol)]

    def as_dict(self, atol=1e-14):
        return {t: a for t, a in self.support(atol)}

    def density(self):
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), (len(v),), check=False)

    def permuted(self, perm):
        """State with party k moved to position perm[k]."""
        out = {}
        for t, a in self.support():
            loc = self.basis.local(t)
            new = [None] * self.parties
            for k, p in enumerate(perm):
                new[p] = loc[k]
            out[tuple(x for grp in new for x in grp)] = a
        return FockState(self.basis, out)


def w_state(n):
    """Single particle shared symmetrically by ``n`` single-mode parties."""
    if n < 2:
        raise ValidationError("parties", "at least two parties are required")
    return dicke_state(n, 1)


def dicke_state(n, m):
    """Equal superposition of all patterns with ``m`` singly occupied parties."""
    if not 0 < m <= n:
        raise ValidationError("excitations", f"need 0 < M <= N, got M={m}, N={n}")
    basis = FockBasis(n, 1, m)
    patterns = list(itertools.combinations(range(n), m))
    amp = 1 / math.sqrt(len(patterns))
    amps = {}
    for p in patterns:
        t = [0] * n
        for k in p:
            t[k] = 1
        amps[tuple(t)] = amp
    return FockState(basis, amps)


def ghz_dual_rail(n):
    """(|10,...,10> + |01,...,01>)/sqrt(2) with one particle per party."""
    if n < 2:
        raise ValidationError("parties", "at least two parties are required")
    basis = FockBasis(n, 2, n)
    s = 1 / math.sqrt(2)
    return FockState(basis, {(1, 0) * n: s, (0, 1) * n: s})


def two_copies(psi):
    """Two independent copies of a single-mode-per-party state.

    Party k holds mode ``a_k`` of the first copy and ``b_k`` of the second.
    """
    if psi.basis.modes_per_party != 1:
        raise ValidationError("modes", "two_copies expects one mode per party")
    n = psi.parties
    basis = FockBasis(n, 2, 2 * psi.total)
    amps = {}
    sup = psi.support()
    for ta, a in sup:
        for tb, b in sup:
            t = tuple(x for k in range(n) for x in (ta[k], tb[k]))
            amps[t] = amps.get(t, 0) + a * b
    return FockState(basis, amps)


def product_fock_state(local_states):
    """Tensor product of per-party local states.

    ``local_states`` is a list of dicts mapping a local occupation tuple to
    its amplitude; all entries of one dict must share a particle number.
    """
    totals = []
    for st in local_states:
        ns = {sum(k) for k in st}
        if len(ns) != 1:
            raise ValidationError("particle number", "each local state must have a definite particle number")
        totals.append(ns.pop())
    m = len(next(iter(local_states[0])))
    basis = FockBasis(len(local_states), m, sum(totals))
    amps = {}
    for combo in itertools.product(*[list(s.items()) for s in local_states]):
        t = tuple(x for occ, _ in combo for x in occ)
        amps[t] = np.prod([a for _, a in combo])
    norm = math.sqrt(sum(abs(a) ** 2 for a in amps.values()))
    return FockState(basis, {t: a / norm for t, a in amps.items()})


# ----------------------------------------------------------------------------
# beamsplitter measurements


@lru_cache(maxsize=None)
def local_basis(cap):
    """Local (n, m) occupations with n + m <= cap, ordered by total then n descending."""
    return tuple((n, t - n) for t in range(cap + 1) for n in range(t, -1, -1))


@lru_cache(maxsize=None)
def _monomials(cap):
    """Expansion of every output state in powers of the 2x2 mode matrix.

    The output creation operators are c^dag = u00 a^dag + u01 b^dag and
    d^dag = u10 a^dag + u11 b^dag. Entry (row, col) of the beamsplitter
    matrix is a sum of ``weight * u00^p u01^q u10^r u11^s``.
    """
    basis = local_basis(cap)
    idx = {b: i for i, b in enumerate(basis)}
    terms = {}
    for col, (nt, mt) in enumerate(basis):
        for i in range(nt + 1):
            for k in range(mt + 1):
                na = i + k
                nb = nt + mt - na
                w = math.comb(nt, i) * math.comb(mt, k)
                w *= math.sqrt(math.factorial(na) * math.factorial(nb) / (math.factorial(nt) * math.factorial(mt)))
                key = (idx[(na, nb)], col, i, nt - i, k, mt - k)
                terms[key] = terms.get(key, 0.0) + w
    keys = np.array(list(terms.keys()), dtype=int)
    weights = np.array(list(terms.values()))
    L = len(basis)
    select = np.zeros((len(keys), L * L))
    select[np.arange(len(keys)), keys[:, 0] * L + keys[:, 1]] = 1.0
    return L, keys[:, 2:], weights, select


def mode_matrix(theta, phi):
    """2x2 matrix taking (a^dag, b^dag) to the output creation operators."""
    c, s, e = np.cos(theta), np.sin(theta), np.exp(1j * np.asarray(phi))
    return np.stack([c + 0j, s * e, s + 0j, -c * e], axis=-1)


def beamsplitter_matrices(thetas, phis, cap):
    """Matrices whose columns are the output states |n~, m~> in the input basis.

    Vectorised over arrays of angles; returns shape ``(..., L, L)``.
    """
    L, powers, weights, select = _monomials(cap)
    u = mode_matrix(np.asarray(thetas, dtype=float), np.asarray(phis, dtype=float))
    mono = weights * np.prod(u[..., None, :] ** powers, axis=-1)
    return (mono @ select).reshape(u.shape[:-1] + (L, L))


def beamsplitter_matrix(theta, phi, cap=2):
    return beamsplitter_matrices(theta, phi, cap)


def closed_form_outputs(theta, phi):
    """Output states with at most two particles, written out by hand.

    Returns a dict mapping ``(n~, m~)`` to the amplitude vector over
    ``local_basis(2)`` = (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
    """
    c, s, e = math.cos(theta), math.sin(theta), complex(math.cos(phi), math.sin(phi))
    r2 = math.sqrt(2)
    return {
        (0, 0): np.array([1, 0, 0, 0, 0, 0], dtype=complex),
        (1, 0): np.array([0, c, s * e, 0, 0, 0]),
        (0, 1): np.array([0, s, -c * e, 0, 0, 0]),
        (2, 0): np.array([0, 0, 0, c * c, r2 * c * s * e, e * e * s * s]),
        (1, 1): np.array([0, 0, 0, r2 * c * s, -math.cos(2 * theta) * e, -r2 * c * s * e * e]),
        (0, 2): np.array([0, 0, 0, s * s, -r2 * c * s * e, c * c * e * e]),
    }


def binning(n, m):
    """+-1 label of the output (n~, m~)."""
    if n < 0 or m < 0:
        raise ValidationError("binning", "occupations must be nonnegative")
    return -1 if (m + (m + n) * (m + n + 1) // 2) % 2 else 1


@lru_cache(maxsize=None)
def _binning_vector(cap):
    return np.array([binning(n, m) for n, m in local_basis(cap)], dtype=float)


def _require_pairs(state):
    if state.basis.modes_per_party != 2:
        raise ValidationError("modes", "beamsplitter measurements need two modes per party")


def _local_cap(state):
    return max(max(state.basis.party_totals(t)) for t, _ in state.support())


def _dense_local_tensor(state, cap):
    lb = {b: i for i, b in enumerate(local_basis(cap))}
    L = len(lb)
    t = np.zeros((L,) * state.parties, dtype=complex)
    for occ, a in state.support():
        t[tuple(lb[p] for p in state.basis.local(occ))] += a
    return t


def _settings_array(settings, n, per_party):
    a = np.asarray([[tuple(s) for s in p] if per_party == 2 else tuple(p) for p in settings], dtype=float)
    want = (n, 2, 2) if per_party == 2 else (n, 2)
    if a.shape != want:
        raise ValidationError("settings", f"expected settings of shape {want}, got {a.shape}")
    return a


def beamsplitter_outcomes(state, settings):
    """Joint outcome probabilities for one beamsplitter setting per party.

    Returns a dict mapping ``((n~_1, m~_1), ..., (n~_N, m~_N))`` to its
    probability, omitting outcomes with zero probability.
    """
    _require_pairs(state)
    s = _settings_array(settings, state.parties, 1)
    cap = _local_cap(state)
    t = _dense_local_tensor(state, cap)
    vs = beamsplitter_matrices(s[:, 0], s[:, 1], cap)
    for k in range(state.parties):
        t = np.moveaxis(np.tensordot(vs[k].conj().T, t, axes=([1], [k])), 0, k)
    probs = np.abs(t) ** 2
    lb = local_basis(cap)
    out = {}
    for idx in zip(*np.nonzero(probs > 1e-16)):
        out[tuple(lb[i] for i in idx)] = float(probs[idx])
    return out


class CorrelatorEngine:
    """Fast evaluation of all 2^N full correlators for two settings per party.

    Local observables conserve each party's particle number, so only pairs of
    support states with equal per-party totals contribute; the expectation
    value is a weighted sum of products of local matrix elements over those
    pairs.
    """

    def __init__(self, state):
        _require_pairs(state)
        self.parties = state.parties
        self.cap = _local_cap(state)
        self.eps = _binning_vector(self.cap)
        lb = {b: i for i, b in enumerate(local_basis(self.cap))}
        sup = state.support()
        loc = np.array([[lb[p] for p in state.basis.local(t)] for t, _ in sup], dtype=int)
        tot = [state.basis.party_totals(t) for t, _ in sup]
        amp = np.array([a for _, a in sup])
        xs, ys, ws = [], [], []
        for i in range(len(sup)):
            for j in range(len(sup)):
                if tot[i] == tot[j]:
                    xs.append(loc[i])
                    ys.append(loc[j])
                    ws.append(np.conj(amp[i]) * amp[j])
        self.x = np.array(xs)
        self.y = np.array(ys)
        self.w = np.array(ws)
        letters = "abcdefghijklmnopqrstuvwxyz"
        n = self.parties
        self._expr = "p," + ",".join(f"{letters[k]}p" for k in range(n)) + "->" + letters[:n]

    def observables(self, angles):
        """Binned observables, shape (N, 2, L, L)."""
        a = np.asarray(angles, dtype=float).reshape(self.parties, 2, 2)
        v = beamsplitter_matrices(a[..., 0], a[..., 1], self.cap)
        return np.einsum("...ij,j,...kj->...ik", v, self.eps, v.conj())

    def table(self, angles):
        obs = self.observables(angles)
        factors = [obs[k][:, self.x[:, k], self.y[:, k]] for k in range(self.parties)]
        return np.einsum(self._expr, self.w, *factors).real


def correlator(state, settings):
    """Expectation of the product of binned local observables, one setting per party."""
    s = _settings_array(settings, state.parties, 1)
    angles = np.stack([s, s], axis=1)
    return float(CorrelatorEngine(state).table(angles)[(0,) * state.parties])


def correlator_table(state, settings):
    """All 2^N correlators for settings of shape (N, 2, 2): party, A/B, (theta, phi)."""
    s = _settings_array(settings, state.parties, 2)
    return CorrelatorEngine(state).table(s)


# ----------------------------------------------------------------------------
# Bell functionals


def _swap_settings(c):
    return c[(slice(None, None, -1),) * c.ndim]


def _bbgl_coefficients(n):
    if n == 2:
        c = np.zeros((2, 2))
        c[0, 1] = c[1, 0] = c[1, 1] = 1
        c[0, 0] = -1
        return c
    prev = _bbgl_coefficients(n - 1)
    return np.stack([prev, _swap_settings(prev)])


def _mabk_coefficients(n):
    c = np.zeros((2,) * n)
    for s in itertools.product((1, -1), repeat=n):
        weight = math.sqrt(2) * math.cos(math.pi / 4 * (sum(s) - n - 1))
        for k in itertools.product((0, 1), repeat=n):
            c[k] += weight * math.prod(s[j] ** k[j] for j in range(n))
    c[np.abs(c) < 1e-12] = 0.0
    return c


def _zb_signs(n):
    signs = np.array(list(itertools.product((1, -1), repeat=n)))
    ks = np.array(list(itertools.product((0, 1), repeat=n)))
    return np.prod(signs[:, None, :] ** ks[None, :, :], axis=-1)


class BellFunctional:
    """Full-correlator Bell expression over N parties with settings A_k, B_k.

    Kinds: ``chsh`` (N = 2), ``svetlichny`` (N = 3), ``bbgl``, ``mabk`` and
    the nonlinear ``zb``. Linear kinds are stored as a coefficient tensor over
    setting choices (0 = A, 1 = B). Values are reported raw and normalised
    so that the classical bound becomes 2^(N-1).
    """

    KINDS = ("chsh", "svetlichny", "bbgl", "mabk", "zb")

    def __init__(self, kind, parties):
        kind = kind.lower()
        if kind not in self.KINDS:
            raise ValidationError("functional", f"unknown functional {kind!r}")
        n = int(parties)
        if n < 2:
            raise ValidationError("functional", "at least two parties are required")
        if kind == "chsh" and n != 2:
            raise ValidationError("functional", "CHSH is a two-party functional")
        if kind == "svetlichny" and n != 3:
            raise ValidationError("functional", "the Svetlichny functional is defined for three parties")
        self.kind = kind
        self.parties = n
        self.linear = kind != "zb"
        if kind == "chsh":
            c = np.ones((2, 2))
            c[1, 1] = -1
        elif kind in ("svetlichny", "bbgl"):
            c = _bbgl_coefficients(n)
        elif kind == "mabk":
            c = _mabk_coefficients(n)
        else:
            c = None
        self.coefficients = c
        self._signs = _zb_signs(n) if kind == "zb" else None
        self._bound = None

    def __repr__(self):
        return f"BellFunctional({self.kind}, N={self.parties})"

    def terms(self):
        """Nonzero ``(coefficient, settings)`` pairs, settings as strings like 'ABA'."""
        if not self.linear:
            raise ValidationError("functional", "the ZB functional is not a linear combination of terms")
        out = []
        for k in itertools.product((0, 1), repeat=self.parties):
            if self.coefficients[k] != 0:
                out.append((float(self.coefficients[k]), "".join("AB"[i] for i in k)))
        return out

    def evaluate(self, table):
        """Raw value from a (2,)*N correlator table."""
        t = np.asarray(table, dtype=float)
        if t.shape != (2,) * self.parties:
            raise ValidationError("functional", f"correlator table of shape {t.shape} does not match N={self.parties}")
        if self.linear:
            return float(np.sum(self.coefficients * t))
        return float(np.sum(np.abs(self._signs @ t.reshape(-1))))

    @property
    def classical_bound(self):
        if self._bound is None:
            self._bound = classical_bound(self)
        return self._bound

    @property
    def target_bound(self):
        return 2.0 ** (self.parties - 1)

    @property
    def scale(self):
        return self.target_bound / self.classical_bound

    def normalized(self, raw):
        return raw * self.scale


def classical_bound(f):
    """Maximum |value| over deterministic +-1 assignments, by enumeration."""
    n = f.parties
    if n > MAX_ENUMERATION_PARTIES:
        raise ValidationError("functional", f"enumeration limited to N <= {MAX_ENUMERATION_PARTIES}")
    # all 2^(2N) strategies at once: outcome[s, k, setting]
    strat = np.array(list(itertools.product((1, -1), repeat=2 * n)), dtype=float).reshape(-1, n, 2)
    table = strat[:, 0, :]
    for k in range(1, n):
        table = np.einsum("s...,sj->s...j", table, strat[:, k, :])
    if f.linear:
        vals = np.abs(np.tensordot(table, f.coefficients, axes=n))
    else:
        vals = np.abs(np.einsum("ik,sk->si", f._signs, table.reshape(len(table), -1))).sum(axis=1)
    return float(np.round(vals.max(), 12))


def bell_value(f, state, settings, raw=False):
    """Functional value at the given settings, normalised unless ``raw``."""
    if state.parties != f.parties:
        raise ValidationError("functional", f"functional for N={f.parties} applied to a {state.parties}-party state")
    v = f.evaluate(correlator_table(state, settings))
    return v if raw else f.normalized(v)


@dataclass
class OptimizationResult:
    value: float
    raw_value: float
    settings: np.ndarray
    bound: float
    raw_bound: float
    restarts: int
    seed: int
    restart_values: list = field(default_factory=list)
    converged: int = 0
    evaluations: int = 0


def optimize_settings(f, state, restarts=50, seed=0, polish=True, fatol=1e-8, xatol=1e-8):
    """Maximise |functional| over beamsplitter angles.

    Multistart Nelder-Mead on the 4N angles; restart r starts from angles
    drawn uniformly in [0, 2 pi) with the generator seeded by ``(seed, r)``.
    An optional final run restarts from the best point. The reported value
    is recomputed with :func:`bell_value` at the returned settings.
    """
    if state.parties != f.parties:
        raise ValidationError("functional", f"functional for N={f.parties} applied to a {state.parties}-party state")
    n = f.parties
    engine = CorrelatorEngine(state)
    scale = f.scale

    def objective(x):
        return -abs(f.evaluate(engine.table(x))) * scale

    opts = {"xatol": xatol, "fatol": fatol, "maxiter": 4000 * n, "maxfev": 4000 * n, "adaptive": True}
    best_val, best_x = -math.inf, None
    values = []
    converged = 0
    nfev = 0
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        res = minimize(objective, rng.uniform(0, 2 * np.pi, 4 * n), method="Nelder-Mead", options=opts)
        nfev += res.nfev
        converged += bool(res.success)
        values.append(-res.fun)
        if -res.fun > best_val:
            best_val, best_x = -res.fun, res.x
    if polish and best_x is not None:
        res = minimize(objective, best_x, method="Nelder-Mead", options=opts)
        nfev += res.nfev
        if -res.fun >= best_val:
            best_x = res.x
    settings = np.mod(np.asarray(best_x).reshape(n, 2, 2), 2 * np.pi)
    raw = bell_value(f, state, settings, raw=True)
    return OptimizationResult(
        value=abs(f.normalized(raw)),
        raw_value=raw,
        settings=settings,
        bound=f.target_bound,
        raw_bound=f.classical_bound,
        restarts=restarts,
        seed=seed,
        restart_values=values,
        converged=converged,
        evaluations=nfev,
    )


# ----------------------------------------------------------------------------
# superselection


def _totals_labels(basis):
    return [basis.party_totals(t) for t in basis.tuples]


def ssr_project(x, basis=None):
    """Remove coherences between different per-party particle numbers.

    Accepts a FockState or a density matrix together with its FockBasis.
    Returns the block-diagonal density matrix over the basis tuples.
    """
    if isinstance(x, FockState):
        basis = x.basis
        m = np.outer(x.amplitudes, x.amplitudes.conj())
    else:
        if basis is None:
            raise ValidationError("grading", "a FockBasis is required for a density-matrix input")
        m = x.data if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)
    labels = _totals_labels(basis)
    keys = {lab: i for i, lab in enumerate(sorted(set(labels)))}
    ids = np.array([keys[lab] for lab in labels])
    mask = ids[:, None] == ids[None, :]
    return DensityMatrix(np.where(mask, m, 0), (len(basis),), check=False)


@dataclass
class NoGoReport:
    parties: int
    total_particles: int
    blocks: list
    holds: bool


def nogo_structure_check(state, atol=1e-14):
    """Check that every superselection block leaves some party empty.

    With fewer particles than parties each block of the projected state has
    a vacuum party, so it factorises across that party. Each block is listed
    as ``(party_totals, weight, empty_parties)``.
    """
    n, m = state.parties, state.total
    if m >= n:
        raise ValidationError("precondition", f"M={m} particles for N={n} parties: the vacuum argument needs M < N")
    weights = {}
    for t, a in state.support(atol):
        tot = state.basis.party_totals(t)
        weights[tot] = weights.get(tot, 0.0) + abs(a) ** 2
    blocks = []
    for tot in sorted(weights):
        empty = [k for k, x in enumerate(tot) if x == 0]
        blocks.append((tot, weights[tot], empty))
    return NoGoReport(n, m, blocks, all(b[2] for b in blocks))
