"""Quantum discord with measurements on the second subsystem, its
relative-entropy form, and the superdense-coding capacity gap."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .channels import EinselectionSpec, bloch_basis
from .infotheory import coding_capacity, entropy_array, rel_entropy_array
from .qcore import (
    DEFAULT_TOL,
    DensityMatrix,
    UnsupportedError,
    ValidationError,
    as_density,
    maximally_entangled,
    partial_trace_array,
    random_density,
)

GRID_THETA = 16
GRID_PHI = 32


@dataclass
class DiscordResult:
    value: float
    basis: np.ndarray
    restarts: int
    converged: bool
    grid_minimum: float
    heuristic: bool = False
    evaluations: int = 0
    notes: list = field(default_factory=list)


def _bipartite(rho):
    rho = as_density(rho)
    if len(rho.dims) != 2:
        raise ValidationError("dims", f"expected a bipartite state, got dims {list(rho.dims)}")
    return rho


def _check_basis(basis, d):
    b = np.asarray(basis, dtype=complex)
    if b.ndim == 2 and b.shape[0] != d and b.shape[1] == d:
        b = b.T
    if b.shape != (d, d):
        raise ValidationError("measurement basis", f"need {d} vectors of dimension {d}, got shape {b.shape}")
    dev = float(np.max(np.abs(b.conj().T @ b - np.eye(d))))
    if dev > 1e-10:
        raise ValidationError("measurement basis", f"basis is not orthonormal and complete (deviation {dev:.3e})")
    return b


def _conditional_states(m, da, db, b):
    t = m.reshape(da, db, da, db)
    # unnormalised A-states after outcome k on B: <b_k| rho |b_k>
    return np.einsum("xk,axcy,yk->kac", b.conj(), t, b)


def _measured_entropy(m, da, db, b, tol):
    total = 0.0
    for block in _conditional_states(m, da, db, b):
        p = float(np.trace(block).real)
        if p > tol.tol_supp:
            total += p * entropy_array(block / p, tol)
    return total


def measured_conditional_entropy(rho, basis, tol=None):
    """Average entropy of the first subsystem after measuring the second in ``basis``.

    ``basis`` has the measurement vectors as columns.
    """
    tol = tol or DEFAULT_TOL
    rho = _bipartite(rho)
    da, db = rho.dims
    return _measured_entropy(rho.data, da, db, _check_basis(basis, db), tol)


def _quantum_conditional(m, da, db, tol):
    return entropy_array(m, tol) - entropy_array(partial_trace_array(m, (da, db), [1]), tol)


def discord_zurek(rho, basis, tol=None):
    """Measured conditional entropy minus S(A|B) for a fixed measurement on B."""
    tol = tol or DEFAULT_TOL
    rho = _bipartite(rho)
    da, db = rho.dims
    b = _check_basis(basis, db)
    return _measured_entropy(rho.data, da, db, b, tol) - _quantum_conditional(rho.data, da, db, tol)


def _grid(n_theta, n_phi):
    thetas = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phis = np.arange(n_phi) * 2 * np.pi / n_phi
    return thetas, phis


def grid_minimum(rho, n_theta=64, n_phi=32, tol=None):
    """Brute-force minimum of the measured conditional entropy over a Bloch grid.

    Returns ``(value, theta, phi)`` with the discord value
    ``S_c - S(A|B)``.
    """
    tol = tol or DEFAULT_TOL
    rho = _bipartite(rho)
    da, db = rho.dims
    if db != 2:
        raise UnsupportedError("the Bloch grid needs a qubit on the measured side")
    cond = _quantum_conditional(rho.data, da, db, tol)
    thetas, phis = _grid(n_theta, n_phi)
    best = (math.inf, 0.0, 0.0)
    for th in thetas:
        for ph in phis:
            v = _measured_entropy(rho.data, da, db, bloch_basis(th, ph), tol)
            if v < best[0]:
                best = (v, th, ph)
    return best[0] - cond, best[1], best[2]


def discord(rho, restarts=8, seed=0, tol=None, heuristic=False):
    """Discord minimised over rank-one projective measurements on B.

    For a qubit on B the measurement is parametrised by Bloch angles: a
    16 x 32 grid supplies the best starting points and each is refined with
    Nelder-Mead. The returned value never exceeds the grid minimum.

    For larger B the search over random unitaries is only available with
    ``heuristic=True`` and carries no global guarantee.
    """
    tol = tol or DEFAULT_TOL
    rho = _bipartite(rho)
    da, db = rho.dims
    m = rho.data
    cond = _quantum_conditional(m, da, db, tol)
    if db != 2:
        if not heuristic:
            raise UnsupportedError("discord for a measured side larger than a qubit requires heuristic=True")
        return _discord_unitary_search(m, da, db, cond, restarts, seed, tol)

    def f(x):
        return _measured_entropy(m, da, db, bloch_basis(x[0], x[1]), tol)

    thetas, phis = _grid(GRID_THETA, GRID_PHI)
    vals = np.array([[f((th, ph)) for ph in phis] for th in thetas])
    order = np.argsort(vals, axis=None)
    grid_best = float(vals.flat[order[0]])
    best_x = (thetas[order[0] // GRID_PHI], phis[order[0] % GRID_PHI])
    best = grid_best
    converged = True
    nfev = vals.size
    for r in range(min(restarts, len(order))):
        i = order[r]
        x0 = np.array([thetas[i // GRID_PHI], phis[i % GRID_PHI]])
        res = minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        nfev += res.nfev
        converged &= bool(res.success)
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    return DiscordResult(
        value=best - cond,
        basis=bloch_basis(*best_x),
        restarts=restarts,
        converged=converged,
        grid_minimum=grid_best - cond,
        evaluations=nfev,
    )


def _unitary_from_params(x, d):
    h = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    h[iu] = x[:k] + 1j * x[k : 2 * k]
    h = h + h.conj().T
    h[np.diag_indices(d)] = x[2 * k : 2 * k + d]
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def _discord_unitary_search(m, da, db, cond, restarts, seed, tol):
    n = db * db

    def f(x):
        return _measured_entropy(m, da, db, _unitary_from_params(x, db), tol)

    best = math.inf
    best_x = np.zeros(n)
    converged = True
    nfev = 0
    for r in range(max(restarts, 1)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        x0 = rng.normal(scale=math.pi, size=n) if r else np.zeros(n)
        res = minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400 * n})
        nfev += res.nfev
        converged &= bool(res.success)
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    return DiscordResult(
        value=best - cond,
        basis=_unitary_from_params(best_x, db),
        restarts=restarts,
        converged=converged,
        grid_minimum=math.nan,
        heuristic=True,
        evaluations=nfev,
        notes=["heuristic search: no global optimality guarantee"],
    )


def einselected_discord(rho, spec, tol=None):
    """Relative entropy between a state and its einselected version."""
    rho = as_density(rho)
    if spec.d != rho.dim:
        raise ValidationError("dims", "einselection and state dimensions differ")
    return rel_entropy_array(rho.data, spec.apply_array(rho.data), tol)


def commutation_defect(channel, spec, seed=0, probes=None):
    """Largest ||S(Gamma(s)) - Gamma(S(s))||_max over random probe states."""
    d = channel.d_in
    if channel.d_out != d or spec.d != d:
        raise ValidationError("dims", "commutation check needs matching square dimensions")
    n = probes if probes is not None else d * d
    worst = 0.0
    for k in range(n):
        s = random_density(d, np.random.SeedSequence([seed, k])).data
        diff = channel.apply_array(spec.apply_array(s)) - spec.apply_array(channel.apply_array(s))
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def _default_state(channel):
    dims = channel.dims_in
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValidationError("dims", "the default maximally entangled input needs two equal subsystems")
    return maximally_entangled(dims[0]).density()


def capacity_gap(channel, spec, rho=None, tol=None, check_tol=1e-8):
    """F(S(rho)) - F(S(Gamma(rho))) with F the coding capacity of the first party.

    ``rho`` defaults to the maximally entangled state. The channel must
    commute with ``Gamma``; this is checked on random probe states.
    """
    defect = commutation_defect(channel, spec)
    if defect > check_tol:
        raise ValidationError("commutation", f"channel does not commute with the einselection (defect {defect:.3e})")
    rho = as_density(rho) if rho is not None else _default_state(channel)
    dims = channel.dims_out
    out_q = DensityMatrix(channel.apply_array(rho.data), dims, check=False)
    out_c = DensityMatrix(channel.apply_array(spec.apply_array(rho.data)), dims, check=False)
    return coding_capacity(out_q, [0], tol) - coding_capacity(out_c, [0], tol)


def discord_via_capacity(channel, rho=None, restarts=8, seed=0, tol=None):
    """Capacity of S(rho) minus the best capacity after one-sided einselection.

    The einselection acts on the receiver (second subsystem) in a qubit
    basis that is optimised over the Bloch sphere with the same grid-seeded
    multistart as :func:`discord`, but through coding capacities rather than
    conditional entropies.
    """
    tol = tol or DEFAULT_TOL
    rho = as_density(rho) if rho is not None else _default_state(channel)
    dims = channel.dims_out
    if len(dims) != 2 or dims[1] != 2:
        raise UnsupportedError("the receiver must be a qubit")

    def capacity_after(x):
        spec = EinselectionSpec(["identity", bloch_basis(x[0], x[1])], dims)
        out = channel.apply_array(spec.apply_array(rho.data))
        return coding_capacity(DensityMatrix(out, dims, check=False), [0], tol)

    thetas, phis = _grid(GRID_THETA, GRID_PHI)
    vals = np.array([[-capacity_after((th, ph)) for ph in phis] for th in thetas])
    order = np.argsort(vals, axis=None)
    best = float(vals.flat[order[0]])
    for r in range(min(restarts, len(order))):
        i = order[r]
        x0 = np.array([thetas[i // GRID_PHI], phis[i % GRID_PHI]])
        res = minimize(lambda x: -capacity_after(x), x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        best = min(best, float(res.fun))
    out_q = DensityMatrix(channel.apply_array(rho.data), dims, check=False)
    return coding_capacity(out_q, [0], tol) + best
