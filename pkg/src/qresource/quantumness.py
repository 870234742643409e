"""Quantumness of operations: the largest relative entropy between applying a
channel before or after einselection, and its split into generating and
distinguishing power."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .channels import compose, depolarizing, simplify
from .infotheory import kernel_overlap, rel_entropy_array
from .qcore import DEFAULT_TOL, DensityMatrix, PureState, ValidationError, random_pure

INFINITY_MARGIN = 1e-6
OBJECTIVE_CAP = 1e6
SCREEN_FACTOR = 8


@dataclass
class QuantumnessResult:
    value: float
    state: PureState
    distinguishing: float
    generating: float
    diagnostics: dict = field(default_factory=dict)


def _check(channel, spec):
    if channel.d_in != channel.d_out or channel.d_in != spec.d:
        raise ValidationError("dims", "channel and einselection must act on the same space")


def _orderings(channel, spec, m):
    after = spec.apply_array(channel.apply_array(m))
    before = channel.apply_array(spec.apply_array(m))
    return before, after


def noncommutativity(channel, spec, rho, tol=None):
    """S(S(Gamma(rho)) || Gamma(S(rho))), infinite on support mismatch."""
    _check(channel, spec)
    m = _matrix(rho)
    before, after = _orderings(channel, spec, m)
    return rel_entropy_array(before, after, tol)


def decompose(channel, spec, rho, tol=None):
    """Split the noncommutativity into ``(distinguishing, generating)``.

    distinguishing = S(Gamma S Gamma rho || Gamma S rho)
    generating     = S(S Gamma rho || Gamma S Gamma rho)
    """
    _check(channel, spec)
    m = _matrix(rho)
    before, after = _orderings(channel, spec, m)
    both = spec.apply_array(before)
    return rel_entropy_array(both, after, tol), rel_entropy_array(before, both, tol)


def _matrix(rho):
    if isinstance(rho, PureState):
        return np.outer(rho.data, rho.data.conj())
    if isinstance(rho, DensityMatrix):
        return rho.data
    a = np.asarray(rho, dtype=complex)
    return np.outer(a, a.conj()) if a.ndim == 1 else a


def _fast_rel_entropy(r, s, supp_tol):
    """Relative entropy for already-valid states; both spectra in one call."""
    w, v = np.linalg.eigh(np.stack([r, s]))
    wr = w[0][w[0] > 0]
    ws, vs = w[1], v[1]
    rd = np.einsum("ji,jk,ki->i", vs.conj(), r, vs).real
    supp = ws > supp_tol
    if rd[~supp].sum() > supp_tol:
        return math.inf
    return float(np.sum(wr * np.log2(wr)) - np.sum(rd[supp] * np.log2(ws[supp])))


def _vector(x, d):
    v = x[:d] + 1j * x[d:]
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.eye(d)[0].astype(complex)


def infinite_candidates(channel, spec, tol=None):
    """Pure states with infinite noncommutativity, found in closed form.

    Applies when every subsystem is dephased in a rank-one pointer basis.
    In pointer coordinates the value is infinite exactly when, for some
    pointer state j, the input lies in the null space V_j of the rows <j|K
    (so Gamma S rho has no weight on j) while S Gamma rho still populates j.
    For each j and each pointer state alpha with <j|S(|alpha><alpha|)|j> > 0
    the projection of alpha onto V_j, if nonzero, is such a state.

    Returns a list of ``(overlap, state)`` sorted by decreasing kernel
    overlap; empty when the value is finite for every input.
    """
    tol = tol or DEFAULT_TOL
    _check(channel, spec)
    if not spec.rank_one:
        raise ValidationError("einselection", "closed-form detection needs rank-one pointer projectors")
    u = spec.unitary()
    d = spec.d
    kp = np.einsum("ij,kjl,lm->kim", u.conj().T, channel.kraus, u)
    found = []
    for j in range(d):
        rows = kp[:, j, :]
        t = np.sum(np.abs(rows) ** 2, axis=0)
        _, s, vh = np.linalg.svd(rows)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
        null = vh[rank:].conj().T
        if null.shape[1] == 0:
            continue
        for alpha in np.flatnonzero(t > tol.tol_supp):
            v = null @ null[alpha].conj()
            n = np.linalg.norm(v)
            if n < 1e-8:
                continue
            psi = u @ (v / n)
            before, after = _orderings(channel, spec, np.outer(psi, psi.conj()))
            found.append((kernel_overlap(before, after, tol), psi))
    found.sort(key=lambda item: -item[0])
    return found


def _grows_under_perturbation(channel, spec, psi, seed, tol):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 997]))
    eta = rng.normal(size=psi.size) + 1j * rng.normal(size=psi.size)
    eta -= psi * np.vdot(psi, eta)
    vals = []
    for eps in (1e-2, 1e-3, 1e-4):
        v = psi + eps * eta / np.linalg.norm(eta)
        v /= np.linalg.norm(v)
        vals.append(noncommutativity(channel, spec, v, tol))
    finite = [x for x in vals if math.isfinite(x)]
    return all(b >= a for a, b in zip(finite, finite[1:])), vals


def _infinite_result(channel, spec, psi, overlap, seed, tol, trigger):
    grows, trail = _grows_under_perturbation(channel, spec, psi, seed, tol)
    if overlap <= INFINITY_MARGIN or not grows:
        return None
    state = PureState(psi, spec.dims, check=False)
    dist, gen = decompose(channel, spec, psi, tol)
    return QuantumnessResult(
        value=math.inf,
        state=state,
        distinguishing=dist,
        generating=gen,
        diagnostics={"infinite": True, "trigger": trigger, "kernel_overlap": overlap, "perturbation_values": trail},
    )


def W(channel, spec, restarts=32, seed=0, tol=None):
    """Supremum over pure inputs of the noncommutativity with einselection.

    Infinite values are detected in closed form for rank-one einselection
    and otherwise by kernel overlap above ``1e-6`` during the search; in both
    cases the candidate is confirmed by checking that the value grows as the
    candidate is approached. Finite maxima come from multistart Nelder-Mead
    on 2d real coordinates: a pool of ``8 * restarts`` random pure states,
    each seeded from ``(seed, index)``, is screened and the best
    ``restarts`` of them are refined, followed by a polishing run from the
    best point.
    """
    tol = tol or DEFAULT_TOL
    _check(channel, spec)
    if len(channel.kraus) > channel.d_in**2:
        channel = simplify(channel, tol)
    d = spec.d
    if spec.rank_one:
        for overlap, psi in infinite_candidates(channel, spec, tol):
            res = _infinite_result(channel, spec, psi, overlap, seed, tol, "closed form")
            if res is not None:
                return res

    hits = []

    def objective(x):
        psi = _vector(x, d)
        before, after = _orderings(channel, spec, np.outer(psi, psi.conj()))
        val = _fast_rel_entropy(before, after, tol.tol_supp)
        if not math.isfinite(val):
            hits.append((kernel_overlap(before, after, tol), psi))
            return -OBJECTIVE_CAP
        return -val

    best_val, best_x = -math.inf, None
    converged = True
    nfev = 0
    opts = {"xatol": 1e-10, "fatol": 1e-13, "maxiter": 3000 * d, "maxfev": 3000 * d, "adaptive": True}
    # screen a pool of random inputs and refine the most promising ones
    pool = [random_pure(d, np.random.SeedSequence([seed, r])).data for r in range(SCREEN_FACTOR * restarts)]
    pool = [np.concatenate([v.real, v.imag]) for v in pool]
    scores = np.array([objective(x) for x in pool])
    starts = [pool[i] for i in np.argsort(scores, kind="stable")[:restarts]]
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead", options=opts)
        nfev += res.nfev
        converged &= bool(res.success)
        if -res.fun > best_val:
            best_val, best_x = -res.fun, res.x
    res = minimize(objective, best_x, method="Nelder-Mead", options=opts)
    nfev += res.nfev
    if -res.fun >= best_val:
        best_val, best_x = -res.fun, res.x

    if hits:
        hits.sort(key=lambda item: -item[0])
        overlap, psi = hits[0]
        out = _infinite_result(channel, spec, psi, overlap, seed, tol, "search")
        if out is not None:
            out.diagnostics.update(restarts=restarts, evaluations=nfev)
            return out

    psi = _vector(best_x, d)
    value = noncommutativity(channel, spec, psi, tol)
    diagnostics = {"infinite": False, "restarts": restarts, "evaluations": nfev, "converged": converged}
    if not math.isfinite(value) or value >= OBJECTIVE_CAP:
        diagnostics["near_singular"] = True
    dist, gen = decompose(channel, spec, psi, tol)
    return QuantumnessResult(value, PureState(psi, spec.dims, check=False), dist, gen, diagnostics)


def generating_power(channel, spec, restarts=32, seed=0, tol=None):
    """W of the channel preceded by einselection; always finite."""
    return W(compose(spec.channel(), channel), spec, restarts, seed, tol)


def distinguishing_power(channel, spec, restarts=32, seed=0, tol=None):
    """W of the channel followed by einselection."""
    return W(compose(channel, spec.channel()), spec, restarts, seed, tol)


def classify_unitary(u, basis=None, atol=1e-9):
    """'classical' if ``u`` permutes the pointer basis up to phases, else 'nonclassical'."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError("unitary", "a square matrix is required")
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if dev > 1e-9:
        raise ValidationError("unitary", f"operator is not unitary (deviation {dev:.3e})")
    if basis is not None:
        b = basis.unitary() if hasattr(basis, "unitary") else np.asarray(basis, dtype=complex)
        u = b.conj().T @ u @ b
    mags = np.abs(u)
    ones = np.abs(mags - 1) <= atol
    zeros = mags <= atol
    ok = np.all(ones.sum(axis=0) == 1) and np.all(ones | zeros)
    return "classical" if ok else "nonclassical"


def regularized_ratio(s1, s2, spec, mu_grid, restarts=32, seed=0, tol=None):
    """Ratio W(L_mu S1) / W(L_mu S2) along ``mu_grid`` with depolarizing L_mu.

    A straight line in (1 - mu) is fitted to the ratios and evaluated at
    mu = 1. Returns a dict with ``mu``, ``w1``, ``w2``, ``ratio``,
    ``extrapolated`` and ``residual`` (RMS of the fit).
    """
    mus = np.asarray(mu_grid, dtype=float)
    w1, w2 = [], []
    for mu in mus:
        dep = depolarizing(mu, spec.dims)
        a = W(compose(s1, dep), spec, restarts, seed, tol).value
        b = W(compose(s2, dep), spec, restarts, seed, tol).value
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValidationError("regularisation", f"W is infinite at mu={mu}")
        if abs(b) < 1e-12:
            raise ValidationError("regularisation", f"denominator vanishes at mu={mu}")
        w1.append(a)
        w2.append(b)
    ratio = np.array(w1) / np.array(w2)
    x = 1 - mus
    if len(mus) >= 2:
        slope, intercept = np.polyfit(x, ratio, 1)
        resid = float(np.sqrt(np.mean((slope * x + intercept - ratio) ** 2)))
    else:
        intercept, resid = float(ratio[0]), math.nan
    return {"mu": mus, "w1": np.array(w1), "w2": np.array(w2), "ratio": ratio,
            "extrapolated": float(intercept), "residual": resid}

