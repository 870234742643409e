"""Named experiments producing result rows for the command-line runner.

Every experiment takes an :class:`ExperimentConfig` and returns a
:class:`RunRecord` whose rows are ordered dicts sharing one column list.
Rows always carry the seed and restart budget that produced them.
"""

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .channels import (
    EinselectionSpec,
    PhaseDistribution,
    amplitude_damping,
    bec_map,
    compose,
    depolarizing,
    g_from_phase_dist,
    gate,
    named_channel,
    phase_damping,
)
from .discord import discord, grid_minimum
from .entanglement import concurrence, quality_factor
from .infotheory import coding_capacity
from .io import build_channel, is_fock_document, load_channel_spec, load_state, _read_json
from .nonlocality import (
    BellFunctional,
    beamsplitter_matrix,
    closed_form_outputs,
    dicke_state,
    ghz_dual_rail,
    local_basis,
    nogo_structure_check,
    optimize_settings,
    two_copies,
    w_state,
)
from .qcore import DEFAULT_TOL, DensityMatrix, Tolerances, ValidationError, maximally_entangled
from .quantumness import W, distinguishing_power, generating_power


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    restarts: int | None = None
    tol_supp: float | None = None
    out: str | None = None
    format: str = "csv"
    timing: bool = True
    params: dict = field(default_factory=dict)

    def tolerances(self):
        if self.tol_supp is None:
            return DEFAULT_TOL
        return Tolerances(tol_supp=self.tol_supp)

    def budget(self, default):
        return default if self.restarts is None else int(self.restarts)

    def param(self, name, default=None):
        v = self.params.get(name)
        return default if v is None else v


@dataclass
class RunRecord:
    config: dict
    version: str
    columns: list
    rows: list
    wall_time_s: float
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.start = time.perf_counter()

    def lap(self):
        now = time.perf_counter()
        dt, self.start = now - self.start, now
        return dt if self.enabled else None


def _as_list(x):
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return list(x)
    return [x]


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


# ----------------------------------------------------------------------------
# Fock states from flags or files


def fock_state_from_config(cfg, parties=None):
    """Fock state described by ``--state``, ``--parties``, ``--excitations``, ``--copies``."""
    src = cfg.param("state", "w")
    n = int(parties if parties is not None else _as_list(cfg.param("parties", [3]))[0])
    copies = int(cfg.param("copies", 2))
    if src == "w":
        base = w_state(n)
    elif src == "dicke":
        base = dicke_state(n, int(cfg.param("excitations", max(1, n // 2))))
    elif src in ("ghz-dualrail", "ghz_dualrail", "ghz"):
        return ghz_dual_rail(n)
    else:
        doc = _read_json(src)
        if not is_fock_document(doc):
            raise ValidationError("schema", f"{src} is not a Fock-state file")
        return load_state(doc)
    if copies == 2:
        return two_copies(base)
    if copies != 1:
        raise ValidationError("copies", "only one or two copies are supported")
    return base


def _functional_for(kind, n):
    if kind == "svetlichny" and n != 3:
        kind = "bbgl"
    if kind == "chsh" and n != 2:
        raise ValidationError("functional", "CHSH needs two parties")
    return BellFunctional(kind, n)


def _bell_row(f, state, cfg, restarts, clock):
    res = optimize_settings(f, state, restarts=restarts, seed=cfg.seed)
    return res, {
        "N": f.parties,
        "functional": f.kind,
        "value": res.value,
        "raw_value": res.raw_value,
        "bound": res.bound,
        "raw_bound": res.raw_bound,
        "max_restart_value": max(res.restart_values),
        "converged": res.converged,
        "restarts": restarts,
        "seed": cfg.seed,
        "wall_time_s": clock.lap(),
    }


# ----------------------------------------------------------------------------
# experiments


def exp_table5_2(cfg):
    """Best nongenuine violation for two copies of W-states."""
    parties = [int(x) for x in _as_list(cfg.param("parties", [2, 3, 4]))]
    kind = cfg.param("functional", "mabk")
    restarts = cfg.budget(50)
    clock = _Clock(cfg.timing)
    rows, warnings = [], []
    for n in parties:
        state = fock_state_from_config(cfg, n) if cfg.param("state") else two_copies(w_state(n))
        res, row = _bell_row(_functional_for(kind, n), state, cfg, restarts, clock)
        if res.converged < restarts:
            warnings.append(f"N={n}: {restarts - res.converged} restarts hit the evaluation limit")
        rows.append(row)
    cols = ["N", "functional", "value", "raw_value", "bound", "raw_bound", "converged", "restarts", "seed", "wall_time_s"]
    return cols, rows, warnings, {}


def exp_table5_3(cfg):
    """Genuine and nongenuine values for two copies of Dicke states."""
    cases = cfg.param("cases")
    if cases is None:
        parties = _as_list(cfg.param("parties"))
        if parties:
            m = cfg.param("excitations")
            cases = [(int(n), int(m) if m is not None else max(1, int(n) // 2)) for n in parties]
        else:
            cases = [(3, 1), (4, 2)]
    restarts = cfg.budget(50)
    clock = _Clock(cfg.timing)
    rows, warnings = [], []
    for n, m in cases:
        state = two_copies(dicke_state(n, m))
        for kind in ("mabk", "svetlichny" if n == 3 else "bbgl"):
            res, row = _bell_row(_functional_for(kind, n), state, cfg, restarts, clock)
            genuine = kind != "mabk"
            row = {"N": n, "M": m, **{k: v for k, v in row.items() if k != "N"},
                   "genuine": genuine,
                   "within_bound": (max(res.restart_values) <= res.bound + 1e-6) if genuine else None}
            if res.converged < restarts:
                warnings.append(f"N={n}, M={m}, {kind}: {restarts - res.converged} restarts hit the evaluation limit")
            rows.append(row)
    cols = ["N", "M", "functional", "genuine", "value", "raw_value", "bound", "raw_bound",
            "max_restart_value", "within_bound", "converged", "restarts", "seed", "wall_time_s"]
    return cols, rows, warnings, {}


def exp_table5_1_check(cfg):
    """Compare numerically built beamsplitter outputs with hand-expanded forms."""
    samples = int(cfg.param("samples", 20))
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 51]))
    angles = rng.uniform(0, 2 * np.pi, size=(samples, 2))
    basis = local_basis(2)
    dev = {b: 0.0 for b in basis}
    dev_no_phase = 0.0
    for th, ph in angles:
        v = beamsplitter_matrix(th, ph, 2)
        ref = closed_form_outputs(th, ph)
        for i, b in enumerate(basis):
            dev[b] = max(dev[b], float(np.max(np.abs(v[:, i] - ref[b]))))
        # the (1,1) row with the |0,2> coefficient lacking its e^{2 i phi}
        alt = ref[(1, 1)].copy()
        alt[5] = -math.sqrt(2) * math.cos(th) * math.sin(th)
        dev_no_phase = max(dev_no_phase, float(np.max(np.abs(v[:, 4] - alt))))
    rows = []
    for b in basis:
        rows.append({"n_out": b[0], "m_out": b[1], "max_abs_dev": dev[b],
                     "max_abs_dev_without_phase": dev_no_phase if b == (1, 1) else None,
                     "samples": samples, "restarts": 0, "seed": cfg.seed})
    cols = ["n_out", "m_out", "max_abs_dev", "max_abs_dev_without_phase", "samples", "restarts", "seed"]
    return cols, rows, [], {}


def _two_flat_alt(w, delta):
    return 4 * w / math.pi * math.sin(w / 2) * math.cos(w / 2 + delta / 2)


def exp_fig4_4(cfg):
    """|g| of reference-phase distributions: wrapped Gaussians and two flat pieces."""
    sigmas = [float(s) for s in _as_list(cfg.param("sigma", _grid(0.05, 2.0, 0.05)))]
    widths = [float(x) for x in _as_list(cfg.param("widths", _grid(0.1, math.pi, 0.1)))]
    deltas = [float(x) for x in _as_list(cfg.param("deltas", [0.0, math.pi / 2]))]
    rows = []
    for s in sigmas:
        g = abs(g_from_phase_dist(PhaseDistribution("wrapped_normal", sigma=s)))
        rows.append({"family": "wrapped_normal", "sigma": s, "w": None, "delta": None,
                     "g_abs": g, "reference": math.exp(-s * s / 2), "alt_formula": None})
    for d in deltas:
        for w in widths:
            g = abs(g_from_phase_dist(PhaseDistribution("two_flat", w=w, delta=d)))
            ref = 2 / w * math.sin(w / 2) * abs(math.cos(d / 2))
            rows.append({"family": "two_flat", "sigma": None, "w": w, "delta": d,
                         "g_abs": g, "reference": ref, "alt_formula": _two_flat_alt(w, d)})
    for r in rows:
        r.update(restarts=0, seed=cfg.seed)
    cols = ["family", "sigma", "w", "delta", "g_abs", "reference", "alt_formula", "restarts", "seed"]
    return cols, rows, [], {}


def exp_quality_factors(cfg):
    """Quality factors of damping channels and of the condensate-reference map."""
    gammas = [float(x) for x in _as_list(cfg.param("gamma", [0.25, 0.5, 0.75]))]
    sigmas = [float(x) for x in _as_list(cfg.param("sigma", [0.1, 0.5, 1.0]))]
    tol = cfg.tolerances()
    rows = []
    for g in gammas:
        rows.append({"channel": "amplitude_damping", "parameter": g,
                     "Q": quality_factor(amplitude_damping(g), tol), "expected": math.sqrt(1 - g)})
    for g in gammas:
        rows.append({"channel": "phase_damping", "parameter": g,
                     "Q": quality_factor(phase_damping(g), tol), "expected": math.sqrt(1 - g)})
    for s in sigmas:
        gval = g_from_phase_dist(PhaseDistribution("wrapped_normal", sigma=s))
        rows.append({"channel": "bec_map", "parameter": s,
                     "Q": quality_factor(bec_map(gval, math.pi / 2), tol), "expected": math.exp(-s * s / 2)})
    for r in rows:
        r.update(abs_diff=abs(r["Q"] - r["expected"]), restarts=0, seed=cfg.seed)
    cols = ["channel", "parameter", "Q", "expected", "abs_diff", "restarts", "seed"]
    return cols, rows, [], {}


def _cnot_pm_family(mu):
    return compose(gate("cnot_pm"), depolarizing(mu, (2, 2)))


def exp_fig6_2(cfg):
    """Generating and distinguishing power of the depolarised |+->-controlled CNOT."""
    mus = [float(x) for x in _as_list(cfg.param("mu", _grid(0.3, 0.9, 0.01)))]
    restarts = cfg.budget(8)
    tol = cfg.tolerances()
    base = cfg.param("channel")
    spec_g = EinselectionSpec.computational((2, 2))
    rows, warnings = [], []
    for mu in mus:
        if base:
            ch = compose(build_channel(load_channel_spec(base)), depolarizing(mu, (2, 2)))
            spec_g = EinselectionSpec.computational(ch.dims_in)
        else:
            ch = _cnot_pm_family(mu)
        gen = generating_power(ch, spec_g, restarts, cfg.seed, tol)
        dist = distinguishing_power(ch, spec_g, restarts, cfg.seed, tol)
        full = W(ch, spec_g, restarts, cfg.seed, tol)
        ok = all(r.diagnostics.get("converged", True) for r in (gen, dist, full))
        if not ok:
            warnings.append(f"mu={mu}: some restarts hit the evaluation limit")
        rows.append({"mu": mu, "generating_power": gen.value, "distinguishing_power": dist.value,
                     "W": full.value, "converged": ok, "restarts": restarts, "seed": cfg.seed})
    crossing = _crossing(rows)
    cols = ["mu", "generating_power", "distinguishing_power", "W", "converged", "restarts", "seed"]
    return cols, rows, warnings, {"crossing_mu": crossing}


def _crossing(rows):
    """Linear interpolation of the first sign change of generating - distinguishing."""
    diffs = [(r["mu"], r["generating_power"] - r["distinguishing_power"]) for r in rows]
    for (m0, d0), (m1, d1) in zip(diffs, diffs[1:]):
        if d0 == 0:
            return m0
        if d0 * d1 < 0:
            return m0 + (m1 - m0) * d0 / (d0 - d1)
    return None


def werner_channel_state(mu):
    ch = depolarizing(mu, (2, 2))
    return ch, ch.apply_array(maximally_entangled(2).density().data)


def exp_fig6_5(cfg):
    """Capacity gap, discord and concurrence of depolarised maximally entangled states."""
    mus = [float(x) for x in _as_list(cfg.param("mu", _grid(0.0, 1.0, 0.05)))]
    restarts = cfg.budget(8)
    tol = cfg.tolerances()
    spec = EinselectionSpec.computational((2, 2), identity_on=(0,))
    phi = maximally_entangled(2).density().data
    rows = []
    for mu in mus:
        ch = depolarizing(mu, (2, 2))
        rho = DensityMatrix(ch.apply_array(phi), (2, 2), check=False)
        f_q = coding_capacity(rho, [0], tol)
        f_c = coding_capacity(DensityMatrix(ch.apply_array(spec.apply_array(phi)), (2, 2), check=False), [0], tol)
        d = discord(rho, restarts=restarts, seed=cfg.seed, tol=tol)
        rows.append({"mu": mu, "F_q": f_q, "F_c": f_c, "discord_gap": f_q - f_c, "discord": d.value,
                     "concurrence": concurrence(rho, tol), "restarts": restarts, "seed": cfg.seed})
    cols = ["mu", "F_q", "F_c", "discord_gap", "discord", "concurrence", "restarts", "seed"]
    return cols, rows, [], {}


def exp_discord(cfg):
    """Discord of a two-party state with a qubit measured on the second side."""
    restarts = cfg.budget(8)
    tol = cfg.tolerances()
    src = cfg.param("state")
    if src:
        rho = load_state(src)
        label = str(src)
    else:
        mu = float(_as_list(cfg.param("mu", [0.5]))[0])
        _, m = werner_channel_state(mu)
        rho = DensityMatrix(m, (2, 2), check=False)
        label = f"werner(mu={mu})"
    res = discord(rho, restarts=restarts, seed=cfg.seed, tol=tol)
    grid = grid_minimum(rho, tol=tol)[0] if rho.dims[-1] == 2 else None
    row = {"state": label, "discord": res.value, "grid_minimum_16x32": res.grid_minimum,
           "grid_minimum_64x32": grid, "converged": res.converged, "restarts": restarts, "seed": cfg.seed}
    warnings = [] if res.converged else ["optimizer did not converge on every restart"]
    return list(row), [row], warnings, {}


def exp_bell_optimize(cfg):
    """Optimise one Bell functional for one Fock state."""
    restarts = cfg.budget(50)
    state = fock_state_from_config(cfg)
    f = _functional_for(cfg.param("functional", "mabk"), state.parties)
    clock = _Clock(cfg.timing)
    res, row = _bell_row(f, state, cfg, restarts, clock)
    row["settings"] = " ".join(f"{x:.12g}" for x in res.settings.reshape(-1))
    warnings = [] if res.converged == restarts else [f"{restarts - res.converged} restarts hit the evaluation limit"]
    cols = ["N", "functional", "value", "raw_value", "bound", "raw_bound", "max_restart_value",
            "converged", "settings", "restarts", "seed", "wall_time_s"]
    return cols, [row], warnings, {}


def exp_quantumness(cfg):
    """W of a channel with einselection in the computational basis of every subsystem."""
    restarts = cfg.budget(32)
    tol = cfg.tolerances()
    src = cfg.param("channel")
    if src:
        ch = build_channel(load_channel_spec(src))
        label = str(src)
    else:
        ch = named_channel("hadamard")
        label = "hadamard"
    spec = EinselectionSpec.computational(ch.dims_in)
    res = W(ch, spec, restarts, cfg.seed, tol)
    diag = res.diagnostics
    row = {"channel": label, "W": res.value, "distinguishing": res.distinguishing, "generating": res.generating,
           "infinite": bool(diag.get("infinite")), "kernel_overlap": diag.get("kernel_overlap"),
           "maximizer": " ".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in res.state.data),
           "restarts": restarts, "seed": cfg.seed}
    warnings = ["near-singular maximum"] if diag.get("near_singular") else []
    return list(row), [row], warnings, {}


def exp_nogo_check(cfg):
    """Superselection block structure of a Fock state with fewer particles than parties."""
    state = fock_state_from_config(cfg)
    rep = nogo_structure_check(state)
    rows = []
    for tot, weight, empty in rep.blocks:
        rows.append({"party_totals": " ".join(map(str, tot)), "weight": weight,
                     "empty_parties": " ".join(map(str, empty)), "has_empty_party": bool(empty),
                     "restarts": 0, "seed": cfg.seed})
    cols = ["party_totals", "weight", "empty_parties", "has_empty_party", "restarts", "seed"]
    return cols, rows, [], {"holds": rep.holds, "parties": rep.parties, "particles": rep.total_particles}


EXPERIMENTS = {
    "table5_2": exp_table5_2,
    "table5_3": exp_table5_3,
    "table5_1_check": exp_table5_1_check,
    "fig4_4": exp_fig4_4,
    "fig6_2": exp_fig6_2,
    "fig6_5": exp_fig6_5,
    "quality_factors": exp_quality_factors,
    "discord": exp_discord,
    "bell_optimize": exp_bell_optimize,
    "quantumness": exp_quantumness,
    "nogo_check": exp_nogo_check,
}


def check_config(cfg):
    if cfg.experiment not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ValidationError("experiment name", f"unknown experiment {cfg.experiment!r}; choose one of {known}")
    if cfg.format not in ("csv", "json"):
        raise ValidationError("output format", f"format must be csv or json, got {cfg.format!r}")
    if cfg.restarts is not None and int(cfg.restarts) < 1:
        raise ValidationError("restarts", "restart budget must be positive")


def run(cfg):
    """Validate the configuration and run the named experiment."""
    check_config(cfg)
    t0 = time.perf_counter()
    cols, rows, warnings, diagnostics = EXPERIMENTS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - t0
    return RunRecord(config=asdict(cfg), version=__version__, columns=cols, rows=rows,
                     wall_time_s=elapsed if cfg.timing else None, diagnostics=diagnostics, warnings=warnings)
