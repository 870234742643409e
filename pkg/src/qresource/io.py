"""JSON state and channel files.

State files hold a matrix ``{"dims": [...], "re": [[...]], "im": [[...]]}``
or a vector ``{"dims": [...], "re": [...], "im": [...]}``, optionally with
``"local_numbers"`` grading metadata. Fock-space states use
``{"fock": {"parties": N, "modes_per_party": m, "total": M},
"amplitudes": [{"occ": [...], "re": x, "im": y}, ...]}``.

Channel files hold one of ``{"kind": "kraus", "dims_in", "dims_out",
"ops"}``, ``{"kind": "<named>", "params": {...}}``, ``{"kind": "compose",
"stages": [...]}`` or ``{"kind": "tensor", "factors": [...]}``.
"""

import copy
import json
import math

import numpy as np

from .channels import QuantumChannel, compose, named_channel, tensor_channels
from .qcore import DEFAULT_TOL, DensityMatrix, PureState, ValidationError

STRUCTURAL_KINDS = ("kraus", "compose", "tensor")


def _read_json(path_or_doc):
    if isinstance(path_or_doc, dict):
        return path_or_doc
    try:
        with open(path_or_doc) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError("readable file", f"cannot read {path_or_doc}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("json syntax", f"{path_or_doc}: {exc}") from exc


def _complex_array(doc, what):
    if "re" not in doc:
        raise ValidationError("schema", f"{what} needs an 're' field")
    try:
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float) if "im" in doc else np.zeros_like(re)
    except (TypeError, ValueError) as exc:
        raise ValidationError("schema", f"{what} entries must be numbers") from exc
    if re.shape != im.shape:
        raise ValidationError("schema", f"{what}: 're' and 'im' shapes differ")
    return re + 1j * im


def encode_array(a):
    """``{"re": ..., "im": ...}`` lists for a complex array."""
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


# ----------------------------------------------------------------------------
# states


def is_fock_document(doc):
    return "fock" in doc


def _state_array(doc):
    a = _complex_array(doc, "state")
    if a.ndim not in (1, 2):
        raise ValidationError("schema", "state must be a vector or a matrix")
    dims = doc.get("dims", [a.shape[0]])
    if int(np.prod(dims)) != a.shape[0] or (a.ndim == 2 and a.shape[0] != a.shape[1]):
        raise ValidationError("dims", f"dims {dims} do not match array shape {a.shape}")
    return a, tuple(int(x) for x in dims)


def load_state(path_or_doc, check=True, tol=None):
    """Load a DensityMatrix, PureState or FockState, validating invariants."""
    doc = _read_json(path_or_doc)
    if is_fock_document(doc):
        return _load_fock(doc, check)
    a, dims = _state_array(doc)
    state = PureState(a, dims, tol, check) if a.ndim == 1 else DensityMatrix(a, dims, tol, check)
    if "local_numbers" in doc:
        _check_grading(doc["local_numbers"], dims)
    return state


def load_local_numbers(path_or_doc):
    doc = _read_json(path_or_doc)
    return doc.get("local_numbers")


def _check_grading(nums, dims):
    if len(nums) != len(dims):
        raise ValidationError("grading", "one local-number list per subsystem is required")
    for n, d in zip(nums, dims):
        if len(n) != d or any(not isinstance(x, int) or x < 0 for x in n):
            raise ValidationError("grading", "local numbers must be nonnegative integers aligned with the basis")


def state_document(state, local_numbers=None):
    """JSON-ready document for a DensityMatrix or PureState."""
    doc = {"dims": list(state.dims)}
    doc.update(encode_array(state.data))
    if local_numbers is not None:
        doc["local_numbers"] = [list(map(int, n)) for n in local_numbers]
    return doc


def _load_fock(doc, check):
    from .nonlocality import FockBasis, FockState

    f = doc["fock"]
    basis = FockBasis(int(f["parties"]), int(f.get("modes_per_party", 1)), int(f["total"]))
    amps = {}
    for entry in doc.get("amplitudes", []):
        occ = tuple(int(x) for x in entry["occ"])
        if sum(occ) != basis.total or len(occ) != basis.n_modes:
            raise ValidationError("particle number", f"occupation {list(occ)} is outside the declared sector")
        amps[occ] = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
    return FockState(basis, amps, check=check)


def fock_document(state):
    b = state.basis
    amps = [{"occ": list(t), "re": float(a.real), "im": float(a.imag)} for t, a in state.support()]
    return {"fock": {"parties": b.parties, "modes_per_party": b.modes_per_party, "total": b.total},
            "amplitudes": amps}


# ----------------------------------------------------------------------------
# channels


def build_channel(spec, check=True):
    """Construct a QuantumChannel from a channel-spec document."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("schema", "channel spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "kraus":
        ops = [_complex_array(op, "Kraus operator") for op in spec.get("ops", [])]
        return QuantumChannel(ops, spec.get("dims_in"), spec.get("dims_out"), check=check)
    if kind == "compose":
        stages = spec.get("stages") or []
        if not stages:
            raise ValidationError("schema", "compose needs at least one stage")
        return compose(*[build_channel(s, check) for s in stages])
    if kind == "tensor":
        factors = spec.get("factors") or []
        if not factors:
            raise ValidationError("schema", "tensor needs at least one factor")
        return tensor_channels(*[build_channel(s, check) for s in factors])
    try:
        return named_channel(kind, spec.get("params"))
    except KeyError as exc:
        raise ValidationError("schema", f"channel {kind!r} is missing parameter {exc}") from exc


def load_channel_spec(path_or_doc):
    """Channel-spec document, deep-copied so callers cannot alias the input."""
    return copy.deepcopy(_read_json(path_or_doc))


def load_channel(path_or_doc, check=True):
    return build_channel(load_channel_spec(path_or_doc), check)


def dump_channel_spec(spec, path=None):
    """Serialise a spec; reloading the text gives an equal document."""
    text = json.dumps(spec, sort_keys=True, indent=1)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def kraus_spec(channel):
    """Spec document holding the channel's Kraus operators verbatim."""
    return {"kind": "kraus", "dims_in": list(channel.dims_in), "dims_out": list(channel.dims_out),
            "ops": [encode_array(k) for k in channel.kraus]}


# ----------------------------------------------------------------------------
# validation reports


def _state_checks(doc, tol):
    if is_fock_document(doc):
        try:
            st = _load_fock(doc, check=False)
        except ValidationError as exc:
            return [(exc.invariant, False, str(exc))]
        dev = abs(np.linalg.norm(st.amplitudes) - 1)
        return [("particle number", True, f"{st.basis.total} particles in {st.parties} parties"),
                ("unit norm", dev <= tol.tol_norm, f"norm deviation {dev:.3e}")]
    try:
        a, dims = _state_array(doc)
    except ValidationError as exc:
        return [(exc.invariant, False, str(exc))]
    state = PureState(a, dims, check=False) if a.ndim == 1 else DensityMatrix(a, dims, check=False)
    out = list(state.checks(tol))
    if "local_numbers" in doc:
        try:
            _check_grading(doc["local_numbers"], dims)
            out.append(("grading", True, "local numbers aligned with basis"))
        except ValidationError as exc:
            out.append(("grading", False, str(exc)))
    return out


def _channel_checks(doc):
    try:
        ch = build_channel(doc, check=False)
    except ValidationError as exc:
        return [(exc.invariant, False, str(exc))]
    out = [("dims", True, f"{list(ch.dims_in)} -> {list(ch.dims_out)}, {len(ch.kraus)} Kraus operators")]
    finite = bool(np.all(np.isfinite(ch.kraus)))
    out.append(("finite", finite, "all entries finite" if finite else "non-finite entries"))
    defect = ch.tp_defect() if finite else math.inf
    out.append(("trace preservation", defect <= 1e-9, f"||sum K^dag K - I||_max = {defect:.3e}"))
    return out


def validate_file(path_or_doc, tol=None):
    """Report ``(kind, [(invariant, passed, detail), ...])`` for a state or channel file.

    No computation beyond the invariant checks is performed. Unreadable or
    malformed files raise :class:`ValidationError`.
    """
    tol = tol or DEFAULT_TOL
    doc = _read_json(path_or_doc)
    if not isinstance(doc, dict):
        raise ValidationError("schema", "top-level JSON value must be an object")
    if "kind" in doc:
        return "channel", _channel_checks(doc)
    return "state", _state_checks(doc, tol)
