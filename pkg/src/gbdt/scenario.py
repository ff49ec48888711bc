"""Scenario files: JSON documents describing a triple, a family and a time grid.

Complex numbers are written as ``[re, im]`` (a bare number is read as a
real), matrices as lists of rows. Example::

    {
      "triple": {"explicit": {"A": [[[0, 1]]], "S0": [[[0.5, 0]]],
                              "Pi0": [[[1, 0]]], "c": [0]}},
      "family": {"kind": "ConstantHermitian", "matrices": [[[[1, 0]]]]},
      "time": {"t_end": 1.0, "steps": 1000},
      "box": {"bounds": [[0, 1]], "grid": [64]},
      "h_vector": [[1, 0]],
      "tolerances": {"unitarity": 1e-10},
      "seed": 0
    }

``triple`` holds exactly one of ``explicit`` ({A, S0, Pi0, c}),
``example1`` ({A, theta1, theta2, c}; constant signature Hamiltonians) or
``example2`` ({A, Pi0, beta, c}; rank-one orthoprojectors). For the two
example builders ``S(0)`` is derived and ``family`` may be omitted.
"""
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import (
    GbdtTriple,
    HamiltonianFamily,
    closed_form_example1,
    closed_form_example2,
    validate_triple,
)
from .errors import GbdtError, InvalidTripleError, ScenarioError
from .verification import BoxDomain, Tolerances

__all__ = [
    "Scenario",
    "emit_scenario",
    "load_scenario",
    "loads_scenario",
    "make_scenario",
    "parse_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
]

TRIPLE_KINDS = ("explicit", "example1", "example2")


# -- primitive codecs ------------------------------------------------------

def _scalar(x, where):
    if isinstance(x, bool):
        raise ScenarioError(f"{where}: expected a number or [re, im], got {x!r}")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if isinstance(x, list) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise ScenarioError(f"{where}: expected a number or [re, im], got {x!r}")


def _matrix(x, where):
    if not isinstance(x, list) or not x or not all(isinstance(row, list) for row in x):
        raise ScenarioError(f"{where}: expected a non-empty list of rows")
    width = len(x[0])
    rows = []
    for i, row in enumerate(x):
        if len(row) != width:
            raise ScenarioError(f"{where}[{i}]: row has {len(row)} entries, expected {width}")
        rows.append([_scalar(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)])
    m = np.array(rows, dtype=complex).reshape(len(rows), width)
    if not np.all(np.isfinite(m)):
        raise ScenarioError(f"{where}: non-finite entry")
    return m


def _vector(x, where):
    if not isinstance(x, list) or not x:
        raise ScenarioError(f"{where}: expected a non-empty list")
    return np.array([_scalar(v, f"{where}[{i}]") for i, v in enumerate(x)], dtype=complex)


def _reals(x, where):
    if not isinstance(x, list) or not x:
        raise ScenarioError(f"{where}: expected a non-empty list of reals")
    out = []
    for i, v in enumerate(x):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{where}[{i}]: expected a real number, got {v!r}")
        out.append(float(v))
    return out


def _enc_scalar(z):
    return [float(z.real), float(z.imag)]


def _enc_matrix(m):
    return [[_enc_scalar(z) for z in row] for row in np.asarray(m, dtype=complex)]


def _enc_vector(v):
    return [_enc_scalar(z) for z in np.asarray(v, dtype=complex)]


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return d[key]


# -- normalization -----------------------------------------------------------

def _norm_triple(raw):
    if not isinstance(raw, dict):
        raise ScenarioError("triple: expected an object")
    kinds = [k for k in TRIPLE_KINDS if k in raw]
    extra = set(raw) - set(TRIPLE_KINDS)
    if len(kinds) != 1 or extra:
        raise ScenarioError(
            f"triple: exactly one of {TRIPLE_KINDS} is required, got {sorted(raw)}")
    kind = kinds[0]
    body = raw[kind]
    w = f"triple.{kind}"
    if kind == "explicit":
        data = {
            "A": _matrix(_require(body, "A", w), f"{w}.A"),
            "S0": _matrix(_require(body, "S0", w), f"{w}.S0"),
            "Pi0": _matrix(_require(body, "Pi0", w), f"{w}.Pi0"),
        }
    elif kind == "example1":
        data = {"A": _matrix(_require(body, "A", w), f"{w}.A")}
        for key in ("theta1", "theta2"):
            val = body.get(key)
            data[key] = None if val is None else _matrix(val, f"{w}.{key}")
        if data["theta1"] is None and data["theta2"] is None:
            raise ScenarioError(f"{w}: theta1 and theta2 cannot both be empty")
    else:
        data = {
            "A": _matrix(_require(body, "A", w), f"{w}.A"),
            "Pi0": _matrix(_require(body, "Pi0", w), f"{w}.Pi0"),
            "beta": _matrix(_require(body, "beta", w), f"{w}.beta"),
        }
    data["c"] = _reals(_require(body, "c", w), f"{w}.c")
    return kind, data


def _norm_family(raw):
    if raw is None:
        return None
    kind = _require(raw, "kind", "family")
    if kind not in HamiltonianFamily.KINDS:
        raise ScenarioError(f"family.kind: unknown kind {kind!r}")
    if kind == "ConstantSignature":
        m1, m2 = _require(raw, "m1", "family"), _require(raw, "m2", "family")
        if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in (m1, m2)):
            raise ScenarioError("family: m1 and m2 must be non-negative integers")
        return {"kind": kind, "m1": m1, "m2": m2}
    if kind == "OrthoProjectors":
        return {"kind": kind, "beta": _matrix(_require(raw, "beta", "family"), "family.beta")}
    if kind == "ConstantHermitian":
        mats = _require(raw, "matrices", "family")
        if not isinstance(mats, list) or not mats:
            raise ScenarioError("family.matrices: expected a non-empty list")
        return {"kind": kind,
                "matrices": [_matrix(m, f"family.matrices[{k}]") for k, m in enumerate(mats)]}
    coeffs = _require(raw, "coefficients", "family")
    if not isinstance(coeffs, list) or not coeffs:
        raise ScenarioError("family.coefficients: expected a non-empty list")
    return {"kind": kind, "coefficients": [
        [_matrix(m, f"family.coefficients[{k}][{d}]") for d, m in enumerate(ck)]
        for k, ck in enumerate(coeffs)]}


def _encode_family(f):
    if f is None:
        return None
    out = {"kind": f["kind"]}
    if f["kind"] == "ConstantSignature":
        out.update(m1=f["m1"], m2=f["m2"])
    elif f["kind"] == "OrthoProjectors":
        out["beta"] = _enc_matrix(f["beta"])
    elif f["kind"] == "ConstantHermitian":
        out["matrices"] = [_enc_matrix(m) for m in f["matrices"]]
    else:
        out["coefficients"] = [[_enc_matrix(m) for m in ck] for ck in f["coefficients"]]
    return out


def _encode_triple(kind, data):
    body = {}
    for key, val in data.items():
        if key == "c":
            body[key] = [float(v) for v in val]
        elif val is None:
            body[key] = None
        else:
            body[key] = _enc_matrix(val)
    return {kind: body}


# -- scenario ----------------------------------------------------------------

@dataclass(eq=False)
class Scenario:
    triple_kind: str
    triple_data: dict
    family_data: Optional[dict]
    triple: GbdtTriple
    family: HamiltonianFamily
    t_end: float
    steps: int
    box: Optional[BoxDomain]
    h_vector: Optional[np.ndarray]
    tolerance_overrides: dict
    seed: int
    closed_form: object = None

    @property
    def tolerances(self):
        return Tolerances().override(**self.tolerance_overrides)

    @property
    def step(self):
        return self.t_end / self.steps

    def digest(self):
        blob = json.dumps(scenario_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _build_family(f, triple):
    kind = f["kind"]
    if kind == "ConstantSignature":
        return HamiltonianFamily.constant_signature(f["m1"], f["m2"], triple.r)
    if kind == "OrthoProjectors":
        return HamiltonianFamily.ortho_projectors(f["beta"])
    if kind == "ConstantHermitian":
        return HamiltonianFamily.constant_hermitian(f["matrices"])
    return HamiltonianFamily.polynomial_hermitian(f["coefficients"])


def scenario_from_dict(raw):
    """Build a :class:`Scenario` from decoded JSON.

    Structural problems raise :class:`ScenarioError`. The example builders
    also enforce their own hypotheses; the conditions on an explicit triple
    are only checked by :func:`parse_scenario` / :func:`~gbdt.engine.validate_triple`.
    """
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected a JSON object")
    known = {"triple", "family", "time", "box", "h_vector", "tolerances", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"scenario: unknown field(s) {sorted(unknown)}")
    kind, tdata = _norm_triple(_require(raw, "triple", "scenario"))
    fdata = _norm_family(raw.get("family"))

    time = _require(raw, "time", "scenario")
    t_end, steps = _require(time, "t_end", "time"), _require(time, "steps", "time")
    if isinstance(t_end, bool) or not isinstance(t_end, (int, float)) or not np.isfinite(t_end) \
            or t_end == 0:
        raise ScenarioError("time.t_end: expected a finite non-zero number")
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 12:
        raise ScenarioError("time.steps: expected an integer >= 12")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed: expected an integer")
    tol = raw.get("tolerances") or {}
    if not isinstance(tol, dict):
        raise ScenarioError("tolerances: expected an object")
    try:
        Tolerances().override(**tol)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"tolerances: {exc}") from exc

    try:
        closed = None
        if kind == "explicit":
            triple = GbdtTriple(tdata["A"], tdata["S0"], tdata["Pi0"], tdata["c"])
            if fdata is None:
                raise ScenarioError("family: required for an explicit triple")
            family = _build_family(fdata, triple)
        elif kind == "example1":
            closed, triple = closed_form_example1(tdata["A"], tdata["theta1"],
                                                  tdata["theta2"], tdata["c"])
            family = closed.family
        else:
            closed, triple = closed_form_example2(tdata["A"], tdata["Pi0"],
                                                  tdata["beta"], tdata["c"])
            family = closed.family
        if kind != "explicit" and fdata is not None:
            if fdata["kind"] != family.kind:
                raise ScenarioError(
                    f"family: {kind} implies {family.kind}, got {fdata['kind']}")
            given = _build_family(fdata, triple)
            if any(not np.allclose(a, b) for a, b in zip(given.evaluate(0.0), family.evaluate(0.0))):
                raise ScenarioError(f"family: does not match the Hamiltonians implied by {kind}")
        family.check_compatible(triple)

        box = None
        if raw.get("box") is not None:
            b = raw["box"]
            box = BoxDomain(_require(b, "bounds", "box"), _require(b, "grid", "box"))
            if box.r != triple.r:
                raise ScenarioError(f"box: {box.r} axes but r = {triple.r}")
        hvec = None
        if raw.get("h_vector") is not None:
            hvec = _vector(raw["h_vector"], "h_vector")
            if hvec.shape != (triple.n,):
                raise ScenarioError(f"h_vector: expected {triple.n} entries")
    except (ScenarioError, InvalidTripleError):
        raise
    except (GbdtError, ValueError, TypeError) as exc:
        raise ScenarioError(str(exc)) from exc

    return Scenario(kind, tdata, fdata, triple, family, float(t_end), steps, box, hvec,
                    {k: float(v) for k, v in tol.items()}, seed, closed)


def make_scenario(triple, family, t_end=1.0, steps=1000, box=None, h_vector=None,
                  tolerances=None, seed=0):
    """Scenario with an explicit triple, equivalent to one read from a file."""
    raw = {
        "triple": _encode_triple("explicit", {"A": triple.A, "S0": triple.S0,
                                              "Pi0": triple.Pi0, "c": triple.c}),
        "family": _encode_family({"kind": family.kind, **family.payload}),
        "time": {"t_end": float(t_end), "steps": int(steps)},
        "seed": int(seed),
    }
    if box is not None:
        raw["box"] = {"bounds": [list(b) for b in box.bounds], "grid": list(box.grid)}
    if h_vector is not None:
        raw["h_vector"] = _enc_vector(h_vector)
    if tolerances:
        raw["tolerances"] = dict(tolerances)
    return scenario_from_dict(raw)


def scenario_to_dict(s):
    out = {
        "triple": _encode_triple(s.triple_kind, s.triple_data),
        "time": {"t_end": float(s.t_end), "steps": int(s.steps)},
        "seed": int(s.seed),
    }
    fam = _encode_family(s.family_data)
    if fam is not None:
        out["family"] = fam
    if s.box is not None:
        out["box"] = {"bounds": [list(b) for b in s.box.bounds], "grid": list(s.box.grid)}
    if s.h_vector is not None:
        out["h_vector"] = _enc_vector(s.h_vector)
    if s.tolerance_overrides:
        out["tolerances"] = dict(sorted(s.tolerance_overrides.items()))
    return out


def emit_scenario(s):
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n"


def loads_scenario(text, source="<string>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(raw)


def load_scenario(path):
    """Parse a scenario file without checking the conditions on the triple."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    return loads_scenario(text, str(path))


def parse_scenario(path):
    """Parse and fully validate a scenario file."""
    s = load_scenario(path)
    validate_triple(s.triple)
    return s
