"""Scenario files: problem data, reference process and optional certificate.

A scenario is a JSON object::

    {
      "name": "reach_point",
      "n": 1, "m": 1, "m1": 1, "m2": 0,
      "f": ["0"], "g": [["1"]],
      "cone": {"C2_generators": [], "C1_extra_generators": []},
      "target": {"type": "point", "t": 1.0, "x": [1.0]},
      "cost": "t",
      "K": "inf",
      "x0": [0.0],
      "h": 0.001,
      "box": {"lo": [-2.0], "hi": [2.0]},
      "reference": {"kind": "strict", "horizon": 1.0, "records": [[0.0, [1.0]]]},
      "certificate": {"p0": -1.0, "p_T": [0.0], "pi": 0.0, "lambda": 0.0},
      "max_degree": 3
    }

Extended references use records ``[breakpoint, w0, [w...]]``. ``h``,
``certificate`` and ``max_degree`` are optional.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import expr as ex
from .cone import ConeError, ControlCone
from .errors import InputError
from .fields import VectorField
from .metric import field_constants
from .process import (ControlSignal, ControlSystem, ExtendedProcess, StrictControl, simulate_extended,
                      simulate_strict)
from .target import FreeTarget, LevelSetTarget, PointTarget

log = logging.getLogger(__name__)

BOUNDEDNESS_LIMIT = 1e6


class SchemaError(InputError):
    def __init__(self, message: str, pointer: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ValidationError(InputError):
    def __init__(self, message: str, hypothesis: str):
        super().__init__(f"hypothesis {hypothesis}: {message}")
        self.hypothesis = hypothesis


_vec = {"type": "array", "items": {"type": "number"}}
_exprs = {"type": "array", "items": {"type": "string"}}

SCHEMA = {
    "type": "object",
    "required": ["n", "m", "m1", "m2", "f", "g", "target", "cost", "K", "x0", "box"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 0},
        "m1": {"type": "integer", "minimum": 0},
        "m2": {"type": "integer", "minimum": 0},
        "f": _exprs,
        "g": {"type": "array", "items": _exprs},
        "cone": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"C2_generators": {"type": "array", "items": _vec},
                           "C1_extra_generators": {"type": "array", "items": _vec}},
        },
        "target": {
            "oneOf": [
                {"type": "object", "required": ["type", "t", "x"], "additionalProperties": False,
                 "properties": {"type": {"const": "point"}, "t": {"type": "number"}, "x": _vec}},
                {"type": "object", "required": ["type", "constraints"], "additionalProperties": False,
                 "properties": {"type": {"const": "level_set"}, "constraints": _exprs}},
                {"type": "object", "required": ["type"], "additionalProperties": False,
                 "properties": {"type": {"const": "free"}}},
            ]
        },
        "cost": {"type": "string"},
        "K": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]},
        "x0": _vec,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "box": {"type": "object", "required": ["lo", "hi"], "additionalProperties": False,
                "properties": {"lo": _vec, "hi": _vec}},
        "reference": {
            "oneOf": [
                {"type": "object", "required": ["kind", "horizon", "records"], "additionalProperties": False,
                 "properties": {"kind": {"const": "extended"}, "horizon": {"type": "number", "exclusiveMinimum": 0},
                                "records": {"type": "array", "minItems": 1,
                                            "items": {"type": "array", "prefixItems": [{"type": "number"},
                                                                                        {"type": "number"}, _vec],
                                                      "minItems": 3, "maxItems": 3}}}},
                {"type": "object", "required": ["kind", "horizon", "records"], "additionalProperties": False,
                 "properties": {"kind": {"const": "strict"}, "horizon": {"type": "number", "exclusiveMinimum": 0},
                                "records": {"type": "array", "minItems": 1,
                                            "items": {"type": "array", "prefixItems": [{"type": "number"}, _vec],
                                                      "minItems": 2, "maxItems": 2}}}},
            ]
        },
        "certificate": {"type": "object", "required": ["p0", "p_T", "pi", "lambda"], "additionalProperties": False,
                        "properties": {"p0": {"type": "number"}, "p_T": _vec, "pi": {"type": "number"},
                                       "lambda": {"type": "number"}}},
        "max_degree": {"type": "integer", "minimum": 1, "maximum": 6},
    },
}

CONTROL_SCHEMA = SCHEMA["properties"]["reference"]


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def validate_schema(data, schema=SCHEMA) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _pointer(err.absolute_path))


@dataclass
class Scenario:
    name: str
    data: dict
    system: ControlSystem
    x0: np.ndarray
    target: PointTarget | LevelSetTarget | FreeTarget
    cost: ex.Expression
    K: float
    h: float | None
    box: tuple[np.ndarray, np.ndarray]
    max_degree: int = 3
    warnings: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m1(self) -> int:
        return self.system.cone.m1

    @property
    def digest(self) -> str:
        return scenario_hash(self.data)

    @property
    def has_reference(self) -> bool:
        return "reference" in self.data

    def reference_kind(self) -> str:
        self._need_reference()
        return self.data["reference"]["kind"]

    def _need_reference(self):
        if "reference" not in self.data:
            raise InputError(f"scenario {self.name!r} has no reference process")

    def reference_extended(self) -> ExtendedProcess:
        """The reference as an extended process (strict references are embedded)."""
        from .process import embed

        self._need_reference()
        ref = self.data["reference"]
        if ref["kind"] == "strict":
            return embed(self.reference_strict())
        c = control_from_json(ref, self.system.m)
        c.check_cone(self.system.cone)
        return simulate_extended(self.system, c, self.x0, self.h)

    def reference_strict(self):
        self._need_reference()
        ref = self.data["reference"]
        if ref["kind"] != "strict":
            raise InputError("reference is not a strict-sense control")
        c = control_from_json(ref, self.system.m)
        c.check_cone(self.system.cone)
        return simulate_strict(self.system, c, self.x0, self.h)


def control_from_json(obj: dict, m: int) -> ControlSignal | StrictControl:
    validate_schema(obj, CONTROL_SCHEMA)
    if obj["kind"] == "extended":
        for i, rec in enumerate(obj["records"]):
            if len(rec[2]) != m:
                raise SchemaError(f"expected {m} control components", f"/records/{i}/2")
        return ControlSignal.from_records(obj["records"], obj["horizon"])
    for i, rec in enumerate(obj["records"]):
        if len(rec[1]) != m:
            raise SchemaError(f"expected {m} control components", f"/records/{i}/1")
    return StrictControl.from_records(obj["records"], obj["horizon"])


def load_control(path: str | Path, m: int) -> ControlSignal | StrictControl:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read control file {path}: {e}") from None
    return control_from_json(obj, m)


def scenario_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _len_check(values, expected: int, pointer: str):
    if len(values) != expected:
        raise SchemaError(f"expected {expected} entries, got {len(values)}", pointer)


def _parse_at(text: str, n: int, pointer: str, hypothesis: str | None = None) -> ex.Expression:
    try:
        return ex.parse(text, n)
    except InputError as e:
        if hypothesis:
            raise ValidationError(f"{pointer}: {e}", hypothesis) from None
        raise SchemaError(str(e), pointer) from None


def build_scenario(data: dict, name: str = "scenario") -> Scenario:
    validate_schema(data)
    n, m, m1, m2 = data["n"], data["m"], data["m1"], data["m2"]
    if m1 + m2 != m:
        raise ValidationError(f"m1 + m2 = {m1 + m2} but m = {m}; the cone must split as C1 x C2", "(iii)")
    _len_check(data["f"], n, "/f")
    _len_check(data["g"], m, "/g")
    _len_check(data["x0"], n, "/x0")
    _len_check(data["box"]["lo"], n, "/box/lo")
    _len_check(data["box"]["hi"], n, "/box/hi")
    f = VectorField(n, tuple(_parse_at(t, n, f"/f/{i}") for i, t in enumerate(data["f"])))
    g = []
    for j, comps in enumerate(data["g"]):
        _len_check(comps, n, f"/g/{j}")
        g.append(VectorField(n, tuple(_parse_at(t, n, f"/g/{j}/{i}") for i, t in enumerate(comps))))
    for v, where in [(f, "/f")] + [(gj, f"/g/{j}") for j, gj in enumerate(g)]:
        if ex.TIME in {x for c in v.components for x in c.variables()}:
            raise ValidationError(f"{where}: vector fields must be autonomous", "(i)")
    cone_data = data.get("cone", {})
    try:
        cone = ControlCone.build(m1, m2, cone_data.get("C2_generators", []), cone_data.get("C1_extra_generators", []))
    except ConeError as e:
        raise SchemaError(str(e), "/cone") from None
    if m2 and not cone.c2_generators:
        raise ValidationError("C2 needs at least one generator when m2 > 0", "(iii)")
    try:
        cone.check_pointed_c2()
    except ConeError:
        raise ValidationError("C2 contains no lines is violated: the generators span a line", "(iii)") from None
    system = ControlSystem(f, tuple(g), cone)
    cost = _parse_at(data["cost"], n, "/cost", hypothesis="(ii)")
    tg = data["target"]
    if tg["type"] == "point":
        _len_check(tg["x"], n, "/target/x")
        target = PointTarget(float(tg["t"]), tuple(float(v) for v in tg["x"]))
    elif tg["type"] == "level_set":
        target = LevelSetTarget(n, tuple(_parse_at(t, n, f"/target/constraints/{i}")
                                         for i, t in enumerate(tg["constraints"])))
    else:
        target = FreeTarget(n)
    K = math.inf if data["K"] == "inf" else float(data["K"])
    lo, hi = np.array(data["box"]["lo"], dtype=float), np.array(data["box"]["hi"], dtype=float)
    if np.any(lo > hi):
        raise SchemaError("box lower bounds exceed upper bounds", "/box")
    sc = Scenario(data.get("name", name), data, system, np.array(data["x0"], dtype=float), target, cost, K,
                  data.get("h"), (lo, hi), data.get("max_degree", 3))
    if "reference" in data:
        ref = data["reference"]
        col = 2 if ref["kind"] == "extended" else 1
        for i, rec in enumerate(ref["records"]):
            if len(rec[col]) != m:
                raise SchemaError(f"expected {m} control components", f"/reference/records/{i}/{col}")
    if "certificate" in data:
        _len_check(data["certificate"]["p_T"], n, "/certificate/p_T")
    sc.warnings.extend(boundedness_warnings(sc))
    for w in sc.warnings:
        log.warning(w)
    return sc


def boundedness_warnings(sc: Scenario, samples: int = 2048) -> list[str]:
    """Sampled check that the fields and their Jacobians stay bounded over the declared box."""
    from .metric import _box_samples

    lo, hi = sc.box
    X = _box_samples(lo, hi, samples)
    with np.errstate(all="ignore"):
        try:
            M, L = field_constants(sc.system, X)
        except ArithmeticError as e:
            return [f"fields could not be evaluated over the box: {e}"]
    out = []
    if not math.isfinite(M) or M > BOUNDEDNESS_LIMIT:
        out.append(f"sampled sup of the fields over the box is {M:.3g}; hypothesis (i) may fail")
    if not math.isfinite(L) or L > BOUNDEDNESS_LIMIT:
        out.append(f"sampled sup of the field Jacobians over the box is {L:.3g}; hypothesis (i) may fail")
    return out


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise InputError(f"cannot read scenario {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}", "") from None
    return build_scenario(data, p.stem)


def shipped_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (``pure_jump`` or ``reach_point``)."""
    ref = resources.files("impulse_gap") / "scenarios" / f"{name}.json"
    return Path(str(ref))
